"""Object, agent, and world-state vocabulary shared by every other module.

A world is a set of objects with sixteen boolean attributes, a containment
forest over those objects, and a single agent with a zone position and an
optional held object. States are values: simulator operations never mutate
a state, they return new ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import (
    InvalidObjectIdError,
    UnknownAttributeError,
    UnknownObjectError,
    WorldFormatError,
)

# Closed attribute vocabulary, in canonical listing order. Unknown names are
# errors everywhere, never silently-false.
ATTRIBUTE_NAMES: tuple[str, ...] = (
    "moveable",
    "breakable",
    "canFillWithLiquid",
    "isToggled",
    "pickupable",
    "isOpen",
    "isBroken",
    "visible",
    "receptacle",
    "openable",
    "isPickedUp",
    "toggleable",
    "isFilledWithLiquid",
    "cookable",
    "isCooked",
    "isWaterSource",
)

# Nullary agent predicate usable in formulas alongside the sixteen above.
AGENT_PREDICATE = "isHoldingObject"

# Wildcard zone: objects placed here (floors) are visible from every zone.
ZONE_ANY = "*"

# attribute -> attribute it implies (isOpen=true requires openable=true, ...)
_ATTRIBUTE_DEPENDENCIES = {
    "isOpen": "openable",
    "isToggled": "toggleable",
    "isPickedUp": "pickupable",
    "isCooked": "cookable",
    "isFilledWithLiquid": "canFillWithLiquid",
}


@dataclass(frozen=True)
class ObjectAttributes:
    """The sixteen stored boolean attributes of one object."""

    moveable: bool = False
    breakable: bool = False
    canFillWithLiquid: bool = False
    isToggled: bool = False
    pickupable: bool = False
    isOpen: bool = False
    isBroken: bool = False
    visible: bool = False
    receptacle: bool = False
    openable: bool = False
    isPickedUp: bool = False
    toggleable: bool = False
    isFilledWithLiquid: bool = False
    cookable: bool = False
    isCooked: bool = False
    isWaterSource: bool = False

    def get(self, name: str) -> bool:
        if name not in ATTRIBUTE_NAMES:
            raise UnknownAttributeError(name)
        return getattr(self, name)

    def with_value(self, name: str, value: bool) -> "ObjectAttributes":
        if name not in ATTRIBUTE_NAMES:
            raise UnknownAttributeError(name)
        return replace(self, **{name: value})


@dataclass(frozen=True, order=True)
class ObjectId:
    """Structured form of an id string like ``Cabinet_4``."""

    category: str
    instance_index: int

    def render(self) -> str:
        return f"{self.category}_{self.instance_index}"

    @classmethod
    def parse(cls, text: str) -> "ObjectId":
        head, sep, tail = text.rpartition("_")
        if not sep or not head:
            raise InvalidObjectIdError(text, "expected Category_N")
        if not tail.isdigit():
            raise InvalidObjectIdError(text, "instance index must be digits")
        index = int(tail)
        if index <= 0:
            raise InvalidObjectIdError(text, "instance index must be positive")
        if tail != str(index):
            raise InvalidObjectIdError(text, "instance index has leading zeros")
        return cls(category=head, instance_index=index)

    def __str__(self) -> str:
        return self.render()


def category_of(object_id: str) -> str:
    return ObjectId.parse(object_id).category


@dataclass(frozen=True)
class ObjectInfo:
    """One object's attributes plus its fixture-level placement and roles.

    zone is None exactly when the object is held by the agent. conspicuous
    objects are found by exploration even while sitting inside or on an open
    receptacle. heat_source receptacles cook their cookable contents when
    toggled on. display_id, when set, replaces the id in inspection output.
    """

    attributes: ObjectAttributes
    zone: str | None
    conspicuous: bool = False
    heat_source: bool = False
    display_id: str | None = None
    controls: tuple[str, ...] = ()


@dataclass(frozen=True)
class AgentState:
    """Agent pose, manipulator state, and deterministic-replay counters."""

    current_zone: str
    rng_seed: int
    is_holding_object: bool = False
    held_object: str | None = None
    explore_count: int = 0
    action_count: int = 0


@dataclass(frozen=True)
class WorldState:
    """Full simulator snapshot. Treat as immutable; operations return copies.

    containment maps child id -> parent id and must form a forest.
    nav_faults lists action indices at which a repositioning silently fails
    to relocate the agent (fixture-authored fault injection).
    """

    objects: dict[str, ObjectInfo]
    containment: dict[str, str]
    agent: AgentState
    discovered: frozenset[str] = frozenset()
    nav_faults: frozenset[int] = frozenset()

    def object_ids(self) -> list[str]:
        return sorted(self.objects)

    def info(self, object_id: str) -> ObjectInfo:
        try:
            return self.objects[object_id]
        except KeyError:
            raise UnknownObjectError(object_id) from None

    def parent_of(self, object_id: str) -> str | None:
        return self.containment.get(object_id)

    def children_of(self, object_id: str) -> list[str]:
        # Insertion order of the containment map; deterministic and stable.
        return [child for child, parent in self.containment.items() if parent == object_id]

    def ancestors_of(self, object_id: str) -> list[str]:
        chain = []
        seen = set()
        current = self.containment.get(object_id)
        while current is not None and current not in seen:
            chain.append(current)
            seen.add(current)
            current = self.containment.get(current)
        return chain

    def effective_zone(self, object_id: str) -> str:
        """Zone the object occupies; a held object travels with the agent."""
        info = self.info(object_id)
        if self.agent.held_object == object_id:
            return self.agent.current_zone
        if info.zone is None:
            raise WorldFormatError(f"{object_id} has no zone and is not held")
        return info.zone

    def zones(self) -> list[str]:
        """All concrete zones, sorted; the wildcard zone is not listed."""
        names = {info.zone for info in self.objects.values() if info.zone not in (None, ZONE_ANY)}
        names.add(self.agent.current_zone)
        return sorted(names)


def attribute_lookup(state: WorldState, object_id: str, attribute: str) -> bool:
    """Read one stored attribute; the atom-evaluation primitive."""
    return state.info(object_id).attributes.get(attribute)


def validate_world(state: WorldState) -> list[str]:
    """Return a description of every violated invariant (empty when valid)."""
    violations: list[str] = []

    for object_id, info in state.objects.items():
        attrs = info.attributes
        for attr, dependency in _ATTRIBUTE_DEPENDENCIES.items():
            if attrs.get(attr) and not attrs.get(dependency):
                violations.append(f"{object_id}: {attr} without {dependency}")

    for child, parent in state.containment.items():
        if child not in state.objects:
            violations.append(f"containment child {child} does not exist")
        if parent not in state.objects:
            violations.append(f"containment parent {parent} does not exist")
        elif not state.objects[parent].attributes.receptacle:
            violations.append(f"{parent}: containment parent without receptacle")

    # Cycle check over the child->parent map; each cycle reported once.
    in_reported_cycle: set[str] = set()
    for start in state.containment:
        if start in in_reported_cycle:
            continue
        slow = start
        seen = set()
        while slow in state.containment:
            if slow in seen:
                break
            seen.add(slow)
            slow = state.containment[slow]
        else:
            continue
        if slow == start:
            cycle = [start]
            node = state.containment[start]
            while node != start:
                cycle.append(node)
                node = state.containment[node]
            in_reported_cycle.update(cycle)
            violations.append("containment cycle: " + " -> ".join(cycle + [start]))

    agent = state.agent
    if agent.is_holding_object != (agent.held_object is not None):
        violations.append("agent: isHoldingObject flag disagrees with heldObject")
    if agent.held_object is not None:
        if agent.held_object not in state.objects:
            violations.append(f"agent: held object {agent.held_object} does not exist")
        else:
            if not state.objects[agent.held_object].attributes.isPickedUp:
                violations.append(f"{agent.held_object}: held but isPickedUp is false")
            if agent.held_object in state.containment:
                violations.append(f"{agent.held_object}: held object has a containment parent")

    for object_id in state.discovered:
        if object_id not in state.objects:
            violations.append(f"discovered id {object_id} does not exist")

    for object_id, info in state.objects.items():
        if info.zone is None and agent.held_object != object_id:
            violations.append(f"{object_id}: no zone but not held by the agent")

    return violations


# ---------------------------------------------------------------------------
# World fixture files


_OBJECT_KEYS = {"zone", "attributes", "conspicuous", "heat_source", "display_id", "controls"}
_AGENT_KEYS = {"zone", "seed", "holding"}
_TOP_KEYS = {"objects", "containment", "agent", "discovered", "nav_faults"}


def world_from_dict(data: dict) -> WorldState:
    """Build a world from fixture data, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise WorldFormatError("world fixture must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise WorldFormatError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("objects", "containment", "agent"):
        if key not in data:
            raise WorldFormatError(f"missing top-level key: {key!r}")

    objects: dict[str, ObjectInfo] = {}
    for object_id, entry in data["objects"].items():
        ObjectId.parse(object_id)
        if not isinstance(entry, dict):
            raise WorldFormatError(f"{object_id}: object entry must be an object")
        unknown = set(entry) - _OBJECT_KEYS
        if unknown:
            raise WorldFormatError(f"{object_id}: unknown keys {sorted(unknown)}")
        raw_attrs = entry.get("attributes", {})
        bad = set(raw_attrs) - set(ATTRIBUTE_NAMES)
        if bad:
            raise WorldFormatError(f"{object_id}: unknown attributes {sorted(bad)}")
        attrs = ObjectAttributes(**{name: bool(value) for name, value in raw_attrs.items()})
        objects[object_id] = ObjectInfo(
            attributes=attrs,
            zone=entry.get("zone"),
            conspicuous=bool(entry.get("conspicuous", False)),
            heat_source=bool(entry.get("heat_source", False)),
            display_id=entry.get("display_id"),
            controls=tuple(entry.get("controls", ())),
        )

    containment: dict[str, str] = {}
    for edge in data["containment"]:
        if not (isinstance(edge, (list, tuple)) and len(edge) == 2):
            raise WorldFormatError(f"containment edge must be [child, parent]: {edge!r}")
        child, parent = edge
        if child in containment:
            raise WorldFormatError(f"{child}: more than one containment parent")
        containment[child] = parent

    raw_agent = data["agent"]
    unknown = set(raw_agent) - _AGENT_KEYS
    if unknown:
        raise WorldFormatError(f"agent: unknown keys {sorted(unknown)}")
    held = raw_agent.get("holding")
    agent = AgentState(
        current_zone=raw_agent["zone"],
        rng_seed=int(raw_agent["seed"]),
        is_holding_object=held is not None,
        held_object=held,
    )

    state = WorldState(
        objects=objects,
        containment=containment,
        agent=agent,
        discovered=frozenset(data.get("discovered", ())),
        nav_faults=frozenset(int(i) for i in data.get("nav_faults", ())),
    )
    problems = validate_world(state)
    if problems:
        raise WorldFormatError("invalid world fixture: " + "; ".join(problems))
    return state


def load_world(path: str | Path) -> WorldState:
    with open(path, encoding="utf-8") as handle:
        return world_from_dict(json.load(handle))
