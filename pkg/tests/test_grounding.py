"""Evaluator and unsatisfied-set tests, including the brute-force oracle.

The oracle evaluator below is written independently of the production
implementation: no short-circuiting, When expanded by explicit truth table,
Exists by full witness enumeration.
"""

import hashlib

import pytest

from homeplan.errors import UnknownObjectError
from homeplan.formula import (
    And,
    Atom,
    Exists,
    Not,
    When,
    parse_precondition,
)
from homeplan.grounding import MessageTable, evaluate, unsatisfied
from homeplan.tools import load_precondition_pairs
from homeplan.world import ATTRIBUTE_NAMES, ObjectAttributes, ObjectInfo

from .conftest import make_object, make_world

SEARCH = parse_precondition(load_precondition_pairs()["tools"]["Search Object"]["ground_truth"])
PICK_UP = parse_precondition(load_precondition_pairs()["tools"]["Pick Up Object"]["ground_truth"])
PLACE = parse_precondition(load_precondition_pairs()["tools"]["Place Object"]["ground_truth"])


def closed_cabinet_world(**overrides):
    attrs = dict(receptacle=True, openable=True, visible=True)
    attrs.update(overrides)
    return make_world({"Cabinet_1": make_object(**attrs)})


def test_search_on_closed_cabinet_is_false():
    world = closed_cabinet_world()
    assert evaluate(SEARCH, world, {"?x": "Cabinet_1"}) is False


def test_search_on_open_cabinet_is_true():
    world = closed_cabinet_world(isOpen=True)
    assert evaluate(SEARCH, world, {"?x": "Cabinet_1"}) is True


def test_when_with_false_antecedent_is_vacuously_true():
    world = make_world({"CounterTop_1": make_object(receptacle=True, visible=True)})
    formula = When(And((Atom("openable", "?x"),)), And((Atom("isBroken", "?x"),)))
    assert evaluate(formula, world, {"?x": "CounterTop_1"}) is True


def test_exists_finds_witness():
    world = make_world(
        {
            "Mug_1": make_object(canFillWithLiquid=True),
            "Pot_1": make_object(canFillWithLiquid=True, isFilledWithLiquid=True),
        }
    )
    formula = Exists("?y", And((Atom("isFilledWithLiquid", "?y"),)))
    assert evaluate(formula, world, {}) is True


def test_exists_without_witness():
    world = make_world({"Mug_1": make_object()})
    formula = Exists("?y", And((Atom("isFilledWithLiquid", "?y"),)))
    assert evaluate(formula, world, {}) is False


def test_evaluate_rejects_unknown_bound_object():
    world = make_world({"Mug_1": make_object()})
    with pytest.raises(UnknownObjectError):
        evaluate(Atom("visible", "?x"), world, {"?x": "Ghost_1"})


def test_nullary_reads_agent_state():
    world = make_world(
        {"Mug_1": make_object(zone=None, pickupable=True, isPickedUp=True)}, holding="Mug_1"
    )
    assert evaluate(Atom("isHoldingObject", None), world, {}) is True


def test_unsatisfied_empty_iff_true():
    world = closed_cabinet_world(isOpen=True)
    assert unsatisfied(SEARCH, world, {"?x": "Cabinet_1"}) == []


def test_unsatisfied_place_not_visible_message():
    world = make_world({"CounterTop_1": make_object(receptacle=True, visible=False)})
    items = unsatisfied(PLACE, world, {"?x": "CounterTop_1"})
    messages = [item.message for item in items]
    assert "the target object is not visible" in messages
    assert "the agent is not holding an object" in messages  # empty hand too


def test_unsatisfied_pick_up_while_holding():
    world = make_world(
        {
            "Mug_1": make_object(zone=None, pickupable=True, isPickedUp=True),
            "Knife_1": make_object(pickupable=True, visible=True),
        },
        holding="Mug_1",
    )
    items = unsatisfied(PICK_UP, world, {"?x": "Knife_1"})
    assert [item.message for item in items] == ["the agent is already holding an object"]


def test_unsatisfied_when_true_antecedent_descends():
    world = closed_cabinet_world()
    items = unsatisfied(SEARCH, world, {"?x": "Cabinet_1"})
    assert [item.message for item in items] == ["the target object is not open"]


def test_unsatisfied_exists_reported_as_single_item():
    world = make_world({"Mug_1": make_object(pickupable=True, visible=True)}, holding=None)
    formula = parse_precondition(
        "(exists (?y) (and (isWaterSource ?y) (isToggled ?y) (visible ?y)))"
    )
    items = unsatisfied(formula, world, {})
    assert len(items) == 1
    assert items[0].message.startswith("no object in the environment satisfies (exists (?y)")


def test_unsatisfied_preserves_formula_order():
    world = make_world({"Box_1": make_object()})
    formula = And((Atom("receptacle", "?x"), Atom("visible", "?x")))
    items = unsatisfied(formula, world, {"?x": "Box_1"})
    assert [item.message for item in items] == [
        "the target object is not a receptacle",
        "the target object is not visible",
    ]


def test_message_table_override(tmp_path):
    table_file = tmp_path / "messages.json"
    table_file.write_text(
        """
        {"atoms": {"visible": {"required_true": "cannot see it",
                                "required_false": "should not see it"}},
         "exists": "nothing matches {formula}",
         "fallback": "failed: {formula}",
         "special": {}}
        """
    )
    table = MessageTable.load(table_file)
    world = make_world({"Box_1": make_object()})
    items = unsatisfied(Atom("visible", "?x"), world, {"?x": "Box_1"}, messages=table)
    assert items[0].message == "cannot see it"


# ---------------------------------------------------------------------------
# Independent oracle


def oracle_evaluate(formula, state, binding):
    if isinstance(formula, Atom):
        if formula.name == "isHoldingObject":
            return state.agent.is_holding_object
        return getattr(state.objects[binding[formula.variable]].attributes, formula.name)
    if isinstance(formula, Not):
        return not oracle_evaluate(formula.child, state, binding)
    if isinstance(formula, And):
        results = [oracle_evaluate(child, state, binding) for child in formula.children]
        return all(results)
    if isinstance(formula, When):
        a = oracle_evaluate(formula.antecedent, state, binding)
        b = oracle_evaluate(formula.consequent, state, binding)
        truth_table = {(True, True): True, (True, False): False,
                       (False, True): True, (False, False): True}
        return truth_table[(a, b)]
    if isinstance(formula, Exists):
        witnesses = []
        for candidate in state.objects:
            extended = dict(binding)
            extended[formula.variable] = candidate
            witnesses.append(oracle_evaluate(formula.body, state, extended))
        return any(witnesses)
    raise TypeError(formula)


def _rand(seed, *labels):
    key = "|".join(str(label) for label in labels)
    return int.from_bytes(hashlib.sha256(f"{seed}:{key}".encode()).digest()[:8], "big")


def random_formula(seed, case, depth, variables=("?x",)):
    pick = _rand(seed, case, depth, len(variables), "node") % (5 if depth > 0 else 1)
    if pick == 0:
        choice = _rand(seed, case, depth, "atom") % (len(ATTRIBUTE_NAMES) + 1)
        if choice == len(ATTRIBUTE_NAMES):
            return Atom("isHoldingObject", None)
        var = variables[_rand(seed, case, depth, "var") % len(variables)]
        return Atom(ATTRIBUTE_NAMES[choice], var)
    if pick == 1:
        return Not(random_formula(seed, case, depth - 1, variables))
    if pick == 2:
        n = 1 + _rand(seed, case, depth, "width") % 3
        return And(
            tuple(
                random_formula(seed, (case, i), depth - 1, variables) for i in range(n)
            )
        )
    if pick == 3:
        return When(
            random_formula(seed, (case, "a"), depth - 1, variables),
            random_formula(seed, (case, "b"), depth - 1, variables),
        )
    fresh = f"?v{len(variables)}"
    return Exists(fresh, random_formula(seed, (case, "e"), depth - 1, variables + (fresh,)))


def random_world(seed, case):
    n = 1 + _rand(seed, case, "objects") % 6
    objects = {}
    for i in range(n):
        bits = _rand(seed, case, "attrs", i)
        values = {name: bool((bits >> k) & 1) for k, name in enumerate(ATTRIBUTE_NAMES)}
        objects[f"Item_{i + 1}"] = ObjectInfo(
            attributes=ObjectAttributes(**values), zone="kitchen"
        )
    holding = _rand(seed, case, "holding") % 2 == 0
    world = make_world(objects)
    if holding:
        world = world.__class__(
            objects=objects,
            containment={},
            agent=world.agent.__class__(
                current_zone="kitchen",
                rng_seed=seed,
                is_holding_object=True,
                held_object=None,  # synthetic: only the flag matters here
            ),
        )
    return world


def run_oracle_comparison(cases=1000, seed=20240801):
    mismatches = 0
    for case in range(cases):
        world = random_world(seed, case)
        formula = random_formula(seed, case, depth=4)
        binding = {"?x": "Item_1"}
        fast = evaluate(formula, world, binding)
        slow = oracle_evaluate(formula, world, binding)
        if fast is not slow:
            mismatches += 1
        items = unsatisfied(formula, world, binding)
        if (len(items) == 0) is not fast:
            mismatches += 1
    return mismatches


def test_oracle_equivalence_thousand_cases():
    assert run_oracle_comparison(1000) == 0
