from importlib import resources
from pathlib import Path

import pytest

from homeplan.world import (
    AgentState,
    ObjectAttributes,
    ObjectInfo,
    WorldState,
)


def data_path(relative: str) -> Path:
    return Path(resources.files("homeplan.data").joinpath(relative))


def make_object(zone="kitchen", **attrs) -> ObjectInfo:
    return ObjectInfo(attributes=ObjectAttributes(**attrs), zone=zone)


def make_world(objects, containment=None, agent_zone="kitchen", seed=7, holding=None,
               discovered=(), nav_faults=()):
    agent = AgentState(
        current_zone=agent_zone,
        rng_seed=seed,
        is_holding_object=holding is not None,
        held_object=holding,
    )
    return WorldState(
        objects=objects,
        containment=dict(containment or {}),
        agent=agent,
        discovered=frozenset(discovered),
        nav_faults=frozenset(nav_faults),
    )


@pytest.fixture
def kitchen_world():
    from homeplan.world import load_world

    return load_world(data_path("worlds/kitchen.json"))


@pytest.fixture
def clear_table_trace():
    from homeplan.sim import load_trace

    return load_trace(data_path("traces/clear_table.json"))


@pytest.fixture
def clear_table_task():
    from homeplan.sim import load_task

    return load_task(data_path("tasks/clear_table.json"))
