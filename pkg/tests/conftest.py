import json
import pathlib

import pytest

from affsched.nest import load_nest
from affsched.procedure import run_procedure

FIXTURE_DIR = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

FIXTURE_NAMES = ("vecadd", "chain", "stencil", "addmat", "matvec", "matmul")


def fixture_doc(name):
    return json.loads((FIXTURE_DIR / f"{name}.json").read_text())


def fixture_nest(name):
    return load_nest(fixture_doc(name))


# default spatial dimension count per fixture: one spatial dimension where
# the nest is deep enough, none for single loops
DEFAULT_R = {
    "vecadd": 0,
    "chain": 0,
    "stencil": 1,
    "addmat": 1,
    "matvec": 1,
    "matmul": 1,
}

_plan_cache = {}


def fixture_plan(name, r_space=None, **kwargs):
    if r_space is None:
        r_space = DEFAULT_R[name]
    key = (name, r_space, tuple(sorted(kwargs.items())))
    if key not in _plan_cache:
        _plan_cache[key] = run_procedure(fixture_nest(name), r_space=r_space, **kwargs)
    return _plan_cache[key]


@pytest.fixture
def nests():
    return {name: fixture_nest(name) for name in FIXTURE_NAMES}
