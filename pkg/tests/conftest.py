import copy
from pathlib import Path

import numpy as np
import pytest

from hughes_control import config as config_mod
from hughes_control.forward import Problem

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
DATA = Path(__file__).resolve().parent / "data"

# 4 m room, 16 x 16 cells, door in the middle of the right wall
BASE = {
    "geometry": {"lx": 4.0, "ly": 4.0, "nx": 16, "ny": 16,
                 "doors": [{"side": "right", "start": 1.5, "end": 2.5}]},
    "time": {"T": 2.0, "n_steps": 40},
    "initial_density": {"kind": "box", "value": 0.8, "box": [0.5, 2.5, 0.5, 3.5]},
}


def merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def make_config(extra=None, base=BASE):
    return config_mod.from_dict(merge(base, extra or {}))


def make_problem(extra=None, base=BASE):
    return Problem(make_config(extra, base))


def unit_square(n=16, T=1.0, n_steps=64, sealed=True, **extra):
    """Unit square with a door on the right wall, sealed by default."""
    data = {
        "geometry": {"lx": 1.0, "ly": 1.0, "nx": n, "ny": n, "sealed_doors": sealed,
                     "doors": [{"side": "right", "start": 0.0, "end": 1.0}]},
        "time": {"T": T, "n_steps": n_steps},
        "initial_density": {"kind": "constant", "value": 1.0},
    }
    return merge(data, extra)


def load(name):
    return Problem.from_path(SCENARIOS / f"{name}.toml")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def reference():
    return load("reference")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
