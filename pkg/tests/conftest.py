from __future__ import annotations

import shutil
from fractions import Fraction as F

import numpy as np
import pytest

from confmc.benchmarks import table1
from confmc.core import ConstantMixed, Dist, MdpModel, mdp_validate


def pytest_collection_modifyitems(config, items):
    if shutil.which("z3"):
        return
    skip = pytest.mark.skip(reason="z3 not on PATH")
    for item in items:
        if "solver" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def t1() -> MdpModel:
    return table1()


@pytest.fixture
def mixed() -> ConstantMixed:
    """0.4 a + 0.6 b on the toy model."""
    return ConstantMixed(Dist({0: F(2, 5), 1: F(3, 5)}))


@pytest.fixture
def chain() -> MdpModel:
    """s0 -> s1 with probability 1 under 'go'; s1 absorbing."""
    m = MdpModel(
        state_names=("s0", "s1"),
        action_names=("go",),
        matrices=(((F(0), F(1)), (F(0), F(1))),),
    )
    mdp_validate(m)
    return m


@pytest.fixture
def random_mdp():
    """Factory for small random MDPs with exact rows."""

    def _make(n_states: int = 3, n_actions: int = 2, seed: int = 0) -> MdpModel:
        rng = np.random.default_rng(seed)
        matrices = []
        for _ in range(n_actions):
            rows = []
            for _ in range(n_states):
                w = [int(v) for v in rng.integers(0, 4, size=n_states)]
                if sum(w) == 0:
                    w[int(rng.integers(n_states))] = 1
                rows.append(tuple(F(v, sum(w)) for v in w))
            matrices.append(tuple(rows))
        m = MdpModel(
            state_names=tuple(f"q{i}" for i in range(n_states)),
            action_names=tuple(f"a{i}" for i in range(n_actions)),
            matrices=tuple(matrices),
        )
        mdp_validate(m)
        return m

    return _make
