from __future__ import annotations

from fractions import Fraction as F

import pytest

from confmc.antichain import backward_reach
from confmc.benchmarks import (
    casino_query,
    casino_target,
    exam_query,
    gen_casino,
    gen_exam,
    subsetsum,
    table1,
    table1_query,
)
from confmc.core import ConstantMixed, Dist
from confmc.errors import InvalidInput
from confmc.semantics import SemanticsId


def test_table1_query_matches_model():
    m = table1()
    q = table1_query(m)
    assert q.semantics is SemanticsId.CSMT
    assert q.threshold == F(9, 10)
    assert q.target.dimension == m.n_states


def test_casino_shape():
    m = gen_casino(3, 2, rng_seed=1)
    assert m.state_names == ("P", "R_1", "R_2")
    assert m.action_names == ("keep", "b_1", "b_2", "b_3")
    # keep is the identity
    assert all(m.matrices[0][i][i] == 1 for i in range(3))
    # rewards return to play
    assert m.matrices[1][1] == (1, 0, 0)


def test_casino_absorbing_rewards():
    m = gen_casino(2, 2, return_to_play=False, rng_seed=1)
    assert m.matrices[2][2] == (0, 0, 1)


def test_casino_seeded():
    assert gen_casino(2, 3, rng_seed=7) == gen_casino(2, 3, rng_seed=7)
    assert gen_casino(2, 3, rng_seed=7) != gen_casino(2, 3, rng_seed=8)


def test_casino_target_and_query():
    m = gen_casino(2, 2, rng_seed=3)
    best = max(m.matrices[a][0][1] for a in (1, 2))
    assert casino_target(m).generators[0][1] == best / 4
    q = casino_query(m)
    assert q.options.k == 5
    assert q.semantics is SemanticsId.MSCT


def test_casino_target_reachable_in_one_round():
    m = gen_casino(2, 2, rng_seed=3)
    q = casino_query(m)
    out = backward_reach(m, q.initial, q.target, K=q.options.k)
    assert out.reachable
    assert len(out.witness) == 1
    assert out.witness[0] != 0


def test_exam_rows():
    m = gen_exam(2, 3, decay=F(1, 3), rng_seed=0)
    assert m.state_names[0] == "R"
    assert m.action_names == ("P_1", "P_2")
    for a in range(m.n_actions):
        assert m.matrices[a][0][0] == F(1, 3)
        assert sum(m.matrices[a][0]) == 1
        assert m.matrices[a][2][2] == 1


def test_exam_query():
    m = gen_exam(2, 2)
    q = exam_query(m)
    assert q.semantics is SemanticsId.CSMT
    assert q.initial[0] == 1


@pytest.mark.parametrize(
    "call",
    [
        lambda: gen_casino(0, 2),
        lambda: gen_casino(2, 0),
        lambda: gen_exam(1, 0),
        lambda: gen_exam(1, 2, decay=1),
    ],
)
def test_generator_arguments_checked(call):
    with pytest.raises(InvalidInput):
        call()


def test_subsetsum_query():
    m, q = subsetsum([1, 2, 3], 3)
    assert q.semantics is SemanticsId.MSCT
    assert q.threshold == F(1, 8)
    assert q.options.depth == 1
    assert q.scheduler == ConstantMixed(Dist.dirac(0))
    assert len(q.initial) == m.n_states
