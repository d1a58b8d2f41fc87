from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction as F

import numpy as np
import pytest

from confmc.core import (
    ActionWord,
    Configuration,
    ConstantMixed,
    Dist,
    HistoryTable,
    LinearFractional,
    MdpModel,
    Vec01,
    couple,
    dist_new,
    leq,
    mdp_validate,
    pushforward,
    scheduler_eval,
    to_rat,
    uniform_scheduler,
)
from confmc.errors import (
    DimensionMismatch,
    InvalidInput,
    InvalidScheduler,
    NegativeWeight,
    NotNormalized,
    NotStochastic,
)


# ---------------------------------------------------------------------------
# Dist
# ---------------------------------------------------------------------------

def test_dist_new_merges_duplicates():
    d = dist_new([("x", F(1, 2)), ("x", F(1, 2))])
    assert d == Dist.dirac("x")
    assert d.is_dirac()


def test_dist_new_mixed_weights():
    d = dist_new([("a", F(2, 5)), ("b", F(3, 5))])
    assert d["a"] == F(2, 5)
    assert d["b"] == F(3, 5)


def test_dist_drops_zero_weights():
    d = Dist({"a": 1, "b": 0})
    assert d.support == ("a",)


def test_dist_rejects_bad_weights():
    with pytest.raises(NotNormalized):
        Dist({"a": F(1, 2)})
    with pytest.raises(NegativeWeight):
        Dist({"a": F(3, 2), "b": F(-1, 2)})


def test_dist_equal_regardless_of_insertion_order():
    assert Dist({"b": F(1, 3), "a": F(2, 3)}) == Dist({"a": F(2, 3), "b": F(1, 3)})
    assert list(Dist({"b": F(1, 3), "a": F(2, 3)})) == ["a", "b"]


def test_to_rat_float_uses_shortest_repr():
    assert to_rat(0.1) == F(1, 10)
    assert to_rat("1/3") == F(1, 3)
    with pytest.raises(TypeError):
        to_rat(True)


def test_pushforward_identity_and_constant():
    d = Dist({0: F(1, 4), 1: F(3, 4)})
    assert pushforward(lambda x: x, d) == d
    assert pushforward(lambda x: "c", d) == Dist.dirac("c")


def test_pushforward_composes():
    rng = np.random.default_rng(3)
    f = lambda x: x % 3  # noqa: E731
    g = lambda x: (x * 2, x > 0)  # noqa: E731
    for _ in range(200):
        keys = rng.choice(10, size=int(rng.integers(1, 6)), replace=False)
        w = [int(v) for v in rng.integers(1, 5, size=len(keys))]
        d = Dist({int(k): F(v, sum(w)) for k, v in zip(keys, w)})
        assert pushforward(lambda x: g(f(x)), d) == pushforward(g, pushforward(f, d))


def test_pushforward_merges_images():
    f = {0: 1, 1: 1, 2: 2}
    assert pushforward(f.__getitem__, Dist.dirac(0)) == Dist.dirac(1)


def test_couple_products():
    e = Dist({"a": F(2, 5), "b": F(3, 5)})
    assert couple((1, 0, 0), e) == Dist({(0, "a"): F(2, 5), (0, "b"): F(3, 5)})
    c = couple((0, F(1, 2), F(1, 2)), Dist({"a": F(1, 2), "b": F(1, 2)}))
    assert len(c) == 4
    assert set(c.values()) == {F(1, 4)}


# ---------------------------------------------------------------------------
# Vectors
# ---------------------------------------------------------------------------

def test_configuration_must_sum_to_one():
    with pytest.raises(NotNormalized):
        Configuration((F(1, 2), F(1, 3)))
    with pytest.raises(InvalidInput):
        Vec01((F(3, 2), 0))


def test_configuration_repr_and_support():
    c = Configuration((0, F(1, 2), F(1, 2)))
    assert repr(c) == "(0, 1/2, 1/2)"
    assert c.support == (1, 2)
    assert Configuration.from_dist(c.as_dist(), 3) == c


def test_leq_examples():
    assert leq((0, 0, F(7, 10)), (0, F(1, 10), F(9, 10)))
    x = (F(1, 3), 0, 1)
    assert leq(x, x)
    assert not leq((1, 0, 0), (0, 0, F(9, 10)))
    assert not leq((0, 0, F(9, 10)), (1, 0, 0))
    with pytest.raises(DimensionMismatch):
        leq((0, 1), (0, 0, 1))


def _grid_vec(rng, n=3):
    return Vec01(tuple(F(int(v), 2) for v in rng.integers(0, 3, size=n)))


def _grid_config(rng, n=3):
    w = [int(v) for v in rng.integers(0, 3, size=n)]
    if sum(w) == 0:
        w[0] = 1
    return Configuration(tuple(F(v, sum(w)) for v in w))


@pytest.mark.parametrize("draw", [_grid_vec, _grid_config], ids=["vec01", "configuration"])
def test_leq_is_a_partial_order(draw):
    rng = np.random.default_rng(13)
    for _ in range(500):
        x, y, z = draw(rng), draw(rng), draw(rng)
        assert leq(x, x)
        if leq(x, y) and leq(y, x):
            assert tuple(x) == tuple(y)
        if leq(x, y) and leq(y, z):
            assert leq(x, z)


# ---------------------------------------------------------------------------
# MDP
# ---------------------------------------------------------------------------

def test_table1_is_valid(t1):
    mdp_validate(t1)
    assert t1.n_states == 3
    assert t1.action_id("b") == 1
    assert t1.is_absorbing_state(1)
    assert not t1.is_absorbing_state(0)


def test_identity_matrices_are_valid():
    one, zero = F(1), F(0)
    m = MdpModel(("p", "q"), ("x",), (((one, zero), (zero, one)),))
    mdp_validate(m)


def test_rows_are_built_with_the_model(t1):
    assert [len(mat) for mat in t1._rows] == [3, 3]
    assert t1.row(0, 1) is t1.row(0, 1)
    assert t1.row(0, 1) == Dist({1: F(1, 10), 2: F(9, 10)})
    keys = [(q, a) for q in range(3) for a in range(2)] * 20
    with ThreadPoolExecutor(max_workers=4) as pool:
        rows = list(pool.map(lambda qa: t1.row(*qa), keys))
    assert all(r is t1._rows[a][q] for r, (q, a) in zip(rows, keys))


def test_not_stochastic_row():
    m = MdpModel(
        ("q0", "q1", "q2"), ("a",),
        (((F(1, 2), F(1, 2), F(1, 10)), (0, 1, 0), (0, 0, 1)),),
    )
    with pytest.raises(NotStochastic) as exc:
        mdp_validate(m)
    assert exc.value.row == 0
    assert exc.value.total == F(11, 10)


def test_mdp_shape_errors():
    with pytest.raises(DimensionMismatch):
        MdpModel(("p", "q"), ("x",), (((1, 0),),))
    with pytest.raises(InvalidInput):
        MdpModel(("p", "p"), ("x",), (((1, 0), (0, 1)),))


def test_push_applies_transpose(t1):
    assert t1.push(1, (1, 0, 0)) == (0, F(1, 10), F(9, 10))
    assert t1.push(0, (F(1, 2), F(1, 2), 0)) == (0, F(3, 4), F(1, 4))


# ---------------------------------------------------------------------------
# Schedulers
# ---------------------------------------------------------------------------

def test_constant_mixed(mixed):
    d = Configuration.dirac(0, 3)
    assert scheduler_eval(mixed, [d]) == Dist({0: F(2, 5), 1: F(3, 5)})
    assert scheduler_eval(mixed, [d, d, d]) == mixed.weights


def test_action_word_then_default():
    sigma = ActionWord((1,), default=0)
    d = Configuration.dirac(0, 3)
    assert scheduler_eval(sigma, [d]) == Dist.dirac(1)
    assert scheduler_eval(sigma, [d, d]) == Dist.dirac(0)
    assert not sigma.memoryless


def test_linear_fractional_evaluates():
    sigma = LinearFractional(
        theta=((0, 1, 0, 0), (0, 0, 1, 1)),
        s=(0, 1, 1, 1),
    )
    d = Configuration((F(1, 2), F(1, 4), F(1, 4)))
    assert scheduler_eval(sigma, [d]) == Dist({0: F(1, 2), 1: F(1, 2)})
    sigma.check_vertices(3)


def test_linear_fractional_rejects_small_denominator():
    sigma = LinearFractional(theta=((0, F(1, 2), F(1, 2)),), s=(0, F(1, 2), F(1, 2)))
    with pytest.raises(InvalidScheduler):
        scheduler_eval(sigma, [Configuration.dirac(0, 2)])


def test_linear_fractional_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        LinearFractional(theta=((0, 1),), s=(0, 1, 1))


def test_history_table_longest_prefix():
    d0 = Configuration.dirac(0, 2)
    d1 = Configuration.dirac(1, 2)
    sigma = HistoryTable(
        table=(((d0,), Dist.dirac(0)), ((d0, d1), Dist.dirac(1))),
        default=Dist({0: F(1, 2), 1: F(1, 2)}),
    )
    assert scheduler_eval(sigma, [d0]) == Dist.dirac(0)
    assert scheduler_eval(sigma, [d0, d1]) == Dist.dirac(1)
    assert scheduler_eval(sigma, [d1]) == sigma.default


def test_empty_history_rejected(mixed):
    with pytest.raises(InvalidInput):
        scheduler_eval(mixed, [])


def test_uniform_scheduler(t1):
    assert uniform_scheduler(t1).weights == Dist({0: F(1, 2), 1: F(1, 2)})
