from __future__ import annotations

from fractions import Fraction as F

import pytest
import sympy

from confmc.constraints import (
    EQ,
    AffineRow,
    TemplateVars,
    collect_constraints,
    complement_conjuncts,
    inductive_rhs,
    simplex_rows,
)
from confmc.core import Configuration
from confmc.errors import ConjunctExplosion, InvalidInput
from confmc.explorer import DownwardGenerators, ExplicitConfigs, UpwardGenerators

Q0 = Configuration.dirac(0, 3)
GAMMA = F(99999, 100000)


def test_template_symbols_unique_and_ordered(t1):
    tv = TemplateVars.create(t1)
    names = [s.name for s in tv.template_symbols]
    assert len(names) == len(set(names)) == 2 * 4 + 4 + 4
    assert names[0] == "theta_0_0"
    assert names[-1] == "r_3"
    assert TemplateVars.create(t1) == tv


def test_simplex_rows():
    rows = simplex_rows(2)
    assert len(rows) == 4
    assert all(r.holds((F(1, 2), F(1, 2))) for r in rows)
    assert not all(r.holds((F(1, 2), F(1, 4))) for r in rows)


def test_affine_row_strict_and_closure():
    row = AffineRow((F(-1), F(0)), F(1, 2), strict=True)
    assert not row.holds((F(1, 2), 0))
    assert row.closure().holds((F(1, 2), 0))


def test_complement_single_generator(t1):
    H = UpwardGenerators(((0, 0, F(7, 10)),))
    conj = complement_conjuncts(H, 3)
    # only q = 2 has a nonzero generator entry
    assert [qs for qs, _ in conj] == [(2,)]
    (_, rows), = conj
    assert rows[0].holds((1, 0, 0))
    assert not rows[0].holds((0, 0, F(7, 10)))


def test_complement_full_count():
    H = UpwardGenerators(((F(1, 3), F(1, 3), F(1, 3)),))
    assert len(complement_conjuncts(H, 3)) == 3


def test_complement_covers_exactly_the_outside():
    H = UpwardGenerators(((F(1, 2), F(1, 4), 0), (0, F(1, 2), F(1, 2))))
    conj = complement_conjuncts(H, 3)
    grid = [
        (F(a, 8), F(b, 8), F(8 - a - b, 8))
        for a in range(9) for b in range(9 - a)
    ]
    for d in grid:
        outside = any(all(r.holds(d) for r in rows) for _, rows in conj)
        assert outside == (not H.contains(d))


def test_complement_downward():
    H = DownwardGenerators(((0, F(1, 5), 1),))
    conj = complement_conjuncts(H, 3)
    assert sorted(qs for qs, _ in conj) == [(0,), (1,)]


def test_conjunct_cap():
    H = UpwardGenerators(((F(1, 3), F(1, 3), F(1, 3)), (F(1, 2), F(1, 4), F(1, 4))))
    with pytest.raises(ConjunctExplosion) as exc:
        complement_conjuncts(H, 3, cap=8)
    assert exc.value.n_generators == 2
    assert exc.value.n_states == 3


def test_complement_needs_monotone_target():
    with pytest.raises(InvalidInput):
        complement_conjuncts(ExplicitConfigs((Q0,)), 3)


def test_inductive_rhs_degree_two(t1):
    tv = TemplateVars.create(t1)
    rhs = inductive_rhs(t1, tv, GAMMA)
    assert sympy.Poly(rhs, *tv.d).total_degree() == 2


def test_inductive_rhs_matches_direct_evaluation(t1):
    tv = TemplateVars.create(t1)
    rhs = inductive_rhs(t1, tv, F(1, 2))
    d = (F(1, 2), F(1, 4), F(1, 4))
    theta = [[F(1), 0, 0, 0], [F(0), 0, 0, 0]]
    s = [F(1), 0, 0, 0]
    r = [F(0), 0, F(1), 0]
    subs = {}
    for a, row in enumerate(tv.theta):
        subs.update({sym: v for sym, v in zip(row, theta[a])})
    subs.update({sym: v for sym, v in zip(tv.s, s)})
    subs.update({sym: v for sym, v in zip(tv.r, r)})
    subs.update({sym: v for sym, v in zip(tv.d, d)})
    # always a, R = d(q1): 1/2 * R(M_a^T d) - R(d) = 1/2 * (1/4 + 1/4) - 1/4
    assert rhs.subs(subs) == 0


def test_collect_counts(t1):
    H = UpwardGenerators(((0, 0, F(7, 10)),))
    cs = collect_constraints(t1, Q0, H, F(9, 10), GAMMA)
    families = [c.family for c in cs]
    assert families.count("schedule_numerator") == t1.n_actions
    assert families.count("inductive") == 1
    assert families.count("reachable") == 1
    assert len(cs) == t1.n_actions + 4 + 1 + 1
    reach = cs[-1]
    assert not reach.quantified
    sum_row = next(c for c in cs if c.name == "schedule_sum")
    assert sum_row.sense == EQ


def test_collect_full_count_three_conjuncts(t1):
    H = UpwardGenerators(((F(1, 3), F(1, 3), F(1, 3)),))
    cs = collect_constraints(t1, Q0, H, F(1, 2), GAMMA)
    assert sum(1 for c in cs if c.family == "inductive") == 3


def test_collect_whole_space_has_no_inductive(t1):
    H = UpwardGenerators(((0, 0, 0),))
    cs = collect_constraints(t1, Q0, H, F(1, 2), GAMMA)
    assert not any(c.family == "inductive" for c in cs)


def test_collect_rejects_bad_gamma(t1):
    H = UpwardGenerators(((0, 0, F(7, 10)),))
    with pytest.raises(InvalidInput):
        collect_constraints(t1, Q0, H, F(1, 2), 1)
