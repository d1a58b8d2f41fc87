"""Quantified constraint collection for MSCT certificate synthesis.

The certificate consists of

- a linear-fractional scheduler
      sigma(d)(a) = (theta_a0 + sum_q theta_aq d_q) / (s_0 + sum_q s_q d_q)
- a linear function R(d) = r_0 + sum_q r_q d_q

and must satisfy, over the probability simplex D(Q):

    schedule_numerator_<a>   numerator of every action >= 0
    schedule_denominator     denominator >= 1
    schedule_sum             numerators sum to the denominator
    bound_lower/bound_upper  0 <= R <= 1
    inductive_<tuple>        gamma * sum_a num_a(d) R(M_a^T d) - den(d) R(d) >= 0
                             on every complement conjunct of the target
    reachable                R(d0) >= xi   (no quantified variables)

Every constraint reads ``forall d. lhs(d) => rhs(d) <sense> 0`` where lhs is a
conjunction of affine rows; the simplex rows come first.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import sympy

from confmc.core import Configuration, MdpModel, to_rat
from confmc.errors import ConjunctExplosion, DimensionMismatch, InvalidInput
from confmc.explorer import DownwardGenerators, TargetSet, UpwardGenerators

# Maximum number of complement conjuncts |Q|^n.  Override with env var
# CONFMC_CONJUNCT_CAP.
CONJUNCT_CAP: int = int(os.environ.get("CONFMC_CONJUNCT_CAP", 10**5))

GE = "ge"
EQ = "eq"


def rat(value) -> sympy.Rational:
    v = to_rat(value)
    return sympy.Rational(v.numerator, v.denominator)


@dataclass(frozen=True)
class TemplateVars:
    """Template symbols; index 0 is the constant term, index q+1 belongs to state q."""

    theta: Tuple[Tuple[sympy.Symbol, ...], ...]
    s: Tuple[sympy.Symbol, ...]
    r: Tuple[sympy.Symbol, ...]
    d: Tuple[sympy.Symbol, ...]

    @classmethod
    def create(cls, m: MdpModel) -> "TemplateVars":
        n = m.n_states
        return cls(
            theta=tuple(
                tuple(sympy.Symbol(f"theta_{a}_{j}", real=True) for j in range(n + 1))
                for a in range(m.n_actions)
            ),
            s=tuple(sympy.Symbol(f"s_{j}", real=True) for j in range(n + 1)),
            r=tuple(sympy.Symbol(f"r_{j}", real=True) for j in range(n + 1)),
            d=tuple(sympy.Symbol(f"d_{q}", real=True) for q in range(n)),
        )

    @property
    def template_symbols(self) -> List[sympy.Symbol]:
        out = [sym for row in self.theta for sym in row]
        return out + list(self.s) + list(self.r)

    @staticmethod
    def affine(coeffs: Sequence[sympy.Symbol], point: Sequence) -> sympy.Expr:
        return coeffs[0] + sum(c * x for c, x in zip(coeffs[1:], point))

    def numerator(self, a: int, point: Optional[Sequence] = None) -> sympy.Expr:
        return self.affine(self.theta[a], self.d if point is None else point)

    def denominator(self, point: Optional[Sequence] = None) -> sympy.Expr:
        return self.affine(self.s, self.d if point is None else point)

    def value(self, point: Optional[Sequence] = None) -> sympy.Expr:
        return self.affine(self.r, self.d if point is None else point)


@dataclass(frozen=True)
class AffineRow:
    """const + coeffs . d >= 0  (> 0 when strict)."""

    coeffs: Tuple[Fraction, ...]
    const: Fraction
    strict: bool = False

    def as_expr(self, d: Sequence[sympy.Symbol]) -> sympy.Expr:
        return rat(self.const) + sum(rat(c) * x for c, x in zip(self.coeffs, d) if c)

    def evaluate(self, point: Sequence[Fraction]) -> Fraction:
        return self.const + sum((c * x for c, x in zip(self.coeffs, point) if c), Fraction(0))

    def holds(self, point: Sequence[Fraction]) -> bool:
        v = self.evaluate(point)
        return v > 0 if self.strict else v >= 0

    def closure(self) -> "AffineRow":
        return AffineRow(self.coeffs, self.const, False)


@dataclass
class QuantifiedConstraint:
    name: str
    family: str
    lhs: List[AffineRow]
    rhs: sympy.Expr
    sense: str = GE
    # complement tuple (q_1..q_n) for inductive conjuncts
    conjunct: Optional[Tuple[int, ...]] = None

    @property
    def quantified(self) -> bool:
        return bool(self.lhs)


def simplex_rows(n: int) -> List[AffineRow]:
    """d_q >= 0 for every q, then sum d - 1 >= 0 and 1 - sum d >= 0."""
    zero, one = Fraction(0), Fraction(1)
    rows = []
    for q in range(n):
        rows.append(AffineRow(tuple(one if k == q else zero for k in range(n)), zero))
    rows.append(AffineRow(tuple([one] * n), -one))
    rows.append(AffineRow(tuple([-one] * n), one))
    return rows


def complement_conjuncts(H: TargetSet, n_states: int, cap: Optional[int] = None) -> List[Tuple[Tuple[int, ...], List[AffineRow]]]:
    """Decompose D(Q) minus H into conjunctions of strict affine rows.

    For H = ↑{x_1..x_k}: d not in H iff for some tuple (q_1..q_k),
    d(q_i) < x_i(q_i) for all i.  Downward targets use d(q_i) > x_i(q_i).
    Tuples that no configuration can satisfy are dropped.
    """
    limit = CONJUNCT_CAP if cap is None else cap
    if isinstance(H, UpwardGenerators):
        upward = True
    elif isinstance(H, DownwardGenerators):
        upward = False
    else:
        raise InvalidInput(f"certificate synthesis needs a monotone target, got '{H.kind}'")
    gens = H.generators
    if H.dimension != n_states:
        raise DimensionMismatch(f"target of dimension {H.dimension} for {n_states} states")
    k = len(gens)
    if n_states**k > limit:
        raise ConjunctExplosion(k, n_states, limit)

    zero, one = Fraction(0), Fraction(1)
    seen = set()
    out = []
    for qs in itertools.product(range(n_states), repeat=k):
        if upward and any(g[q] == 0 for g, q in zip(gens, qs)):
            continue
        if not upward and any(g[q] == 1 for g, q in zip(gens, qs)):
            continue
        rows = []
        for g, q in zip(gens, qs):
            unit = tuple(one if j == q else zero for j in range(n_states))
            if upward:
                rows.append(AffineRow(tuple(-u for u in unit), g[q], strict=True))
            else:
                rows.append(AffineRow(unit, -g[q], strict=True))
        key = frozenset(rows)
        if key in seen:
            continue
        seen.add(key)
        out.append((qs, sorted(rows, key=lambda r: (r.coeffs, r.const), reverse=True)))
    return out


def inductive_rhs(m: MdpModel, tv: TemplateVars, gamma) -> sympy.Expr:
    """gamma * sum_a num_a(d) R(M_a^T d) - den(d) R(d), polynomial of degree 2 in d."""
    n = m.n_states
    g = rat(gamma)
    total = sympy.Integer(0)
    for a in range(m.n_actions):
        mat = m.matrices[a]
        image = [sum(rat(mat[p][q]) * tv.d[p] for p in range(n) if mat[p][q]) for q in range(n)]
        total += tv.numerator(a) * tv.value(image)
    return sympy.expand(g * total - tv.denominator() * tv.value())


def collect_constraints(
    m: MdpModel,
    d0: Configuration,
    H: TargetSet,
    xi,
    gamma,
    cap: Optional[int] = None,
    tv: Optional[TemplateVars] = None,
) -> List[QuantifiedConstraint]:
    n = m.n_states
    if len(d0) != n:
        raise DimensionMismatch(f"initial configuration has {len(d0)} entries for {n} states")
    g = to_rat(gamma)
    if not 0 < g < 1:
        raise InvalidInput(f"gamma must lie in (0, 1), got {g}")
    tv = tv or TemplateVars.create(m)
    simplex = simplex_rows(n)
    out: List[QuantifiedConstraint] = []

    for a in range(m.n_actions):
        out.append(QuantifiedConstraint(
            f"schedule_numerator_{a}", "schedule_numerator", list(simplex), tv.numerator(a),
        ))
    out.append(QuantifiedConstraint(
        "schedule_denominator", "schedule_denominator", list(simplex), tv.denominator() - 1,
    ))
    num_sum = sum((tv.numerator(a) for a in range(m.n_actions)), sympy.Integer(0))
    out.append(QuantifiedConstraint(
        "schedule_sum", "schedule_sum", list(simplex), sympy.expand(num_sum - tv.denominator()), EQ,
    ))
    out.append(QuantifiedConstraint("bound_lower", "bound", list(simplex), tv.value()))
    out.append(QuantifiedConstraint("bound_upper", "bound", list(simplex), 1 - tv.value()))

    rhs = inductive_rhs(m, tv, g)
    for qs, rows in complement_conjuncts(H, n, cap):
        tag = "_".join(str(q) for q in qs)
        out.append(QuantifiedConstraint(
            f"inductive_{tag}", "inductive", list(simplex) + rows, rhs, conjunct=qs,
        ))

    point = [rat(v) for v in d0]
    out.append(QuantifiedConstraint(
        "reachable", "reachable", [], sympy.expand(tv.value(point) - rat(xi)),
    ))
    return out
