"""Quantifier elimination by Farkas' lemma and Handelman's representation.

Both eliminations replace ``forall d. g_1(d) >= 0 ... g_m(d) >= 0 => f(d) >= 0``
by the existential statement

    f = sum_k lambda_k * p_k      with every lambda_k >= 0,

where p_k ranges over products of the g_j (only the constant 1 and the rows
themselves for Farkas, all products up to a total degree for Handelman).
Equating coefficients monomial by monomial gives the block's equalities.
Only the sound direction is used: a satisfiable block implies the original
implication, never the converse.  Strict lhs rows are replaced by their
closures first, which can only shrink the set of accepted certificates.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from confmc.constraints import EQ, AffineRow, QuantifiedConstraint
from confmc.errors import DegreeTooHigh, InvalidInput, NotAffine

# Maximum number of Handelman products per constraint.  Override with env var
# CONFMC_PRODUCT_CAP.
PRODUCT_CAP: int = int(os.environ.get("CONFMC_PRODUCT_CAP", 20000))

DEFAULT_DEGREE = 4


@dataclass
class ExistentialBlock:
    """exists multipliers >= 0 such that equalities == 0 and nonnegatives >= 0."""

    name: str
    multipliers: List[sympy.Symbol] = field(default_factory=list)
    equalities: List[sympy.Expr] = field(default_factory=list)
    nonnegatives: List[sympy.Expr] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.equalities) + len(self.nonnegatives) + len(self.multipliers)


def _poly(expr: sympy.Expr, d: Sequence[sympy.Symbol]) -> sympy.Poly:
    return sympy.Poly(expr, *d) if d else sympy.Poly(expr, sympy.Dummy("unused"))


def _d_symbols(c: QuantifiedConstraint, d: Optional[Sequence[sympy.Symbol]]) -> Tuple[sympy.Symbol, ...]:
    if d is not None:
        return tuple(d)
    if c.lhs:
        n = len(c.lhs[0].coeffs)
        return tuple(sympy.Symbol(f"d_{q}", real=True) for q in range(n))
    return ()


def _sanitize(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name)


def _combine(
    name: str,
    rhs: sympy.Expr,
    products: List[sympy.Poly],
    d: Tuple[sympy.Symbol, ...],
) -> ExistentialBlock:
    target = _poly(rhs, d)
    lams = [sympy.Symbol(f"lam_{_sanitize(name)}_{k}", real=True) for k in range(len(products))]
    coeff: Dict[Tuple[int, ...], sympy.Expr] = {}
    for monom, value in target.terms():
        coeff[monom] = coeff.get(monom, sympy.Integer(0)) + value
    for lam, p in zip(lams, products):
        for monom, value in p.terms():
            coeff[monom] = coeff.get(monom, sympy.Integer(0)) - lam * value
    equalities = []
    for monom in sorted(coeff):
        expr = sympy.expand(coeff[monom])
        if expr != 0:
            equalities.append(expr)
    return ExistentialBlock(name, multipliers=lams, equalities=equalities)


def _rows(c: QuantifiedConstraint, d: Tuple[sympy.Symbol, ...]) -> List[sympy.Poly]:
    return [_poly(row.closure().as_expr(d), d) for row in c.lhs]


def _unquantified(c: QuantifiedConstraint) -> List[ExistentialBlock]:
    expr = sympy.expand(c.rhs)
    if c.sense == EQ:
        return [ExistentialBlock(c.name, equalities=[expr])]
    return [ExistentialBlock(c.name, nonnegatives=[expr])]


def _signed(c: QuantifiedConstraint) -> List[Tuple[str, sympy.Expr]]:
    if c.sense == EQ:
        return [(f"{c.name}_pos", c.rhs), (f"{c.name}_neg", -c.rhs)]
    return [(c.name, c.rhs)]


def farkas_eliminate(
    c: QuantifiedConstraint, d: Optional[Sequence[sympy.Symbol]] = None
) -> List[ExistentialBlock]:
    """Eliminate d from a constraint whose rhs is affine in d."""
    if not c.quantified:
        return _unquantified(c)
    dsym = _d_symbols(c, d)
    if _poly(c.rhs, dsym).total_degree() > 1:
        raise NotAffine(f"{c.name}: right-hand side has degree > 1 in the configuration variables")
    one = _poly(sympy.Integer(1), dsym)
    products = [one] + _rows(c, dsym)
    return [_combine(name, rhs, products, dsym) for name, rhs in _signed(c)]


def handelman_products(rows: List[sympy.Poly], degree: int, cap: Optional[int] = None) -> List[sympy.Poly]:
    """All products of at most *degree* rows (multisets), the empty product first."""
    limit = PRODUCT_CAP if cap is None else cap
    m = len(rows)
    count = math.comb(m + degree, degree)
    if count > limit:
        raise DegreeTooHigh(f"{count} Handelman products for {m} rows at degree {degree} (cap {limit})")
    gens = rows[0].gens if rows else (sympy.Dummy("unused"),)
    one = sympy.Poly(1, *gens)
    cache: Dict[Tuple[int, ...], sympy.Poly] = {(): one}
    out = [one]
    for k in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(m), k):
            p = cache[combo[:-1]] * rows[combo[-1]]
            cache[combo] = p
            out.append(p)
    return out


def handelman_eliminate(
    c: QuantifiedConstraint,
    degree: int = DEFAULT_DEGREE,
    d: Optional[Sequence[sympy.Symbol]] = None,
    cap: Optional[int] = None,
) -> List[ExistentialBlock]:
    """Eliminate d from a constraint with polynomial rhs of degree <= *degree*."""
    if degree < 1:
        raise InvalidInput(f"degree bound must be >= 1, got {degree}")
    if not c.quantified:
        return _unquantified(c)
    dsym = _d_symbols(c, d)
    rhs_degree = _poly(c.rhs, dsym).total_degree()
    if rhs_degree > degree:
        raise DegreeTooHigh(f"{c.name}: right-hand side degree {rhs_degree} exceeds bound {degree}")
    products = handelman_products(_rows(c, dsym), degree, cap)
    return [_combine(name, rhs, products, dsym) for name, rhs in _signed(c)]


def eliminate(
    constraints: List[QuantifiedConstraint],
    degree: int = DEFAULT_DEGREE,
    d: Optional[Sequence[sympy.Symbol]] = None,
    cap: Optional[int] = None,
) -> List[ExistentialBlock]:
    """Farkas for affine right-hand sides, Handelman for the rest; order preserved."""
    blocks: List[ExistentialBlock] = []
    for c in constraints:
        if not c.quantified:
            blocks.extend(_unquantified(c))
            continue
        dsym = _d_symbols(c, d)
        if _poly(c.rhs, dsym).total_degree() <= 1:
            blocks.extend(farkas_eliminate(c, dsym))
        else:
            blocks.extend(handelman_eliminate(c, degree, dsym, cap))
    return blocks
