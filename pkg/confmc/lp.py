"""LP backends for the antichain pullback.

Every program has the shape::

    minimize    c . y
    subject to  A y <= b        (rows flagged strict use <)
                0 <= y <= 1

Two backends implement it:

- ``ScipyBackend``  HiGHS through ``scipy.optimize.linprog``; strict rows are
  tightened by ``eps``; the optimum is rationalized (max denominator 10^6)
- ``ExactBackend``  SymPy's rational simplex; strict rows are handled by first
  maximizing a common slack t and then fixing t to half its optimum

Callers always re-verify returned vectors in exact arithmetic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from confmc.core import to_rat
from confmc.errors import BackendFailure, InvalidInput

# Default backend name ("scipy" or "exact").  Override with env var
# CONFMC_LP_BACKEND.
LP_BACKEND: str = os.environ.get("CONFMC_LP_BACKEND", "scipy")

MAX_DENOMINATOR = 10**6

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class LinearProgram:
    c: List[Fraction]
    a_ub: List[List[Fraction]] = field(default_factory=list)
    b_ub: List[Fraction] = field(default_factory=list)
    strict: List[bool] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.c)
        if len(self.a_ub) != len(self.b_ub):
            raise InvalidInput(f"{len(self.a_ub)} constraint rows but {len(self.b_ub)} bounds")
        if any(len(row) != n for row in self.a_ub):
            raise InvalidInput(f"every constraint row needs {n} coefficients")
        if not self.strict:
            self.strict = [False] * len(self.a_ub)
        elif len(self.strict) != len(self.a_ub):
            raise InvalidInput("strict flags do not match the constraint rows")

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def add_row(self, coeffs: Sequence, bound, strict: bool = False) -> None:
        self.a_ub.append([to_rat(v) for v in coeffs])
        self.b_ub.append(to_rat(bound))
        self.strict.append(strict)

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            c=list(self.c),
            a_ub=[list(r) for r in self.a_ub],
            b_ub=list(self.b_ub),
            strict=list(self.strict),
        )


@dataclass
class LpResult:
    status: str
    vector: Optional[Tuple[Fraction, ...]] = None
    objective: Optional[Fraction] = None
    # Float solution before rationalization; None for exact backends.
    raw: Optional[Tuple[float, ...]] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class LpBackend:
    name: str = ""
    exact: bool = False
    # Slack allowed when a previous optimum is turned into a constraint.
    tolerance: Fraction = Fraction(0)

    def solve_min(self, lp: LinearProgram) -> LpResult:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# SciPy / HiGHS
# ---------------------------------------------------------------------------

class ScipyBackend(LpBackend):
    name = "scipy"
    exact = False
    tolerance = Fraction(1, 10**7)

    def __init__(self, eps: float = 1e-6):
        self.eps = eps

    def solve_min(self, lp: LinearProgram) -> LpResult:
        try:
            import numpy as np
            from scipy.optimize import linprog
        except ImportError as exc:
            raise BackendFailure(
                "scipy is required for the float LP backend.\n"
                "Install it with:  pip install scipy"
            ) from exc

        c = np.array([float(v) for v in lp.c], dtype=float)
        if lp.a_ub:
            a_ub = np.array([[float(v) for v in row] for row in lp.a_ub], dtype=float)
            b_ub = np.array(
                [float(b) - (self.eps if s else 0.0) for b, s in zip(lp.b_ub, lp.strict)],
                dtype=float,
            )
        else:
            a_ub = b_ub = None
        try:
            res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0.0, 1.0), method="highs")
        except ValueError as exc:
            raise BackendFailure(f"HiGHS rejected the program: {exc}") from exc

        if res.status == 2:
            return LpResult(INFEASIBLE)
        if res.status != 0 or res.x is None:
            return LpResult(NUMERICAL_FAILURE)
        raw = tuple(min(1.0, max(0.0, float(v))) for v in res.x)
        vector = tuple(Fraction(v).limit_denominator(MAX_DENOMINATOR) for v in raw)
        objective = sum((ci * vi for ci, vi in zip(lp.c, vector)), Fraction(0))
        return LpResult(OPTIMAL, vector=vector, objective=objective, raw=raw)


# ---------------------------------------------------------------------------
# SymPy exact simplex
# ---------------------------------------------------------------------------

def _sym(value: Fraction):
    import sympy

    return sympy.Rational(value.numerator, value.denominator)


class ExactBackend(LpBackend):
    name = "exact"
    exact = True
    tolerance = Fraction(0)

    def _linprog(self, c, a_ub, b_ub):
        try:
            from sympy.solvers.simplex import InfeasibleLPError, UnboundedLPError, linprog
        except ImportError as exc:
            raise BackendFailure(
                "sympy >= 1.12 is required for the exact LP backend.\n"
                "Install it with:  pip install sympy"
            ) from exc
        try:
            opt, argmin = linprog(
                [_sym(v) for v in c],
                [[_sym(v) for v in row] for row in a_ub] or None,
                [_sym(v) for v in b_ub] or None,
                bounds=(0, 1),
            )
        except InfeasibleLPError:
            return None
        except UnboundedLPError as exc:
            raise BackendFailure(f"bounded program reported unbounded: {exc}") from exc
        return to_rat(opt), tuple(to_rat(v) for v in argmin)

    def solve_min(self, lp: LinearProgram) -> LpResult:
        n = lp.n_vars
        a_ub = [list(r) for r in lp.a_ub]
        b_ub = list(lp.b_ub)
        if any(lp.strict):
            # maximize t s.t. A y + t [strict] <= b, 0 <= t <= 1
            a_slack = [row + [Fraction(1) if s else Fraction(0)] for row, s in zip(a_ub, lp.strict)]
            found = self._linprog([Fraction(0)] * n + [Fraction(-1)], a_slack, b_ub)
            if found is None or -found[0] <= 0:
                return LpResult(INFEASIBLE)
            half = -found[0] / 2
            b_ub = [b - half if s else b for b, s in zip(b_ub, lp.strict)]
        found = self._linprog(lp.c, a_ub, b_ub)
        if found is None:
            return LpResult(INFEASIBLE)
        objective, vector = found
        return LpResult(OPTIMAL, vector=vector[:n], objective=objective)


def get_backend(name: Optional[str] = None, eps: float = 1e-6) -> LpBackend:
    name = (name or LP_BACKEND).strip().lower()
    if name == "scipy":
        return ScipyBackend(eps=eps)
    if name == "exact":
        return ExactBackend()
    raise InvalidInput(f"unknown LP backend '{name}' (expected 'scipy' or 'exact')")
