"""MSCT threshold reachability by certificate synthesis.

``check_msct`` runs the whole pipeline

    collect_constraints -> eliminate -> emit_problem -> run_solver
        -> Certificate.from_model -> verify_certificate

and answers ``certified`` only when the extracted certificate passes the exact
independent check.  Every other ending (unsat, unknown, timeout, failed
verification) is reported as ``unknown`` with a reason; the method is sound
but not complete.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from confmc.constraints import TemplateVars, collect_constraints
from confmc.core import Configuration, LinearFractional, MdpModel, to_rat
from confmc.elimination import DEFAULT_DEGREE, eliminate
from confmc.errors import ConfmcError, DimensionMismatch
from confmc.explorer import TargetSet
from confmc.smtlib import SAT, emit_problem, run_solver

DEFAULT_GAMMA = Fraction(99999, 100000)
GRID = 10**6

CERTIFIED = "certified"
UNKNOWN = "unknown"

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass
class SynthesisConfig:
    gamma: Fraction = DEFAULT_GAMMA
    degree: int = DEFAULT_DEGREE
    solver_cmd: Optional[str] = None
    timeout: Optional[float] = None
    samples: int = 10_000
    seed: int = 0

    def as_kwargs(self) -> dict:
        return dict(
            gamma=self.gamma,
            degree=self.degree,
            solver_cmd=self.solver_cmd,
            timeout=self.timeout,
            samples=self.samples,
            rng_seed=self.seed,
        )


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    theta: Tuple[Tuple[Fraction, ...], ...]
    s: Tuple[Fraction, ...]
    r: Tuple[Fraction, ...]
    gamma: Fraction
    xi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(tuple(to_rat(v) for v in row) for row in self.theta))
        object.__setattr__(self, "s", tuple(to_rat(v) for v in self.s))
        object.__setattr__(self, "r", tuple(to_rat(v) for v in self.r))
        object.__setattr__(self, "gamma", to_rat(self.gamma))
        object.__setattr__(self, "xi", to_rat(self.xi))

    @classmethod
    def from_model(cls, tv: TemplateVars, model: Dict[str, Fraction], gamma, xi) -> "Certificate":
        """Read template values from a solver model; omitted symbols are 0."""

        def _get(sym) -> Fraction:
            return model.get(sym.name, _ZERO)

        return cls(
            theta=tuple(tuple(_get(sym) for sym in row) for row in tv.theta),
            s=tuple(_get(sym) for sym in tv.s),
            r=tuple(_get(sym) for sym in tv.r),
            gamma=gamma,
            xi=xi,
        )

    @classmethod
    def trivial(cls, m: MdpModel, gamma, xi) -> "Certificate":
        """Uniform scheduler with R = 1 everywhere."""
        n, k = m.n_states, m.n_actions
        return cls(
            theta=tuple((_ONE,) + (_ZERO,) * n for _ in range(k)),
            s=(Fraction(k),) + (_ZERO,) * n,
            r=(_ONE,) + (_ZERO,) * n,
            gamma=gamma,
            xi=xi,
        )

    def scheduler(self) -> LinearFractional:
        return LinearFractional(self.theta, self.s)

    @staticmethod
    def _affine(coeffs: Sequence[Fraction], d: Sequence[Fraction]) -> Fraction:
        return coeffs[0] + sum((c * x for c, x in zip(coeffs[1:], d) if c), _ZERO)

    def value(self, d: Sequence[Fraction]) -> Fraction:
        """R(d)."""
        return self._affine(self.r, d)

    def inductive_margin(self, m: MdpModel, d: Sequence[Fraction]) -> Fraction:
        """gamma * sum_a num_a(d) R(M_a^T d) - den(d) R(d)."""
        total = _ZERO
        for a, row in enumerate(self.theta):
            num = self._affine(row, d)
            if num:
                total += num * self.value(m.push(a, d))
        return self.gamma * total - self._affine(self.s, d) * self.value(d)

    def to_dict(self, m: Optional[MdpModel] = None) -> dict:
        names = list(m.action_names) if m is not None else [str(a) for a in range(len(self.theta))]
        return {
            "theta": {name: [str(v) for v in row] for name, row in zip(names, self.theta)},
            "s": [str(v) for v in self.s],
            "r": [str(v) for v in self.r],
            "gamma": str(self.gamma),
            "xi": str(self.xi),
        }


@dataclass
class Violation:
    check: str
    config: Optional[Tuple[Fraction, ...]]
    detail: str


@dataclass
class VerificationReport:
    violations: List[Violation] = field(default_factory=list)
    vertices_checked: int = 0
    samples_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return f"ok ({self.vertices_checked} vertices, {self.samples_checked} samples)"
        first = self.violations[0]
        return f"{len(self.violations)} violation(s); first: {first.check} at {first.config}: {first.detail}"


def _vertex(q: int, n: int) -> Tuple[Fraction, ...]:
    return tuple(_ONE if k == q else _ZERO for k in range(n))


def _grid_samples(n: int, count: int, rng) -> List[Tuple[Fraction, ...]]:
    """Uniform simplex points with coordinates on the grid k / 10^6."""
    out = []
    for _ in range(count):
        cuts = np.sort(rng.integers(0, GRID + 1, size=n - 1))
        bounds = [0] + [int(c) for c in cuts] + [GRID]
        out.append(tuple(Fraction(bounds[i + 1] - bounds[i], GRID) for i in range(n)))
    return out


def verify_certificate(
    cert: Certificate,
    m: MdpModel,
    d0: Configuration,
    H: TargetSet,
    samples: int = 10_000,
    rng_seed: int = 0,
    stop_after: Optional[int] = None,
) -> VerificationReport:
    """Exact independent check of a certificate.

    Scheduler validity and 0 <= R <= 1 are affine and checked at the simplex
    vertices; R(d0) >= xi exactly; the inductive inequality at every vertex
    outside H and at *samples* grid points outside H.
    """
    n = m.n_states
    if len(cert.s) != n + 1 or len(cert.r) != n + 1 or len(cert.theta) != m.n_actions:
        raise DimensionMismatch("certificate does not match the model dimensions")
    report = VerificationReport()

    def _fail(check, d, detail):
        report.violations.append(Violation(check, tuple(d) if d is not None else None, detail))

    for q in range(n):
        e = _vertex(q, n)
        nums = [cert._affine(row, e) for row in cert.theta]
        den = cert._affine(cert.s, e)
        for a, num in enumerate(nums):
            if num < 0:
                _fail("schedule_numerator", e, f"action {m.action_names[a]} numerator {num} < 0")
        if den < 1:
            _fail("schedule_denominator", e, f"denominator {den} < 1")
        if sum(nums, _ZERO) != den:
            _fail("schedule_sum", e, f"numerators sum to {sum(nums, _ZERO)} != {den}")
        r = cert.value(e)
        if not 0 <= r <= 1:
            _fail("bound", e, f"R = {r} outside [0, 1]")
        report.vertices_checked += 1

    r0 = cert.value(d0)
    if r0 < cert.xi:
        _fail("reachable", d0, f"R(d0) = {r0} < xi = {cert.xi}")

    rng = np.random.default_rng(rng_seed)
    points = [_vertex(q, n) for q in range(n)]
    points += _grid_samples(n, samples, rng)
    for k, d in enumerate(points):
        if H.contains(d):
            continue
        margin = cert.inductive_margin(m, d)
        if margin < 0:
            _fail("inductive", d, f"margin {margin} < 0")
            if stop_after is not None and len(report.violations) >= stop_after:
                break
        if k >= n:
            report.samples_checked += 1
    return report


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class MsctOutcome:
    tag: str
    certificate: Optional[Certificate] = None
    reason: str = ""
    report: Optional[VerificationReport] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.tag == CERTIFIED


def _log(verbose: bool, msg: str) -> None:
    if verbose:
        print(f"  [synthesis] {msg}", file=sys.stderr)


def check_msct(
    m: MdpModel,
    d0: Configuration,
    H: TargetSet,
    xi,
    gamma=DEFAULT_GAMMA,
    degree: int = DEFAULT_DEGREE,
    solver_cmd: Optional[str] = None,
    timeout: Optional[float] = None,
    samples: int = 10_000,
    rng_seed: int = 0,
    verbose: bool = False,
) -> MsctOutcome:
    """Try to certify that some memoryless scheduler reaches H from d0 with
    probability >= xi under MSCT semantics."""
    xi = to_rat(xi)
    gamma = to_rat(gamma)
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()

    tv = TemplateVars.create(m)
    constraints = collect_constraints(m, d0, H, xi, gamma, tv=tv)
    n_inductive = sum(1 for c in constraints if c.family == "inductive")
    timings["collect"] = time.perf_counter() - t0
    _log(verbose, f"{len(constraints)} constraints ({n_inductive} inductive conjuncts)")

    if n_inductive == 0 and xi <= 1:
        cert = Certificate.trivial(m, gamma, xi)
        report = verify_certificate(cert, m, d0, H, samples=samples, rng_seed=rng_seed)
        if report.ok:
            _log(verbose, "target covers the simplex; trivial certificate")
            return MsctOutcome(CERTIFIED, cert, report=report, timings=timings)

    t1 = time.perf_counter()
    blocks = eliminate(constraints, degree=degree, d=tv.d)
    payload = emit_problem(blocks)
    timings["eliminate"] = time.perf_counter() - t1
    _log(verbose, f"{len(blocks)} existential blocks, payload {len(payload)} bytes")

    t2 = time.perf_counter()
    try:
        result = run_solver(payload, cmd=solver_cmd, timeout=timeout, verbose=verbose)
    finally:
        timings["solve"] = time.perf_counter() - t2
    if result.status != SAT:
        reason = result.reason or f"solver answered {result.status}"
        return MsctOutcome(UNKNOWN, reason=reason, timings=timings)

    cert = Certificate.from_model(tv, result.model, gamma, xi)
    t3 = time.perf_counter()
    try:
        report = verify_certificate(cert, m, d0, H, samples=samples, rng_seed=rng_seed)
    except ConfmcError as exc:
        return MsctOutcome(UNKNOWN, cert, reason=f"certificate unusable: {exc}", timings=timings)
    timings["verify"] = time.perf_counter() - t3
    if not report.ok:
        return MsctOutcome(UNKNOWN, cert, reason=f"verification failed: {report.summary()}",
                           report=report, timings=timings)
    _log(verbose, f"certified: {report.summary()}")
    return MsctOutcome(CERTIFIED, cert, report=report, timings=timings)
