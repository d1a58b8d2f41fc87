"""Backward antichain iteration for CSMT reachability of monotone targets.

Under CSMT every run of the config MC follows a pure action word, so H is
reachable from d0 iff d0 lies in the least fixed point of

    S  ->  H  ∪  ⋃_a  {y | M_a^T y in ↑S}.

The iteration keeps S as an antichain of minimal elements (``floor``) for
upward-closed targets, or maximal elements (``top``) for downward-closed ones.
Each pullback {y | M_a^T y ⪰ x} has a possibly infinite floor; it is sampled
by a sequence of at most K LPs, every new LP excluding the previous optima
through one sampled strict constraint each.

The sampled pullback under-approximates, so ``stabilized`` never means
"unreachable".  A ``reachable`` outcome carries an action word that has been
replayed exactly into H.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from confmc.core import Configuration, MdpModel, Matrix, Vec01, leq
from confmc.errors import BackendFailure, DimensionMismatch, InvalidInput, WitnessReplayFailed
from confmc.explorer import DownwardGenerators, TargetSet, UpwardGenerators
from confmc.lp import MAX_DENOMINATOR, NUMERICAL_FAILURE, LinearProgram, LpBackend, get_backend

_ZERO = Fraction(0)
_ONE = Fraction(1)

REACHABLE = "reachable"
STABILIZED = "stabilized"
LOOP_LIMIT = "loop_limit"


@dataclass
class PullbackConfig:
    """Knobs of the backward iteration."""

    k: int = 3
    l: int = 1
    loop_limit: int = 100
    epsilon: float = 1e-6
    backend: Optional[str] = None
    seed: int = 0
    workers: int = 1

    def as_kwargs(self) -> dict:
        return dict(
            K=self.k,
            L=self.l,
            loop_limit=self.loop_limit,
            rng_seed=self.seed,
            backend=get_backend(self.backend, eps=self.epsilon),
            workers=self.workers,
        )


# ---------------------------------------------------------------------------
# Antichains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AntichainEntry:
    """An antichain element with provenance.

    ``action`` / ``parent`` record that ``M_action^T vec`` dominates
    ``parent.vec``; generators of H have no parent.
    """

    vec: Vec01
    action: Optional[int] = None
    parent: Optional["AntichainEntry"] = None

    def word(self) -> List[int]:
        out: List[int] = []
        entry: Optional[AntichainEntry] = self
        while entry is not None and entry.action is not None:
            out.append(entry.action)
            entry = entry.parent
        return out


@dataclass
class Antichain:
    order: str = "floor"
    entries: List[AntichainEntry] = field(default_factory=list)

    def __post_init__(self):
        if self.order not in ("floor", "top"):
            raise InvalidInput(f"antichain order must be 'floor' or 'top', got '{self.order}'")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[AntichainEntry]:
        return iter(self.entries)

    @property
    def vectors(self) -> List[Vec01]:
        return [e.vec for e in self.entries]

    def _better(self, x: Sequence[Fraction], y: Sequence[Fraction]) -> bool:
        """x represents at least as much as y (x ≤ y for floors, x ≥ y for tops)."""
        return leq(x, y) if self.order == "floor" else leq(y, x)

    def covering(self, d: Sequence[Fraction]) -> Optional[AntichainEntry]:
        for e in self.entries:
            if self._better(e.vec, d):
                return e
        return None

    def covers(self, d: Sequence[Fraction]) -> bool:
        return self.covering(d) is not None

    def insert(self, entry: AntichainEntry) -> bool:
        """Insert in place; returns False when *entry* is already dominated."""
        if self.entries and len(self.entries[0].vec) != len(entry.vec):
            raise DimensionMismatch("antichain elements must have equal length")
        if any(self._better(e.vec, entry.vec) for e in self.entries):
            return False
        self.entries = [e for e in self.entries if not self._better(entry.vec, e.vec)]
        self.entries.append(entry)
        return True

    def copy(self) -> "Antichain":
        return Antichain(self.order, list(self.entries))

    def same_elements(self, other: "Antichain") -> bool:
        return set(self.vectors) == set(other.vectors)


def _entry(x) -> AntichainEntry:
    if isinstance(x, AntichainEntry):
        return x
    return AntichainEntry(x if isinstance(x, Vec01) else Vec01(tuple(x)))


def antichain_floor_insert(A: Antichain, x) -> Antichain:
    """Return ⌊A ∪ {x}⌋ (A itself is left untouched)."""
    out = Antichain("floor", list(A.entries))
    out.insert(_entry(x))
    return out


def antichain_top_insert(A: Antichain, x) -> Antichain:
    """Return the maximal elements of A ∪ {x}."""
    out = Antichain("top", list(A.entries))
    out.insert(_entry(x))
    return out


# ---------------------------------------------------------------------------
# Pullback sampling
# ---------------------------------------------------------------------------

def _transpose_apply(M: Matrix, y: Sequence[Fraction]) -> List[Fraction]:
    n = len(M)
    return [sum((M[i][j] * y[i] for i in range(n) if y[i]), _ZERO) for j in range(n)]


def _feasible(M: Matrix, x: Sequence[Fraction], y: Sequence[Fraction], dual: bool) -> bool:
    if any(v < 0 or v > 1 for v in y):
        return False
    image = _transpose_apply(M, y)
    if dual:
        return all(a <= b for a, b in zip(image, x))
    return all(a >= b for a, b in zip(image, x))


def _outward(raw: Sequence[float], dual: bool) -> Tuple[Fraction, ...]:
    grid = MAX_DENOMINATOR
    if dual:
        vals = (Fraction(math.floor(v * grid), grid) for v in raw)
    else:
        vals = (Fraction(math.ceil(v * grid), grid) for v in raw)
    return tuple(min(_ONE, max(_ZERO, v)) for v in vals)


def _base_program(M: Matrix, x: Sequence[Fraction], dual: bool) -> LinearProgram:
    n = len(M)
    sign = _ONE if dual else -_ONE
    lp = LinearProgram(c=[-_ONE if dual else _ONE] * n)
    # upward: M^T y >= x  as  -M^T y <= -x ;  dual: M^T y <= x
    for j in range(n):
        lp.add_row([sign * M[i][j] for i in range(n)], sign * x[j])
    if not dual:
        lp.add_row([_ONE] * n, _ONE)
    return lp


def _candidates(result, dual: bool) -> List[Tuple[Fraction, ...]]:
    out = [result.vector]
    if result.raw is not None:
        alt = _outward(result.raw, dual)
        if alt != result.vector:
            out.append(alt)
    return out


def _solve(backend: LpBackend, lp: LinearProgram):
    result = backend.solve_min(lp)
    if result.status == NUMERICAL_FAILURE:
        raise BackendFailure(f"{backend.name} LP backend failed numerically")
    return result


def _accept(backend, lp, M, x, dual, exclude) -> Optional[Vec01]:
    result = _solve(backend, lp)
    if not result.optimal:
        return None
    for vec in _candidates(result, dual):
        if _feasible(M, x, vec, dual) and vec not in exclude:
            return Vec01(vec)
    return None


def _support(vec: Vec01, dual: bool) -> List[int]:
    if dual:
        return [q for q, v in enumerate(vec) if v < 1]
    return [q for q, v in enumerate(vec) if v > 0]


def _tuples(supports: List[List[int]], rng, budget: int) -> Iterator[Tuple[int, ...]]:
    """Up to *budget* distinct uniformly drawn index tuples."""
    total = 1
    for s in supports:
        total *= len(s)
    if total <= budget:
        pool = list(itertools.product(*supports))
        for i in rng.permutation(len(pool)):
            yield pool[int(i)]
        return
    seen = set()
    while len(seen) < budget:
        t = tuple(s[int(rng.integers(len(s)))] for s in supports)
        if t not in seen:
            seen.add(t)
            yield t


def pullback_minimals(
    M: Matrix,
    x: Sequence[Fraction],
    K: int = 3,
    L: int = 1,
    rng_seed=0,
    backend: Optional[LpBackend] = None,
    dual: bool = False,
) -> List[Vec01]:
    """Sample up to K extremal elements of {y in [0,1]^n | M^T y ⪰ x}.

    With ``dual=True`` the order is reversed: maximal elements of
    {y | M^T y ⪯ x}.  Every returned vector is verified exactly.
    """
    if K < 1 or L < 1:
        raise InvalidInput(f"K and L must be >= 1 (got K={K}, L={L})")
    n = len(M)
    if len(x) != n:
        raise DimensionMismatch(f"vector of length {len(x)} for a {n}x{n} matrix")
    backend = backend or get_backend()
    rng = np.random.default_rng(rng_seed)
    base = _base_program(M, x, dual)

    found: List[Vec01] = []
    first = _accept(backend, base, M, x, dual, exclude=())
    if first is None:
        return []
    found.append(first)

    exclude = {first.entries}
    while len(found) < K:
        supports = [_support(y, dual) for y in found]
        if any(not s for s in supports):
            break
        accepted = None
        for qs in _tuples(supports, rng, L):
            lp = base.copy()
            weights = [_ZERO] * n
            for q, prior in zip(qs, found):
                row = [_ZERO] * n
                if dual:
                    row[q] = -_ONE
                    lp.add_row(row, -prior[q], strict=True)
                else:
                    row[q] = _ONE
                    lp.add_row(row, prior[q], strict=True)
                weights[q] += _ONE
            # lexicographic: sampled coordinates first, then the full sum
            lp.c = [-w for w in weights] if dual else weights
            phase1 = _solve(backend, lp)
            if not phase1.optimal:
                continue
            for slack in dict.fromkeys((_ZERO, backend.tolerance)):
                lp2 = lp.copy()
                lp2.add_row(lp.c, phase1.objective + slack)
                lp2.c = [-_ONE if dual else _ONE] * n
                accepted = _accept(backend, lp2, M, x, dual, exclude)
                if accepted is not None:
                    break
            if accepted is not None:
                break
        if accepted is None:
            break
        found.append(accepted)
        exclude.add(accepted.entries)

    chain = Antichain("top" if dual else "floor")
    for y in found:
        chain.insert(AntichainEntry(y))
    return chain.vectors


# ---------------------------------------------------------------------------
# Fixed-point iteration
# ---------------------------------------------------------------------------

@dataclass
class ReachOutcome:
    tag: str
    iterations: int
    witness: Optional[List[int]] = None
    antichain: Optional[Antichain] = None

    @property
    def reachable(self) -> bool:
        return self.tag == REACHABLE

    def witness_names(self, m: MdpModel) -> List[str]:
        return [m.action_names[a] for a in (self.witness or [])]


def _task_seed(seed: int, action: int, x: Vec01) -> np.random.SeedSequence:
    digest = hashlib.sha256(repr(x).encode("utf-8")).digest()
    return np.random.SeedSequence([int(seed), int(action), int.from_bytes(digest[:8], "little")])


def _replay(m: MdpModel, d0: Configuration, word: List[int]) -> Tuple[Fraction, ...]:
    d: Tuple[Fraction, ...] = tuple(d0)
    for a in word:
        d = m.push(a, d)
    return d


def _log(verbose: bool, msg: str) -> None:
    if verbose:
        print(f"  [antichain] {msg}", file=sys.stderr)


def _iterate(
    m: MdpModel,
    d0: Configuration,
    H: TargetSet,
    generators: Sequence[Vec01],
    dual: bool,
    K: int,
    L: int,
    loop_limit: int,
    rng_seed: int,
    backend: Optional[LpBackend],
    workers: int,
    verbose: bool,
) -> ReachOutcome:
    if len(d0) != m.n_states or any(len(g) != m.n_states for g in generators):
        raise DimensionMismatch(f"target / initial configuration do not match {m.n_states} states")
    order = "top" if dual else "floor"
    S = Antichain(order)
    for g in generators:
        S.insert(AntichainEntry(g))
    if H.contains(d0):
        return ReachOutcome(REACHABLE, 0, witness=[], antichain=S)

    backend = backend or get_backend()
    memo: Dict[Tuple[int, Vec01], List[Vec01]] = {}

    def _pull(task: Tuple[int, Vec01]) -> List[Vec01]:
        a, x = task
        return pullback_minimals(
            m.matrices[a], x, K=K, L=L,
            rng_seed=_task_seed(rng_seed, a, x), backend=backend, dual=dual,
        )

    for it in range(1, loop_limit + 1):
        tasks = [(a, e) for e in S.entries for a in range(m.n_actions)]
        pending = list(dict.fromkeys((a, e.vec) for a, e in tasks if (a, e.vec) not in memo))
        if workers > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for key, ys in zip(pending, pool.map(_pull, pending)):
                    memo[key] = ys
        else:
            for key in pending:
                memo[key] = _pull(key)

        S_next = S.copy()
        for a, e in tasks:
            for y in memo[(a, e.vec)]:
                S_next.insert(AntichainEntry(y, a, e))
        _log(verbose, f"iteration {it}: {len(S_next)} elements ({len(pending)} new pullbacks)")

        hit = S_next.covering(d0)
        if hit is not None:
            word = hit.word()
            if not H.contains(_replay(m, d0, word)):
                raise WitnessReplayFailed(
                    f"witness {[m.action_names[a] for a in word]} does not reach the target"
                )
            return ReachOutcome(REACHABLE, it, witness=word, antichain=S_next)
        if S_next.same_elements(S):
            return ReachOutcome(STABILIZED, it, antichain=S_next)
        S = S_next
    return ReachOutcome(LOOP_LIMIT, loop_limit, antichain=S)


def backward_reach(
    m: MdpModel,
    d0: Configuration,
    H: TargetSet,
    K: int = 3,
    L: int = 1,
    loop_limit: int = 100,
    rng_seed: int = 0,
    backend: Optional[LpBackend] = None,
    workers: int = 1,
    verbose: bool = False,
) -> ReachOutcome:
    """Decide (soundly, incompletely) whether some action word moves d0 into H."""
    if isinstance(H, DownwardGenerators):
        return dual_backward_reach(m, d0, H, K, L, loop_limit, rng_seed, backend, workers, verbose)
    if not isinstance(H, UpwardGenerators):
        raise InvalidInput(f"backward reachability needs a monotone target, got '{H.kind}'")
    return _iterate(m, d0, H, H.generators, False, K, L, loop_limit, rng_seed, backend, workers, verbose)


def dual_backward_reach(
    m: MdpModel,
    d0: Configuration,
    H: TargetSet,
    K: int = 3,
    L: int = 1,
    loop_limit: int = 100,
    rng_seed: int = 0,
    backend: Optional[LpBackend] = None,
    workers: int = 1,
    verbose: bool = False,
) -> ReachOutcome:
    """backward_reach for downward-closed targets (antichain of maximal elements)."""
    if not isinstance(H, DownwardGenerators):
        raise InvalidInput(f"dual backward reachability needs a downward target, got '{H.kind}'")
    return _iterate(m, d0, H, H.generators, True, K, L, loop_limit, rng_seed, backend, workers, verbose)
