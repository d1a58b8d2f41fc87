"""Exact-arithmetic value types shared by every other module.

Rationals are :class:`fractions.Fraction` throughout; floating point only
appears inside LP / solver backends.  Everything here is immutable.

Types
-----
- ``Dist``           finitely supported distribution (keys sorted canonically)
- ``Labeled``        a distribution tagged with the index it belongs to
- ``Vec01``          vector in [0,1]^n (antichain element, LP variable)
- ``Configuration``  Vec01 whose entries sum to exactly 1
- ``MdpModel``       states, global actions, one row-stochastic matrix per action
- schedulers         ``ConstantMixed``, ``ActionWord``, ``LinearFractional``,
                     ``HistoryTable``
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from confmc.errors import (
    DimensionMismatch,
    InvalidInput,
    InvalidScheduler,
    NegativeWeight,
    NotNormalized,
    NotStochastic,
)

Rat = Fraction
Number = Union[int, Fraction, str]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def to_rat(value: Any) -> Fraction:
    """Convert *value* to an exact rational.

    Strings go through ``Fraction`` ("1/2", "0.1"); floats through their
    shortest ``repr`` so that ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(repr(value))
    if hasattr(value, "__index__"):
        return Fraction(int(value))
    if hasattr(value, "p") and hasattr(value, "q"):  # sympy Rational
        return Fraction(int(value.p), int(value.q))
    raise TypeError(f"cannot convert {value!r} to a rational")


def fmt_rat(value: Fraction) -> str:
    """Render a rational as ``"p/q"`` (or ``"p"`` for integers)."""
    return str(value)


def sort_key(x: Any):
    """Total, deterministic ordering key over every value type used as a Dist key."""
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        return (0, x)
    if isinstance(x, str):
        return (1, x)
    if isinstance(x, Labeled):
        return (2, sort_key(x.label), x.dist.key)
    if isinstance(x, Dist):
        return (3, x.key)
    if isinstance(x, Vec01):
        return (4, x.entries)
    if isinstance(x, tuple):
        return (5, tuple(sort_key(v) for v in x))
    return (9, repr(x))


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

class Dist(Mapping):
    """Finitely supported probability distribution with exact weights.

    Duplicate keys are merged by addition, zero weights dropped, and the
    support is stored in canonical order so equal distributions iterate
    identically.
    """

    __slots__ = ("_probs", "_key", "_hash")

    def __init__(self, pairs: Union[Mapping, Iterable[Tuple[Any, Number]]] = ()):
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        acc: Dict[Any, Fraction] = {}
        for k, p in items:
            p = to_rat(p)
            if p < 0:
                raise NegativeWeight(f"negative weight {p} for {k!r}")
            acc[k] = acc.get(k, _ZERO) + p
        total = sum(acc.values(), _ZERO)
        if total != 1:
            raise NotNormalized(f"weights sum to {total}, expected 1")
        self._set(acc)

    def _set(self, acc: Dict[Any, Fraction]) -> None:
        ordered = sorted(((k, p) for k, p in acc.items() if p != 0), key=lambda kv: sort_key(kv[0]))
        self._probs = dict(ordered)
        self._key = None
        self._hash = None

    @classmethod
    def _trusted(cls, acc: Dict[Any, Fraction]) -> "Dist":
        """Build from weights already known to be nonnegative and normalized."""
        d = cls.__new__(cls)
        d._set(acc)
        return d

    @classmethod
    def dirac(cls, x: Any) -> "Dist":
        return cls._trusted({x: _ONE})

    # Mapping protocol -------------------------------------------------

    def __getitem__(self, key):
        return self._probs[key]

    def __iter__(self) -> Iterator:
        return iter(self._probs)

    def __len__(self) -> int:
        return len(self._probs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dist):
            return NotImplemented
        return self._probs == other._probs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._probs.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{k!r}: {p}" for k, p in self._probs.items())
        return f"Dist{{{body}}}"

    # helpers ----------------------------------------------------------

    @property
    def key(self) -> Tuple:
        if self._key is None:
            self._key = tuple((sort_key(k), p) for k, p in self._probs.items())
        return self._key

    @property
    def support(self) -> Tuple:
        return tuple(self._probs)

    def prob(self, x: Any) -> Fraction:
        return self._probs.get(x, _ZERO)

    def is_dirac(self) -> bool:
        return len(self._probs) == 1


def dist_new(pairs: Iterable[Tuple[Any, Number]]) -> Dist:
    """Construct a distribution, merging duplicates and dropping zeros."""
    return Dist(pairs)


def pushforward(f: Callable[[Any], Any], d: Dist) -> Dist:
    """Image measure of *d* under the total map *f*."""
    acc: Dict[Any, Fraction] = {}
    for x, p in d.items():
        y = f(x)
        acc[y] = acc.get(y, _ZERO) + p
    return Dist._trusted(acc)


@dataclass(frozen=True)
class Labeled:
    """A distribution tagged with the index (state or action) it was drawn for.

    Pre-configurations key their middle and outer layers with ``Labeled``
    values so that equal rows of different states stay independent tosses.
    """

    label: Any
    dist: Dist


def inner_of(key: Any) -> Dist:
    """The distribution carried by a key of a nested distribution."""
    return key.dist if isinstance(key, Labeled) else key


# ---------------------------------------------------------------------------
# Vectors
# ---------------------------------------------------------------------------

def _fmt_vec(values: Sequence[Fraction]) -> str:
    return "(" + ", ".join(str(v) for v in values) + ")"


@dataclass(frozen=True)
class Vec01:
    """Vector in [0,1]^n; entries need not sum to 1."""

    entries: Tuple[Fraction, ...]

    def __post_init__(self):
        vals = tuple(to_rat(v) for v in self.entries)
        for i, v in enumerate(vals):
            if v < 0 or v > 1:
                raise InvalidInput(f"entry {i} = {v} is outside [0, 1]")
        object.__setattr__(self, "entries", vals)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __repr__(self) -> str:
        return _fmt_vec(self.entries)

    def as_strings(self) -> List[str]:
        return [str(v) for v in self.entries]


@dataclass(frozen=True, repr=False)
class Configuration(Vec01):
    """A distribution over states as a dense vector (a point of the simplex)."""

    def __post_init__(self):
        super().__post_init__()
        total = sum(self.entries, _ZERO)
        if total != 1:
            raise NotNormalized(f"configuration {_fmt_vec(self.entries)} sums to {total}")

    @property
    def weights(self) -> Tuple[Fraction, ...]:
        return self.entries

    @classmethod
    def dirac(cls, state: int, n_states: int) -> "Configuration":
        return cls(tuple(_ONE if i == state else _ZERO for i in range(n_states)))

    @classmethod
    def from_dist(cls, d: Dist, n_states: int) -> "Configuration":
        vals = [_ZERO] * n_states
        for q, p in d.items():
            vals[q] += p
        return cls(tuple(vals))

    def as_dist(self) -> Dist:
        return Dist._trusted({q: p for q, p in enumerate(self.entries)})

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(q for q, p in enumerate(self.entries) if p != 0)

    def is_dirac(self) -> bool:
        return len(self.support) == 1


def leq(x: Sequence[Fraction], y: Sequence[Fraction]) -> bool:
    """Componentwise order on [0,1]^n."""
    if len(x) != len(y):
        raise DimensionMismatch(f"cannot compare vectors of length {len(x)} and {len(y)}")
    return all(a <= b for a, b in zip(x, y))


# ---------------------------------------------------------------------------
# MDP
# ---------------------------------------------------------------------------

Matrix = Tuple[Tuple[Fraction, ...], ...]


@dataclass(frozen=True)
class MdpModel:
    """Finite MDP with global actions.

    ``matrices[a][i][j]`` is the probability of moving from state ``i`` to
    state ``j`` under action ``a`` (row ``i`` is delta(q_i, a)).
    """

    state_names: Tuple[str, ...]
    action_names: Tuple[str, ...]
    matrices: Tuple[Matrix, ...]
    _rows: Tuple[Tuple[Dist, ...], ...] = field(
        default=(), init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        states = tuple(str(s) for s in self.state_names)
        actions = tuple(str(a) for a in self.action_names)
        if not states:
            raise InvalidInput("an MDP needs at least one state")
        if not actions:
            raise InvalidInput("an MDP needs at least one action")
        if len(set(states)) != len(states):
            raise InvalidInput(f"duplicate state names: {list(states)}")
        if len(set(actions)) != len(actions):
            raise InvalidInput(f"duplicate action names: {list(actions)}")
        if len(self.matrices) != len(actions):
            raise DimensionMismatch(
                f"{len(self.matrices)} matrices given for {len(actions)} actions"
            )
        n = len(states)
        mats = []
        for a, mat in zip(actions, self.matrices):
            if len(mat) != n or any(len(row) != n for row in mat):
                raise DimensionMismatch(f"matrix of action '{a}' is not {n}x{n}")
            mats.append(tuple(tuple(to_rat(v) for v in row) for row in mat))
        object.__setattr__(self, "state_names", states)
        object.__setattr__(self, "action_names", actions)
        object.__setattr__(self, "matrices", tuple(mats))
        # rows[a][q] as distributions over state ids
        object.__setattr__(self, "_rows", tuple(
            tuple(Dist._trusted(dict(enumerate(row))) for row in mat) for mat in mats
        ))

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    def action_id(self, name: str) -> int:
        try:
            return self.action_names.index(name)
        except ValueError:
            raise InvalidInput(f"unknown action '{name}' (known: {list(self.action_names)})") from None

    def state_id(self, name: str) -> int:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise InvalidInput(f"unknown state '{name}' (known: {list(self.state_names)})") from None

    def row(self, q: int, a: int) -> Dist:
        """delta(q, a) as a distribution over state ids."""
        return self._rows[a][q]

    def push(self, a: int, vec: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        """M_a^T vec: mass vector after every state follows action *a*."""
        if len(vec) != self.n_states:
            raise DimensionMismatch(f"vector of length {len(vec)} for {self.n_states} states")
        mat = self.matrices[a]
        out = [_ZERO] * self.n_states
        for i, w in enumerate(vec):
            if w == 0:
                continue
            for j, p in enumerate(mat[i]):
                if p:
                    out[j] += w * p
        return tuple(out)

    def is_absorbing_state(self, q: int) -> bool:
        return all(self.matrices[a][q][q] == 1 for a in range(self.n_actions))


def mdp_validate(m: MdpModel) -> None:
    """Raise NotStochastic unless every matrix row is a distribution."""
    for a, mat in enumerate(m.matrices):
        for i, row in enumerate(mat):
            bad = [v for v in row if v < 0 or v > 1]
            total = sum(row, _ZERO)
            if bad:
                raise NotStochastic(m.action_names[a], i, total, f"entry {bad[0]} outside [0, 1]")
            if total != 1:
                raise NotStochastic(m.action_names[a], i, total)


def couple(d: Sequence[Fraction], e: Dist) -> Dist:
    """Product coupling d ⊗ e over (state, action) pairs."""
    acc: Dict[Tuple[int, Any], Fraction] = {}
    for q, w in enumerate(d):
        if w == 0:
            continue
        for a, p in e.items():
            acc[(q, a)] = w * p
    return Dist._trusted(acc)


# ---------------------------------------------------------------------------
# Schedulers
# ---------------------------------------------------------------------------

class Scheduler:
    """Maps a nonempty configuration history to a distribution over action ids."""

    memoryless: bool = True

    def evaluate(self, history: Sequence[Configuration]) -> Dist:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantMixed(Scheduler):
    weights: Dist

    def evaluate(self, history: Sequence[Configuration]) -> Dist:
        return self.weights


@dataclass(frozen=True)
class ActionWord(Scheduler):
    """Plays ``word`` step by step, then ``default`` forever."""

    word: Tuple[int, ...]
    default: int

    memoryless = False

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(int(a) for a in self.word))

    def evaluate(self, history: Sequence[Configuration]) -> Dist:
        k = len(history) - 1
        a = self.word[k] if k < len(self.word) else self.default
        return Dist.dirac(a)


@dataclass(frozen=True)
class LinearFractional(Scheduler):
    """sigma(d)(a) = (theta[a][0] + sum_q theta[a][q+1] d(q)) / (s[0] + sum_q s[q+1] d(q))."""

    theta: Tuple[Tuple[Fraction, ...], ...]
    s: Tuple[Fraction, ...]

    def __post_init__(self):
        theta = tuple(tuple(to_rat(v) for v in row) for row in self.theta)
        s = tuple(to_rat(v) for v in self.s)
        if any(len(row) != len(s) for row in theta):
            raise DimensionMismatch("every theta row needs as many entries as s")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "s", s)

    @staticmethod
    def _affine(coeffs: Sequence[Fraction], d: Sequence[Fraction]) -> Fraction:
        if len(coeffs) != len(d) + 1:
            raise DimensionMismatch(f"template of size {len(coeffs)} for {len(d)} states")
        total = coeffs[0]
        for c, x in zip(coeffs[1:], d):
            if c and x:
                total += c * x
        return total

    def numerators(self, d: Sequence[Fraction]) -> List[Fraction]:
        return [self._affine(row, d) for row in self.theta]

    def denominator(self, d: Sequence[Fraction]) -> Fraction:
        return self._affine(self.s, d)

    def evaluate(self, history: Sequence[Configuration]) -> Dist:
        d = history[-1]
        den = self.denominator(d)
        if den < 1:
            raise InvalidScheduler(f"denominator {den} < 1 at {d!r}")
        nums = self.numerators(d)
        for a, num in enumerate(nums):
            if num < 0:
                raise InvalidScheduler(f"numerator of action {a} is {num} < 0 at {d!r}")
        if sum(nums, _ZERO) != den:
            raise InvalidScheduler(f"numerators sum to {sum(nums, _ZERO)}, denominator is {den}")
        return Dist._trusted({a: num / den for a, num in enumerate(nums) if num})

    def check_vertices(self, n_states: int) -> None:
        """Validate at every simplex vertex (enough for affine numerators / denominator)."""
        for q in range(n_states):
            self.evaluate([Configuration.dirac(q, n_states)])


@dataclass(frozen=True)
class HistoryTable(Scheduler):
    """Looks up the longest table prefix matching the history, else ``default``."""

    table: Tuple[Tuple[Tuple[Configuration, ...], Dist], ...]
    default: Dist

    memoryless = False

    def evaluate(self, history: Sequence[Configuration]) -> Dist:
        best: Optional[Dist] = None
        best_len = -1
        hist = tuple(history)
        for prefix, dist in self.table:
            k = len(prefix)
            if k <= len(hist) and k > best_len and hist[:k] == tuple(prefix):
                best, best_len = dist, k
        return best if best is not None else self.default


def scheduler_eval(sigma: Scheduler, history: Sequence[Configuration]) -> Dist:
    """sigma(history) as a distribution over action ids."""
    if not history:
        raise InvalidInput("scheduler history must be nonempty")
    return sigma.evaluate(history)


def uniform_scheduler(m: MdpModel) -> ConstantMixed:
    n = m.n_actions
    return ConstantMixed(Dist._trusted({a: Fraction(1, n) for a in range(n)}))
