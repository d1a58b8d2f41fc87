"""Chance/mass semantics of MDPs.

A scheduler step exposes three sources of probability at once (the
pre-configuration): which action is chosen, how the configuration's mass is
spread over states, and where each state's transition lands.  Each of the four
semantics decides, per source, whether the probability is a coin toss (chance)
or a deterministic split of mass:

    CSCT   mu . D(lambda)                  action tossed, every state tossed
    CSMT   D(mu)                           action tossed, mass split
    MSCT   D(mu) . lambda . D(lambda)      action mixed, every (state, action) tossed
    MSMT   eta . mu . D(mu)                everything split, single successor

``config_step`` computes successors compositionally (operators on nested
distributions) or through the direct closed forms; ``method="both"`` runs
both and insists they agree.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from confmc.core import (
    Configuration,
    ConstantMixed,
    Dist,
    Labeled,
    MdpModel,
    Scheduler,
    couple,
    inner_of,
    pushforward,
    scheduler_eval,
)
from confmc.errors import BranchExplosion, InvalidInput, SemanticsMismatch

# Maximum number of enumerated branches for one exact step.  Override with
# env var CONFMC_BRANCH_CAP.
BRANCH_CAP: int = int(os.environ.get("CONFMC_BRANCH_CAP", 10**6))

_ZERO = Fraction(0)
_ONE = Fraction(1)


class SemanticsId(str, Enum):
    CSCT = "csct"
    CSMT = "csmt"
    MSCT = "msct"
    MSMT = "msmt"

    @classmethod
    def parse(cls, text: str) -> "SemanticsId":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise InvalidInput(
                f"unknown semantics '{text}' (expected one of {[s.value for s in cls]})"
            ) from None


@dataclass(frozen=True)
class PreConfiguration:
    """Three-layer distribution: action branch -> configuration mass -> transition target.

    Outer keys are ``Labeled(action, middle)``, middle keys ``Labeled(state, row)``.
    """

    value: Dist
    n_states: int


@dataclass(frozen=True)
class ConfigStepResult:
    successors: Dist  # Dist[Configuration]


def _cap(cap: Optional[int]) -> int:
    return BRANCH_CAP if cap is None else cap


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def eta(x) -> Dist:
    """Dirac distribution at *x*."""
    return Dist.dirac(x)


def mu(dd: Dist) -> Dist:
    """Flatten a distribution of distributions."""
    acc: Dict = {}
    for key, a in dd.items():
        for x, b in inner_of(key).items():
            acc[x] = acc.get(x, _ZERO) + a * b
    return Dist._trusted(acc)


def lambda_op(dd: Dist, cap: Optional[int] = None) -> Dist:
    """Turn independent tosses into a distribution over resulting mass vectors.

    Every key of *dd* is an independent index i with weight a_i and inner
    distribution b_i.  Each choice function f picks one outcome per index;
    it has probability prod_i b_i(f(i)) and yields sum_i a_i |f(i)>.
    """
    indices: List[Tuple[Fraction, List[Tuple]]] = [
        (a, list(inner_of(key).items())) for key, a in dd.items()
    ]
    count = 1
    for _, outcomes in indices:
        count *= len(outcomes)
    limit = _cap(cap)
    if count > limit:
        raise BranchExplosion(f"lambda would enumerate {count} branches (cap {limit})")

    acc: Dict[Dist, Fraction] = {}
    for choice in itertools.product(*(outcomes for _, outcomes in indices)):
        weight = _ONE
        mass: Dict = {}
        for (a, _), (x, b) in zip(indices, choice):
            weight *= b
            mass[x] = mass.get(x, _ZERO) + a
        out = Dist._trusted(mass)
        acc[out] = acc.get(out, _ZERO) + weight
    return Dist._trusted(acc)


def _map_labeled(f, dd: Dist) -> Dist:
    return pushforward(lambda k: Labeled(k.label, f(k.dist)), dd)


# ---------------------------------------------------------------------------
# Pre-configuration and classifiers
# ---------------------------------------------------------------------------

def delta_sigma(m: MdpModel, sigma: Scheduler, history: Sequence[Configuration]) -> PreConfiguration:
    d = history[-1]
    e = scheduler_eval(sigma, history)
    outer: Dict[Labeled, Fraction] = {}
    for a, pa in e.items():
        middle = Dist._trusted({Labeled(q, m.row(q, a)): w for q, w in enumerate(d) if w})
        outer[Labeled(a, middle)] = pa
    return PreConfiguration(Dist._trusted(outer), m.n_states)


def _msct_branches(t: PreConfiguration) -> int:
    count = 1
    for outer_key in t.value:
        for middle_key in outer_key.dist:
            count *= len(middle_key.dist)
    return count


def classify(s: SemanticsId, t: PreConfiguration, cap: Optional[int] = None) -> Dist:
    """Apply the classifier of semantics *s*; returns Dist[Configuration]."""
    s = SemanticsId(s)
    n = t.n_states
    if s is SemanticsId.CSCT:
        flat = mu(_map_labeled(lambda mid: lambda_op(mid, cap), t.value))
    elif s is SemanticsId.CSMT:
        flat = pushforward(lambda k: mu(k.dist), t.value)
    elif s is SemanticsId.MSCT:
        limit = _cap(cap)
        count = _msct_branches(t)
        if count > limit:
            raise BranchExplosion(f"MSCT step would enumerate {count} branches (cap {limit})")
        per_action = _map_labeled(lambda mid: lambda_op(mid, cap), t.value)
        flat = pushforward(mu, lambda_op(per_action, cap))
    else:
        flat = eta(mu(pushforward(lambda k: mu(k.dist), t.value)))
    return pushforward(lambda x: Configuration.from_dist(x, n), flat)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def _convolve(pieces: List[Tuple[Fraction, Dist]], n: int, cap: Optional[int]) -> Dict[Tuple, Fraction]:
    """Distribution of sum_i mass_i * e_{X_i} for independent X_i ~ row_i."""
    count = 1
    for _, row in pieces:
        count *= len(row)
    limit = _cap(cap)
    if count > limit:
        raise BranchExplosion(f"closed form would enumerate {count} branches (cap {limit})")
    acc: Dict[Tuple, Fraction] = {tuple([_ZERO] * n): _ONE}
    for mass, row in pieces:
        nxt: Dict[Tuple, Fraction] = {}
        for vec, p in acc.items():
            for j, b in row.items():
                v = list(vec)
                v[j] += mass
                key = tuple(v)
                nxt[key] = nxt.get(key, _ZERO) + p * b
        acc = nxt
    return acc


def closed_form_step(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    history: Sequence[Configuration],
    cap: Optional[int] = None,
) -> Dist:
    s = SemanticsId(s)
    d = history[-1]
    e = scheduler_eval(sigma, history)
    n = m.n_states
    acc: Dict[Configuration, Fraction] = {}

    if s is SemanticsId.CSCT:
        for a, pa in e.items():
            pieces = [(w, m.row(q, a)) for q, w in enumerate(d) if w]
            for vec, p in _convolve(pieces, n, cap).items():
                cfg = Configuration(vec)
                acc[cfg] = acc.get(cfg, _ZERO) + pa * p
    elif s is SemanticsId.MSCT:
        pieces = [(w, m.row(q, a)) for (q, a), w in couple(d, e).items()]
        for vec, p in _convolve(pieces, n, cap).items():
            cfg = Configuration(vec)
            acc[cfg] = acc.get(cfg, _ZERO) + p
    elif s is SemanticsId.CSMT:
        for a, pa in e.items():
            cfg = Configuration(m.push(a, d))
            acc[cfg] = acc.get(cfg, _ZERO) + pa
    else:
        vec = [_ZERO] * n
        for a, pa in e.items():
            for j, x in enumerate(m.push(a, d)):
                vec[j] += pa * x
        acc[Configuration(tuple(vec))] = _ONE
    return Dist._trusted(acc)


def config_step(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    history: Sequence[Configuration],
    method: str = "compositional",
    cap: Optional[int] = None,
) -> ConfigStepResult:
    """One step of the config MC from the last configuration of *history*."""
    if not history:
        raise InvalidInput("history must be nonempty")
    if method == "closed":
        return ConfigStepResult(closed_form_step(m, sigma, s, history, cap))
    if method not in ("compositional", "both"):
        raise InvalidInput(f"unknown step method '{method}'")
    succ = classify(s, delta_sigma(m, sigma, history), cap)
    if method == "both":
        other = closed_form_step(m, sigma, s, history, cap)
        if other != succ:
            raise SemanticsMismatch(
                f"{SemanticsId(s).value}: compositional {succ!r} != closed form {other!r}"
            )
    return ConfigStepResult(succ)


def is_memoryless(sigma: Scheduler) -> bool:
    """True when sigma only looks at the last configuration of a history."""
    return bool(sigma.memoryless)


def mean_successor(m: MdpModel, sigma: Scheduler, history: Sequence[Configuration]) -> Configuration:
    """The unique MSMT successor, i.e. the one-step expectation under every semantics."""
    succ = closed_form_step(m, sigma, SemanticsId.MSMT, history)
    return next(iter(succ))


def is_absorbing(m: MdpModel, s: SemanticsId, d: Configuration) -> bool:
    """True iff every action's one-step successor distribution is Dirac at *d*."""
    for a in range(m.n_actions):
        succ = closed_form_step(m, ConstantMixed(Dist.dirac(a)), s, [d])
        if succ != Dist.dirac(d):
            return False
    return True


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _draw(dist: Dist, rng):
    u = rng.random()
    acc = 0.0
    last = None
    for key, p in dist.items():
        acc += float(p)
        last = key
        if u < acc:
            return key
    return last


def sample_step(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    history: Sequence[Configuration],
    rng,
) -> Configuration:
    """Draw one successor without enumerating the successor distribution."""
    s = SemanticsId(s)
    d = history[-1]
    e = scheduler_eval(sigma, history)
    n = m.n_states
    if s is SemanticsId.MSMT:
        return mean_successor(m, sigma, history)
    if s is SemanticsId.CSMT:
        return Configuration(m.push(_draw(e, rng), d))
    vec = [_ZERO] * n
    if s is SemanticsId.CSCT:
        a = _draw(e, rng)
        for q, w in enumerate(d):
            if w:
                vec[_draw(m.row(q, a), rng)] += w
    else:
        for q, w in enumerate(d):
            if not w:
                continue
            for a, pa in e.items():
                vec[_draw(m.row(q, a), rng)] += w * pa
    return Configuration(tuple(vec))
