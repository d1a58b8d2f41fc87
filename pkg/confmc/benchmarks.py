"""Benchmark model generators.

- ``table1``   three-state toy MDP with actions a / b
- ``casino``   betting rounds: P -> rewards R_j under b_i, ``keep`` skips a round
- ``exam``     examinees in R decay into absorbing grades under problem sets P_i
- ``subsetsum`` see :func:`confmc.explorer.gen_subsetsum`

Random rows are drawn from a seeded numpy generator as small integer weights
normalised exactly, so generated rows sum to 1 without rounding.
Every generator also has a ``*_query`` companion returning a matching query.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from confmc.core import ConstantMixed, Configuration, Dist, MdpModel, mdp_validate, uniform_scheduler
from confmc.errors import InvalidInput
from confmc.explorer import UpwardGenerators, gen_subsetsum
from confmc.modelfile import Query, QueryOptions
from confmc.semantics import SemanticsId

_ZERO = Fraction(0)
_ONE = Fraction(1)

MAX_WEIGHT = 9


def _random_row(rng, k: int) -> List[Fraction]:
    weights = [int(w) for w in rng.integers(1, MAX_WEIGHT + 1, size=k)]
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def _unit(j: int, n: int) -> Tuple[Fraction, ...]:
    return tuple(_ONE if k == j else _ZERO for k in range(n))


# ---------------------------------------------------------------------------
# Three-state toy model
# ---------------------------------------------------------------------------

def table1() -> MdpModel:
    half, tenth = Fraction(1, 2), Fraction(1, 10)
    m = MdpModel(
        state_names=("q0", "q1", "q2"),
        action_names=("a", "b"),
        matrices=(
            ((_ZERO, half, half), _unit(1, 3), _unit(2, 3)),
            ((_ZERO, tenth, 1 - tenth), _unit(1, 3), _unit(2, 3)),
        ),
    )
    mdp_validate(m)
    return m


def table1_query(m: MdpModel) -> Query:
    return Query(
        initial=Configuration.dirac(0, 3),
        semantics=SemanticsId.CSMT,
        target=UpwardGenerators(((_ZERO, _ZERO, Fraction(7, 10)),)),
        threshold=Fraction(9, 10),
        scheduler=ConstantMixed(Dist({0: Fraction(2, 5), 1: Fraction(3, 5)})),
        options=QueryOptions(),
    )


# ---------------------------------------------------------------------------
# Casino
# ---------------------------------------------------------------------------

def gen_casino(n_games: int, m_rewards: int, return_to_play: bool = True, rng_seed: int = 0) -> MdpModel:
    """States P, R_1..R_m; actions keep, b_1..b_n.

    ``keep`` fixes every state.  b_i moves P to the rewards with a random
    row; rewards go back to P under every b_i (``return_to_play``) or stay.
    """
    if n_games < 1 or m_rewards < 1:
        raise InvalidInput("casino needs n_games >= 1 and m_rewards >= 1")
    rng = np.random.default_rng(rng_seed)
    n = m_rewards + 1
    identity = tuple(_unit(j, n) for j in range(n))
    matrices = [identity]
    for _ in range(n_games):
        rows = [(_ZERO,) + tuple(_random_row(rng, m_rewards))]
        for j in range(1, n):
            rows.append(_unit(0, n) if return_to_play else _unit(j, n))
        matrices.append(tuple(rows))
    m = MdpModel(
        state_names=("P",) + tuple(f"R_{j + 1}" for j in range(m_rewards)),
        action_names=("keep",) + tuple(f"b_{i + 1}" for i in range(n_games)),
        matrices=tuple(matrices),
    )
    mdp_validate(m)
    return m


def casino_target(m: MdpModel) -> UpwardGenerators:
    """↑{(0, p/4, 0, ...)} with p the largest single-round P -> R_1 probability."""
    p = max(m.matrices[a][0][1] for a in range(1, m.n_actions))
    gen = [_ZERO] * m.n_states
    gen[1] = p / 4
    return UpwardGenerators((tuple(gen),))


def casino_query(m: MdpModel) -> Query:
    return Query(
        initial=Configuration.dirac(0, m.n_states),
        semantics=SemanticsId.MSCT,
        target=casino_target(m),
        threshold=Fraction(1, 2),
        scheduler=uniform_scheduler(m),
        options=QueryOptions(K=5),
    )


# ---------------------------------------------------------------------------
# Exam
# ---------------------------------------------------------------------------

def gen_exam(n_sets: int, n_grades: int, decay=Fraction(1, 2), rng_seed: int = 0) -> MdpModel:
    """States R, grade_1..grade_g; actions P_1..P_n.

    Every P_i keeps ``decay`` of R in R and spreads the rest over the grades
    with a random row; grades are absorbing.
    """
    decay = Fraction(decay)
    if n_sets < 1 or n_grades < 1:
        raise InvalidInput("exam needs n_sets >= 1 and n_grades >= 1")
    if not 0 < decay < 1:
        raise InvalidInput(f"decay must lie in (0, 1), got {decay}")
    rng = np.random.default_rng(rng_seed)
    n = n_grades + 1
    matrices = []
    for _ in range(n_sets):
        row = [decay] + [(1 - decay) * w for w in _random_row(rng, n_grades)]
        matrices.append((tuple(row),) + tuple(_unit(j, n) for j in range(1, n)))
    m = MdpModel(
        state_names=("R",) + tuple(f"grade_{j + 1}" for j in range(n_grades)),
        action_names=tuple(f"P_{i + 1}" for i in range(n_sets)),
        matrices=tuple(matrices),
    )
    mdp_validate(m)
    return m


def exam_target(m: MdpModel) -> UpwardGenerators:
    """↑{(0, g/2, 0, ...)} with g the largest one-step R -> grade_1 probability."""
    g = max(m.matrices[a][0][1] for a in range(m.n_actions))
    gen = [_ZERO] * m.n_states
    gen[1] = g / 2
    return UpwardGenerators((tuple(gen),))


def exam_query(m: MdpModel) -> Query:
    return Query(
        initial=Configuration.dirac(0, m.n_states),
        semantics=SemanticsId.CSMT,
        target=exam_target(m),
        threshold=Fraction(1, 2),
        scheduler=uniform_scheduler(m),
        options=QueryOptions(),
    )


# ---------------------------------------------------------------------------
# Subset sum
# ---------------------------------------------------------------------------

def subsetsum(values: Sequence[int], target: int) -> Tuple[MdpModel, Query]:
    inst = gen_subsetsum(values, target)
    query = Query(
        initial=inst.initial,
        semantics=SemanticsId.MSCT,
        target=inst.target,
        threshold=inst.threshold,
        scheduler=ConstantMixed(Dist.dirac(0)),
        options=QueryOptions(depth=1),
    )
    return inst.model, query
