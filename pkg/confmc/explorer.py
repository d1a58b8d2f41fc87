"""Bounded exact forward exploration of config MCs.

This module is the ground-truth oracle for the two reachability algorithms:

- ``explore``             breadth-first unfolding into a ``ConfigGraph``
- ``reach_prob_bounded``  exact probability of hitting H within k steps
- ``simulate`` / ``estimate_reach``  Monte-Carlo paths and hit frequencies
- ``gen_subsetsum``       instances whose MSCT reach probability counts subset sums
- ``graph_to_dot``        DOT rendering (nodes n0, n1, ... in BFS order)
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from confmc.core import (
    Configuration,
    MdpModel,
    Scheduler,
    Vec01,
    leq,
    mdp_validate,
    to_rat,
)
from confmc.errors import BranchExplosion, DimensionMismatch, InvalidInput
from confmc.semantics import SemanticsId, config_step, is_absorbing, is_memoryless, sample_step

# Maximum number of graph nodes / frontier entries.  Override with env var
# CONFMC_NODE_CAP.
NODE_CAP: int = int(os.environ.get("CONFMC_NODE_CAP", 10**6))

_ZERO = Fraction(0)
_ONE = Fraction(1)


# ---------------------------------------------------------------------------
# Target sets
# ---------------------------------------------------------------------------

class TargetSet:
    """A set H of configurations with an exact membership test."""

    kind: str = ""

    @property
    def dimension(self) -> Optional[int]:
        raise NotImplementedError

    def contains(self, d: Sequence[Fraction]) -> bool:
        raise NotImplementedError


def _as_vectors(values, what: str) -> Tuple[Vec01, ...]:
    vecs = tuple(v if isinstance(v, Vec01) else Vec01(tuple(v)) for v in values)
    if not vecs:
        raise InvalidInput(f"{what} needs at least one generator")
    n = len(vecs[0])
    if any(len(v) != n for v in vecs):
        raise DimensionMismatch(f"{what} generators have different lengths")
    return vecs


def _extremal(vecs: Sequence[Vec01], minimal: bool) -> Tuple[Vec01, ...]:
    kept: List[Vec01] = []
    for v in dict.fromkeys(vecs):
        dominated = any(
            w != v and (leq(w, v) if minimal else leq(v, w)) for w in vecs
        )
        if not dominated:
            kept.append(v)
    return tuple(kept)


@dataclass(frozen=True)
class UpwardGenerators(TargetSet):
    """H = {d | g <= d for some generator g}; generators kept minimal."""

    generators: Tuple[Vec01, ...]
    kind = "up"

    def __post_init__(self):
        vecs = _as_vectors(self.generators, "upward target")
        object.__setattr__(self, "generators", _extremal(vecs, minimal=True))

    @property
    def dimension(self) -> int:
        return len(self.generators[0])

    def contains(self, d: Sequence[Fraction]) -> bool:
        return any(leq(g, d) for g in self.generators)


@dataclass(frozen=True)
class DownwardGenerators(TargetSet):
    """H = {d | d <= g for some generator g}; generators kept maximal."""

    generators: Tuple[Vec01, ...]
    kind = "down"

    def __post_init__(self):
        vecs = _as_vectors(self.generators, "downward target")
        object.__setattr__(self, "generators", _extremal(vecs, minimal=False))

    @property
    def dimension(self) -> int:
        return len(self.generators[0])

    def contains(self, d: Sequence[Fraction]) -> bool:
        return any(leq(d, g) for g in self.generators)


@dataclass(frozen=True)
class ExplicitConfigs(TargetSet):
    configs: Tuple[Configuration, ...]
    kind = "explicit"

    def __post_init__(self):
        cfgs = tuple(c if isinstance(c, Configuration) else Configuration(tuple(c)) for c in self.configs)
        if not cfgs:
            raise InvalidInput("explicit target needs at least one configuration")
        if any(len(c) != len(cfgs[0]) for c in cfgs):
            raise DimensionMismatch("explicit target configurations have different lengths")
        object.__setattr__(self, "configs", cfgs)
        object.__setattr__(self, "_entries", frozenset(c.entries for c in cfgs))

    @property
    def dimension(self) -> int:
        return len(self.configs[0])

    def contains(self, d: Sequence[Fraction]) -> bool:
        return tuple(d) in self._entries


@dataclass(frozen=True)
class LinearThreshold(TargetSet):
    """H = {d | alpha . d >= bound}  (or > bound when strict)."""

    alpha: Tuple[Fraction, ...]
    bound: Fraction
    strict: bool = False
    kind = "linear"

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(to_rat(v) for v in self.alpha))
        object.__setattr__(self, "bound", to_rat(self.bound))

    @property
    def dimension(self) -> int:
        return len(self.alpha)

    def contains(self, d: Sequence[Fraction]) -> bool:
        value = sum((a * x for a, x in zip(self.alpha, d)), _ZERO)
        return value > self.bound if self.strict else value >= self.bound


def target_contains(H: TargetSet, d: Sequence[Fraction]) -> bool:
    if H.dimension != len(d):
        raise DimensionMismatch(f"target of dimension {H.dimension} tested on vector of length {len(d)}")
    return H.contains(d)


# ---------------------------------------------------------------------------
# Config graph
# ---------------------------------------------------------------------------

@dataclass
class GraphNode:
    index: int
    history: Tuple[Configuration, ...]
    depth: int
    in_target: bool = False
    expanded: bool = False

    @property
    def config(self) -> Configuration:
        return self.history[-1]


@dataclass
class GraphEdge:
    src: int
    dst: int
    prob: Fraction


@dataclass
class ConfigGraph:
    """Unfolded config MC.  Nodes keyed by configuration (memoryless scheduler)
    or by full history (memoryful scheduler)."""

    nodes: List[GraphNode] = field(default_factory=list)
    edges: List[GraphEdge] = field(default_factory=list)
    roots: List[int] = field(default_factory=list)
    keyed_by: str = "configuration"

    def out_edges(self, index: int) -> List[GraphEdge]:
        return [e for e in self.edges if e.src == index]


def explore(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    d0: Configuration,
    depth: int,
    target: Optional[TargetSet] = None,
    method: str = "compositional",
    cap: Optional[int] = None,
) -> ConfigGraph:
    """Breadth-first unfolding to *depth*; nodes in *target* are not expanded."""
    if depth < 0:
        raise InvalidInput(f"depth must be >= 0, got {depth}")
    limit = NODE_CAP if cap is None else cap
    memoryless = is_memoryless(sigma)
    graph = ConfigGraph(keyed_by="configuration" if memoryless else "history")

    def _key(hist):
        return hist[-1] if memoryless else hist

    root = GraphNode(0, (d0,), 0, in_target=target is not None and target.contains(d0))
    graph.nodes.append(root)
    graph.roots.append(0)
    index: Dict = {_key(root.history): 0}
    queue = deque([0])

    while queue:
        node = graph.nodes[queue.popleft()]
        if node.depth >= depth or node.in_target:
            continue
        succ = config_step(m, sigma, s, node.history, method=method).successors
        node.expanded = True
        for cfg, p in succ.items():
            hist = (cfg,) if memoryless else node.history + (cfg,)
            j = index.get(_key(hist))
            if j is None:
                if len(graph.nodes) >= limit:
                    raise BranchExplosion(f"exploration exceeded {limit} nodes")
                j = len(graph.nodes)
                in_target = target is not None and target.contains(cfg)
                graph.nodes.append(GraphNode(j, hist, node.depth + 1, in_target=in_target))
                index[_key(hist)] = j
                queue.append(j)
            graph.edges.append(GraphEdge(node.index, j, p))
    return graph


# ---------------------------------------------------------------------------
# Bounded reachability
# ---------------------------------------------------------------------------

class ReachBound(NamedTuple):
    lower: Fraction
    settled: bool


def _check_dimensions(m: MdpModel, d0: Sequence[Fraction], H: TargetSet) -> None:
    if len(d0) != m.n_states:
        raise DimensionMismatch(f"initial configuration has length {len(d0)}, model has {m.n_states} states")
    if H.dimension is not None and H.dimension != m.n_states:
        raise DimensionMismatch(f"target of dimension {H.dimension} for a model with {m.n_states} states")


def _reach_layers(m, sigma, s, d0, H, depth, method, cap) -> Iterator[Tuple[Fraction, Dict]]:
    """Yield (hit probability, frontier) after 0, 1, ..., depth steps."""
    _check_dimensions(m, d0, H)
    limit = NODE_CAP if cap is None else cap
    if H.contains(d0):
        yield _ONE, {}
        return
    memoryless = is_memoryless(sigma)
    hit = _ZERO
    frontier: Dict = {d0 if memoryless else (d0,): ((d0,), _ONE)}
    yield hit, frontier
    for _ in range(depth):
        nxt: Dict = {}
        for hist, mass in frontier.values():
            succ = config_step(m, sigma, s, hist, method=method).successors
            for cfg, p in succ.items():
                if H.contains(cfg):
                    hit += mass * p
                    continue
                h2 = (cfg,) if memoryless else hist + (cfg,)
                k2 = cfg if memoryless else h2
                prev = nxt.get(k2)
                nxt[k2] = (h2, (prev[1] if prev else _ZERO) + mass * p)
            if len(nxt) > limit:
                raise BranchExplosion(f"frontier exceeded {limit} entries")
        frontier = nxt
        yield hit, frontier


def reach_prob_bounded(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    d0: Configuration,
    H: TargetSet,
    depth: int,
    method: str = "closed",
    cap: Optional[int] = None,
) -> ReachBound:
    """Exact probability of hitting H within *depth* steps.

    ``settled`` is true when every remaining frontier configuration is
    absorbing, in which case ``lower`` is the exact reachability probability.
    """
    if depth < 0:
        raise InvalidInput(f"depth must be >= 0, got {depth}")
    hit, frontier = _ONE, {}
    for hit, frontier in _reach_layers(m, sigma, s, d0, H, depth, method, cap):
        pass
    settled = all(is_absorbing(m, s, hist[-1]) for hist, _ in frontier.values())
    return ReachBound(hit, settled)


def reach_curve(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    d0: Configuration,
    H: TargetSet,
    depth: int,
    method: str = "closed",
) -> List[Fraction]:
    """Bounded reach probabilities for depths 0..depth."""
    values = [hit for hit, _ in _reach_layers(m, sigma, s, d0, H, depth, method, None)]
    while len(values) < depth + 1:
        values.append(values[-1])
    return values


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def simulate(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    d0: Configuration,
    steps: int,
    rng_seed: int = 0,
) -> List[Configuration]:
    """Sample one configuration path of length steps + 1."""
    if steps < 0:
        raise InvalidInput(f"steps must be >= 0, got {steps}")
    rng = np.random.default_rng(rng_seed)
    path = [d0]
    for _ in range(steps):
        path.append(sample_step(m, sigma, s, path, rng))
    return path


@dataclass
class ReachEstimate:
    runs: int
    hits: int
    capped: int  # runs that neither hit H nor got absorbed within the step cap

    @property
    def frequency(self) -> float:
        return self.hits / self.runs if self.runs else 0.0

    @property
    def stderr(self) -> float:
        if not self.runs:
            return 0.0
        p = self.frequency
        return math.sqrt(p * (1.0 - p) / self.runs)


def estimate_reach(
    m: MdpModel,
    sigma: Scheduler,
    s: SemanticsId,
    d0: Configuration,
    H: TargetSet,
    runs: int,
    step_cap: int,
    rng_seed: int = 0,
) -> ReachEstimate:
    """Monte-Carlo hit frequency of H over *runs* paths of at most *step_cap* steps."""
    rng = np.random.default_rng(rng_seed)
    hits = capped = 0
    for _ in range(runs):
        path = [d0]
        hit = H.contains(d0)
        steps = 0
        while not hit and steps < step_cap:
            history = path[-1:] if is_memoryless(sigma) else path
            path.append(sample_step(m, sigma, s, history, rng))
            hit = H.contains(path[-1])
            steps += 1
        if hit:
            hits += 1
        elif not is_absorbing(m, s, path[-1]):
            capped += 1
    return ReachEstimate(runs=runs, hits=hits, capped=capped)


# ---------------------------------------------------------------------------
# Subset-sum instances
# ---------------------------------------------------------------------------

class SubsetSumInstance(NamedTuple):
    model: MdpModel
    initial: Configuration
    target: ExplicitConfigs
    threshold: Fraction


def gen_subsetsum(values: Sequence[int], target: int) -> SubsetSumInstance:
    """MDP whose MSCT reach probability is |{A subset S : sum A = T}| / 2^n.

    Every item state i holds mass a_i / sum(S) and moves to ``top`` or ``bot``
    with probability 1/2 each; ``top`` and ``bot`` are absorbing.
    """
    items = [int(v) for v in values]
    if not items:
        raise InvalidInput("subset-sum instance needs a nonempty set")
    if any(v <= 0 for v in items) or target <= 0:
        raise InvalidInput("subset-sum values and target must be positive integers")
    total = sum(items)
    if target > total:
        raise InvalidInput(f"target {target} exceeds the set sum {total}")

    n = len(items)
    size = n + 2
    top, bot = n, n + 1
    half = Fraction(1, 2)
    rows = []
    for i in range(n):
        row = [_ZERO] * size
        row[top] = half
        row[bot] = half
        rows.append(tuple(row))
    for j in (top, bot):
        rows.append(tuple(_ONE if k == j else _ZERO for k in range(size)))

    model = MdpModel(
        state_names=tuple(f"s{i + 1}" for i in range(n)) + ("top", "bot"),
        action_names=("go",),
        matrices=(tuple(rows),),
    )
    mdp_validate(model)

    initial = Configuration(tuple(Fraction(v, total) for v in items) + (_ZERO, _ZERO))
    goal = [_ZERO] * size
    goal[top] = Fraction(target, total)
    goal[bot] = 1 - goal[top]
    return SubsetSumInstance(
        model=model,
        initial=initial,
        target=ExplicitConfigs((Configuration(tuple(goal)),)),
        threshold=Fraction(1, 2**n),
    )


# ---------------------------------------------------------------------------
# DOT output
# ---------------------------------------------------------------------------

def _gvquote(s: str) -> str:
    return '"{}"'.format(s.replace('"', r'\"'))


def graph_to_dot(graph: ConfigGraph) -> Iterator[str]:
    """Produce a DOT digraph as an iterable of lines.

    Use like so::

        with open("graph.dot", "w") as fh:
            fh.writelines(graph_to_dot(graph))
    """
    yield "digraph configmc {\n"
    yield "  rankdir=LR;\n"
    for node in graph.nodes:
        shape = "doublecircle" if node.in_target else "ellipse"
        yield f"  n{node.index} [label={_gvquote(repr(node.config))}, shape={shape}];\n"
    for e in graph.edges:
        yield f"  n{e.src} -> n{e.dst} [label={_gvquote(str(e.prob))}];\n"
    yield "}\n"


def write_dot(graph: ConfigGraph, path) -> None:
    with open(path, "w") as fh:
        fh.writelines(graph_to_dot(graph))
