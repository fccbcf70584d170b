"""Strategy table and pipeline path search.

A *strategy* fixes a pipeline length (number of workers) and per-position
minimum resource requirements; position 0 is the requester.  Given a worker
graph, the search finds, per strategy, the resource-feasible simple path of
exactly that length rooted at the requester that maximizes the composite path
score, then picks the best (strategy, path) pair overall.

Two interchangeable engines produce identical results:

* ``layered`` — the two-phase reference algorithm: *forward search* collects,
  per depth k, the set of directed edges that extend some simple path of
  length k - 1 from the root; *backward tracing* daisy-chains those edge sets
  bottom-up into the complete set of simple paths, which are then filtered by
  per-position resource feasibility and scored.  An instrumented counter
  records one edge check per directed edge per depth per strategy.
* ``numba`` / ``numpy`` — a pruning depth-first kernel (or its vectorized
  twin) that folds the feasibility filter into the walk; used by default
  (``auto`` resolves via :mod:`d2dpipe.backend`) because the experiment
  harness calls it hundreds of thousands of times.

Tie-breaks are deterministic everywhere: highest score, then lowest strategy
index, then lexicographically smallest node-id sequence.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from . import _kernels
from .graph import (
    DEFAULT_SCORE_WEIGHTS,
    RESOURCE_NAMES,
    NodeRecord,
    ScoreWeights,
    WorkerGraph,
    path_quality,
    path_reliability,
    path_score,
)

__all__ = [
    "Strategy",
    "StrategyTable",
    "MinRequirements",
    "PathCandidate",
    "SearchStats",
    "REFERENCE_STRATEGY_TABLE",
    "normalize_strategy_table",
    "filter_qualified",
    "forward_search",
    "backward_trace",
    "check_path_resources",
    "best_path_for_strategy",
    "find_best_pipeline",
    "enumerate_simple_paths_oracle",
    "strategy_table_to_dict",
    "strategy_table_from_dict",
    "save_strategy_table",
    "load_strategy_table",
]

logger = logging.getLogger(__name__)

_ENGINES = ("auto", "layered", "numba", "numpy")


@dataclass(frozen=True)
class Strategy:
    """One pipeline configuration: a preference score, a worker count, and
    per-position minimum requirements for each resource type.

    Requirement tuples have ``length + 1`` entries (positions 0..length with
    position 0 the requester) and must be non-negative; raw physical-unit
    tables are representable, and values fall in [0, 1] after
    :func:`normalize_strategy_table`.
    """

    score: float
    length: int
    req_computing: tuple[float, ...]
    req_memory: tuple[float, ...]
    req_buffer: tuple[float, ...]
    req_bandwidth: tuple[float, ...]

    def __post_init__(self) -> None:
        score = float(self.score)
        if math.isnan(score) or not 0.0 <= score <= 1.0:
            raise ValueError(f"strategy score must be in [0, 1], got {self.score!r}")
        length = int(self.length)
        if length < 1:
            raise ValueError(f"strategy length must be >= 1, got {self.length!r}")
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "length", length)
        for name in ("req_computing", "req_memory", "req_buffer", "req_bandwidth"):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) != length + 1:
                raise ValueError(
                    f"{name} must have length + 1 = {length + 1} entries "
                    f"(position 0 = requester), got {len(values)}"
                )
            if any(math.isnan(v) or v < 0.0 for v in values):
                raise ValueError(f"{name} entries must be >= 0, got {values!r}")
            object.__setattr__(self, name, values)

    @cached_property
    def requirement_matrix(self) -> np.ndarray:
        """(length + 1, 4) array; rows are positions, columns follow
        ``RESOURCE_NAMES`` order (computing, memory, buffer, bandwidth)."""
        m = np.column_stack(
            [self.req_computing, self.req_memory, self.req_buffer, self.req_bandwidth]
        ).astype(np.float64)
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        return m

    @property
    def is_normalized(self) -> bool:
        """True when every requirement value lies in [0, 1]."""
        return bool((self.requirement_matrix <= 1.0).all())


@dataclass(frozen=True)
class StrategyTable:
    """Ordered, non-empty collection of strategies."""

    strategies: tuple[Strategy, ...]

    def __post_init__(self) -> None:
        strategies = tuple(self.strategies)
        if not strategies:
            raise ValueError("strategy table must contain at least one strategy")
        object.__setattr__(self, "strategies", strategies)

    def __len__(self) -> int:
        return len(self.strategies)

    def __iter__(self) -> Iterator[Strategy]:
        return iter(self.strategies)

    def __getitem__(self, index: int) -> Strategy:
        return self.strategies[index]

    @property
    def max_length(self) -> int:
        """Longest pipeline length over all strategies."""
        return max(s.length for s in self.strategies)

    @property
    def is_normalized(self) -> bool:
        return all(s.is_normalized for s in self.strategies)


@dataclass(frozen=True)
class MinRequirements:
    """Qualification thresholds applied before path search: minimum link
    quality, minimum node reliability, and componentwise minimum resources."""

    quality_min: float = 0.0
    reliability_min: float = 0.0
    resource_min: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        for name in ("quality_min", "reliability_min"):
            v = float(getattr(self, name))
            if math.isnan(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)!r}")
            object.__setattr__(self, name, v)
        res = tuple(float(v) for v in self.resource_min)
        if len(res) != 4:
            raise ValueError(f"resource_min must have 4 components, got {len(res)}")
        for v, rname in zip(res, RESOURCE_NAMES):
            if math.isnan(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"resource_min[{rname}] must be in [0, 1], got {v!r}")
        object.__setattr__(self, "resource_min", res)


@dataclass(frozen=True)
class PathCandidate:
    """A scored pipeline path: node ids (requester first), the strategy it
    satisfies, and its quality / reliability / composite score."""

    nodes: tuple[int, ...]
    strategy_index: int
    quality: float
    reliability: float
    score: float

    def __post_init__(self) -> None:
        nodes = tuple(int(n) for n in self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"path nodes must be pairwise distinct, got {nodes!r}")
        if not nodes:
            raise ValueError("path must contain at least one node")
        object.__setattr__(self, "nodes", nodes)


@dataclass
class SearchStats:
    """Mutable instrumentation filled in by the layered engine."""

    edge_checks: int = 0
    strategies_skipped: int = 0


# ---------------------------------------------------------------------------
# Normalization and qualification
# ---------------------------------------------------------------------------


def normalize_strategy_table(table: StrategyTable, headroom: float = 1.0) -> StrategyTable:
    """Scale each resource column into [0, 1].

    For each resource type, every requirement value (across all strategies and
    positions) is divided by ``column_max * headroom``.  ``headroom`` defaults
    to 1 (plain column-max normalization); values above 1 proportionally relax
    all requirements of that resource type, which calibrates how demanding the
    table is relative to a worker population whose resources live in [0, 1].
    An all-zero column is left as zeros.  Scores and lengths are unchanged.
    """
    headroom = float(headroom)
    if math.isnan(headroom) or headroom <= 0.0:
        raise ValueError(f"headroom must be > 0, got {headroom!r}")
    names = ("req_computing", "req_memory", "req_buffer", "req_bandwidth")
    maxima = {
        name: max(max(getattr(s, name)) for s in table.strategies) for name in names
    }
    divisors = {
        name: (maxima[name] * headroom if maxima[name] > 0.0 else 1.0) for name in names
    }
    normalized = tuple(
        Strategy(
            score=s.score,
            length=s.length,
            **{
                name: tuple(v / divisors[name] for v in getattr(s, name))
                for name in names
            },
        )
        for s in table.strategies
    )
    return StrategyTable(normalized)


def filter_qualified(graph: WorkerGraph, mins: MinRequirements) -> WorkerGraph:
    """Remove unqualified nodes and links before path search.

    A node is dropped when its reliability or any resource component falls
    below the corresponding minimum; the requester is always retained.  A link
    is dropped when its quality is below ``quality_min`` or either endpoint
    was dropped.  Applying the same thresholds twice changes nothing.
    """
    res_min = np.asarray(mins.resource_min, dtype=np.float64)
    keep: list[NodeRecord] = []
    kept_ids: set[int] = set()
    for node in graph.nodes:
        if node.id == graph.requester_id or (
            node.reliability >= mins.reliability_min
            and bool((np.asarray(node.resources) >= res_min).all())
        ):
            keep.append(node)
            kept_ids.add(node.id)
    links = tuple(
        e
        for e in graph.links
        if e.quality >= mins.quality_min and e.s in kept_ids and e.t in kept_ids
    )
    return WorkerGraph(nodes=tuple(keep), links=links, requester_id=graph.requester_id)


# ---------------------------------------------------------------------------
# Layered engine: forward search + backward tracing
# ---------------------------------------------------------------------------


def _directed_edges(graph: WorkerGraph) -> list[tuple[int, int]]:
    """All directed (u, v) id pairs with a link, ascending lexicographic."""
    edges: list[tuple[int, int]] = []
    for e in graph.links:
        edges.append((e.s, e.t))
        edges.append((e.t, e.s))
    edges.sort()
    return edges


def forward_search(
    graph: WorkerGraph, root: int, n: int, stats: SearchStats | None = None
) -> list[frozenset[tuple[int, int]]]:
    """Per-depth directed edge sets of the simple-path tree rooted at *root*.

    Returns ``[B_1, .., B_n]`` where a directed edge (u, v) belongs to ``B_k``
    exactly when some simple path of k - 1 edges from *root* ends at u and
    avoids v.  Each directed edge of the graph is checked once per depth
    (``stats.edge_checks`` counts those checks: at most ``n * M * (M - 1)``).
    """
    if root not in graph.index_of:
        raise KeyError(f"no node with id {root}")
    n = int(n)
    if n < 1:
        raise ValueError(f"depth n must be >= 1, got {n}")
    edges = _directed_edges(graph)
    frontier: list[tuple[int, ...]] = [(root,)]
    b_sets: list[frozenset[tuple[int, int]]] = []
    for _depth in range(1, n + 1):
        by_end: dict[int, list[tuple[int, ...]]] = {}
        for p in frontier:
            by_end.setdefault(p[-1], []).append(p)
        bk: set[tuple[int, int]] = set()
        new_frontier: list[tuple[int, ...]] = []
        for u, v in edges:
            if stats is not None:
                stats.edge_checks += 1
            for p in by_end.get(u, ()):
                if v not in p:
                    bk.add((u, v))
                    new_frontier.append(p + (v,))
        b_sets.append(frozenset(bk))
        frontier = new_frontier
    return b_sets


def backward_trace(
    b_sets: Sequence[frozenset[tuple[int, int]]], graph: WorkerGraph, root: int
) -> list[tuple[int, ...]]:
    """Daisy-chain the forward-search edge sets bottom-up into full paths.

    Starting from each edge of the deepest set, edges from the next-shallower
    set are prepended whenever they connect and do not revisit a node.  The
    result is exactly the set of simple paths of ``len(b_sets)`` edges from
    *root*, sorted lexicographically; empty when the deepest set is empty.
    """
    if not b_sets or not b_sets[-1]:
        return []
    suffixes: list[tuple[int, ...]] = [(u, v) for (u, v) in sorted(b_sets[-1])]
    for k in range(len(b_sets) - 2, -1, -1):
        level = sorted(b_sets[k])
        extended: list[tuple[int, ...]] = []
        for u, v in level:
            for suf in suffixes:
                if suf[0] == v and u not in suf:
                    extended.append((u,) + suf)
        suffixes = extended
        if not suffixes:
            return []
    return sorted(p for p in suffixes if p[0] == root)


def check_path_resources(
    path: Sequence[int], strategy: Strategy, graph: WorkerGraph
) -> bool:
    """True when the node at every position meets all four of the strategy's
    per-position requirements (``>=`` semantics, position 0 = requester)."""
    if len(path) != strategy.length + 1:
        raise ValueError(
            f"path has {len(path)} nodes but strategy expects "
            f"{strategy.length + 1} (length {strategy.length})"
        )
    idx = [graph.index_of[int(nid)] for nid in path]
    return bool((graph.resource_matrix[idx] >= strategy.requirement_matrix).all())


def enumerate_simple_paths_oracle(
    graph: WorkerGraph, root: int, n: int
) -> list[tuple[int, ...]]:
    """Exhaustive DFS enumeration of all simple paths of exactly *n* edges
    from *root*, in lexicographic order.  Reference oracle for the search."""
    if root not in graph.index_of:
        raise KeyError(f"no node with id {root}")
    n = int(n)
    if n < 1:
        raise ValueError(f"depth n must be >= 1, got {n}")
    out: list[tuple[int, ...]] = []

    def walk(path: tuple[int, ...]) -> None:
        if len(path) == n + 1:
            out.append(path)
            return
        for nb in graph.neighbors(path[-1]):
            if nb not in path:
                walk(path + (nb,))

    walk((root,))
    return out


# ---------------------------------------------------------------------------
# Best-path search
# ---------------------------------------------------------------------------


def _position_feasibility(graph: WorkerGraph, strategy: Strategy) -> np.ndarray:
    """(length + 1, M) boolean mask: position k can be filled by node index j."""
    res = graph.resource_matrix  # (M, 4)
    req = strategy.requirement_matrix  # (n + 1, 4)
    feas = (res[np.newaxis, :, :] >= req[:, np.newaxis, :]).all(axis=2)
    return np.ascontiguousarray(feas)


def _best_path_layered(
    graph: WorkerGraph,
    root: int,
    strategy: Strategy,
    weights: ScoreWeights,
    stats: SearchStats | None,
) -> tuple[tuple[int, ...], float, float, float] | None:
    b_sets = forward_search(graph, root, strategy.length, stats=stats)
    best: tuple[tuple[int, ...], float, float, float] | None = None
    for path in backward_trace(b_sets, graph, root):
        if not check_path_resources(path, strategy, graph):
            continue
        q = path_quality(path, graph)
        r = path_reliability(path, graph)
        s = path_score(q, r, strategy.score, weights)
        if best is None or s > best[3] or (s == best[3] and path < best[0]):
            best = (path, q, r, s)
    return best


def _best_path_kernel(
    graph: WorkerGraph,
    root: int,
    strategy: Strategy,
    weights: ScoreWeights,
    engine: str,
) -> tuple[tuple[int, ...], float, float, float] | None:
    root_idx = graph.index_of[root]
    feas = _position_feasibility(graph, strategy)
    found, idx_path, q, r, combo = _kernels.best_path_indices(
        graph.has_link_matrix,
        graph.quality_matrix,
        graph.link_reliability_matrix,
        feas,
        root_idx,
        strategy.length,
        weights.quality_weight,
        weights.reliability_weight,
        engine=engine,
    )
    if not found:
        return None
    nodes = tuple(graph.ids[i] for i in idx_path)
    score = combo + weights.preference_weight * strategy.score
    return nodes, q, r, score


def best_path_for_strategy(
    graph: WorkerGraph,
    root: int,
    strategy: Strategy,
    weights: ScoreWeights = DEFAULT_SCORE_WEIGHTS,
    *,
    strategy_index: int = 0,
    engine: str = "auto",
    stats: SearchStats | None = None,
) -> PathCandidate | None:
    """Highest-scoring resource-feasible simple path for one strategy.

    Returns ``None`` when the root fails the strategy's position-0
    requirements (the strategy is skipped, counted in
    ``stats.strategies_skipped``) or when no feasible path of the required
    length exists.  Ties on the score go to the lexicographically smallest
    node-id sequence.
    """
    if engine not in _ENGINES:
        raise ValueError(f"engine must be one of {_ENGINES}, got {engine!r}")
    root_idx = graph.index_of.get(int(root))
    if root_idx is None:
        raise KeyError(f"no node with id {root}")
    root_res = graph.resource_matrix[root_idx]
    if not bool((root_res >= strategy.requirement_matrix[0]).all()):
        if stats is not None:
            stats.strategies_skipped += 1
        logger.debug(
            "strategy %d skipped: root %s fails position-0 requirements",
            strategy_index,
            root,
        )
        return None
    if engine == "layered":
        best = _best_path_layered(graph, root, strategy, weights, stats)
    else:
        best = _best_path_kernel(graph, root, strategy, weights, engine)
    if best is None:
        return None
    nodes, q, r, score = best
    return PathCandidate(
        nodes=nodes,
        strategy_index=strategy_index,
        quality=q,
        reliability=r,
        score=score,
    )


def find_best_pipeline(
    graph: WorkerGraph,
    table: StrategyTable,
    weights: ScoreWeights = DEFAULT_SCORE_WEIGHTS,
    *,
    engine: str = "auto",
    stats: SearchStats | None = None,
) -> tuple[int, PathCandidate] | None:
    """Best (strategy, path) pair over the whole table, rooted at the
    requester.  Ties on the score go to the lowest strategy index, then to the
    lexicographically smallest node sequence (inherited from the per-strategy
    search).  Returns ``None`` when no strategy yields a feasible path."""
    best: tuple[int, PathCandidate] | None = None
    for i, strategy in enumerate(table):
        cand = best_path_for_strategy(
            graph,
            graph.requester_id,
            strategy,
            weights,
            strategy_index=i,
            engine=engine,
            stats=stats,
        )
        if cand is None:
            continue
        if best is None or cand.score > best[1].score:
            best = (i, cand)
    return best


# ---------------------------------------------------------------------------
# Bundled reference table and structured-text I/O
# ---------------------------------------------------------------------------

#: Eight-strategy reference table in raw hardware units (computing in MAC/s,
#: memory and buffer in kB, bandwidth in kB/s), position 0 = requester.
#: Used by the experiment harness defaults and the test suite; normalize with
#: :func:`normalize_strategy_table` before feeding it to the search.
REFERENCE_STRATEGY_TABLE = StrategyTable(
    (
        Strategy(
            score=0.0989,
            length=2,
            req_computing=(0.0, 10164.7, 15363.1),
            req_memory=(0.0, 15.6, 4427.0),
            req_buffer=(0.0, 313.6, 1382.4),
            req_bandwidth=(1834.0, 4361.0, 60.0),
        ),
        Strategy(
            score=0.2248,
            length=2,
            req_computing=(0.0, 10096.6, 18172.2),
            req_memory=(0.0, 15.6, 4427.0),
            req_buffer=(0.0, 313.6, 345.6),
            req_bandwidth=(1834.0, 1623.0, 60.0),
        ),
        Strategy(
            score=0.2511,
            length=2,
            req_computing=(0.0, 18872.9, 5925.0),
            req_memory=(0.0, 257.6, 4185.0),
            req_buffer=(0.0, 313.6, 409.6),
            req_bandwidth=(1834.0, 1721.0, 60.0),
        ),
        Strategy(
            score=0.3204,
            length=2,
            req_computing=(0.0, 18521.2, 6712.1),
            req_memory=(0.0, 257.6, 4185.0),
            req_buffer=(0.0, 313.6, 102.4),
            req_bandwidth=(1834.0, 620.0, 60.0),
        ),
        Strategy(
            score=0.4107,
            length=2,
            req_computing=(0.0, 16188.2, 3522.6),
            req_memory=(0.0, 3341.6, 1101.0),
            req_buffer=(0.0, 313.6, 48.0),
            req_bandwidth=(1834.0, 471.0, 60.0),
        ),
        Strategy(
            score=0.4681,
            length=2,
            req_computing=(0.0, 15504.4, 466.7),
            req_memory=(0.0, 4357.6, 85.0),
            req_buffer=(0.0, 313.6, 33.6),
            req_bandwidth=(1834.0, 494.0, 60.0),
        ),
        Strategy(
            score=0.0759,
            length=3,
            req_computing=(0.0, 10096.6, 30317.7, 6716.1),
            req_memory=(0.0, 15.6, 242.0, 4185.0),
            req_buffer=(0.0, 313.6, 345.6, 102.4),
            req_bandwidth=(1834.0, 1472.0, 621.0, 60.0),
        ),
        Strategy(
            score=0.1435,
            length=3,
            req_computing=(0.0, 10096.6, 22602.4, 3522.6),
            req_memory=(0.0, 15.6, 3326.0, 1101.0),
            req_buffer=(0.0, 313.6, 345.6, 48.0),
            req_bandwidth=(1834.0, 1472.0, 471.0, 60.0),
        ),
    )
)


def strategy_table_to_dict(table: StrategyTable) -> dict[str, Any]:
    """Plain-dict form mirroring the table layout: one object per strategy
    with per-position resource rows."""
    return {
        "strategies": [
            {
                "score": s.score,
                "workers": s.length,
                "computing": list(s.req_computing),
                "memory": list(s.req_memory),
                "buffer": list(s.req_buffer),
                "bandwidth": list(s.req_bandwidth),
            }
            for s in table.strategies
        ]
    }


def strategy_table_from_dict(data: Mapping[str, Any]) -> StrategyTable:
    """Inverse of :func:`strategy_table_to_dict`; raises ValueError naming the
    missing or offending field."""
    if "strategies" not in data:
        raise ValueError("strategy table object missing required field 'strategies'")
    strategies = []
    for i, sd in enumerate(data["strategies"]):
        try:
            strategies.append(
                Strategy(
                    score=sd["score"],
                    length=sd["workers"],
                    req_computing=tuple(sd["computing"]),
                    req_memory=tuple(sd["memory"]),
                    req_buffer=tuple(sd["buffer"]),
                    req_bandwidth=tuple(sd["bandwidth"]),
                )
            )
        except KeyError as exc:
            raise ValueError(
                f"strategy {i} missing required field {exc.args[0]!r}"
            ) from None
    return StrategyTable(tuple(strategies))


def save_strategy_table(table: StrategyTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(strategy_table_to_dict(table), fh, indent=2)
        fh.write("\n")


def load_strategy_table(path: str) -> StrategyTable:
    """Read a strategy table (raw physical units allowed; normalize
    separately with :func:`normalize_strategy_table`)."""
    with open(path, "r", encoding="utf-8") as fh:
        return strategy_table_from_dict(json.load(fh))
