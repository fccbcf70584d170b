"""Graph trimming via weighted adjacency-matrix powers.

Before path search, the worker graph is reduced: entry (s, t) of the n-th
power of the thresholded adjacency matrix counts length-n walks between s and
t, so the weighted sum

    H = sum_{n=2..n_max}  power_weight[n-2] * A^n     (+ direct_weight * A)

scores how richly a pair of nodes is connected by multi-hop routes.  Step 1
keeps every node that appears in some ordered pair (diagonal included) with
H[s, t] >= eta; the requester is always kept.  Step 2 keeps exactly the links
whose two endpoints were both kept (the induced subgraph).

Note on semantics: matrix powers count *walks*, including walks that revisit
nodes; the path search itself is restricted to simple paths.  The counts are
computed in exact integer arithmetic before the floating-point weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import (
    DEFAULT_RESOURCE_WEIGHTS,
    ResourceWeights,
    WorkerGraph,
    adjacency_matrix,
)

__all__ = [
    "TrimConfig",
    "TrimReport",
    "DEFAULT_POWER_WEIGHTS",
    "matrix_power_sum",
    "trim_graph",
    "trim_graph_length1",
]

#: Default weights on A^2, A^3, A^4 used by the experiment harness (n_max = 4).
DEFAULT_POWER_WEIGHTS = (0.3, 0.7, 0.0)


@dataclass(frozen=True)
class TrimConfig:
    """Parameters of the trimming rule.

    ``power_weights`` has one non-negative entry per power A^2 .. A^n_max
    (so length ``n_max - 1`` when ``n_max >= 2`` and length 0 when
    ``n_max == 1``).  ``direct_weight`` optionally adds a weighted A^1 term
    so that direct links can justify keeping a pair; it defaults to 0 (off).
    """

    theta: float
    eta: float
    power_weights: tuple[float, ...]
    n_max: int
    direct_weight: float = 0.0

    def __post_init__(self) -> None:
        theta = float(self.theta)
        if math.isnan(theta) or not 0.0 <= theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta!r}")
        eta = float(self.eta)
        if math.isnan(eta) or eta < 0.0:
            raise ValueError(f"eta must be >= 0, got {self.eta!r}")
        n_max = int(self.n_max)
        if n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max!r}")
        pw = tuple(float(w) for w in self.power_weights)
        if len(pw) != n_max - 1:
            raise ValueError(
                f"power_weights must have n_max - 1 = {n_max - 1} entries "
                f"(weights on A^2 .. A^{n_max}), got {len(pw)}"
            )
        if any(math.isnan(w) or w < 0.0 for w in pw):
            raise ValueError(f"power_weights must be non-negative, got {pw!r}")
        dw = float(self.direct_weight)
        if math.isnan(dw) or dw < 0.0:
            raise ValueError(f"direct_weight must be >= 0, got {self.direct_weight!r}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "power_weights", pw)
        object.__setattr__(self, "n_max", n_max)
        object.__setattr__(self, "direct_weight", dw)


@dataclass(frozen=True)
class TrimReport:
    """Before/after sizes and the edge reduction rate of one trim run."""

    nodes_before: int
    nodes_after: int
    edges_before: int
    edges_after: int
    edge_reduction_rate: float

    @staticmethod
    def from_counts(
        nodes_before: int, nodes_after: int, edges_before: int, edges_after: int
    ) -> "TrimReport":
        rate = 1.0 - edges_after / edges_before if edges_before > 0 else 0.0
        return TrimReport(nodes_before, nodes_after, edges_before, edges_after, rate)


def matrix_power_sum(
    adjacency: np.ndarray,
    power_weights: tuple[float, ...] | list[float],
    n_max: int,
    direct_weight: float = 0.0,
) -> np.ndarray:
    """Weighted sum of adjacency-matrix powers A^2 .. A^n_max.

    The powers are accumulated by repeated integer matrix multiplication
    (exact walk counts) and weighted afterwards.  ``direct_weight`` adds a
    weighted A term when non-zero.  Raises on non-square input or on a
    weight-count mismatch.
    """
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    weights = tuple(float(w) for w in power_weights)
    if len(weights) != n_max - 1:
        raise ValueError(
            f"power_weights must have n_max - 1 = {n_max - 1} entries, got {len(weights)}"
        )
    a_int = a.astype(np.int64)
    result = np.zeros(a_int.shape, dtype=np.float64)
    if direct_weight:
        result += float(direct_weight) * a_int
    power = a_int
    for n in range(2, n_max + 1):
        power = power @ a_int
        result += weights[n - 2] * power
    return result


def _trim_by_keep_matrix(graph: WorkerGraph, keep_pair: np.ndarray) -> tuple[WorkerGraph, TrimReport]:
    """Common step-1/step-2 machinery: keep nodes appearing in some ordered
    pair flagged in *keep_pair*; requester force-kept; induced subgraph."""
    keep_node = keep_pair.any(axis=1)
    keep_node[graph.requester_index] = True
    kept_ids = [graph.ids[i] for i in np.flatnonzero(keep_node)]
    reduced = graph.induced_subgraph(kept_ids)
    report = TrimReport.from_counts(
        nodes_before=graph.node_count,
        nodes_after=reduced.node_count,
        edges_before=graph.edge_count,
        edges_after=reduced.edge_count,
    )
    return reduced, report


def trim_graph(
    graph: WorkerGraph,
    config: TrimConfig,
    weights: ResourceWeights = DEFAULT_RESOURCE_WEIGHTS,
) -> tuple[WorkerGraph, TrimReport]:
    """Trim *graph* with the matrix-power rule; returns (reduced graph, report).

    May reduce the graph to the requester alone.  The node-pair scan includes
    the diagonal: a relay node whose only strong entries are its own closed
    walks is kept, since those walks certify routes passing through it.
    """
    a = adjacency_matrix(graph, config.theta, weights)
    h = matrix_power_sum(a, config.power_weights, config.n_max, config.direct_weight)
    return _trim_by_keep_matrix(graph, h >= config.eta)


def trim_graph_length1(
    graph: WorkerGraph,
    theta: float,
    weights: ResourceWeights = DEFAULT_RESOURCE_WEIGHTS,
) -> tuple[WorkerGraph, TrimReport]:
    """Single-hop variant of :func:`trim_graph`: keep node pairs directly
    joined by a link whose joint weight clears *theta* (the thresholded
    adjacency itself), then take the induced subgraph."""
    a = adjacency_matrix(graph, float(theta), weights)
    return _trim_by_keep_matrix(graph, a == 1)
