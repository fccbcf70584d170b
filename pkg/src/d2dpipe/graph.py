"""Worker-graph data model and the elementary link/path metrics.

Every other module consumes the immutable types defined here.  The model is a
weighted undirected graph: nodes are workers carrying a reliability index and
a 4-component resource vector (computing, memory, buffer, bandwidth — all
normalized to [0, 1]); links carry a connection-quality index in (0, 1].

Derived quantities:

* scalar node resource   — dot product of the resource vector with a weighting
  vector (:class:`ResourceWeights`),
* link reliability       — geometric mean of the endpoint reliabilities,
* link resource          — geometric mean of the endpoint scalar resources,
* joint link weight      — product quality * link reliability * link resource,
* adjacency matrix       — 1 where a link exists and its joint weight clears a
  threshold,
* path quality / path reliability — products of the per-link values along an
  ordered node sequence,
* path score             — weighted sum of path quality, path reliability and
  a strategy preference score (:class:`ScoreWeights`).

All types are frozen dataclasses; operations are pure functions, so values are
safe to share between threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "NodeRecord",
    "LinkRecord",
    "WorkerGraph",
    "ResourceWeights",
    "ScoreWeights",
    "DEFAULT_RESOURCE_WEIGHTS",
    "DEFAULT_SCORE_WEIGHTS",
    "RESOURCE_NAMES",
    "link_reliability",
    "scalar_resource",
    "link_resource",
    "joint_link_weight",
    "path_quality",
    "path_reliability",
    "path_score",
    "joint_weight_matrix",
    "adjacency_matrix",
    "graph_to_dict",
    "graph_from_dict",
    "save_graph",
    "load_graph",
]

#: Resource-vector component names, in storage order.
RESOURCE_NAMES = ("computing", "memory", "buffer", "bandwidth")


def _as_unit(value: Any, what: str) -> float:
    """Coerce *value* to float and require it to lie in [0, 1]."""
    x = float(value)
    if math.isnan(x) or not 0.0 <= x <= 1.0:
        raise ValueError(f"{what} must be in [0, 1], got {value!r}")
    return x


@dataclass(frozen=True)
class NodeRecord:
    """One worker: an integer label, a reliability index and four resources.

    ``resources`` is ordered (computing, memory, buffer, bandwidth); every
    component and the reliability must lie in [0, 1].
    """

    id: int
    reliability: float
    resources: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(
            self, "reliability", _as_unit(self.reliability, f"node {self.id}: reliability")
        )
        res = tuple(self.resources)
        if len(res) != 4:
            raise ValueError(
                f"node {self.id}: resources must have 4 components "
                f"(computing, memory, buffer, bandwidth), got {len(res)}"
            )
        res = tuple(
            _as_unit(v, f"node {self.id}: resources[{name}]")
            for v, name in zip(res, RESOURCE_NAMES)
        )
        object.__setattr__(self, "resources", res)


@dataclass(frozen=True)
class LinkRecord:
    """An undirected link between two distinct nodes with quality in (0, 1].

    Endpoints are canonicalized so ``LinkRecord(2, 1, q) == LinkRecord(1, 2, q)``.
    """

    s: int
    t: int
    quality: float

    def __post_init__(self) -> None:
        s, t = int(self.s), int(self.t)
        if s == t:
            raise ValueError(f"link ({s}, {t}): endpoints must be distinct")
        if s > t:
            s, t = t, s
        q = float(self.quality)
        if math.isnan(q) or not 0.0 < q <= 1.0:
            raise ValueError(f"link ({s}, {t}): quality must be in (0, 1], got {self.quality!r}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "quality", q)

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.s, self.t)


@dataclass(frozen=True)
class ResourceWeights:
    """Weighting vector turning a 4-component resource vector into a scalar.

    By default the components must be non-negative and sum to 1; construct
    with ``allow_unnormalized=True`` to relax the unit-sum requirement
    (non-negativity is always enforced).
    """

    components: tuple[float, float, float, float]
    allow_unnormalized: bool = False

    def __post_init__(self) -> None:
        comp = tuple(float(v) for v in self.components)
        if len(comp) != 4:
            raise ValueError(f"resource weights must have 4 components, got {len(comp)}")
        for v, name in zip(comp, RESOURCE_NAMES):
            if math.isnan(v) or v < 0.0:
                raise ValueError(f"resource weight [{name}] must be >= 0, got {v!r}")
        if not self.allow_unnormalized and not math.isclose(sum(comp), 1.0, abs_tol=1e-9):
            raise ValueError(
                f"resource weights must sum to 1 (got {sum(comp)!r}); "
                "pass allow_unnormalized=True to override"
            )
        object.__setattr__(self, "components", comp)

    @cached_property
    def as_array(self) -> np.ndarray:
        a = np.asarray(self.components, dtype=np.float64)
        a.setflags(write=False)
        return a


@dataclass(frozen=True)
class ScoreWeights:
    """Strictly positive weights combining path quality, path reliability and
    the strategy preference score into one scalar path score."""

    quality_weight: float
    reliability_weight: float
    preference_weight: float

    def __post_init__(self) -> None:
        for name in ("quality_weight", "reliability_weight", "preference_weight"):
            v = float(getattr(self, name))
            if math.isnan(v) or v <= 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
            object.__setattr__(self, name, v)


#: Package defaults used by the experiment harness and the CLI.
DEFAULT_RESOURCE_WEIGHTS = ResourceWeights((0.4, 0.25, 0.25, 0.1))
DEFAULT_SCORE_WEIGHTS = ScoreWeights(0.05, 0.5, 0.3)


@dataclass(frozen=True)
class WorkerGraph:
    """Immutable weighted undirected graph of workers.

    Nodes and links are stored canonically sorted (nodes by id, links by
    endpoint pair), so two graphs with the same content compare equal
    regardless of construction order.  Node ids may be arbitrary integers;
    matrix-valued views index nodes densely by the rank of their id
    (``index_of``).

    Invariants enforced at construction: unique node ids, link endpoints
    present, at most one link per unordered pair, requester present with
    reliability exactly 1.
    """

    nodes: tuple[NodeRecord, ...]
    links: tuple[LinkRecord, ...]
    requester_id: int

    def __post_init__(self) -> None:
        nodes = tuple(sorted(self.nodes, key=lambda n: n.id))
        if not nodes:
            raise ValueError("graph must contain at least one node")
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate node id(s): {dup}")
        id_set = set(ids)
        links = tuple(sorted(self.links, key=lambda e: (e.s, e.t)))
        seen: set[tuple[int, int]] = set()
        for link in links:
            if link.s not in id_set or link.t not in id_set:
                raise ValueError(f"link ({link.s}, {link.t}): endpoint not in node set")
            if link.endpoints in seen:
                raise ValueError(f"link ({link.s}, {link.t}): duplicate unordered pair")
            seen.add(link.endpoints)
        requester_id = int(self.requester_id)
        if requester_id not in id_set:
            raise ValueError(f"requester {requester_id} not in node set")
        requester = nodes[ids.index(requester_id)]
        if requester.reliability != 1.0:
            raise ValueError(
                f"requester {requester_id}: reliability must be exactly 1, "
                f"got {requester.reliability!r}"
            )
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "requester_id", requester_id)

    # -- dense-index views ------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.links)

    @cached_property
    def ids(self) -> tuple[int, ...]:
        """Node ids in ascending order; position = dense index."""
        return tuple(n.id for n in self.nodes)

    @cached_property
    def index_of(self) -> dict[int, int]:
        """Map node id -> dense index 0..M-1."""
        return {nid: k for k, nid in enumerate(self.ids)}

    @cached_property
    def requester_index(self) -> int:
        return self.index_of[self.requester_id]

    @cached_property
    def reliability_vector(self) -> np.ndarray:
        v = np.array([n.reliability for n in self.nodes], dtype=np.float64)
        v.setflags(write=False)
        return v

    @cached_property
    def resource_matrix(self) -> np.ndarray:
        """(M, 4) array of node resources, rows in dense-index order."""
        m = np.array([n.resources for n in self.nodes], dtype=np.float64)
        m = np.ascontiguousarray(m.reshape(self.node_count, 4))
        m.setflags(write=False)
        return m

    @cached_property
    def quality_matrix(self) -> np.ndarray:
        """(M, M) symmetric link-quality matrix; 0 where no link exists."""
        q = np.zeros((self.node_count, self.node_count), dtype=np.float64)
        for link in self.links:
            i, j = self.index_of[link.s], self.index_of[link.t]
            q[i, j] = q[j, i] = link.quality
        q.setflags(write=False)
        return q

    @cached_property
    def has_link_matrix(self) -> np.ndarray:
        """(M, M) boolean adjacency of raw links (no weight thresholding)."""
        b = self.quality_matrix > 0.0
        b.setflags(write=False)
        return b

    @cached_property
    def link_reliability_matrix(self) -> np.ndarray:
        """(M, M) matrix of pairwise link reliabilities sqrt(r_i * r_j),
        defined for every node pair (not only linked ones)."""
        rel = self.reliability_vector
        m = np.sqrt(np.outer(rel, rel))
        m.setflags(write=False)
        return m

    # -- lookups ----------------------------------------------------------

    def node(self, node_id: int) -> NodeRecord:
        try:
            return self.nodes[self.index_of[node_id]]
        except KeyError:
            raise KeyError(f"no node with id {node_id}") from None

    def quality_of(self, s: int, t: int) -> float:
        """Quality of the link between *s* and *t*; raises if absent."""
        i, j = self.index_of.get(s), self.index_of.get(t)
        if i is None or j is None:
            raise KeyError(f"no node with id {s if i is None else t}")
        q = self.quality_matrix[i, j]
        if q == 0.0:
            raise KeyError(f"no link between nodes {s} and {t}")
        return float(q)

    def has_link(self, s: int, t: int) -> bool:
        i, j = self.index_of.get(s), self.index_of.get(t)
        if i is None or j is None:
            return False
        return bool(self.has_link_matrix[i, j])

    def neighbors(self, node_id: int) -> tuple[int, ...]:
        """Ids of nodes linked to *node_id*, ascending."""
        i = self.index_of[node_id]
        return tuple(self.ids[j] for j in np.flatnonzero(self.has_link_matrix[i]))

    def induced_subgraph(self, keep_ids: Iterable[int]) -> "WorkerGraph":
        """Subgraph on *keep_ids* (must include the requester): keeps every
        link whose two endpoints are both kept."""
        keep = set(int(i) for i in keep_ids)
        unknown = keep - set(self.ids)
        if unknown:
            raise ValueError(f"unknown node id(s): {sorted(unknown)}")
        if self.requester_id not in keep:
            raise ValueError("induced subgraph must keep the requester")
        return WorkerGraph(
            nodes=tuple(n for n in self.nodes if n.id in keep),
            links=tuple(e for e in self.links if e.s in keep and e.t in keep),
            requester_id=self.requester_id,
        )


# ---------------------------------------------------------------------------
# Elementary metrics
# ---------------------------------------------------------------------------


def link_reliability(r_s: float, r_t: float) -> float:
    """Geometric mean of two endpoint reliabilities."""
    a = _as_unit(r_s, "reliability")
    b = _as_unit(r_t, "reliability")
    return math.sqrt(a * b)


def scalar_resource(resources: Sequence[float], weights: ResourceWeights) -> float:
    """Weighted scalar resource: dot product of the 4-vector with the weights."""
    res = tuple(float(v) for v in resources)
    if len(res) != 4:
        raise ValueError(f"resources must have 4 components, got {len(res)}")
    return float(np.dot(np.asarray(res, dtype=np.float64), weights.as_array))


def link_resource(u_s: float, u_t: float) -> float:
    """Geometric mean of two endpoint scalar resources."""
    a = _as_unit(u_s, "scalar resource")
    b = _as_unit(u_t, "scalar resource")
    return math.sqrt(a * b)


def joint_link_weight(quality: float, reliability: float, resource: float) -> float:
    """Joint link weight: quality * link reliability * link resource."""
    return float(quality) * float(reliability) * float(resource)


def _link_values_along(path: Sequence[int], graph: WorkerGraph) -> list[tuple[int, int]]:
    """Dense-index endpoint pairs for consecutive nodes; raises on a missing link."""
    if len(path) == 0:
        raise ValueError("path must contain at least one node")
    idx: list[int] = []
    for nid in path:
        i = graph.index_of.get(int(nid))
        if i is None:
            raise KeyError(f"no node with id {nid}")
        idx.append(i)
    pairs = []
    for a, b in zip(idx, idx[1:]):
        if not graph.has_link_matrix[a, b]:
            raise KeyError(
                f"path step ({graph.ids[a]}, {graph.ids[b]}) is not a link in the graph"
            )
        pairs.append((a, b))
    return pairs


def path_quality(path: Sequence[int], graph: WorkerGraph) -> float:
    """Product of link qualities along *path* (left to right); 1.0 for a
    single-node path (empty product)."""
    q = 1.0
    for a, b in _link_values_along(path, graph):
        q = q * float(graph.quality_matrix[a, b])
    return q


def path_reliability(path: Sequence[int], graph: WorkerGraph) -> float:
    """Product of link reliabilities (geometric means of endpoint node
    reliabilities) along *path*, left to right."""
    rel = graph.reliability_vector
    r = 1.0
    for a, b in _link_values_along(path, graph):
        r = r * math.sqrt(float(rel[a]) * float(rel[b]))
    return r


def path_score(
    quality: float, reliability: float, preference: float, weights: ScoreWeights
) -> float:
    """Composite path score: weighted sum of path quality, path reliability
    and the strategy preference score."""
    return (
        weights.quality_weight * float(quality)
        + weights.reliability_weight * float(reliability)
        + weights.preference_weight * float(preference)
    )


def joint_weight_matrix(graph: WorkerGraph, weights: ResourceWeights) -> np.ndarray:
    """(M, M) symmetric matrix of joint link weights; 0 where no link exists."""
    u = graph.resource_matrix @ weights.as_array
    # geometric means via outer products; absent links stay exactly 0
    link_res = np.sqrt(np.outer(u, u))
    w = graph.quality_matrix * graph.link_reliability_matrix * link_res
    np.fill_diagonal(w, 0.0)
    return w


def adjacency_matrix(
    graph: WorkerGraph, theta: float, weights: ResourceWeights = DEFAULT_RESOURCE_WEIGHTS
) -> np.ndarray:
    """0/1 int64 adjacency: 1 where a link exists and its joint weight is
    >= *theta* (exact comparison, no epsilon); zero diagonal; symmetric."""
    th = float(theta)
    w = joint_weight_matrix(graph, weights)
    a = ((w >= th) & graph.has_link_matrix).astype(np.int64)
    np.fill_diagonal(a, 0)
    return a


# ---------------------------------------------------------------------------
# Structured-text (JSON) ingestion / emission
# ---------------------------------------------------------------------------


def graph_to_dict(graph: WorkerGraph) -> dict[str, Any]:
    """Plain-dict form: ``{requester, nodes: [...], links: [...]}``."""
    return {
        "requester": graph.requester_id,
        "nodes": [
            {"id": n.id, "reliability": n.reliability, "resources": list(n.resources)}
            for n in graph.nodes
        ],
        "links": [{"s": e.s, "t": e.t, "quality": e.quality} for e in graph.links],
    }


def graph_from_dict(data: Mapping[str, Any]) -> WorkerGraph:
    """Inverse of :func:`graph_to_dict`; raises ValueError naming the missing
    or offending field."""
    for key in ("requester", "nodes"):
        if key not in data:
            raise ValueError(f"graph object missing required field {key!r}")
    try:
        nodes = tuple(
            NodeRecord(
                id=nd["id"],
                reliability=nd["reliability"],
                resources=tuple(nd["resources"]),
            )
            for nd in data["nodes"]
        )
    except KeyError as exc:
        raise ValueError(f"node object missing required field {exc.args[0]!r}") from None
    try:
        links = tuple(
            LinkRecord(s=ld["s"], t=ld["t"], quality=ld["quality"])
            for ld in data.get("links", [])
        )
    except KeyError as exc:
        raise ValueError(f"link object missing required field {exc.args[0]!r}") from None
    return WorkerGraph(nodes=nodes, links=links, requester_id=data["requester"])


def save_graph(graph: WorkerGraph, path: str) -> None:
    """Write the JSON form of *graph* to *path* (trailing newline included)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, indent=2)
        fh.write("\n")


def load_graph(path: str) -> WorkerGraph:
    """Read a graph written by :func:`save_graph`."""
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))
