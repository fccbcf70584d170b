"""Shared builders for the test suite.

Everything here is deliberately dumb and independent of the library's own
vectorized plumbing, so the oracles stay honest: graphs are built from plain
records, reference searches use recursive DFS, and the blockage chain oracle
simulates every elementary time step.
"""

from __future__ import annotations

import numpy as np
import pytest

from d2dpipe.graph import LinkRecord, NodeRecord, WorkerGraph
from d2dpipe.pathfinder import Strategy, StrategyTable
from d2dpipe.stability import BlockageModel, StabilityQuery


def make_graph(nodes, links, requester=0) -> WorkerGraph:
    """Build a graph from ``{id: (reliability, resources)}`` and
    ``[(s, t, quality), ...]``."""
    recs = tuple(
        NodeRecord(id=i, reliability=rel, resources=res) for i, (rel, res) in nodes.items()
    )
    lrecs = tuple(LinkRecord(s=s, t=t, quality=q) for s, t, q in links)
    return WorkerGraph(nodes=recs, links=lrecs, requester_id=requester)


def uniform_nodes(ids, requester=0, reliability=1.0, resources=(1.0, 1.0, 1.0, 1.0)):
    """Node dict where every node has identical attributes (requester rel 1)."""
    return {
        i: (1.0 if i == requester else reliability, resources) for i in ids
    }


def line_graph(n=3, quality=0.9, requester=0) -> WorkerGraph:
    """0 - 1 - .. - (n-1) path graph, all qualities equal."""
    nodes = uniform_nodes(range(n), requester)
    links = [(i, i + 1, quality) for i in range(n - 1)]
    return make_graph(nodes, links, requester)


def complete_graph(n=4, quality=0.9, requester=0) -> WorkerGraph:
    nodes = uniform_nodes(range(n), requester)
    links = [(s, t, quality) for s in range(n) for t in range(s + 1, n)]
    return make_graph(nodes, links, requester)


def random_graph(rng: np.random.Generator, max_nodes=10, link_prob=0.5) -> WorkerGraph:
    """Arbitrary worker graph: requester 0 (reliability 1), M in [2, max_nodes],
    uniform qualities/reliabilities/resources, pair-independent links."""
    m = int(rng.integers(2, max_nodes + 1))
    nodes = {}
    for i in range(m):
        rel = 1.0 if i == 0 else float(rng.uniform(0.2, 1.0))
        res = tuple(float(x) for x in rng.uniform(0.0, 1.0, size=4))
        nodes[i] = (rel, res)
    links = []
    for s in range(m):
        for t in range(s + 1, m):
            if rng.random() < link_prob:
                links.append((s, t, float(rng.uniform(0.05, 1.0))))
    return make_graph(nodes, links, requester=0)


def random_strategy(rng: np.random.Generator, max_length=4) -> Strategy:
    """Random strategy with normalized-unit requirements in [0, 0.8]."""
    length = int(rng.integers(1, max_length + 1))
    reqs = rng.uniform(0.0, 0.8, size=(4, length + 1))
    return Strategy(
        score=float(rng.uniform(0.0, 1.0)),
        length=length,
        req_computing=tuple(float(x) for x in reqs[0]),
        req_memory=tuple(float(x) for x in reqs[1]),
        req_buffer=tuple(float(x) for x in reqs[2]),
        req_bandwidth=tuple(float(x) for x in reqs[3]),
    )


def random_table(rng: np.random.Generator, max_strategies=4, max_length=4) -> StrategyTable:
    k = int(rng.integers(1, max_strategies + 1))
    return StrategyTable(tuple(random_strategy(rng, max_length) for _ in range(k)))


def branching_example_graph() -> WorkerGraph:
    """Hand-built 7-node example: requester 7 fans out into a 2 -> 4 -> 6
    search tree (six leaves, six depth-3 simple paths)."""
    nodes = uniform_nodes(range(1, 8), requester=7)
    edges = [(1, 5), (1, 6), (1, 7), (2, 4), (2, 5), (3, 4), (3, 6), (4, 7), (5, 6)]
    return make_graph(nodes, [(s, t, 0.9) for s, t in edges], requester=7)


def chain_survival_oracle(
    query: StabilityQuery, model: BlockageModel, trials: int, rng: np.random.Generator
) -> float:
    """Step-by-step two-state chain: each link of each pipeline draws one
    Bernoulli(eps) blockage event per elementary interval; the session
    survives when some pipeline keeps every link unblocked for all m steps.
    O(trials * K * links * m) — only usable for small m."""
    m = query.steps(model)
    if m == 0:
        return 1.0
    shape = (trials, query.pipeline_count, query.link_count, m)
    blocked_steps = rng.random(shape) < model.blockage_probability
    link_ok = ~blocked_steps.any(axis=3)
    return float(link_ok.all(axis=2).any(axis=1).mean())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
