"""Accelerated inner loops with numba and pure-numpy twins.

Two kernels live here:

* a depth-first best-path search over a dense adjacency matrix with
  per-position feasibility masks (the hot loop of the experiment harness), and
* a survival counter for the blockage Monte Carlo (number of trials in which
  at least one of K pipelines keeps all its links unblocked for m steps).

Contract shared by each twin pair: identical inputs produce identical outputs,
including floating-point bit patterns, because the arithmetic is performed in
the same order (products accumulate parent-to-child along the path; scores are
``w_q * Q + w_r * R``).  Ties on the path score are broken toward the
lexicographically smallest index sequence; both twins enumerate candidate
paths in exactly that order and replace the incumbent only on a strictly
greater score.
"""

from __future__ import annotations

import math

import numpy as np

from .backend import HAVE_NUMBA, resolve_engine

__all__ = [
    "best_path_indices",
    "count_blocked_session_survivals",
]


# ---------------------------------------------------------------------------
# Best-path DFS kernel
# ---------------------------------------------------------------------------


def _dfs_best_path(adj, qual, lrel, feas, root, n_edges, w_quality, w_reliability, out_path):
    """Iterative DFS over simple paths of n_edges edges from *root*.

    Children are tried in ascending index order, so complete paths are visited
    in lexicographic order; the incumbent is replaced only on a strictly
    greater combined score, which makes the returned path the lexicographically
    smallest among the maxima.  Returns (found, quality, reliability, combo).
    """
    m = adj.shape[0]
    cur = np.empty(n_edges + 1, np.int64)
    next_child = np.zeros(n_edges + 1, np.int64)
    qprod = np.empty(n_edges + 1, np.float64)
    rprod = np.empty(n_edges + 1, np.float64)
    onpath = np.zeros(m, np.bool_)

    cur[0] = root
    onpath[root] = True
    qprod[0] = 1.0
    rprod[0] = 1.0
    next_child[0] = 0

    found = False
    best_q = 0.0
    best_r = 0.0
    best_combo = -np.inf

    depth = 0
    while depth >= 0:
        if depth == n_edges:
            combo = w_quality * qprod[depth] + w_reliability * rprod[depth]
            if combo > best_combo:
                best_combo = combo
                best_q = qprod[depth]
                best_r = rprod[depth]
                for i in range(n_edges + 1):
                    out_path[i] = cur[i]
                found = True
            onpath[cur[depth]] = False
            depth -= 1
            continue
        u = cur[depth]
        v = next_child[depth]
        advanced = False
        while v < m:
            if adj[u, v] and not onpath[v] and feas[depth + 1, v]:
                next_child[depth] = v + 1
                depth += 1
                cur[depth] = v
                onpath[v] = True
                qprod[depth] = qprod[depth - 1] * qual[u, v]
                rprod[depth] = rprod[depth - 1] * lrel[u, v]
                next_child[depth] = 0
                advanced = True
                break
            v += 1
        if not advanced:
            onpath[u] = False
            depth -= 1
    return found, best_q, best_r, best_combo


if HAVE_NUMBA:  # pragma: no branch
    from numba import njit

    _dfs_best_path_jit = njit(cache=True)(_dfs_best_path)


def _expand_best_path_numpy(adj, qual, lrel, feas, root, n_edges, w_quality, w_reliability, out_path):
    """Vectorized twin of :func:`_dfs_best_path`.

    Grows all feasible simple paths level by level.  ``np.nonzero`` on the
    candidate mask emits children row-major (parents in frontier order,
    children ascending), so the frontier stays in lexicographic order and
    ``np.argmax`` (first maximum) realizes the same tie-break as the DFS.
    Per-path products multiply parent-to-child in the same order as the DFS.
    """
    m = adj.shape[0]
    paths = np.full((1, 1), root, dtype=np.int64)
    qprod = np.ones(1, dtype=np.float64)
    rprod = np.ones(1, dtype=np.float64)

    for depth in range(n_edges):
        last = paths[:, -1]
        cand = adj[last] & feas[depth + 1][np.newaxis, :]
        # mask out nodes already on each path
        rows = np.arange(paths.shape[0])[:, np.newaxis]
        cand[rows, paths] = False
        parent_idx, children = np.nonzero(cand)
        if parent_idx.size == 0:
            return False, 0.0, 0.0, -np.inf
        paths = np.concatenate(
            [paths[parent_idx], children[:, np.newaxis]], axis=1
        )
        qprod = qprod[parent_idx] * qual[last[parent_idx], children]
        rprod = rprod[parent_idx] * lrel[last[parent_idx], children]

    combo = w_quality * qprod + w_reliability * rprod
    best = int(np.argmax(combo))
    out_path[:] = paths[best]
    return True, float(qprod[best]), float(rprod[best]), float(combo[best])


def best_path_indices(
    adj: np.ndarray,
    qual: np.ndarray,
    lrel: np.ndarray,
    feas: np.ndarray,
    root: int,
    n_edges: int,
    w_quality: float,
    w_reliability: float,
    engine: str = "auto",
) -> tuple[bool, np.ndarray, float, float, float]:
    """Best simple path of ``n_edges`` edges from *root* by combined score.

    Parameters are dense-index arrays: ``adj`` boolean adjacency, ``qual``
    link qualities, ``lrel`` link reliabilities, ``feas`` a boolean
    (n_edges + 1, M) per-position feasibility mask.  Returns
    ``(found, path_indices, quality, reliability, combo)`` where ``combo`` is
    ``w_quality * quality + w_reliability * reliability``.
    """
    which = resolve_engine(engine)
    out_path = np.empty(n_edges + 1, dtype=np.int64)
    adj = np.ascontiguousarray(adj, dtype=np.bool_)
    qual = np.ascontiguousarray(qual, dtype=np.float64)
    lrel = np.ascontiguousarray(lrel, dtype=np.float64)
    feas = np.ascontiguousarray(feas, dtype=np.bool_)
    if which == "numba":
        found, q, r, combo = _dfs_best_path_jit(
            adj, qual, lrel, feas, root, n_edges, w_quality, w_reliability, out_path
        )
    else:
        found, q, r, combo = _expand_best_path_numpy(
            adj, qual, lrel, feas, root, n_edges, w_quality, w_reliability, out_path
        )
    return bool(found), out_path, float(q), float(r), float(combo)


# ---------------------------------------------------------------------------
# Blockage-survival counting kernel
# ---------------------------------------------------------------------------


def _count_survivals_loop(uniforms, m_steps, log_keep):
    """Count trials where some pipeline keeps all links unblocked m steps.

    ``uniforms`` has shape (trials, K, links); a link survives when its
    geometric first-blockage variate floor(ln U / ln(1 - eps)) reaches
    ``m_steps``, i.e. when ln U / log_keep >= m_steps (log_keep < 0).
    A drawn 0.0 maps to an infinite survival time.
    """
    trials = uniforms.shape[0]
    pipes = uniforms.shape[1]
    links = uniforms.shape[2]
    count = 0
    for t in range(trials):
        any_ok = False
        for k in range(pipes):
            ok = True
            for l in range(links):
                u = uniforms[t, k, l]
                if u <= 0.0:
                    continue  # ln(0) = -inf -> survives forever
                if math.log(u) / log_keep < m_steps:
                    ok = False
                    break
            if ok:
                any_ok = True
                break
        if any_ok:
            count += 1
    return count


if HAVE_NUMBA:  # pragma: no branch
    _count_survivals_jit = njit(cache=True)(_count_survivals_loop)


def _count_survivals_numpy(uniforms, m_steps, log_keep):
    with np.errstate(divide="ignore"):
        steps = np.log(uniforms) / log_keep
    ok = (steps >= m_steps).all(axis=2).any(axis=1)
    return int(ok.sum())


def count_blocked_session_survivals(
    uniforms: np.ndarray, m_steps: int, log_keep: float, engine: str = "auto"
) -> int:
    """Dispatch the survival counter to the selected backend."""
    which = resolve_engine(engine)
    u = np.ascontiguousarray(uniforms, dtype=np.float64)
    if which == "numba":
        return int(_count_survivals_jit(u, m_steps, log_keep))
    return _count_survivals_numpy(u, m_steps, log_keep)
