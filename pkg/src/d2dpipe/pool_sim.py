"""Monte Carlo experiment harness over beta-distributed worker pools.

Each trial draws a random worker pool (link qualities, node reliabilities and
resource components all beta-distributed), qualifies it against minimum
requirements, optionally trims it, and runs the pipeline path search.  Across
trials the harness reports:

* the mean winning-path score over trials where a path exists,
* the probability that at least one qualified path exists,
* the mean edge reduction rate contributed by trimming, and
* a histogram of which strategy won.

Per-trial random streams derive from ``default_rng([seed, trial_index])``, so
any subset of trials reproduces bit-identically and threshold sweeps are
paired sample-by-sample with the unswept run.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .graph import (
    DEFAULT_RESOURCE_WEIGHTS,
    DEFAULT_SCORE_WEIGHTS,
    LinkRecord,
    NodeRecord,
    ResourceWeights,
    ScoreWeights,
    WorkerGraph,
)
from .pathfinder import (
    MinRequirements,
    StrategyTable,
    filter_qualified,
    find_best_pipeline,
)
from .trimming import TrimConfig, trim_graph

__all__ = [
    "BetaParams",
    "PoolConfig",
    "TrialOutcomes",
    "ExperimentResult",
    "sample_beta",
    "generate_pool",
    "trial_outcomes",
    "run_experiment",
    "sweep_eta",
]


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a beta distribution on [0, 1]."""

    a: float
    b: float

    def __post_init__(self) -> None:
        for name in ("a", "b"):
            v = float(getattr(self, name))
            if math.isnan(v) or v <= 0.0:
                raise ValueError(f"beta parameter {name} must be > 0, got {v!r}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class PoolConfig:
    """How to draw one random pool and how many trials to run.

    Node 0 is the requester (reliability pinned to 1); the other reliability
    draws, all resource components, and all link qualities come from the three
    beta distributions.  Each unordered node pair receives a link with
    probability ``link_probability``.
    """

    pool_size: int
    quality_dist: BetaParams
    reliability_dist: BetaParams
    resource_dist: BetaParams
    link_probability: float = 1.0
    trials: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        m = int(self.pool_size)
        if m < 2:
            raise ValueError(f"pool_size must be >= 2, got {self.pool_size!r}")
        p = float(self.link_probability)
        if math.isnan(p) or not 0.0 < p <= 1.0:
            raise ValueError(
                f"link_probability must be in (0, 1], got {self.link_probability!r}"
            )
        t = int(self.trials)
        if t < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials!r}")
        object.__setattr__(self, "pool_size", m)
        object.__setattr__(self, "link_probability", p)
        object.__setattr__(self, "trials", t)
        object.__setattr__(self, "seed", int(self.seed))


def sample_beta(params: BetaParams, rng: np.random.Generator) -> float:
    """One beta draw in [0, 1]."""
    return float(rng.beta(params.a, params.b))


def generate_pool(config: PoolConfig, rng: np.random.Generator) -> WorkerGraph:
    """Draw one random worker pool.

    Draw order is frozen (reliabilities for nodes 1..M-1, then the (M, 4)
    resource matrix, then per unordered pair in lexicographic order one
    presence uniform followed, when present, by a quality draw resampled
    while it equals 0), so a given generator state always yields the same
    graph.
    """
    m = config.pool_size
    reliabilities = rng.beta(
        config.reliability_dist.a, config.reliability_dist.b, size=m - 1
    )
    resources = rng.beta(config.resource_dist.a, config.resource_dist.b, size=(m, 4))
    nodes = [NodeRecord(id=0, reliability=1.0, resources=tuple(resources[0]))]
    for i in range(1, m):
        nodes.append(
            NodeRecord(
                id=i, reliability=float(reliabilities[i - 1]), resources=tuple(resources[i])
            )
        )
    links: list[LinkRecord] = []
    for s in range(m):
        for t in range(s + 1, m):
            if rng.random() < config.link_probability:
                q = sample_beta(config.quality_dist, rng)
                while q == 0.0:  # quality must be in (0, 1]
                    q = sample_beta(config.quality_dist, rng)
                links.append(LinkRecord(s=s, t=t, quality=q))
    return WorkerGraph(nodes=tuple(nodes), links=tuple(links), requester_id=0)


@dataclass(frozen=True)
class TrialOutcomes:
    """Per-trial raw outcomes of one experiment configuration.

    ``scores`` holds NaN and ``winners`` holds -1 for trials without a
    feasible path; ``edge_reduction`` is 0 when trimming is disabled.
    """

    scores: np.ndarray
    winners: np.ndarray
    edge_reduction: np.ndarray

    def __post_init__(self) -> None:
        for name in ("scores", "winners", "edge_reduction"):
            arr = getattr(self, name)
            arr.setflags(write=False)


@dataclass(frozen=True)
class ExperimentResult:
    """Aggregated metrics of one experiment configuration.

    ``mean_path_score`` averages over trials with a path (NaN when none
    exists); ``winning_strategy_histogram`` counts wins per strategy index and
    sums to the number of successful trials.
    """

    mean_path_score: float
    p_path_exists: float
    mean_edge_reduction: float
    winning_strategy_histogram: tuple[int, ...]
    trials: int

    @staticmethod
    def from_outcomes(outcomes: TrialOutcomes, strategy_count: int) -> "ExperimentResult":
        winners = outcomes.winners
        success = winners >= 0
        mean_score = (
            float(outcomes.scores[success].mean()) if success.any() else float("nan")
        )
        hist = np.bincount(winners[success], minlength=strategy_count)
        return ExperimentResult(
            mean_path_score=mean_score,
            p_path_exists=float(success.mean()),
            mean_edge_reduction=float(outcomes.edge_reduction.mean()),
            winning_strategy_histogram=tuple(int(c) for c in hist),
            trials=int(winners.size),
        )

    @property
    def top_strategy(self) -> int | None:
        """Strategy index with the most wins (lowest index on ties); None
        when no trial produced a path."""
        hist = self.winning_strategy_histogram
        if sum(hist) == 0:
            return None
        return int(np.argmax(hist))


def _run_single_trial(
    pool: WorkerGraph,
    table: StrategyTable,
    mins: MinRequirements,
    trim_cfg: TrimConfig | None,
    score_weights: ScoreWeights,
    resource_weights: ResourceWeights,
    engine: str,
) -> tuple[float, int, float]:
    """(score|NaN, winner|-1, edge_reduction) for one already-drawn pool."""
    qualified = filter_qualified(pool, mins)
    edge_reduction = 0.0
    searched = qualified
    if trim_cfg is not None:
        searched, report = trim_graph(qualified, trim_cfg, resource_weights)
        edge_reduction = report.edge_reduction_rate
    best = find_best_pipeline(searched, table, score_weights, engine=engine)
    if best is None:
        return float("nan"), -1, edge_reduction
    return best[1].score, best[0], edge_reduction


def trial_outcomes(
    pool_cfg: PoolConfig,
    table: StrategyTable,
    mins: MinRequirements,
    trim_cfg: TrimConfig | None,
    score_weights: ScoreWeights = DEFAULT_SCORE_WEIGHTS,
    resource_weights: ResourceWeights = DEFAULT_RESOURCE_WEIGHTS,
    engine: str = "auto",
) -> TrialOutcomes:
    """Per-trial outcomes; pass ``trim_cfg=None`` to skip trimming."""
    n = pool_cfg.trials
    scores = np.empty(n, dtype=np.float64)
    winners = np.empty(n, dtype=np.int64)
    reductions = np.empty(n, dtype=np.float64)
    for t in range(n):
        rng = np.random.default_rng([pool_cfg.seed, t])
        pool = generate_pool(pool_cfg, rng)
        scores[t], winners[t], reductions[t] = _run_single_trial(
            pool, table, mins, trim_cfg, score_weights, resource_weights, engine
        )
    return TrialOutcomes(scores=scores, winners=winners, edge_reduction=reductions)


def run_experiment(
    pool_cfg: PoolConfig,
    table: StrategyTable,
    mins: MinRequirements,
    trim_cfg: TrimConfig,
    score_weights: ScoreWeights = DEFAULT_SCORE_WEIGHTS,
    resource_weights: ResourceWeights = DEFAULT_RESOURCE_WEIGHTS,
    use_trimming: bool = True,
    engine: str = "auto",
) -> ExperimentResult:
    """Full experiment: generate -> qualify -> (trim) -> search, aggregated."""
    outcomes = trial_outcomes(
        pool_cfg,
        table,
        mins,
        trim_cfg if use_trimming else None,
        score_weights,
        resource_weights,
        engine,
    )
    return ExperimentResult.from_outcomes(outcomes, len(table))


def sweep_eta(
    pool_cfg: PoolConfig,
    table: StrategyTable,
    mins: MinRequirements,
    trim_cfg: TrimConfig,
    eta_grid: list[float] | tuple[float, ...],
    score_weights: ScoreWeights = DEFAULT_SCORE_WEIGHTS,
    resource_weights: ResourceWeights = DEFAULT_RESOURCE_WEIGHTS,
    engine: str = "auto",
) -> list[tuple[float, ExperimentResult]]:
    """Paired trim-threshold sweep.

    ``eta_grid`` must be ascending.  Every grid point sees the same per-trial
    pools (one generation per trial, re-trimmed per threshold), so each entry
    is bit-identical to :func:`run_experiment` with that threshold.
    """
    grid = [float(e) for e in eta_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"eta_grid must be ascending, got {eta_grid!r}")
    n = pool_cfg.trials
    per_eta = [
        (
            np.empty(n, dtype=np.float64),
            np.empty(n, dtype=np.int64),
            np.empty(n, dtype=np.float64),
        )
        for _ in grid
    ]
    configs = [dataclasses.replace(trim_cfg, eta=e) for e in grid]
    for t in range(n):
        rng = np.random.default_rng([pool_cfg.seed, t])
        pool = generate_pool(pool_cfg, rng)
        qualified = filter_qualified(pool, mins)
        for gi, cfg in enumerate(configs):
            searched, report = trim_graph(qualified, cfg, resource_weights)
            best = find_best_pipeline(searched, table, score_weights, engine=engine)
            scores, winners, reductions = per_eta[gi]
            reductions[t] = report.edge_reduction_rate
            if best is None:
                scores[t], winners[t] = float("nan"), -1
            else:
                scores[t], winners[t] = best[1].score, best[0]
    results = []
    for eta, (scores, winners, reductions) in zip(grid, per_eta):
        outcomes = TrialOutcomes(scores=scores, winners=winners, edge_reduction=reductions)
        results.append((eta, ExperimentResult.from_outcomes(outcomes, len(table))))
    return results
