"""Blockage-survival analysis for formed pipelines.

Every link of a running pipeline is modeled as a 2-state discrete-time Markov
chain sampled every ``step_interval`` seconds: an unblocked link becomes
blocked with probability ``blockage_probability`` per step, and the session
fails the moment any link of the active pipeline blocks.  With m sampled steps
over the session and independent, statistically identical links:

* single pipeline  — survival probability (1 - eps)^(m * (n_node - 1)),
* K pipelines      — 1 - (1 - single)^K (the job succeeds if at least one
  pipeline survives end to end),
* expected number of pipeline-formation attempts until success — the
  reciprocal of the K-pipeline survival probability.

The closed forms are evaluated as exp(k * log1p(-eps)) to stay accurate for
very large exponents.  A seeded Monte Carlo oracle draws, per link, the
geometric number of consecutive unblocked steps by inverse transform
(floor(ln U / ln(1 - eps))) and counts surviving sessions; it shares one
uniform stream between the numba and numpy backends, so a fixed seed yields
the same estimate on both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "BlockageModel",
    "StabilityQuery",
    "DEFAULT_BLOCKAGE_MODEL",
    "success_probability_single",
    "success_probability_multi",
    "expected_attempts",
    "simulate_sessions",
]

#: Cap on uniforms drawn per Monte Carlo batch (keeps memory flat while the
#: chunked stream stays identical to one monolithic draw).
_MAX_CHUNK_VALUES = 8_000_000


@dataclass(frozen=True)
class BlockageModel:
    """Per-step blockage probability and the sampling interval in seconds."""

    blockage_probability: float
    step_interval: float

    def __post_init__(self) -> None:
        p = float(self.blockage_probability)
        if math.isnan(p) or not 0.0 < p < 1.0:
            raise ValueError(
                f"blockage_probability must be in (0, 1), got {self.blockage_probability!r}"
            )
        dt = float(self.step_interval)
        if math.isnan(dt) or dt <= 0.0:
            raise ValueError(f"step_interval must be > 0, got {self.step_interval!r}")
        object.__setattr__(self, "blockage_probability", p)
        object.__setattr__(self, "step_interval", dt)


#: Package default blockage parameters (millimetre-wave channel measurements).
DEFAULT_BLOCKAGE_MODEL = BlockageModel(blockage_probability=6.93e-4, step_interval=0.0033)


@dataclass(frozen=True)
class StabilityQuery:
    """A session to analyse: duration in seconds, number of nodes on the
    pipeline (requester included), and number of concurrent pipelines."""

    session_time: float
    n_node: int
    pipeline_count: int = 1

    def __post_init__(self) -> None:
        t = float(self.session_time)
        if math.isnan(t) or t <= 0.0:
            raise ValueError(f"session_time must be > 0, got {self.session_time!r}")
        n = int(self.n_node)
        if n < 2:
            raise ValueError(f"n_node must be >= 2, got {self.n_node!r}")
        k = int(self.pipeline_count)
        if k < 1:
            raise ValueError(f"pipeline_count must be >= 1, got {self.pipeline_count!r}")
        object.__setattr__(self, "session_time", t)
        object.__setattr__(self, "n_node", n)
        object.__setattr__(self, "pipeline_count", k)

    @property
    def link_count(self) -> int:
        """Links on one pipeline: n_node - 1."""
        return self.n_node - 1

    def steps(self, model: BlockageModel) -> int:
        """Sampled steps m = round(session_time / step_interval), rounding
        half away from zero (Python's round() would round half to even)."""
        return int(math.floor(self.session_time / model.step_interval + 0.5))


def success_probability_single(query: StabilityQuery, model: BlockageModel) -> float:
    """Survival probability of one pipeline: (1 - eps)^(m * (n_node - 1)).

    ``pipeline_count`` is ignored.  Returns exactly 1.0 when m = 0.
    """
    exponent = query.steps(model) * query.link_count
    if exponent == 0:
        return 1.0
    return math.exp(exponent * math.log1p(-model.blockage_probability))


def success_probability_multi(query: StabilityQuery, model: BlockageModel) -> float:
    """Survival probability with K independent concurrent pipelines:
    1 - (1 - single)^K."""
    single = success_probability_single(query, model)
    return 1.0 - (1.0 - single) ** query.pipeline_count


def expected_attempts(query: StabilityQuery, model: BlockageModel) -> float:
    """Expected number of pipeline-formation attempts until the job
    completes: 1 / success_probability_multi.  Raises OverflowError when the
    survival probability underflows to zero."""
    p = success_probability_multi(query, model)
    if p == 0.0:
        raise OverflowError(
            "survival probability underflowed to 0; expected attempts diverge "
            f"(session_time={query.session_time}, n_node={query.n_node}, "
            f"pipeline_count={query.pipeline_count})"
        )
    return 1.0 / p


def simulate_sessions(
    query: StabilityQuery,
    model: BlockageModel,
    trials: int,
    seed: int,
    engine: str = "auto",
) -> float:
    """Monte Carlo estimate of :func:`success_probability_multi`.

    Per trial, each link of each of the K pipelines draws its geometric
    first-blockage time; the trial succeeds when at least one pipeline keeps
    every link unblocked for all m steps.  Deterministic for a fixed seed, and
    identical across backends because both consume the same uniform stream.
    """
    trials = int(trials)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    m_steps = query.steps(model)
    if m_steps == 0:
        return 1.0
    log_keep = math.log1p(-model.blockage_probability)
    rng = np.random.default_rng(seed)
    k, links = query.pipeline_count, query.link_count
    chunk_trials = max(1, _MAX_CHUNK_VALUES // (k * links))
    successes = 0
    done = 0
    while done < trials:
        batch = min(chunk_trials, trials - done)
        uniforms = rng.random((batch, k, links))
        successes += _kernels.count_blocked_session_survivals(
            uniforms, m_steps, log_keep, engine=engine
        )
        done += batch
    return successes / trials
