"""Discrete-event simulation of a running pipeline session.

The requester feeds packages to the first worker at a controllable interval;
each worker buffers incoming packages, processes them FIFO, and forwards the
result to the next stage (the last stage forwards to the requester, which
collects outputs).  Two feedback mechanisms mirror device behaviour:

* buffer overflow — a package arriving at a full input buffer is still
  accepted, but the worker signals the requester (after an optional control
  latency), which multiplies its feed interval by a backoff factor;
* idle timeout — a worker left continuously without work for ``timeout``
  seconds aborts the session (an outcome recorded on the trace, not an
  error).

By default a worker may receive and send while processing (dedicated per-hop
links); ``serialize_transfer=True`` makes processing and sending share one
radio, so the effective stage time becomes process + transfer.  The event
loop is a single-threaded priority queue ordered by (time, insertion
sequence), so identical specs produce identical traces.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional

__all__ = [
    "StageSpec",
    "SessionSpec",
    "SessionTrace",
    "RequesterState",
    "WorkerState",
    "run_session",
    "compare_partitions",
]


class RequesterState(Enum):
    """Requester lifecycle during a session."""

    FEEDING = "feeding"
    ADJUSTING_RATE = "adjusting-rate"
    COLLECTING = "collecting"
    DONE = "done"
    ABORTED = "aborted"


class WorkerState(Enum):
    """Worker lifecycle during a session."""

    IDLE = "idle"
    RECEIVING = "receiving"
    PROCESSING = "processing"
    SENDING = "sending"
    OVERFLOW_SIGNALED = "overflow-signaled"
    TIMED_OUT = "timed-out"


@dataclass(frozen=True)
class StageSpec:
    """One worker stage: seconds of processing per package, input buffer
    capacity in packages, and seconds to transfer one package to the next
    stage (the last stage transfers to the requester)."""

    process_time: float
    buffer_capacity: int
    link_transfer_time: float

    def __post_init__(self) -> None:
        p = float(self.process_time)
        if math.isnan(p) or p <= 0.0:
            raise ValueError(f"process_time must be > 0, got {self.process_time!r}")
        c = int(self.buffer_capacity)
        if c < 1:
            raise ValueError(f"buffer_capacity must be >= 1, got {self.buffer_capacity!r}")
        tt = float(self.link_transfer_time)
        if math.isnan(tt) or tt < 0.0:
            raise ValueError(
                f"link_transfer_time must be >= 0, got {self.link_transfer_time!r}"
            )
        object.__setattr__(self, "process_time", p)
        object.__setattr__(self, "buffer_capacity", c)
        object.__setattr__(self, "link_transfer_time", tt)


@dataclass(frozen=True)
class SessionSpec:
    """A full session: the ordered stages plus requester-side parameters."""

    stages: tuple[StageSpec, ...]
    n_packages: int
    initial_feed_interval: float
    timeout: float
    rate_backoff_factor: float
    serialize_transfer: bool = False
    control_latency: float = 0.0

    def __post_init__(self) -> None:
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("stages must be non-empty")
        n = int(self.n_packages)
        if n < 1:
            raise ValueError(f"n_packages must be >= 1, got {self.n_packages!r}")
        fi = float(self.initial_feed_interval)
        if math.isnan(fi) or fi <= 0.0:
            raise ValueError(
                f"initial_feed_interval must be > 0, got {self.initial_feed_interval!r}"
            )
        to = float(self.timeout)
        if math.isnan(to) or to <= 0.0:
            raise ValueError(f"timeout must be > 0, got {self.timeout!r}")
        bf = float(self.rate_backoff_factor)
        if math.isnan(bf) or bf <= 1.0:
            raise ValueError(
                f"rate_backoff_factor must be > 1, got {self.rate_backoff_factor!r}"
            )
        cl = float(self.control_latency)
        if math.isnan(cl) or cl < 0.0:
            raise ValueError(f"control_latency must be >= 0, got {self.control_latency!r}")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "n_packages", n)
        object.__setattr__(self, "initial_feed_interval", fi)
        object.__setattr__(self, "timeout", to)
        object.__setattr__(self, "rate_backoff_factor", bf)
        object.__setattr__(self, "serialize_transfer", bool(self.serialize_transfer))
        object.__setattr__(self, "control_latency", cl)


@dataclass(frozen=True)
class SessionTrace:
    """Everything measured during one session run.

    ``overflow_events`` counts overflow signals emitted by workers;
    ``packages_dropped`` counts packages in flight at an abort (zero on normal
    completion, so fed = completed + dropped always holds at the end);
    ``steady_state_throughput`` is (completed - 1) / (last output - first
    output), NaN when fewer than two packages completed.
    """

    completion_time: float
    latencies: tuple[float, ...]
    overflow_events: int
    timeout_aborted: bool
    final_feed_interval: float
    packages_fed: int
    packages_completed: int
    packages_dropped: int
    first_output_time: float
    last_output_time: float
    steady_state_throughput: float
    event_log: tuple[str, ...] = ()


class _Worker:
    __slots__ = ("spec", "queue", "processing", "sending", "idle_since")

    def __init__(self, spec: StageSpec) -> None:
        self.spec = spec
        self.queue: deque[int] = deque()
        self.processing: Optional[int] = None
        self.sending: Optional[int] = None
        self.idle_since: Optional[float] = 0.0

    @property
    def state(self) -> WorkerState:
        if self.processing is not None:
            return WorkerState.PROCESSING
        if self.sending is not None:
            return WorkerState.SENDING
        return WorkerState.IDLE


def run_session(spec: SessionSpec, record_events: bool = False) -> SessionTrace:
    """Run one session to completion (or abort) and return its trace."""
    workers = [_Worker(s) for s in spec.stages]
    n_stages = len(workers)

    heap: list[tuple[float, int, str, tuple]] = []
    seq = 0

    def schedule(time: float, kind: str, payload: tuple) -> None:
        nonlocal seq
        heapq.heappush(heap, (time, seq, kind, payload))
        seq += 1

    feed_interval = spec.initial_feed_interval
    feed_times: dict[int, float] = {}
    fed = 0
    completed = 0
    overflow_events = 0
    latencies: list[float] = []
    output_times: list[float] = []
    log: list[str] = []
    done = False
    aborted = False
    end_time = 0.0

    def note(time: float, message: str) -> None:
        if record_events:
            log.append(f"{time:.9f} {message}")

    def start_processing(i: int, now: float) -> None:
        w = workers[i]
        pkg = w.queue.popleft()
        w.processing = pkg
        w.idle_since = None
        note(now, f"worker {i} {WorkerState.PROCESSING.value} package {pkg}")
        schedule(now + w.spec.process_time, "finish", (i, pkg))

    def set_idle(i: int, now: float) -> None:
        w = workers[i]
        w.idle_since = now
        note(now, f"worker {i} {WorkerState.IDLE.value}")
        schedule(now + spec.timeout, "timeout_check", (i, now))

    def forward(i: int, pkg: int, arrival: float) -> None:
        if i == n_stages - 1:
            schedule(arrival, "deliver", (pkg,))
        else:
            schedule(arrival, "arrive", (i + 1, pkg))

    def after_work(i: int, now: float) -> None:
        w = workers[i]
        if w.queue:
            start_processing(i, now)
        else:
            set_idle(i, now)

    # initial state: all workers idle from t=0, first feed at t=0
    for i in range(n_stages):
        schedule(spec.timeout, "timeout_check", (i, 0.0))
    schedule(0.0, "feed", (0,))

    while heap and not done and not aborted:
        now, _, kind, payload = heapq.heappop(heap)

        if kind == "feed":
            (pkg,) = payload
            feed_times[pkg] = now
            fed += 1
            note(now, f"requester {RequesterState.FEEDING.value} package {pkg}")
            if pkg + 1 < spec.n_packages:
                schedule(now + feed_interval, "feed", (pkg + 1,))
            schedule(now, "arrive", (0, pkg))

        elif kind == "arrive":
            i, pkg = payload
            w = workers[i]
            note(now, f"worker {i} {WorkerState.RECEIVING.value} package {pkg}")
            if len(w.queue) >= w.spec.buffer_capacity:
                overflow_events += 1
                note(now, f"worker {i} {WorkerState.OVERFLOW_SIGNALED.value}")
                schedule(now + spec.control_latency, "signal", (i,))
            w.queue.append(pkg)
            w.idle_since = None
            if w.processing is None and (not spec.serialize_transfer or w.sending is None):
                start_processing(i, now)

        elif kind == "finish":
            i, pkg = payload
            w = workers[i]
            w.processing = None
            if spec.serialize_transfer:
                w.sending = pkg
                note(now, f"worker {i} {WorkerState.SENDING.value} package {pkg}")
                schedule(now + w.spec.link_transfer_time, "send_done", (i, pkg))
            else:
                forward(i, pkg, now + w.spec.link_transfer_time)
                after_work(i, now)

        elif kind == "send_done":
            i, pkg = payload
            w = workers[i]
            w.sending = None
            forward(i, pkg, now)
            after_work(i, now)

        elif kind == "deliver":
            (pkg,) = payload
            completed += 1
            latencies.append(now - feed_times[pkg])
            output_times.append(now)
            note(now, f"requester {RequesterState.COLLECTING.value} package {pkg}")
            if completed == spec.n_packages:
                done = True
                end_time = now

        elif kind == "signal":
            (i,) = payload
            feed_interval *= spec.rate_backoff_factor
            note(
                now,
                f"requester {RequesterState.ADJUSTING_RATE.value} "
                f"feed interval -> {feed_interval:.9f} (signal from worker {i})",
            )

        elif kind == "timeout_check":
            i, marker = payload
            w = workers[i]
            if w.idle_since is not None and w.idle_since == marker:
                aborted = True
                end_time = now
                note(now, f"worker {i} {WorkerState.TIMED_OUT.value}; session aborted")

    if not done and not aborted:
        # heap exhausted: possible only when every package was delivered
        end_time = output_times[-1] if output_times else 0.0

    note(end_time, f"requester {(RequesterState.ABORTED if aborted else RequesterState.DONE).value}")

    first_out = output_times[0] if output_times else float("nan")
    last_out = output_times[-1] if output_times else float("nan")
    if completed >= 2 and last_out > first_out:
        throughput = (completed - 1) / (last_out - first_out)
    else:
        throughput = float("nan")
    return SessionTrace(
        completion_time=end_time,
        latencies=tuple(latencies),
        overflow_events=overflow_events,
        timeout_aborted=aborted,
        final_feed_interval=feed_interval,
        packages_fed=fed,
        packages_completed=completed,
        packages_dropped=fed - completed if aborted else 0,
        first_output_time=first_out,
        last_output_time=last_out,
        steady_state_throughput=throughput,
        event_log=tuple(log),
    )


def compare_partitions(
    monolithic_time: float, specs: list[SessionSpec] | tuple[SessionSpec, ...]
) -> list[float]:
    """Relative steady-state throughput of each session spec, in percent of a
    monolithic device that needs ``monolithic_time`` seconds per package
    (monolithic = 100).  Entries are NaN for runs that aborted or completed
    fewer than two packages."""
    mono = float(monolithic_time)
    if math.isnan(mono) or mono <= 0.0:
        raise ValueError(f"monolithic_time must be > 0, got {monolithic_time!r}")
    baseline = 1.0 / mono
    out = []
    for s in specs:
        trace = run_session(s)
        out.append(100.0 * trace.steady_state_throughput / baseline)
    return out
