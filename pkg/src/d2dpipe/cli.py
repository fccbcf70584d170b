"""``d2dpipe`` command-line interface.

Subcommands: ``trim``, ``find-path``, ``stability``, ``pool-sim``,
``session-sim``.  Inputs are JSON files; outputs are CSV with a header row,
written to ``--output`` (default stdout).  Every file output is accompanied by
a JSON *run manifest* (subcommand, resolved parameters, seed, tool version,
SHA-256 digests of the input files) so the bytes can be reproduced exactly;
``--manifest-out`` overrides its path (default: ``<output>.manifest.json``).

Exit codes: 0 on success, 1 on validation errors (unknown or missing flags,
out-of-range values, invariant violations in loaded data — the message names
the offending field), 2 on I/O errors (unreadable or malformed files).

Environment: ``D2DPIPE_SEED`` provides the default ``--seed``;
``D2DPIPE_BACKEND`` selects the compute backend (``auto``/``numba``/``numpy``).
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
from typing import Any, Sequence

from . import __version__
from .graph import (
    ResourceWeights,
    ScoreWeights,
    load_graph,
    path_quality,
    path_reliability,
    path_score,
    save_graph,
)
from .pathfinder import (
    MinRequirements,
    backward_trace,
    check_path_resources,
    filter_qualified,
    find_best_pipeline,
    forward_search,
    load_strategy_table,
    normalize_strategy_table,
)
from .pool_sim import BetaParams, PoolConfig, sweep_eta
from .session_sim import SessionSpec, StageSpec, run_session
from .stability import (
    BlockageModel,
    StabilityQuery,
    expected_attempts,
    simulate_sessions,
    success_probability_multi,
)
from .trimming import DEFAULT_POWER_WEIGHTS, TrimConfig, trim_graph

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the CLI contract
    reserves 2 for I/O problems, so usage/validation errors exit 1."""

    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _fmt(value: Any) -> str:
    """CSV cell formatting: floats use shortest round-trip form."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(output: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if output == "-":
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    args: argparse.Namespace,
    subcommand: str,
    parameters: dict[str, Any],
    inputs: Sequence[str],
    outputs: Sequence[str],
) -> None:
    """Emit the run manifest next to the primary output (or at
    --manifest-out).  Skipped silently when everything went to stdout and no
    explicit manifest path was requested."""
    explicit = getattr(args, "manifest_out", None)
    primary = next((o for o in outputs if o != "-"), None)
    path = explicit or (f"{primary}.manifest.json" if primary else None)
    if path is None:
        return
    manifest = {
        "tool": "d2dpipe",
        "version": __version__,
        "subcommand": subcommand,
        "seed": getattr(args, "seed", None),
        "parameters": parameters,
        "inputs": {p: _digest(p) for p in inputs},
        "outputs": [o for o in outputs if o != "-"],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag} must be a comma-separated list of numbers, got {text!r}")


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag} must be a comma-separated list of integers, got {text!r}")


def _default_seed() -> int:
    raw = os.environ.get("D2DPIPE_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"environment variable D2DPIPE_SEED must be an integer, got {raw!r}")


def _power_weights_for(n_max: int, weights: Sequence[float]) -> tuple[float, ...]:
    """Fit a weight list to n_max - 1 entries: truncate extras, pad zeros."""
    need = max(n_max - 1, 0)
    fitted = list(weights[:need])
    fitted += [0.0] * (need - len(fitted))
    return tuple(fitted)


# ---------------------------------------------------------------------------
# trim
# ---------------------------------------------------------------------------


def _cmd_trim(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    weights = ResourceWeights(tuple(_float_list(args.resource_weights, "--resource-weights")))
    config = TrimConfig(
        theta=args.theta,
        eta=args.eta,
        power_weights=_power_weights_for(args.n_max, _float_list(args.power_weights, "--power-weights")),
        n_max=args.n_max,
        direct_weight=args.direct_weight,
    )
    reduced, report = trim_graph(graph, config, weights)
    save_graph(reduced, args.output)
    _write_csv(
        "-",
        ["nodes_before", "nodes_after", "edges_before", "edges_after", "edge_reduction_rate"],
        [[report.nodes_before, report.nodes_after, report.edges_before,
          report.edges_after, report.edge_reduction_rate]],
    )
    _write_manifest(
        args,
        "trim",
        {
            "theta": config.theta,
            "eta": config.eta,
            "power_weights": list(config.power_weights),
            "n_max": config.n_max,
            "direct_weight": config.direct_weight,
            "resource_weights": list(weights.components),
        },
        inputs=[args.graph],
        outputs=[args.output],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# find-path
# ---------------------------------------------------------------------------


def _feasible_paths_all(graph, table, score_weights):
    """Every feasible (strategy, path) row via the layered engine."""
    rows = []
    for i, strategy in enumerate(table):
        root_idx = graph.index_of[graph.requester_id]
        if not bool(
            (graph.resource_matrix[root_idx] >= strategy.requirement_matrix[0]).all()
        ):
            continue
        b_sets = forward_search(graph, graph.requester_id, strategy.length)
        for path in backward_trace(b_sets, graph, graph.requester_id):
            if not check_path_resources(path, strategy, graph):
                continue
            q = path_quality(path, graph)
            r = path_reliability(path, graph)
            s = path_score(q, r, strategy.score, score_weights)
            rows.append([i + 1, "-".join(str(n) for n in path), q, r, s])
    return rows


def _cmd_find_path(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    table = normalize_strategy_table(load_strategy_table(args.strategies), args.headroom)
    score_weights = ScoreWeights(*_float_list(args.score_weights, "--score-weights"))
    resource_weights = ResourceWeights(
        tuple(_float_list(args.resource_weights, "--resource-weights"))
    )
    mins = MinRequirements(
        quality_min=args.q_min,
        reliability_min=args.r_min,
        resource_min=tuple(_float_list(args.resource_min, "--resource-min")),
    )
    searched = filter_qualified(graph, mins)
    if args.eta is not None:
        config = TrimConfig(
            theta=args.theta,
            eta=args.eta,
            power_weights=_power_weights_for(
                table.max_length, _float_list(args.power_weights, "--power-weights")
            ),
            n_max=table.max_length,
            direct_weight=args.direct_weight,
        )
        searched, _report = trim_graph(searched, config, resource_weights)
    header = ["strategy", "path", "quality", "reliability", "score"]
    if args.all:
        rows = _feasible_paths_all(searched, table, score_weights)
    else:
        best = find_best_pipeline(searched, table, score_weights)
        rows = []
        if best is not None:
            index, cand = best
            rows.append(
                [index + 1, "-".join(str(n) for n in cand.nodes),
                 cand.quality, cand.reliability, cand.score]
            )
    _write_csv(args.output, header, rows)
    _write_manifest(
        args,
        "find-path",
        {
            "q_min": mins.quality_min,
            "r_min": mins.reliability_min,
            "resource_min": list(mins.resource_min),
            "theta": args.theta,
            "eta": args.eta,
            "headroom": args.headroom,
            "all": bool(args.all),
            "score_weights": _float_list(args.score_weights, "--score-weights"),
            "resource_weights": list(resource_weights.components),
        },
        inputs=[args.graph, args.strategies],
        outputs=[args.output],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def _cmd_stability(args: argparse.Namespace) -> int:
    model = BlockageModel(blockage_probability=args.epsilon, step_interval=args.delta_t)
    t_grid = _float_list(args.t_grid, "--t-grid")
    n_nodes = _int_list(args.n_node_list, "--n-node-list")
    k_list = _int_list(args.k_list, "--k-list")
    if not t_grid or not n_nodes or not k_list:
        raise ValueError("--t-grid, --n-node-list and --k-list must be non-empty")
    rows = []
    for t in t_grid:
        for n in n_nodes:
            for k in k_list:
                query = StabilityQuery(session_time=t, n_node=n, pipeline_count=k)
                formula = success_probability_multi(query, model)
                if args.mc_trials > 0:
                    mc: Any = simulate_sessions(query, model, args.mc_trials, args.seed)
                else:
                    mc = ""
                try:
                    attempts: float = expected_attempts(query, model)
                except OverflowError:
                    attempts = float("inf")
                rows.append([t, n, k, formula, mc, attempts])
    header = [
        "session_time",
        "n_node",
        "pipelines",
        "survival_formula",
        "survival_mc",
        "expected_attempts",
    ]
    _write_csv(args.output, header, rows)
    _write_manifest(
        args,
        "stability",
        {
            "epsilon": model.blockage_probability,
            "delta_t": model.step_interval,
            "t_grid": t_grid,
            "n_node_list": n_nodes,
            "k_list": k_list,
            "mc_trials": args.mc_trials,
        },
        inputs=[],
        outputs=[args.output],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# pool-sim
# ---------------------------------------------------------------------------


def _require(config: dict[str, Any], key: str, what: str) -> Any:
    if key not in config:
        raise ValueError(f"{what} missing required field {key!r}")
    return config[key]


def _beta_from(value: Any, what: str) -> BetaParams:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValueError(f"{what} must be a two-element list [a, b], got {value!r}")
    return BetaParams(a=value[0], b=value[1])


def _cmd_pool_sim(args: argparse.Namespace) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    table_path = _require(config, "strategy_table", "pool-sim config")
    if not os.path.isabs(table_path):
        table_path = os.path.join(base_dir, table_path)
    table = normalize_strategy_table(
        load_strategy_table(table_path), float(config.get("headroom", 1.0))
    )
    score_weights = ScoreWeights(*config.get("score_weights", [0.05, 0.5, 0.3]))
    resource_weights = ResourceWeights(
        tuple(config.get("resource_weights", [0.4, 0.25, 0.25, 0.1]))
    )
    mins = MinRequirements(
        quality_min=float(config.get("quality_min", 0.0)),
        reliability_min=float(config.get("reliability_min", 0.0)),
        resource_min=tuple(config.get("resource_min", [0.0, 0.0, 0.0, 0.0])),
    )
    eta_grid = [float(e) for e in _require(config, "eta_grid", "pool-sim config")]
    n_max = int(config.get("n_max", table.max_length))
    trim_cfg = TrimConfig(
        theta=float(config.get("theta", 0.0)),
        eta=0.0,
        power_weights=_power_weights_for(
            n_max, config.get("power_weights", list(DEFAULT_POWER_WEIGHTS))
        ),
        n_max=n_max,
        direct_weight=float(config.get("direct_weight", 0.0)),
    )
    trials = int(config.get("trials", 1000))
    seed = args.seed if args.seed_given else int(config.get("seed", 0))
    cases = _require(config, "cases", "pool-sim config")
    if not isinstance(cases, list) or not cases:
        raise ValueError("pool-sim config field 'cases' must be a non-empty list")
    rows = []
    for case in cases:
        name = _require(case, "name", "pool-sim case")
        default_beta = case.get("beta")
        pool_cfg = PoolConfig(
            pool_size=_require(case, "pool_size", f"pool-sim case {name!r}"),
            quality_dist=_beta_from(
                case.get("quality_beta", default_beta), f"case {name!r} beta"
            ),
            reliability_dist=_beta_from(
                case.get("reliability_beta", default_beta), f"case {name!r} beta"
            ),
            resource_dist=_beta_from(
                case.get("resource_beta", default_beta), f"case {name!r} beta"
            ),
            link_probability=float(
                case.get("link_probability", config.get("link_probability", 1.0))
            ),
            trials=trials,
            seed=int(case.get("seed", seed)),
        )
        for eta, result in sweep_eta(
            pool_cfg, table, mins, trim_cfg, eta_grid, score_weights, resource_weights
        ):
            top = result.top_strategy
            rows.append(
                [
                    name,
                    eta,
                    result.mean_edge_reduction,
                    result.mean_path_score,
                    result.p_path_exists,
                    "" if top is None else top + 1,
                ]
            )
    header = ["case", "eta", "edge_reduction_rate", "mean_path_score", "p_path_exists", "top_strategy"]
    _write_csv(args.output, header, rows)
    _write_manifest(
        args,
        "pool-sim",
        {"config": config, "resolved_seed": seed, "trials": trials},
        inputs=[args.config, table_path],
        outputs=[args.output],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# session-sim
# ---------------------------------------------------------------------------


def _cmd_session_sim(args: argparse.Namespace) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    stages_raw = _require(raw, "stages", "session spec")
    if not isinstance(stages_raw, list) or not stages_raw:
        raise ValueError("session spec field 'stages' must be a non-empty list")
    stages = tuple(
        StageSpec(
            process_time=_require(s, "process_time", f"session spec stage {i}"),
            buffer_capacity=_require(s, "buffer_capacity", f"session spec stage {i}"),
            link_transfer_time=_require(s, "link_transfer_time", f"session spec stage {i}"),
        )
        for i, s in enumerate(stages_raw)
    )
    spec = SessionSpec(
        stages=stages,
        n_packages=_require(raw, "n_packages", "session spec"),
        initial_feed_interval=_require(raw, "initial_feed_interval", "session spec"),
        timeout=_require(raw, "timeout", "session spec"),
        rate_backoff_factor=_require(raw, "rate_backoff_factor", "session spec"),
        serialize_transfer=bool(raw.get("serialize_transfer", False)),
        control_latency=float(raw.get("control_latency", 0.0)),
    )
    trace = run_session(spec, record_events=args.event_log is not None)
    if args.event_log is not None:
        with open(args.event_log, "w", encoding="utf-8") as fh:
            for line in trace.event_log:
                fh.write(line + "\n")
    mean_latency = (
        sum(trace.latencies) / len(trace.latencies) if trace.latencies else float("nan")
    )
    header = [
        "completion_time",
        "packages_fed",
        "packages_completed",
        "packages_dropped",
        "overflow_events",
        "timeout_aborted",
        "final_feed_interval",
        "first_output_time",
        "last_output_time",
        "steady_state_throughput",
        "mean_latency",
    ]
    rows = [
        [
            trace.completion_time,
            trace.packages_fed,
            trace.packages_completed,
            trace.packages_dropped,
            trace.overflow_events,
            trace.timeout_aborted,
            trace.final_feed_interval,
            trace.first_output_time,
            trace.last_output_time,
            trace.steady_state_throughput,
            mean_latency,
        ]
    ]
    _write_csv(args.output, header, rows)
    outputs = [args.output] + ([args.event_log] if args.event_log else [])
    _write_manifest(args, "session-sim", {"spec": raw}, inputs=[args.spec], outputs=outputs)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly and dispatch
# ---------------------------------------------------------------------------


def _add_common_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", default="-", help="output CSV path ('-' = stdout)")
    p.add_argument(
        "--manifest-out",
        default=None,
        help="run-manifest path (default: <output>.manifest.json for file outputs)",
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="d2dpipe", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"d2dpipe {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_trim = sub.add_parser("trim", help="trim a worker graph with the matrix-power rule")
    p_trim.add_argument("--graph", required=True, help="input graph JSON")
    p_trim.add_argument("--output", "-o", required=True, help="reduced graph JSON path")
    p_trim.add_argument("--manifest-out", default=None)
    p_trim.add_argument("--theta", type=float, required=True, help="joint-link-weight threshold")
    p_trim.add_argument("--eta", type=float, required=True, help="trim threshold")
    p_trim.add_argument("--n-max", type=int, default=4, help="highest matrix power (default 4)")
    p_trim.add_argument(
        "--power-weights",
        default="0.3,0.7,0",
        help="comma-separated weights on A^2..A^n_max (default 0.3,0.7,0)",
    )
    p_trim.add_argument("--direct-weight", type=float, default=0.0, help="optional weight on A itself")
    p_trim.add_argument(
        "--resource-weights",
        default="0.4,0.25,0.25,0.1",
        help="comma-separated resource weighting vector",
    )
    p_trim.set_defaults(func=_cmd_trim)

    p_find = sub.add_parser("find-path", help="find the best pipeline path for a strategy table")
    p_find.add_argument("--graph", required=True, help="input graph JSON")
    p_find.add_argument("--strategies", required=True, help="strategy table JSON (raw units allowed)")
    p_find.add_argument("--q-min", type=float, default=0.0, help="minimum link quality")
    p_find.add_argument("--r-min", type=float, default=0.0, help="minimum node reliability")
    p_find.add_argument(
        "--resource-min", default="0,0,0,0", help="minimum resources c,m,b,w (default zeros)"
    )
    p_find.add_argument("--theta", type=float, default=0.0, help="joint-link-weight threshold for trimming")
    p_find.add_argument("--eta", type=float, default=None, help="trim threshold (enables trimming)")
    p_find.add_argument("--headroom", type=float, default=1.0, help="normalization headroom (default 1)")
    p_find.add_argument(
        "--power-weights", default="0.3,0.7,0", help="trim weights on A^2.. (used with --eta)"
    )
    p_find.add_argument("--direct-weight", type=float, default=0.0)
    p_find.add_argument("--score-weights", default="0.05,0.5,0.3", help="quality,reliability,preference weights")
    p_find.add_argument(
        "--resource-weights", default="0.4,0.25,0.25,0.1", help="resource weighting vector"
    )
    p_find.add_argument("--all", action="store_true", help="emit every feasible path, not just the best")
    _add_common_output(p_find)
    p_find.set_defaults(func=_cmd_find_path)

    p_stab = sub.add_parser("stability", help="blockage-survival closed forms and Monte Carlo")
    p_stab.add_argument("--epsilon", type=float, default=6.93e-4, help="per-step blockage probability")
    p_stab.add_argument("--delta-t", type=float, default=0.0033, help="sampling interval, seconds")
    p_stab.add_argument("--t-grid", required=True, help="comma-separated session times, seconds")
    p_stab.add_argument("--n-node-list", required=True, help="comma-separated pipeline node counts")
    p_stab.add_argument("--k-list", required=True, help="comma-separated concurrent-pipeline counts")
    p_stab.add_argument("--mc-trials", type=int, default=0, help="Monte Carlo trials (0 = closed form only)")
    p_stab.add_argument("--seed", type=int, default=None)
    _add_common_output(p_stab)
    p_stab.set_defaults(func=_cmd_stability)

    p_pool = sub.add_parser("pool-sim", help="beta-distributed pool Monte Carlo experiment")
    p_pool.add_argument("--config", required=True, help="experiment config JSON")
    p_pool.add_argument("--seed", type=int, default=None, help="override the config seed")
    _add_common_output(p_pool)
    p_pool.set_defaults(func=_cmd_pool_sim)

    p_sess = sub.add_parser("session-sim", help="discrete-event pipeline session simulation")
    p_sess.add_argument("--spec", required=True, help="session spec JSON")
    p_sess.add_argument("--event-log", default=None, help="optional per-event log path")
    _add_common_output(p_sess)
    p_sess.set_defaults(func=_cmd_session_sim)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch, and map exceptions to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse printed its message already
        code = exc.code
        return int(code) if code is not None else EXIT_OK
    args.seed_given = getattr(args, "seed", None) is not None
    if getattr(args, "seed", None) is None:
        try:
            args.seed = _default_seed()
        except ValueError as exc:
            print(f"d2dpipe: error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"d2dpipe: I/O error: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"d2dpipe: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        message = exc.args[0] if exc.args else exc
        print(f"d2dpipe: error: {message}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
