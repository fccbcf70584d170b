"""Command-line interface: exit codes, CSV round-trips, manifests, seeds."""

import csv
import json
import math
import subprocess
import sys

import pytest

from conftest import branching_example_graph, line_graph, make_graph, uniform_nodes
from d2dpipe.cli import main
from d2dpipe.graph import load_graph, save_graph
from d2dpipe.pathfinder import (
    REFERENCE_STRATEGY_TABLE,
    MinRequirements,
    StrategyTable,
    find_best_pipeline,
    normalize_strategy_table,
    save_strategy_table,
)
from d2dpipe.pool_sim import BetaParams, PoolConfig, sweep_eta
from d2dpipe.session_sim import SessionSpec, StageSpec, run_session
from d2dpipe.stability import (
    DEFAULT_BLOCKAGE_MODEL,
    StabilityQuery,
    simulate_sessions,
    success_probability_multi,
)
from d2dpipe.trimming import TrimConfig, trim_graph
from test_pathfinder import easy_strategy


def read_csv(text):
    rows = list(csv.reader(text.strip().splitlines()))
    return rows[0], rows[1:]


@pytest.fixture
def graph_file(tmp_path):
    g = branching_example_graph()
    p = tmp_path / "graph.json"
    save_graph(g, str(p))
    return str(p)


@pytest.fixture
def table_file(tmp_path):
    table = StrategyTable((easy_strategy(2, score=0.3), easy_strategy(3, score=0.6)))
    p = tmp_path / "table.json"
    save_strategy_table(table, str(p))
    return str(p)


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------


def test_version_flag_exits_zero(capsys):
    assert main(["--version"]) == 0
    assert "d2dpipe" in capsys.readouterr().out


def test_no_arguments_is_a_usage_error(capsys):
    assert main([]) == 1


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_missing_required_flag_is_a_usage_error(tmp_path, capsys):
    assert main(["trim", "--graph", "g.json", "--output", str(tmp_path / "o.json")]) == 1
    assert "--theta" in capsys.readouterr().err or True  # argparse wording varies


def test_unreadable_file_is_an_io_error(tmp_path, capsys):
    code = main(
        ["trim", "--graph", str(tmp_path / "absent.json"),
         "--output", str(tmp_path / "o.json"), "--theta", "0", "--eta", "0"]
    )
    assert code == 2
    assert "I/O error" in capsys.readouterr().err


def test_malformed_json_is_an_io_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    code = main(
        ["trim", "--graph", str(bad), "--output", str(tmp_path / "o.json"),
         "--theta", "0", "--eta", "0"]
    )
    assert code == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_invalid_graph_data_is_a_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad_graph.json"
    bad.write_text(
        json.dumps(
            {
                "requester": 0,
                "nodes": [
                    {"id": 0, "reliability": 1.0, "resources": [1, 1, 1, 1]},
                    {"id": 3, "reliability": 1.5, "resources": [1, 1, 1, 1]},
                ],
                "links": [],
            }
        ),
        encoding="utf-8",
    )
    code = main(
        ["trim", "--graph", str(bad), "--output", str(tmp_path / "o.json"),
         "--theta", "0", "--eta", "0"]
    )
    assert code == 1
    err = capsys.readouterr().err
    assert "node 3" in err


def test_bad_float_list_is_a_validation_error(graph_file, tmp_path, capsys):
    code = main(
        ["trim", "--graph", graph_file, "--output", str(tmp_path / "o.json"),
         "--theta", "0", "--eta", "0", "--power-weights", "0.3,oops"]
    )
    assert code == 1
    assert "--power-weights" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# trim
# ---------------------------------------------------------------------------


def test_trim_no_op_round_trip(graph_file, tmp_path, capsys):
    out = tmp_path / "reduced.json"
    code = main(
        ["trim", "--graph", graph_file, "--output", str(out), "--theta", "0", "--eta", "0"]
    )
    assert code == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header == [
        "nodes_before",
        "nodes_after",
        "edges_before",
        "edges_after",
        "edge_reduction_rate",
    ]
    assert rows == [["7", "7", "9", "9", "0.0"]]
    assert load_graph(str(out)) == branching_example_graph()


def test_trim_matches_library_call(graph_file, tmp_path, capsys):
    out = tmp_path / "reduced.json"
    code = main(
        ["trim", "--graph", graph_file, "--output", str(out),
         "--theta", "0.3", "--eta", "9", "--n-max", "3", "--power-weights", "0.3,0.7"]
    )
    assert code == 0
    expected, report = trim_graph(
        branching_example_graph(),
        TrimConfig(theta=0.3, eta=9.0, power_weights=(0.3, 0.7), n_max=3),
    )
    assert load_graph(str(out)) == expected
    _, rows = read_csv(capsys.readouterr().out)
    assert float(rows[0][4]) == report.edge_reduction_rate


def test_trim_to_requester_only(graph_file, tmp_path, capsys):
    out = tmp_path / "reduced.json"
    assert main(
        ["trim", "--graph", graph_file, "--output", str(out), "--theta", "0", "--eta", "1e9"]
    ) == 0
    g = load_graph(str(out))
    assert g.ids == (7,)


def test_trim_manifest(graph_file, tmp_path, capsys):
    out = tmp_path / "reduced.json"
    main(["trim", "--graph", graph_file, "--output", str(out), "--theta", "0", "--eta", "0"])
    manifest_path = tmp_path / "reduced.json.manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert manifest["tool"] == "d2dpipe"
    assert manifest["subcommand"] == "trim"
    assert manifest["parameters"]["eta"] == 0.0
    assert manifest["parameters"]["n_max"] == 4
    assert graph_file in manifest["inputs"]
    assert len(manifest["inputs"][graph_file]) == 64  # sha256 hex digest
    assert manifest["outputs"] == [str(out)]


def test_manifest_bytes_reproduce(graph_file, tmp_path, capsys):
    out = tmp_path / "r.json"
    args = ["trim", "--graph", graph_file, "--output", str(out), "--theta", "0.2", "--eta", "3"]
    main(args)
    first = (tmp_path / "r.json.manifest.json").read_bytes()
    output_first = out.read_bytes()
    main(args)
    assert (tmp_path / "r.json.manifest.json").read_bytes() == first
    assert out.read_bytes() == output_first


def test_explicit_manifest_path(graph_file, tmp_path, capsys):
    out = tmp_path / "r.json"
    mpath = tmp_path / "custom_manifest.json"
    main(
        ["trim", "--graph", graph_file, "--output", str(out), "--theta", "0", "--eta", "0",
         "--manifest-out", str(mpath)]
    )
    assert mpath.exists()
    assert not (tmp_path / "r.json.manifest.json").exists()


# ---------------------------------------------------------------------------
# find-path
# ---------------------------------------------------------------------------


def test_find_path_matches_library(graph_file, table_file, capsys):
    code = main(["find-path", "--graph", graph_file, "--strategies", table_file])
    assert code == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header == ["strategy", "path", "quality", "reliability", "score"]
    assert len(rows) == 1
    table = StrategyTable((easy_strategy(2, score=0.3), easy_strategy(3, score=0.6)))
    idx, cand = find_best_pipeline(branching_example_graph(), table)
    strategy_no, path_text, q, r, s = rows[0]
    assert int(strategy_no) == idx + 1  # CLI numbering is 1-based
    assert path_text == "-".join(str(n) for n in cand.nodes)
    # repr-formatted floats round-trip exactly
    assert float(q) == cand.quality
    assert float(r) == cand.reliability
    assert float(s) == cand.score


def test_find_path_all_lists_every_feasible_path(graph_file, table_file, capsys):
    code = main(["find-path", "--graph", graph_file, "--strategies", table_file, "--all"])
    assert code == 0
    _, rows = read_csv(capsys.readouterr().out)
    # 4 two-edge paths for strategy 1 plus 6 three-edge paths for strategy 2
    assert len(rows) == 10
    assert {r[0] for r in rows} == {"1", "2"}


def test_find_path_empty_result_still_succeeds(tmp_path, capsys):
    # two isolated nodes: no path of length 1 exists
    g = make_graph(uniform_nodes(range(2)), [], requester=0)
    gp = tmp_path / "iso.json"
    save_graph(g, str(gp))
    tp = tmp_path / "t.json"
    save_strategy_table(StrategyTable((easy_strategy(1),)), str(tp))
    assert main(["find-path", "--graph", str(gp), "--strategies", str(tp)]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header == ["strategy", "path", "quality", "reliability", "score"]
    assert rows == []


def test_find_path_with_trimming_flag(graph_file, table_file, tmp_path, capsys):
    out = tmp_path / "out.csv"
    code = main(
        ["find-path", "--graph", graph_file, "--strategies", table_file,
         "--theta", "0.3", "--eta", "9", "--output", str(out)]
    )
    assert code == 0
    table = StrategyTable((easy_strategy(2, score=0.3), easy_strategy(3, score=0.6)))
    trimmed, _ = trim_graph(
        branching_example_graph(),
        TrimConfig(theta=0.3, eta=9.0, power_weights=(0.3, 0.7), n_max=3),
    )
    expected = find_best_pipeline(trimmed, table)
    _, rows = read_csv(out.read_text(encoding="utf-8"))
    if expected is None:
        assert rows == []
    else:
        assert float(rows[0][4]) == expected[1].score
    # file output triggers a manifest automatically
    assert (tmp_path / "out.csv.manifest.json").exists()


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def test_stability_formula_row(capsys):
    code = main(["stability", "--t-grid", "1.0", "--n-node-list", "2", "--k-list", "1"])
    assert code == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header == [
        "session_time",
        "n_node",
        "pipelines",
        "survival_formula",
        "survival_mc",
        "expected_attempts",
    ]
    assert len(rows) == 1
    t, n, k, formula, mc, attempts = rows[0]
    assert (t, n, k) == ("1.0", "2", "1")
    assert float(formula) == pytest.approx(0.8106, abs=5e-4)
    assert mc == ""  # no Monte Carlo without --mc-trials
    assert float(attempts) == 1.0 / float(formula)


def test_stability_grid_order_and_exact_values(capsys):
    code = main(
        ["stability", "--t-grid", "0.1,1", "--n-node-list", "2,4", "--k-list", "1,2"]
    )
    assert code == 0
    _, rows = read_csv(capsys.readouterr().out)
    assert [(r[0], r[1], r[2]) for r in rows] == [
        ("0.1", "2", "1"), ("0.1", "2", "2"), ("0.1", "4", "1"), ("0.1", "4", "2"),
        ("1.0", "2", "1"), ("1.0", "2", "2"), ("1.0", "4", "1"), ("1.0", "4", "2"),
    ]
    for r in rows:
        query = StabilityQuery(float(r[0]), int(r[1]), int(r[2]))
        assert float(r[3]) == success_probability_multi(query, DEFAULT_BLOCKAGE_MODEL)


def test_stability_mc_column_uses_seed(capsys):
    code = main(
        ["stability", "--t-grid", "1", "--n-node-list", "2", "--k-list", "1",
         "--mc-trials", "2000", "--seed", "5"]
    )
    assert code == 0
    _, rows = read_csv(capsys.readouterr().out)
    expected = simulate_sessions(
        StabilityQuery(1.0, 2, 1), DEFAULT_BLOCKAGE_MODEL, 2000, seed=5
    )
    assert float(rows[0][4]) == expected


def test_stability_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("D2DPIPE_SEED", "17")
    main(["stability", "--t-grid", "1", "--n-node-list", "2", "--k-list", "1",
          "--mc-trials", "1500"])
    _, rows = read_csv(capsys.readouterr().out)
    expected = simulate_sessions(
        StabilityQuery(1.0, 2, 1), DEFAULT_BLOCKAGE_MODEL, 1500, seed=17
    )
    assert float(rows[0][4]) == expected


def test_stability_bad_environment_seed(monkeypatch, capsys):
    monkeypatch.setenv("D2DPIPE_SEED", "banana")
    code = main(["stability", "--t-grid", "1", "--n-node-list", "2", "--k-list", "1"])
    assert code == 1
    assert "D2DPIPE_SEED" in capsys.readouterr().err


def test_stability_overflow_reports_infinity(capsys):
    code = main(["stability", "--t-grid", "1e6", "--n-node-list", "6", "--k-list", "1"])
    assert code == 0
    _, rows = read_csv(capsys.readouterr().out)
    assert float(rows[0][3]) == 0.0
    assert math.isinf(float(rows[0][5]))


def test_stability_empty_grid_is_a_validation_error(capsys):
    assert main(["stability", "--t-grid", ",", "--n-node-list", "2", "--k-list", "1"]) == 1


# ---------------------------------------------------------------------------
# pool-sim
# ---------------------------------------------------------------------------


def write_pool_config(tmp_path, **overrides):
    save_strategy_table(REFERENCE_STRATEGY_TABLE, str(tmp_path / "table.json"))
    config = {
        "strategy_table": "table.json",  # resolved relative to the config file
        "headroom": 1.25,
        "theta": 0.3,
        "eta_grid": [0.0, 30.0],
        "trials": 8,
        "seed": 7,
        "cases": [
            {"name": "rich", "pool_size": 10, "beta": [5, 2]},
            {"name": "poor", "pool_size": 8, "beta": [4, 4]},
        ],
    }
    config.update(overrides)
    p = tmp_path / "pool.json"
    p.write_text(json.dumps(config), encoding="utf-8")
    return str(p)


def expected_pool_rows(pool_size, beta, seed, trials=8, headroom=1.25, theta=0.3):
    table = normalize_strategy_table(REFERENCE_STRATEGY_TABLE, headroom)
    cfg = PoolConfig(
        pool_size=pool_size,
        quality_dist=BetaParams(*beta),
        reliability_dist=BetaParams(*beta),
        resource_dist=BetaParams(*beta),
        trials=trials,
        seed=seed,
    )
    trim_cfg = TrimConfig(theta=theta, eta=0.0, power_weights=(0.3, 0.7, 0.0), n_max=4)
    return sweep_eta(cfg, table, MinRequirements(), trim_cfg, [0.0, 30.0])


def test_pool_sim_matches_library(tmp_path, capsys):
    config = write_pool_config(tmp_path)
    assert main(["pool-sim", "--config", config]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header == [
        "case", "eta", "edge_reduction_rate", "mean_path_score", "p_path_exists", "top_strategy",
    ]
    assert len(rows) == 4  # 2 cases x 2 thresholds
    for case_name, pool_size, beta in (("rich", 10, (5, 2)), ("poor", 8, (4, 4))):
        case_rows = [r for r in rows if r[0] == case_name]
        for row, (eta, res) in zip(case_rows, expected_pool_rows(pool_size, beta, seed=7)):
            assert float(row[1]) == eta
            assert float(row[2]) == res.mean_edge_reduction
            if math.isnan(res.mean_path_score):
                assert math.isnan(float(row[3]))
            else:
                assert float(row[3]) == res.mean_path_score
            assert float(row[4]) == res.p_path_exists
            top = res.top_strategy
            assert row[5] == ("" if top is None else str(top + 1))


def test_pool_sim_seed_override(tmp_path, capsys):
    config = write_pool_config(tmp_path)
    assert main(["pool-sim", "--config", config, "--seed", "99"]) == 0
    _, rows = read_csv(capsys.readouterr().out)
    rich = [r for r in rows if r[0] == "rich"]
    for row, (eta, res) in zip(rich, expected_pool_rows(10, (5, 2), seed=99)):
        assert float(row[4]) == res.p_path_exists


def test_pool_sim_missing_field(tmp_path, capsys):
    config = write_pool_config(tmp_path)
    raw = json.loads((tmp_path / "pool.json").read_text(encoding="utf-8"))
    del raw["eta_grid"]
    (tmp_path / "pool.json").write_text(json.dumps(raw), encoding="utf-8")
    assert main(["pool-sim", "--config", config]) == 1
    assert "eta_grid" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# session-sim
# ---------------------------------------------------------------------------


def write_session_spec(tmp_path, **overrides):
    spec = {
        "stages": [
            {"process_time": 0.125, "buffer_capacity": 8, "link_transfer_time": 0.0},
            {"process_time": 0.125, "buffer_capacity": 8, "link_transfer_time": 0.0},
        ],
        "n_packages": 6,
        "initial_feed_interval": 0.125,
        "timeout": 100.0,
        "rate_backoff_factor": 2.0,
    }
    spec.update(overrides)
    p = tmp_path / "session.json"
    p.write_text(json.dumps(spec), encoding="utf-8")
    return str(p)


def test_session_sim_matches_library(tmp_path, capsys):
    path = write_session_spec(tmp_path)
    assert main(["session-sim", "--spec", path]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header[:4] == [
        "completion_time", "packages_fed", "packages_completed", "packages_dropped",
    ]
    trace = run_session(
        SessionSpec(
            stages=(StageSpec(0.125, 8, 0.0), StageSpec(0.125, 8, 0.0)),
            n_packages=6,
            initial_feed_interval=0.125,
            timeout=100.0,
            rate_backoff_factor=2.0,
        )
    )
    row = rows[0]
    assert float(row[0]) == trace.completion_time
    assert int(row[1]) == trace.packages_fed
    assert int(row[2]) == trace.packages_completed
    assert row[5] == "false"  # timeout_aborted formatting
    assert float(row[9]) == trace.steady_state_throughput


def test_session_sim_event_log(tmp_path, capsys):
    path = write_session_spec(tmp_path, n_packages=2)
    log_path = tmp_path / "events.log"
    out = tmp_path / "trace.csv"
    assert main(
        ["session-sim", "--spec", path, "--event-log", str(log_path), "--output", str(out)]
    ) == 0
    text = log_path.read_text(encoding="utf-8")
    assert "processing" in text and "done" in text
    manifest = json.loads((tmp_path / "trace.csv.manifest.json").read_text(encoding="utf-8"))
    assert str(log_path) in manifest["outputs"]


def test_session_sim_missing_field(tmp_path, capsys):
    path = write_session_spec(tmp_path)
    raw = json.loads((tmp_path / "session.json").read_text(encoding="utf-8"))
    del raw["timeout"]
    (tmp_path / "session.json").write_text(json.dumps(raw), encoding="utf-8")
    assert main(["session-sim", "--spec", path]) == 1
    assert "timeout" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# installed entry point
# ---------------------------------------------------------------------------


def test_module_invocation():
    proc = subprocess.run(
        [sys.executable, "-m", "d2dpipe.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "d2dpipe" in proc.stdout
