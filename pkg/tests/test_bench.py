import csv

import numpy as np
import pytest

from simkernel import bench

SCENE = "scenes/demo.json"


def test_latency_stats_order_invariants():
    rng = np.random.default_rng(7)
    samples = rng.lognormal(mean=-11.0, sigma=0.4, size=2000)
    st = bench.LatencyStats.from_samples("direct", "step", samples)
    assert st.min_s <= st.p50_s <= st.p99_s <= st.max_s
    assert st.min_s <= st.mean_s <= st.max_s
    assert st.n_calls == 2000
    assert st.cps == pytest.approx(2000 / samples.sum())
    assert st.iqr_s > 0


def test_csv_round_trip(tmp_path):
    samples = np.full(100, 2e-6)
    st = bench.LatencyStats.from_samples("direct", "step", samples)
    out = tmp_path / "results.csv"
    bench.emit_report([st], out)
    bench.emit_report([st], out)  # append without duplicating the header
    rows = bench.read_results(out)
    assert len(rows) == 2
    assert list(rows[0].keys()) == list(bench.CSV_COLUMNS)
    assert rows[0]["mode"] == "direct"
    assert float(rows[0]["mean_s"]) == pytest.approx(2e-6)
    assert float(rows[0]["cps"]) == pytest.approx(5e5)
    with open(out) as fh:
        assert sum(1 for line in csv.reader(fh)) == 3  # header + 2 rows


def test_direct_workloads_run():
    for workload in ("step", "step-query"):
        st = bench.run_bench("direct", workload, SCENE, calls=100, warmup=10)
        assert st.n_calls == 100
        assert st.mean_s < 1e-3
    ep = bench.run_bench("direct", "episode", SCENE, calls=5, warmup=1)
    assert ep.n_calls == 5
    assert ep.mean_s < 1.0  # two 64x64 renders per iteration


def test_remote_fixed_respects_interval_floor():
    st = bench.run_bench("remote-fixed", "step", SCENE, calls=30, warmup=5,
                         interval_ms=2.0)
    assert st.mean_s >= 0.002
    assert st.min_s >= 0.0019


def test_unknown_mode_or_workload_rejected():
    with pytest.raises(ValueError):
        bench.run_bench("carrier-pigeon", "step", SCENE, calls=1)
    with pytest.raises(ValueError):
        bench.run_bench("direct", "sleep", SCENE, calls=1)


def test_cli_run_and_report(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = bench.main(["run", "--mode", "direct", "--workload", "step",
                     "--scene", SCENE, "--calls", "50", "--warmup", "5",
                     "--out", str(out)])
    assert rc == 0
    assert out.exists()
    rc = bench.main(["report", "--in", str(out)])
    assert rc == 0
    shown = capsys.readouterr().out
    assert "mean_s" in shown and "direct" in shown


def test_cli_missing_results_file_exits_2(capsys):
    assert bench.main(["report", "--in", "/nonexistent/r.csv"]) == 2


def test_cli_bad_scene_exits_2(tmp_path):
    assert bench.main(["run", "--mode", "direct", "--workload", "step",
                       "--scene", "/nonexistent/scene.json",
                       "--calls", "5"]) == 2