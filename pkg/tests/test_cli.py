import json

import numpy as np
import pytest

from quadfeas.cli import main
from quadfeas.measurement import (
    deserialize_ensemble,
    deserialize_observations,
    ensemble_from_matrices,
    serialize_ensemble,
)


def run(tmp_path, *argv):
    return main([*argv, "--out-dir", str(tmp_path)])


def gen(tmp_path, *extra):
    assert run(tmp_path, "gen", "--n", "4", "--m", "40", "--seed", "7", *extra) == 0
    return {k: tmp_path / f"instance_{k}.json" for k in ("ensemble", "truth", "observations")}


def test_gen_writes_three_files_deterministically(tmp_path):
    files = gen(tmp_path / "a")
    again = gen(tmp_path / "b")
    for k in files:
        assert files[k].read_bytes() == again[k].read_bytes()
    ens = deserialize_ensemble(files["ensemble"].read_bytes())
    assert (ens.n, ens.m) == (4, 40)
    doc = json.loads(files["ensemble"].read_text())
    assert doc["build"].startswith("quadfeas-") and doc["config"]["seed"] == 7


def test_gen_prints_digests(tmp_path, capsys):
    gen(tmp_path)
    out = capsys.readouterr().out
    assert out.count("sha256=") == 3


def test_gen_rank_one_nonnegative(tmp_path):
    files = gen(tmp_path, "--kind", "rank-one")
    c = deserialize_observations(files["observations"].read_bytes()).values
    assert np.all(c >= 0)


def test_gen_noise(tmp_path):
    base = gen(tmp_path / "clean")
    assert run(tmp_path / "noisy", "gen", "--n", "4", "--m", "4000", "--seed", "7", "--noise", "0.1") == 0
    assert run(tmp_path / "clean2", "gen", "--n", "4", "--m", "4000", "--seed", "7") == 0
    c0 = deserialize_observations((tmp_path / "clean2" / "instance_observations.json").read_bytes()).values
    c1 = deserialize_observations((tmp_path / "noisy" / "instance_observations.json").read_bytes()).values
    assert np.std(c1 - c0) == pytest.approx(0.1, rel=0.05)
    assert base["ensemble"].exists()


def test_gen_usage_errors(tmp_path):
    assert run(tmp_path, "gen", "--n", "0", "--m", "3") == 2
    assert run(tmp_path, "gen", "--m", "3") == 2
    assert run(tmp_path, "gen", "--n", "2", "--m", "3", "--kind", "fusion") == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen", "--n", "2", "--m", "3", "--out-dir", str(blocker / "sub")]) == 2


def _solve(tmp_path, files, *extra):
    return run(
        tmp_path,
        "solve",
        "--ensemble",
        str(files["ensemble"]),
        "--observations",
        str(files["observations"]),
        "--truth",
        str(files["truth"]),
        *extra,
    )


def test_solve_success(tmp_path):
    files = gen(tmp_path)
    assert _solve(tmp_path, files) == 0
    res = json.loads((tmp_path / "solve_result.json").read_text())
    assert res["success"] and res["rel_error"] < 1e-5
    assert res["version"] == 1 and "config" in res and res["seed"] == 0
    assert (tmp_path / "solve_trace.csv").read_text().startswith("iter,f,grad_norm,step\n")


def test_solve_from_truth_takes_no_iterations(tmp_path):
    files = gen(tmp_path)
    assert _solve(tmp_path, files, "--init", "given", "--x0", str(files["truth"])) == 0
    assert json.loads((tmp_path / "solve_result.json").read_text())["iterations"] == 0


def test_solve_zero_budget_fails(tmp_path):
    files = gen(tmp_path)
    assert _solve(tmp_path, files, "--max-iters", "0") == 1
    assert json.loads((tmp_path / "solve_result.json").read_text())["converged"] is False


def test_solve_io_errors(tmp_path):
    files = gen(tmp_path)
    assert run(tmp_path, "solve", "--ensemble", str(tmp_path / "missing.json"), "--observations", str(files["observations"])) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(tmp_path, "solve", "--ensemble", str(bad), "--observations", str(files["observations"])) == 2
    assert run(tmp_path, "solve", "--ensemble", str(files["ensemble"])) == 2


def test_sweep_csv_and_determinism(tmp_path):
    args = ["sweep", "--n", "4", "--ms", "8,40", "--trials", "4", "--seed", "3"]
    assert run(tmp_path / "a", *args) == 0
    assert run(tmp_path / "b", *args, "--jobs", "2") == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "n,m,trials,success_rate,median_iters" and len(lines) == 3
    summary = json.loads((tmp_path / "a" / "sweep_summary.json").read_text())
    assert "inversions" in summary["trend"]


def test_sweep_without_trials(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--n", "4", "--trials", "0") != 0
    assert "no trials" in capsys.readouterr().err
    assert (tmp_path / "sweep.csv").read_text().splitlines() == ["n,m,trials,success_rate,median_iters"]


def test_stability_commands(tmp_path):
    assert run(tmp_path, "stability", "--n", "4", "--m", "40", "--pairs", "500") == 0
    doc = json.loads((tmp_path / "stability.json").read_text())
    assert doc["injective"] and doc["alpha_hat"] > 0
    ident = tmp_path / "ident.json"
    ident.write_bytes(serialize_ensemble(ensemble_from_matrices([np.eye(3)] * 10)))
    assert run(tmp_path, "stability", "--ensemble", str(ident), "--pairs", "100") == 1
    assert json.loads((tmp_path / "stability.json").read_text())["alpha_hat"] == 0.0


def test_landscape_orbit_and_calibrated(tmp_path):
    assert run(tmp_path, "landscape", "--n", "6", "--m", "60", "--points", "50", "--generator", "orbit") == 0
    doc = json.loads((tmp_path / "landscape.json").read_text())
    assert doc["scan"]["histogram"]["near_minimum"] == 50
    assert set(doc["scan"]["thresholds"]) >= {"beta_thr", "zeta", "gamma", "grad_delta", "c0"}
    csv = (tmp_path / "landscape.csv").read_text().splitlines()
    assert csv[0] == "index,regime,gradient_norm,normalized_curvature,distance_to_truth,verdict" and len(csv) == 51


def test_landscape_violation_exit_code(tmp_path):
    argv = ["landscape", "--n", "4", "--m", "40", "--points", "20", "--generator", "uniform"]
    assert run(tmp_path, *argv, "--beta-thr", "1e9", "--zeta", "1e9", "--gamma", "0") == 1
    assert run(tmp_path, *argv, "--zeta", "1") == 2


def test_landscape_local_min(tmp_path):
    argv = ["landscape", "--n", "4", "--m", "40", "--points", "20", "--local-min-trials", "3"]
    assert run(tmp_path, *argv) == 0
    assert json.loads((tmp_path / "landscape.json").read_text())["local_min"]["trials"] == 3


def test_concentration_command(tmp_path):
    argv = ["concentration", "--n", "4", "--m", "100", "--trials", "20", "--cross-term", "--ms", "50,100"]
    assert run(tmp_path, *argv, "--trend-seeds", "2") == 0
    doc = json.loads((tmp_path / "concentration.json").read_text())
    assert {"report", "trend", "cross_term"} <= set(doc)
    assert (tmp_path / "concentration.csv").read_text().startswith("trial,ratio,deviation\n")
    assert run(tmp_path, "concentration", "--n", "4", "--m", "10", "--trials", "20", "--epsilon", "0.01", "--xi", "0.01") == 1
    assert run(tmp_path, "concentration", "--xi", "1.5") == 2


def test_covering_command(tmp_path):
    argv = ["covering", "--n", "2", "--delta", "0.25", "--matrices", "3", "--samples", "50000"]
    assert run(tmp_path, *argv) == 0
    doc = json.loads((tmp_path / "covering.json").read_text())
    assert doc["all_hold"] and len(doc["checks"]) == 3 and doc["checks"][0]["net_delta"] == 0.25
    assert run(tmp_path, "covering", "--n", "5") == 2
    assert run(tmp_path, "covering", "--delta", "0.7") == 2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("n: 3\nm: 12\nseed: 4\nprefix: viacfg\n")
    assert run(tmp_path, "gen", "--config", str(cfg), "--m", "9") == 0
    ens = deserialize_ensemble((tmp_path / "viacfg_ensemble.json").read_bytes())
    assert (ens.n, ens.m, ens.seed) == (3, 9, 4)
    jcfg = tmp_path / "cfg.json"
    jcfg.write_text(json.dumps({"n": 2, "m": 5, "bogus": 1}))
    assert run(tmp_path, "gen", "--config", str(jcfg)) == 2


def test_verify_passes_and_is_deterministic(tmp_path, capsys):
    assert main(["verify"]) == 0
    first = capsys.readouterr().out
    assert main(["verify"]) == 0
    assert capsys.readouterr().out == first
    assert "FAIL" not in first


def test_verify_names_corrupted_fixture(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_bytes(serialize_ensemble(ensemble_from_matrices([np.eye(2)])))
    doc = json.loads(good.read_text())
    doc["matrices"][0][0] = [1.0, 0.25]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["verify", "--fixture", str(bad)]) == 1
    captured = capsys.readouterr()
    assert "measurement.fixture" in captured.err
    assert "non-real diagonal" in captured.out


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["verify", "--jobs", "0"]) == 2
