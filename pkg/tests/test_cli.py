import json
import math
from pathlib import Path

import pytest

from diraclab import cli
from diraclab.cli import RunConfig, main, run
from diraclab.errors import SolverError
from diraclab.records import load_record


def _only_run(out: Path) -> Path:
    (d,) = [p for p in out.iterdir() if p.is_dir()]
    return d


def _numbers(rec):
    # everything except wall-clock timings
    return json.dumps({"config": {k: v for k, v in rec.config.items() if k not in ("out", "threads")},
                       "results": rec.results}, sort_keys=True)


def test_solve_point_charge(tmp_path, capsys):
    assert main(["solve", "--nu", "0.5", "--out", str(tmp_path)]) == 0
    d = _only_run(tmp_path)
    assert d.name.endswith("-solve")
    assert {p.name for p in d.iterdir()} == {"record.json", "log.txt"}
    rec = load_record(d)
    assert rec.results["lambda1"] == pytest.approx(math.sqrt(0.75), abs=1e-4)
    assert rec.version and rec.command == "solve"


def test_bounds_record(tmp_path):
    status, rec = run(RunConfig("bounds", nu=0.4, out=str(tmp_path)))
    assert status == 0
    assert rec.results["lower_bound_lambda"] == pytest.approx(0.4706, abs=1e-4)
    assert rec.results["tix_constant"] == pytest.approx(0.9061, abs=1e-4)
    text = (_only_run(tmp_path) / "record.json").read_text()
    assert "0.47059332920488467" in text


@pytest.mark.parametrize("content", ['{"atoms": [{"pos": [0, 0]}]}', "garbage"])
def test_malformed_measure_exit_2_no_record(tmp_path, content, capsys):
    m = tmp_path / "m.json"
    m.write_text(content)
    out = tmp_path / "runs"
    assert main(["solve", "--measure", str(m), "--out", str(out)]) == 2
    assert not out.exists()
    assert "invalid" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["bounds", "--nu", "0.95"], ["scan"], ["solve", "--nu", "0.5", "--tol", "-1"],
                                  ["report"], ["solve", "--measure", "/nonexistent.json"], ["frobnicate"]])
def test_validation_errors(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path / "r")] if argv != ["frobnicate"] else argv) == 2
    assert not (tmp_path / "r").exists()


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def boom(cfg, run_dir):
        raise SolverError("eigensolver failed")
    monkeypatch.setitem(cli.HANDLERS, "bounds", boom)
    assert run(RunConfig("bounds", nu=0.4, out=str(tmp_path)))[0] == 3
    assert not (_only_run(tmp_path) / "record.json").exists()


def test_env_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("DCLAB_NU", "0.3")
    monkeypatch.setenv("DCLAB_OUT", str(tmp_path))
    assert main(["bounds"]) == 0
    assert load_record(_only_run(tmp_path)).results["nu"] == 0.3
    # explicit flags win over the environment
    ns = cli.build_parser().parse_args(["bounds", "--nu", "0.2"])
    assert ns.nu == 0.2


def test_measure_file_snapshot_and_rerun(tmp_path):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"atoms": [{"pos": [0, 0, 0], "weight": 0.6}]}))
    assert main(["radial", "--measure", str(m), "--out", str(tmp_path / "a")]) == 0
    rec = load_record(_only_run(tmp_path / "a"))
    assert rec.config["measure_data"]["atoms"][0]["weight"] == 0.6
    m.unlink()  # the snapshot carries the measure itself
    assert main(["radial", "--config", str(_only_run(tmp_path / "a")), "--out", str(tmp_path / "b")]) == 0
    assert _numbers(load_record(_only_run(tmp_path / "b"))) == _numbers(rec)


def test_scan_threads_reproducible(tmp_path):
    base = ["scan", "--nu", "0.6", "--distances", "0.5", "3", "--basis-n", "8", "--grid-level", "1"]
    assert main(base + ["--threads", "1", "--out", str(tmp_path / "t1")]) == 0
    assert main(base + ["--threads", "2", "--out", str(tmp_path / "t2")]) == 0
    r1, r2 = (load_record(_only_run(tmp_path / t)) for t in ("t1", "t2"))
    assert _numbers(r1) == _numbers(r2)
    c1 = (_only_run(tmp_path / "t1") / "scan.csv").read_bytes()
    assert c1 == (_only_run(tmp_path / "t2") / "scan.csv").read_bytes()
    assert c1.startswith(b"d,lambda1,residual,status\r\n")


def test_optimize_rerun_bitwise(tmp_path):
    argv = ["optimize", "--nu", "0.5", "--k", "2", "--budget", "4", "--restarts", "1", "--seed", "5",
            "--basis-n", "8", "--grid-level", "1"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    a = _only_run(tmp_path / "a")
    assert main(["optimize", "--config", str(a), "--out", str(tmp_path / "b")]) == 0
    ra, rb = load_record(a), load_record(_only_run(tmp_path / "b"))
    assert _numbers(ra) == _numbers(rb)
    assert ra.results["trace"]["seed"] == 5


def test_report_merges_scans(tmp_path):
    dirs = []
    for i, ds in enumerate((["2"], ["0.5"])):
        argv = ["scan", "--nu", "0.6", "--distances", *ds, "--basis-n", "8", "--grid-level", "1",
                "--out", str(tmp_path / f"s{i}")]
        assert main(argv) == 0
        dirs.append(str(_only_run(tmp_path / f"s{i}")))
    assert main(["report", *dirs, "--out", str(tmp_path / "rep")]) == 0
    rep = _only_run(tmp_path / "rep")
    lines = (rep / "merged.csv").read_text().splitlines()
    assert lines[0] == "d,lambda1,residual,status"
    assert [float(l.split(",")[0]) for l in lines[1:]] == [0.5, 2.0]
    assert len((rep / "lambda1_vs_d.dat").read_text().splitlines()) == 2


def test_report_nu_sweep(tmp_path):
    dirs = []
    for i, nu in enumerate(("0.5", "0.3")):
        assert main(["radial", "--nu", nu, "--out", str(tmp_path / f"r{i}")]) == 0
        dirs.append(str(_only_run(tmp_path / f"r{i}")))
    assert main(["report", *dirs, "--out", str(tmp_path / "rep")]) == 0
    rows = (_only_run(tmp_path / "rep") / "sweep.csv").read_text().splitlines()
    assert rows[0] == "nu,lambda1,conjecture_ref,bound"
    nu, lam, ref, bound = map(float, rows[1].split(","))
    assert nu == 0.3 and lam == pytest.approx(ref, abs=1e-5) and bound < lam


def test_report_missing_record(tmp_path):
    assert main(["report", str(tmp_path / "nope"), "--out", str(tmp_path / "rep")]) == 2


def test_critical_command(tmp_path):
    m = tmp_path / "neg.json"
    m.write_text(json.dumps({"atoms": [{"pos": [2, 0, 0], "weight": 0.4}]}))
    assert main(["critical", "--nu", "0.4", "--negative", str(m), "--no-nu0", "--out", str(tmp_path / "c")]) == 0
    res = load_record(_only_run(tmp_path / "c")).results
    assert res["report"]["nu0"] is None
    assert 1.0 <= res["report"]["nu1_estimate"] <= 1.05
    assert res["signed_gap"]["analytic"][1] == pytest.approx(0.4706, abs=1e-4)
