import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from dpainleve.algebra import ProjVal
from dpainleve.cli import main
from dpainleve.connection import THETA_STAR, THETA_VI_STAR, PQPoint
from dpainleve.maps import dpv_step


def write_cfg(tmp_path, **cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def v_cfg(tmp_path, **extra):
    return write_cfg(tmp_path, theta=THETA_STAR.to_dict(), initial_point=[0.3, 0.7], **extra)


def bad_theta():
    d = THETA_STAR.to_dict()
    d["d"] = [[0.35, 0.0], [-0.35, 0.0]]
    return d


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_validate_ok_and_bad(tmp_path, capsys):
    assert main(["validate", "--config", v_cfg(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["theta"]["ok"] and report["matrix"]["ok"]
    cfg = write_cfg(tmp_path, theta=bad_theta())
    assert main(["validate", "--config", cfg]) == 2
    report = json.loads(capsys.readouterr().out)
    assert not report["theta"]["ok"]


def test_schema_error_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, theta=THETA_STAR.to_dict(), steps=-1)
    assert main(["orbit", "--config", cfg]) == 2
    cfg = write_cfg(tmp_path, command="flow", theta=THETA_STAR.to_dict())
    assert main(["orbit", "--config", cfg]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["validate", "--config", str(tmp_path / "broken.json")]) == 2


def test_orbit_verify_each(tmp_path):
    out = tmp_path / "orbit.jsonl"
    code = main(["orbit", "--config", v_cfg(tmp_path), "--steps", "20", "--verify-each", "--out", str(out)])
    assert code == 0
    recs = read_jsonl(out)
    assert [r["step"] for r in recs] == list(range(21))
    assert all(r["residual"] < 1e-8 for r in recs[1:])
    first = dpv_step(THETA_STAR, PQPoint.of(0.3, 0.7)).point_out
    assert ProjVal.from_list(recs[1]["q"]) == first.q
    assert ProjVal.from_list(recs[1]["p"]) == first.p


def test_orbit_zero_steps(tmp_path):
    out = tmp_path / "orbit.jsonl"
    assert main(["orbit", "--config", v_cfg(tmp_path, steps=0), "--out", str(out)]) == 0
    recs = read_jsonl(out)
    assert len(recs) == 1 and recs[0]["step"] == 0
    assert ProjVal.from_list(recs[0]["q"]) == ProjVal.of(0.3)


def test_orbit_dpvi_p_one_halts(tmp_path):
    out = tmp_path / "orbit.jsonl"
    cfg = write_cfg(tmp_path, theta=THETA_VI_STAR.to_dict(), initial_point=[0.45, 1.0], steps=5)
    assert main(["orbit", "--config", cfg, "--out", str(out)]) == 3
    recs = read_jsonl(out)
    assert len(recs) == 2
    assert recs[1]["chart"] == "exceptional"
    q, p = ProjVal.from_list(recs[1]["q"]), ProjVal.from_list(recs[1]["p"])
    assert abs(q.value() - THETA_VI_STAR.a[2]) < 1e-12 and p.is_zero()


def test_orbit_invalid_theta(tmp_path):
    cfg = write_cfg(tmp_path, theta=bad_theta(), initial_point=[0.3, 0.7])
    assert main(["orbit", "--config", cfg]) == 2


def test_verify_invalid_theta_before_work(tmp_path):
    cfg = write_cfg(tmp_path, theta=bad_theta())
    t0 = time.perf_counter()
    assert main(["verify", "--quick", "--config", cfg]) == 2
    assert time.perf_counter() - t0 < 0.5


def test_verify_quick(tmp_path):
    out = tmp_path / "verify.json"
    t0 = time.perf_counter()
    assert main(["verify", "--quick", "--seed", "7", "--out", str(out)]) == 0
    assert time.perf_counter() - t0 < 5
    report = json.loads(out.read_text())
    assert report["passed"] and report["seed"] == 7 and len(report["properties"]) == 12


def test_degenerate_csv_and_summary(tmp_path):
    out = tmp_path / "deg.csv"
    cfg = write_cfg(tmp_path, theta=THETA_STAR.to_dict(), mode="to_dPV")
    assert main(["degenerate", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 7
    res = [max(float(r["residual_q"]), float(r["residual_p"])) for r in rows]
    assert all(x > y for x, y in zip(res, res[1:]))
    summary = json.loads((tmp_path / "deg.summary.json").read_text())
    assert 0.85 <= summary["slope"] <= 1.15


def test_flow_scalar_path(tmp_path):
    out = tmp_path / "flow.csv"
    s = 0.3 + 0.1j
    end = [[(np.exp(s) * r).real, (np.exp(s) * r).imag] for r in THETA_STAR.rho]
    cfg = v_cfg(tmp_path, path={"vertices": [[1.0, 2.0], end]}, steps=100)
    assert main(["flow", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 101
    qs = [complex(r["q"]) for r in rows]
    assert max(abs(q - 0.3) for q in qs) < 1e-9
    assert abs(complex(rows[-1]["p"]) - 0.7 * np.exp(s)) < 1e-8


def test_flow_polyline(tmp_path):
    out = tmp_path / "flow.csv"
    cfg = v_cfg(tmp_path, path={"vertices": [[1.0, 2.0], [1.0, 2.3], [[1.1, 0.1], 2.3]]}, steps=200)
    assert main(["flow", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 401
    assert float(rows[-1]["t"]) == 2.0
    summary = json.loads((tmp_path / "flow.summary.json").read_text())
    assert [s["halted"] for s in summary["segments"]] == [False, False]
    assert all(s["max_residual"] < 1e-4 for s in summary["segments"])


def test_flow_singular_encounter(tmp_path, capsys):
    out = tmp_path / "flow.csv"
    cfg = v_cfg(tmp_path, path={"vertices": [[1.0, 2.0], [3.0, 2.0]]}, steps=200)
    assert main(["flow", "--config", cfg, "--out", str(out)]) == 3
    assert "singular encounter" in capsys.readouterr().err
    rows = list(csv.DictReader(out.open()))
    assert 0 < len(rows) < 201
    summary = json.loads((tmp_path / "flow.summary.json").read_text())
    assert summary["segments"][0]["halted"]


@pytest.mark.parametrize("argv", [["orbit", "--steps", "5"], ["degenerate"]])
def test_byte_identical_runs(tmp_path, argv):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.txt"
        assert main(argv + ["--config", v_cfg(tmp_path), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dpainleve", "validate", "--config", v_cfg(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["theta"]["ok"]
