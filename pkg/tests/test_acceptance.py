"""The twelve acceptance criteria at full sample counts and stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal summary.
"""
import subprocess
import sys
import time

import numpy as np

from dpainleve.connection import THETA_STAR, THETA_VI_STAR
from dpainleve.verify import (PropertyResult, asymmetric_orbit, degeneration, field_agreement,
                              formal_type_recovery, gauge_invariance, oracle_equivalence, pvi_ode,
                              roundtrips, scalar_equivariance)

SEEDS = [int(s) for s in np.random.SeedSequence(42).generate_state(8)]
LINES = []


def report(num: int, res: PropertyResult, extra: str = "") -> None:
    line = f"criterion {num:2d} {res.line()}{extra}"
    LINES.append(line)
    print(line)


def timed(fn, *args):
    t0 = time.perf_counter()
    res = fn(*args)
    return res, time.perf_counter() - t0


def test_c01_dpv_oracle_equivalence():
    res, dt = timed(oracle_equivalence, "V", 1000, SEEDS[0])
    ok = res.passed and dt < 30
    report(1, PropertyResult(res.name, ok, res.metric, res.threshold, res.samples), f" time={dt:.1f}s")
    assert res.passed and dt < 30


def test_c02_dpvi_oracle_equivalence():
    res, dt = timed(oracle_equivalence, "VI", 1000, SEEDS[1])
    ok = res.passed and dt < 30
    report(2, PropertyResult(res.name, ok, res.metric, res.threshold, res.samples), f" time={dt:.1f}s")
    assert res.passed and dt < 30


def test_c03_roundtrips():
    rv = roundtrips("V", 500, SEEDS[2])
    rvi = roundtrips("VI", 500, SEEDS[3])
    both = PropertyResult("roundtrips", rv.passed and rvi.passed, max(rv.metric, rvi.metric),
                          1e-8, rv.samples + rvi.samples)
    report(3, both)
    assert both.passed


def test_c04_gauge_invariance():
    res = gauge_invariance(100, 100, SEEDS[4])
    report(4, res)
    assert res.passed and res.threshold == 1e-10


def test_c05_formal_type_recovery():
    res = formal_type_recovery(200, SEEDS[5])
    report(5, res, f" VI={res.detail['max_error_VI']:.3e}/{res.detail['threshold_VI']:.0e}")
    assert res.passed
    assert res.metric < 1e-10 and res.detail["max_error_VI"] < 1e-8


def test_c06_field_agreement():
    res = field_agreement(200, SEEDS[6])
    report(6, res, f" superposition={res.detail['superposition']:.3e}")
    assert res.passed
    assert res.metric < 1e-8 and res.detail["superposition"] < 1e-12


def test_c07_pvi_ode():
    res, dt = timed(pvi_ode, 500)
    assert res.detail["step"] == 1e-3
    report(7, PropertyResult(res.name, res.passed and dt < 10, res.metric, res.threshold, res.samples),
           f" time={dt:.1f}s")
    assert res.passed and dt < 10


def test_c08_degeneration_to_dpv():
    res = degeneration("to_dPV", THETA_STAR)
    report(8, res, f" residual(1e-8)={res.detail['residual_1e-8']:.3e}")
    assert res.passed
    assert 0.85 <= res.metric <= 1.15 and res.detail["residual_1e-8"] < 1e-6


def test_c09_degeneration_to_pvi():
    res = degeneration("to_PVI", THETA_STAR)
    report(9, res)
    assert res.passed and 0.85 <= res.metric <= 1.15


def test_c10_asymmetric_form():
    res = asymmetric_orbit(50, THETA_VI_STAR)
    report(10, res)
    assert res.passed and res.samples == 50


def test_c11_scalar_equivariance():
    res = scalar_equivariance(100, SEEDS[7])
    report(11, res)
    assert res.passed


def test_c12_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"verify{k}.json"
        proc = subprocess.run([sys.executable, "-m", "dpainleve", "verify", "--quick", "--seed", "42",
                               "--out", str(out)], capture_output=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    same = outs[0] == outs[1]
    report(12, PropertyResult("determinism", same, 0.0 if same else 1.0, 0.0, 2))
    assert same
