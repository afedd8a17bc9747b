import json

import numpy as np
import pytest

from dpainleve.connection import THETA_STAR, PQPoint, ThetaV, validate_theta
from dpainleve.degeneration import (DegenerationConfig, DegenerationError, dpv_limit_point,
                                    dpv_limit_residual, embed_to_dpvi, pvi_limit_quotient,
                                    pvi_limit_residual, run_degeneration)
from dpainleve.flow import FlowState, pvi_vector_field
from dpainleve.maps import dpv_step

PT = PQPoint.of(0.3, 0.7)


def test_embedding_to_dpv_by_substitution():
    t = 0.03
    theta = embed_to_dpvi(DegenerationConfig(THETA_STAR, mode="to_dPV"), t)
    a1, a2, a3, a4 = THETA_STAR.a
    r1, r2 = THETA_STAR.rho
    d1, d2 = THETA_STAR.d
    assert np.allclose(theta.a, (a1, a2, -r1 / t, -r2 / t, a3, a4))
    assert np.allclose(theta.d, (d1 + r1 / t, d2 + r2 / t))
    assert abs(validate_theta(theta).degree + 1) < 1e-12


def test_embedding_to_pvi_by_substitution():
    t = 0.03
    theta = embed_to_dpvi(DegenerationConfig(THETA_STAR, mode="to_PVI"), t)
    r1, r2 = THETA_STAR.rho
    assert np.allclose(theta.a, (-r1 / t, -r2 / t) + THETA_STAR.a)
    assert abs(sum(theta.a) + sum(theta.d) - 1) < 1e-12


def test_decade_t_is_resonant_for_theta_star():
    # 1/t is an integer at t = 10^-k, which trips a mod condition
    cfg = DegenerationConfig(THETA_STAR, mode="to_dPV")
    with pytest.raises(DegenerationError, match="resonant"):
        embed_to_dpvi(cfg, 0.1)
    embed_to_dpvi(cfg, 0.03)


def test_config_validation():
    with pytest.raises(DegenerationError):
        DegenerationConfig(THETA_STAR, mode="to_PV")
    with pytest.raises(DegenerationError):
        DegenerationConfig(THETA_STAR, (0.1, 0.0))


@pytest.mark.parametrize("mode", ["to_dPV", "to_PVI"])
def test_residuals_decrease_linearly(mode):
    res = run_degeneration(DegenerationConfig(THETA_STAR, mode=mode), PT)
    r = res.residual
    assert np.all(np.diff(r) < 0)
    slope, _ = res.fit()
    assert 0.85 <= slope <= 1.15
    assert res.skipped == [True, False, True, False, True, False, True]
    assert 0.85 <= res.summary()["slope_all"] <= 1.15


def test_dpv_limit_tiny_t():
    res = dpv_limit_residual(DegenerationConfig(THETA_STAR, (1e-8,), "to_dPV"), PT)
    assert res.residual[0] < 1e-6
    q1, p1 = dpv_limit_point(THETA_STAR, 0.3, 0.7, 1e-12)
    ref = dpv_step(THETA_STAR, PT).point_out
    assert abs(q1 - ref.qv) < 1e-9 and abs(p1 - ref.pv) < 1e-9


def test_pvi_limit_matches_closed_form():
    a1, a2, a3, a4 = THETA_STAR.a
    r1, r2 = THETA_STAR.rho
    q, pt = 0.3, 0.7
    want_q = pt * (q - a3) * (q - a4) / (r1 * r2) - (q - a1) * (q - a2) / pt
    fq, fp = pvi_vector_field(FlowState(THETA_STAR, q, pt), (1.0, 1.0))
    assert abs(fq - want_q) < 1e-12
    dq, dp = pvi_limit_quotient(THETA_STAR, q, pt, 1e-9)
    assert abs(dq - fq) < 1e-6 and abs(dp - fp) < 1e-6


def test_mode_mismatch():
    with pytest.raises(DegenerationError):
        pvi_limit_residual(DegenerationConfig(THETA_STAR, mode="to_dPV"), PT)
    with pytest.raises(DegenerationError):
        dpv_limit_residual(DegenerationConfig(THETA_STAR, mode="to_PVI"), PT)


def test_other_theta():
    theta = ThetaV((0.13 + 0.05j, -0.21, 0.34, 0.47j), (0.8, -1.3 + 0.4j), (0.25, 0.0))
    theta = ThetaV(theta.a, theta.rho, (0.25, 1 - sum(theta.a) - 0.25))
    assert validate_theta(theta).ok
    res = run_degeneration(DegenerationConfig(theta, mode="to_dPV"), PQPoint.of(0.6, 0.9))
    slope, _ = res.fit()
    assert 0.85 <= slope <= 1.15
    assert not any(res.skipped)


def test_csv_and_summary():
    res = run_degeneration(DegenerationConfig(THETA_STAR, mode="to_PVI"), PT)
    lines = res.to_csv().strip().splitlines()
    assert lines[0] == "t,residual_q,residual_p,skipped_flag"
    assert len(lines) == 8
    t, rq, rp, flag = lines[1].split(",")
    assert float(t) == 0.1 and flag == "1"
    assert float(rq) == res.residual_q[0]
    summary = json.loads(json.dumps(res.summary()))
    assert summary["mode"] == "to_PVI"
    assert [s["t"] for s in summary["skipped"]] == [0.1, 0.01, 0.001, 0.0001]
