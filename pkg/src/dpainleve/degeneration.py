"""Limits of dPVI: to dPV (zeros sent to infinity) and to the classical PVI flow.

The parameter embeddings carry terms of size 1/t that cancel in the rescaled
outputs, so the per-t evaluations run in mpmath at ``DPS`` digits.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .connection import ThetaV, ThetaVI, validate_theta
from .flow import FlowState, pvi_vector_field
from .maps import dpv_step, dpvi_formula
from .connection import PQPoint

DPS = 50
MODES = ("to_dPV", "to_PVI")
DEFAULT_T = tuple(float(t) for t in np.logspace(-1, -4, 7))


class DegenerationError(ValueError):
    pass


@dataclass(frozen=True)
class DegenerationConfig:
    theta_tilde: ThetaV
    t_values: tuple = DEFAULT_T
    mode: str = "to_dPV"

    def __post_init__(self):
        if self.mode not in MODES:
            raise DegenerationError(f"mode must be one of {MODES}")
        if any(not (t > 0) for t in self.t_values):
            raise DegenerationError("t values must be positive")
        object.__setattr__(self, "t_values", tuple(float(t) for t in self.t_values))


def _embedded(theta: ThetaV, t, mode: str, num=complex):
    """(a, d) of theta(t) in the arithmetic ``num``; d2 closes deg = -1 exactly."""
    at = [num(x) for x in theta.a]
    r1, r2 = (num(x) for x in theta.rho)
    d1 = num(theta.d[0])
    d2 = 1 - sum(at) - d1
    if mode == "to_dPV":
        a = [at[0], at[1], -r1 / t, -r2 / t, at[2], at[3]]
    else:
        a = [-r1 / t, -r2 / t] + at
    d = [d1 + r1 / t, d2 + r2 / t]
    return a, d


def embed_to_dpvi(config: DegenerationConfig, t: float) -> ThetaVI:
    """theta(t) in double precision, screened by validate_theta."""
    if t == 0:
        raise DegenerationError("t must be nonzero")
    a, d = _embedded(config.theta_tilde, t, config.mode)
    theta = ThetaVI(tuple(a), tuple(d))
    rep = validate_theta(theta)
    if not rep.ok:
        raise DegenerationError("resonant t: " + ", ".join(sorted(set(rep.failed()))))
    return theta


def _mpc(z: complex):
    return mpmath.mpc(z.real, z.imag)


def _step_mp(a, d, q, p):
    (qn, qd), (pn, pd) = dpvi_formula(a, d, (q, mpmath.mpc(1)), (p, mpmath.mpc(1)))
    return qn / qd, pn / pd


def dpv_limit_point(theta: ThetaV, q: complex, pt: complex, t) -> tuple[complex, complex]:
    """Rescaled dPVI step at theta(t): returns (q', p~') with p~ = (rho2 + q t) p."""
    with mpmath.workdps(DPS):
        t = mpmath.mpf(t) if not isinstance(t, mpmath.mpf) else t
        a, d = _embedded(theta, t, "to_dPV", _mpc)
        r2 = _mpc(theta.rho[1])
        qm, ptm = _mpc(q), _mpc(pt)
        p = ptm / (r2 + qm * t)
        q1, p1 = _step_mp(a, d, qm, p)
        return complex(q1), complex((r2 + q1 * t) * p1)


def pvi_limit_quotient(theta: ThetaV, q: complex, pt: complex, t) -> tuple[complex, complex]:
    """((q' - q)/t, (p~' - p~)/t) for the dPVI step at theta(t) with p~ = (q - a2~) t p."""
    with mpmath.workdps(DPS):
        t = mpmath.mpf(t) if not isinstance(t, mpmath.mpf) else t
        a, d = _embedded(theta, t, "to_PVI", _mpc)
        a2 = _mpc(theta.a[1])
        qm, ptm = _mpc(q), _mpc(pt)
        p = ptm / ((qm - a2) * t)
        q1, p1 = _step_mp(a, d, qm, p)
        pt1 = (q1 - a2) * t * p1
        return complex((q1 - qm) / t), complex((pt1 - ptm) / t)


@dataclass
class DegenerationResult:
    mode: str
    t: list = field(default_factory=list)
    residual_q: list = field(default_factory=list)
    residual_p: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    reasons: list = field(default_factory=list)

    @property
    def residual(self) -> np.ndarray:
        return np.maximum(np.array(self.residual_q), np.array(self.residual_p))

    def fit(self, include_skipped: bool = False) -> tuple[float, float]:
        """Least-squares slope and intercept of log10 residual against log10 t."""
        r = self.residual
        mask = np.array([include_skipped or not s for s in self.skipped]) & (r > 0) & np.isfinite(r)
        if mask.sum() < 2:
            return float("nan"), float("nan")
        slope, intercept = np.polyfit(np.log10(np.array(self.t)[mask]), np.log10(r[mask]), 1)
        return float(slope), float(intercept)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "residual_q", "residual_p", "skipped_flag"])
        for row in zip(self.t, self.residual_q, self.residual_p, self.skipped):
            w.writerow([repr(row[0]), repr(float(row[1])), repr(float(row[2])), int(row[3])])
        return buf.getvalue()

    def summary(self) -> dict:
        slope, intercept = self.fit()
        slope_all, intercept_all = self.fit(include_skipped=True)
        return {"mode": self.mode, "slope": slope, "intercept": intercept,
                "slope_all": slope_all, "intercept_all": intercept_all,
                "skipped": [{"t": t, "reason": why} for t, s, why in
                            zip(self.t, self.skipped, self.reasons) if s]}


def _sweep(config: DegenerationConfig, pt: PQPoint, compare) -> DegenerationResult:
    out = DegenerationResult(config.mode)
    q, ptil = complex(pt.qv), complex(pt.pv)
    for t in config.t_values:
        reason = ""
        try:
            embed_to_dpvi(config, t)
        except DegenerationError as exc:
            reason = str(exc)
        rq, rp = compare(q, ptil, t)
        out.t.append(t)
        out.residual_q.append(rq)
        out.residual_p.append(rp)
        out.skipped.append(bool(reason))
        out.reasons.append(reason)
    return out


def dpv_limit_residual(config: DegenerationConfig, pt: PQPoint) -> DegenerationResult:
    """Compare the rescaled dPVI step at theta(t) with dPV at theta~; pt carries (q, p~)."""
    if config.mode != "to_dPV":
        raise DegenerationError("mode must be to_dPV")
    ref = dpv_step(config.theta_tilde, pt).point_out
    q_ref, p_ref = complex(ref.qv), complex(ref.pv)

    def compare(q, ptil, t):
        q1, p1 = dpv_limit_point(config.theta_tilde, q, ptil, t)
        return abs(q1 - q_ref), abs(p1 - p_ref)

    return _sweep(config, pt, compare)


def pvi_limit_residual(config: DegenerationConfig, pt: PQPoint) -> DegenerationResult:
    """Compare the difference quotient of dPVI at theta(t) with the PVI field, drho = (1, 1)."""
    if config.mode != "to_PVI":
        raise DegenerationError("mode must be to_PVI")
    q, ptil = complex(pt.qv), complex(pt.pv)
    fq, fp = pvi_vector_field(FlowState(config.theta_tilde, q, ptil), (1.0, 1.0))

    def compare(q, ptil, t):
        dq, dp = pvi_limit_quotient(config.theta_tilde, q, ptil, t)
        return abs(dq - fq), abs(dp - fp)

    return _sweep(config, pt, compare)


def run_degeneration(config: DegenerationConfig, pt: PQPoint) -> DegenerationResult:
    if config.mode == "to_dPV":
        return dpv_limit_residual(config, pt)
    return pvi_limit_residual(config, pt)
