"""The dPV and dPVI maps on (q, p), their inverses and the asymmetric form of dPVI.

All forward formulas are written in cleared-denominator form on pairs
(numerator, denominator) using only +, -, *, so they run unchanged on complex,
mpmath and dual numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import mpmath
import numpy as np

from .algebra import DualCx, Majorant, ProjVal, dist_chordal, majorants, tol
from .connection import PQPoint, Theta, ThetaV, ThetaVI, classify
from .modification import IntertwinerSolution


class MapError(ValueError):
    pass


class IndeterminatePoint(MapError):
    def __init__(self, factor: str):
        super().__init__(f"indeterminate point ({factor})")
        self.factor = factor


@dataclass(frozen=True)
class StepRecord:
    theta_in: Theta
    theta_out: Theta
    point_in: PQPoint
    point_out: PQPoint
    oracle: IntertwinerSolution | None = None

    def to_json(self, step: int) -> str:
        return json.dumps(step_record_dict(step, self.point_out, self.oracle))


def step_record_dict(step: int, pt: PQPoint, oracle: IntertwinerSolution | None = None) -> dict:
    return {"step": step, "q": pt.q.normalized().to_list(), "p": pt.p.normalized().to_list(),
            "residual": None if oracle is None else oracle.residual, "chart": pt.chart}


# ---------------------------------------------------------------------------
# homogeneous helpers

def _unit(pair):
    """Scale a homogeneous pair to max modulus 1 (a no-op scale for exact types)."""
    n, d = pair
    s = max(abs(n), abs(d))
    return n / s, d / s


def _check_pair(pair, bound, factor: str):
    """0/0 test: both entries cancel to below tolerance relative to their majorants."""
    (num, den), (mn, md) = pair, bound
    eps = tol("indeterminate")
    if abs(num) <= eps * abs(mn) and abs(den) <= eps * abs(md):
        raise IndeterminatePoint(factor)
    return num, den


def _mpair(pair) -> tuple:
    return Majorant(pair[0]), Majorant(pair[1])


def _point(theta: Theta, q: ProjVal, p: ProjVal) -> PQPoint:
    return PQPoint(q.normalized(), p.normalized(), classify(theta, q, p))


def _pair(x) -> tuple:
    v = ProjVal.of(x)
    return v.num, v.den


# ---------------------------------------------------------------------------
# dPV

def dpv_formula(a, rho, d, q, p):
    """One dPV step on homogeneous pairs q = (qn, qd), p = (pn, pd).

    q' + q = a3 + a4 + rho1 k1/(p - rho1) + rho2 k2/(p - rho2), kj = dj + a3 + a4,
    p' p = rho1 rho2 (q' - a1 + 1)(q' - a2 + 1)/((q' - a3)(q' - a4)).
    Returns ((q'n, q'd), (p'n, p'd)).
    """
    a1, a2, a3, a4 = a
    r1, r2 = rho
    d1, d2 = d
    qn, qd = q
    pn, pd = p
    k1 = d1 + a3 + a4
    k2 = d2 + a3 + a4
    e1 = pn - r1 * pd
    e2 = pn - r2 * pd
    num = ((a3 + a4) * qd - qn) * e1 * e2 + qd * pd * (r1 * k1 * e2 + r2 * k2 * e1)
    den = qd * e1 * e2
    return (num, den), dpv_p_formula(a, rho, (num, den), p)


def dpv_p_formula(a, rho, q_out, p):
    a1, a2, a3, a4 = a
    r1, r2 = rho
    n, d = q_out
    pn, pd = p
    pnum = r1 * r2 * (n - (a1 - 1) * d) * (n - (a2 - 1) * d) * pd
    pden = (n - a3 * d) * (n - a4 * d) * pn
    return pnum, pden


def dpv_step(theta: ThetaV, pt: PQPoint) -> StepRecord:
    if pt.chart == "exceptional":
        raise IndeterminatePoint("exceptional input")
    a, rho, d = majorants(theta.a), majorants(theta.rho), majorants(theta.d)
    q = _unit(_pair(pt.q))
    p = _unit(_pair(pt.p))
    (qn, qd), _ = dpv_formula(theta.a, theta.rho, theta.d, q, p)
    bound, _ = dpv_formula(a, rho, d, _mpair(q), _mpair(p))
    _check_pair((qn, qd), bound, "q' = 0/0 at p = rho_j and q = infinity")
    qo = _unit((qn, qd))
    pn, pd = dpv_p_formula(theta.a, theta.rho, qo, p)
    _check_pair((pn, pd), dpv_p_formula(a, rho, _mpair(qo), _mpair(p)), "p' = 0/0")
    theta_out = theta.shifted()
    out = _point(theta_out, ProjVal(*qo), ProjVal(pn, pd))
    return StepRecord(theta, theta_out, pt, out)


def dpv_step_inverse(theta_out: ThetaV, pt_out: PQPoint) -> PQPoint:
    """Undo one dPV step; theta_out is the shifted parameter tuple."""
    theta = theta_out.shifted(-1)
    a, rho, d = majorants(theta.a), majorants(theta.rho), majorants(theta.d)
    qo = _unit(_pair(pt_out.q))
    po = _unit(_pair(pt_out.p))
    p = dpv_p_formula(theta.a, theta.rho, qo, po)
    _check_pair(p, dpv_p_formula(a, rho, _mpair(qo), _mpair(po)), "p = 0/0")
    p = _unit(p)
    # the first line is symmetric in q and q'
    (qn, qd), _ = dpv_formula(theta.a, theta.rho, theta.d, qo, p)
    bound, _ = dpv_formula(a, rho, d, _mpair(qo), _mpair(p))
    _check_pair((qn, qd), bound, "q = 0/0")
    return _point(theta, ProjVal(qn, qd), ProjVal(*p))


# ---------------------------------------------------------------------------
# dPVI

def dpvi_cj(a, d):
    """The two residue coefficients c1, c2 of the first dPVI line."""
    a1, a2, _, a4, a5, a6 = a
    out = []
    for j in range(2):
        dj, dk = d[j], d[1 - j]
        s = dj + a1 + a2 - 1
        out.append((s + a4) * (s + a5) * (s + a6) / (dj - dk))
    return out


def dpvi_formula(a, d, q, p, rho=1):
    """One dPVI step on homogeneous pairs (rho = 1 normal form; rho rescales p).

    Returns ((q'n, q'd), (p'n, p'd)).
    """
    a1, a2, a3, a4, a5, a6 = a
    qn, qd = q
    pn, pd = p
    pd = pd * rho
    c1, c2 = dpvi_cj(a, d)
    s1 = 1 - a1 - a2 - d[0]
    s2 = 1 - a1 - a2 - d[1]
    dp = pn - pd
    L1 = dp * qn - pn * s1 * qd + a3 * pd * qd
    L2 = dp * qn - pn * s2 * qd + a3 * pd * qd
    num = (dp * ((1 - a1 - a2) * qd + qn) * L1 * L2 + pn * a3 * qd * L1 * L2
           + c1 * pn * dp * qd * qd * L2 + c2 * pn * dp * qd * qd * L1)
    den = pd * qd * L1 * L2
    return (num, den), dpvi_p_formula(a, (num, den), q, (pn, pd), rho)


def dpvi_p_formula(a, q_out, q, p, rho=1):
    """Second dPVI line; p is already in the rho = 1 scaling."""
    a1, a2, a3, a4, a5, a6 = a
    n, d = q_out
    qn, qd = q
    pn, pd = p
    bracket = (pn - pd) * (n * qd - qn * d) + pd * qd * (n - a3 * d)
    pnum = (n - (a1 - 1) * d) * (n - (a2 - 1) * d) * bracket * rho
    pden = (n - a4 * d) * (n - a5 * d) * (n - a6 * d) * qd * pn
    return pnum, pden


def _on_collapse_line(theta: ThetaVI, p: ProjVal) -> bool:
    pv = ProjVal(p.num, p.den * theta.rho)
    return dist_chordal(pv, ProjVal(1.0, 1.0)) < tol("boundary")


def dpvi_step(theta: ThetaVI, pt: PQPoint) -> StepRecord:
    if pt.chart == "exceptional":
        raise IndeterminatePoint("exceptional input")
    if abs(theta.d[0] - theta.d[1]) < tol("integer"):
        raise MapError("d1 = d2: residue coefficients undefined")
    a, d, rho = majorants(theta.a), majorants(theta.d), Majorant(theta.rho)
    q = _unit(_pair(pt.q))
    p = _unit(_pair(pt.p))
    (qn, qd), _ = dpvi_formula(theta.a, theta.d, q, p, theta.rho)
    bound, _ = dpvi_formula(a, d, _mpair(q), _mpair(p), rho)
    _check_pair((qn, qd), bound, "q' = 0/0")
    qo = _unit((qn, qd))
    pn, pd = dpvi_p_formula(theta.a, qo, q, (p[0], p[1] * theta.rho), theta.rho)
    mp = _mpair(p)
    bound = dpvi_p_formula(a, _mpair(qo), _mpair(q), (mp[0], mp[1] * rho), rho)
    _check_pair((pn, pd), bound, "p' = 0/0")
    theta_out = theta.shifted()
    out = _point(theta_out, ProjVal(*qo), ProjVal(pn, pd))
    if _on_collapse_line(theta, ProjVal(*p)):
        # the line p = rho is contracted onto a blow-up center
        out = PQPoint(out.q, out.p, "exceptional")
    return StepRecord(theta, theta_out, pt, out)


def _dpvi_forward_values(theta: ThetaVI, q, p):
    """Affine forward map for Newton polishing; works on complex and dual numbers."""
    (n, d), (pn, pd) = dpvi_formula(theta.a, theta.d, (q, 1.0), (p, 1.0), theta.rho)
    return n / d, pn / pd


def dpvi_step_inverse(theta_out: ThetaVI, pt_out: PQPoint) -> PQPoint:
    """Undo one dPVI step by solving the first line for q (a cubic) given p(q) from the second."""
    theta = theta_out.shifted(-1)
    if pt_out.q.is_infinite(0.0) or pt_out.p.is_infinite(0.0) or pt_out.p.is_zero(0.0):
        raise IndeterminatePoint("inverse needs finite nonzero p' and finite q'")
    rho = theta.rho
    qo = complex(pt_out.q.value())
    po = complex(pt_out.p.value()) / rho
    a1, a2, a3, a4, a5, a6 = theta.a
    c1, c2 = dpvi_cj(theta.a, theta.d)
    s1 = 1 - a1 - a2 - theta.d[0]
    s2 = 1 - a1 - a2 - theta.d[1]
    F = (qo - a1 + 1) * (qo - a2 + 1) / ((qo - a4) * (qo - a5) * (qo - a6))
    K = F * (qo - a3) - po
    P = np.polynomial.Polynomial
    Dq = P([po - F * qo, F])      # p = N/Dq, p - 1 = K/Dq
    N = Dq + K
    L1 = P([0, K]) - N * s1 + Dq * a3
    L2 = P([0, K]) - N * s2 + Dq * a3
    lhs = qo * Dq * L1 * L2
    rhs = (K * P([1 - a1 - a2, 1]) + N * a3) * L1 * L2 + c1 * N * K * L2 + c2 * N * K * L1
    cubic = lhs - rhs
    coef = np.trim_zeros(cubic.coef, "b")
    roots = np.roots(coef[::-1]) if coef.size > 1 else np.zeros(0)
    best = None
    for q in roots:
        dq = Dq(q)
        if dq == 0:
            continue
        p = N(q) / dq * rho      # back to the rho scaling of the forward map
        if p == 0:
            continue
        q, p = _newton_polish(theta, complex(q), complex(p), qo, po * rho)
        try:
            fq, fp = _dpvi_forward_values(theta, q, p)
        except ZeroDivisionError:
            continue
        err = max(abs(fq - qo) / max(1.0, abs(qo)), abs(fp - po * rho) / max(1.0, abs(po * rho)))
        if best is None or err < best[0]:
            best = (err, q, p)
    if best is None or best[0] > 1e-7:
        raise MapError("no consistent root")
    _, q, p = best
    return _point(theta, ProjVal(q, 1.0), ProjVal(p, 1.0))


def _newton_polish(theta: ThetaVI, q: complex, p: complex, qo: complex, po: complex,
                   iters: int = 3) -> tuple[complex, complex]:
    """Polish (q, p) against the forward map; Jacobian columns from dual numbers."""
    for _ in range(iters):
        try:
            f = _dpvi_forward_values(theta, q, p)
            jq = _dpvi_forward_values(theta, DualCx(q, 1.0), DualCx(p, 0.0))
            jp = _dpvi_forward_values(theta, DualCx(q, 0.0), DualCx(p, 1.0))
        except ZeroDivisionError:
            break
        J = np.array([[jq[0].eps, jp[0].eps], [jq[1].eps, jp[1].eps]], dtype=complex)
        r = np.array([f[0] - qo, f[1] - po], dtype=complex)
        try:
            dq, dp = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        q, p = q + dq, p + dp
        if abs(dq) + abs(dp) < 1e-15 * (abs(q) + abs(p)):
            break
    return q, p


# ---------------------------------------------------------------------------
# asymmetric form

@dataclass(frozen=True)
class AsymmetricForm:
    r: complex
    r_prime: complex
    q_prime: complex
    lhs1: complex
    rhs1: complex
    lhs2: complex
    rhs2: complex
    scale1: float = 0.0
    scale2: float = 0.0

    @staticmethod
    def _rel(x: complex, y: complex) -> float:
        return abs(x - y) / max(abs(x), abs(y), 1e-300)

    @property
    def errors(self) -> tuple[float, float]:
        """Plain relative errors; these lose digits when q + r cancels."""
        return self._rel(self.lhs1, self.rhs1), self._rel(self.lhs2, self.rhs2)

    @property
    def scaled_errors(self) -> tuple[float, float]:
        """Errors relative to the term majorants of each side."""
        return (abs(self.lhs1 - self.rhs1) / max(self.scale1, 1e-300),
                abs(self.lhs2 - self.rhs2) / max(self.scale2, 1e-300))


def r_of(theta: ThetaVI, q: complex, p: complex) -> complex:
    """r = (q - a3)/p - q, with p in the rho = 1 scaling."""
    if p == 0:
        raise MapError("pole of substitution")
    return (q - theta.a[2]) / p - q


def p_of_r(theta: ThetaVI, q: complex, r: complex) -> complex:
    if q + r == 0:
        raise MapError("pole of substitution")
    return (q - theta.a[2]) / (q + r)


def asymmetric_form(theta: ThetaVI, pt: PQPoint) -> AsymmetricForm:
    """Evaluate both product relations of the r = (q - a3)/p - q form."""
    # relations are stated in the rho = 1 scaling of p
    q, p = complex(pt.qv), complex(pt.pv) / theta.rho
    if pt.p.is_zero(0.0):
        raise MapError("pole of substitution")
    rec = dpvi_step(theta, pt)
    q1, p1 = complex(rec.point_out.qv), complex(rec.point_out.pv) / theta.rho
    if rec.point_out.p.is_zero(0.0):
        raise MapError("pole of substitution")
    return _asymmetric_terms(theta.a, theta.d, q, p, q1, p1)


def _asymmetric_terms(a, d, q, p, q1, p1) -> AsymmetricForm:
    """Both relations in generic arithmetic (complex or mpmath)."""
    a1, a2, a3, a4, a5, a6 = a
    d1, d2 = d
    r = (q - a3) / p - q
    r1 = (q1 - a3) / p1 - q1
    lhs1 = (q + r) * (q1 + r)
    rhs1 = (r + a3) * (r + a4) * (r + a5) * (r + a6) / ((r + 1 - a1 - a2 - d1) * (r + 1 - a1 - a2 - d2))
    lhs2 = (q1 + r) * (q1 + r1)
    rhs2 = (q1 - a3) * (q1 - a4) * (q1 - a5) * (q1 - a6) / ((q1 - (a1 - 1)) * (q1 - (a2 - 1)))
    M = Majorant
    s1 = max(abs((M(q) + r) * (M(q1) + r)),
             abs((M(r) + a3) * (M(r) + a4) * (M(r) + a5) * (M(r) + a6))
             / abs((r + 1 - a1 - a2 - d1) * (r + 1 - a1 - a2 - d2)))
    s2 = max(abs((M(q1) + r) * (M(q1) + r1)),
             abs((M(q1) + a3) * (M(q1) + a4) * (M(q1) + a5) * (M(q1) + a6))
             / abs((q1 - (a1 - 1)) * (q1 - (a2 - 1))))
    return AsymmetricForm(r, r1, q1, lhs1, rhs1, lhs2, rhs2, s1, s2)


def asymmetric_errors_exact(theta: ThetaVI, pt: PQPoint, dps: int = 50) -> tuple[float, float]:
    """Plain relative errors of both relations with the step taken in ``dps``-digit arithmetic.

    d2 is re-closed from deg = -1 at this precision: relation one is sensitive to the
    closure."""
    if pt.p.is_zero(0.0) or pt.p.is_infinite(0.0) or pt.q.is_infinite(0.0):
        raise MapError("pole of substitution")
    with mpmath.workdps(dps):
        mc = lambda z: mpmath.mpc(complex(z).real, complex(z).imag)
        a = [mc(x) for x in theta.a]
        # close the degree condition in this precision; the stored d2 is only ulp-accurate
        d1 = mc(theta.d[0])
        d = [d1, 1 - sum(a) - d1]
        rho = mc(theta.rho)
        q, p = mc(pt.qv), mc(pt.pv) / rho
        (qn, qd), (pn, pd) = dpvi_formula(a, d, (q, mpmath.mpc(1)), (p, mpmath.mpc(1)), 1)
        q1, p1 = qn / qd, pn / pd
        if p1 == 0:
            raise MapError("pole of substitution")
        f = _asymmetric_terms(a, d, q, p, q1, p1)
        return (float(abs(f.lhs1 - f.rhs1) / max(abs(f.lhs1), abs(f.rhs1))),
                float(abs(f.lhs2 - f.rhs2) / max(abs(f.lhs2), abs(f.rhs2))))
