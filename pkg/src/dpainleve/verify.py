"""Random sampling of valid inputs and the property battery behind ``verify``."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .algebra import LaurentTail, Poly
from .connection import (THETA_STAR, THETA_VI_STAR, DConn, DConnError, PQPoint, ThetaV,
                         ThetaVI, coordinates_of, formal_type, from_coordinates, p_tilde_of,
                         random_gauge, validate_theta)
from .degeneration import DegenerationConfig, dpv_limit_residual, pvi_limit_residual
from .flow import (FlowState, RhoPath, epsilon_deformation_field, integrate_flow,
                   pvi_ode_residual, pvi_vector_field)
from .maps import (MapError, asymmetric_errors_exact, asymmetric_form, dpv_step, dpv_step_inverse, dpvi_step,
                   dpvi_step_inverse)
from .modification import IntertwinerError, check_step, scalar_multiply

RESONANCE_MARGIN = 1e-3


# ---------------------------------------------------------------------------
# sampling

def _cx(rng, re=1.0, im=0.5) -> complex:
    return complex(rng.uniform(-re, re), rng.uniform(-im, im))


def _dist_to_integer(x: complex) -> float:
    return abs(complex(x.real - round(x.real), x.imag))


def resonance_distance(theta) -> float:
    """Smallest distance of the nondegeneracy quantities to the integers."""
    k = len(theta.a)
    out = float("inf")
    for dj in theta.d:
        for r in range(k + 1):
            for sub in itertools.combinations(range(k), r):
                out = min(out, _dist_to_integer(-dj - sum(theta.a[i] for i in sub)))
    for i, j in itertools.combinations(range(k), 2):
        out = min(out, _dist_to_integer(theta.a[i] - theta.a[j]))
    return out


def random_theta_v(rng: np.random.Generator) -> ThetaV:
    while True:
        a = [_cx(rng) for _ in range(4)]
        mods = rng.uniform(0.5, 2.0, 2)
        angs = rng.uniform(-np.pi, np.pi, 2)
        rho = tuple(m * np.exp(1j * g) for m, g in zip(mods, angs))
        if abs(rho[0] - rho[1]) < 0.3:
            continue
        d1 = _cx(rng, 1.5)
        d2 = 1 - sum(a) - d1
        theta = ThetaV(a, rho, (d1, d2))
        if resonance_distance(theta) >= RESONANCE_MARGIN and validate_theta(theta).ok:
            return theta


def random_theta_vi(rng: np.random.Generator, rho: complex = 1.0) -> ThetaVI:
    while True:
        a = [_cx(rng) for _ in range(6)]
        d1 = _cx(rng, 1.5)
        d2 = 1 - sum(a) - d1
        if abs(d1 - d2) < 0.3:
            continue
        theta = ThetaVI(a, (d1, d2), rho)
        if resonance_distance(theta) >= RESONANCE_MARGIN and validate_theta(theta).ok:
            return theta


def random_point(rng: np.random.Generator, theta) -> PQPoint:
    """Interior point kept away from the special values of both steps."""
    rhos = theta.rhos
    while True:
        q = _cx(rng, 1.5, 1.0)
        p = rng.uniform(0.3, 3.0) * np.exp(1j * rng.uniform(-np.pi, np.pi)) * abs(rhos[0])
        if min(abs(q - a) for a in theta.a) < 0.05:
            continue
        if min(abs(p - r) for r in rhos) < 0.1 * abs(rhos[0]):
            continue
        pt = PQPoint.of(q, p)
        try:
            from_coordinates(theta, q, p)
            step = dpv_step if theta.cls == "V" else dpvi_step
            out = step(theta, pt).point_out
        except (DConnError, MapError):
            continue
        if out.chart != "interior":
            continue
        qo, po = complex(out.qv), complex(out.pv)
        if abs(qo) > 50 or not (1e-3 < abs(po) < 1e3):
            continue
        if min(abs(qo - a) for a in theta.shifted().a) < 1e-3:
            continue
        return pt


# ---------------------------------------------------------------------------
# properties

@dataclass
class PropertyResult:
    name: str
    passed: bool
    metric: float
    threshold: float
    samples: int
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: metric={self.metric:.3e} threshold={self.threshold:.1e} samples={self.samples}"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "metric": self.metric,
                "threshold": self.threshold, "samples": self.samples, "detail": self.detail}


def _rel(x: complex, y: complex) -> float:
    return abs(x - y) / max(1.0, abs(y))


def oracle_equivalence(cls: str, samples: int, seed: int) -> PropertyResult:
    """The explicit map agrees with the matrix-level modification oracle."""
    rng = np.random.default_rng(seed)
    worst_res = worst_roots = 0.0
    bad = []
    for i in range(samples):
        theta = random_theta_v(rng) if cls == "V" else random_theta_vi(rng)
        pt = random_point(rng, theta)
        rec = (dpv_step if cls == "V" else dpvi_step)(theta, pt)
        try:
            sol = check_step(theta, pt, rec.theta_out, rec.point_out)
        except IntertwinerError as exc:
            bad.append({"sample": i, "kernel_dim": exc.kernel_dim})
            continue
        err = sol.det_roots_match(theta.a[:2])
        worst_res = max(worst_res, sol.residual)
        worst_roots = max(worst_roots, err)
        if sol.residual >= 1e-8 or err >= 1e-7:
            bad.append({"sample": i, "residual": sol.residual, "root_error": err})
    name = "dpv_oracle" if cls == "V" else "dpvi_oracle"
    return PropertyResult(name, not bad, worst_res, 1e-8, samples,
                          {"max_root_error": worst_roots, "failures": bad[:5], "n_failures": len(bad)})


def roundtrips(cls: str, samples: int, seed: int) -> PropertyResult:
    rng = np.random.default_rng(seed)
    step, inv = (dpv_step, dpv_step_inverse) if cls == "V" else (dpvi_step, dpvi_step_inverse)
    worst = 0.0
    for _ in range(samples):
        theta = random_theta_v(rng) if cls == "V" else random_theta_vi(rng)
        pt = random_point(rng, theta)
        rec = step(theta, pt)
        back = inv(rec.theta_out, rec.point_out)
        worst = max(worst, _rel(back.qv, pt.qv), _rel(back.pv, pt.pv))
        # forward after inverse, starting from the image point
        again = step(theta, back).point_out
        worst = max(worst, _rel(again.qv, rec.point_out.qv), _rel(again.pv, rec.point_out.pv))
    name = "dpv_roundtrip" if cls == "V" else "dpvi_roundtrip"
    return PropertyResult(name, worst < 1e-8, worst, 1e-8, samples)


def gauge_invariance(samples: int, gauges: int, seed: int) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        theta = random_theta_v(rng) if i % 2 == 0 else random_theta_vi(rng)
        pt = random_point(rng, theta)
        conn = from_coordinates(theta, pt.q, pt.p)
        q0, p0 = p_tilde_of(conn)
        for _ in range(gauges):
            q1, p1 = p_tilde_of(conn.gauge(random_gauge(rng)))
            worst = max(worst, _rel(q1, q0), _rel(p1, p0))
    return PropertyResult("gauge_invariance", worst < 1e-10, worst, 1e-10, samples * gauges)


def _plant_tail(rng, kind: str, N: int = 10):
    """A = R(z+1) D R(z)^-1 with R = C (1 + X/z); returns (tail, rho, d)."""
    while True:
        C = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        if np.linalg.cond(C) < 20:
            break
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    if kind == "V":
        n = 2
        while True:
            rho = [complex(*rng.uniform(-2, 2, 2)) for _ in range(2)]
            if min(abs(r) for r in rho) > 0.3 and abs(rho[0] - rho[1]) > 0.3:
                break
    else:
        n = 3
        r0 = complex(*rng.uniform(-2, 2, 2))
        if abs(r0) < 0.3:
            r0 = 1.0
        rho = [r0, r0]
    while True:
        d = [complex(*rng.uniform(-1.5, 1.5, 2)) for _ in range(2)]
        if abs(d[0] - d[1]) > 0.3 and _dist_to_integer(d[0] - d[1]) > 0.05:
            break
    zero = np.zeros((2, 2), dtype=complex)
    Dt = LaurentTail(n, tuple([np.diag(rho), np.diag([r * x for r, x in zip(rho, d)])] + [zero] * (N - 1)))
    R = LaurentTail(0, tuple([C, C @ X] + [zero] * (N - 1)))
    A = R.shift() @ Dt @ R.inverse()
    return A, rho, d


def _matched_error(got_rho, got_d, rho, d) -> float:
    best = float("inf")
    for perm in itertools.permutations(range(2)):
        err = max(max(abs(got_rho[i] - rho[j]), abs(got_d[i] - d[j])) for i, j in enumerate(perm))
        best = min(best, err)
    return best


def formal_type_recovery(samples: int, seed: int) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = {"V": 0.0, "VI": 0.0}
    for i in range(samples):
        for kind in ("V", "VI"):
            A, rho, d = _plant_tail(rng, kind)
            ft = formal_type(A)
            worst[kind] = max(worst[kind], _matched_error(ft.rho, ft.d, rho, d))
    ok = worst["V"] < 1e-10 and worst["VI"] < 1e-8
    return PropertyResult("formal_type_recovery", ok, worst["V"], 1e-10, samples,
                          {"max_error_VI": worst["VI"], "threshold_VI": 1e-8})


def field_agreement(samples: int, seed: int) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = worst_lin = 0.0
    for _ in range(samples):
        theta = random_theta_v(rng)
        pt = random_point(rng, theta)
        drho = (_cx(rng, 1, 1), _cx(rng, 1, 1))
        st = FlowState(theta, complex(pt.qv), complex(pt.pv))
        f = pvi_vector_field(st, drho)
        g = epsilon_deformation_field(theta, pt, drho)
        worst = max(worst, _rel(f[0], g[0]), _rel(f[1], g[1]))
        u, v = (_cx(rng, 1, 1), _cx(rng, 1, 1)), (_cx(rng, 1, 1), _cx(rng, 1, 1))
        al, be = _cx(rng, 1, 1), _cx(rng, 1, 1)
        fu, fv = pvi_vector_field(st, u), pvi_vector_field(st, v)
        fw = pvi_vector_field(st, (al * u[0] + be * v[0], al * u[1] + be * v[1]))
        for k in range(2):
            scale = max(1.0, abs(al * fu[k]), abs(be * fv[k]))
            worst_lin = max(worst_lin, abs(fw[k] - al * fu[k] - be * fv[k]) / scale)
    ok = worst < 1e-8 and worst_lin < 1e-12
    return PropertyResult("field_agreement", ok, worst, 1e-8, samples, {"superposition": worst_lin})


def canonical_path() -> RhoPath:
    return RhoPath.segment((1.0, 2.0), (1.2 + 0.1j, 2.4 - 0.05j), 0.0, 0.5)


def pvi_ode(steps: int = 500) -> PropertyResult:
    st = FlowState(THETA_STAR, 0.3, 0.7)
    traj = integrate_flow(st, canonical_path(), steps)
    rep = pvi_ode_residual(traj)
    return PropertyResult("pvi_ode", rep.max_residual < 1e-4, rep.max_residual, 1e-4, len(traj),
                          {"hamiltonian_residual": rep.hamiltonian_residual,
                           "step": (canonical_path().t1 - canonical_path().t0) / steps})


def degeneration(mode: str, theta: ThetaV = THETA_STAR, pt=(0.3, 0.7)) -> PropertyResult:
    cfg = DegenerationConfig(theta, mode=mode)
    point = PQPoint.of(*pt)
    res = dpv_limit_residual(cfg, point) if mode == "to_dPV" else pvi_limit_residual(cfg, point)
    slope, intercept = res.fit()
    ok = 0.85 <= slope <= 1.15
    detail = res.summary()
    if mode == "to_dPV":
        tiny = dpv_limit_residual(DegenerationConfig(theta, (1e-8,), mode), point).residual[0]
        detail["residual_1e-8"] = float(tiny)
        ok = ok and tiny < 1e-6
    return PropertyResult(f"degeneration_{mode}", bool(ok), slope, 0.15, len(res.t), detail)


def asymmetric_orbit(steps: int = 50, theta: ThetaVI = THETA_VI_STAR, pt=(0.45, 0.6)) -> PropertyResult:
    """Relations checked at every state of the orbit; the metric is the plain relative error
    with the step evaluated in extended precision, the double-precision figures are reported."""
    point = PQPoint.of(*pt)
    worst = worst_plain = worst_scaled = 0.0
    done = 0
    for _ in range(steps):
        worst = max(worst, *asymmetric_errors_exact(theta, point))
        form = asymmetric_form(theta, point)
        worst_scaled = max(worst_scaled, *form.scaled_errors)
        worst_plain = max(worst_plain, *form.errors)
        rec = dpvi_step(theta, point)
        theta, point = rec.theta_out, rec.point_out
        done += 1
    return PropertyResult("asymmetric_form", worst < 1e-7, worst, 1e-7, done,
                          {"double_plain_relative": worst_plain, "double_scaled": worst_scaled})


def scalar_equivariance(samples: int, seed: int) -> PropertyResult:
    rng = np.random.default_rng(seed)
    theta, pt = THETA_STAR, PQPoint.of(0.3, 0.7)
    base = dpv_step(theta, pt).point_out
    conn = from_coordinates(theta, pt.q, pt.p)
    worst = 0.0
    for _ in range(samples):
        c = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(-np.pi, np.pi))
        scaled = scalar_multiply(conn, c)
        spt = coordinates_of(scaled)
        worst = max(worst, _rel(spt.qv, pt.qv), _rel(spt.pv, c * pt.pv))
        out = dpv_step(scaled.theta, spt).point_out
        worst = max(worst, _rel(out.qv, base.qv), _rel(out.pv, c * base.pv))
    return PropertyResult("scalar_equivariance", worst < 1e-9, worst, 1e-9, samples)


@dataclass(frozen=True)
class Battery:
    oracle: int = 1000
    roundtrip: int = 500
    gauge_samples: int = 100
    gauges: int = 100
    formal: int = 200
    field: int = 200
    scalar: int = 100
    ode_steps: int = 500
    orbit: int = 50

    @classmethod
    def quick(cls) -> Battery:
        return cls(oracle=50, roundtrip=50, gauge_samples=10, gauges=5, formal=50, field=50,
                   scalar=50, ode_steps=500, orbit=50)


def run_battery(battery: Battery, seed: int, theta_v: ThetaV | None = None,
                theta_vi: ThetaVI | None = None) -> list[PropertyResult]:
    """Every property, each with its own deterministic sub-seed."""
    seeds = np.random.SeedSequence(seed).generate_state(8)
    tv = theta_v or THETA_STAR
    tvi = theta_vi or THETA_VI_STAR
    return [
        oracle_equivalence("V", battery.oracle, int(seeds[0])),
        oracle_equivalence("VI", battery.oracle, int(seeds[1])),
        roundtrips("V", battery.roundtrip, int(seeds[2])),
        roundtrips("VI", battery.roundtrip, int(seeds[3])),
        gauge_invariance(battery.gauge_samples, battery.gauges, int(seeds[4])),
        formal_type_recovery(battery.formal, int(seeds[5])),
        field_agreement(battery.field, int(seeds[6])),
        pvi_ode(battery.ode_steps),
        degeneration("to_dPV", tv),
        degeneration("to_PVI", tv),
        asymmetric_orbit(battery.orbit, tvi),
        scalar_equivariance(battery.scalar, int(seeds[7])),
    ]
