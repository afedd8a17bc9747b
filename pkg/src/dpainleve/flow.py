"""The PVI flow in rho-space: vector field, dual-number oracle, integration and ODE checks."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import DualCx, Mat2Poly, Poly, poly_shift, tol
from .connection import PQPoint, ThetaV, from_coordinates, is_integer


class FlowError(ValueError):
    pass


class SingularEncounter(FlowError):
    def __init__(self, message: str, partial: "Trajectory"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class FlowState:
    """Point (q, p) of the moduli space for theta with exponents rho; a and d stay fixed."""

    theta: ThetaV
    q: complex
    p: complex

    @property
    def rho(self) -> tuple[complex, complex]:
        return self.theta.rho

    def at(self, rho, q, p) -> FlowState:
        return FlowState(self.theta.with_rho(rho), complex(q), complex(p))


def pvi_vector_field(state: FlowState, drho) -> tuple[complex, complex]:
    """Tangent (dq, dp) of the isomonodromic flow along the direction drho."""
    a1, a2, a3, a4 = state.theta.a
    d1, d2 = state.theta.d
    r1, r2 = state.rho
    q, p = state.q, state.p
    if p == 0 or not np.isfinite(abs(p)):
        raise FlowError("p must be finite and nonzero")
    if r1 == r2:
        raise FlowError("rho1 = rho2")
    dr1, dr2 = drho
    w = (r1 * dr2 - r2 * dr1) / (r1 - r2)
    rr = r1 * r2
    dq = w * (p * (q - a3) * (q - a4) / rr - (q - a1) * (q - a2) / p)
    dp = p * (dr1 - dr2) / (r1 - r2) + w * (
        a1 + a2 - 2 * q + p * p * (a3 + a4 - 2 * q) / rr
        + p * (d1 * r1 + d2 * r2 + 2 * q * (r1 + r2)) / rr)
    return complex(dq), complex(dp)


# ---------------------------------------------------------------------------
# dual-number oracle

_S_PROFILE = ((1, 2), (0, 1))


def _deformation_system(theta: ThetaV, A: Mat2Poly, drho):
    """Affine map S' -> constraints on A^eps = (1 - eps S'(z+1)) A (1 + eps S'(z))."""
    slots = [(i, j, k) for i in range(2) for j in range(2) for k in range(_S_PROFILE[i][j] + 1)]
    r1, r2 = theta.rho
    d1, d2 = theta.d
    dr1, dr2 = drho

    def eps_part(x) -> Mat2Poly:
        coeffs = {(i, j): np.zeros(3, dtype=complex) for i in range(2) for j in range(2)}
        for (i, j, k), v in zip(slots, x):
            coeffs[(i, j)][k] += v
        S = Mat2Poly([[Poly(coeffs[(i, j)], trim=False) for j in range(2)] for i in range(2)])
        return A @ S - S.shift() @ A

    prod = Poly.from_roots(theta.a, dr1 * r2 + r1 * dr2).padded(5)

    def constraints(x) -> np.ndarray:
        E = eps_part(x)
        eqs = []
        # degree profile of a d-connection of the deformed type
        eqs += list(E[1, 0].padded(6)[2:6]) + list(E[0, 0].padded(6)[3:6])
        eqs += list(E[1, 1].padded(6)[3:6]) + list(E[0, 1].padded(6)[4:6])
        det = (E[0, 0] * A[1, 1] + A[0, 0] * E[1, 1] - E[0, 1] * A[1, 0] - A[0, 1] * E[1, 0]).padded(12)
        eqs += list(det[:5] - prod) + list(det[5:12])
        eqs.append(E[0, 0].coeff(2) + E[1, 1].coeff(2) - (dr1 + dr2))
        eqs.append(E[0, 0].coeff(1) + E[1, 1].coeff(1) + E[1, 1].coeff(2) - (d1 * dr1 + d2 * dr2))
        return np.array(eqs, dtype=complex)

    n = len(slots)
    b = constraints(np.zeros(n, dtype=complex))
    M = np.array([constraints(e) - b for e in np.eye(n, dtype=complex)]).T
    return M, b, eps_part


EXPECTED_DEFORMATION_RANK = 4  # the remaining four directions are gauge


@dataclass(frozen=True)
class DeformationSolution:
    dq: complex
    dp: complex
    S: np.ndarray
    rank: int
    residual: float


def solve_deformation(theta: ThetaV, pt: PQPoint, drho, extra=None) -> DeformationSolution:
    """Minimum-norm first-order deformation; ``extra`` adds a vector (for ambiguity tests)."""
    A = from_coordinates(theta, pt.q, pt.p).mat
    M, b, eps_part = _deformation_system(theta, A, drho)
    x, _, rank, sv = np.linalg.lstsq(M, -b, rcond=None)
    rank = int(np.sum(sv > tol("rank") * sv[0]))
    residual = float(np.abs(M @ x + b).max() / max(1.0, np.abs(b).max()))
    if rank < EXPECTED_DEFORMATION_RANK or residual > 1e-8:
        raise FlowError("deformation solve singular")
    if extra is not None:
        x = x + np.asarray(extra, dtype=complex)
    E = eps_part(x)
    a21 = [DualCx(A[1, 0].coeff(k), E[1, 0].coeff(k)) for k in range(2)]
    qd = -a21[0] / a21[1]
    a11 = [DualCx(A[0, 0].coeff(k), E[0, 0].coeff(k)) for k in range(3)]
    a3, a4 = theta.a[2], theta.a[3]
    pd = (a11[0] + a11[1] * qd + a11[2] * qd * qd) / ((qd - a3) * (qd - a4))
    return DeformationSolution(complex(qd.eps), complex(pd.eps), x, rank, residual)


def deformation_kernel(theta: ThetaV, pt: PQPoint, drho) -> np.ndarray:
    """Basis of the null space of the deformation constraints (gauge directions)."""
    A = from_coordinates(theta, pt.q, pt.p).mat
    M, _, _ = _deformation_system(theta, A, drho)
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > tol("rank") * s[0]))
    return vh[rank:].conj()


def epsilon_deformation_field(theta: ThetaV, pt: PQPoint, drho) -> tuple[complex, complex]:
    sol = solve_deformation(theta, pt, drho)
    return sol.dq, sol.dp


# ---------------------------------------------------------------------------
# PVI parameters

@dataclass(frozen=True)
class PViParams:
    x: tuple
    lam: tuple
    kappa: tuple

    @property
    def lam_minus(self) -> tuple:
        return self.lam[0::2]

    @property
    def lam_plus(self) -> tuple:
        return self.lam[1::2]


def pvi_params(x, lam) -> PViParams:
    lam = tuple(complex(v) for v in lam)
    kap = [lam[2 * i + 1] - lam[2 * i] for i in range(4)]
    k0 = 0.5 * (1 - sum(kap))
    return PViParams(tuple(x), lam, tuple([k0] + kap))


def theta_to_pvi_params(theta: ThetaV) -> PViParams:
    a1, a2, a3, a4 = theta.a
    d1, d2 = theta.d
    r1, r2 = theta.rho
    lam = (a1, a2, 0, d1 + a3 + a4, 0, d2 + a3 + a4, -a3, -a4)
    return pvi_params((0, r1, r2, math.inf), lam)


def pvi_nonresonant(params: PViParams) -> bool:
    """kappa_i not integral and no signed sum of the lambda's integral."""
    if any(is_integer(k) for k in params.kappa[1:]):
        return False
    for choice in np.ndindex(2, 2, 2, 2):
        s = sum(params.lam[2 * i + c] for i, c in enumerate(choice))
        if is_integer(s):
            return False
    return True


# ---------------------------------------------------------------------------
# paths and integration

@dataclass(frozen=True)
class RhoPath:
    """A parametrized curve t -> rho(t) on [t0, t1] together with its derivative."""

    rho: Callable[[float], tuple]
    drho: Callable[[float], tuple]
    t0: float = 0.0
    t1: float = 1.0

    @classmethod
    def segment(cls, start, end, t0: float = 0.0, t1: float = 1.0) -> RhoPath:
        s = np.asarray(start, dtype=complex)
        e = np.asarray(end, dtype=complex)
        v = (e - s) / (t1 - t0)
        return cls(lambda t: tuple(s + (t - t0) * v), lambda t: tuple(v), t0, t1)

    @classmethod
    def scalar(cls, rho0, s: complex, t1: float = 1.0) -> RhoPath:
        r0 = np.asarray(rho0, dtype=complex)
        return cls(lambda t: tuple(r0 * np.exp(s * t)), lambda t: tuple(s * r0 * np.exp(s * t)), 0.0, t1)


@dataclass
class Trajectory:
    theta: ThetaV
    t: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    q: list = field(default_factory=list)
    p: list = field(default_factory=list)

    def append(self, t, rho, q, p) -> None:
        self.t.append(float(t))
        self.rho.append((complex(rho[0]), complex(rho[1])))
        self.q.append(complex(q))
        self.p.append(complex(p))

    def __len__(self) -> int:
        return len(self.t)

    def arrays(self):
        rho = np.array(self.rho, dtype=complex).reshape(-1, 2)
        return (np.array(self.t), rho[:, 0], rho[:, 1],
                np.array(self.q, dtype=complex), np.array(self.p, dtype=complex))

    def to_csv(self, residual=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "rho1", "rho2", "q", "p", "residual"])
        for i in range(len(self)):
            r = "" if residual is None or not np.isfinite(residual[i]) else repr(float(residual[i]))
            w.writerow([repr(self.t[i]), fmt_complex(self.rho[i][0]), fmt_complex(self.rho[i][1]),
                        fmt_complex(self.q[i]), fmt_complex(self.p[i]), r])
        return buf.getvalue()


def fmt_complex(z: complex) -> str:
    """Lossless text form readable by complex()."""
    z = complex(z)
    im = repr(z.imag)
    sign = "" if im.startswith("-") else "+"
    return f"{z.real!r}{sign}{im}j"


def _guard(traj: Trajectory, rho, q, p) -> None:
    big = tol("blowup")
    if abs(p) > big or abs(p) < 1 / big or abs(rho[0] - rho[1]) < 1 / big or not np.isfinite(abs(q)) \
            or abs(q) > big or min(abs(rho[0]), abs(rho[1])) < 1 / big:
        raise SingularEncounter("singular encounter", traj)


def _segment_min_gap(r_a, r_b) -> float:
    """Smallest |rho1 - rho2| on the straight segment between two samples."""
    g0 = complex(r_a[0] - r_a[1])
    g1 = complex(r_b[0] - r_b[1])
    dg = g1 - g0
    if dg == 0:
        return abs(g0)
    s = min(1.0, max(0.0, -(g0 * dg.conjugate()).real / abs(dg) ** 2))
    return abs(g0 + s * dg)


def integrate_flow(state: FlowState, path: RhoPath, steps: int) -> Trajectory:
    """Classical RK4 along the path with ``steps`` equal steps."""
    if steps < 1:
        raise FlowError("steps must be positive")
    h = (path.t1 - path.t0) / steps
    traj = Trajectory(state.theta)
    base = state.theta

    def f(t, y):
        rho = path.rho(t)
        st = FlowState(base.with_rho(rho), y[0], y[1])
        try:
            return np.array(pvi_vector_field(st, path.drho(t)), dtype=complex)
        except (FlowError, ZeroDivisionError) as exc:
            raise SingularEncounter("singular encounter", traj) from exc

    t = path.t0
    y = np.array([state.q, state.p], dtype=complex)
    rho0 = path.rho(t)
    _guard(traj, rho0, y[0], y[1])
    traj.append(t, rho0, y[0], y[1])
    for i in range(steps):
        if _segment_min_gap(path.rho(t), path.rho(t + h)) < 1 / tol("blowup"):
            raise SingularEncounter("singular encounter", traj)
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = path.t0 + (i + 1) * h
        rho = path.rho(t)
        _guard(traj, rho, y[0], y[1])
        traj.append(t, rho, y[0], y[1])
    return traj


# ---------------------------------------------------------------------------
# classical PVI checks

# 5-point centered stencils, O(h^4)
_D1 = np.array([1, -8, 0, 8, -1]) / 12.0
_D2 = np.array([-1, 16, -30, 16, -1]) / 12.0


def stencil_derivatives(f: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives at samples 2..n-3."""
    n = len(f)
    win = np.array([f[i - 2: i + 3] for i in range(2, n - 2)])
    return win @ _D1 / h, win @ _D2 / h ** 2


def pvi_rhs(x, y, dy, kappa) -> complex:
    """Right side of the PVI equation for y'' (kappa = (k0, k1, k2, k3, k4))."""
    _, k1, k2, k3, k4 = kappa
    return (0.5 * (1 / y + 1 / (y - 1) + 1 / (y - x)) * dy ** 2
            - (1 / x + 1 / (x - 1) + 1 / (y - x)) * dy
            + 0.5 * y * (y - 1) * (y - x) / (x ** 2 * (x - 1) ** 2)
            * (k4 ** 2 - k1 ** 2 * x / y ** 2 + k2 ** 2 * (x - 1) / (y - 1) ** 2
               + (1 - k3 ** 2) * x * (x - 1) / (y - x) ** 2))


def hamiltonian(i: int, q, pt, x: Sequence, kappa: Sequence):
    """h_i (i = 0, 1, 2 for the finite points x_1, x_2, x_3) in the variables (q, p~)."""
    j, k = [m for m in range(3) if m != i]
    k0, ks, k4 = kappa[0], kappa[1:4], kappa[4]
    qs = [q - xm for xm in x[:3]]
    num = (qs[0] * qs[1] * qs[2] * pt * pt
           - ((ks[i] - 1) * qs[j] * qs[k] + ks[j] * qs[i] * qs[k] + ks[k] * qs[i] * qs[j]) * pt
           + k0 * (k0 + k4) * qs[i])
    return num / ((x[i] - x[j]) * (x[i] - x[k]))


def hamiltonian_flow(q, pt, x, dx, kappa) -> tuple[complex, complex]:
    """Velocity of (q, p~) when the finite points move with velocity dx."""
    dq = dpt = 0j
    for i in range(3):
        if dx[i] == 0:
            continue
        hq = hamiltonian(i, DualCx(q, 1.0), pt, x, kappa)
        hp = hamiltonian(i, q, DualCx(pt, 1.0), x, kappa)
        dq += hp.eps * dx[i]
        dpt += -hq.eps * dx[i]
    return complex(dq), complex(dpt)


@dataclass(frozen=True)
class OdeResidualReport:
    max_residual: float
    residual: np.ndarray
    hamiltonian_residual: float
    kappa: tuple

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "hamiltonian_residual": self.hamiltonian_residual,
                "kappa": [[complex(k).real, complex(k).imag] for k in self.kappa]}


def pvi_ode_residual(traj: Trajectory) -> OdeResidualReport:
    """Residual of the PVI equation for y = p/rho1 against x = rho2/rho1 along the trajectory.

    Also checks the Hamiltonian system for (q_PVI, p~_PVI) = (p, (q - a1)/p) with
    x = (0, rho1, rho2).
    """
    n = len(traj)
    if n < 5:
        raise FlowError("trajectory too short")
    t, r1, r2, q, p = traj.arrays()
    h = float(t[1] - t[0])
    params = theta_to_pvi_params(traj.theta)
    kappa = params.kappa
    x = r2 / r1
    y = p / r1
    xt, xtt = stencil_derivatives(x, h)
    yt, ytt = stencil_derivatives(y, h)
    X = x[2:-2]
    Y = y[2:-2]
    res = np.full(n, np.nan)
    # the equation is in x; samples where x does not move (scalar directions) carry no residual
    moving = np.abs(xt) > tol("rank") * np.maximum(1.0, np.abs(X))
    if moving.any():
        xm, ym = xt[moving], yt[moving]
        dy = ym / xm
        ddy = (ytt[moving] * xm - ym * xtt[moving]) / xm ** 3
        rhs = np.array([pvi_rhs(a, b, c, kappa) for a, b, c in zip(X[moving], Y[moving], dy)])
        inner = np.full(n - 4, np.nan)
        inner[moving] = np.abs(ddy - rhs)
        res[2:-2] = inner
    # Hamiltonian form
    a1 = traj.theta.a[0]
    pt = (q - a1) / p
    qt, _ = stencil_derivatives(p, h)
    ptt, _ = stencil_derivatives(pt, h)
    r1t, _ = stencil_derivatives(r1, h)
    r2t, _ = stencil_derivatives(r2, h)
    ham = 0.0
    for m in range(n - 4):
        i = m + 2
        xs = (0.0, r1[i], r2[i])
        vq, vp = hamiltonian_flow(p[i], pt[i], xs, (0.0, r1t[m], r2t[m]), kappa)
        ham = max(ham, abs(vq - qt[m]), abs(vp - ptt[m]))
    worst = float(np.nanmax(res)) if np.isfinite(res).any() else float("nan")
    return OdeResidualReport(worst, res, float(ham), kappa)
