"""Parameter tuples, matrix-level checks, formal type at infinity and (q, p) coordinates."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .algebra import (AlgebraError, LaurentTail, Mat2Poly, Poly, ProjVal,
                      arg_key, as_cx, laurent_expand, tol)


class DConnError(ValueError):
    """Invalid parameters, matrices or chart points."""


def _cx_tuple(xs, n: int, name: str) -> tuple[complex, ...]:
    out = tuple(as_cx(x) for x in xs)
    if len(out) != n:
        raise DConnError(f"{name} needs {n} entries, got {len(out)}")
    return out


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class ThetaV:
    """dPV parameters: four zeros, two exponents rho, two d's, pole order 2."""

    a: tuple
    rho: tuple
    d: tuple
    n: int = 2

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(as_cx(x) for x in self.a))
        object.__setattr__(self, "rho", _cx_tuple(self.rho, 2, "rho"))
        object.__setattr__(self, "d", _cx_tuple(self.d, 2, "d"))

    cls = "V"

    @property
    def rhos(self) -> tuple[complex, complex]:
        return self.rho  # type: ignore[return-value]

    @property
    def degree(self) -> complex:
        return -sum(self.d) - sum(self.a)

    def shifted(self, k: int = 1) -> ThetaV:
        a = (self.a[0] - k, self.a[1] - k) + self.a[2:]
        return ThetaV(a, self.rho, (self.d[0] + k, self.d[1] + k), self.n)

    def with_rho(self, rho) -> ThetaV:
        return ThetaV(self.a, tuple(rho), self.d, self.n)

    def scaled(self, c) -> ThetaV:
        return ThetaV(self.a, (c * self.rho[0], c * self.rho[1]), self.d, self.n)

    def to_dict(self) -> dict:
        return {"class": "V", "a": _ser(self.a), "rho": _ser(self.rho),
                "d": _ser(self.d), "n": self.n}


@dataclass(frozen=True)
class ThetaVI:
    """dPVI parameters: six zeros, a single rho (rho1 = rho2), two d's, pole order 3."""

    a: tuple
    d: tuple
    rho: complex = 1.0
    n: int = 3

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(as_cx(x) for x in self.a))
        object.__setattr__(self, "d", _cx_tuple(self.d, 2, "d"))
        object.__setattr__(self, "rho", as_cx(self.rho))

    cls = "VI"

    @property
    def rhos(self) -> tuple[complex, complex]:
        return (self.rho, self.rho)

    @property
    def degree(self) -> complex:
        return -sum(self.d) - sum(self.a)

    def shifted(self, k: int = 1) -> ThetaVI:
        a = (self.a[0] - k, self.a[1] - k) + self.a[2:]
        return ThetaVI(a, (self.d[0] + k, self.d[1] + k), self.rho, self.n)

    def scaled(self, c) -> ThetaVI:
        return ThetaVI(self.a, self.d, c * self.rho, self.n)

    def to_dict(self) -> dict:
        return {"class": "VI", "a": _ser(self.a), "rho": _ser([self.rho]),
                "d": _ser(self.d), "n": self.n}


Theta = Union[ThetaV, ThetaVI]

THETA_STAR = ThetaV((0.10, 0.37, 0.52, 0.81), (1.0, 2.0), (0.35, -1.15))
THETA_VI_STAR = ThetaVI((0.11, 0.23, 0.41, 0.53, 0.67, 0.79), (0.375, -2.115))


def _ser(xs) -> list[list[float]]:
    return [[complex(x).real, complex(x).imag] for x in xs]


def _deser(xs) -> list[complex]:
    out = []
    for x in xs:
        if isinstance(x, (list, tuple)):
            if len(x) != 2:
                raise DConnError(f"complex number must be [re, im], got {x!r}")
            out.append(complex(float(x[0]), float(x[1])))
        elif isinstance(x, (int, float)) and not isinstance(x, bool):
            out.append(complex(x))
        else:
            raise DConnError(f"bad number {x!r}")
    return out


def theta_from_dict(obj: dict) -> Theta:
    """Parse the flat JSON form {class, a, rho, d, n}."""
    try:
        kind = obj["class"]
        a = _deser(obj["a"])
        d = _deser(obj["d"])
        rho = _deser(obj.get("rho", [[1.0, 0.0]]))
        n = int(obj.get("n", 2 if kind == "V" else 3))
    except (KeyError, TypeError, ValueError) as exc:
        raise DConnError(f"malformed theta: {exc}") from exc
    if kind == "V":
        return ThetaV(a, rho, d, n)
    if kind == "VI":
        if len(rho) != 1:
            raise DConnError("class VI stores a single rho")
        return ThetaVI(a, d, rho[0], n)
    raise DConnError(f"unknown theta class {kind!r}")


# ---------------------------------------------------------------------------
# validity reports

@dataclass(frozen=True)
class Failure:
    condition: str
    witness: object
    detail: str = ""
    scope: str = "theta"

    def to_dict(self) -> dict:
        return {"condition": self.condition, "witness": _jsonable(self.witness),
                "detail": self.detail, "scope": self.scope}


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class ValidityReport:
    failures: list = field(default_factory=list)
    degree: complex | None = None
    reducible: bool = False

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def theta_ok(self) -> bool:
        return not any(f.scope == "theta" for f in self.failures)

    @property
    def matrix_ok(self) -> bool:
        return not any(f.scope == "matrix" for f in self.failures)

    def failed(self) -> list[str]:
        return [f.condition for f in self.failures]

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        out = {"ok": self.ok, "failures": [f.to_dict() for f in self.failures]}
        if self.degree is not None:
            out["degree"] = [self.degree.real, self.degree.imag]
        return out


def is_integer(x: complex, eps: float | None = None) -> bool:
    eps = tol("integer") if eps is None else eps
    return abs(x.imag) < eps and abs(x.real - round(x.real)) < eps


def validate_theta(theta: Theta) -> ValidityReport:
    rep = ValidityReport()
    k = len(theta.a)
    if k != 2 * theta.n or theta.n != (2 if theta.cls == "V" else 3):
        rep.failures.append(Failure("pole", (k, theta.n), "need k = 2n with n = 2 (V) or 3 (VI)"))
    deg = theta.degree
    rep.degree = deg
    if not is_integer(deg):
        rep.failures.append(Failure("degree", deg, f"deg = {deg.real:.6g} is not an integer"))
    elif round(deg.real) != -1:
        rep.failures.append(Failure("degree", deg, "deg must equal -1"))
    for j, dj in enumerate(theta.d):
        for r in range(k + 1):
            for subset in itertools.combinations(range(k), r):
                x = -dj - sum(theta.a[i] for i in subset)
                if is_integer(x):
                    rep.failures.append(Failure(
                        "irred", (j + 1, [i + 1 for i in subset]),
                        f"-d{j + 1} - sum(a_I) = {x.real:.6g} is an integer"))
    for i, j in itertools.combinations(range(k), 2):
        if is_integer(theta.a[i] - theta.a[j]):
            rep.failures.append(Failure("mod", (i + 1, j + 1), f"a{i + 1} - a{j + 1} is an integer"))
    eps = tol("integer")
    if theta.cls == "V":
        r1, r2 = theta.rho
        if abs(r1) < eps or abs(r2) < eps:
            rep.failures.append(Failure("rho", (r1, r2), "rho must be nonzero"))
        if abs(r1 - r2) < eps:
            rep.failures.append(Failure("rho", (r1, r2), "rho1 must differ from rho2"))
    else:
        if abs(theta.rho) < eps:
            rep.failures.append(Failure("rhoalt", theta.rho, "rho must be nonzero"))
        if abs(theta.d[0] - theta.d[1]) < eps:
            rep.failures.append(Failure("rhoalt", theta.d, "d1 must differ from d2"))
    return rep


def require_valid(theta: Theta) -> None:
    rep = validate_theta(theta)
    if not rep.ok:
        raise DConnError("invalid theta: " + ", ".join(sorted(set(rep.failed()))))


# ---------------------------------------------------------------------------
# d-connections

@dataclass(frozen=True)
class DConn:
    mat: Mat2Poly
    theta: Theta

    @property
    def cls(self) -> str:
        return self.theta.cls

    def gauge(self, R: Mat2Poly) -> DConn:
        """Apply A -> R(z+1)^{-1} A R(z) for an upper triangular gauge of constant det."""
        return DConn(gauge_transform(self.mat, R), self.theta)


def gauge_transform(A: Mat2Poly, R: Mat2Poly) -> Mat2Poly:
    """R(z+1)^{-1} A R(z) for R = [[r11, r12], [0, r22]] with r11, r22 constants."""
    if not R[1, 0].is_zero() or R[0, 0].degree > 0 or R[1, 1].degree > 0:
        raise DConnError("gauge must be upper triangular with constant diagonal")
    r11, r22 = R[0, 0].coeff(0), R[1, 1].coeff(0)
    Rs = R.shift()
    inv = Mat2Poly([[1 / r11, Rs[0, 1] * (-1 / (r11 * r22))], [0.0, 1 / r22]])
    return inv @ A @ R


def random_gauge(rng: np.random.Generator, scale: float = 1.0) -> Mat2Poly:
    """Random element of the gauge group: constant diagonal, linear r12, r21 = 0."""
    def c():
        return complex(*rng.normal(size=2)) * scale

    def unit():
        r = rng.uniform(0.5, 2.0)
        return r * np.exp(1j * rng.uniform(-np.pi, np.pi))

    return Mat2Poly([[unit(), Poly([c(), c()])], [0.0, unit()]])


def _coeff_close(p: Poly, target: Poly, rel: float) -> tuple[bool, float]:
    n = max(p.coeffs.size, target.coeffs.size, 1)
    err = float(np.abs(p.padded(n) - target.padded(n)).max())
    scale = max(p.norm(), target.norm(), 1.0)
    return err <= rel * scale, err


def validate_matrix(mat: Mat2Poly, theta: Theta, check_theta: bool = True) -> ValidityReport:
    """Check the matrix conditions for a d-connection of type theta."""
    rep = validate_theta(theta) if check_theta else ValidityReport()
    rel = tol("match")

    def fail(name, witness, detail=""):
        rep.failures.append(Failure(name, witness, detail, scope="matrix"))

    a11, a12, a21, a22 = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    if theta.cls == "V":
        r1, r2 = theta.rho
        d1, d2 = theta.d
        bounds = {"a11": (a11, 2), "a22": (a22, 2), "a21": (a21, 1), "a12": (a12, 3)}
        for name, (e, b) in bounds.items():
            if e.degree > b:
                fail("degree profile", name, f"deg {name} = {e.degree} > {b}")
        ok, err = _coeff_close(mat.det(), Poly.from_roots(theta.a, r1 * r2), rel)
        if not ok:
            fail("det", err, "det differs from rho1 rho2 prod(z - a_i)")
        t2 = a11.coeff(2) + a22.coeff(2) - (r1 + r2)
        t1 = a11.coeff(1) + a22.coeff(1) + a22.coeff(2) - (d1 * r1 + d2 * r2)
        scale = max(1.0, abs(r1), abs(r2), abs(d1 * r1), abs(d2 * r2))
        if abs(t2) > rel * scale:
            fail("trace", "z^2", f"leading trace off by {abs(t2):.3g}")
        if abs(t1) > rel * scale:
            fail("trace", "z^1", f"subleading trace off by {abs(t1):.3g}")
    else:
        rho = theta.rho
        d1, d2 = theta.d
        cube = Poly.monomial(3, rho)
        bounds = {"a21": (a21, 1), "a12": (a12, 3), "a11 - rho z^3": (a11 - cube, 2),
                  "a22 - rho z^3": (a22 - cube, 2)}
        for name, (e, b) in bounds.items():
            if e.degree > b:
                fail("degree profile", name, f"deg {name} = {e.degree} > {b}")
        ok, err = _coeff_close(mat.det(), Poly.from_roots(theta.a, rho * rho), rel)
        if not ok:
            fail("det", err, "det differs from rho^2 prod(z - a_i)")
        # z^4 coefficient of (a11 - rho z^3)(a22 (1 + 1/z) - rho z^3) - a12 a21
        lhs = ((a11 - cube) * (a22 * Poly([1.0, 1.0]) - Poly.monomial(4, rho))).coeff(5) \
            - (a12 * a21).coeff(4)
        target = d1 * d2 * rho * rho
        if abs(lhs - target) > rel * max(1.0, abs(target)):
            fail("quartic", lhs, "z^4 condition fails")
    if a21.is_zero():
        rep.reducible = True
        fail("reducible", "a21", "a21 vanishes identically")
    return rep


@dataclass(frozen=True)
class Irreducibility:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def irreducibility_check(conn: DConn) -> Irreducibility:
    """Sufficient certificate: a21 is nonzero and theta is nonresonant."""
    if conn.mat[1, 0].is_zero():
        return Irreducibility(False, "a21 vanishes")
    rep = validate_theta(conn.theta)
    if any(f.condition == "irred" for f in rep.failures):
        return Irreducibility(False, "theta resonant")
    return Irreducibility(True)


# ---------------------------------------------------------------------------
# formal type at infinity

@dataclass(frozen=True)
class FormalType:
    rho: tuple
    d: tuple
    n: int
    gauge: LaurentTail
    frame: str = "trivial"

    def normal_form(self, truncation: int | None = None) -> LaurentTail:
        N = self.gauge.truncation if truncation is None else truncation
        cs = [np.diag(self.rho), np.diag([r * d for r, d in zip(self.rho, self.d)])]
        cs += [np.zeros((2, 2), dtype=complex)] * (N - 1)
        return LaurentTail(self.n, tuple(cs))


class FormalTypeError(ValueError):
    pass


def twisted_tail(mat: Mat2Poly, truncation: int) -> LaurentTail:
    """Expand S(z+1)^{-1} A S(z) with S = diag(1, 1/z), the frame adapted to O + O(-1)."""
    a11, a12, a21, a22 = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    zp1 = Poly([1.0, 1.0])
    # entries as (polynomial, extra power of z): value = poly * z^shift
    ents = [[(a11, 0), (a12, -1)], [(a21 * zp1, 0), (a22 * zp1, -1)]]
    top = max(p.degree + s for row in ents for p, s in row if not p.is_zero())
    cs = []
    for k in range(truncation + 1):
        power = top - k
        cs.append(np.array([[p.coeff(power - s) for p, s in row] for row in ents]))
    return LaurentTail(top, tuple(cs))


def _leading_kind(tail: LaurentTail) -> str | None:
    A0, A1 = tail.coeffs[0], tail.coeffs[1]
    scale = max(float(np.abs(A0).max()), 1e-300)
    ev = np.linalg.eigvals(A0)
    eps = 1e-8 * scale
    if min(abs(ev)) > eps and abs(ev[0] - ev[1]) > eps:
        return "V"
    if abs(A0[0, 1]) < eps and abs(A0[1, 0]) < eps and abs(A0[0, 0] - A0[1, 1]) < eps \
            and abs(A0[0, 0]) > eps:
        ev1 = np.linalg.eigvals(A1)
        if abs(ev1[0] - ev1[1]) > 1e-8 * max(float(np.abs(A1).max()), scale):
            return "VI"
    return None


def formal_type(obj, truncation: int = 8) -> FormalType:
    """Formal type (rho, d; n) and a truncated gauge series R(z) = sum R_k z^-k.

    Accepts a DConn (expanded in the O + O(-1) frame), a Mat2Poly (trivial frame,
    falling back to the twisted frame) or a LaurentTail.
    """
    if truncation < 2:
        raise FormalTypeError("truncation must be >= 2")
    if isinstance(obj, LaurentTail):
        candidates = [("series", obj)]
    elif isinstance(obj, DConn):
        candidates = [("twisted", twisted_tail(obj.mat, truncation + 1))]
    elif isinstance(obj, Mat2Poly):
        try:
            triv = laurent_expand(obj, truncation + 1)
        except AlgebraError as exc:
            raise FormalTypeError("no leading structure") from exc
        candidates = [("trivial", triv), ("twisted", twisted_tail(obj, truncation + 1))]
    else:
        raise TypeError(f"cannot take formal type of {type(obj).__name__}")
    for frame, tail in candidates:
        kind = _leading_kind(tail)
        if kind is not None:
            return _solve_formal(tail, kind, min(truncation, tail.truncation - 1), frame)
    raise FormalTypeError("no leading structure")


def _normalize_columns(C: np.ndarray) -> np.ndarray:
    C = C.astype(complex).copy()
    for j in range(2):
        col = C[:, j]
        if abs(col[j]) > 1e-12 * np.abs(col).max():
            C[:, j] = col / col[j]
        else:
            C[:, j] = col / np.linalg.norm(col)
    return C


def _coef(tail: LaurentTail, power: int) -> np.ndarray:
    try:
        return tail.coeff(power)
    except AlgebraError:
        return np.zeros((2, 2), dtype=complex)


def _residual_at(tail: LaurentTail, Rs: list, D0: np.ndarray, D1: np.ndarray, m: int) -> np.ndarray:
    """Coefficient of z^(n-m) in A(z) R(z) - R(z+1) D(z)."""
    n = tail.order
    out = np.zeros((2, 2), dtype=complex)
    for k in range(0, m + 1):
        if k < len(Rs):
            out = out + _coef(tail, n - (m - k)) @ Rs[k]
    # R(z+1) = sum_k R_k sum_j C(-k, j) z^(-k-j)
    for k in range(len(Rs)):
        for j in range(0, m - k + 1):
            b = _binom_neg(k, j)
            if m - k - j == 0:
                out = out - b * Rs[k] @ D0
            elif m - k - j == 1:
                out = out - b * Rs[k] @ D1
    return out


def _binom_neg(k: int, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= (-k - i) / (i + 1)
    return out


def _solve_formal(tail: LaurentTail, kind: str, N: int, frame: str) -> FormalType:
    A0, A1 = tail.coeffs[0], tail.coeffs[1]
    if kind == "V":
        ev, C = np.linalg.eig(A0)
        order = sorted(range(2), key=lambda i: arg_key(ev[i]))
        ev, C = ev[order], C[:, order]
    else:
        ev1, C = np.linalg.eig(A1)
        ev = np.array([A0[0, 0], A0[0, 0]])
        order = sorted(range(2), key=lambda i: arg_key(ev1[i] / A0[0, 0]))
        C = C[:, order]
    C = _normalize_columns(C)
    Ci = np.linalg.inv(C)
    # work in the eigenbasis of the leading structure, map back at the end
    tail = LaurentTail(tail.order, tuple(Ci @ c @ C for c in tail.coeffs))
    D0 = np.diag(ev).astype(complex)
    D1 = np.zeros((2, 2), dtype=complex)
    Rs = [np.eye(2, dtype=complex)] + [np.zeros((2, 2), dtype=complex) for _ in range(N)]
    OFF = [(0, 1), (1, 0)]
    DIAG = [(0, 0), (1, 1)]

    def affine(slots, m):
        """Linear map from slot values to the order-m residual."""
        def residual(x):
            for (kind_, k, i, j), v in zip(slots, x):
                if kind_ == "R":
                    Rs[k][i, j] = v
                else:
                    D1[i, i] = v
            return _residual_at(tail, Rs, D0, D1, m).reshape(-1)
        zero = np.zeros(len(slots), dtype=complex)
        b = residual(zero)
        M = np.array([residual(np.eye(len(slots))[s]) - b for s in range(len(slots))]).T
        return M, b, residual

    def solve(slots, m, square=True):
        M, b, residual = affine(slots, m)
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] < 1e-11 * max(s[0], 1.0) and square:
            raise FormalTypeError(f"resonant at order {m}")
        x = np.linalg.lstsq(M, -b, rcond=None)[0]
        r = residual(x)
        # a nonsingular square system is always solvable; only overdetermined orders
        # carry a consistency check
        if not square and np.abs(r).max() > 1e-8 * max(1.0, np.abs(b).max()):
            raise FormalTypeError(f"inconsistent at order {m}")

    if kind == "V":
        # order 1: off-diagonal of R_1 and the d-terms
        solve([("R", 1, i, j) for i, j in OFF] + [("D", 0, i, i) for i, _ in DIAG], 1)
        for m in range(2, N + 1):
            solve([("R", m, i, j) for i, j in OFF] + [("R", m - 1, i, j) for i, j in DIAG], m)
        rho = tuple(complex(x) for x in ev)
        d = tuple(complex(D1[i, i] / ev[i]) for i in range(2))
        gauge_len = N
    else:
        # order 1: the d-terms (C diagonalizes A_{n-1}, off-diagonal is a consistency check)
        solve([("D", 0, i, i) for i, _ in DIAG], 1, square=False)
        for m in range(2, N + 1):
            solve([("R", m - 1, i, j) for i in range(2) for j in range(2)], m)
        rho = (complex(ev[0]), complex(ev[1]))
        d = tuple(complex(D1[i, i] / ev[i]) for i in range(2))
        gauge_len = N - 1
    gauge = LaurentTail(0, tuple(C @ r for r in Rs[: max(gauge_len, 2) + 1]))
    return FormalType(rho, d, tail.order, gauge, frame)


def formal_residual(tail: LaurentTail, ft: FormalType, orders: int | None = None) -> float:
    """Relative size of A R - R(z+1) D, order by order, through ``orders``.

    Gauge coefficients grow factorially (the series is only formal), so each
    order is measured against the largest term that enters it.
    """
    Rs = list(ft.gauge.coeffs)
    D0 = np.diag(ft.rho).astype(complex)
    D1 = np.diag([r * d for r, d in zip(ft.rho, ft.d)]).astype(complex)
    orders = len(Rs) - 1 if orders is None else orders
    a_scale = max(tail.max_abs(), 1.0)
    worst = 0.0
    for m in range(orders + 1):
        r_scale = max(float(np.abs(r).max()) for r in Rs[: m + 1])
        err = float(np.abs(_residual_at(tail, Rs, D0, D1, m)).max())
        worst = max(worst, err / (a_scale * max(r_scale, 1.0)))
    return worst


# ---------------------------------------------------------------------------
# coordinates

CHARTS = ("interior", "boundary", "exceptional")


@dataclass(frozen=True)
class PQPoint:
    q: ProjVal
    p: ProjVal
    chart: str = "interior"

    @classmethod
    def of(cls, q, p, chart: str = "interior") -> PQPoint:
        return cls(ProjVal.of(q), ProjVal.of(p), chart)

    @property
    def qv(self) -> complex:
        return self.q.value()

    @property
    def pv(self) -> complex:
        return self.p.value()

    def to_dict(self) -> dict:
        return {"q": self.q.normalized().to_list(), "p": self.p.normalized().to_list(),
                "chart": self.chart}


def classify(theta: Theta, q: ProjVal, p: ProjVal) -> str:
    """Chart tag of a point; exceptional only for the class V points over q = infinity."""
    if q.is_infinite():
        if theta.cls == "V":
            pv = p.value()
            if any(abs(pv - r) <= tol("boundary") * max(1.0, abs(r)) for r in theta.rho):
                return "exceptional"
        return "boundary"
    if p.is_zero() or p.is_infinite():
        return "boundary"
    return "interior"


def _p_denominator_roots(theta: Theta) -> tuple:
    return theta.a[2:4] if theta.cls == "V" else theta.a[3:6]


def p_tilde_of(conn: DConn) -> tuple[complex, complex]:
    """(q, p~) with q the zero of a21 and p~ = a11(q); q must be finite."""
    a21 = conn.mat[1, 0]
    if a21.is_zero():
        raise DConnError("reducible")
    if a21.degree != 1:
        raise DConnError("degenerate chart point")
    q = -a21.coeff(0) / a21.coeff(1)
    return q, complex(conn.mat[0, 0](q))


def coordinates_of(conn: DConn) -> PQPoint:
    a21 = conn.mat[1, 0]
    if a21.is_zero():
        raise DConnError("reducible")
    if a21.degree > 1:
        raise DConnError("a21 must be linear")
    q = ProjVal(-a21.coeff(0), a21.coeff(1)).normalized()
    roots = _p_denominator_roots(conn.theta)
    deg = len(roots)
    a11 = conn.mat[0, 0]
    if a11.degree > deg:
        raise DConnError(f"deg a11 exceeds {deg}")
    num = a11.homogeneous(q.num, q.den, deg)
    den = 1.0 + 0j
    for r in roots:
        den *= q.num - r * q.den
    if num == 0 and den == 0:
        raise DConnError("degenerate chart point")
    p = ProjVal(num, den).normalized()
    return PQPoint(q, p, classify(conn.theta, q, p))


def from_coordinates(theta: Theta, q, p) -> DConn:
    """Normal-form matrix with prescribed coordinates (q, p)."""
    qv = ProjVal.of(q)
    pv = ProjVal.of(p)
    if qv.is_infinite(0.0) or pv.is_infinite(0.0):
        raise DConnError("degenerate chart point")
    q = complex(qv.value())
    p = complex(pv.value())
    roots = _p_denominator_roots(theta)
    pt = p
    for r in roots:
        pt *= q - r
    if abs(pt) <= tol("boundary") * max(1.0, abs(p)):
        raise DConnError("degenerate chart point")
    a21 = Poly([-q, 1.0])
    if theta.cls == "V":
        mat = _from_coordinates_v(theta, q, pt, a21)
    else:
        mat = _from_coordinates_vi(theta, q, pt, a21)
    return DConn(mat, theta)


def _from_coordinates_v(theta: ThetaV, q: complex, pt: complex, a21: Poly) -> Mat2Poly:
    r1, r2 = theta.rho
    d1, d2 = theta.d
    prod = Poly.from_roots(theta.a, r1 * r2)
    c2 = r1 + r2
    c1 = d1 * r1 + d2 * r2 - r1 - r2
    c0 = prod(q) / pt - c2 * q * q - c1 * q
    a22 = Poly([c0, c1, c2])
    num = a22 * pt - prod
    a12, rem = num.divmod(a21)
    if rem.norm() > tol("remainder") * max(num.norm(), 1.0):
        raise DConnError("degenerate chart point")
    return Mat2Poly([[pt, a12], [a21, a22]])


def _from_coordinates_vi(theta: ThetaVI, q: complex, pt: complex, a21: Poly) -> Mat2Poly:
    rho = theta.rho
    d1, d2 = theta.d
    a11 = Poly([pt - rho * q ** 3, 0.0, 0.0, rho])
    target = Poly.from_roots(theta.a, rho * rho).padded(7)

    def det_coeffs(x: np.ndarray) -> np.ndarray:
        a22 = Poly(np.concatenate([x[:3], [rho]]), trim=False)
        a12 = Poly(x[3:], trim=False)
        return (a11 * a22 - a12 * a21).padded(7)[:7]

    base = det_coeffs(np.zeros(7, dtype=complex))
    M = np.array([det_coeffs(e) - base for e in np.eye(7, dtype=complex)]).T
    # six det equations (z^0..z^5) and the quartic condition c3 = -d1 d2 rho^2
    Mf = np.vstack([M[:6], np.eye(7)[6]])
    rhs = np.concatenate([target[:6] - base[:6], [-d1 * d2 * rho * rho]])
    s = np.linalg.svd(Mf, compute_uv=False)
    if s[-1] < tol("rank") * s[0]:
        raise DConnError("singular reconstruction")
    x = np.linalg.solve(Mf, rhs)
    res = np.abs(Mf @ x - rhs).max()
    lead = abs((M @ x + base)[6] - target[6])
    if max(res, lead) > tol("remainder") * max(1.0, np.abs(rhs).max()):
        raise DConnError("singular reconstruction")
    a22 = Poly(np.concatenate([x[:3], [rho]]))
    a12 = Poly(x[3:])
    return Mat2Poly([[a11, a12], [a21, a22]])
