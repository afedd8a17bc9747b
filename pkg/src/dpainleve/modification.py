"""Scalar multiplication, elementary modifications and the intertwiner oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .algebra import LaurentTail, Mat2Poly, Poly, as_cx, laurent_expand, tol
from .connection import DConn, from_coordinates


class ModificationError(ValueError):
    pass


class IntertwinerError(ValueError):
    """No (or no unique) intertwiner; carries the diagnostic numbers."""

    def __init__(self, message: str, kernel_dim: int, singular_values: np.ndarray):
        super().__init__(message)
        self.kernel_dim = kernel_dim
        self.singular_values = singular_values


def scalar_multiply(conn: DConn, c) -> DConn:
    """The isomorphism mu_c: multiply the matrix and the exponents rho by c."""
    c = as_cx(c)
    if c == 0:
        raise ModificationError("scalar must be nonzero")
    return DConn(conn.mat * c, conn.theta.scaled(c))


# ---------------------------------------------------------------------------
# elementary modification at a finite zero

@dataclass(frozen=True)
class ModificationResult:
    mat: Mat2Poly
    point: complex
    kernel: np.ndarray
    basis: np.ndarray
    degree_offset: int = 1

    @property
    def det_law(self) -> str:
        a = self.point
        return f"det A' = det A * (z - {a - 1!r}) / (z - {a!r})"


def finite_elementary_modification(mat: Mat2Poly, a, w=None) -> ModificationResult:
    """A' = D(z+1) C^-1 A C D(z)^-1 with D = diag(z - a, 1) and C = [v | w], v in ker A(a).

    ``w`` overrides the completion vector (default: the unit basis vector least
    aligned with v).
    """
    a = as_cx(a)
    Aa = mat(a)
    _, s, vh = np.linalg.svd(Aa)
    scale = max(s[0], 1e-300)
    if s[0] == 0 or s[1] > tol("rank") * max(scale, mat.norm()):
        raise ModificationError("not a simple zero")
    det = mat.det()
    ddet = det.deriv()
    if abs(ddet(a)) <= tol("rank") * max(det.norm(), 1.0):
        raise ModificationError("not a simple zero")
    if abs(det(a - 1)) <= tol("rank") * max(det.norm(), 1.0):
        raise ModificationError("not a simple zero")
    v = vh[-1].conj()
    if w is None:
        w = np.eye(2)[int(np.argmin(np.abs(v)))]
    C = np.column_stack([v, np.asarray(w, dtype=complex)])
    if abs(np.linalg.det(C)) < 1e-12:
        raise ModificationError("completion is not independent of the kernel vector")
    Ci = np.linalg.inv(C)
    M = Mat2Poly.constant(Ci) @ mat @ Mat2Poly.constant(C)
    lin = Poly([-a, 1.0])
    col = []
    for i in range(2):
        quo, rem = M[i, 0].divmod(lin)
        if rem.norm() > tol("remainder") * max(M[i, 0].norm(), 1.0):
            raise ModificationError("division residual")
        col.append(quo)
    shifted = Poly([1.0 - a, 1.0])
    out = Mat2Poly([[shifted * col[0], shifted * M[0, 1]], [col[1], M[1, 1]]])
    return ModificationResult(out, a, v, C)


def transported_tail(res: ModificationResult, truncation: int = 10) -> LaurentTail:
    """Expansion at infinity of A' in the frame carried over from the O + O(-1) frame of A.

    The frame is T(z) = D(z) C^-1 S(z) with S = diag(1, 1/z); the series is
    T(z+1)^-1 A'(z) T(z), whose formal type should be that of A.
    """
    N = truncation + 2 * res.mat.degree
    a = res.point
    zero = np.zeros((2, 2), dtype=complex)

    def tail(order, cs):
        cs = list(cs) + [zero] * (N + 1 - len(cs))
        return LaurentTail(order, tuple(cs[: N + 1]))

    e11, e22, eye = np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.eye(2)
    C, Ci = res.basis, np.linalg.inv(res.basis)
    D = tail(1, [e11, np.diag([-a, 1.0])])
    S = tail(0, [e11, e22])
    S_shift_inv = tail(1, [e22, eye])
    D_shift_inv = tail(0, [e22] + [np.diag([(a - 1) ** k, 0.0]) for k in range(N)])
    T = D @ tail(0, [Ci]) @ S
    T_shift_inv = S_shift_inv @ tail(0, [C]) @ D_shift_inv
    out = (T_shift_inv @ laurent_expand(res.mat, N) @ T).trimmed()
    return LaurentTail(out.order, out.coeffs[: truncation + 1])


# ---------------------------------------------------------------------------
# intertwiner solve

@dataclass(frozen=True)
class DegreeProfile:
    """Degree bounds of the unknown intertwiner entries."""

    bounds: tuple = ((1, 2), (0, 1))

    def slots(self) -> list[tuple[int, int, int]]:
        return [(i, j, k) for i in range(2) for j in range(2) for k in range(self.bounds[i][j] + 1)]


STEP_PROFILE = DegreeProfile()


@dataclass(frozen=True)
class IntertwinerSolution:
    R: Mat2Poly
    kernel_dim: int
    residual: float
    det_roots: tuple
    singular_values: tuple = field(default=(), repr=False)

    def det_roots_match(self, expected) -> float:
        """Max distance between det R roots and ``expected`` under the best pairing."""
        got = list(self.det_roots)
        exp = [complex(x) for x in expected]
        if len(got) != len(exp):
            return float("inf")
        return min(max(abs(g - e) for g, e in zip(perm, exp)) for perm in permutations(got))

    def to_dict(self) -> dict:
        return {"kernel_dim": self.kernel_dim, "residual": self.residual,
                "det_roots": [[complex(r).real, complex(r).imag] for r in self.det_roots]}


def intertwiner_system(A: Mat2Poly, A_prime: Mat2Poly, profile: DegreeProfile = STEP_PROFILE):
    """Matrix of the linear map R -> R(z+1) A(z) - A'(z) R(z) on the profile's coefficients."""
    slots = profile.slots()
    top = max(A.degree, A_prime.degree) + max(max(r) for r in profile.bounds) + 1
    cols = []
    for (i, j, k) in slots:
        R = Mat2Poly([[Poly.monomial(k) if (u, v) == (i, j) else 0.0 for v in range(2)]
                      for u in range(2)])
        E = R.shift() @ A - A_prime @ R
        cols.append(np.concatenate([E[u, v].padded(top)[:top] for u in range(2) for v in range(2)]))
    return np.array(cols).T, slots


def intertwiner_solve(A: Mat2Poly, A_prime: Mat2Poly,
                      profile: DegreeProfile = STEP_PROFILE) -> IntertwinerSolution:
    """Null space of R(z+1) A(z) = A'(z) R(z) within the degree profile.

    det R then vanishes at the zeros of det A that were moved (z -> z - 1) in A'.
    """
    M, slots = intertwiner_system(A, A_prime, profile)
    scale = max(A.norm(), A_prime.norm(), 1.0)
    _, s, vh = np.linalg.svd(M / scale)
    full = np.zeros(len(slots))
    full[: s.size] = s
    kernel_dim = int(np.sum(full <= tol("rank") * full[0]))
    if kernel_dim == 0:
        raise IntertwinerError("no intertwiner", 0, full)
    if kernel_dim >= 2:
        raise IntertwinerError("non-unique", kernel_dim, full)
    x = vh[-1].conj()
    x = x / np.linalg.norm(x)
    big = int(np.argmax(np.abs(x)))
    x = x * (abs(x[big]) / x[big])
    residual = float(np.abs(M @ x).max() / scale)
    coeffs = {(i, j): np.zeros(profile.bounds[i][j] + 1, dtype=complex) for i in range(2) for j in range(2)}
    for (i, j, k), val in zip(slots, x):
        coeffs[(i, j)][k] = val
    R = Mat2Poly([[Poly(coeffs[(i, j)]) for j in range(2)] for i in range(2)])
    roots = tuple(complex(r) for r in R.det().roots())
    return IntertwinerSolution(R, kernel_dim, residual, roots, tuple(full))


def check_step(theta, pt, theta_out, pt_out) -> IntertwinerSolution:
    """Oracle for one step: rebuild both normal forms and solve for the intertwiner."""
    A = from_coordinates(theta, pt.q, pt.p).mat
    Ap = from_coordinates(theta_out, pt_out.q, pt_out.p).mat
    return intertwiner_solve(A, Ap)

