"""Polynomials, 2x2 polynomial matrices, Laurent tails, dual and projective numbers."""
from __future__ import annotations

import cmath
import contextlib
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

Cx = complex


class AlgebraError(ValueError):
    pass


# ---------------------------------------------------------------------------
# precision profile

@dataclass(frozen=True)
class PrecisionProfile:
    """Tolerances used across the package; ``scale`` multiplies all of them."""

    scale: float = 1.0
    trim: float = 1e-13
    integer: float = 1e-9
    rank: float = 1e-9
    remainder: float = 1e-9
    indeterminate: float = 1e-12
    boundary: float = 1e-10
    blowup: float = 1e12
    match: float = 1e-9

    def tol(self, name: str) -> float:
        return getattr(self, name) * self.scale


_PROFILE = PrecisionProfile()


def get_profile() -> PrecisionProfile:
    return _PROFILE


def set_profile(profile: PrecisionProfile) -> None:
    global _PROFILE
    _PROFILE = profile


@contextlib.contextmanager
def precision(scale: float) -> Iterator[PrecisionProfile]:
    """Temporarily tighten (scale < 1) or loosen (scale > 1) every tolerance."""
    old = get_profile()
    new = PrecisionProfile(scale=scale)
    set_profile(new)
    try:
        yield new
    finally:
        set_profile(old)


def tol(name: str) -> float:
    return _PROFILE.tol(name)


def as_cx(x) -> complex:
    z = complex(x)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise AlgebraError(f"non-finite value {x!r}")
    return z


# ---------------------------------------------------------------------------
# polynomials

ZERO_DEGREE = -1  # degree of the zero polynomial


class Poly:
    """Dense complex polynomial in z, coefficients indexed by power."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence | np.ndarray = (), trim: bool = True):
        c = np.array(coeffs, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise AlgebraError("non-finite polynomial coefficient")
        if trim and c.size:
            big = np.abs(c).max()
            if big == 0:
                c = c[:0]
            else:
                keep = np.nonzero(np.abs(c) > tol("trim") * big)[0]
                c = c[: keep[-1] + 1]
        c.setflags(write=False)
        self.coeffs = c

    @classmethod
    def const(cls, c) -> Poly:
        return cls([c])

    @classmethod
    def monomial(cls, k: int, c=1.0) -> Poly:
        out = np.zeros(k + 1, dtype=complex)
        out[k] = c
        return cls(out)

    @classmethod
    def from_roots(cls, roots: Sequence, lead=1.0) -> Poly:
        return cls(np.polynomial.polynomial.polyfromroots(list(roots)) * lead)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    def coeff(self, k: int) -> complex:
        return complex(self.coeffs[k]) if 0 <= k < self.coeffs.size else 0j

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(max(n, self.coeffs.size), dtype=complex)
        out[: self.coeffs.size] = self.coeffs
        return out

    def norm(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def __call__(self, z):
        # Horner with plain operators so dual and mpmath numbers work too
        acc = 0
        for c in self.coeffs[::-1]:
            acc = acc * z + complex(c)
        return acc

    def homogeneous(self, num, den, deg: int | None = None):
        """Evaluate z^deg p(num/den) * den^deg, i.e. the degree-``deg`` form."""
        deg = self.degree if deg is None else deg
        if self.degree > deg:
            raise AlgebraError("degree exceeds homogeneous degree")
        acc = 0
        for k in range(deg, -1, -1):
            acc = acc * num + self.coeff(k) * den ** (deg - k)
        return acc

    def __add__(self, other) -> Poly:
        other = _to_poly(other)
        n = max(self.coeffs.size, other.coeffs.size)
        return Poly(self.padded(n) + other.padded(n))

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(-self.coeffs, trim=False)

    def __sub__(self, other) -> Poly:
        return self + (-_to_poly(other))

    def __rsub__(self, other) -> Poly:
        return _to_poly(other) - self

    def __mul__(self, other) -> Poly:
        if isinstance(other, Poly):
            if self.is_zero() or other.is_zero():
                return Poly()
            return Poly(np.convolve(self.coeffs, other.coeffs))
        return Poly(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __truediv__(self, c) -> Poly:
        return Poly(self.coeffs / complex(c))

    def divmod(self, other: Poly) -> tuple[Poly, Poly]:
        if other.is_zero():
            raise AlgebraError("division by zero polynomial")
        if self.degree < other.degree:
            return Poly(), self
        q, r = np.polynomial.polynomial.polydiv(self.coeffs, other.coeffs)
        return Poly(q), Poly(r)

    def shift(self) -> Poly:
        return poly_shift(self)

    def deriv(self) -> Poly:
        if self.coeffs.size <= 1:
            return Poly()
        return Poly(self.coeffs[1:] * np.arange(1, self.coeffs.size))

    def roots(self) -> np.ndarray:
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return np.roots(self.coeffs[::-1]).astype(complex)

    def allclose(self, other, rtol: float = 1e-12) -> bool:
        other = _to_poly(other)
        n = max(self.coeffs.size, other.coeffs.size, 1)
        scale = max(self.norm(), other.norm(), 1e-300)
        return bool(np.abs(self.padded(n) - other.padded(n)).max() <= rtol * scale)

    def __repr__(self) -> str:
        return f"Poly({np.array2string(self.coeffs, precision=6)})"


def _to_poly(x) -> Poly:
    return x if isinstance(x, Poly) else Poly([x])


def poly_shift(p: Poly) -> Poly:
    """Return the polynomial z -> p(z+1)."""
    n = p.coeffs.size
    out = np.zeros(n, dtype=complex)
    for k, ck in enumerate(p.coeffs):
        for j in range(k + 1):
            out[j] += ck * math.comb(k, j)
    return Poly(out)


# ---------------------------------------------------------------------------
# 2x2 polynomial matrices

class Mat2Poly:
    __slots__ = ("entries",)

    def __init__(self, entries):
        rows = tuple(tuple(_to_poly(e) for e in row) for row in entries)
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise AlgebraError("Mat2Poly needs a 2x2 array")
        self.entries = rows

    @classmethod
    def identity(cls) -> Mat2Poly:
        return cls([[1.0, 0.0], [0.0, 1.0]])

    @classmethod
    def constant(cls, m) -> Mat2Poly:
        m = np.asarray(m, dtype=complex)
        return cls([[m[0, 0], m[0, 1]], [m[1, 0], m[1, 1]]])

    def __getitem__(self, ij) -> Poly:
        i, j = ij
        return self.entries[i][j]

    def map(self, f) -> Mat2Poly:
        return Mat2Poly([[f(e) for e in row] for row in self.entries])

    def __add__(self, other: Mat2Poly) -> Mat2Poly:
        return Mat2Poly([[self[i, j] + other[i, j] for j in range(2)] for i in range(2)])

    def __sub__(self, other: Mat2Poly) -> Mat2Poly:
        return Mat2Poly([[self[i, j] - other[i, j] for j in range(2)] for i in range(2)])

    def __matmul__(self, other: Mat2Poly) -> Mat2Poly:
        return Mat2Poly([[self[i, 0] * other[0, j] + self[i, 1] * other[1, j]
                          for j in range(2)] for i in range(2)])

    def __mul__(self, c) -> Mat2Poly:
        return self.map(lambda e: e * c)

    __rmul__ = __mul__

    def shift(self) -> Mat2Poly:
        return self.map(poly_shift)

    def det(self) -> Poly:
        return mat_det(self)

    def __call__(self, z) -> np.ndarray:
        return np.array([[complex(self[i, j](z)) for j in range(2)] for i in range(2)])

    @property
    def degree(self) -> int:
        return max(e.degree for row in self.entries for e in row)

    def degrees(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return tuple(tuple(e.degree for e in row) for row in self.entries)  # type: ignore[return-value]

    def coeff_matrix(self, k: int) -> np.ndarray:
        return np.array([[self[i, j].coeff(k) for j in range(2)] for i in range(2)])

    def norm(self) -> float:
        return max(e.norm() for row in self.entries for e in row)

    def allclose(self, other: Mat2Poly, rtol: float = 1e-12) -> bool:
        scale = max(self.norm(), other.norm(), 1e-300)
        return all((self[i, j] - other[i, j]).norm() <= rtol * scale
                   for i in range(2) for j in range(2))

    def __repr__(self) -> str:
        return f"Mat2Poly({[[e for e in row] for row in self.entries]})"


def mat_det(m: Mat2Poly) -> Poly:
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


# ---------------------------------------------------------------------------
# truncated Laurent series in 1/z

@dataclass(frozen=True)
class LaurentTail:
    """Coefficients of z^order, z^(order-1), ..., z^(order-N) as 2x2 matrices."""

    order: int
    coeffs: tuple

    def __post_init__(self):
        cs = tuple(np.array(c, dtype=complex).reshape(2, 2) for c in self.coeffs)
        if len(cs) < 3:
            raise AlgebraError("LaurentTail needs truncation N >= 2")
        for c in cs:
            c.setflags(write=False)
        object.__setattr__(self, "coeffs", cs)

    @property
    def truncation(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, power: int) -> np.ndarray:
        k = self.order - power
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        if k < 0:
            return np.zeros((2, 2), dtype=complex)
        raise AlgebraError(f"power {power} below truncation")

    @property
    def low(self) -> int:
        return self.order - self.truncation

    def __matmul__(self, other: LaurentTail) -> LaurentTail:
        n = min(self.truncation, other.truncation)
        out = []
        for k in range(n + 1):
            s = np.zeros((2, 2), dtype=complex)
            for i in range(k + 1):
                s = s + self.coeffs[i] @ other.coeffs[k - i]
            out.append(s)
        return LaurentTail(self.order + other.order, tuple(out))

    def __add__(self, other: LaurentTail) -> LaurentTail:
        hi = max(self.order, other.order)
        lo = max(self.low, other.low)
        return LaurentTail(hi, tuple(self.coeff(p) + other.coeff(p) for p in range(hi, lo - 1, -1)))

    def __sub__(self, other: LaurentTail) -> LaurentTail:
        return self + other.scaled(-1.0)

    def scaled(self, c) -> LaurentTail:
        return LaurentTail(self.order, tuple(c * m for m in self.coeffs))

    def inverse(self) -> LaurentTail:
        """Series inverse; the leading coefficient must be invertible."""
        lead = self.coeffs[0]
        if abs(np.linalg.det(lead)) < tol("rank") * max(np.abs(lead).max(), 1e-300) ** 2:
            raise AlgebraError("leading coefficient not invertible")
        li = np.linalg.inv(lead)
        out = [li]
        for k in range(1, len(self.coeffs)):
            s = np.zeros((2, 2), dtype=complex)
            for i in range(1, k + 1):
                s = s + self.coeffs[i] @ out[k - i]
            out.append(-li @ s)
        return LaurentTail(-self.order, tuple(out))

    def shift(self) -> LaurentTail:
        """Re-expand X(z+1) in powers of z, truncated at the same lowest power."""
        n = self.truncation
        out = [np.zeros((2, 2), dtype=complex) for _ in range(n + 1)]
        for k, c in enumerate(self.coeffs):
            power = self.order - k
            for j in range(n + 1 - k):
                out[k + j] = out[k + j] + _binom(power, j) * c
        return LaurentTail(self.order, tuple(out))

    def trimmed(self, rtol: float = 1e-12) -> LaurentTail:
        """Drop leading coefficients that vanish relative to the largest one."""
        big = self.max_abs()
        k = 0
        while k < len(self.coeffs) - 3 and np.abs(self.coeffs[k]).max() <= rtol * big:
            k += 1
        return LaurentTail(self.order - k, self.coeffs[k:])

    def max_abs(self) -> float:
        return max(float(np.abs(c).max()) for c in self.coeffs)


def _binom(a: int, j: int) -> float:
    """Generalized binomial coefficient C(a, j) for integer a (possibly negative)."""
    out = 1.0
    for i in range(j):
        out *= (a - i) / (i + 1)
    return out


def laurent_expand(m: Mat2Poly, order: int) -> LaurentTail:
    """Expand a polynomial matrix from its top degree down ``order`` steps."""
    if order < 2:
        raise AlgebraError("laurent_expand needs order >= 2")
    n = m.degree
    if n < 0:
        raise AlgebraError("no leading term")
    return LaurentTail(n, tuple(m.coeff_matrix(n - k) for k in range(order + 1)))


def tail_from_matrix(m: np.ndarray | Sequence, order: int = 0, truncation: int = 2) -> LaurentTail:
    """Constant matrix times z^order as a LaurentTail."""
    cs = [np.asarray(m, dtype=complex)] + [np.zeros((2, 2), dtype=complex)] * truncation
    return LaurentTail(order, tuple(cs))


# ---------------------------------------------------------------------------
# majorants

class Majorant:
    """Upper bound for the size of an arithmetic expression: every operation acts on moduli
    and subtraction adds. Evaluating a formula on majorants gives the scale against which
    cancellation in the true value is measured."""

    __slots__ = ("v",)

    def __init__(self, x):
        self.v = x.v if isinstance(x, Majorant) else float(abs(x))

    def __add__(self, o):
        return Majorant(self.v + Majorant(o).v)

    __radd__ = __sub__ = __rsub__ = __add__

    def __mul__(self, o):
        return Majorant(self.v * Majorant(o).v)

    __rmul__ = __mul__

    def __truediv__(self, o):
        d = Majorant(o).v
        return Majorant(self.v / d if d else float("inf"))

    def __rtruediv__(self, o):
        return Majorant(Majorant(o).v / self.v if self.v else float("inf"))

    def __neg__(self):
        return self

    def __abs__(self):
        return self.v

    def __repr__(self):
        return f"Majorant({self.v!r})"


def majorants(xs) -> list:
    return [Majorant(x) for x in xs]


# ---------------------------------------------------------------------------
# dual numbers

class DualCx:
    """a + b*eps with eps^2 = 0."""

    __slots__ = ("value", "eps")

    def __init__(self, value, eps=0.0):
        self.value = value
        self.eps = eps

    @staticmethod
    def _split(x):
        if isinstance(x, DualCx):
            return x.value, x.eps
        return x, 0

    def __add__(self, other):
        v, e = self._split(other)
        return DualCx(self.value + v, self.eps + e)

    __radd__ = __add__

    def __neg__(self):
        return DualCx(-self.value, -self.eps)

    def __pos__(self):
        return self

    def __sub__(self, other):
        v, e = self._split(other)
        return DualCx(self.value - v, self.eps - e)

    def __rsub__(self, other):
        v, e = self._split(other)
        return DualCx(v - self.value, e - self.eps)

    def __mul__(self, other):
        v, e = self._split(other)
        return DualCx(self.value * v, self.value * e + self.eps * v)

    __rmul__ = __mul__

    def __truediv__(self, other):
        v, e = self._split(other)
        return DualCx(self.value / v, (self.eps * v - self.value * e) / (v * v))

    def __rtruediv__(self, other):
        v, e = self._split(other)
        return DualCx(v, e) / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("DualCx supports integer powers only")
        if k < 0:
            return 1 / (self ** (-k))
        out = DualCx(1.0, 0.0)
        for _ in range(k):
            out = out * self
        return out

    def __abs__(self):
        return abs(self.value)

    def __eq__(self, other):
        v, e = self._split(other)
        return self.value == v and self.eps == e

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self):
        return f"DualCx({self.value!r}, {self.eps!r})"


# ---------------------------------------------------------------------------
# projective values

class ProjVal:
    """A point (num : den) of the projective line; infinity is (1 : 0)."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=1.0):
        if num == 0 and den == 0:
            raise AlgebraError("(0 : 0) is not a projective point")
        self.num = num
        self.den = den

    @classmethod
    def of(cls, x) -> ProjVal:
        if isinstance(x, ProjVal):
            return x
        if isinstance(x, (int, float, complex)) and cmath.isinf(complex(x)):
            return INF
        return cls(x, 1.0)

    def normalized(self) -> ProjVal:
        s = max(abs(self.num), abs(self.den))
        return ProjVal(self.num / s, self.den / s)

    def is_infinite(self, rtol: float | None = None) -> bool:
        rtol = tol("boundary") if rtol is None else rtol
        return abs(self.den) <= rtol * abs(self.num)

    def is_zero(self, rtol: float | None = None) -> bool:
        rtol = tol("boundary") if rtol is None else rtol
        return abs(self.num) <= rtol * abs(self.den)

    def value(self) -> complex:
        if self.den == 0:
            return complex("inf")
        return complex(self.num / self.den)

    def isclose(self, other, rtol: float = 1e-12) -> bool:
        other = ProjVal.of(other)
        a, b = self.normalized(), other.normalized()
        return abs(a.num * b.den - a.den * b.num) <= rtol

    def __eq__(self, other) -> bool:
        if not isinstance(other, (ProjVal, int, float, complex)):
            return NotImplemented
        return self.isclose(other)

    __hash__ = None  # type: ignore[assignment]

    def to_list(self) -> list[float]:
        n, d = complex(self.num), complex(self.den)
        return [n.real, n.imag, d.real, d.imag]

    @classmethod
    def from_list(cls, xs: Sequence[float]) -> ProjVal:
        return cls(complex(xs[0], xs[1]), complex(xs[2], xs[3]))

    def __repr__(self) -> str:
        return f"ProjVal({self.num!r} : {self.den!r})"


INF = ProjVal(1.0, 0.0)


def dist_chordal(a: ProjVal, b: ProjVal) -> float:
    """Chordal distance on the Riemann sphere, in [0, 1]."""
    an, ad = complex(a.num), complex(a.den)
    bn, bd = complex(b.num), complex(b.den)
    cross = abs(an * bd - ad * bn)
    return cross / (math.hypot(abs(an), abs(ad)) * math.hypot(abs(bn), abs(bd)))


def arg_key(z: complex, ndigits: int = 12) -> tuple[float, float]:
    """Sort key: argument in (-pi, pi], then modulus."""
    ang = cmath.phase(z)
    if ang <= -math.pi + 10 ** -ndigits:
        ang = math.pi
    return (round(ang, ndigits), round(abs(z), ndigits))
