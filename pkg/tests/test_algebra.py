import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpainleve.algebra import (AlgebraError, DualCx, LaurentTail, Majorant, Mat2Poly, Poly, ProjVal,
                               arg_key, laurent_expand, mat_det, poly_shift, precision, tol)

cx = st.builds(complex, st.floats(-3, 3), st.floats(-3, 3))


def rand_poly(rng, deg):
    return Poly(rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1))


def rand_mat(rng, degs):
    return Mat2Poly([[rand_poly(rng, degs[0]), rand_poly(rng, degs[1])],
                     [rand_poly(rng, degs[2]), rand_poly(rng, degs[3])]])


def test_poly_shift_examples():
    assert poly_shift(Poly([0, 0, 1])).allclose(Poly([1, 2, 1]))
    assert poly_shift(Poly([0, 0, 0, 1])).allclose(Poly([1, 3, 3, 1]))
    assert poly_shift(Poly.const(2.5 - 1j)).allclose(Poly.const(2.5 - 1j))


def test_zero_poly_degree():
    assert Poly([]).degree == -1
    assert Poly([0, 0]).degree == -1


def test_trim_is_relative():
    p = Poly([1.0, 2.0, 1e-15])
    assert p.degree == 1
    assert Poly([1e-20, 1e-20]).degree == 1


def test_poly_evaluation_and_homogeneous():
    p = Poly([1, -2, 3])
    assert p(2.0) == pytest.approx(9.0)
    n, d = 2.0 + 1j, 0.5
    assert p.homogeneous(n, d) == pytest.approx(p(n / d) * d ** 2)


def test_divmod_roundtrip():
    rng = np.random.default_rng(1)
    a, b = rand_poly(rng, 5), rand_poly(rng, 2)
    q, r = a.divmod(b)
    assert r.degree < 2
    assert (q * b + r).allclose(a, 1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 6), st.integers(0, 6))
def test_poly_shift_is_ring_homomorphism(seed, m, n):
    rng = np.random.default_rng(seed)
    p, q = rand_poly(rng, m), rand_poly(rng, n)
    lhs = poly_shift(p * q)
    rhs = poly_shift(p) * poly_shift(q)
    assert lhs.allclose(rhs, 1e-12)
    assert poly_shift(p + q).allclose(poly_shift(p) + poly_shift(q), 1e-12)


def test_mat_det_examples():
    z = Poly([0, 1])
    m = Mat2Poly([[z - 1, 0], [0, z + 1]])
    assert mat_det(m).allclose(Poly([-1, 0, 1]))
    f, g = Poly([1, 2]), Poly([3, 0, 1])
    anti = Mat2Poly([[0, f], [g, 0]])
    assert mat_det(anti).allclose(-(f * g))


def test_mat_det_against_interpolation():
    rng = np.random.default_rng(7)
    m = rand_mat(rng, (2, 3, 1, 2))
    det = mat_det(m)
    zs = np.linspace(-1.5, 1.7, 7) + 0.3j
    vals = [np.linalg.det(m(z)) for z in zs]
    V = np.vander(zs, 7, increasing=True)
    coeffs = np.linalg.solve(V, vals)
    assert det.allclose(Poly(coeffs), 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mat_det_multiplicative(seed):
    rng = np.random.default_rng(seed)
    A = rand_mat(rng, tuple(rng.integers(0, 4, 4)))
    B = rand_mat(rng, tuple(rng.integers(0, 4, 4)))
    assert mat_det(A @ B).allclose(mat_det(A) * mat_det(B), 1e-12)


def test_laurent_expand_examples():
    z2 = Poly([0, 0, 1])
    t = laurent_expand(Mat2Poly([[z2, 0], [0, z2]]), 4)
    assert t.order == 2
    assert np.allclose(t.coeff(2), np.eye(2))
    assert all(np.allclose(t.coeff(k), 0) for k in (1, 0, -1, -2))
    t = laurent_expand(Mat2Poly([[z2, 0], [0, Poly([0, 3, 2])]]), 2)
    assert np.allclose(t.coeff(2), np.diag([1, 2]))
    assert np.allclose(t.coeff(1), np.diag([0, 3]))


def test_laurent_expand_errors():
    with pytest.raises(AlgebraError, match="no leading term"):
        laurent_expand(Mat2Poly([[0, 0], [0, 0]]), 4)
    with pytest.raises(AlgebraError):
        laurent_expand(Mat2Poly.identity(), 1)


def test_shift_two_routes():
    rng = np.random.default_rng(3)
    m = rand_mat(rng, (3, 2, 3, 1))
    direct = laurent_expand(m.shift(), 3)
    via_tail = laurent_expand(m, 3).shift()
    for k in range(4):
        assert np.allclose(direct.coeffs[k], via_tail.coeffs[k], atol=1e-12)


def test_laurent_inverse():
    rng = np.random.default_rng(4)
    cs = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(7)]
    t = LaurentTail(2, tuple(cs))
    prod = t @ t.inverse()
    assert prod.order == 0
    assert np.allclose(prod.coeffs[0], np.eye(2))
    assert max(np.abs(c).max() for c in prod.coeffs[1:]) < 1e-10


def test_projval_scaling_and_equivalence():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n, d = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        c = complex(*rng.normal(size=2))
        x = ProjVal(n, d)
        assert x == ProjVal(c * n, c * d)
        assert x == x
        y = ProjVal(2 * c * n, 2 * c * d)
        assert y == x and x == y
    assert ProjVal(1.0, 0.0).is_infinite()
    assert ProjVal(0.0, 3.0).is_zero()
    assert ProjVal.from_list(ProjVal(1 + 2j, 3 - 1j).to_list()) == ProjVal(1 + 2j, 3 - 1j)


def test_arg_key_branch():
    assert arg_key(complex(-1, -0.0)) == arg_key(complex(-1, 0.0))


def f_test(x):
    return (x * x + 3) / (x - 0.5) * x + 1 / (x + 2)


@settings(max_examples=60, deadline=None)
@given(cx, cx)
def test_dual_matches_finite_difference(a, b):
    if abs(a - 0.5) < 0.2 or abs(a + 2) < 0.2:
        return
    val = f_test(DualCx(a, b))
    h = 1e-6
    fd = (f_test(a + h) - f_test(a - h)) / (2 * h)
    assert abs(val.value - f_test(a)) < 1e-12 * max(1, abs(f_test(a)))
    assert abs(val.eps - b * fd) < 1e-8 * max(1.0, abs(b * fd))


def test_precision_profile_scales_together():
    base = tol("rank")
    with precision(0.1):
        assert tol("rank") == pytest.approx(base * 0.1)
        assert tol("trim") == pytest.approx(1e-14)
    assert tol("rank") == base


def test_majorant_bounds_value():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a, b, c = (complex(*rng.normal(size=2)) for _ in range(3))
        val = (a - b) * c + 1 - a * a
        maj = (Majorant(a) - b) * c + 1 - Majorant(a) * a
        assert abs(val) <= abs(maj) * (1 + 1e-12)
