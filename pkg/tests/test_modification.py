import numpy as np
import pytest

from dpainleve.algebra import Mat2Poly, Poly
from dpainleve.connection import (THETA_STAR, THETA_VI_STAR, PQPoint, coordinates_of, formal_type,
                                  from_coordinates, validate_matrix)
from dpainleve.maps import dpv_step, dpvi_step
from dpainleve.modification import (DegreeProfile, IntertwinerError, ModificationError,
                                    check_step, finite_elementary_modification, intertwiner_solve,
                                    scalar_multiply, transported_tail)
from dpainleve.verify import random_point, random_theta_v


def test_scalar_multiply_identity_and_zero():
    conn = from_coordinates(THETA_STAR, 0.3, 0.7)
    same = scalar_multiply(conn, 1)
    assert same.mat.allclose(conn.mat) and same.theta == conn.theta
    with pytest.raises(ModificationError):
        scalar_multiply(conn, 0)


def test_scalar_multiply_scales_p_and_rho():
    conn = from_coordinates(THETA_STAR, 0.3, 0.7)
    c = 1.3 - 0.4j
    out = scalar_multiply(conn, c)
    assert np.allclose(out.theta.rho, [c * r for r in THETA_STAR.rho])
    assert validate_matrix(out.mat, out.theta).ok
    pt = coordinates_of(out)
    assert abs(pt.qv - 0.3) < 1e-12 and abs(pt.pv - c * 0.7) < 1e-12


def test_modification_det_law():
    A = from_coordinates(THETA_STAR, 0.3, 0.7).mat
    a1 = THETA_STAR.a[0]
    res = finite_elementary_modification(A, a1)
    want = sorted([a1 - 1] + list(THETA_STAR.a[1:]), key=lambda z: z.real)
    got = sorted(res.mat.det().roots(), key=lambda z: z.real)
    assert np.allclose(got, want, atol=1e-8)
    assert res.degree_offset == 1
    assert "z - " in res.det_law


def test_modification_not_a_zero():
    A = from_coordinates(THETA_STAR, 0.3, 0.7).mat
    with pytest.raises(ModificationError, match="not a simple zero"):
        finite_elementary_modification(A, 0.2)


def test_two_modifications_compose():
    A = from_coordinates(THETA_STAR, 0.3, 0.7).mat
    a1, a2, a3, a4 = THETA_STAR.a
    r = finite_elementary_modification(finite_elementary_modification(A, a1).mat, a2)
    got = sorted(r.mat.det().roots(), key=lambda z: z.real)
    assert np.allclose(got, sorted([a1 - 1, a2 - 1, a3, a4], key=lambda z: z.real), atol=1e-8)


def test_modification_completion_independent():
    # two completion vectors give gauge-equivalent results: an intertwiner of
    # constant-diagonal shape exists between them
    A = from_coordinates(THETA_STAR, 0.3, 0.7).mat
    a1 = THETA_STAR.a[0]
    m1 = finite_elementary_modification(A, a1).mat
    m2 = finite_elementary_modification(A, a1, w=np.array([0.6, 0.8])).mat
    sol = intertwiner_solve(m2, m1, DegreeProfile(((0, 1), (0, 0))))
    assert sol.kernel_dim == 1 and sol.residual < 1e-10
    assert abs(sol.R.det().coeff(0)) > 1e-6


def test_modification_preserves_formal_type():
    rng = np.random.default_rng(21)
    for _ in range(20):
        theta = random_theta_v(rng)
        pt = random_point(rng, theta)
        A = from_coordinates(theta, pt.q, pt.p).mat
        res = finite_elementary_modification(A, theta.a[0])
        ft = formal_type(transported_tail(res))
        for r, d in zip(theta.rho, theta.d):
            k = int(np.argmin([abs(x - r) for x in ft.rho]))
            assert abs(ft.rho[k] - r) < 1e-7 and abs(ft.d[k] - d) < 1e-7


def test_self_intertwiner_is_scalar():
    A = from_coordinates(THETA_STAR, 0.3, 0.7).mat
    sol = intertwiner_solve(A, A)
    assert sol.kernel_dim == 1
    R = sol.R
    c = R[0, 0].coeff(0)
    assert abs(c) > 0.5
    assert (R - Mat2Poly.identity() * c).norm() < 1e-12


@pytest.mark.parametrize("theta,pt,step", [(THETA_STAR, (0.3, 0.7), dpv_step),
                                           (THETA_VI_STAR, (0.45, 0.6), dpvi_step)])
def test_step_oracle(theta, pt, step):
    p = PQPoint.of(*pt)
    rec = step(theta, p)
    sol = check_step(theta, p, rec.theta_out, rec.point_out)
    assert sol.kernel_dim == 1
    assert sol.residual < 1e-8
    assert sol.det_roots_match(theta.a[:2]) < 1e-7
    # det R is proportional to (z - a1)(z - a2)
    det = sol.R.det()
    ratio = det * (1 / det.coeffs[-1])
    assert ratio.allclose(Poly.from_roots(theta.a[:2]), 1e-7)


def test_unrelated_point_has_no_intertwiner():
    A = from_coordinates(THETA_STAR, 0.3, 0.7).mat
    B = from_coordinates(THETA_STAR.shifted(), 0.9, 1.3).mat
    with pytest.raises(IntertwinerError) as info:
        intertwiner_solve(A, B)
    assert info.value.kernel_dim == 0


def test_perturbation_detectable():
    p = PQPoint.of(0.3, 0.7)
    rec = dpv_step(THETA_STAR, p)
    A = from_coordinates(THETA_STAR, p.q, p.p).mat
    Ap = from_coordinates(rec.theta_out, rec.point_out.q, rec.point_out.p).mat
    rng = np.random.default_rng(22)
    P = Mat2Poly([[Poly(rng.normal(size=3)), Poly(rng.normal(size=4))],
                  [Poly(rng.normal(size=2)), Poly(rng.normal(size=3))]])
    for delta in (1e-8, 1e-7, 1e-6, 1e-5, 1e-4):
        try:
            res = intertwiner_solve(A, Ap + P * delta).residual
        except IntertwinerError as exc:
            res = exc.singular_values[-1]
        assert res >= 1e-4 * delta
