import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constant_family, normal_displacement_speed
from tangent_tomography.bodies import (Ball, CallableFamily, Ellipsoid, PolynomialFamily,
                                       SmoothStar, SphericalPolynomial, StarBody, boundary_frame,
                                       dupin_hull, graph_height, ground_truth_c,
                                       radial_derivative_from_c, restrict, rotate,
                                       validate_family)
from tangent_tomography.errors import BadSubspace, NegativeSpeed, NonConvexPoint

unit_vectors3 = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 0.2).map(lambda v: np.array(v) / np.linalg.norm(v))


def test_spherical_polynomial_eval_and_gradient():
    p = SphericalPolynomial(0.3, ((0.1, (2, 0, 0)), (0.5, (0, 1, 1))))
    u = np.array([0.6, 0.0, 0.8])
    assert p(u) == pytest.approx(0.3 + 0.1 * 0.36)
    x = np.array([0.3, -0.2, 0.5])
    h = 1e-6
    num = [(p(x + h * e) - p(x - h * e)) / (2 * h) for e in np.eye(3)]
    assert np.allclose(p.gradient(x), num, atol=1e-8)
    assert SphericalPolynomial.from_mapping(p.to_mapping()) == p


def test_ball_gauge_and_boundary():
    b = Ball(dim=3, radius=2.0)
    assert b.gauge(np.array([0.0, 0.0, 2.0])) == pytest.approx(1.0)
    assert b.contains(np.array([1.0, 1.0, 1.0]))
    assert not b.contains(np.array([2.0, 1.0, 0.0]))


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_ball_frame(R):
    frame = boundary_frame(Ball(dim=3, radius=R), np.array([0.0, 0.6, 0.8]))
    assert np.allclose(frame.normal, [0.0, 0.6, 0.8])
    assert np.allclose(frame.form, np.eye(2) / (2 * R))
    assert np.allclose(frame.tangent @ frame.normal, 0.0)


def test_ellipse_form_is_half_curvature():
    # curvature of x^2/a^2 + y^2/b^2 = 1 at (a, 0) is a / b^2
    a, b = 2.0, 1.0
    e = Ellipsoid(semiaxes=(a, b))
    assert boundary_frame(e, np.array([1.0, 0.0])).form[0, 0] == pytest.approx(a / (2 * b * b))
    assert boundary_frame(e, np.array([0.0, 1.0])).form[0, 0] == pytest.approx(b / (2 * a * a))


def test_ellipsoid_pole_principal_curvatures(ellipsoid3):
    frame = boundary_frame(ellipsoid3, np.array([0.0, 0.0, 1.0]))
    c = 1.5
    expect = sorted([c / (2 * 1.0 ** 2), c / (2 * 1.2 ** 2)])
    assert np.allclose(np.diag(frame.form), expect)


@given(unit_vectors3)
@settings(max_examples=25, deadline=None)
def test_finite_difference_form_matches_analytic(u):
    e = Ellipsoid(semiaxes=(1.0, 1.2, 1.5))
    star = StarBody(3, e.radial)
    fa = boundary_frame(e, u)
    ff = boundary_frame(star, u)
    assert np.allclose(fa.normal, ff.normal, atol=1e-7)
    assert np.allclose(np.diag(fa.form), np.diag(ff.form), rtol=2e-4, atol=1e-6)


def test_graph_height_on_ball():
    b = Ball(dim=2, radius=1.0)
    frame = boundary_frame(b, np.array([1.0, 0.0]))
    z = np.array([[0.1], [-0.3]])
    f = graph_height(b, frame.point, frame.normal, frame.tangent, z)
    assert np.allclose(f, 1.0 - np.sqrt(1.0 - z[:, 0] ** 2), atol=1e-14)


def test_smooth_star_frame_and_nonconvex():
    s = SmoothStar(dim=3, r0=2.0, check_directions=16)
    frame = boundary_frame(s, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(frame.form, 0.25 * np.eye(2), atol=1e-5)
    with pytest.raises(NonConvexPoint):
        SmoothStar(dim=2, r0=1.0, poly=SphericalPolynomial(0.0, ((0.9, (4, 0)),)),
                   check_directions=64)


def test_dupin_support(ellipsoid3):
    dupin = dupin_hull(boundary_frame(ellipsoid3, np.array([0.0, 0.0, 1.0])))
    for axis, semi in zip(np.eye(2), dupin.semiaxes):
        assert dupin.support(axis) == pytest.approx(semi)
        assert dupin.contains(semi * axis, tol=1e-12)


def test_ground_truth_c_ball_constant(ball3):
    fam = constant_family(ball3, 0.7)
    assert ground_truth_c(fam, np.array([0.0, 1.0, 0.0])) == pytest.approx(0.7)


@given(unit_vectors3)
@settings(max_examples=15, deadline=None)
def test_ground_truth_c_matches_normal_displacement(u):
    e = Ellipsoid(semiaxes=(1.0, 1.2, 1.5))
    fam = PolynomialFamily(e, SphericalPolynomial(0.3, ((0.1, (2, 0, 0)),)))
    frame = boundary_frame(e, u)
    assert ground_truth_c(fam, u, frame) == pytest.approx(
        normal_displacement_speed(fam, frame), rel=1e-5, abs=1e-7)


def test_radial_derivative_round_trip(ellipsoid3, quad_h):
    fam = PolynomialFamily(ellipsoid3, quad_h)
    u = np.array([0.3, 0.4, np.sqrt(1 - 0.25)])
    frame = boundary_frame(ellipsoid3, u)
    c = ground_truth_c(fam, u, frame)
    assert radial_derivative_from_c(frame, c) == pytest.approx(float(fam.speed(frame.direction)))


def test_negative_speed_rejected(ball2):
    with pytest.raises(NegativeSpeed):
        PolynomialFamily(ball2, SphericalPolynomial(0.1, ((-0.5, (1, 0)),)))
    with pytest.raises(NegativeSpeed):
        validate_family(CallableFamily(ball2, lambda u, t: 1.0 - 0.1 * t * np.ones(u.shape[:-1]),
                                       lambda u: -0.1 * np.ones(u.shape[:-1])))


def test_family_second_order_term(ball2):
    fam = PolynomialFamily(ball2, SphericalPolynomial(0.5),
                           r=SphericalPolynomial(0.2, ((0.3, (2, 0)),)))
    u = np.array([[1.0, 0.0]])
    assert fam.radial(u, 0.5)[0] == pytest.approx(1.0 + 0.25 + 0.25 * 0.5)
    assert fam.speed(u)[0] == pytest.approx(0.5)


def test_restriction_and_rotation(ellipsoid3, quad_h):
    basis = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    sub = restrict(ellipsoid3, basis)
    assert sub.dim == 2
    assert sub.radial(np.array([0.0, 1.0])) == pytest.approx(1.5)
    with pytest.raises(BadSubspace):
        restrict(ellipsoid3, np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]))
    fam = restrict(PolynomialFamily(ellipsoid3, quad_h), basis)
    assert fam.speed(np.array([1.0, 0.0])) == pytest.approx(0.4)
    T = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    rot = rotate(ellipsoid3, T)
    # T e1 = e2 direction carries the e1 semiaxis
    assert rot.radial(np.array([0.0, 1.0, 0.0])) == pytest.approx(1.0)
    rf = rotate(PolynomialFamily(ellipsoid3, quad_h), T)
    assert rf.speed(np.array([0.0, 1.0, 0.0])) == pytest.approx(0.4)
