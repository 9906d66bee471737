import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constant_family
from tangent_tomography.bodies import (Ball, PolynomialFamily, SphericalPolynomial, boundary_frame,
                                       dupin_hull)
from tangent_tomography.errors import DimensionMismatch, EpsilonTooLarge, UnsupportedCombination
from tangent_tomography.flats import hyperplane_flats
from tangent_tomography.measures import (ConvexSample, EllipsoidSpec, FunctionalDescriptor,
                                         ReferenceCapShapes, cap_body, ellipsoid_intrinsic_volume,
                                         functional_value, intrinsic_volume,
                                         intrinsic_volume_estimate, john_ellipsoid,
                                         john_ellipsoid_volume, kubota_constant,
                                         monte_carlo_volume, paraboloid_cap_ratio, sandwich_check,
                                         section_body, shoot, support_values)
from tangent_tomography.spheres import ball_volume

# independent oracles: 4 E(m) with m = 1 - b^2/a^2 (scipy.special.ellipe), and
# dblquad over the sphere of the support function / surface element of E(1, 1.2, 1.5)
ELLIPSE_2_1_V1 = 4.844224110273838
ELLIPSOID_V1 = 4.97402761584466
ELLIPSOID_V2 = 9.500320568630306

semiaxes2 = st.lists(st.floats(0.3, 3.0), min_size=2, max_size=2)
semiaxes3 = st.lists(st.floats(0.3, 3.0), min_size=3, max_size=3)


def flat_at(body, u):
    return hyperplane_flats(body, np.array([u], dtype=float))[0]


# ------------------------------------------------------------------ sampling

def test_shoot_stays_inside():
    inside = lambda z: np.linalg.norm(z, axis=1) <= 1.0
    dirs = np.array([[1.0, 0.0], [0.6, 0.8]])
    s = shoot(inside, np.zeros(2), dirs, 3.0)
    assert np.all(s <= 1.0) and np.allclose(s, 1.0, atol=1e-11)
    with pytest.raises(EpsilonTooLarge):
        shoot(inside, np.zeros(2), dirs, 0.5)


def test_chord_of_disc(ball2):
    fam = constant_family(ball2, 0.5)
    flat = flat_at(ball2, [1.0, 0.0])
    eps = 1e-2
    s = section_body(fam, flat, eps)
    chord = 2 * math.sqrt(2 * 0.5 * eps + 0.25 * eps ** 2)
    assert intrinsic_volume(s, 1) == pytest.approx(chord, abs=1e-11)
    assert s.boundary_residual(fam, eps) < 1e-10


def test_degenerate_section_when_speed_vanishes(ball2):
    # h(u) = (1 - u_1)^2 / 2 vanishes to fourth order at e1
    fam = PolynomialFamily(ball2, SphericalPolynomial(0.5, ((-1.0, (1, 0)), (0.5, (2, 0)))))
    flat = flat_at(ball2, [1.0, 0.0])
    s = section_body(fam, flat, 1e-3)
    assert s.degenerate
    for F in (FunctionalDescriptor("intrinsic_volume", 1), FunctionalDescriptor("mean_width_power", 1),
              FunctionalDescriptor("john_ellipsoid_volume", 1)):
        assert functional_value(s, F) == 0.0
    assert cap_body(fam, flat, 1e-3).degenerate


def test_disc_section_radius(ball3):
    fam = constant_family(ball3, 1.0)
    eps = 1e-3
    s = section_body(fam, flat_at(ball3, [0.0, 0.0, 1.0]), eps)
    r = math.sqrt(2 * eps + eps ** 2)
    assert np.max(np.abs(np.linalg.norm(s.points, axis=1) - r)) < 1e-9
    assert s.convexity_defect(np.random.default_rng(0)) == 0.0


def test_segment_cap_sagitta(ball2):
    fam = constant_family(ball2, 1.0)
    c = cap_body(fam, flat_at(ball2, [0.0, 1.0]), 1e-2)
    assert c.meta["height"] == pytest.approx(1e-2, abs=1e-11)
    # circular segment of radius 1 + eps and sagitta eps
    R, h = 1.01, 0.01
    area = R * R * math.acos((R - h) / R) - (R - h) * math.sqrt(2 * R * h - h * h)
    assert intrinsic_volume(c, 2) == pytest.approx(area, rel=2e-5)


def test_spherical_cap_volume(ball3):
    fam = constant_family(ball3, 1.0)
    eps = 1e-3
    c = cap_body(fam, flat_at(ball3, [0.0, 0.0, 1.0]), eps)
    exact = math.pi * eps ** 2 * (3 + 2 * eps) / 3
    assert intrinsic_volume(c, 3) == pytest.approx(exact, rel=3e-3)
    assert c.boundary_residual(fam, eps) < 1e-9


def test_patch_limit(ball3):
    fam = constant_family(ball3, 1.0)
    with pytest.raises(EpsilonTooLarge):
        section_body(fam, flat_at(ball3, [0.0, 0.0, 1.0]), 0.2)


# -------------------------------------------------------- intrinsic volumes

def test_segment_and_disc():
    seg = ConvexSample.from_points(np.array([[0.0], [3.0]]))
    assert intrinsic_volume(seg, 1) == 3.0
    r = 1.5
    disc = EllipsoidSpec([r, r]).sample(n_rays=4096)
    assert intrinsic_volume(disc, 2) == pytest.approx(math.pi * r * r, rel=1e-5)
    assert intrinsic_volume(disc, 1) == pytest.approx(math.pi * r, rel=1e-5)
    assert intrinsic_volume(disc, 1, method="quadrature") == pytest.approx(math.pi * r, rel=1e-5)


@pytest.mark.parametrize("method", ["auto", "quadrature"])
def test_unit_ball_3d(method):
    ball = EllipsoidSpec([1.0, 1.0, 1.0]).sample()
    assert intrinsic_volume(ball, 2, method=method) == pytest.approx(2 * math.pi, rel=3e-3)
    assert intrinsic_volume(ball, 1, method=method) == pytest.approx(
        3 * ball_volume(3) / ball_volume(2), rel=2e-3)
    assert intrinsic_volume(ball, 3) == pytest.approx(4 * math.pi / 3, rel=5e-3)


def test_exact_and_quadrature_paths_agree_on_ellipsoid():
    s = EllipsoidSpec([1.0, 1.2, 1.5]).sample()
    for k, oracle in ((1, ELLIPSOID_V1), (2, ELLIPSOID_V2)):
        exact = intrinsic_volume_estimate(s, k)
        quad = intrinsic_volume_estimate(s, k, method="quadrature")
        assert exact.value == pytest.approx(quad.value, rel=1e-3)
        assert exact.value == pytest.approx(oracle, rel=3e-3)


def test_monte_carlo_volume_in_4d():
    s = EllipsoidSpec([1.0, 1.0, 1.0, 1.0]).sample(n_rays=4096)
    est = monte_carlo_volume(s, np.random.default_rng(0))
    assert abs(est.value - ball_volume(4)) < 4 * est.stderr
    assert intrinsic_volume_estimate(s, 4, rng=np.random.default_rng(0)).stderr > 0


def test_dimension_checks():
    s = EllipsoidSpec([1.0, 2.0]).sample()
    with pytest.raises(DimensionMismatch):
        intrinsic_volume(s, 3)
    with pytest.raises(DimensionMismatch):
        intrinsic_volume(s, 0)


def test_kubota_constant():
    assert kubota_constant(3, 1) == pytest.approx(3 * ball_volume(3) / (ball_volume(1) * ball_volume(2)))
    assert kubota_constant(4, 2) == pytest.approx(6 * ball_volume(4) / ball_volume(2) ** 2)


# ----------------------------------------------------------------- ellipsoids

def test_ellipsoid_reference_values():
    sqrt2 = math.sqrt(2.0)
    assert ellipsoid_intrinsic_volume(EllipsoidSpec([sqrt2, sqrt2]), 2) == pytest.approx(2 * math.pi)
    assert ellipsoid_intrinsic_volume(EllipsoidSpec([sqrt2]), 1) == pytest.approx(2 * sqrt2)
    assert ellipsoid_intrinsic_volume(EllipsoidSpec([2.0, 1.0]), 1) == pytest.approx(ELLIPSE_2_1_V1,
                                                                                    rel=1e-10)
    e3 = EllipsoidSpec([1.0, 1.2, 1.5])
    assert ellipsoid_intrinsic_volume(e3, 1) == pytest.approx(ELLIPSOID_V1, rel=1e-9)
    assert ellipsoid_intrinsic_volume(e3, 2) == pytest.approx(ELLIPSOID_V2, rel=1e-9)


def test_ellipsoid_middle_degree_monte_carlo():
    # every 2-projection of B^4 is a unit disc
    assert ellipsoid_intrinsic_volume(EllipsoidSpec(np.ones(4)), 2, n_mc=20000) == pytest.approx(
        6 * ball_volume(4) / ball_volume(2), rel=1e-12)
    a = EllipsoidSpec([0.8, 1.0, 1.3, 1.6])
    ref = ellipsoid_intrinsic_volume(a, 2)
    sampled = intrinsic_volume_estimate(a.sample(n_rays=65536), 2, method="quadrature",
                                        rng=np.random.default_rng(1))
    assert sampled.value == pytest.approx(ref, rel=0.01)


@given(semiaxes2)
@settings(max_examples=20, deadline=None)
def test_ellipse_reference_matches_sample(axes):
    spec = EllipsoidSpec(axes)
    s = spec.sample(n_rays=2048)
    for k in (1, 2):
        assert intrinsic_volume(s, k) == pytest.approx(ellipsoid_intrinsic_volume(spec, k), rel=1e-4)


# ---------------------------------------------------------------- functionals

def test_functional_descriptors():
    seg = ConvexSample.from_points(np.array([[0.0], [3.0]]))
    assert functional_value(seg, FunctionalDescriptor("mean_width_power", 2)) == pytest.approx(9.0)
    with pytest.raises(UnsupportedCombination):
        functional_value(EllipsoidSpec([1.0, 2.0]).sample(), FunctionalDescriptor("john_ellipsoid_volume", 1))
    with pytest.raises(UnsupportedCombination):
        FunctionalDescriptor("mixed_volume", 1)


def test_john_ellipsoid_known_cases():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    B, c = john_ellipsoid(square)
    assert np.allclose(B @ B.T, 0.25 * np.eye(2), atol=1e-8)
    assert np.allclose(c, [0.5, 0.5], atol=1e-8)
    # Steiner inellipse of a triangle has area pi / (3 sqrt 3) times the triangle's
    tri = ConvexSample.from_points(np.array([[0, 0], [1, 0], [0, 1.0]]))
    assert john_ellipsoid_volume(tri) == pytest.approx(math.pi / (3 * math.sqrt(3)) * 0.5, rel=1e-8)
    cube = ConvexSample.from_points(np.array([[i, j, k] for i in (0, 2) for j in (0, 2) for k in (0, 2)],
                                             dtype=float))
    assert john_ellipsoid_volume(cube) == pytest.approx(ball_volume(3), rel=1e-8)
    disc = EllipsoidSpec([0.7, 0.7]).sample()
    assert john_ellipsoid_volume(disc) == pytest.approx(math.pi * 0.49, rel=1e-4)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.integers(0, 1000))
@settings(max_examples=15, deadline=None)
def test_john_affine_equivariance(entries, seed):
    A = np.array(entries).reshape(2, 2) + 3 * np.eye(2)
    pts = np.random.default_rng(seed).standard_normal((30, 2))
    v0 = john_ellipsoid_volume(ConvexSample.from_points(pts))
    v1 = john_ellipsoid_volume(ConvexSample.from_points(pts @ A.T + 5.0))
    assert v1 == pytest.approx(abs(np.linalg.det(A)) * v0, rel=1e-6)


@given(semiaxes3, st.floats(0.3, 3.0))
@settings(max_examples=10, deadline=None)
def test_homogeneity(axes, lam):
    s = EllipsoidSpec(axes).sample(n_rays=512)
    for F in (FunctionalDescriptor("intrinsic_volume", 1), FunctionalDescriptor("intrinsic_volume", 2),
              FunctionalDescriptor("intrinsic_volume", 3), FunctionalDescriptor("mean_width_power", 2)):
        assert functional_value(s.scaled(lam), F) == pytest.approx(lam ** F.degree * functional_value(s, F),
                                                                   rel=1e-9)


@given(semiaxes2, st.lists(st.floats(1.01, 2.0), min_size=2, max_size=2))
@settings(max_examples=15, deadline=None)
def test_monotone(axes, grow):
    a = EllipsoidSpec(axes).sample()
    b = EllipsoidSpec(np.array(axes) * np.array(grow)).sample()
    for F in (FunctionalDescriptor("intrinsic_volume", 1), FunctionalDescriptor("intrinsic_volume", 2),
              FunctionalDescriptor("john_ellipsoid_volume", 2)):
        assert functional_value(a, F) <= functional_value(b, F) * (1 + 1e-6)


# ------------------------------------------------------------------- sandwich

def test_sandwich_examples(ball2):
    fam = constant_family(ball2, 0.5)
    flat = flat_at(ball2, [1.0, 0.0])
    eps = 1e-3
    s = section_body(fam, flat, eps)
    dupin = dupin_hull(flat.frame)
    assert sandwich_check(s, dupin, 0.4, 0.6, eps)
    assert not sandwich_check(s, dupin, 0.55, 0.6, eps)
    zero = PolynomialFamily(ball2, SphericalPolynomial(0.5, ((-1.0, (1, 0)), (0.5, (2, 0)))))
    assert sandwich_check(section_body(zero, flat, eps), dupin, None, 0.1, eps)


# ---------------------------------------------------------- paraboloid caps

@given(st.integers(2, 3), st.integers(0, 10 ** 6), st.floats(0.1, 3.0), st.floats(1e-4, 0.2))
@settings(max_examples=15, deadline=None)
def test_paraboloid_ratio(d, seed, c, eps):
    a = np.random.default_rng(seed).standard_normal((d - 1, d - 1))
    Q = a @ a.T + 0.2 * np.eye(d - 1)
    assert paraboloid_cap_ratio(Q, c, eps) == pytest.approx(2 / (d + 1), abs=1e-6)


def test_paraboloid_ratio_normalised_case():
    assert paraboloid_cap_ratio(0.5 * np.eye(1), 1.0, 1.0) == pytest.approx(2 / 3, abs=1e-12)
    assert paraboloid_cap_ratio(0.5 * np.eye(2), 1.0, 1.0) == pytest.approx(1 / 2, abs=1e-12)


def test_reference_cap_shapes(ball3):
    dupin = dupin_hull(boundary_frame(ball3, np.array([0.0, 0.0, 1.0])))
    shapes = ReferenceCapShapes(dupin)
    # E = sqrt(2) B^2, cylinder height 1
    assert shapes.cylinder_volume() == pytest.approx(2 * math.pi)
    assert shapes.cap_volume() == pytest.approx(math.pi)
    sample = shapes.paraboloid_cap_sample()
    assert intrinsic_volume(sample, 3) == pytest.approx(math.pi, rel=3e-3)


def test_support_values_chunked():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((300, 3))
    dirs = rng.standard_normal((50, 3))
    full = np.max(dirs @ pts.T, axis=1)
    assert np.array_equal(support_values(pts, dirs, chunk_elems=1000), full)


def test_dump_sample_csv(tmp_path, ball3):
    from tangent_tomography.measures import dump_sample_csv
    s = section_body(constant_family(ball3, 1.0), flat_at(ball3, [0.0, 0.0, 1.0]), 1e-3)
    path = tmp_path / "s.csv"
    dump_sample_csv(s, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "x0,x1,x2" and len(rows) == len(s.points) + 1
    z = np.array([float(r.split(",")[2]) for r in rows[1:]])
    assert np.allclose(z, 1.0, atol=1e-12)


def _perturbed_cylinder(delta, m=3, n=64):
    """Elliptic cylinder over E = diag(1.2, 0.8), height 1, with a wobble of size delta."""
    t = 2 * np.pi * np.arange(n) / n
    ring = np.column_stack([1.2 * np.cos(t), 0.8 * np.sin(t)])
    if m == 2:
        ring = ring[:, :1]
    pts = np.vstack([np.column_stack([ring, np.zeros(len(ring))]),
                     np.column_stack([ring, np.ones(len(ring))])])
    wobble = 1.0 + delta * np.cos(3 * np.arange(len(pts)))
    return ConvexSample.from_points(pts * wobble[:, None])


@pytest.mark.parametrize("m", [2, 3])
def test_continuity_on_shrinking_cylinder_perturbations(m):
    base = _perturbed_cylinder(0.0, m)
    for F in (FunctionalDescriptor("intrinsic_volume", m), FunctionalDescriptor("intrinsic_volume", 1),
              FunctionalDescriptor("john_ellipsoid_volume", m)):
        ref = functional_value(base, F)
        gaps = [abs(functional_value(_perturbed_cylinder(2.0 ** -j, m), F) - ref) for j in range(3, 12, 2)]
        assert all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 2e-3 * ref
