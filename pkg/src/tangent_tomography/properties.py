"""Invariant suites for the measurement layer, shared by the CLI and the tests."""
import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import Ball, Ellipsoid, PolynomialFamily, SphericalPolynomial, dupin_hull, ground_truth_c
from .flats import SubspacePencil, hyperplane_flats, tangent_flats
from .measures import (EllipsoidSpec, FunctionalDescriptor, ellipsoid_intrinsic_volume,
                       functional_estimate, intrinsic_volume_estimate,
                       paraboloid_cap_ratio, sandwich_check, section_body)
from .spheres import ball_volume, direction_grid


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}"


# ------------------------------------------------------------------ sandwich

def _sandwich_cases():
    b2, b3 = Ball(dim=2), Ball(dim=3)
    e3 = Ellipsoid(semiaxes=(1.0, 1.2, 1.5))
    quad = SphericalPolynomial(0.3, ((0.1, (2, 0, 0)),))
    yield "ball d=2, c=0.5", PolynomialFamily(b2, SphericalPolynomial(0.5)), hyperplane_flats(
        b2, direction_grid(2, 8))
    yield "ball d=3, h=0.3+0.1u1^2", PolynomialFamily(b3, quad), hyperplane_flats(
        b3, direction_grid(3, 8))
    yield "ellipsoid d=3, h=0.3+0.1u1^2", PolynomialFamily(e3, quad), hyperplane_flats(
        e3, direction_grid(3, 8))
    pencil = SubspacePencil.about([[0.0, 0.0, 1.0]], rotations=4)
    yield "ellipsoid d=3, l=1 pencil", PolynomialFamily(e3, quad), tangent_flats(
        e3, 1, pencil, per_subspace_samples=4)


def sandwich_suite(c1_factor=0.8, c2_factor=1.25, max_eps=2.0 ** -8, count=4):
    """sqrt(c1 eps) E ⊂ S^eps ⊂ sqrt(c2 eps) E with c_i = factor_i * c(x)."""
    eps_values = max_eps * 0.5 ** np.arange(count)
    failures = []
    n_checked = 0
    for name, family, flats in _sandwich_cases():
        for flat in flats:
            c = ground_truth_c(flat.restricted(family), flat.frame.direction, flat.frame)
            dupin = dupin_hull(flat.frame)
            for eps in eps_values:
                sample = section_body(family, flat, eps)
                ok = sandwich_check(sample, dupin, c1_factor * c, c2_factor * c, eps)
                n_checked += 1
                if not ok:
                    failures.append((name, flat.flat_id, float(eps)))
    return PropertyResult("sandwich inclusion", not failures,
                          {"checked": n_checked, "failures": failures[:10]})


# -------------------------------------------------------- paraboloid caps

def paraboloid_ratio_suite(dims=(2, 3, 4), tol=1e-6, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    rows = []
    for d in dims:
        cases = [(np.eye(d - 1) * 0.5, 1.0, 1.0)]
        a = rng.standard_normal((d - 1, d - 1))
        cases.append((a @ a.T + 0.3 * np.eye(d - 1), float(rng.uniform(0.2, 2.0)),
                      float(rng.uniform(1e-3, 1e-1))))
        for Q, c, eps in cases:
            r = paraboloid_cap_ratio(Q, c, eps)
            err = abs(r - 2.0 / (d + 1))
            worst = max(worst, err)
            rows.append({"d": d, "ratio": r, "error": err})
    return PropertyResult("paraboloid cap / cylinder = 2/(d+1)", worst <= tol,
                          {"max_error": worst, "cases": rows})


# -------------------------------------------------------------- functionals

def _functionals(m):
    out = [FunctionalDescriptor("intrinsic_volume", k) for k in range(1, m + 1)]
    out += [FunctionalDescriptor("mean_width_power", k) for k in (1, 2)]
    out.append(FunctionalDescriptor("john_ellipsoid_volume", m))
    return out


def homogeneity_suite(seed=0, scales=(0.5, 2.0), tol=1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in (2, 3):
        spec = EllipsoidSpec(rng.uniform(0.5, 2.0, m))
        sample = spec.sample()
        for F in _functionals(m):
            base = functional_estimate(sample, F, np.random.default_rng(1)).value
            for lam in scales:
                val = functional_estimate(sample.scaled(lam), F, np.random.default_rng(1)).value
                worst = max(worst, abs(val / (lam ** F.degree * base) - 1.0))
    return PropertyResult("homogeneity F(lam A) = lam^k F(A)", worst <= tol, {"max_rel_error": worst})


def monotonicity_suite(seed=0, pairs=3, tol=1e-6):
    rng = np.random.default_rng(seed)
    violations = []
    for m in (2, 3):
        for _ in range(pairs):
            a = rng.uniform(0.5, 1.5, m)
            b = a * (1.0 + rng.uniform(0.01, 1.0, m))
            A, B = EllipsoidSpec(a).sample(), EllipsoidSpec(b).sample()
            for F in _functionals(m):
                fa = functional_estimate(A, F).value
                fb = functional_estimate(B, F).value
                if fa > fb * (1.0 + tol):
                    violations.append((m, F.label, fa, fb))
    return PropertyResult("monotonicity A ⊂ B => F(A) <= F(B)", not violations,
                          {"violations": violations})


# ------------------------------------------------------------------ Steiner

def _distance_to_ellipsoid(x, a):
    """Euclidean distance from points x (outside or inside) to the solid ellipsoid."""
    a2 = np.asarray(a, dtype=float) ** 2
    x2 = x ** 2
    outside = np.sum(x2 / a2, axis=1) > 1.0
    dist = np.zeros(len(x))
    xo = x2[outside]
    # sum a_i^2 x_i^2 / (a_i^2 + lam)^2 = 1, decreasing in lam >= 0
    lo = np.zeros(len(xo))
    hi = np.full(len(xo), np.sqrt(np.max(a2) * np.max(np.sum(xo, axis=1))) * 2.0 + 1.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        f = np.sum(a2 * xo / (a2 + mid[:, None]) ** 2, axis=1) - 1.0
        lo = np.where(f > 0, mid, lo)
        hi = np.where(f > 0, hi, mid)
    lam = 0.5 * (lo + hi)
    pts = x[outside] * (a2 / (a2 + lam[:, None]))
    dist[outside] = np.linalg.norm(x[outside] - pts, axis=1)
    return dist


def parallel_volume_mc(semiaxes, r, n=1_000_000, seed=0):
    """Monte Carlo volume of E + r B with its standard error."""
    a = np.asarray(semiaxes, dtype=float)
    m = len(a)
    rng = np.random.default_rng(seed)
    half = a + r
    box = float(np.prod(2.0 * half))
    hits = 0
    chunk = 200_000
    for start in range(0, n, chunk):
        x = (rng.random((min(chunk, n - start), m)) * 2.0 - 1.0) * half
        hits += int(np.sum(_distance_to_ellipsoid(x, a) <= r))
    p = hits / n
    return box * p, box * math.sqrt(p * (1.0 - p) / n)


def steiner_polynomial(semiaxes, r):
    spec = EllipsoidSpec(semiaxes)
    m = spec.dim
    coeffs = [1.0] + [ellipsoid_intrinsic_volume(spec, k) for k in range(1, m + 1)]
    return sum(ball_volume(m - k) * coeffs[k] * r ** (m - k) for k in range(m + 1))


def steiner_suite(radii=(0.1, 0.2), tol=0.005, n=1_000_000, seed=0):
    rows = []
    worst = 0.0
    for axes in ((1.0, 1.0, 1.0), (1.0, 1.2, 1.5)):
        for r in radii:
            mc, se = parallel_volume_mc(axes, r, n=n, seed=seed)
            poly = steiner_polynomial(axes, r)
            err = abs(mc / poly - 1.0)
            worst = max(worst, err)
            rows.append({"semiaxes": axes, "r": r, "mc": mc, "stderr": se, "steiner": poly})
    return PropertyResult("Steiner polynomial", worst <= tol, {"max_rel_error": worst, "cases": rows})


# --------------------------------------------------------------- embedding

def embedding_suite(radius=1.5):
    """V_1, V_2 of a disc agree in R^2 and embedded in R^3."""
    disc = EllipsoidSpec([radius, radius]).sample()
    flat = disc.embedded(1)
    rows = []
    ok = True
    for k in (1, 2):
        a = intrinsic_volume_estimate(disc, k)
        b = intrinsic_volume_estimate(flat, k)
        # the two evaluate the same polygon; the hemisphere rule error bound is the stderr
        bound = 3.0 * math.hypot(a.stderr, b.stderr) + 1e-12 * abs(a.value)
        ok &= abs(a.value - b.value) <= bound
        rows.append({"k": k, "plane": a.value, "embedded": b.value, "bound": bound})
    return PropertyResult("embedding invariance", bool(ok), {"cases": rows})


# ------------------------------------------------------------------- Kubota

KUBOTA_POINTS = {2: 512, 3: 2048, 4: 65536}


def kubota_suite(dims=(2, 3, 4), tol=0.01):
    rows = []
    worst = 0.0
    for m in dims:
        ball = EllipsoidSpec(np.ones(m)).sample(n_rays=KUBOTA_POINTS.get(m, 65536))
        for k in range(1, m):
            est = intrinsic_volume_estimate(ball, k, method="quadrature")
            exact = math.comb(m, k) * ball_volume(m) / ball_volume(m - k)
            err = abs(est.value / exact - 1.0)
            worst = max(worst, err)
            rows.append({"m": m, "k": k, "value": est.value, "exact": exact, "rel_error": err})
    return PropertyResult("Kubota calibration", worst <= tol, {"max_rel_error": worst, "cases": rows})


SUITES = {
    "sandwich": sandwich_suite,
    "paraboloid": paraboloid_ratio_suite,
    "homogeneity": homogeneity_suite,
    "monotonicity": monotonicity_suite,
    "steiner": steiner_suite,
    "embedding": embedding_suite,
    "kubota": kubota_suite,
}


def run_all(names=None):
    names = list(SUITES) if names is None else names
    return [SUITES[n]() for n in names]
