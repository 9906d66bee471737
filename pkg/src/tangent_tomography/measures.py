"""Section and cap bodies of K^eps, intrinsic volumes and monotone homogeneous functionals.

Samples are built by bisection ray-shooting against the membership test of
K^eps (radial test, plus a half-space test for caps). Coordinates are local
to the flat: origin at the tangency point y, axes along the Dupin axes of K
at y, and for caps a last axis along the outer normal.
"""
import csv
from dataclasses import dataclass, field, replace
from math import comb
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.spatial import ConvexHull, QhullError

from .errors import DimensionMismatch, EpsilonTooLarge, UnsupportedCombination
from .spheres import (ball_volume, circle_directions, direction_grid, hemisphere_rule,
                      normalize_rows, random_directions, spherical_product_grid)

DEFAULT_RAYS = {1: 2, 2: 512, 3: 2048}
DEGENERATE_GAUGE = 1.0 - 1e-14


class Estimate(NamedTuple):
    value: float
    stderr: float = 0.0


# ------------------------------------------------------------------ sampling

def unit_directions(m, n=None):
    """Deterministic ray directions in R^m."""
    if n is None:
        n = DEFAULT_RAYS.get(m, 16384)
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        return circle_directions(n)
    if m == 3:
        return direction_grid(3, n)
    return spherical_product_grid(m, n)


def shoot(inside, origin, directions, s_max, tol=1e-12):
    """Largest s in [0, s_max] with origin + s * dir inside, per direction (bisection).

    ``inside`` maps an (n, D) array of points to booleans; the origin must be
    inside and the body convex. Returned lengths stay on the inside.
    """
    directions = np.atleast_2d(directions)
    if np.any(inside(origin + s_max * directions)):
        raise EpsilonTooLarge(f"body extends beyond the patch radius {s_max:.3g}")
    lo = np.zeros(len(directions))
    hi = np.full(len(directions), float(s_max))
    n_iter = int(np.ceil(np.log2(s_max / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        ok = inside(origin + mid[:, None] * directions)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


@dataclass(frozen=True, eq=False)
class FlatMembership:
    """Membership in K^t ∩ (flat) [∩ H^+], for points in the flat's local coordinates."""

    family: object
    t: float
    origin: np.ndarray
    basis: np.ndarray
    normal: np.ndarray = None

    def to_space(self, z):
        return self.origin + np.asarray(z, dtype=float) @ self.basis

    def __call__(self, z):
        p = self.to_space(z)
        ok = self.family.gauge(p, self.t) <= 1.0
        if self.normal is not None:
            ok &= (p - self.origin) @ self.normal >= 0.0
        return ok


@dataclass(frozen=True, eq=False)
class ScaledMembership:
    inner: object
    factor: float

    def __call__(self, z):
        return self.inner(np.asarray(z, dtype=float) / self.factor)


@dataclass(frozen=True, eq=False)
class ConvexSample:
    """Numeric representation of a convex set of intrinsic dimension ``dim``.

    ``points`` are boundary points in local coordinates; ``directions`` and
    ``support`` hold the ray directions and the support function of the
    sample evaluated there. ``origin``/``basis`` embed local coordinates into
    the ambient space.
    """

    dim: int
    points: np.ndarray
    anchor: np.ndarray
    origin: np.ndarray
    basis: np.ndarray
    directions: np.ndarray = None
    support: np.ndarray = None
    lengths: np.ndarray = None
    degenerate: bool = False
    membership: object = None
    kind: str = "points"
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_points(cls, points, membership=None, origin=None, basis=None, directions=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[1]
        if directions is None:
            directions = unit_directions(m, min(DEFAULT_RAYS.get(m, 4096), 4096))
        origin = np.zeros(m) if origin is None else np.asarray(origin, dtype=float)
        basis = np.eye(m) if basis is None else np.asarray(basis, dtype=float)
        return cls(dim=m, points=points, anchor=points.mean(axis=0), origin=origin, basis=basis,
                   directions=directions, support=support_values(points, directions),
                   membership=membership)

    @classmethod
    def point(cls, m, origin, basis, kind):
        z = np.zeros((1, m))
        return cls(dim=m, points=z, anchor=np.zeros(m), origin=origin, basis=basis,
                   degenerate=True, kind=kind)

    def support_at(self, w):
        return support_values(self.points, w)

    def scaled(self, factor):
        """The sample of factor * A about the local origin."""
        mem = None if self.membership is None else ScaledMembership(self.membership, factor)
        return replace(self, points=self.points * factor, anchor=self.anchor * factor,
                       support=None if self.support is None else self.support * factor,
                       lengths=None if self.lengths is None else self.lengths * factor,
                       membership=mem)

    def embedded(self, extra):
        """Same set viewed in R^(dim + extra) (zero trailing coordinates)."""
        pad = np.zeros((len(self.points), extra))
        pts = np.hstack([self.points, pad])
        return ConvexSample.from_points(pts)

    def ambient_points(self):
        return self.origin + self.points @ self.basis

    def boundary_residual(self, family, t):
        """max |gauge - 1| of ray points that hit the curved part of bd K^t."""
        if self.lengths is None or self.degenerate:
            return 0.0
        local = self.points
        if self.kind == "cap":
            # drop points on the cutting hyperplane
            local = local[local[:, -1] > 1e-6 * self.meta["height"]]
        pts = self.origin + local @ self.basis
        g = family.gauge(pts, t)
        return float(np.max(np.abs(g - 1.0)))

    def convexity_defect(self, rng, n_pairs=200):
        """Fraction of random boundary-pair midpoints outside the body (needs membership)."""
        if self.membership is None or self.degenerate:
            return 0.0
        i = rng.integers(0, len(self.points), n_pairs)
        j = rng.integers(0, len(self.points), n_pairs)
        mid = 0.5 * (self.points[i] + self.points[j])
        # pull 1e-8 of the way towards the anchor to absorb bisection round-off
        mid = mid + 1e-8 * (self.anchor - mid)
        return float(np.mean(~self.membership(mid)))


def support_values(points, directions, chunk_elems=2 ** 23):
    directions = np.atleast_2d(directions)
    points_t = np.asarray(points).T
    step = max(1, chunk_elems // max(points_t.shape[1], 1))
    if len(directions) <= step:
        return np.max(directions @ points_t, axis=1)
    return np.concatenate([np.max(directions[i:i + step] @ points_t, axis=1)
                           for i in range(0, len(directions), step)])


def _dupin_scaled_directions(frame, m, n):
    semiaxes = 1.0 / np.sqrt(np.diag(frame.form))
    return normalize_rows(unit_directions(m, n) * semiaxes)


def section_body(family, flat, eps, n_rays=None, patch_radius=None):
    """Sample of K^eps ∩ Y for a tangent flat Y of K (the section S^eps)."""
    fam = flat.restricted(family)
    frame = flat.frame
    m = flat.dim
    y = frame.point
    if patch_radius is None:
        patch_radius = 0.5 * np.linalg.norm(y)
    if fam.gauge(y, eps) >= DEGENERATE_GAUGE:
        return ConvexSample.point(m, flat.base_point, flat.basis, "section")
    dirs = _dupin_scaled_directions(frame, m, n_rays)
    inside = FlatMembership(fam, eps, y, frame.tangent)
    lengths = shoot(inside, np.zeros(m), dirs, patch_radius)
    pts = lengths[:, None] * dirs
    return ConvexSample(dim=m, points=pts, anchor=np.zeros(m), origin=flat.base_point,
                        basis=flat.basis, directions=dirs, support=support_values(pts, dirs),
                        lengths=lengths, membership=inside, kind="section",
                        meta={"eps": eps, "flat_id": flat.flat_id})


def cap_body(family, flat, eps, n_rays=None, n_rim=None, patch_radius=None):
    """Sample of K^eps ∩ H^+ for a tangent hyperplane H of K (the cap C^eps).

    Local coordinates: Dupin-axis coordinates in H, then height along the
    outer normal. Rays leave the midpoint of y and the far boundary point
    x^eps on the normal; the rim K^eps ∩ H is sampled separately.
    """
    if not flat.is_hyperplane:
        raise DimensionMismatch("caps are cut by tangent hyperplanes (l = d - 1)")
    fam = flat.restricted(family)
    frame = flat.frame
    d = frame.dim
    y = frame.point
    nu = frame.normal
    basis = np.vstack([flat.basis, flat.normal])
    if patch_radius is None:
        patch_radius = 0.5 * np.linalg.norm(y)
    if fam.gauge(y, eps) >= DEGENERATE_GAUGE:
        return ConvexSample.point(d, flat.base_point, basis, "cap")
    local_axes = np.vstack([frame.tangent, nu])
    inside = FlatMembership(fam, eps, y, local_axes, normal=nu)

    height = shoot(inside, np.zeros(d), np.eye(d)[-1:], patch_radius)[0]
    rim_dirs = _dupin_scaled_directions(frame, d - 1, n_rim)
    rim_len = shoot(inside, np.zeros(d), np.hstack([rim_dirs, np.zeros((len(rim_dirs), 1))]),
                    patch_radius)
    rim = np.hstack([rim_len[:, None] * rim_dirs, np.zeros((len(rim_dirs), 1))])

    scales = np.append(np.max(np.abs(rim[:, :-1]), axis=0), 0.5 * height)
    dirs = normalize_rows(unit_directions(d, n_rays) * scales)
    anchor = np.zeros(d)
    anchor[-1] = 0.5 * height
    lengths = shoot(inside, anchor, dirs, patch_radius)
    tip = np.zeros((1, d))
    tip[0, -1] = height
    pts = np.vstack([rim, anchor + lengths[:, None] * dirs, tip])
    return ConvexSample(dim=d, points=pts, anchor=anchor, origin=flat.base_point, basis=basis,
                        directions=dirs, support=support_values(pts, dirs),
                        lengths=lengths, membership=inside, kind="cap",
                        meta={"eps": eps, "flat_id": flat.flat_id, "height": height})


def dump_sample_csv(sample, path):
    pts = sample.ambient_points()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(pts.shape[1])])
        for p in pts:
            writer.writerow([repr(float(v)) for v in p])


# --------------------------------------------------------- intrinsic volumes

def kubota_constant(m, k):
    return comb(m, k) * ball_volume(m) / (ball_volume(k) * ball_volume(m - k))


def _hull(points):
    try:
        return ConvexHull(points)
    except (QhullError, ValueError):
        return None


def _polytope_mean_width_3d(hull):
    """V_1 of a 3-polytope: sum over edges of length * external angle / (2 pi)."""
    simp = hull.simplices
    normals = hull.equations[:, :3]
    total = 0.0
    for j in range(3):
        nb = hull.neighbors[:, j]
        f = np.arange(len(simp))
        keep = f < nb
        f, g = f[keep], nb[keep]
        edge = np.delete(simp[f], j, axis=1)
        length = np.linalg.norm(hull.points[edge[:, 0]] - hull.points[edge[:, 1]], axis=1)
        angle = np.arccos(np.clip(np.sum(normals[f] * normals[g], axis=1), -1.0, 1.0))
        total += np.sum(length * angle)
    return total / (2.0 * np.pi)


def _exact_polytope(points, k):
    m = points.shape[1]
    if m == 1:
        return float(points.max() - points.min())
    hull = _hull(points)
    if hull is None:
        return None
    if k == m:
        return float(hull.volume)
    if k == m - 1:
        return float(hull.area) / 2.0
    return float(_polytope_mean_width_3d(hull))


def mean_width_estimate(sample, rng=None, n=None):
    """V_1 from averaged support values (quadrature for m <= 3, Monte Carlo above)."""
    m = sample.dim
    pts = sample.points
    const = m * ball_volume(m) / ball_volume(m - 1)
    if m == 1:
        return Estimate(float(pts.max() - pts.min()))
    if m == 2:
        w = circle_directions(n or 4096)
        return Estimate(const * float(np.mean(support_values(pts, w))))
    if m == 3:
        n_polar, n_az = n or (32, 64)
        vals = []
        for rule in ((n_polar, n_az), (n_polar // 2, n_az // 2)):
            w, wt = hemisphere_rule(*rule)
            vals.append(const * float(wt @ (0.5 * (support_values(pts, w) + support_values(pts, -w)))))
        return Estimate(vals[0], abs(vals[0] - vals[1]))
    rng = rng or np.random.default_rng(0)
    w = random_directions(m, n or 20000, rng)
    vals = 0.5 * (support_values(pts, w) + support_values(pts, -w))
    return Estimate(const * float(vals.mean()), const * float(vals.std(ddof=1) / np.sqrt(len(vals))))


def _projection_volume(points, frame):
    proj = points @ frame.T
    k = frame.shape[0]
    if k == 1:
        return float(proj.max() - proj.min())
    hull = _hull(proj)
    if hull is not None and k <= 3:
        return float(hull.volume)
    if hull is None:
        return 0.0
    return intrinsic_volume(ConvexSample.from_points(proj), k)


def kubota_estimate(sample, k, rng=None, n=None):
    """V_k as the Kubota average of k-dimensional projection volumes."""
    m = sample.dim
    const = kubota_constant(m, k)
    pts = sample.points
    if m == 3 and k == 2:
        n_polar, n_az = n or (24, 48)
        vals = []
        for rule in ((n_polar, n_az), (n_polar, n_az // 2)):
            w, wt = hemisphere_rule(*rule)
            areas = np.array([_projection_volume(pts, _complement_frame(v)) for v in w])
            vals.append(const * float(wt @ areas))
        return Estimate(vals[0], abs(vals[0] - vals[1]))
    rng = rng or np.random.default_rng(0)
    n = n or 400
    vols = np.empty(n)
    for i in range(n):
        q, _ = np.linalg.qr(rng.standard_normal((m, k)))
        vols[i] = _projection_volume(pts, q.T)
    return Estimate(const * float(vols.mean()), const * float(vols.std(ddof=1) / np.sqrt(n)))


def _complement_frame(w):
    _, _, vt = np.linalg.svd(w[None, :])
    return vt[1:]


def monte_carlo_volume(sample, rng=None, n=400000, margin=0.05):
    """Volume by rejection sampling in a padded bounding box.

    Uses the exact membership oracle when the sample carries one, otherwise
    the polyhedron cut out by the support values.
    """
    rng = rng or np.random.default_rng(0)
    pts = sample.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * (hi - lo)
    lo, hi = lo - pad, hi + pad
    box = float(np.prod(hi - lo))
    inside_total = 0
    chunk = 50000
    done = 0
    while done < n:
        z = lo + (hi - lo) * rng.random((min(chunk, n - done), sample.dim))
        if sample.membership is not None:
            ok = sample.membership(z)
        else:
            ok = np.all(z @ sample.directions.T <= sample.support[None, :], axis=1)
        inside_total += int(np.sum(ok))
        done += len(z)
    p = inside_total / n
    return Estimate(box * p, box * float(np.sqrt(p * (1 - p) / n)))


def intrinsic_volume_estimate(sample, k, method="auto", rng=None):
    """k-th intrinsic volume of a sample with an error estimate.

    ``auto`` uses exact polytope formulas of the sampled hull for m <= 3
    (volume, half surface area, edge/external-angle sum) and falls back to
    quadrature, Kubota averaging and Monte Carlo otherwise; ``quadrature``
    forces the averaging formulas.
    """
    m = sample.dim
    if not 1 <= k <= m:
        raise DimensionMismatch(f"need 1 <= k <= {m}, got k={k}")
    if sample.degenerate:
        return Estimate(0.0, 0.0)
    if m == 1:
        return Estimate(float(sample.points.max() - sample.points.min()))
    if method == "auto" and m <= 3:
        val = _exact_polytope(sample.points, k)
        if val is not None:
            return Estimate(val, 0.0)
    if k == m:
        if m <= 3:
            hull = _hull(sample.points)
            return Estimate(0.0 if hull is None else float(hull.volume), 0.0)
        return monte_carlo_volume(sample, rng)
    if k == 1:
        return mean_width_estimate(sample, rng)
    return kubota_estimate(sample, k, rng)


def intrinsic_volume(sample, k, method="auto", rng=None):
    return intrinsic_volume_estimate(sample, k, method, rng).value


# ----------------------------------------------------------------- ellipsoids

@dataclass(frozen=True, eq=False)
class EllipsoidSpec:
    """center + sum_i t_i * semiaxes_i * axes_i with |t| <= 1."""

    semiaxes: np.ndarray
    center: np.ndarray = None
    axes: np.ndarray = None

    def __post_init__(self):
        a = np.asarray(self.semiaxes, dtype=float)
        if np.any(a <= 0):
            raise ValueError("semiaxes must be positive")
        object.__setattr__(self, "semiaxes", a)
        if self.center is None:
            object.__setattr__(self, "center", np.zeros(len(a)))
        if self.axes is None:
            object.__setattr__(self, "axes", np.eye(len(a)))

    @classmethod
    def from_dupin(cls, dupin, scale=1.0):
        return cls(semiaxes=scale * np.asarray(dupin.semiaxes), axes=dupin.axes)

    @property
    def dim(self):
        return len(self.semiaxes)

    def sample(self, n_rays=None):
        m = self.dim
        w = unit_directions(m, n_rays)
        local = w * self.semiaxes
        pts = self.center + local @ self.axes
        return ConvexSample.from_points(pts, membership=EllipsoidMembership(self))

    def contains(self, z):
        local = (np.asarray(z, dtype=float) - self.center) @ self.axes.T
        return np.sum((local / self.semiaxes) ** 2, axis=-1) <= 1.0


@dataclass(frozen=True, eq=False)
class EllipsoidMembership:
    spec: EllipsoidSpec

    def __call__(self, z):
        return self.spec.contains(z)


def _gaussian_norm_mean(a):
    """E ||diag(a) g|| for a standard Gaussian vector g, by a 1-D integral."""
    a = np.asarray(a, dtype=float)
    s0 = np.max(a)
    b2 = (a / s0) ** 2

    def integrand(x):
        s = np.exp(x)
        return -np.expm1(-0.5 * np.sum(np.log1p(2.0 * s * b2))) * s ** -0.5

    val, _ = integrate.quad(integrand, -80.0, 80.0, epsabs=0, epsrel=1e-12, limit=400)
    return s0 * val / (2.0 * np.sqrt(np.pi))


def _gaussian_norm_mean_iso(m):
    from math import gamma, sqrt
    return sqrt(2.0) * gamma((m + 1) / 2.0) / gamma(m / 2.0)


def ellipsoid_intrinsic_volume(spec, k, rng=None, n_mc=200000):
    """V_k of an ellipsoid (exact for k = m, 1-D quadrature for k = 1 and k = m - 1)."""
    a = np.asarray(spec.semiaxes, dtype=float)
    m = len(a)
    if not 1 <= k <= m:
        raise DimensionMismatch(f"need 1 <= k <= {m}, got k={k}")
    if k == m:
        return ball_volume(m) * float(np.prod(a))
    if k == 1:
        mean_h = _gaussian_norm_mean(a) / _gaussian_norm_mean_iso(m)
        return m * ball_volume(m) / ball_volume(m - 1) * mean_h
    if k == m - 1:
        mean_inv = _gaussian_norm_mean(1.0 / a) / _gaussian_norm_mean_iso(m)
        return 0.5 * m * ball_volume(m) * float(np.prod(a)) * mean_inv
    rng = rng or np.random.default_rng(12345)
    a2 = a ** 2
    vals = np.empty(n_mc)
    for i in range(0, n_mc, 10000):
        q, _ = np.linalg.qr(rng.standard_normal((10000, m, k)))
        gram = np.einsum("nik,i,nil->nkl", q, a2, q)
        vals[i:i + 10000] = np.sqrt(np.linalg.det(gram))
    return kubota_constant(m, k) * ball_volume(k) * float(vals.mean())


# ---------------------------------------------------------------- functionals

FUNCTIONAL_KINDS = ("intrinsic_volume", "mean_width_power", "john_ellipsoid_volume")


@dataclass(frozen=True)
class FunctionalDescriptor:
    """A monotone, positively homogeneous functional of degree ``degree``."""

    kind: str = "intrinsic_volume"
    degree: int = 1
    monotone: bool = True

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise UnsupportedCombination(f"unknown functional kind {self.kind!r}")
        if self.degree < 1:
            raise UnsupportedCombination("degree must be >= 1")

    def validate(self, m):
        if self.kind == "john_ellipsoid_volume" and self.degree != m:
            raise UnsupportedCombination(
                f"john_ellipsoid_volume has degree m={m}, not {self.degree}")
        if self.kind == "intrinsic_volume" and self.degree > m:
            raise DimensionMismatch(f"V_{self.degree} undefined in dimension {m}")
        return self

    @property
    def label(self):
        return f"{self.kind}[{self.degree}]"


def _sym_basis(m):
    mats = []
    for i in range(m):
        for j in range(i, m):
            e = np.zeros((m, m))
            e[i, j] = e[j, i] = 1.0
            mats.append(e)
    return np.array(mats)


def _inscribed_ellipsoid(A, b, tol=1e-11, max_newton=200):
    """Max-volume ellipsoid {B w + c : |w| <= 1} in {x : A x <= b} (unit rows, b > 0).

    Barrier method: minimise -log det B - mu * sum log(b - A c - |B a_i|)
    by damped Newton steps along a decreasing mu; the duality gap is about mu * N.
    """
    n_con, m = A.shape
    E = _sym_basis(m)
    P = len(E)
    G = np.einsum("pjk,nk->njp", E, A)  # G[i] maps sym. coordinates to B a_i
    B0 = 0.5 * float(np.min(b)) * np.eye(m)
    beta = np.array([B0[i, j] for i in range(m) for j in range(i, m)])
    x = np.concatenate([beta, np.zeros(m)])

    def unpack(x):
        return np.einsum("p,pjk->jk", x[:P], E), x[P:]

    def phi(x, mu):
        B, c = unpack(x)
        try:
            np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            return np.inf
        s = b - A @ c - np.linalg.norm(A @ B, axis=1)
        if np.any(s <= 0):
            return np.inf
        return -np.linalg.slogdet(B)[1] - mu * np.sum(np.log(s))

    mu = 1.0
    while True:
        for _ in range(max_newton):
            B, c = unpack(x)
            Binv = np.linalg.inv(B)
            v = A @ B
            nv = np.linalg.norm(v, axis=1)
            vh = v / nv[:, None]
            s = b - A @ c - nv
            gb = np.einsum("njp,nj->np", G, vh)
            gs = -np.hstack([gb, A])  # gradient of s_i
            grad = np.concatenate([-np.einsum("jk,pkj->p", Binv, E), np.zeros(m)])
            grad -= mu * np.sum(gs / s[:, None], axis=0)
            hess = np.zeros((P + m, P + m))
            BE = np.einsum("jk,pkl->pjl", Binv, E)
            hess[:P, :P] = np.einsum("pjk,qkj->pq", BE, BE)
            hess += mu * (gs / s[:, None]).T @ (gs / s[:, None])
            proj = np.eye(m)[None] - vh[:, :, None] * vh[:, None, :]
            curv = np.einsum("njp,njk,nkq->pq", G / np.sqrt(s * nv)[:, None, None], proj,
                             G / np.sqrt(s * nv)[:, None, None])
            hess[:P, :P] += mu * curv
            step = -np.linalg.solve(hess, grad)
            dec = float(-grad @ step)
            if dec / 2.0 <= 1e-14:
                break
            f0 = phi(x, mu)
            t = 1.0
            while phi(x + t * step, mu) > f0 - 0.25 * t * dec:
                t *= 0.5
                if t < 1e-14:
                    break
            x = x + t * step
        if mu * n_con < tol:
            break
        mu *= 0.1
    return unpack(x)


def john_ellipsoid(points):
    """Maximum-volume inscribed ellipsoid of conv(points): returns (B, c), E = B ball + c.

    Works on the hull's facet inequalities after whitening the points (the
    answer is affine-equivariant).
    """
    points = np.asarray(points, dtype=float)
    m = points.shape[1]
    mean = points.mean(axis=0)
    cov = np.cov((points - mean).T).reshape(m, m)
    evals, evecs = np.linalg.eigh(cov)
    whiten = evecs / np.sqrt(evals)
    z = (points - mean) @ whiten
    hull = ConvexHull(z)
    A = hull.equations[:, :m]
    b = -hull.equations[:, m]
    B, c = _inscribed_ellipsoid(A, b)
    unwhiten = np.linalg.inv(whiten)
    return unwhiten.T @ B, mean + c @ unwhiten


def john_ellipsoid_volume(sample):
    m = sample.dim
    if sample.degenerate:
        return 0.0
    if m == 1:
        return float(sample.points.max() - sample.points.min())
    B, _ = john_ellipsoid(sample.points)
    return ball_volume(m) * abs(float(np.linalg.det(B)))


def functional_estimate(sample, functional, rng=None):
    functional.validate(sample.dim)
    if sample.degenerate:
        return Estimate(0.0, 0.0)
    k = functional.degree
    if functional.kind == "intrinsic_volume":
        return intrinsic_volume_estimate(sample, k, rng=rng)
    if functional.kind == "mean_width_power":
        v1 = intrinsic_volume_estimate(sample, 1, rng=rng)
        return Estimate(v1.value ** k, k * v1.value ** (k - 1) * v1.stderr)
    return Estimate(john_ellipsoid_volume(sample), 0.0)


def functional_value(sample, functional, rng=None):
    return functional_estimate(sample, functional, rng).value


# ------------------------------------------------------- reference geometry

def sandwich_check(sample, dupin, c1, c2, eps, tol=1e-8):
    """Whether sqrt(c1 eps) E ⊂ S ⊂ sqrt(c2 eps) E holds on the sampled support directions.

    ``c1=None`` checks only the upper inclusion (the c(x) = 0 case).
    """
    slack = tol * np.sqrt(eps)
    dirs = sample.directions if sample.directions is not None else unit_directions(sample.dim)
    h_s = np.zeros(len(dirs)) if sample.degenerate else sample.support_at(dirs)
    h_e = dupin.support(dirs)
    upper = bool(np.all(h_s <= np.sqrt(c2 * eps) * h_e + slack))
    if c1 is None:
        return upper
    lower = bool(np.all(h_s >= np.sqrt(c1 * eps) * h_e - slack))
    return upper and lower


def _ellipsoid_region_integral(lam, R, integrand):
    """Integrate integrand(sum lam_i y_i^2) over {sum lam_i y_i^2 <= R}, iterated quadrature."""
    lam = np.asarray(lam, dtype=float)
    n = len(lam)

    def func(*ys):
        return integrand(float(np.dot(lam, np.square(ys))))

    def make_range(i):
        def rng(*outer):
            rem = R - float(np.dot(lam[i + 1:], np.square(outer)))
            half = np.sqrt(max(rem, 0.0) / lam[i])
            return (-half, half)
        return rng

    ranges = [make_range(i) for i in range(n)]
    val, _ = integrate.nquad(func, ranges, opts={"epsabs": 0.0, "epsrel": 1e-11, "limit": 200})
    return val


def paraboloid_cap_ratio(Q, c, eps):
    """Volume of {-c eps + z^T Q z <= x_d <= 0} over that of its circumscribed right cylinder."""
    lam = np.linalg.eigvalsh(np.atleast_2d(np.asarray(Q, dtype=float)))
    R = c * eps
    cap = _ellipsoid_region_integral(lam, R, lambda q: R - q)
    base = _ellipsoid_region_integral(lam, R, lambda q: 1.0)
    return cap / (R * base)


@dataclass(frozen=True, eq=False)
class ParaboloidCapMembership:
    form: np.ndarray

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        tz = z[..., :-1]
        q = np.einsum("...i,ij,...j->...", tz, self.form, tz)
        h = z[..., -1]
        return (h >= 0.0) & (h <= 1.0 - q)


@dataclass(frozen=True, eq=False)
class ReferenceCapShapes:
    """E, the normalised paraboloid cap E' (c eps = 1) and circumscribed cylinders."""

    dupin: object

    @property
    def form(self):
        return np.asarray(self.dupin.form, dtype=float)

    @property
    def dim(self):
        return self.dupin.dim + 1

    def base_volume(self, c=1.0, eps=1.0):
        return ball_volume(self.dupin.dim) * float(np.prod(self.dupin.semiaxes)) * (c * eps) ** (
            self.dupin.dim / 2.0)

    def cylinder_volume(self, c=1.0, eps=1.0):
        return c * eps * self.base_volume(c, eps)

    def cap_volume(self, c=1.0, eps=1.0):
        return 2.0 / (self.dim + 1) * self.cylinder_volume(c, eps)

    def paraboloid_cap_sample(self, n_rays=None, n_rim=None):
        d = self.dim
        member = ParaboloidCapMembership(self.form)
        rim_w = unit_directions(d - 1, n_rim)
        rim_local = rim_w / np.sqrt(np.einsum("ni,ij,nj->n", rim_w, self.form, rim_w))[:, None]
        rim = np.hstack([rim_local, np.zeros((len(rim_local), 1))])
        # Q^(-1/2) maps the unit ball onto E
        inv_sqrt = self.dupin.axes.T @ np.diag(self.dupin.semiaxes) @ self.dupin.axes
        w = unit_directions(d, n_rays)
        dirs = normalize_rows(np.hstack([w[:, :-1] @ inv_sqrt, 0.5 * w[:, -1:]]))
        scales = np.append(np.asarray(self.dupin.semiaxes), 0.5)
        anchor = np.zeros(d)
        anchor[-1] = 0.5
        lengths = shoot(member, anchor, dirs, 4.0 * float(np.max(scales)))
        tip = np.zeros((1, d))
        tip[0, -1] = 1.0
        pts = np.vstack([rim, anchor + lengths[:, None] * dirs, tip])
        return ConvexSample(dim=d, points=pts, anchor=anchor, origin=np.zeros(d), basis=np.eye(d),
                            directions=dirs, support=support_values(pts, dirs), lengths=lengths,
                            membership=member, kind="paraboloid-cap")
