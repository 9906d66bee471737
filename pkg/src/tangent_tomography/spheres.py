"""Direction grids, quadrature rules on spheres and ball-volume constants."""
import math

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def ball_volume(m):
    """kappa_m, the volume of the m-dimensional unit ball (kappa_0 = 1)."""
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def sphere_area(m):
    """(m-1)-dimensional area of the unit sphere in R^m."""
    return m * ball_volume(m)


def normalize_rows(a):
    a = np.asarray(a, dtype=float)
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def circle_directions(n, offset=0.0):
    theta = 2.0 * np.pi * (np.arange(n) + offset) / n
    return np.column_stack([np.cos(theta), np.sin(theta)])


def fibonacci_sphere(n):
    j = np.arange(n)
    z = 1.0 - (2.0 * j + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = j * GOLDEN_ANGLE
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def spherical_product_grid(d, n):
    """Tensor-product grid in hyperspherical angles, roughly n points on S^{d-1}."""
    per = max(2, int(math.ceil((n / 2.0) ** (1.0 / (d - 1)))))
    polar = [(np.arange(per) + 0.5) * np.pi / per for _ in range(d - 2)]
    azim = 2.0 * np.pi * np.arange(2 * per) / (2 * per)
    mesh = np.meshgrid(*polar, azim, indexing="ij")
    angles = np.stack([m.ravel() for m in mesh], axis=1)
    out = np.ones((angles.shape[0], d))
    for i in range(d - 1):
        out[:, i] *= np.cos(angles[:, i])
        out[:, i + 1:] *= np.sin(angles[:, i])[:, None]
    return out


DEFAULT_GRID_SIZE = {2: 256, 3: 1024}


def direction_grid(d, n=None):
    """Deterministic quasi-uniform directions on S^{d-1}."""
    if n is None:
        n = DEFAULT_GRID_SIZE.get(d, 4096)
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        return circle_directions(n)
    if d == 3:
        return fibonacci_sphere(n)
    return spherical_product_grid(d, n)


def grid_spacing(d, n):
    """Typical angular spacing of an n-point grid on S^{d-1}."""
    if d == 2:
        return 2.0 * np.pi / n
    return (sphere_area(d) / n) ** (1.0 / (d - 1))


def random_directions(m, n, rng):
    return normalize_rows(rng.standard_normal((n, m)))


def hemisphere_rule(n_polar=24, n_azimuth=48):
    """Product rule averaging over the upper hemisphere of S^2.

    Gauss-Legendre in cos(theta) on [0, 1] keeps the equator (where
    projection functions of flat bodies have a kink) at an interval end.
    Returns (directions, weights) with weights summing to one.
    """
    x, w = np.polynomial.legendre.leggauss(n_polar)
    cos_t = 0.5 * (x + 1.0)
    w_t = 0.5 * w
    phi = 2.0 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    ct, ph = np.meshgrid(cos_t, phi, indexing="ij")
    st = np.sqrt(1.0 - ct ** 2)
    dirs = np.column_stack([(st * np.cos(ph)).ravel(), (st * np.sin(ph)).ravel(), ct.ravel()])
    weights = np.repeat(w_t, n_azimuth) / n_azimuth
    return dirs, weights


def orthonormal_complement(vectors, d):
    """Orthonormal basis (rows) of the complement of span(vectors) in R^d."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vectors.size == 0:
        return np.eye(d)
    _, s, vt = np.linalg.svd(vectors, full_matrices=True)
    rank = int(np.sum(s > 1e-12 * max(1.0, s.max())))
    return vt[rank:]


def task_rng(seed, *keys):
    """RNG derived from a global seed and integer task keys; scheduling-independent."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2 ** 63 - 1), *[int(k) for k in keys]]))
