"""Epsilon sweeps and extraction of the limits g(eps) / eps^alpha as eps -> 0.

Section values scale like eps^(k/2); cap values like eps^(k/2) for
k <= d - 1 and eps^((d+1)/2) for the volume-type functionals (k = d).
"""
import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EpsilonTooLarge, PoorFit, UnsupportedCombination
from .bodies import dupin_hull
from .measures import (EllipsoidSpec, ReferenceCapShapes, cap_body,
                       ellipsoid_intrinsic_volume, functional_estimate, john_ellipsoid_volume,
                       section_body)
from .spheres import ball_volume, task_rng

MODES = ("sections", "cap_volume", "cap_intrinsic")
ZERO_FLOOR = 1e-6
MAX_RESIDUAL = 0.05


@dataclass(frozen=True)
class EpsilonGrid:
    """Geometric grid start * ratio**i, i < count."""

    start: float = 2.0 ** -6
    ratio: float = 0.5
    count: int = 9

    def __post_init__(self):
        if not (self.start > 0 and 0 < self.ratio < 1 and self.count >= 1):
            raise ValueError("epsilon grid needs start > 0, 0 < ratio < 1, count >= 1")

    @property
    def values(self):
        return self.start * self.ratio ** np.arange(self.count)


@dataclass(frozen=True, eq=False)
class MeasurementSeries:
    epsilons: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    alpha: float
    flat_id: int = 0
    direction: np.ndarray = None
    functional: str = ""
    mode: str = "sections"
    k: int = 1
    dropped: int = 0

    @property
    def scaled(self):
        return self.values / self.epsilons ** self.alpha

    @property
    def scaled_stderr(self):
        return self.stderrs / self.epsilons ** self.alpha


@dataclass(frozen=True)
class LimitEstimate:
    limit: float
    stderr: float = 0.0
    residual: float = 0.0
    correction: tuple = ()
    zero: bool = False
    model: str = "sqrt"


def check_mode(mode, functional, d, l=None):
    """Validate a (mode, functional) pair and return the scaling exponent alpha."""
    k = functional.degree
    if mode == "sections":
        l = d - 1 if l is None else l
        functional.validate(l)
        return k / 2.0
    if mode == "cap_volume":
        if k != d or functional.kind == "mean_width_power":
            raise UnsupportedCombination("cap_volume needs a volume-type functional of degree d")
        functional.validate(d)
        return (d + 1) / 2.0
    if mode == "cap_intrinsic":
        if not 1 <= k <= d - 1:
            raise DimensionMismatch("cap_intrinsic needs 1 <= k <= d - 1")
        if functional.kind == "john_ellipsoid_volume":
            raise UnsupportedCombination("john_ellipsoid_volume is only defined with k = d")
        return k / 2.0
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def measure(family, flat, eps, functional, mode, rng=None, n_rays=None):
    if mode == "sections":
        sample = section_body(family, flat, eps, n_rays=n_rays)
    else:
        sample = cap_body(family, flat, eps, n_rays=n_rays)
    return functional_estimate(sample, functional, rng)


def sweep(family, flat, functional, grid=None, mode="sections", seed=0, n_rays=None,
          min_points=5):
    """Functional values on the epsilon grid for one flat.

    Leading (largest) epsilons whose section or cap leaves the local patch
    are dropped, keeping at least ``min_points`` points.
    """
    grid = grid or EpsilonGrid()
    d = flat.subspace.shape[0]
    alpha = check_mode(mode, functional, d, flat.dim)
    eps_all = grid.values
    kept_eps, vals, errs = [], [], []
    dropped = 0
    for i, eps in enumerate(eps_all):
        try:
            est = measure(family, flat, eps, functional, mode,
                          rng=task_rng(seed, flat.flat_id, i), n_rays=n_rays)
        except EpsilonTooLarge:
            if kept_eps:
                raise
            dropped += 1
            continue
        kept_eps.append(eps)
        vals.append(est.value)
        errs.append(est.stderr)
    if len(kept_eps) < min_points:
        raise EpsilonTooLarge(f"only {len(kept_eps)} grid points inside the local patch")
    return MeasurementSeries(
        epsilons=np.array(kept_eps), values=np.array(vals), stderrs=np.array(errs),
        alpha=alpha, flat_id=flat.flat_id, direction=flat.direction,
        functional=functional.label, mode=mode, k=functional.degree, dropped=dropped)


def _fit(eps, y, sig, ncol):
    X = np.column_stack([np.ones_like(eps), np.sqrt(eps), eps][:ncol])
    n, p = X.shape
    if sig is not None:
        w = 1.0 / sig
        beta, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
        cov = np.linalg.inv((X * (w ** 2)[:, None]).T @ X)
        chi2 = float(np.sum(((y - X @ beta) * w) ** 2))
        if n > p:
            cov = cov * max(1.0, chi2 / (n - p))
    else:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        rss = float(np.sum((y - X @ beta) ** 2))
        cov = np.linalg.inv(X.T @ X) * (rss / (n - p) if n > p else 0.0)
    resid = y - X @ beta
    return beta, float(np.sqrt(max(cov[0, 0], 0.0))), resid


def extract_limit(series, zero_floor=ZERO_FLOOR, max_residual=MAX_RESIDUAL):
    """Fit y = L + a sqrt(eps) (then L + a sqrt(eps) + b eps) to y_i = g_i / eps_i^alpha."""
    eps = np.asarray(series.epsilons, dtype=float)
    y = np.asarray(series.scaled, dtype=float)
    if len(eps) < 4:
        raise ValueError("need at least 4 grid points")
    if np.all(y == 0):
        return LimitEstimate(0.0, 0.0, 0.0, (0.0,), True)
    sig = np.asarray(series.scaled_stderr, dtype=float)
    sig = sig if np.all(sig > 0) else None
    rel = np.inf
    for ncol, model in ((2, "sqrt"), (3, "sqrt+linear")):
        beta, stderr, resid = _fit(eps, y, sig, ncol)
        rel = float(np.sqrt(np.mean(resid ** 2)) / max(abs(beta[0]), zero_floor))
        if rel <= max_residual:
            break
    else:
        raise PoorFit(f"relative fit residual {rel:.3g} exceeds {max_residual}", residual=rel)
    limit = max(float(beta[0]), 0.0)
    zero = limit < max(3.0 * stderr, zero_floor)
    return LimitEstimate(limit, stderr, rel, tuple(float(b) for b in beta[1:]), zero, model)


def invert_limit(est, reference, alpha):
    """c_hat = (L / reference)^(1/alpha); zero-flagged limits give 0."""
    if est.zero or est.limit <= 0:
        return 0.0
    return (est.limit / reference) ** (1.0 / alpha)


def invert_section_limit(est, F_of_E, k):
    return invert_limit(est, F_of_E, k / 2.0)


def invert_cap_volume_limit(est, Q, d):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    reference = ball_volume(d - 1) / np.sqrt(np.linalg.det(Q)) * 2.0 / (d + 1)
    return invert_limit(est, reference, (d + 1) / 2.0)


def invert_cap_intrinsic_limit(est, V_k_of_E, k):
    return invert_limit(est, V_k_of_E, k / 2.0)


def c_hat_stderr(est, c_hat, alpha):
    if c_hat == 0.0 or est.limit <= 0:
        return float(est.stderr)
    return c_hat * est.stderr / (alpha * est.limit)


def reference_value(frame, functional, mode):
    """F(E), or G(E') for volume-type cap functionals, at a boundary frame."""
    dupin = dupin_hull(frame)
    k = functional.degree
    spec = EllipsoidSpec.from_dupin(dupin)
    if mode == "cap_volume":
        shapes = ReferenceCapShapes(dupin)
        if functional.kind == "intrinsic_volume":
            return shapes.cap_volume()
        return john_ellipsoid_volume(shapes.paraboloid_cap_sample())
    if functional.kind == "intrinsic_volume":
        return ellipsoid_intrinsic_volume(spec, k)
    if functional.kind == "mean_width_power":
        return ellipsoid_intrinsic_volume(spec, 1) ** k
    return ellipsoid_intrinsic_volume(spec, spec.dim)


def write_measurements_csv(series_list, path):
    series_list = list(series_list)
    d = len(series_list[0].direction) if series_list else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flat_id"] + [f"u{i}" for i in range(d)]
                        + ["mode", "k", "epsilon", "value", "stderr"])
        for s in sorted(series_list, key=lambda s: s.flat_id):
            for eps, val, err in zip(s.epsilons, s.values, s.stderrs):
                writer.writerow([s.flat_id] + [repr(float(v)) for v in s.direction]
                                + [s.mode, s.k, repr(float(eps)), repr(float(val)), repr(float(err))])


def write_plot_data_csv(series_list, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flat_id", "epsilon", "alpha", "scaled_value"])
        for s in sorted(series_list, key=lambda s: s.flat_id):
            for eps, y in zip(s.epsilons, s.scaled):
                writer.writerow([s.flat_id, repr(float(eps)), s.alpha, repr(float(y))])


def write_limits_csv(rows, path):
    """rows: iterables of (flat_id, LimitEstimate or None, c_hat)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flat_id", "L", "stderr", "residual", "c_hat"])
        for flat_id, est, c_hat in sorted(rows, key=lambda r: r[0]):
            if est is None:
                writer.writerow([flat_id, "nan", "nan", "nan", "nan"])
            else:
                writer.writerow([flat_id, repr(est.limit), repr(est.stderr), repr(est.residual),
                                 repr(float(c_hat))])
