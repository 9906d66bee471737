"""Recovery of the first-order radial velocity field and symmetry certificates."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import (EpsilonGrid, LimitEstimate, c_hat_stderr, check_mode, extract_limit,
                          invert_limit, reference_value, sweep)
from .bodies import ground_truth_c, radial_derivative_from_c
from .errors import NotASymmetryOfK, PoorFit
from .measures import FunctionalDescriptor
from .spheres import direction_grid

NEAR_ZERO = 1e-3
MAX_UNRELIABLE = 0.05


@dataclass(frozen=True, eq=False)
class FieldSample:
    flat_id: int
    direction: np.ndarray
    point: np.ndarray
    c_hat: float
    c_stderr: float
    recovered: float
    recovered_stderr: float
    truth: float = None
    c_truth: float = None
    reliable: bool = True
    zero: bool = False


@dataclass(eq=False)
class RecoveryReport:
    samples: list
    mode: str
    functional: str
    d: int
    l: int
    k: int
    series: list = field(default_factory=list)
    limits: list = field(default_factory=list)
    near_zero: float = NEAR_ZERO

    @property
    def reliable(self):
        return [s for s in self.samples if s.reliable]

    @property
    def n_unreliable(self):
        return len(self.samples) - len(self.reliable)

    @property
    def unreliable_fraction(self):
        return self.n_unreliable / max(len(self.samples), 1)

    def _truth_pairs(self):
        rows = [(s.recovered, s.truth) for s in self.reliable if s.truth is not None]
        if not rows:
            return np.zeros(0), np.zeros(0)
        rec, tru = np.array(rows).T
        return rec, tru

    @property
    def relative_errors(self):
        rec, tru = self._truth_pairs()
        big = np.abs(tru) > self.near_zero
        return np.abs(rec[big] - tru[big]) / np.abs(tru[big])

    @property
    def rms_rel_error(self):
        err = self.relative_errors
        return float(np.sqrt(np.mean(err ** 2))) if len(err) else float("nan")

    @property
    def max_rel_error(self):
        err = self.relative_errors
        return float(np.max(err)) if len(err) else float("nan")

    @property
    def max_abs_error_near_zero(self):
        rec, tru = self._truth_pairs()
        small = np.abs(tru) <= self.near_zero
        return float(np.max(np.abs(rec[small] - tru[small]))) if np.any(small) else 0.0

    @property
    def directions(self):
        return np.array([s.direction for s in self.samples])

    @property
    def field_values(self):
        return np.array([s.recovered for s in self.samples])

    def passed(self, rms_tol):
        ok = self.unreliable_fraction <= MAX_UNRELIABLE
        if np.isfinite(self.rms_rel_error):
            ok &= self.rms_rel_error < rms_tol
        return bool(ok and self.max_abs_error_near_zero <= self.near_zero)

    def summary(self):
        return {
            "mode": self.mode,
            "functional": self.functional,
            "d": self.d,
            "l": self.l,
            "k": self.k,
            "n_flats": len(self.samples),
            "n_unreliable": self.n_unreliable,
            "rms_rel_error": self.rms_rel_error,
            "max_rel_error": self.max_rel_error,
            "max_abs_error_near_zero": self.max_abs_error_near_zero,
        }


def _sample_for_flat(flat, est, functional, mode, alpha, family=None, reference=None):
    if est is None:
        c_hat, c_err, reliable, zero = float("nan"), float("nan"), False, False
    else:
        if reference is None:
            reference = reference_value(flat.frame, functional, mode)
        c_hat = invert_limit(est, reference, alpha)
        c_err = c_hat_stderr(est, c_hat, alpha)
        reliable, zero = True, est.zero
    cos = flat.frame.cos_angle
    recovered = radial_derivative_from_c(flat.frame, c_hat) if reliable else float("nan")
    truth = c_truth = None
    if family is not None:
        fam = flat.restricted(family)
        c_truth = ground_truth_c(fam, flat.frame.direction, flat.frame)
        truth = float(family.speed(flat.direction))
    return FieldSample(flat_id=flat.flat_id, direction=flat.direction, point=flat.base_point,
                       c_hat=c_hat, c_stderr=c_err, recovered=recovered,
                       recovered_stderr=c_err / cos if reliable else float("nan"),
                       truth=truth, c_truth=c_truth, reliable=reliable, zero=zero)


def flat_pipeline(family, flat, functional, grid, mode, seed=0, n_rays=None):
    """sweep -> extract_limit -> invert -> radial derivative for one flat."""
    d = flat.subspace.shape[0]
    alpha = check_mode(mode, functional, d, flat.dim)
    series = sweep(family, flat, functional, grid, mode, seed=seed, n_rays=n_rays)
    try:
        est = extract_limit(series)
    except PoorFit:
        est = None
    sample = _sample_for_flat(flat, est, functional, mode, alpha, family)
    return series, est, sample


def _pipeline_task(args):
    return flat_pipeline(*args)


def recover_field(family, flats, mode="sections", functional=None, grid=None, seed=0, jobs=1,
                  n_rays=None, with_truth=True):
    """Run the per-flat pipeline over ``flats`` and aggregate a RecoveryReport."""
    flats = list(flats)
    if not flats:
        raise ValueError("no flats given")
    functional = functional or FunctionalDescriptor("intrinsic_volume", flats[0].dim)
    grid = grid or EpsilonGrid()
    tasks = [(family, f, functional, grid, mode, seed, n_rays) for f in flats]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_pipeline_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_pipeline_task(t) for t in tasks]
    series, limits, samples = zip(*results)
    if not with_truth:
        samples = [FieldSample(**{**s.__dict__, "truth": None, "c_truth": None}) for s in samples]
    return RecoveryReport(samples=list(samples), mode=mode, functional=functional.label,
                          d=flats[0].ambient_dim, l=flats[0].dim, k=functional.degree,
                          series=list(series), limits=list(limits))


def field_from_limits(flats, limits, functional, mode="sections", family=None):
    """Invert precomputed limits (one LimitEstimate or None per flat) into a report."""
    flats = list(flats)
    samples = []
    for flat, est in zip(flats, limits):
        alpha = check_mode(mode, functional, flat.subspace.shape[0], flat.dim)
        samples.append(_sample_for_flat(flat, est, functional, mode, alpha, family))
    return RecoveryReport(samples=samples, mode=mode, functional=functional.label,
                          d=flats[0].ambient_dim, l=flats[0].dim, k=functional.degree,
                          limits=list(limits))


# ----------------------------------------------------------------- symmetry

@dataclass(frozen=True, eq=False)
class SymmetryCertificate:
    transform: np.ndarray
    residual: float
    pairs: np.ndarray
    defects: np.ndarray
    allowed: np.ndarray
    passed: bool
    even: bool
    unmatched: int

    @property
    def max_defect(self):
        return float(np.max(self.defects)) if len(self.defects) else 0.0

    def to_dict(self):
        return {
            "transform": (np.asarray(self.transform) + 0.0).tolist(),
            "residual": self.residual,
            "n_pairs": int(len(self.pairs)),
            "unmatched": int(self.unmatched),
            "max_defect": self.max_defect,
            "max_allowed": float(np.max(self.allowed)) if len(self.allowed) else 0.0,
            "passed": bool(self.passed),
            "even": bool(self.even),
        }


def symmetry_residual(body, T, grid=None):
    """max |rho(T u) - rho(u)| over a direction grid."""
    grid = direction_grid(body.dim) if grid is None else grid
    return float(np.max(np.abs(body.radial(grid @ T.T) - body.radial(grid))))


def symmetry_check(report, T, body, tol=1e-3, residual_tol=1e-8):
    """Compare recovered values at u and at the sampled direction nearest to T u.

    A pair passes when its defect is at most tol + 3 * (propagated stderr).
    """
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    if np.max(np.abs(T.T @ T - np.eye(d))) > 1e-10:
        raise ValueError("T must be orthogonal")
    samples = report.reliable
    dirs = np.array([s.direction for s in samples])
    residual = symmetry_residual(body, T, np.vstack([dirs, direction_grid(d)]))
    if residual > residual_tol:
        raise NotASymmetryOfK(f"|rho(Tu) - rho(u)| = {residual:.3e} exceeds {residual_tol}")
    cos = np.clip(dirs @ dirs.T, -1.0, 1.0)
    np.fill_diagonal(cos, -1.0)
    spacing = float(np.median(np.arccos(np.max(cos, axis=1))))
    images = dirs @ T.T
    match_cos = np.clip(images @ dirs.T, -1.0, 1.0)
    j = np.argmax(match_cos, axis=1)
    ang = np.arccos(match_cos[np.arange(len(dirs)), j])
    ok = ang <= 0.5 * spacing + 1e-9
    i = np.nonzero(ok)[0]
    j = j[ok]
    val = np.array([s.recovered for s in samples])
    err = np.array([s.recovered_stderr for s in samples])
    defects = np.abs(val[j] - val[i])
    allowed = tol + 3.0 * np.sqrt(err[i] ** 2 + err[j] ** 2)
    passed = bool(len(i) > 0 and np.all(defects <= allowed))
    even = passed and np.allclose(T, -np.eye(d))
    return SymmetryCertificate(transform=T, residual=residual, pairs=np.column_stack([i, j]),
                               defects=defects, allowed=allowed, passed=passed, even=even,
                               unmatched=int(np.sum(~ok)))


@dataclass(frozen=True)
class SantaloResult:
    applicable: bool
    holds: bool
    limit_spread: float
    field_spread: float


def santalo_first_order(report, tol=1e-3):
    """If all chord-length limits agree, the recovered field must be constant.

    Returns a result that is vacuously true (not applicable) when the limits differ.
    """
    if report.d != 2 or report.mode != "sections" or report.k != 1:
        raise ValueError("needs d = 2 sections with k = 1")
    lims = np.array([est.limit for est in report.limits if est is not None])
    vals = np.array([s.recovered for s in report.reliable])
    lim_spread = float((lims.max() - lims.min()) / max(abs(lims.mean()), 1e-300))
    field_spread = float((vals.max() - vals.min()) / max(abs(vals.mean()), 1e-300))
    applicable = lim_spread <= tol
    holds = field_spread <= tol if applicable else True
    return SantaloResult(applicable, holds, lim_spread, field_spread)
