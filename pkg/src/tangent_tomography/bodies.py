"""Convex bodies given by radial functions, their perturbation families, and
local boundary data (tangent frames, Hessian forms, Dupin ellipsoids).

A body is star-shaped about the origin, with radial function ``rho`` on the
unit sphere. All evaluators are vectorised over leading axes: a direction
array of shape ``(..., d)`` gives radial values of shape ``(...)``.
"""
from dataclasses import dataclass, field
from functools import cached_property
import warnings

import numpy as np

from .errors import BadSubspace, NegativeSpeed, NonConvexPoint
from .spheres import direction_grid, normalize_rows, orthonormal_complement

EIGEN_FLOOR = 1e-9


@dataclass(frozen=True)
class SphericalPolynomial:
    """``constant + sum coef * prod u_i**p_i``, evaluated on unit vectors."""

    constant: float = 0.0
    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((float(c), tuple(int(p) for p in powers)) for c, powers in self.terms)
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_mapping(cls, data):
        if data is None:
            return cls()
        if isinstance(data, (int, float)):
            return cls(constant=float(data))
        terms = [(t["coef"], t["powers"]) for t in data.get("terms", [])]
        return cls(constant=data.get("constant", 0.0), terms=tuple(terms))

    def to_mapping(self):
        return {"constant": self.constant,
                "terms": [{"coef": c, "powers": list(p)} for c, p in self.terms]}

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape[:-1], self.constant)
        for coef, powers in self.terms:
            mono = np.ones(u.shape[:-1])
            for i, p in enumerate(powers):
                if p:
                    mono = mono * u[..., i] ** p
            out = out + coef * mono
        return out

    def gradient(self, u):
        """Gradient of the polynomial as a function on R^d."""
        u = np.asarray(u, dtype=float)
        grad = np.zeros(u.shape)
        for coef, powers in self.terms:
            for i, p in enumerate(powers):
                if p == 0:
                    continue
                part = np.full(u.shape[:-1], coef * p)
                for j, q in enumerate(powers):
                    e = q - 1 if j == i else q
                    if e:
                        part = part * u[..., j] ** e
                grad[..., i] += part
        return grad

    @property
    def is_constant(self):
        return all(c == 0.0 for c, _ in self.terms)


# --------------------------------------------------------------------- bodies

class RadialBody:
    """Base class: subclasses provide ``dim`` and ``radial``."""

    kind = "generic"
    dim: int

    def radial(self, u):
        raise NotImplementedError

    def gauge(self, x):
        """Minkowski gauge ||x|| / rho(x/||x||); equals 1 exactly on the boundary."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        val = r / self.radial(x / safe[..., None])
        return np.where(r > 0, val, 0.0)

    def gauge_grad(self, x):
        x = np.asarray(x, dtype=float)
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))))
        grad = np.empty(x.shape)
        for i in range(x.shape[-1]):
            e = np.zeros(x.shape[-1])
            e[i] = h
            grad[..., i] = (self.gauge(x + e) - self.gauge(x - e)) / (2 * h)
        return grad

    def gauge_hess(self, x):
        """Analytic Hessian of the gauge at a single point, or None."""
        return None

    def boundary_point(self, u):
        u = np.asarray(u, dtype=float)
        return self.radial(u)[..., None] * u

    def contains(self, p, tol=0.0):
        return self.gauge(p) <= 1.0 + tol


@dataclass(frozen=True)
class Ball(RadialBody):
    dim: int = 3
    radius: float = 1.0
    kind = "ball"

    def radial(self, u):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape[:-1], float(self.radius))

    def gauge(self, x):
        return np.linalg.norm(x, axis=-1) / self.radius

    def gauge_grad(self, x):
        x = np.asarray(x, dtype=float)
        return x / (self.radius * np.linalg.norm(x, axis=-1, keepdims=True))

    def gauge_hess(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x)
        xh = x / r
        return (np.eye(len(x)) - np.outer(xh, xh)) / (self.radius * r)


@dataclass(frozen=True)
class Ellipsoid(RadialBody):
    semiaxes: tuple = (1.0, 1.0, 1.0)
    kind = "ellipsoid"

    def __post_init__(self):
        axes = tuple(float(a) for a in self.semiaxes)
        if min(axes) <= 0:
            raise ValueError("ellipsoid semiaxes must be positive")
        object.__setattr__(self, "semiaxes", axes)

    @property
    def dim(self):
        return len(self.semiaxes)

    @property
    def _inv_sq(self):
        return 1.0 / np.asarray(self.semiaxes) ** 2

    def radial(self, u):
        return 1.0 / self.gauge(u)

    def gauge(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.sum(x * x * self._inv_sq, axis=-1))

    def gauge_grad(self, x):
        x = np.asarray(x, dtype=float)
        return x * self._inv_sq / self.gauge(x)[..., None]

    def gauge_hess(self, x):
        x = np.asarray(x, dtype=float)
        g = self.gauge(x)
        dx = x * self._inv_sq
        return np.diag(self._inv_sq) / g - np.outer(dx, dx) / g ** 3


@dataclass(frozen=True)
class SmoothStar(RadialBody):
    """rho(u) = r0 + P(u) with P a low-degree polynomial in the coordinates of u.

    Positivity and strict convexity (positive definite boundary form) are
    checked on a direction grid at construction.
    """

    dim: int = 3
    r0: float = 1.0
    poly: SphericalPolynomial = field(default_factory=SphericalPolynomial)
    check_directions: int = 128
    kind = "smooth-star"

    def __post_init__(self):
        if self.check_directions:
            grid = direction_grid(self.dim, self.check_directions)
            if np.any(self.radial(grid) <= 0):
                raise NonConvexPoint("radial function is not positive on the grid")
            for u in grid:
                boundary_frame(self, u)

    def radial(self, u):
        return self.r0 + self.poly(u)

    def gauge_grad(self, x):
        x = np.asarray(x, dtype=float)
        xh = normalize_rows(x)
        rho = self.radial(xh)[..., None]
        gp = self.poly.gradient(xh)
        tang = gp - np.sum(gp * xh, axis=-1, keepdims=True) * xh
        return xh / rho - tang / rho ** 2


@dataclass(frozen=True, eq=False)
class StarBody(RadialBody):
    """Body defined by an arbitrary radial callable (finite-difference derivatives)."""

    dim: int
    radial_fn: object = None
    kind = "smooth-star"

    def radial(self, u):
        return np.asarray(self.radial_fn(np.asarray(u, dtype=float)), dtype=float)


def check_orthonormal(basis, tol=1e-10):
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    err = np.max(np.abs(basis @ basis.T - np.eye(basis.shape[0])))
    if err > tol:
        raise BadSubspace(f"basis is not orthonormal (max deviation {err:.2e})")
    return basis


@dataclass(frozen=True, eq=False)
class SubspaceBody(RadialBody):
    """K intersected with a linear subspace L, in coordinates of an orthonormal basis of L.

    ``basis`` has shape (dim L, d); a coordinate vector v maps to v @ basis.
    """

    parent: RadialBody
    basis: np.ndarray
    kind = "restricted"

    def __post_init__(self):
        object.__setattr__(self, "basis", check_orthonormal(self.basis))

    @property
    def dim(self):
        return self.basis.shape[0]

    def embed(self, v):
        return np.asarray(v, dtype=float) @ self.basis

    def radial(self, v):
        return self.parent.radial(self.embed(v))

    def gauge(self, w):
        return self.parent.gauge(self.embed(w))

    def gauge_grad(self, w):
        return self.parent.gauge_grad(self.embed(w)) @ self.basis.T

    def gauge_hess(self, w):
        h = self.parent.gauge_hess(self.embed(w))
        return None if h is None else self.basis @ h @ self.basis.T


@dataclass(frozen=True, eq=False)
class RotatedBody(RadialBody):
    """The image T K of a body under an orthogonal map T."""

    parent: RadialBody
    transform: np.ndarray
    kind = "rotated"

    @property
    def dim(self):
        return self.parent.dim

    def radial(self, u):
        return self.parent.radial(np.asarray(u, dtype=float) @ self.transform)

    def gauge(self, x):
        return self.parent.gauge(np.asarray(x, dtype=float) @ self.transform)

    def gauge_grad(self, x):
        return self.parent.gauge_grad(np.asarray(x, dtype=float) @ self.transform) @ self.transform.T

    def gauge_hess(self, x):
        h = self.parent.gauge_hess(np.asarray(x, dtype=float) @ self.transform)
        return None if h is None else self.transform @ h @ self.transform.T


# ------------------------------------------------------------------ families

class PerturbationFamily:
    """One-parameter family rho^t with rho^0 = rho of ``base``."""

    base: RadialBody

    @property
    def dim(self):
        return self.base.dim

    def radial(self, u, t):
        raise NotImplementedError

    def speed(self, u):
        """d rho^t(u) / dt at t = 0."""
        raise NotImplementedError

    def gauge(self, x, t):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        val = r / self.radial(x / safe[..., None], t)
        return np.where(r > 0, val, 0.0)

    def at(self, t):
        return FamilyMember(self, float(t))


@dataclass(frozen=True, eq=False)
class PolynomialFamily(PerturbationFamily):
    """rho^t = rho * (1 + growth * t) + t * h + t**2 * r.

    ``h`` and ``r`` are spherical polynomials; the default family is affine in t.
    """

    base: RadialBody
    h: SphericalPolynomial = field(default_factory=SphericalPolynomial)
    growth: float = 0.0
    r: SphericalPolynomial = None
    validate: bool = True

    def __post_init__(self):
        if self.validate:
            validate_family(self)

    def radial(self, u, t):
        u = np.asarray(u, dtype=float)
        t = np.asarray(t, dtype=float)
        out = self.base.radial(u) * (1.0 + self.growth * t) + t * self.h(u)
        if self.r is not None:
            out = out + t * t * self.r(u)
        return out

    def speed(self, u):
        u = np.asarray(u, dtype=float)
        return self.growth * self.base.radial(u) + self.h(u)


@dataclass(frozen=True, eq=False)
class CallableFamily(PerturbationFamily):
    """General C^2 family given by evaluators ``rho_t(u, t)`` and ``drho_dt(u)``."""

    base: RadialBody
    rho_t: object
    drho_dt: object

    def radial(self, u, t):
        return np.asarray(self.rho_t(np.asarray(u, dtype=float), t), dtype=float)

    def speed(self, u):
        return np.asarray(self.drho_dt(np.asarray(u, dtype=float)), dtype=float)


@dataclass(frozen=True, eq=False)
class RestrictedFamily(PerturbationFamily):
    parent: PerturbationFamily
    basis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "basis", check_orthonormal(self.basis))

    @cached_property
    def base(self):
        return SubspaceBody(self.parent.base, self.basis)

    def radial(self, v, t):
        return self.parent.radial(np.asarray(v, dtype=float) @ self.basis, t)

    def speed(self, v):
        return self.parent.speed(np.asarray(v, dtype=float) @ self.basis)


@dataclass(frozen=True, eq=False)
class RotatedFamily(PerturbationFamily):
    """The family T K^t."""

    parent: PerturbationFamily
    transform: np.ndarray

    @cached_property
    def base(self):
        return RotatedBody(self.parent.base, self.transform)

    def radial(self, u, t):
        return self.parent.radial(np.asarray(u, dtype=float) @ self.transform, t)

    def speed(self, u):
        return self.parent.speed(np.asarray(u, dtype=float) @ self.transform)


@dataclass(frozen=True, eq=False)
class FamilyMember(RadialBody):
    """K^t for a fixed t, as a body."""

    family: PerturbationFamily
    t: float
    kind = "family-member"

    @property
    def dim(self):
        return self.family.dim

    def radial(self, u):
        return self.family.radial(u, self.t)


def validate_family(family, directions=None, tau=1e-3):
    """Check rho^t >= rho, nonnegative speed and bounded second differences."""
    if directions is None:
        directions = direction_grid(family.dim, 128)
    rho0 = family.base.radial(directions)
    if np.max(np.abs(family.radial(directions, 0.0) - rho0)) > 1e-12:
        raise ValueError("family does not start at the base body")
    speed = family.speed(directions)
    if np.min(speed) < -1e-9:
        raise NegativeSpeed(f"negative normal speed {np.min(speed):.3e}")
    for t in (tau, 0.5, 1.0):
        if np.min(family.radial(directions, t) - rho0) < -1e-9:
            raise NegativeSpeed(f"K^t does not contain K at t={t}")
    second = (family.radial(directions, 2 * tau) - 2 * family.radial(directions, tau) + rho0) / tau ** 2
    if not np.all(np.isfinite(second)) or np.max(np.abs(second)) > 1e6:
        raise ValueError("family is not C^2 in t on the sample grid")
    return True


def restrict(obj, basis):
    """Restrict a body or a family to the linear subspace spanned by ``basis`` rows."""
    if isinstance(obj, PerturbationFamily):
        return RestrictedFamily(obj, np.asarray(basis, dtype=float))
    return SubspaceBody(obj, np.asarray(basis, dtype=float))


def rotate(obj, transform):
    transform = np.asarray(transform, dtype=float)
    if isinstance(obj, PerturbationFamily):
        return RotatedFamily(obj, transform)
    return RotatedBody(obj, transform)


# ------------------------------------------------------------ local geometry

@dataclass(frozen=True, eq=False)
class BoundaryFrame:
    """Rectangular frame at x = rho(u) u.

    ``tangent`` rows are an orthonormal basis of the tangent hyperplane,
    ordered along the eigenvectors of ``form`` (so ``form`` is diagonal).
    ``form`` is Q = Hessian(f)/2 of the graph x_d = f(z) with the body on
    the side opposite to ``normal``.
    """

    direction: np.ndarray
    point: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    form: np.ndarray

    @property
    def dim(self):
        return len(self.point)

    @property
    def cos_angle(self):
        return float(self.direction @ self.normal)

    def to_local(self, p):
        rel = np.asarray(p, dtype=float) - self.point
        return rel @ self.tangent.T, rel @ self.normal

    def to_ambient(self, z, height=0.0):
        z = np.asarray(z, dtype=float)
        return self.point + z @ self.tangent + np.asarray(height)[..., None] * self.normal


def graph_height(body, point, normal, tangent, z, tol=1e-16, max_iter=60):
    """f(z): inward offset of bd K above the tangent-plane point ``point + z @ tangent``.

    Solved by Newton's method on gauge(point + z @ tangent - s * normal) = 1.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    base = point + z @ tangent
    s = np.zeros(len(z))
    scale = float(np.linalg.norm(point))
    for _ in range(max_iter):
        p = base - s[:, None] * normal
        phi = body.gauge(p) - 1.0
        dphi = -(body.gauge_grad(p) @ normal)
        step = phi / dphi
        s = s - step
        if np.max(np.abs(step)) <= tol * max(scale, 1.0):
            break
    return s


def _graph_hessian_fd(body, point, normal, tangent, h):
    m = tangent.shape[0]
    stencil = [np.zeros(m)]
    for i in range(m):
        for sgn in (1, -1):
            e = np.zeros(m)
            e[i] = sgn * h
            stencil.append(e)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    for i, j in pairs:
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            e = np.zeros(m)
            e[i], e[j] = si * h, sj * h
            stencil.append(e)
    f = graph_height(body, point, normal, tangent, np.array(stencil))
    hess = np.zeros((m, m))
    for i in range(m):
        hess[i, i] = (f[1 + 2 * i] + f[2 + 2 * i] - 2 * f[0]) / h ** 2
    off = 1 + 2 * m
    for n, (i, j) in enumerate(pairs):
        fpp, fpm, fmp, fmm = f[off + 4 * n: off + 4 * n + 4]
        hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    return hess


def boundary_frame(body, u, step=1e-4, check_tol=1e-5):
    """Frame, outer normal and halved graph Hessian of ``body`` at rho(u) u."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    rho = float(body.radial(u))
    x = rho * u
    grad = np.asarray(body.gauge_grad(x), dtype=float)
    gnorm = np.linalg.norm(grad)
    normal = grad / gnorm
    tangent = orthonormal_complement(normal, len(u))
    hess = body.gauge_hess(x)
    if hess is not None:
        form = 0.5 * tangent @ hess @ tangent.T / gnorm
    else:
        h = step * rho
        fd = _graph_hessian_fd(body, x, normal, tangent, h)
        fd_half = _graph_hessian_fd(body, x, normal, tangent, h / 2)
        scale = max(np.max(np.abs(fd)), 1e-300)
        if np.max(np.abs(fd - fd_half)) > check_tol * scale:
            warnings.warn("finite-difference boundary Hessian failed the half-step check",
                          RuntimeWarning, stacklevel=2)
        form = 0.5 * fd
    form = 0.5 * (form + form.T)
    evals, evecs = np.linalg.eigh(form)
    if evals[0] <= EIGEN_FLOOR:
        raise NonConvexPoint(f"boundary form has eigenvalue {evals[0]:.3e} at u={u}")
    # deterministic eigenvector signs
    for i in range(evecs.shape[1]):
        j = np.argmax(np.abs(evecs[:, i]))
        if evecs[j, i] < 0:
            evecs[:, i] *= -1
    tangent = evecs.T @ tangent
    return BoundaryFrame(direction=u, point=x, normal=normal, tangent=tangent, form=np.diag(evals))


@dataclass(frozen=True, eq=False)
class DupinForm:
    """E = {z : z^T Q z <= 1}, the convex hull of the Dupin indicatrix."""

    frame: BoundaryFrame
    form: np.ndarray
    semiaxes: np.ndarray
    axes: np.ndarray

    @property
    def dim(self):
        return len(self.semiaxes)

    def support(self, w):
        """Support function of E at (not necessarily unit) tangent-coordinate vectors w."""
        w = np.asarray(w, dtype=float)
        inv = np.linalg.inv(self.form)
        return np.sqrt(np.einsum("...i,ij,...j->...", w, inv, w))

    def contains(self, z, tol=0.0):
        z = np.asarray(z, dtype=float)
        return np.einsum("...i,ij,...j->...", z, self.form, z) <= 1.0 + tol


def dupin_hull(frame):
    form = np.asarray(frame.form, dtype=float)
    evals, evecs = np.linalg.eigh(0.5 * (form + form.T))
    if evals[0] <= EIGEN_FLOOR:
        raise NonConvexPoint(f"boundary form has eigenvalue {evals[0]:.3e}")
    return DupinForm(frame=frame, form=form, semiaxes=1.0 / np.sqrt(evals), axes=evecs.T)


def ground_truth_c(family, u, frame=None):
    """First-order normal speed c(x) = (d rho^t(u)/dt at 0) * <u, nu(x)>."""
    if frame is None:
        frame = boundary_frame(family.base, u)
    c = float(family.speed(frame.direction)) * frame.cos_angle
    if c < -1e-9:
        raise NegativeSpeed(f"normal speed {c:.3e} < 0 at u={frame.direction}")
    return max(c, 0.0)


def radial_derivative_from_c(frame, c_hat):
    cos = frame.cos_angle
    if cos <= 1e-9:
        raise ValueError("origin is not interior: <u, nu> <= 0")
    return c_hat / cos
