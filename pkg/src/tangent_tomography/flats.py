"""Tangent affine flats of K and pencils of linear subspaces.

A tangent l-flat Y is realised inside a linear (l+1)-subspace L containing
it: Y is the tangent hyperplane of K ∩ L (taken inside L) at y = rho(u) u
with u in L. With L = R^d this is an ordinary tangent hyperplane.
"""
import csv
from dataclasses import dataclass

import numpy as np

from .bodies import boundary_frame, check_orthonormal, restrict
from .spheres import direction_grid, orthonormal_complement


@dataclass(frozen=True, eq=False)
class AffineFlat:
    """Tangent flat through ``base_point`` spanned by ``basis`` rows (ambient coordinates).

    ``subspace`` is the orthonormal basis of lin Y, and ``frame`` the
    boundary frame of K ∩ lin Y in those subspace coordinates.
    """

    flat_id: int
    base_point: np.ndarray
    basis: np.ndarray
    direction: np.ndarray
    normal: np.ndarray
    subspace: np.ndarray
    frame: object

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def ambient_dim(self):
        return len(self.base_point)

    @property
    def is_hyperplane(self):
        return self.dim == self.ambient_dim - 1

    def restricted(self, obj):
        """Body or family restricted to lin Y (identity when lin Y is the whole space)."""
        if self.subspace.shape[0] == self.ambient_dim:
            if np.allclose(self.subspace, np.eye(self.ambient_dim)):
                return obj
        return restrict(obj, self.subspace)


@dataclass(frozen=True, eq=False)
class SubspacePencil:
    """Linear (l+1)-subspaces containing a fixed linear l-subspace.

    The spanning direction is drawn from a half-sphere of the orthogonal
    complement; ``rotations`` controls how many are sampled.
    """

    fixed: np.ndarray
    rotations: int = 64

    def __post_init__(self):
        object.__setattr__(self, "fixed", check_orthonormal(self.fixed))

    @classmethod
    def full(cls, d):
        """Degenerate pencil for l = d - 1: the single subspace R^d."""
        return cls(np.eye(d)[: d - 1], rotations=1)

    @classmethod
    def about(cls, vectors, rotations=64):
        """Pencil around span(vectors), orthonormalised."""
        q, r = np.linalg.qr(np.atleast_2d(np.asarray(vectors, dtype=float)).T)
        # keep the orientation of the given vectors
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
        return cls(q.T, rotations)

    @property
    def l(self):
        return self.fixed.shape[0]

    @property
    def ambient_dim(self):
        return self.fixed.shape[1]

    @property
    def parameter_dim(self):
        return self.ambient_dim - self.l - 1

    def spanning_directions(self):
        comp = orthonormal_complement(self.fixed, self.ambient_dim)
        k = comp.shape[0]
        if k == 1:
            return comp
        if k == 2:
            phi = np.pi * np.arange(self.rotations) / self.rotations
            coeffs = np.column_stack([np.cos(phi), np.sin(phi)])
        else:
            coeffs = direction_grid(k, 2 * self.rotations)
            coeffs = coeffs[coeffs[:, 0] > 0]
        return coeffs @ comp

    def subspaces(self):
        """Orthonormal bases (rows) of the member subspaces, fixed part first."""
        if self.l == self.ambient_dim - 1:
            return [np.eye(self.ambient_dim)]
        return [np.vstack([self.fixed, w]) for w in self.spanning_directions()]


def tangent_flats(body, l, pencil=None, per_subspace_samples=None, directions=None):
    """Tangent l-flats of K lying in the subspaces of ``pencil``.

    For l = d - 1 the pencil is the whole space and ``directions`` (ambient
    unit vectors) may be given explicitly.
    """
    d = body.dim
    if not 1 <= l <= d - 1:
        raise ValueError(f"need 1 <= l <= d-1, got l={l}, d={d}")
    if pencil is None:
        if l != d - 1:
            raise ValueError("a pencil is required for l < d - 1")
        pencil = SubspacePencil.full(d)
    if pencil.l != l and l != d - 1:
        raise ValueError("pencil fixed subspace must have dimension l")
    flats = []
    for basis in pencil.subspaces():
        full = basis.shape[0] == d
        sub = body if full else restrict(body, basis)
        if directions is not None and full:
            local_dirs = np.asarray(directions, dtype=float)
        else:
            local_dirs = direction_grid(l + 1, per_subspace_samples)
        for v in local_dirs:
            frame = boundary_frame(sub, v)
            flats.append(AffineFlat(
                flat_id=len(flats),
                base_point=frame.point @ basis,
                basis=frame.tangent @ basis,
                direction=frame.direction @ basis,
                normal=frame.normal @ basis,
                subspace=basis,
                frame=frame,
            ))
    return flats


def hyperplane_flats(body, directions):
    return tangent_flats(body, body.dim - 1, directions=directions)


def flat_count_manifold_check(pencil, l, d):
    """Dimension bookkeeping for tangent flats generated by a pencil."""
    pencil_dim = d - l - 1
    grassmann = (l + 1) * (d - l) - 1
    return {
        "d": d,
        "l": l,
        "pencil_dim": pencil_dim,
        "tangency_dim": l,
        "total": pencil_dim + l,
        "unknowns_dim": d - 1,
        "all_tangent_flats_dim": grassmann,
        "all_flats_exceed_unknowns": grassmann > d - 1,
        "pencil_rotations": None if pencil is None else pencil.rotations,
    }


def support_defect(body, flat, n=1000):
    """max over a boundary sample of K ∩ lin Y of the signed distance beyond Y."""
    sub = flat.restricted(body)
    grid = direction_grid(sub.dim, n)
    pts = sub.boundary_point(grid)
    frame = flat.frame
    return float(np.max((pts - frame.point) @ frame.normal))


def coverage_gap(flats, grid):
    """Largest angular distance from a grid direction to the nearest tangency direction."""
    tangency = np.array([f.direction for f in flats])
    cos = np.clip(grid @ tangency.T, -1.0, 1.0)
    return float(np.max(np.arccos(np.max(cos, axis=1))))


def flats_to_csv(flats, path):
    flats = list(flats)
    d = flats[0].ambient_dim if flats else 0
    l = flats[0].dim if flats else 0
    header = (["flat_id"] + [f"u{i}" for i in range(d)] + [f"y{i}" for i in range(d)]
              + [f"w{j}_{i}" for j in range(l) for i in range(d)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for f in flats:
            writer.writerow([f.flat_id] + [repr(float(v)) for v in f.direction]
                            + [repr(float(v)) for v in f.base_point]
                            + [repr(float(v)) for v in f.basis.ravel()])
