"""Tolerance-aware Euclidean primitives.

Every equality the theory states over the reals (``|xx'| <= t``, ``g(C) = C'``)
is decided here against an explicit :class:`TolerancePolicy`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EmptyInputError


@dataclass(frozen=True)
class TolerancePolicy:
    """Absolute length tolerance, relative rank threshold and fingerprint step."""

    eps_geom: float = 1e-9
    eps_rank: float = 1e-7
    quant: float = 1e-6

    def __post_init__(self):
        if not self.eps_geom > 0:
            raise ValueError("eps_geom must be positive")
        if not 0 < self.eps_rank < 1:
            raise ValueError("eps_rank must lie in (0, 1)")
        if self.quant < 4 * self.eps_geom:
            raise ValueError("quant must be at least 4 * eps_geom")

    @classmethod
    def scaled(cls, scale: float) -> "TolerancePolicy":
        """Defaults with the length tolerances multiplied by ``scale``."""
        return cls(eps_geom=1e-9 * scale, eps_rank=1e-7, quant=1e-6 * scale)

    def to_dict(self):
        return {"eps_geom": self.eps_geom, "eps_rank": self.eps_rank, "quant": self.quant}


DEFAULT_TOL = TolerancePolicy()


@dataclass(frozen=True, eq=False)
class Isometry:
    """The affine map ``p -> ortho @ p + shift``."""

    ortho: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        ortho = np.asarray(self.ortho, dtype=float)
        shift = np.asarray(self.shift, dtype=float)
        if ortho.ndim != 2 or ortho.shape[0] != ortho.shape[1]:
            raise DimensionError("ortho must be a square matrix", shape=list(ortho.shape))
        if shift.shape != (ortho.shape[0],):
            raise DimensionError(
                "shift length does not match ortho", ortho=ortho.shape[0], shift=list(shift.shape)
            )
        object.__setattr__(self, "ortho", ortho)
        object.__setattr__(self, "shift", shift)

    @property
    def dim(self) -> int:
        return self.ortho.shape[0]

    @classmethod
    def identity(cls, d: int) -> "Isometry":
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def translation(cls, v) -> "Isometry":
        v = np.asarray(v, dtype=float)
        return cls(np.eye(len(v)), v)

    @classmethod
    def about(cls, ortho, center_from, center_to=None) -> "Isometry":
        """Map ``center_from + v`` to ``center_to + ortho @ v``."""
        ortho = np.asarray(ortho, dtype=float)
        a = np.asarray(center_from, dtype=float)
        b = a if center_to is None else np.asarray(center_to, dtype=float)
        return cls(ortho, b - ortho @ a)

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise DimensionError("point dimension does not match isometry", expected=self.dim)
        return pts @ self.ortho.T + self.shift

    def __call__(self, points):
        return self.apply(points)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.ortho))

    def is_valid(self, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        gram = self.ortho.T @ self.ortho
        if np.max(np.abs(gram - np.eye(self.dim))) > tol.eps_geom * 10:
            return False
        return abs(abs(self.det) - 1.0) <= tol.eps_geom * 10

    def close_to(self, other: "Isometry", tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        return (
            self.dim == other.dim
            and np.max(np.abs(self.ortho - other.ortho)) <= tol.eps_geom * 10
            and np.max(np.abs(self.shift - other.shift)) <= tol.eps_geom * 10 * (1 + np.max(np.abs(self.shift)))
        )

    def to_dict(self):
        return {"ortho": self.ortho.tolist(), "shift": self.shift.tolist()}


def compose(g: Isometry, h: Isometry) -> Isometry:
    """``p -> g(h(p))``."""
    if g.dim != h.dim:
        raise DimensionError("cannot compose isometries of different dimension", left=g.dim, right=h.dim)
    return Isometry(g.ortho @ h.ortho, g.ortho @ h.shift + g.shift)


def invert(g: Isometry) -> Isometry:
    qt = g.ortho.T
    return Isometry(qt, -qt @ g.shift)


@dataclass(frozen=True, eq=False)
class Subspace:
    """An affine subspace ``origin + span(basis)``; ``basis`` rows are orthonormal."""

    origin: np.ndarray
    basis: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.origin.shape[0]

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def complement_basis(self) -> np.ndarray:
        """Orthonormal rows spanning the orthogonal complement of the direction space."""
        d = self.ambient_dim
        if self.dim == 0:
            return np.eye(d)
        _, _, vt = np.linalg.svd(self.basis, full_matrices=True)
        return vt[self.dim:]

    def contains(self, point, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        v = np.asarray(point, dtype=float) - self.origin
        resid = v - self.projector() @ v
        return float(np.linalg.norm(resid)) <= tol.eps_geom * (1 + np.linalg.norm(v))

    def same_as(self, other: "Subspace", tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        if self.dim != other.dim or self.ambient_dim != other.ambient_dim:
            return False
        if np.max(np.abs(self.projector() - other.projector()), initial=0.0) > tol.eps_geom * 100:
            return False
        return self.contains(other.origin, tol)

    def to_dict(self):
        return {"origin": self.origin.tolist(), "basis": self.basis.tolist(), "dim": self.dim}


def affine_rank(points, tol: TolerancePolicy = DEFAULT_TOL) -> Subspace:
    """Affine hull of ``points`` as a :class:`Subspace` through their centroid.

    The dimension counts singular values of the centered coordinate matrix that
    exceed ``tol.eps_rank`` times the largest one.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0 or pts.shape[0] == 0:
        raise EmptyInputError("affine_rank needs at least one point")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    d = pts.shape[1]
    if pts.shape[0] == 1:
        return Subspace(centroid, np.zeros((0, d)))
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] <= tol.eps_geom:
        return Subspace(centroid, np.zeros((0, d)))
    n = int(np.sum(s > tol.eps_rank * s[0]))
    return Subspace(centroid, vt[:n].copy())


def orthogonal_fit(source, target, tol: TolerancePolicy = DEFAULT_TOL) -> Isometry | None:
    """Orthogonal Procrustes between two centered frames.

    Returns the orthogonal ``Q`` minimising ``sum |Q s_i - t_i|^2`` as a linear
    isometry (zero shift), or ``None`` when some point misses its target by
    more than ``tol.eps_geom``. Both determinant signs are accepted.
    """
    src = np.atleast_2d(np.asarray(source, dtype=float))
    tgt = np.atleast_2d(np.asarray(target, dtype=float))
    if src.shape != tgt.shape:
        raise DimensionError(
            "source and target must have the same shape", source=list(src.shape), target=list(tgt.shape)
        )
    d = src.shape[1]
    h = tgt.T @ src
    u, _, vt = np.linalg.svd(h)
    q = u @ vt
    resid = np.linalg.norm(src @ q.T - tgt, axis=1)
    if resid.size and resid.max() > tol.eps_geom:
        return None
    return Isometry(q, np.zeros(d))
