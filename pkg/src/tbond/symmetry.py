"""Cluster stabilizers, their comparison across radii, and the t-extension check.

A stabilizer ``S_x(rho)`` splits into a finite group acting on the cluster's
affine hull and the full orthogonal group of the complement. Only the finite
part is enumerated; its elements are stored as isometries of the whole space
that fix the complement pointwise, and the complement factor is carried by
its dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import (
    DEFAULT_CANDIDATE_CAP,
    Cluster,
    all_equivalences,
    cluster_at,
    clusters_equivalent,
    iter_frame_maps,
    mapping_residual,
)
from .errors import CenterMismatchError, MarginError
from .geom import DEFAULT_TOL, Isometry, Subspace, TolerancePolicy, compose, invert
from .pointset import PointSet


@dataclass(eq=False)
class SymmetryGroup:
    center: np.ndarray
    hull: Subspace
    finite_part: list[Isometry]
    complement_dim: int

    @property
    def finite_order(self) -> int:
        return len(self.finite_part)

    @property
    def order_descriptor(self) -> int | str:
        if self.complement_dim == 0:
            return self.finite_order
        if self.complement_dim == 1:
            return 2 * self.finite_order
        return "infinite"

    @property
    def is_finite(self) -> bool:
        return self.complement_dim <= 1

    def orthos(self) -> np.ndarray:
        return np.array([g.ortho for g in self.finite_part])

    def elements(self) -> list[Isometry]:
        """All elements when the group is finite; the complement reflection is folded in."""
        if self.complement_dim == 0:
            return list(self.finite_part)
        if self.complement_dim > 1:
            raise ValueError("group is infinite")
        n = self.hull.complement_basis()[0]
        refl = Isometry.about(np.eye(len(n)) - 2 * np.outer(n, n), self.center)
        return list(self.finite_part) + [compose(refl, g) for g in self.finite_part]

    def contains(self, g: Isometry, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        pool = self.elements() if self.is_finite else self.finite_part
        return any(np.max(np.abs(g.ortho - s.ortho)) <= tol.eps_geom * 100 for s in pool)

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "hull_basis": self.hull.basis.tolist(),
            "hull_dim": self.hull.dim,
            "complement_dim": self.complement_dim,
            "finite_order": self.finite_order,
            "order_descriptor": self.order_descriptor,
            "matrices": [np.round(g.ortho, 12).tolist() for g in self.finite_part],
        }


def _sort_key(q: np.ndarray):
    return tuple(np.round(-q.ravel(), 6))


def stabilizer(c: Cluster, tol: TolerancePolicy | None = None, cap: int = DEFAULT_CANDIDATE_CAP) -> SymmetryGroup:
    """Every hull isometry fixing the center and permuting the members."""
    tol = c.tol if tol is None else tol
    orthos = list(iter_frame_maps(c, c, tol, complement="identity", cap=cap))
    orthos.sort(key=_sort_key)
    elements = [Isometry.about(q, c.center) for q in orthos]
    return SymmetryGroup(
        center=c.center.copy(),
        hull=c.hull,
        finite_part=elements,
        complement_dim=c.dim - c.rank,
    )


def _same_matrices(a: list[np.ndarray], b: list[np.ndarray], tol: TolerancePolicy) -> bool:
    if len(a) != len(b):
        return False
    remaining = list(b)
    for q in a:
        hit = next((k for k, r in enumerate(remaining) if np.max(np.abs(q - r)) <= tol.eps_geom * 100), None)
        if hit is None:
            return False
        remaining.pop(hit)
    return True


def groups_equal(g1: SymmetryGroup, g2: SymmetryGroup, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """Same hull and the same finite part as sets of orthogonal maps."""
    if np.max(np.abs(g1.center - g2.center)) > tol.eps_geom:
        raise CenterMismatchError("groups stabilize different centers")
    if not g1.hull.same_as(g2.hull, tol):
        return False
    return _same_matrices(list(g1.orthos()), list(g2.orthos()), tol)


def same_elements(g1: SymmetryGroup, g2: SymmetryGroup, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """Literal equality as sets of isometries, ignoring how the hulls sit.

    Differs from :func:`groups_equal` only when one hull has codimension one
    and its complement reflection is also a symmetry of the other cluster.
    """
    if np.max(np.abs(g1.center - g2.center)) > tol.eps_geom:
        raise CenterMismatchError("groups stabilize different centers")
    if g1.is_finite != g2.is_finite:
        return False
    if not g1.is_finite:
        return groups_equal(g1, g2, tol)
    return _same_matrices([g.ortho for g in g1.elements()], [g.ortho for g in g2.elements()], tol)


@dataclass(eq=False)
class StabilizationResult:
    index: int
    rho0: float
    t: float
    equal: bool
    lower: SymmetryGroup
    upper: SymmetryGroup

    def __bool__(self):
        return self.equal

    def to_dict(self):
        return {
            "index": self.index,
            "rho0": self.rho0,
            "t": self.t,
            "equal": self.equal,
            "element_sets_equal": same_elements(self.lower, self.upper),
            "lower": self.lower.to_dict(),
            "upper": self.upper.to_dict(),
        }


def stabilization_test(ps: PointSet, i: int, rho0: float, t: float, cap: int = DEFAULT_CANDIDATE_CAP) -> StabilizationResult:
    """Does ``S_x(rho0)`` equal ``S_x(rho0 + t)``?"""
    i = ps.check_index(i)
    if not ps.is_interior(i, rho0 + t):
        raise MarginError(
            "center is too close to the window boundary", index=i, needed=rho0 + t, depth=float(ps.depths[i])
        )
    lower = stabilizer(cluster_at(ps, i, rho0), ps.tol, cap)
    upper = stabilizer(cluster_at(ps, i, rho0 + t), ps.tol, cap)
    return StabilizationResult(i, float(rho0), float(t), groups_equal(lower, upper, ps.tol), lower, upper)


def conjugate_bijection(g: Isometry, s1: SymmetryGroup, s2: SymmetryGroup, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """Is ``s -> g s g^-1`` a bijection from ``s1``'s finite part onto ``s2``'s?"""
    if s1.is_finite != s2.is_finite:
        return False
    src = s1.elements() if s1.is_finite else s1.finite_part
    dst = s2.elements() if s2.is_finite else s2.finite_part
    if len(src) != len(dst):
        return False
    gi = invert(g)
    images = [compose(g, compose(s, gi)) for s in src]
    used = set()
    for im in images:
        hit = next(
            (
                k
                for k, r in enumerate(dst)
                if k not in used and np.max(np.abs(im.ortho - r.ortho)) <= tol.eps_geom * 100
            ),
            None,
        )
        if hit is None:
            return False
        used.add(hit)
    return True


@dataclass(eq=False)
class ExtensionReport:
    i: int
    j: int
    rho0: float
    t: float
    premises_satisfied: bool
    failed_premise: str | None = None
    maps: list[Isometry] = field(default_factory=list)
    residuals: list[float | None] = field(default_factory=list)
    max_residual: float | None = None
    holds: bool | None = None

    def to_dict(self):
        return {
            "i": self.i,
            "j": self.j,
            "rho0": self.rho0,
            "t": self.t,
            "premises_satisfied": self.premises_satisfied,
            "failed_premise": self.failed_premise,
            "status": "premises not satisfied" if not self.premises_satisfied else ("holds" if self.holds else "fails"),
            "maps": [g.to_dict() for g in self.maps],
            "residuals": self.residuals,
            "max_residual": self.max_residual,
        }


def verify_extension(
    ps: PointSet,
    i: int,
    j: int,
    rho0: float,
    t: float,
    cap: int = DEFAULT_CANDIDATE_CAP,
    stabilization: StabilizationResult | None = None,
) -> ExtensionReport:
    """Check that every isometry matching the rho0-clusters also matches the (rho0+t)-clusters."""
    i, j = ps.check_index(i), ps.check_index(j)
    for k in (i, j):
        if not ps.is_interior(k, rho0 + t):
            raise MarginError("center is too close to the window boundary", index=k, needed=rho0 + t)
    big_i, big_j = cluster_at(ps, i, rho0 + t), cluster_at(ps, j, rho0 + t)
    if clusters_equivalent(big_i, big_j, ps.tol, cap=cap) is None:
        return ExtensionReport(i, j, rho0, t, False, "clusters at rho0 + t are not equivalent")
    stab = stabilization if stabilization is not None else stabilization_test(ps, i, rho0, t, cap)
    if not stab.equal:
        return ExtensionReport(i, j, rho0, t, False, "S_x(rho0) != S_x(rho0 + t) at the first center")
    small_i, small_j = cluster_at(ps, i, rho0), cluster_at(ps, j, rho0)
    maps = all_equivalences(small_i, small_j, ps.tol, cap=cap)
    residuals = [mapping_residual(f, big_i, big_j) for f in maps]
    ok = bool(maps) and all(r is not None and r <= ps.tol.eps_geom for r in residuals)
    finite = [r for r in residuals if r is not None]
    return ExtensionReport(
        i,
        j,
        float(rho0),
        float(t),
        True,
        maps=maps,
        residuals=residuals,
        max_residual=max(finite) if len(finite) == len(residuals) and finite else None,
        holds=ok,
    )
