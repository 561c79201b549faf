"""Finite windows of point configurations, Delone parameter estimates, file I/O.

A :class:`PointSet` is a finite sample of a possibly infinite configuration
together with the *window* it was cut from. Every point of the underlying
configuration that lies inside the window is present, so a ball of radius
``rho`` about a point whose depth (distance to the window boundary) is at
least ``rho`` sees exactly what it would see in the infinite set.
"""

from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CapacityError,
    DegenerateBasisError,
    DimensionError,
    DuplicatePointError,
    EmptyInputError,
    InvalidIndexError,
    ParseError,
)
from .geom import DEFAULT_TOL, TolerancePolicy

DEFAULT_CAPACITY = 2_000_000


@dataclass(frozen=True, eq=False)
class BallWindow:
    center: np.ndarray
    radius: float

    def depth(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.radius - np.linalg.norm(pts - self.center, axis=1)

    def to_dict(self):
        return {"kind": "ball", "center": np.asarray(self.center).tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class SlabWindow:
    """Window bounded only along one axis: ``|p[axis] - center| <= half_width``."""

    axis: int
    center: float
    half_width: float

    def depth(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.half_width - np.abs(pts[:, self.axis] - self.center)

    def to_dict(self):
        return {
            "kind": "slab",
            "axis": int(self.axis),
            "center": float(self.center),
            "half_width": float(self.half_width),
        }


def window_from_dict(data: dict, dim: int):
    kind = data.get("kind", "ball")
    if kind == "ball":
        center = np.asarray(data.get("center", [0.0] * dim), dtype=float)
        if center.shape != (dim,):
            raise DimensionError("window center has wrong dimension", expected=dim)
        return BallWindow(center, float(data["radius"]))
    if kind == "slab":
        return SlabWindow(int(data["axis"]), float(data.get("center", 0.0)), float(data["half_width"]))
    raise ParseError(f"unknown window kind {kind!r}")


@dataclass(frozen=True, eq=False)
class PeriodicSpec:
    """Lattice ``basis`` (rows) and ``motif`` points in basis coordinates."""

    basis: np.ndarray
    motif: np.ndarray

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        motif = np.atleast_2d(np.asarray(self.motif, dtype=float))
        d = basis.shape[0]
        if basis.shape != (d, d):
            raise DimensionError("periodic basis must be d vectors of length d", shape=list(basis.shape))
        if motif.shape[1] != d:
            raise DimensionError("motif points must have the basis dimension", expected=d)
        if abs(np.linalg.det(basis)) <= DEFAULT_TOL.eps_geom:
            raise DegenerateBasisError("periodic basis is singular", det=float(np.linalg.det(basis)))
        frac = np.mod(motif, 1.0)
        frac[np.isclose(frac, 1.0, atol=1e-12)] = 0.0
        for i, j in itertools.combinations(range(len(frac)), 2):
            diff = frac[i] - frac[j]
            diff -= np.round(diff)
            if np.linalg.norm(diff @ basis) <= DEFAULT_TOL.eps_geom:
                raise DuplicatePointError("motif points coincide modulo the lattice", index=j)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "motif", motif)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def cartesian_motif(self) -> np.ndarray:
        return self.motif @ self.basis

    def to_dict(self):
        return {"basis": self.basis.tolist(), "motif": self.motif.tolist()}


@dataclass(eq=False)
class PointSet:
    """Immutable window of a point configuration.

    ``core_margin`` marks the depth at which points count as interior for
    window-wide statistics such as :func:`estimate_R`; per-query interiority
    uses the query radius instead.
    """

    points: np.ndarray
    window: Any = None
    periodic: PeriodicSpec | None = None
    core_margin: float = 0.0
    provenance: dict = field(default_factory=dict)
    comment: str | None = None
    tol: TolerancePolicy = DEFAULT_TOL
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise EmptyInputError("a point set needs a non-empty (n, d) coordinate array")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        self.points = pts
        if self.core_margin < 0:
            raise ValueError("core_margin must be non-negative")
        if self.periodic is not None and self.periodic.dim != self.dim:
            raise DimensionError("periodic basis dimension differs from points", expected=self.dim)
        if self.window is None:
            self.window = _enclosing_ball(pts)
        if self.validate:
            dup = self.tree.query_pairs(self.tol.eps_geom, output_type="ndarray")
            if len(dup):
                i, j = sorted(dup[0].tolist())
                raise DuplicatePointError(f"points {i} and {j} coincide", index=j, duplicate_of=i)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)

    @cached_property
    def depths(self) -> np.ndarray:
        return self.window.depth(self.points)

    def check_index(self, i) -> int:
        if not isinstance(i, (int, np.integer)) or not 0 <= i < len(self):
            raise InvalidIndexError(f"point index {i!r} out of range", index=i if isinstance(i, int) else None, size=len(self))
        return int(i)

    def is_interior(self, i: int, level: float) -> bool:
        return bool(self.depths[self.check_index(i)] >= level - self.tol.eps_geom)

    def interior_indices(self, level: float) -> np.ndarray:
        return np.flatnonzero(self.depths >= level - self.tol.eps_geom)

    def nearest_interior(self, level: float, target=None) -> int:
        """Interior point at ``level`` closest to ``target`` (window center by default)."""
        idx = self.interior_indices(level)
        if len(idx) == 0:
            raise EmptyInputError("no interior point at this level", level=level)
        if target is None:
            target = getattr(self.window, "center", np.zeros(self.dim))
            if np.ndim(target) == 0:
                target = np.zeros(self.dim)
        dist = np.linalg.norm(self.points[idx] - np.asarray(target, dtype=float), axis=1)
        return int(idx[np.lexsort((idx, np.round(dist, 9)))[0]])

    def index_of(self, point) -> int:
        dist, i = self.tree.query(np.asarray(point, dtype=float))
        if dist > self.tol.eps_geom:
            raise InvalidIndexError("no point at the given coordinates", point=list(map(float, point)))
        return int(i)

    def contains(self, points) -> np.ndarray:
        dist, _ = self.tree.query(np.atleast_2d(np.asarray(points, dtype=float)))
        return dist <= self.tol.eps_geom

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"dimension": self.dim, "points": self.points.tolist()}
        if self.periodic is not None:
            out["periodic"] = self.periodic.to_dict()
        out["window"] = self.window.to_dict()
        if self.core_margin:
            out["core_margin"] = self.core_margin
        if self.provenance:
            out["provenance"] = self.provenance
        if self.comment is not None:
            out["comment"] = self.comment
        return out


def _enclosing_ball(pts: np.ndarray) -> BallWindow:
    center = pts.mean(axis=0)
    radius = float(np.max(np.linalg.norm(pts - center, axis=1)))
    return BallWindow(center, radius)


def _read_source(source) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, str):
        return source
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    raise TypeError(f"unsupported point-set source {type(source).__name__}")


def _coords(value, dim, what):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: coordinates must be numbers") from exc
    if arr.ndim != 2:
        raise DimensionError(f"{what}: expected a list of coordinate lists")
    if dim is not None and arr.shape[1] != dim:
        bad = next(i for i, row in enumerate(value) if len(row) != dim)
        raise DimensionError(f"{what}: entry {bad} does not have {dim} coordinates", index=bad, expected=dim)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{what}: non-finite coordinate")
    return arr


def load_pointset(source, tol: TolerancePolicy = DEFAULT_TOL) -> PointSet:
    """Parse the JSON point-set format from bytes, text, a path or a file object."""
    text = _read_source(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno, offset=exc.pos) from exc
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object", line=1, column=1)
    try:
        dim = int(data["dimension"])
        raw_points = data["points"]
    except KeyError as exc:
        raise ParseError(f"missing required field {exc.args[0]!r}") from exc
    if dim < 1:
        raise DimensionError("dimension must be positive", dimension=dim)
    if not isinstance(raw_points, list) or not raw_points:
        raise EmptyInputError("'points' must be a non-empty list")
    ragged = [i for i, row in enumerate(raw_points) if not isinstance(row, list) or len(row) != dim]
    if ragged:
        raise DimensionError(f"point {ragged[0]} does not have {dim} coordinates", index=ragged[0], expected=dim)
    points = _coords(raw_points, dim, "points")
    periodic = None
    if data.get("periodic") is not None:
        spec = data["periodic"]
        periodic = PeriodicSpec(_coords(spec["basis"], dim, "periodic.basis"), _coords(spec["motif"], dim, "periodic.motif"))
    window = window_from_dict(data["window"], dim) if data.get("window") else None
    return PointSet(
        points,
        window=window,
        periodic=periodic,
        core_margin=float(data.get("core_margin", 0.0)),
        provenance=dict(data.get("provenance") or {}),
        comment=data.get("comment"),
        tol=tol,
    )


def dump_pointset(ps: PointSet, target=None) -> str:
    text = json.dumps(ps.to_dict(), indent=1, sort_keys=True)
    if target is not None:
        Path(target).write_text(text + "\n", encoding="utf-8")
    return text


def _lattice_range(basis: np.ndarray, reach: float) -> list[range]:
    # |n_i| <= reach * ||column i of basis^-1||
    inv = np.linalg.inv(basis)
    bounds = np.ceil(reach * np.linalg.norm(inv, axis=0)).astype(int)
    return [range(-b, b + 1) for b in bounds]


def realize_window(
    spec: PeriodicSpec,
    radius: float,
    center=None,
    capacity: int = DEFAULT_CAPACITY,
    tol: TolerancePolicy = DEFAULT_TOL,
) -> PointSet:
    """All translates of the motif within ``radius`` of ``center`` (origin by default)."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    d = spec.dim
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    cell_volume = abs(np.linalg.det(spec.basis))
    ball_volume = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d
    expected = ball_volume / cell_volume * len(spec.motif)
    if expected > capacity:
        raise CapacityError("window would exceed the point capacity", expected=int(expected), capacity=capacity)
    motif = spec.cartesian_motif()
    reach = radius + np.max(np.linalg.norm(motif, axis=1)) + np.linalg.norm(c)
    ranges = _lattice_range(spec.basis, reach)
    grid = np.array(np.meshgrid(*[np.array(r) for r in ranges], indexing="ij")).reshape(d, -1).T
    lattice = grid @ spec.basis
    chunks = []
    for m in motif:
        pts = lattice + m
        keep = np.linalg.norm(pts - c, axis=1) <= radius + tol.eps_geom
        chunks.append(pts[keep])
    points = np.concatenate(chunks)
    if len(points) > capacity:
        raise CapacityError("window exceeds the point capacity", count=len(points), capacity=capacity)
    # deterministic order: by distance from center, then lexicographic
    order = np.lexsort(tuple(np.round(points[:, k], 9) for k in reversed(range(d))) + (np.round(np.linalg.norm(points - c, axis=1), 9),))
    points = points[order]
    return PointSet(points, window=BallWindow(c, float(radius)), periodic=spec, tol=tol)


def estimate_r(ps: PointSet) -> float:
    """Half the minimum pairwise distance."""
    if len(ps) < 2:
        raise EmptyInputError("estimate_r needs at least two points")
    dist, _ = ps.tree.query(ps.points, k=2)
    return float(dist[:, 1].min()) / 2


@dataclass(frozen=True)
class CoveringEstimate:
    """Grid lower bound on the covering radius ``R`` and how it was obtained."""

    value: float
    grid_step: float
    samples: int
    witness: tuple
    method: str

    def __float__(self):
        return self.value

    def to_dict(self):
        return {
            "R": self.value,
            "grid_step": self.grid_step,
            "samples": self.samples,
            "witness": list(self.witness),
            "method": self.method,
        }


def _periodic_samples(ps: PointSet, grid_step: float) -> np.ndarray:
    basis = ps.periodic.basis
    steps = [max(1, math.ceil(np.linalg.norm(b) / grid_step)) for b in basis]
    axes = [np.arange(n) / n for n in steps]
    frac = np.array(np.meshgrid(*axes, indexing="ij")).reshape(ps.dim, -1).T
    center = getattr(ps.window, "center", np.zeros(ps.dim))
    origin = np.round(np.asarray(center, dtype=float) @ np.linalg.inv(basis)) @ basis
    return frac @ basis + origin


def _interior_samples(ps: PointSet, grid_step: float, margin: float) -> np.ndarray:
    inner = ps.points[ps.depths >= margin]
    if len(inner) == 0:
        raise EmptyInputError("empty interior region for covering-radius sampling", margin=margin)
    lo, hi = inner.min(axis=0), inner.max(axis=0)
    axes = [np.arange(lo[k], hi[k] + grid_step / 2, grid_step) for k in range(ps.dim)]
    total = math.prod(len(a) for a in axes)
    if total > 5_000_000:
        raise CapacityError("grid too fine for the interior region", samples=total)
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(ps.dim, -1).T
    return grid[ps.window.depth(grid) >= margin]


def estimate_R(ps: PointSet, grid_step: float | None = None, margin: float | None = None) -> CoveringEstimate:
    """Largest distance from a grid sample to its nearest point.

    Periodic sets are sampled over one lattice cell near the window center;
    other sets over the window region at depth ``margin`` (``core_margin`` or
    half the window size by default). A sample only counts when its nearest
    point is provably the nearest point of the full configuration, i.e. when
    the sample is deeper than that distance.
    """
    r = estimate_r(ps)
    step = r / 10 if grid_step is None else float(grid_step)
    if not step > 0:
        raise ValueError("grid_step must be positive")
    if ps.periodic is not None:
        samples = _periodic_samples(ps, step)
        method = "periodic-cell"
    else:
        if margin is None:
            margin = ps.core_margin or _half_size(ps.window)
        samples = _interior_samples(ps, step, margin)
        method = "interior-grid"
    if len(samples) == 0:
        raise EmptyInputError("no grid samples in the interior region")
    dist, _ = ps.tree.query(samples)
    valid = ps.window.depth(samples) >= dist
    if not np.any(valid):
        raise EmptyInputError("window too small to certify nearest points for grid samples")
    if method == "periodic-cell" and not np.all(valid):
        raise EmptyInputError("window too small around the sampled lattice cell")
    k = int(np.argmax(np.where(valid, dist, -np.inf)))
    return CoveringEstimate(float(dist[k]), step, int(valid.sum()), tuple(samples[k].tolist()), method)


def _half_size(window) -> float:
    if isinstance(window, BallWindow):
        return window.radius / 2
    return window.half_width / 2
