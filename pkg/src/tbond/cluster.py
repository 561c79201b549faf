"""rho-clusters, their isometry equivalence, class partitions and N(rho).

Equivalence is decided in two stages. Cheap invariants (sorted distances from
the center, sorted pairwise distances) reject most pairs; survivors go to a
frame search: pick ``rank`` independent members of the first cluster, enumerate
distance-compatible images in the second, fit the orthogonal part and verify
the full bijection.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import CandidateCapError, EmptyInputError, RadiusMismatchError
from .geom import DEFAULT_TOL, Isometry, Subspace, TolerancePolicy, affine_rank, compose, invert, orthogonal_fit
from .pointset import PointSet

DEFAULT_CANDIDATE_CAP = 1_000_000


@dataclass(eq=False)
class Cluster:
    """``C_x(rho)`` stored relative to its center; row 0 of ``members`` is the center."""

    center: np.ndarray
    members: np.ndarray
    rho: float
    index: int | None = None
    member_indices: np.ndarray | None = None
    boundary_truncated: bool = False
    tol: TolerancePolicy = DEFAULT_TOL

    def __len__(self):
        return len(self.members)

    @property
    def dim(self) -> int:
        return self.members.shape[1]

    @cached_property
    def hull(self) -> Subspace:
        rel = affine_rank(self.members, self.tol)
        return Subspace(rel.origin + self.center, rel.basis)

    @property
    def rank(self) -> int:
        return self.hull.dim

    @cached_property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.members, axis=1)

    @cached_property
    def radial_profile(self) -> np.ndarray:
        return np.sort(self.norms)

    @cached_property
    def pair_profile(self) -> np.ndarray:
        if len(self.members) < 2:
            return np.zeros(0)
        return np.sort(pdist(self.members))

    @cached_property
    def gram(self) -> np.ndarray:
        return self.members @ self.members.T

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.members)

    @cached_property
    def shell_sizes(self) -> np.ndarray:
        """For each member, how many members share its distance from the center."""
        n = self.norms
        return np.sum(np.abs(n[:, None] - n[None, :]) <= self.tol.quant, axis=1)

    def fingerprint(self, offset: float = 0.0) -> str:
        q = self.tol.quant
        radial = np.floor(self.radial_profile / q + 0.5 + offset).astype(np.int64)
        pairs = np.floor(self.pair_profile / q + 0.5 + offset).astype(np.int64)
        h = hashlib.sha1()
        h.update(np.int64(len(self.members)).tobytes())
        h.update(radial.tobytes())
        h.update(pairs.tobytes())
        return h.hexdigest()

    def absolute(self) -> np.ndarray:
        return self.members + self.center

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "index": self.index,
            "rho": self.rho,
            "size": len(self.members),
            "rank": self.rank,
            "members": self.members.tolist(),
            "boundary_truncated": self.boundary_truncated,
        }


def _make_cluster(ps: PointSet, i: int, rho: float, neighbors) -> Cluster:
    center = ps.points[i]
    idx = np.asarray(neighbors, dtype=int)
    rel = ps.points[idx] - center
    dist = np.linalg.norm(rel, axis=1)
    order = np.lexsort((idx, dist))
    idx, rel = idx[order], rel[order]
    rel[0] = 0.0
    return Cluster(
        center=center.copy(),
        members=rel,
        rho=float(rho),
        index=int(i),
        member_indices=idx,
        boundary_truncated=bool(ps.depths[i] < rho - ps.tol.eps_geom),
        tol=ps.tol,
    )


def cluster_at(ps: PointSet, i: int, rho: float) -> Cluster:
    """Closed-ball cluster about point ``i``; flags truncation by the window."""
    i = ps.check_index(i)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    neighbors = ps.tree.query_ball_point(ps.points[i], rho + ps.tol.eps_geom)
    return _make_cluster(ps, i, rho, neighbors)


def clusters_at(ps: PointSet, indices, rho: float, jobs: int = 1) -> list[Cluster]:
    indices = [ps.check_index(int(i)) for i in indices]
    if not indices:
        return []
    neighbor_lists = ps.tree.query_ball_point(ps.points[indices], rho + ps.tol.eps_geom)

    def build(k):
        c = _make_cluster(ps, indices[k], rho, neighbor_lists[k])
        # warm the caches used by classification
        c.pair_profile
        return c

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(build, range(len(indices))))
    return [build(k) for k in range(len(indices))]


def profiles_match(c1: Cluster, c2: Cluster, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    if len(c1) != len(c2):
        return False
    if np.max(np.abs(c1.radial_profile - c2.radial_profile), initial=0.0) > tol.quant:
        return False
    return np.max(np.abs(c1.pair_profile - c2.pair_profile), initial=0.0) <= tol.quant


def _independent(vectors: np.ndarray, ratio: float) -> bool:
    s = np.linalg.svd(vectors, compute_uv=False)
    return s[-1] > ratio * s[0]


def select_frame(c: Cluster) -> list[int]:
    """Row indices of ``rank`` independent members, sparse shells first."""
    n = c.rank
    if n == 0:
        return []
    rows = np.arange(1, len(c))
    order = rows[np.lexsort((rows, np.round(c.norms[rows], 9), c.shell_sizes[rows]))]
    # a well-conditioned frame first; fall back to the rank threshold
    for ratio in (0.2, c.tol.eps_rank):
        chosen: list[int] = []
        for r in order:
            trial = c.members[chosen + [int(r)]]
            if _independent(trial, ratio):
                chosen.append(int(r))
                if len(chosen) == n:
                    return chosen
    raise RuntimeError("could not select a frame spanning the cluster hull")


def _verify(c1: Cluster, c2: Cluster, q: np.ndarray, tol: TolerancePolicy) -> bool:
    mapped = c1.members @ q.T
    dist, idx = c2.tree.query(mapped)
    if dist.max() > tol.eps_geom:
        return False
    return len(np.unique(idx)) == len(idx)


def iter_frame_maps(
    c1: Cluster,
    c2: Cluster,
    tol: TolerancePolicy = DEFAULT_TOL,
    complement: str = "any",
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> Iterator[np.ndarray]:
    """Yield every orthogonal matrix carrying ``c1``'s members onto ``c2``'s.

    Maps are distinguished by their action on the hull of ``c1``. With
    ``complement="identity"`` (only meaningful when both clusters share a hull
    direction space) each map acts trivially on the orthogonal complement;
    otherwise the complement action is whatever Procrustes picks.
    """
    if len(c1) != len(c2) or c1.rank != c2.rank:
        return
    d = c1.dim
    frame = select_frame(c1)
    n = len(frame)
    if complement == "identity":
        comp = c1.hull.complement_basis()
    if n == 0:
        q = np.eye(d)
        if _verify(c1, c2, q, tol):
            yield q
        return
    f_vecs = c1.members[frame]
    f_gram = f_vecs @ f_vecs.T
    f_norm = c1.norms[frame]
    len_tol = tol.eps_geom * 4
    dot_tol = tol.eps_geom * 4 * (1 + 2 * max(c1.rho, 1.0))
    rows2 = np.arange(1, len(c2))
    gram2 = c2.gram
    explored = 0
    chosen: list[int] = []

    def candidates(k):
        mask = np.abs(c2.norms[rows2] - f_norm[k]) <= len_tol
        for l, j in enumerate(chosen):
            mask &= np.abs(gram2[rows2, j] - f_gram[k, l]) <= dot_tol
        for j in chosen:
            mask &= rows2 != j
        return rows2[mask].tolist()

    stack = [iter(candidates(0))]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            if chosen:
                chosen.pop()
            continue
        chosen.append(nxt)
        if len(chosen) < n:
            stack.append(iter(candidates(len(chosen))))
            continue
        explored += 1
        if explored > cap:
            raise CandidateCapError("candidate frame images exceed the cap", cap=cap)
        images = c2.members[chosen]
        if complement == "identity":
            fit = orthogonal_fit(np.vstack([f_vecs, comp]), np.vstack([images, comp]), tol)
        else:
            fit = orthogonal_fit(f_vecs, images, tol)
        if fit is not None and _verify(c1, c2, fit.ortho, tol):
            yield fit.ortho
        chosen.pop()


def clusters_equivalent(
    c1: Cluster,
    c2: Cluster,
    tol: TolerancePolicy = DEFAULT_TOL,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> Isometry | None:
    """An isometry ``g`` with ``g(x1) = x2`` and ``g(C1) = C2``, or ``None``."""
    if abs(c1.rho - c2.rho) > tol.eps_geom:
        raise RadiusMismatchError("clusters have different radii", rho1=c1.rho, rho2=c2.rho)
    if not profiles_match(c1, c2, tol):
        return None
    d = c1.dim
    if _verify(c1, c2, np.eye(d), tol):
        return Isometry.translation(c2.center - c1.center)
    for q in iter_frame_maps(c1, c2, tol, cap=cap):
        return Isometry.about(q, c1.center, c2.center)
    return None


def all_equivalences(c1: Cluster, c2: Cluster, tol: TolerancePolicy = DEFAULT_TOL, cap: int = DEFAULT_CANDIDATE_CAP) -> list[Isometry]:
    if not profiles_match(c1, c2, tol):
        return []
    return [Isometry.about(q, c1.center, c2.center) for q in iter_frame_maps(c1, c2, tol, cap=cap)]


def mapping_residual(g: Isometry, c1: Cluster, c2: Cluster) -> float | None:
    """Worst per-point distance when ``g`` matches ``c1`` onto ``c2``; ``None`` if not a bijection."""
    if len(c1) != len(c2):
        return None
    images = g.apply(c1.absolute()) - c2.center
    dist, idx = c2.tree.query(images)
    if len(np.unique(idx)) != len(idx):
        return None
    return float(dist.max())


def maps_onto(g: Isometry, c1: Cluster, c2: Cluster, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    res = mapping_residual(g, c1, c2)
    return res is not None and res <= tol.eps_geom


class _DisjointSet:
    """Union-find whose root is always the smallest element of the set."""

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        lo, hi = min(ra, rb), max(ra, rb)
        self.parent[hi] = lo
        return lo


@dataclass(eq=False)
class ClusterClass:
    fingerprint: str
    representative: Cluster
    member_centers: list[int]
    witness: dict[int, Isometry]

    def __len__(self):
        return len(self.member_centers)

    def to_dict(self, with_witnesses: bool = False):
        out = {
            "fingerprint": self.fingerprint,
            "representative": self.representative.index,
            "size": len(self.member_centers),
            "cluster_size": len(self.representative),
            "rank": self.representative.rank,
            "member_centers": list(self.member_centers),
        }
        if with_witnesses:
            out["witness"] = {str(k): v.to_dict() for k, v in sorted(self.witness.items())}
        return out


@dataclass(eq=False)
class Classification:
    """Equivalence classes of interior rho-clusters; iterates like a list of classes."""

    rho: float
    level: float
    classes: list[ClusterClass]
    interior_count: int
    excluded_count: int
    clusters: dict[int, Cluster] = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __getitem__(self, k):
        return self.classes[k]

    @property
    def count(self) -> int:
        return len(self.classes)

    def class_of(self) -> dict[int, int]:
        return {c: k for k, cls in enumerate(self.classes) for c in cls.member_centers}

    def to_dict(self, with_witnesses: bool = False):
        return {
            "rho": self.rho,
            "level": self.level,
            "N": self.count,
            "interior_count": self.interior_count,
            "boundary_excluded": self.excluded_count,
            "classes": [c.to_dict(with_witnesses) for c in self.classes],
        }


def classify(
    ps: PointSet,
    rho: float,
    tol: TolerancePolicy | None = None,
    level: float | None = None,
    centers=None,
    jobs: int = 1,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> Classification:
    """Partition interior centers by equivalence of their ``rho``-clusters.

    Centers are the points at depth ``>= level`` (default ``rho``) unless given
    explicitly. Each new cluster is compared with the representatives of
    classes sharing either of its two fingerprint keys; classes found to be
    equivalent through a common cluster are merged.
    """
    tol = ps.tol if tol is None else tol
    level = rho if level is None else level
    if centers is None:
        centers = ps.interior_indices(level)
    centers = sorted(int(c) for c in centers)
    if not centers:
        raise EmptyInputError(
            "no interior centers at this radius; use a larger window", rho=rho, level=level
        )
    excluded = len(ps) - len(centers)
    clusters = clusters_at(ps, centers, rho, jobs=jobs)
    n = len(clusters)
    keys = [(c.fingerprint(0.0), c.fingerprint(0.5)) for c in clusters]
    uf = _DisjointSet(n)
    witness: list[Isometry | None] = [None] * n
    members: dict[int, list[int]] = {}
    by_key: dict[tuple[int, str], list[int]] = {}

    for pos, c in enumerate(clusters):
        k0, k1 = keys[pos]
        roots: list[int] = []
        for key in ((0, k0), (1, k1)):
            for r in by_key.get(key, ()):
                r = uf.find(r)
                if r not in roots:
                    roots.append(r)
        roots.sort()
        matched = []
        for r in roots:
            g = clusters_equivalent(clusters[r], c, tol, cap=cap)
            if g is not None:
                matched.append((r, g))
        if not matched:
            witness[pos] = Isometry.identity(ps.dim)
            members[pos] = [pos]
            root = pos
        else:
            root, g0 = matched[0]
            witness[pos] = g0
            members[root].append(pos)
            for r, g in matched[1:]:
                # rep(root) -> rep(r) through the shared cluster
                h = compose(invert(g), g0)
                for m in members.pop(r):
                    witness[m] = compose(witness[m], h)
                    members[root].append(m)
                uf.union(root, r)
        for key in ((0, k0), (1, k1)):
            lst = by_key.setdefault(key, [])
            if root not in lst:
                lst.append(root)

    classes = []
    for root, pos_list in members.items():
        pos_list.sort()
        rep = clusters[root]
        classes.append(
            ClusterClass(
                fingerprint=keys[root][0],
                representative=rep,
                member_centers=[centers[p] for p in pos_list],
                witness={centers[p]: witness[p] for p in pos_list},
            )
        )
    classes.sort(key=lambda cls: (-len(cls), cls.fingerprint))
    return Classification(
        rho=float(rho),
        level=float(level),
        classes=classes,
        interior_count=len(centers),
        excluded_count=excluded,
        clusters={centers[p]: clusters[p] for p in range(n)},
    )


def count_classes(ps: PointSet, rho: float, level: float | None = None, **kw) -> int:
    return classify(ps, rho, level=level, **kw).count


@dataclass
class CountingProfile:
    """N(rho) on ``[0, b_1), [b_1, b_2), ..., [b_k, rho_max]``; ``counts[0]`` is the singleton regime."""

    rho_max: float
    breakpoints: list[float]
    counts: list[int]
    probes: list[float]
    interior_count: int
    excluded_count: int

    def intervals(self) -> list[tuple[float, float]]:
        edges = [0.0] + list(self.breakpoints) + [self.rho_max]
        return [(edges[k], edges[k + 1]) for k in range(len(self.counts))]

    def value(self, rho: float) -> int:
        k = int(np.searchsorted(np.asarray(self.breakpoints), rho, side="right"))
        return self.counts[k]

    def rows(self) -> list[dict]:
        return [
            {
                "rho": lo,
                "N": n,
                "interior_count": self.interior_count,
                "boundary_excluded": self.excluded_count,
            }
            for (lo, _), n in zip(self.intervals(), self.counts)
        ]

    def to_dict(self):
        return {
            "rho_max": self.rho_max,
            "breakpoints": list(self.breakpoints),
            "counts": list(self.counts),
            "probes": list(self.probes),
            "interior_count": self.interior_count,
            "boundary_excluded": self.excluded_count,
            "rows": self.rows(),
        }


def distance_breakpoints(ps: PointSet, centers, rho_max: float, tol: TolerancePolicy | None = None) -> list[float]:
    tol = ps.tol if tol is None else tol
    values = []
    for i, nb in zip(centers, ps.tree.query_ball_point(ps.points[centers], rho_max + tol.eps_geom)):
        d = np.linalg.norm(ps.points[nb] - ps.points[i], axis=1)
        values.append(d[d > tol.eps_geom])
    if not values:
        return []
    allv = np.sort(np.concatenate(values))
    out: list[float] = []
    for v in allv:
        if not out or v - out[-1] > tol.quant:
            out.append(float(v))
    return out


def counting_profile(
    ps: PointSet,
    rho_max: float,
    tol: TolerancePolicy | None = None,
    jobs: int = 1,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> CountingProfile:
    """N(rho) for ``0 <= rho <= rho_max`` over the centers interior at ``rho_max``.

    Fixing the center set keeps the profile monotone: classes at a larger
    radius refine classes at a smaller one.
    """
    if not rho_max > 0:
        raise ValueError("rho_max must be positive")
    tol = ps.tol if tol is None else tol
    centers = ps.interior_indices(rho_max)
    if len(centers) == 0:
        raise EmptyInputError("no interior centers at rho_max; use a larger window", rho_max=rho_max)
    breaks = distance_breakpoints(ps, centers, rho_max, tol)
    edges = [0.0] + breaks + [rho_max]
    probes = []
    for k in range(len(breaks) + 1):
        lo, hi = edges[k], edges[k + 1]
        probes.append((lo + hi) / 2 if hi - lo > tol.quant else lo)
    counts = [classify(ps, p, tol, level=rho_max, centers=centers, jobs=jobs, cap=cap).count for p in probes]
    return CountingProfile(
        rho_max=float(rho_max),
        breakpoints=breaks,
        counts=counts,
        probes=probes,
        interior_count=len(centers),
        excluded_count=len(ps) - len(centers),
    )
