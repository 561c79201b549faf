"""Bond graphs at a threshold t, t-bondedness and bottleneck-optimal chains."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree

from .errors import InvalidIndexError, RankDeficientError
from .geom import affine_rank
from .pointset import PointSet, estimate_r


@dataclass(eq=False)
class BondGraph:
    """Undirected graph on point indices; edge ``(i, j)`` iff ``0 < |p_i p_j| <= t``."""

    source: PointSet
    t: float
    edges: np.ndarray  # (m, 2) int, i < j, lexicographic
    lengths: np.ndarray

    @property
    def n(self) -> int:
        return len(self.source)

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges.tolist():
            adj[i].append(j)
            adj[j].append(i)
        for row in adj:
            row.sort()
        return adj

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def sparse(self, nodes=None):
        m = len(self.edges)
        mat = coo_matrix((np.ones(m), (self.edges[:, 0], self.edges[:, 1])), shape=(self.n, self.n)).tocsr()
        if nodes is not None:
            mat = mat[nodes][:, nodes]
        return mat

    def components(self, nodes=None) -> tuple[int, np.ndarray]:
        return connected_components(self.sparse(nodes), directed=False)


def bond_graph(ps: PointSet, t: float) -> BondGraph:
    if not t > 0:
        raise ValueError("bond threshold t must be positive")
    pairs = ps.tree.query_pairs(t + ps.tol.eps_geom, output_type="ndarray")
    if len(pairs) == 0:
        return BondGraph(ps, float(t), np.zeros((0, 2), dtype=int), np.zeros(0))
    pairs = np.sort(pairs, axis=1)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    lengths = np.linalg.norm(ps.points[pairs[:, 0]] - ps.points[pairs[:, 1]], axis=1)
    return BondGraph(ps, float(t), pairs.astype(int), lengths)


@dataclass
class BondedReport:
    bonded: bool
    t: float
    connected: bool
    components: int
    hull_dim: int
    dimension: int
    failed: list[str] = field(default_factory=list)
    component_labels: list[int] | None = None

    def __bool__(self):
        return self.bonded

    def to_dict(self):
        out = {
            "bonded": self.bonded,
            "t": self.t,
            "connected": self.connected,
            "components": self.components,
            "hull_dim": self.hull_dim,
            "dimension": self.dimension,
            "failed": self.failed,
        }
        if self.component_labels is not None:
            out["component_labels"] = self.component_labels
        return out


def is_t_bonded(ps: PointSet, t: float) -> BondedReport:
    """Full affine rank plus connectivity of the bond graph at ``t``."""
    graph = bond_graph(ps, t)
    ncomp, labels = graph.components()
    hull = affine_rank(ps.points, ps.tol)
    failed = []
    if hull.dim < ps.dim:
        failed.append("affine_hull")
    if ncomp > 1:
        failed.append("connectivity")
    return BondedReport(
        bonded=not failed,
        t=float(t),
        connected=ncomp == 1,
        components=int(ncomp),
        hull_dim=hull.dim,
        dimension=ps.dim,
        failed=failed,
        component_labels=labels.tolist() if ncomp > 1 else None,
    )


def _mst(ps: PointSet):
    """Euclidean minimum spanning tree as a sparse matrix.

    Grows a radius graph until it is connected; every MST edge is no longer
    than the bottleneck, so the MST of that graph is a Euclidean MST.
    """
    n = len(ps)
    radius = 2 * estimate_r(ps) * 1.5
    while True:
        pairs = ps.tree.query_pairs(radius, output_type="ndarray")
        if len(pairs):
            w = np.linalg.norm(ps.points[pairs[:, 0]] - ps.points[pairs[:, 1]], axis=1)
            mat = coo_matrix((w, (pairs[:, 0], pairs[:, 1])), shape=(n, n)).tocsr()
            ncomp, _ = connected_components(mat, directed=False)
            if ncomp == 1:
                return minimum_spanning_tree(mat)
        radius *= 2


def minimal_bond_parameter(ps: PointSet) -> float:
    """Least ``t`` making the bond graph connected (longest Euclidean MST edge)."""
    if len(ps) < 2:
        raise RankDeficientError("need at least two points")
    hull = affine_rank(ps.points, ps.tol)
    if hull.dim < ps.dim:
        raise RankDeficientError("point set does not span the space", hull_dim=hull.dim, dimension=ps.dim)
    return float(_mst(ps).data.max())


@dataclass
class Chain:
    indices: list[int]
    max_link: float

    def to_dict(self):
        return {"indices": list(self.indices), "max_link": self.max_link}


def _bottleneck(ps: PointSet, i: int, j: int) -> float:
    tree = _mst(ps)
    sym = (tree + tree.T).tocsr()
    order, pred = breadth_first_order(sym, i, directed=False, return_predecessors=True)
    worst = 0.0
    k = j
    while k != i:
        p = pred[k]
        worst = max(worst, float(sym[p, k]))
        k = p
    return worst


def minimax_chain(ps: PointSet, i: int, j: int) -> Chain:
    """Chain from ``i`` to ``j`` whose longest link is as short as possible.

    The bottleneck value is read off the Euclidean MST path. Among chains
    achieving it, the one with fewest links is returned, ties broken by the
    lexicographically smallest index sequence.
    """
    i, j = ps.check_index(i), ps.check_index(j)
    if i == j:
        raise InvalidIndexError("chain endpoints must differ", index=i)
    limit = _bottleneck(ps, i, j)
    adj = bond_graph(ps, limit).adjacency()
    # hop distances to j, then greedy smallest-index descent from i
    dist = [-1] * len(ps)
    dist[j] = 0
    queue = deque([j])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    path = [i]
    while path[-1] != j:
        u = path[-1]
        path.append(next(v for v in adj[u] if dist[v] == dist[u] - 1))
    pts = ps.points[path]
    links = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return Chain(path, float(links.max()))


def shell_linkage_witness(ps: PointSet, i: int, rho: float, t: float) -> int | None:
    """A point in ``C_x(rho + t) minus C_x(rho)`` reachable from ``x`` inside ``C_x(rho + t)``.

    Returns ``None`` when no such point exists (which for a t-bonded set can
    only happen if ``C_x(rho)`` is already everything).
    """
    i = ps.check_index(i)
    eps = ps.tol.eps_geom
    members = np.array(sorted(ps.tree.query_ball_point(ps.points[i], rho + t + eps)))
    local = ps.points[members]
    dist = np.linalg.norm(local - ps.points[i], axis=1)
    pairs = cKDTree(local).query_pairs(t + eps, output_type="ndarray")
    n = len(members)
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    start = int(np.flatnonzero(members == i)[0])
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if dist[u] > rho + eps:
            return int(members[u])
        for v in sorted(adj[u]):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return None
