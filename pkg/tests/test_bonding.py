import itertools
import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from tbond.bonding import (
    bond_graph,
    is_t_bonded,
    minimal_bond_parameter,
    minimax_chain,
    shell_linkage_witness,
)
from tbond.errors import InvalidIndexError, RankDeficientError
from tbond.generators import PRESETS
from tbond.pointset import BallWindow, PointSet, estimate_R, estimate_r


def brute_bottleneck(points, i, j):
    """Smallest threshold connecting i and j: binary search over sorted pair lengths."""
    dist = squareform(pdist(points))
    values = np.unique(dist[np.triu_indices(len(points), 1)])

    def connected(limit):
        seen, stack = {i}, [i]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(dist[u] <= limit):
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        return j in seen

    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if connected(values[mid]):
            hi = mid
        else:
            lo = mid + 1
    return values[lo]


def test_bond_graph_z2(z2):
    g = bond_graph(z2, 1)
    deg = g.degrees()
    inner = z2.interior_indices(1.0)
    assert np.all(deg[inner] == 4)
    assert np.all(g.lengths == pytest.approx(1.0))
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    assert list(map(tuple, g.edges)) == sorted(map(tuple, g.edges))
    assert len(bond_graph(z2, 0.5).edges) == 0
    with pytest.raises(ValueError):
        bond_graph(z2, 0)


def test_is_t_bonded_z3(z3):
    assert is_t_bonded(z3, 1).bonded
    rep = is_t_bonded(z3, 0.9)
    assert not rep.bonded and rep.failed == ["connectivity"]
    assert rep.components == len(z3)


def test_collinear_fails_hull_condition():
    ps = PointSet(np.array([[0.0, 0], [1, 0], [2, 0]]))
    rep = is_t_bonded(ps, 10)
    assert rep.failed == ["affine_hull"] and rep.hull_dim == 1
    with pytest.raises(RankDeficientError):
        minimal_bond_parameter(ps)


def test_minimal_bond_parameter_examples(z2, z3, cross, infinite_small):
    assert minimal_bond_parameter(z2) == pytest.approx(1.0, abs=1e-9)
    assert minimal_bond_parameter(z3) == pytest.approx(1.0, abs=1e-9)
    assert minimal_bond_parameter(cross) == pytest.approx(1.0, abs=1e-9)
    t = PRESETS["paper-default"].t
    assert minimal_bond_parameter(infinite_small) == pytest.approx(t, abs=1e-9)
    assert is_t_bonded(infinite_small, t).bonded


def test_singleton_rejected():
    with pytest.raises(RankDeficientError):
        minimal_bond_parameter(PointSet(np.zeros((1, 2))))


def test_minimax_collinear_through_middle():
    ps = PointSet(np.array([[0.0, 0], [2, 0], [1, 0], [1, 5]]))
    chain = minimax_chain(ps, 0, 1)
    assert chain.indices == [0, 2, 1]
    assert chain.max_link == 1.0


def test_minimax_z2_lattice_path(z2):
    i, j = z2.index_of([0, 0]), z2.index_of([3, 4])
    chain = minimax_chain(z2, i, j)
    assert chain.max_link == pytest.approx(1.0)
    assert len(chain.indices) == 8  # fewest links: Manhattan distance 7
    assert chain.to_dict()["indices"] == chain.indices


def test_minimax_errors(z2):
    with pytest.raises(InvalidIndexError):
        minimax_chain(z2, 3, 3)
    with pytest.raises(InvalidIndexError):
        minimax_chain(z2, 0, len(z2))


@pytest.mark.parametrize("seed", range(60))
def test_minimax_optimal_vs_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 41))
    d = int(rng.integers(2, 4))
    pts = rng.uniform(0, 10, (n, d))
    ps = PointSet(pts)
    i, j = (int(v) for v in rng.choice(n, 2, replace=False))
    chain = minimax_chain(ps, i, j)
    assert chain.indices[0] == i and chain.indices[-1] == j
    assert len(set(chain.indices)) == len(chain.indices)
    links = np.linalg.norm(np.diff(pts[chain.indices], axis=0), axis=1)
    assert chain.max_link == pytest.approx(links.max())
    assert chain.max_link == pytest.approx(brute_bottleneck(pts, i, j), abs=1e-12)
    assert chain.max_link <= minimal_bond_parameter(ps) + 1e-12


def test_minimax_is_deterministic():
    pts = np.random.default_rng(3).uniform(0, 5, (30, 2))
    a = minimax_chain(PointSet(pts), 0, 7)
    b = minimax_chain(PointSet(pts), 0, 7)
    assert a.indices == b.indices


@pytest.mark.parametrize("name", ["z2", "z3", "cross"])
def test_delone_chain_bound(name, request):
    ps = request.getfixturevalue(name)
    r = estimate_r(ps)
    est = estimate_R(ps)
    t = minimal_bond_parameter(ps)
    assert t < 2 * est.value
    assert t <= math.sqrt(4 * est.value**2 - r**2) + 2 * est.grid_step
    inner = ps.interior_indices(2.0)
    for i, j in itertools.islice(itertools.combinations(inner[:12].tolist(), 2), 30):
        assert minimax_chain(ps, i, j).max_link < 2 * est.value


def test_delone_chain_bound_perturbed():
    rng = np.random.default_rng(11)
    base = np.array([(x, y) for x in range(-7, 8) for y in range(-7, 8)], dtype=float)
    ps = PointSet(base + rng.uniform(-0.08, 0.08, base.shape), window=BallWindow(np.zeros(2), 7.0))
    est = estimate_R(ps, grid_step=0.05, margin=3)
    inner = ps.interior_indices(3.0)
    for i, j in itertools.combinations(inner[:10].tolist(), 2):
        assert minimax_chain(ps, i, j).max_link < 2 * est.value


@pytest.mark.parametrize("name", ["z2", "cross", "punctured", "infinite_small"])
def test_shell_linkage(name, request):
    ps = request.getfixturevalue(name)
    t = minimal_bond_parameter(ps)
    for rho in (0.5, 1.0, 1.7, 2.5):
        for i in ps.interior_indices(rho + t)[:25]:
            w = shell_linkage_witness(ps, int(i), rho, t)
            assert w is not None
            dist = np.linalg.norm(ps.points[w] - ps.points[i])
            assert rho < dist <= rho + t + 1e-9
