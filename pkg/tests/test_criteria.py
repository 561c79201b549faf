import json

import jsonschema
import numpy as np
import pytest

from tbond.cli import load_schema, to_json
from tbond.cluster import classify
from tbond.criteria import (
    CAVEAT,
    check_m_regularity,
    check_rank_stabilization,
    check_regularity,
    transitivity_check,
)
from tbond.errors import MarginError
from tbond.generators import PRESETS, gen_cubic
from tbond.pointset import BallWindow, PointSet

VERDICT = load_schema("verdict")


def validated(verdict):
    data = json.loads(to_json(verdict.to_dict()))
    jsonschema.validate(data, VERDICT)
    assert data["caveat"] == CAVEAT
    return data


def test_cubic_regular(z3):
    v = check_regularity(z3, 1.0, 1.0)
    data = validated(v)
    assert v.passed is True and v.m == 1
    ev = data["evidence"]
    assert ev["N_rho0_plus_t"] == 1 and ev["stabilization"]["equal"]
    assert ev["stabilization"]["order_rho0"] == 48
    assert ev["rank_conclusion"]["full"]
    assert ev["transitivity"]["ok"]
    assert data["set_level"] == "consistent"


def test_cubic_m_regular_is_one(z3):
    v = check_m_regularity(z3, 1.0, 1.0)
    validated(v)
    assert v.passed is True and v.m == 1


def test_punctured_m_regular(punctured):
    v = check_m_regularity(punctured, 1.0, 2.0)
    data = validated(v)
    assert v.passed is True and v.m == 2
    ev = data["evidence"]
    assert ev["N_rho0"] == ev["N_rho0_plus_t"] == 2
    assert len(ev["stabilization"]) == 2 and all(s["equal"] for s in ev["stabilization"])
    # the classes split the interior centers into the two parity orbits
    parts = ev["decomposition"]
    assert sorted(len(p) for p in parts) == sorted(c["size"] for c in ev["classes"])
    assert not set(parts[0]) & set(parts[1])
    for part in parts:
        odd = {bool(x % 2 and y % 2) for x, y in np.round(punctured.points[part]).astype(int)}
        assert len(odd) == 1


@pytest.mark.parametrize("rho0", [1.0, 2.0])
def test_punctured_not_regular(punctured, rho0):
    v = check_regularity(punctured, 1.0, rho0)
    data = validated(v)
    assert v.passed is False and v.m is None
    assert data["evidence"]["N_rho0_plus_t"] == 2
    assert data["set_level"] == "inconclusive"


def test_cross_fails_at_one_and_passes_at_two(cross):
    low = check_regularity(cross, 1.0, 1.0)
    data = validated(low)
    assert low.passed is False
    assert data["evidence"]["N_rho0_plus_t"] == 1
    assert not data["evidence"]["stabilization"]["equal"]
    assert any("stabilizers" in r for r in data["evidence"]["reasons"])
    high = check_regularity(cross, 1.0, 2.0)
    validated(high)
    assert high.passed is True
    assert high.evidence["transitivity"]["ok"]


def test_cross_rank_profile(cross):
    v = check_rank_stabilization(cross, 1.0)
    data = validated(v)
    assert v.passed is True
    ranks = [lv["rank"] for lv in data["evidence"]["profile"]]
    assert ranks == [2, 3, 3, 3]
    assert data["evidence"]["stabilization_k"] == 2
    assert data["evidence"]["final_rank"] == 3


def test_cubic_rank_profile_immediate():
    ps = gen_cubic(2, 6)
    v = check_rank_stabilization(ps, 1.0)
    assert v.passed is True
    assert v.evidence["stabilization_k"] == 1
    assert all(lv["rank"] == 2 for lv in v.evidence["profile"])


def test_collinear_rank_reports_hull():
    pts = np.array([[x, 0.0] for x in range(-10, 11)])
    ps = PointSet(pts, window=BallWindow(np.zeros(2), 10.0))
    v = check_rank_stabilization(ps, 1.0)
    data = validated(v)
    assert v.passed is False
    assert data["evidence"]["set_hull_dim"] == 1
    assert any("affine hull" in r for r in data["evidence"]["reasons"])
    assert data["evidence"]["t_bonded"]["failed"] == ["affine_hull"]


def test_margin_errors(z2):
    with pytest.raises(MarginError):
        check_regularity(z2, 1.0, 10.0)
    with pytest.raises(MarginError):
        check_m_regularity(z2, 1.0, 10.0)
    with pytest.raises(MarginError):
        check_rank_stabilization(z2, 3.0)


def test_transitivity_detects_a_bad_witness(punctured):
    cls = classify(punctured, 1.0)
    good = transitivity_check(punctured, cls, max_pairs=16)
    assert good["ok"] and good["pairs_checked"] == 16 and good["points_tested"] > 0
    # a witness shifted by half a unit cannot extend to a symmetry
    k = 0
    c = next(i for i in cls[k].member_centers if i != cls[k].representative.index)
    g = cls[k].witness[c]
    cls[k].witness[c] = type(g)(g.ortho, g.shift + np.array([0.5, 0.0]))
    try:
        bad = transitivity_check(punctured, cls, max_pairs=10**6)
    finally:
        cls[k].witness[c] = g
    assert not bad["ok"]


def test_transitivity_sample_is_seeded(z3):
    cls = classify(z3, 2.0)
    a = transitivity_check(z3, cls, max_pairs=8, seed=3)
    b = transitivity_check(z3, cls, max_pairs=8, seed=3)
    assert a == b


@pytest.mark.parametrize("name,rho0", [("z3", 1.0), ("cross", 2.0)])
def test_monotone_consistency(name, rho0, request):
    ps = request.getfixturevalue(name)
    assert check_regularity(ps, 1.0, rho0).passed is True
    # radii away from the distance breakpoints of the lattice
    for later in (rho0 + 0.05, rho0 + 0.5):
        if len(ps.interior_indices(later + 1.0)) == 0:
            continue
        assert check_regularity(ps, 1.0, later).passed is True


@pytest.mark.parametrize("name,rho0", [("z3", 1.0), ("cross", 2.0), ("cross", 1.0), ("punctured", 2.0)])
def test_regular_implies_one_regular(name, rho0, request):
    ps = request.getfixturevalue(name)
    if check_regularity(ps, 1.0, rho0).passed is True:
        m = check_m_regularity(ps, 1.0, rho0)
        assert m.passed is True and m.m == 1


def test_infinite_type_not_m_regular_at_kt(infinite_small):
    params = PRESETS["paper-default"]
    v = check_m_regularity(infinite_small, params.t, params.k * params.t)
    assert v.passed is False
    assert v.evidence["N_rho0"] != v.evidence["N_rho0_plus_t"]
