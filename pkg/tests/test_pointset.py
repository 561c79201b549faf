import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbond.errors import CapacityError, DegenerateBasisError, DimensionError, DuplicatePointError, EmptyInputError, ParseError
from tbond.pointset import (
    BallWindow,
    PeriodicSpec,
    PointSet,
    SlabWindow,
    dump_pointset,
    estimate_R,
    estimate_r,
    load_pointset,
    realize_window,
)


def test_roundtrip_preserves_everything(cross):
    text = dump_pointset(cross)
    back = load_pointset(text)
    assert np.array_equal(back.points, cross.points)
    assert np.allclose(back.periodic.basis, cross.periodic.basis)
    assert back.window.to_dict() == cross.window.to_dict()
    assert back.provenance == cross.provenance


@pytest.mark.parametrize("wrap", [str, str.encode, io.StringIO, lambda s: io.BytesIO(s.encode())])
def test_load_accepts_streams(wrap):
    text = json.dumps({"dimension": 2, "points": [[0, 0], [1, 0]]})
    ps = load_pointset(wrap(text))
    assert len(ps) == 2 and ps.dim == 2


def test_load_from_path(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"dimension": 1, "points": [[0], [1], [3]], "comment": "line"}))
    ps = load_pointset(path)
    assert ps.comment == "line"
    assert isinstance(ps.window, BallWindow)
    assert ps.window.radius == pytest.approx(5 / 3)


def test_malformed_json_reports_position():
    with pytest.raises(ParseError) as err:
        load_pointset('{"dimension": 2,\n "points": [[0, 0], [1 0]]}')
    assert err.value.line == 2
    assert err.value.column is not None
    assert err.value.to_dict()["code"] == "parse_error"


def test_ragged_points_rejected():
    with pytest.raises(DimensionError) as err:
        load_pointset(json.dumps({"dimension": 2, "points": [[0, 0], [1, 0, 0]]}))
    assert err.value.details["index"] == 1


def test_duplicates_rejected():
    with pytest.raises(DuplicatePointError) as err:
        load_pointset(json.dumps({"dimension": 2, "points": [[0, 0], [1, 0], [0, 1e-12]]}))
    assert err.value.details["index"] == 2


@pytest.mark.parametrize(
    "payload",
    [{"dimension": 2, "points": []}, {"dimension": 2}, [1, 2], {"dimension": 0, "points": [[0]]}],
)
def test_bad_payloads(payload):
    with pytest.raises((ParseError, EmptyInputError, DimensionError)):
        load_pointset(json.dumps(payload))


def test_non_finite_rejected():
    with pytest.raises(ParseError):
        load_pointset('{"dimension": 1, "points": [[0], [NaN]]}')


def test_periodic_spec_validation():
    with pytest.raises(DegenerateBasisError):
        PeriodicSpec(np.array([[1.0, 0], [2, 0]]), np.zeros((1, 2)))
    with pytest.raises(DuplicatePointError):
        PeriodicSpec(np.eye(2), np.array([[0.0, 0], [1.0, 0]]))


def test_realize_window_counts_z2():
    ps = realize_window(PeriodicSpec(np.eye(2), np.zeros((1, 2))), 3)
    brute = sum(1 for x in range(-3, 4) for y in range(-3, 4) if x * x + y * y <= 9)
    assert len(ps) == brute
    assert np.allclose(ps.points[0], 0)


def test_realize_window_is_deterministic():
    spec = PeriodicSpec(np.eye(3), np.array([[0, 0, 0], [0.5, 0.5, 0.5]]))
    a, b = realize_window(spec, 4), realize_window(spec, 4)
    assert np.array_equal(a.points, b.points)


def test_realize_window_capacity():
    with pytest.raises(CapacityError):
        realize_window(PeriodicSpec(np.eye(3), np.zeros((1, 3))), 50, capacity=1000)


def test_interior_indices_ball(z2):
    level = 3.0
    idx = z2.interior_indices(level)
    norms = np.linalg.norm(z2.points[idx], axis=1)
    assert np.all(norms <= 7 - level + 1e-9)
    outside = np.setdiff1d(np.arange(len(z2)), idx)
    assert np.all(np.linalg.norm(z2.points[outside], axis=1) > 7 - level)


def test_slab_window_depth():
    w = SlabWindow(0, 1.0, 2.0)
    assert np.allclose(w.depth([[1, 5], [3, 0], [-2, 0]]), [2, 0, -1])


def test_nearest_interior_and_index_of(z3):
    i = z3.nearest_interior(2.0)
    assert np.allclose(z3.points[i], 0)
    assert z3.index_of([1, 0, 0]) == z3.index_of(np.array([1.0, 0, 0]))
    assert z3.contains([[0.5, 0, 0], [1, 1, 1]]).tolist() == [False, True]


def test_points_are_read_only(z2):
    with pytest.raises(ValueError):
        z2.points[0, 0] = 3.0


def test_estimate_r_z2_and_cross(z2, cross):
    assert estimate_r(z2) == 0.5
    assert estimate_r(cross) == 0.5


def test_estimate_R_z2_periodic(z2):
    est = estimate_R(z2, grid_step=0.05)
    assert est.method == "periodic-cell"
    assert abs(est.value - math.sqrt(2) / 2) <= est.grid_step
    assert float(est) == est.value


def test_estimate_R_without_periodic_info(z2):
    bare = PointSet(z2.points, window=z2.window)
    est = estimate_R(bare, grid_step=0.05)
    assert est.method == "interior-grid"
    assert abs(est.value - math.sqrt(2) / 2) <= est.grid_step


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_delone_bounds_random_perturbed_grid(seed):
    # perturbation by at most 0.1 keeps r >= 0.4 and R <= sqrt(2)/2 + 0.1
    rng = np.random.default_rng(seed)
    base = np.array([(x, y) for x in range(-6, 7) for y in range(-6, 7)], dtype=float)
    pts = base + rng.uniform(-0.1, 0.1, base.shape) / math.sqrt(2)
    ps = PointSet(pts, window=BallWindow(np.zeros(2), 6.0))
    assert estimate_r(ps) >= 0.4 - 1e-12
    est = estimate_R(ps, grid_step=0.1, margin=2.5)
    assert est.value <= math.sqrt(2) / 2 + 0.1 + 1e-12
    assert estimate_r(ps) <= est.value + est.grid_step
