import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdsweep.errors import DegenerateGeometryError, InfeasibleScenarioError, ScenarioError
from crowdsweep.model import (
    ParticipantSpec,
    Scenario,
    active_pairs,
    bundled_scenario,
    cost,
    direction_angle,
    distance_gradient,
    is_feasible,
    is_feasible_velocity,
    load_scenario,
    normal_generators,
    pairs,
    perturbation,
    prox_constants,
    shift_vector,
    signed_distance,
)

coord = st.floats(-100, 100, allow_nan=False)
point = st.tuples(coord, coord)


def two(x1, x2, R=3.0, **kw):
    return Scenario(6.0, R, [ParticipantSpec(x1, 1.0), ParticipantSpec(x2, 1.0)], **kw)


def test_bundled_ex1_position_is_exact():
    sc = bundled_scenario("ex1")
    off = 6 / math.sqrt(2)
    assert sc.x0.tolist() == pytest.approx([-48 - off, 48 + off, -48, 48], abs=1e-12)
    assert signed_distance(sc.x0, sc.R, 0, 1) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3"])
def test_bundled_round_trip(name):
    sc = bundled_scenario(name)
    assert Scenario.from_dict(json.loads(json.dumps(sc.to_dict()))) == sc
    assert sc.speeds.tolist() == [6.0, 3.0]
    assert (sc.T, sc.R) == (6.0, 3.0)


def test_overlap_rejected():
    with pytest.raises(InfeasibleScenarioError):
        two((10, 0), (14, 0))


@pytest.mark.parametrize("bad", [
    {"T": 6, "R": 3, "participants": [{"x0": [1, 1], "speed": 1}]},
    {"T": -1, "R": 3, "participants": [{"x0": [9, 9], "speed": 1}, {"x0": [-9, 9], "speed": 1}],
     "control_bounds": [0, 1]},
    {"T": 6, "R": 3, "participants": [{"x0": [9, 9], "speed": 1}, {"x0": [-9, 9], "speed": 1}]},
    {"T": "x", "R": 3, "participants": [], "control_bounds": [0, 1]},
    [1, 2],
])
def test_malformed_scenarios(bad):
    with pytest.raises(ScenarioError):
        Scenario.from_dict(bad)


def test_load_scenario_malformed_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("{nope")
    with pytest.raises(ScenarioError, match="malformed JSON"):
        load_scenario(p)


def test_participant_at_exit_rejected():
    with pytest.raises(ScenarioError):
        ParticipantSpec((0.0, 0.0), 1.0)


def test_controls_checked():
    sc = two((10, 0), (-10, 0), control_bounds=(0.0, 2.0))
    with pytest.raises(ScenarioError):
        sc.check_controls([1.0, 3.0])
    with pytest.raises(ScenarioError):
        sc.check_controls([1.0])


def test_pairs_lexicographic():
    assert pairs(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_signed_distance_touching_zero():
    assert signed_distance([0, 0, 6, 0], 3.0, 0, 1) == 0.0
    with pytest.raises(ValueError):
        signed_distance([0, 0, 6, 0], 3.0, 1, 1)


@given(point, point)
def test_gradient_norm_sqrt2(p, q):
    cfg = np.array([*p, *q])
    if p == q:
        with pytest.raises(DegenerateGeometryError):
            distance_gradient(cfg, 0, 1)
        return
    g = distance_gradient(cfg, 0, 1)
    assert np.linalg.norm(g) == pytest.approx(math.sqrt(2), rel=1e-12)
    assert g[:2] == pytest.approx(-g[2:])


@given(point, point, point)
def test_translation_invariance(p, q, shift):
    cfg = np.array([*p, *q])
    moved = cfg + np.tile(shift, 2)
    assert signed_distance(moved, 1.0, 0, 1) == pytest.approx(signed_distance(cfg, 1.0, 0, 1), abs=1e-9)


def test_shift_vector_leaves_distances():
    r = shift_vector(3, 2.5)
    assert np.linalg.norm(r) == pytest.approx(2.5)
    cfg = np.array([0.0, 0.0, 7.0, 1.0, -3.0, 9.0])
    for i, j in pairs(3):
        assert signed_distance(cfg - r, 1.0, i, j) == pytest.approx(signed_distance(cfg, 1.0, i, j))


def test_active_and_normal_generators():
    cfg = np.array([0.0, 0.0, 6.0, 0.0, 30.0, 0.0])
    assert active_pairs(cfg, 3.0) == [(0, 1)]
    act, G = normal_generators(cfg, 3.0)
    assert G.shape == (6, 1)
    assert G[:, 0].tolist() == [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0]
    assert is_feasible_velocity(cfg, [0, 0, 1, 0, 0, 0], 3.0)
    assert not is_feasible_velocity(cfg, [1, 0, 0, 0, 0, 0], 3.0)
    assert is_feasible(cfg, 3.0)
    assert not is_feasible([0, 0, 5, 0], 3.0)


def test_direction_angle_range():
    assert direction_angle((1, 0)) == 0.0
    assert direction_angle((0, -1)) == pytest.approx(1.5 * math.pi)
    assert direction_angle((-1, 1)) == pytest.approx(0.75 * math.pi)
    with pytest.raises(DegenerateGeometryError):
        direction_angle((0, 0))


@given(st.floats(0.01, 2 * math.pi - 0.01))
def test_perturbation_scales_with_angle(theta):
    f = perturbation([0, 0, 0, 0], [2.0, 0.5], [3.0, 4.0], [theta, 0.0])
    assert np.hypot(*f[:2]) == pytest.approx(6.0)
    assert direction_angle(f[:2]) == pytest.approx(theta, abs=1e-9)
    assert f[2:].tolist() == pytest.approx([2.0, 0.0])


@settings(max_examples=50)
@given(st.lists(coord, min_size=4, max_size=4), st.lists(st.floats(0, 10), min_size=2, max_size=2),
       st.lists(st.floats(0, 10), min_size=2, max_size=2), st.floats(0, 1))
def test_cost_convex_in_controls(x, a, b, t):
    x, a, b = map(np.asarray, (x, a, b))
    mix = cost(x, t * a + (1 - t) * b, 6.0)
    assert mix <= t * cost(x, a, 6.0) + (1 - t) * cost(x, b, 6.0) + 1e-9 * (1 + cost(x, a, 6.0) + cost(x, b, 6.0))


def test_cost_value():
    assert cost([3, 4], [1.0], 2.0) == pytest.approx(0.5 * 25 + 1.0)


def test_prox_constants():
    c = prox_constants(3, 3.0)
    assert c.beta == pytest.approx(216 * math.sqrt(6), rel=1e-14)
    assert c.M3 == pytest.approx(2 / 3)
    assert c.eta_prox is None
    assert prox_constants(2, 1.0).to_dict()["beta_defined"] is False
    with pytest.raises(ValueError):
        prox_constants(1, 1.0)


def test_rotation_preserves_distances():
    sc = bundled_scenario("ex3")
    rot = sc.rotated(1.1)
    assert signed_distance(rot.x0, rot.R, 0, 1) == pytest.approx(signed_distance(sc.x0, sc.R, 0, 1))
    assert np.linalg.norm(rot.x0) == pytest.approx(np.linalg.norm(sc.x0))
