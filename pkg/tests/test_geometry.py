import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from miabsim.geometry import (
    GridLayout, Turn, bus_walker, distance_3d, draw_turn, pedestrian_walker, rotate_offset, step_mobility,
)
from miabsim.scenario import build_scenario
from miabsim.config import ScenarioConfig, ScenarioKind

LAYOUT = GridLayout()


class FixedRng:
    """Stand-in generator returning a fixed uniform."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def test_layout_dimensions():
    assert LAYOUT.pitch_m == 140.0
    assert LAYOUT.extent_m == 434.0
    np.testing.assert_allclose(LAYOUT.street_centers, [7, 147, 287, 427])


def test_bus_step_40kmh_one_slot():
    rng = np.random.default_rng(3)
    w = bus_walker(LAYOUT, rng, 40 / 3.6)
    before = w.position()
    w.advance(w.speed_mps * 0.25e-3, rng)
    assert distance_3d(before, w.position()) == pytest.approx(40 / 3.6 * 2.5e-4, abs=1e-12)
    assert distance_3d(before, w.position()) == pytest.approx(2.7778e-3, abs=1e-7)


def test_pedestrian_step_mid_sidewalk():
    rng = np.random.default_rng(4)
    w = pedestrian_walker(LAYOUT, rng, 3 / 3.6, 1.5)
    heading = w.heading
    before = w.position()
    w.advance(w.speed_mps * 0.25e-3, rng)
    assert w.heading == heading
    assert distance_3d(before, w.position()) == pytest.approx(2.0833e-4, abs=1e-8)


@pytest.mark.parametrize("u,turn", [(0.0, Turn.STRAIGHT), (0.599, Turn.STRAIGHT), (0.61, Turn.LEFT),
                                    (0.79, Turn.LEFT), (0.81, Turn.RIGHT)])
def test_turn_draw_thresholds(u, turn):
    assert draw_turn(FixedRng(u)) is turn


def test_turn_probabilities_empirical():
    rng = np.random.default_rng(5)
    draws = np.array([int(draw_turn(rng)) for _ in range(20000)])
    freq = np.bincount(draws, minlength=3) / len(draws)
    np.testing.assert_allclose(freq, [0.6, 0.2, 0.2], atol=0.015)


def test_infeasible_turns_renormalised():
    rng = np.random.default_rng(6)
    draws = {draw_turn(rng, (False, True, True)) for _ in range(200)}
    assert Turn.STRAIGHT not in draws


def test_distance_basics():
    assert distance_3d((1, 2, 3), (1, 2, 3)) == 0.0
    assert distance_3d((0, 0, 25), (0, 0, 1.5)) == 23.5
    # donor at a block corner to the far grid corner, hand computed
    a, b = (157.0, 182.4, 25.0), (434.0, 434.0, 1.5)
    assert distance_3d(a, b) == pytest.approx(math.sqrt(277.0 ** 2 + 251.6 ** 2 + 23.5 ** 2), rel=1e-12)


@given(ox=st.floats(-10, 10), oy=st.floats(-3, 3), angle=st.sampled_from([0, 90, 180, 270]))
def test_rotate_offset_preserves_length(ox, oy, angle):
    h = np.array([math.cos(math.radians(angle)), math.sin(math.radians(angle))])
    v = rotate_offset((ox, oy, 1.0), h)
    assert math.hypot(v[0], v[1]) == pytest.approx(math.hypot(ox, oy), abs=1e-9)


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 40))
def test_mobiles_stay_on_their_networks(seed, steps):
    """Buses stay on lanes and pedestrians on sidewalks or crosswalks, inside the grid."""
    cfg = ScenarioConfig(ScenarioKind.MIAB, 0.5, 3072, seed=seed)
    rng = np.random.default_rng(seed)
    scn = build_scenario(cfg, rng)
    for _ in range(steps):
        step_mobility(scn.layout, scn.mobile, 0.5, rng)
        for w in scn.mobile.buses:
            x, y, _ = w.position()
            assert LAYOUT.in_bounds(x, y)
            assert LAYOUT.in_street(x) or LAYOUT.in_street(y)
        for w in scn.mobile.pedestrians:
            x, y, _ = w.position()
            assert LAYOUT.in_bounds(x, y)
            assert LAYOUT.on_sidewalk(x, y) or LAYOUT.in_crossing_cell(x, y)


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1), dt=st.floats(0.01, 2.0))
def test_speed_is_respected(seed, dt):
    rng = np.random.default_rng(seed)
    w = bus_walker(LAYOUT, rng, 40 / 3.6)
    before = w.position()
    w.advance(w.speed_mps * dt, rng)
    # path length equals speed x dt; straight-line distance cannot exceed it
    assert distance_3d(before, w.position()) <= w.speed_mps * dt + 1e-9
