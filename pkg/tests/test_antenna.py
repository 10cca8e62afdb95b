import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from miabsim.antenna import array_factor, array_gain_matrix, element_gain_db, element_positions
from miabsim.scenario import ArrayType, ElementPattern


def unit_dirs(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1), az=st.floats(0, 360),
       arr=st.sampled_from([ArrayType.URA_8X8, ArrayType.ULA_64, ArrayType.SINGLE]))
def test_closed_form_matches_brute_force(seed, az, arr):
    d = unit_dirs(np.random.default_rng(seed), 12)
    ref = array_factor(element_positions(arr, az), d, d)
    np.testing.assert_allclose(array_gain_matrix(arr, az, d), ref, rtol=1e-7, atol=1e-9)


@pytest.mark.parametrize("arr", [ArrayType.URA_8X8, ArrayType.ULA_64])
def test_boresight_gain(arr):
    d = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    g = array_gain_matrix(arr, 0.0, d)
    assert 10 * np.log10(g[0, 0]) == pytest.approx(10 * math.log10(64), abs=1e-6)
    assert 10 * np.log10(g[1, 1]) == pytest.approx(18.0618, abs=1e-4)


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1))
def test_matched_beam_is_best(seed):
    d = unit_dirs(np.random.default_rng(seed), 10)
    g = array_gain_matrix(ArrayType.URA_8X8, 30.0, d)
    assert np.all(g <= np.diag(g)[None, :] + 1e-9)
    assert np.all(g >= 0)


def test_element_pattern():
    fwd = np.array([[1.0, 0.0, 0.0]])
    back = np.array([[-1.0, 0.0, 0.0]])
    assert element_gain_db(fwd, 0.0, 0.0, ElementPattern.THREE_GPP_3D, 8.0)[0] == pytest.approx(8.0)
    assert element_gain_db(back, 0.0, 0.0, ElementPattern.THREE_GPP_3D, 8.0)[0] == pytest.approx(8.0 - 30.0)
    side = np.array([[math.cos(math.radians(32.5)), math.sin(math.radians(32.5)), 0.0]])
    assert element_gain_db(side, 0.0, 0.0, ElementPattern.THREE_GPP_3D, 8.0)[0] == pytest.approx(5.0)
    assert element_gain_db(back, 0.0, 0.0, ElementPattern.OMNI, 0.0)[0] == 0.0
