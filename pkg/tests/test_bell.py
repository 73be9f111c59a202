import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spin1bell.analyzer import joint_probabilities
from spin1bell.bell import (
    OUTCOME_VALUES,
    BellSettings,
    chsh,
    chsh_signed,
    correlation,
    expectation,
    lhv_max,
    lhv_strategy_values,
    pairs_model_chsh,
    pairs_model_probabilities,
    pairs_model_probabilities_statevector,
    spin_half_baseline,
)
from spin1bell.qstate import make_noisy_state, make_spin1_singlet

SINGLET = make_spin1_singlet()


def e_closed(theta):
    return 1 / 3 + (2 / 3) * np.cos(4 * np.radians(theta))


def s_equal_spacing(dphi):
    d = np.radians(dphi)
    return 2 / 3 + 2 * np.cos(4 * d) - (2 / 3) * np.cos(12 * d)


def test_outcome_values():
    assert OUTCOME_VALUES == {1: 1, 0: -1, -1: 1}


@pytest.mark.parametrize(
    "theta, expected",
    [(0.0, 1.0), (11.25, 1 / 3 + (2 / 3) * np.cos(np.pi / 4)), (45.0, -1 / 3)],
)
def test_expectation_examples(theta, expected):
    assert expectation(joint_probabilities(SINGLET, theta, 0)) == pytest.approx(expected, abs=1e-12)


def test_expectation_signs_follow_the_nine_terms():
    # each basis grid picks out one signed term
    signs = {(1, 1): 1, (1, 0): -1, (1, -1): 1, (0, 1): -1, (0, 0): 1, (0, -1): -1, (-1, 1): 1, (-1, 0): -1, (-1, -1): 1}
    for (a, b), sign in signs.items():
        grid = np.zeros((3, 3))
        grid[(1, 0, -1).index(a), (1, 0, -1).index(b)] = 1
        assert expectation(grid) == sign


def test_expectation_rejects_unnormalized():
    with pytest.raises(ValueError, match="normalized"):
        expectation(np.full((3, 3), 0.2))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=9, max_size=9).filter(lambda xs: sum(xs) > 1e-3))
def test_expectation_bounded(weights):
    grid = np.array(weights).reshape(3, 3) / sum(weights)
    assert -1 - 1e-12 <= expectation(grid) <= 1 + 1e-12


def test_chsh_pure_optimum():
    assert chsh(SINGLET, BellSettings(0, 22.5, 11.25, 33.75)) == pytest.approx(2.552, abs=1e-3)


def test_chsh_noisy_preset():
    s = chsh(make_noisy_state(0.69), BellSettings(-16, 4, -6, 14))
    assert s == pytest.approx(2.288, abs=1e-3)


def test_chsh_degenerate_settings():
    assert chsh(SINGLET, BellSettings(7, 7, 7, 7)) == pytest.approx(2.0, abs=1e-12)
    state = make_noisy_state(0.4)
    assert chsh(state, BellSettings(20, 20, 20, 20)) == pytest.approx(2 * correlation(state, 20, 20), abs=1e-12)


def test_chsh_signed_is_exposed():
    s = BellSettings(0, 22.5, 11.25, 33.75)
    assert abs(chsh_signed(SINGLET, s)) == chsh(SINGLET, s)


@settings(max_examples=30, deadline=None)
@given(*[st.floats(-90, 90)] * 4)
def test_chsh_pure_matches_closed_form_correlations(a, ap, b, bp):
    expected = abs(e_closed(a - b) - e_closed(a - bp) + e_closed(ap - b) + e_closed(ap - bp))
    assert chsh(SINGLET, BellSettings(a, ap, b, bp)) == pytest.approx(expected, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(*[st.floats(-90, 90)] * 5)
def test_chsh_pure_shift_invariant(a, ap, b, bp, delta):
    s = BellSettings(a, ap, b, bp)
    assert abs(chsh(SINGLET, s) - chsh(SINGLET, s.shifted(delta))) < 1e-10


def test_chsh_noisy_breaks_shift_symmetry():
    s = BellSettings(-16, 4, -6, 14)
    state = make_noisy_state(0.69)
    assert abs(chsh(state, s) - chsh(state, s.shifted(20))) > 1e-3


def test_equal_spacing_closed_form():
    for d in np.arange(0, 45.0001, 0.5):
        s = BellSettings(-1.5 * d, 0.5 * d, -0.5 * d, 1.5 * d)
        assert chsh(SINGLET, s) == pytest.approx(abs(s_equal_spacing(d)), abs=1e-10)


def test_lhv_max_is_two():
    assert lhv_max() == 2
    assert isinstance(lhv_max(), int)


def test_lhv_enumeration_covers_all_strategies():
    values = lhv_strategy_values()
    assert len(values) == 81
    assert {abs(v) for v in values.values()} == {2}
    assert values[(0, 0, 0, 0)] == 2


def test_lhv_matches_sign_strategies():
    # oracle: the bound over +/-1 assignments, the textbook CHSH enumeration
    sign_max = max(
        abs(a * b - a * bp + ap * b + ap * bp) for a, ap, b, bp in itertools.product((1, -1), repeat=4)
    )
    assert lhv_max() == sign_max == 2


@pytest.mark.parametrize("theta", [0.0, 7.0, 22.5, 30.0, 45.0, 61.0, -33.0])
def test_pairs_model_correlation(theta):
    grid = pairs_model_probabilities(theta, 0)
    assert grid.sum() == pytest.approx(1, abs=1e-12)
    assert expectation(grid) == pytest.approx(np.cos(2 * np.radians(theta)) ** 2, abs=1e-10)
    assert np.allclose(grid, pairs_model_probabilities_statevector(theta + 10, 10), atol=1e-12)


def test_pairs_model_examples():
    assert expectation(pairs_model_probabilities(5, 5)) == pytest.approx(1, abs=1e-12)
    assert expectation(pairs_model_probabilities(22.5, 0)) == pytest.approx(0.5, abs=1e-12)
    assert expectation(pairs_model_probabilities(45, 0)) == pytest.approx(0, abs=1e-12)


def test_pairs_model_is_not_the_singlet():
    # distinguishable pairs give cos^2(2 theta); the post-selected singlet gives 1/3 + 2/3 cos(4 theta)
    theta = 20.0
    assert expectation(pairs_model_probabilities(theta, 0)) != pytest.approx(e_closed(theta), abs=1e-3)


def test_pairs_model_equal_spacing_maximum():
    # E = cos^2(2 theta) = (1 + cos 4 theta)/2, so equal spacing gives S = 1 + (3 cos 4d - cos 12d)/2,
    # maximized at d = 11.25 with S = 1 + sqrt(2)
    best = max(pairs_model_chsh(BellSettings(-1.5 * d, 0.5 * d, -0.5 * d, 1.5 * d)) for d in np.arange(0, 45, 0.25))
    assert best == pytest.approx(1 + np.sqrt(2), abs=1e-10)


@pytest.mark.parametrize(
    "theta, expected", [(0, -1.0), (45, 0.0), (22.5, -np.sqrt(2) / 2)]
)
def test_spin_half_baseline(theta, expected):
    assert spin_half_baseline(theta) == pytest.approx(expected, abs=1e-15)


def test_bell_settings_reject_nonfinite():
    with pytest.raises(ValueError):
        BellSettings(0, np.nan, 0, 0)
