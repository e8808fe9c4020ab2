"""Stopping rules: trailing runs, exact hypergeometric tail, rule dispatch,
and replayed screening simulations."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from refscreen import store
from refscreen.rng import SplitMix64
from refscreen.stopping import (
    StoppingConfig, Trajectory, consecutive_stop, evaluate, hypergeom_cdf,
    random_order, simulate_until_stop, statistical_stop,
    trailing_irrelevant_run, trajectory_from_project,
)

import oracles


def test_trailing_run():
    assert trailing_irrelevant_run([]) == 0
    assert trailing_irrelevant_run([True]) == 0
    assert trailing_irrelevant_run([False, False]) == 2
    assert trailing_irrelevant_run([False, True, False, False, False]) == 3


def test_consecutive_rule():
    labels = [True] + [False] * 49
    assert not consecutive_stop(labels, 50)
    assert consecutive_stop(labels + [False], 50)
    assert consecutive_stop([False], 1)
    with pytest.raises(ValueError):
        consecutive_stop(labels, 0)


# -- hypergeometric tail -------------------------------------------------------


def test_hypergeom_known_value():
    # drawing 40 from 500 holding 1 success: P(miss) = 460/500 reduced
    p = hypergeom_cdf(0, population=500, successes=1, draws=40)
    assert p == pytest.approx(float(Fraction(500 - 40, 500)), abs=1e-12)


def test_hypergeom_support_edges():
    assert hypergeom_cdf(5, 20, 5, 10) == 1.0          # k at max successes
    assert hypergeom_cdf(-1, 20, 5, 10) == 0.0
    assert hypergeom_cdf(0, 10, 0, 3) == 1.0           # zero successes
    assert hypergeom_cdf(0, 10, 10, 3) == 0.0          # all successes, k below min
    with pytest.raises(ValueError):
        hypergeom_cdf(0, 10, 11, 3)
    with pytest.raises(ValueError):
        hypergeom_cdf(0, 10, 3, 11)
    with pytest.raises(ValueError):
        hypergeom_cdf(0, -1, 0, 0)


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_hypergeom_matches_exact_rationals(data):
    population = data.draw(st.integers(min_value=0, max_value=120))
    successes = data.draw(st.integers(min_value=0, max_value=population))
    draws = data.draw(st.integers(min_value=0, max_value=population))
    k = data.draw(st.integers(min_value=0, max_value=draws))
    fast = hypergeom_cdf(k, population, successes, draws)
    exact = oracles.hypergeom_cdf_exact(k, population, successes, draws)
    assert fast == pytest.approx(float(exact), abs=1e-12)


def test_cdf_is_monotone_in_k():
    values = [hypergeom_cdf(k, 60, 25, 30) for k in range(26)]
    assert values == sorted(values)
    assert values[-1] == pytest.approx(1.0, abs=1e-12)


# -- statistical rule ------------------------------------------------------------


def test_statistical_worked_example_exact():
    """20 relevant found by record 420 of 500, then 40 straight irrelevant.
    Null hypothesizes floor(20/0.95)+1 = 22 total, so 2 hide in the pool of
    80 unscreened-or-windowed records: p = C(78,40)/C(80,40) = 39/158."""
    labels = [True] * 19 + [False] * 400 + [True] + [False] * 40
    trajectory = Trajectory(labels=labels, total_records=500)
    stop, p = statistical_stop(trajectory, target_recall=0.95, confidence=0.95)
    exact = oracles.hypergeom_cdf_exact(0, 500 - (460 - 40), 2, 40)
    assert exact == Fraction(40 * 39, 80 * 79) == Fraction(39, 158)
    assert p == pytest.approx(float(exact), abs=1e-12)
    assert not stop


def test_statistical_example_from_smaller_pool():
    # r=9, screened 495 of 500, trailing run 95... construct directly:
    labels = [True] * 9 + [False] * 95
    trajectory = Trajectory(labels=labels, total_records=500)
    stop, p = statistical_stop(trajectory, 0.95, 0.95)
    # R0 = floor(9/0.95)+1 = 10, K = 1, pool = 500-9 = 491, window 95
    exact = oracles.hypergeom_cdf_exact(0, 491, 1, 95)
    assert exact == Fraction(491 - 95, 491)
    assert p == pytest.approx(float(exact), abs=1e-12)
    assert not stop   # 0.806 is nowhere near < 0.05


def test_statistical_no_relevant_yet_never_stops():
    trajectory = Trajectory(labels=[False] * 200, total_records=400)
    stop, p = statistical_stop(trajectory, 0.95, 0.95)
    assert (stop, p) == (False, 1.0)


def test_statistical_zero_window_never_stops():
    trajectory = Trajectory(labels=[False, True], total_records=10)
    stop, p = statistical_stop(trajectory, 0.95, 0.95)
    assert (stop, p) == (False, 1.0)


def test_statistical_impossible_null_stops_with_p_zero():
    # window so large the hypothesized missing record cannot be outside it
    labels = [True] * 19 + [False] * 481
    trajectory = Trajectory(labels=labels, total_records=500)
    stop, p = statistical_stop(trajectory, 0.95, 0.95)
    assert stop
    assert p == 0.0


def test_statistical_fires_on_long_run():
    labels = [True] * 50 + [False] * 900
    trajectory = Trajectory(labels=labels, total_records=1000)
    stop, p = statistical_stop(trajectory, 0.95, 0.95)
    exact = oracles.hypergeom_cdf_exact(0, 1000 - 50, 3, 900)
    assert p == pytest.approx(float(exact), abs=1e-12)
    assert p < 0.05
    assert stop


def test_evaluate_dispatch():
    labels = [True] + [False] * 60
    trajectory = Trajectory(labels=labels, total_records=800)
    consecutive = evaluate(trajectory, StoppingConfig(rule="consecutive",
                                                      n_consecutive=50))
    statistical = evaluate(trajectory, StoppingConfig(rule="statistical"))
    assert consecutive[0] is True
    assert consecutive[1] == statistical[1]   # p reported either way
    with pytest.raises(ValueError):
        evaluate(trajectory, StoppingConfig(rule="other"))


# -- simulation -------------------------------------------------------------------


def test_simulate_consecutive_by_hand():
    # relevant at 0 and 5; rule n=3 fires after positions 1,2,3 -> screened 4
    hidden = [True, False, False, False, False, True]
    config = StoppingConfig(rule="consecutive", n_consecutive=3)
    recall, screened = simulate_until_stop(hidden, list(range(6)), config)
    assert screened == 4
    assert recall == 0.5


def test_simulate_exhausts_without_stop():
    hidden = [True, False, True, False]
    config = StoppingConfig(rule="consecutive", n_consecutive=10)
    recall, screened = simulate_until_stop(hidden, list(range(4)), config)
    assert (recall, screened) == (1.0, 4)


def test_simulate_validates_order():
    with pytest.raises(ValueError):
        simulate_until_stop([True, False], [0, 0], StoppingConfig())


def test_simulate_statistical_agrees_with_stepwise_evaluate():
    """The O(1) in-loop check must fire at exactly the same step as the
    full hypergeometric evaluation applied after every decision."""
    truth = _toy_truth(180, 12, seed=31)
    order = random_order(180, seed=99)
    config = StoppingConfig(rule="statistical", target_recall=0.9,
                            confidence=0.9)
    recall, screened = simulate_until_stop(truth, order, config)

    labels = []
    fired_at = None
    for step, idx in enumerate(order, start=1):
        labels.append(truth[idx])
        stop, _ = evaluate(Trajectory(labels=list(labels), total_records=180),
                           config)
        if stop:
            fired_at = step
            break
    assert fired_at == screened


def _toy_truth(n, relevant, seed):
    from refscreen.rng import shuffle
    flags = [True] * relevant + [False] * (n - relevant)
    shuffle(flags, SplitMix64(seed))
    return flags


def test_random_order_deterministic():
    assert random_order(50, seed=3) == random_order(50, seed=3)
    assert random_order(50, seed=3) != random_order(50, seed=4)


# -- trajectory projection ---------------------------------------------------------


def test_trajectory_from_project(seeded_project):
    p = seeded_project
    p.append_decision(store.Decision("", "000003", "alice@test", "maybe"))
    trajectory = trajectory_from_project(p)
    # include, exclude, maybe in decision order; maybe isn't an exclude
    assert trajectory.labels == [True, False, True]
    assert trajectory.total_records == 6


def test_trajectory_tracks_status_flips(seeded_project):
    p = seeded_project
    p.append_decision(store.Decision("", "000001", "alice@test", "exclude"))
    trajectory = trajectory_from_project(p)
    assert trajectory.labels == [False, False]
