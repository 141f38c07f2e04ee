import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentiscore.hypertune import (JITTER, LEDGER_HEADER, HyperConfig, SearchSpace, Surrogate, _fit_one,
                                  expected_improvement, gp_fit, gp_predict, halton, optimize, propose_next,
                                  read_ledger, sq_exp_kernel, tune_space)
from sentiscore.rng import Xoshiro256pp

SPACE = SearchSpace()


def quadratic(x):
    return float((x[0] - 0.3) ** 2 + (x[1] - 0.7) ** 2)


# -- search space ----------------------------------------------------------

def test_normalize_examples():
    assert SPACE.normalize_point(HyperConfig(1e-3, 80, 0.4)) == pytest.approx([0.5, 0.5, 0.5])
    assert SPACE.normalize_point(HyperConfig(1e-4, 32, 0.2)).tolist() == [0.0, 0.0, 0.0]
    assert SPACE.normalize_point(HyperConfig(1e-2, 128, 0.6)) == pytest.approx([1.0, 1.0, 1.0])


def test_round_trip_fixture_is_identical():
    cfg = HyperConfig(0.005358, 52, 0.4)
    assert SPACE.denormalize_point(SPACE.normalize_point(cfg)) == cfg


@given(st.floats(1e-4, 1e-2), st.integers(32, 128), st.floats(0.2, 0.6))
def test_round_trip_property(lr, units, p):
    back = SPACE.denormalize_point(SPACE.normalize_point(HyperConfig(lr, units, p)))
    assert back.lstm_units == units
    assert math.isclose(back.learning_rate, lr, rel_tol=1e-11)
    assert math.isclose(back.dropout_rate, p, rel_tol=1e-11)


def test_out_of_bounds():
    with pytest.raises(ValueError):
        SPACE.normalize_point(HyperConfig(0.005358, 52, 0.007038))
    with pytest.raises(ValueError):
        SPACE.normalize_point(HyperConfig(0.1, 52, 0.4))
    with pytest.raises(ValueError):
        SPACE.denormalize_point([0.5, 1.2, 0.5])


# -- GP --------------------------------------------------------------------

def test_duplicate_rows_rejected():
    with pytest.raises(ValueError):
        gp_fit(np.array([[0.1, 0.2], [0.1, 0.2]]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        gp_fit(np.array([[0.1, 0.2]]), np.array([1.0]))


def _direct_mean(s, x):
    # textbook posterior mean with an explicit inverse, same kernel and jitter
    K = sq_exp_kernel(s.X, s.X, s.lengths, s.signal) + s.jitter * np.eye(len(s.X))
    k = sq_exp_kernel(np.atleast_2d(x), s.X, s.lengths, s.signal)
    ys = (s.y - s.y_mean) / s.y_scale
    return s.y_mean + s.y_scale * (k @ np.linalg.inv(K) @ ys)


@pytest.mark.parametrize("X,y", [
    ([[0.2, 0.3], [0.8, 0.6]], [0.5, 1.5]),
    ([[0.1, 0.1, 0.1], [0.9, 0.2, 0.5], [0.4, 0.8, 0.3], [0.6, 0.5, 0.9], [0.2, 0.6, 0.7]],
     [0.31, 0.22, 0.45, 0.18, 0.27]),
])
def test_interpolates_observed_points(X, y):
    s = gp_fit(np.array(X), np.array(y))
    mean, var = gp_predict(s, np.array(X))
    tol = 10 * s.jitter * s.signal * s.y_scale
    assert np.max(np.abs(mean - np.array(y))) <= tol
    assert np.all(var <= 10 * s.jitter * s.signal * s.y_scale ** 2)
    assert mean == pytest.approx(_direct_mean(s, np.array(X)), abs=1e-9)


def test_dense_design_residual_is_the_jitter_term():
    # with many nearby points the residual is governed by conditioning, but it is
    # always exactly -jitter * alpha_i in standardized units
    rng = Xoshiro256pp(3)
    X = rng.uniform_array(40).reshape(20, 2)
    y = np.array([quadratic(x) for x in X])
    s = gp_fit(X, y)
    mean, _ = gp_predict(s, X)
    assert mean - y == pytest.approx(-s.jitter * s.alpha * s.y_scale, abs=1e-9)


def test_constant_targets():
    X = np.array([[0.1, 0.5], [0.7, 0.2], [0.4, 0.9]])
    s = gp_fit(X, np.full(3, 0.25))
    assert s.y_scale == 1.0
    mean, _ = gp_predict(s, Xoshiro256pp(1).uniform_array(20).reshape(10, 2))
    assert mean == pytest.approx(0.25, abs=1e-12)


def test_prior_reversion_far_away():
    s = gp_fit(np.array([[0.0, 0.0], [0.05, 0.02]]), np.array([1.0, 3.0]))
    mean, var = gp_predict(s, np.array([50.0, 50.0]))
    assert mean == pytest.approx(s.y_mean)
    assert var == pytest.approx(s.signal * s.y_scale ** 2)


def test_single_point_closed_form():
    lengths, sig = np.array([0.2, 0.5]), 2.0
    X = np.array([[0.3, 0.3]])
    L, alpha, lml = _fit_one(X, np.array([1.5]), lengths, sig, JITTER)
    s = Surrogate(X, np.array([1.5]), 0.0, 1.0, lengths, sig, JITTER, L, alpha, lml)
    x = np.array([0.3 + 0.2, 0.3])  # one length scale away along the first axis
    mean, var = gp_predict(s, x)
    k = sig * math.exp(-0.5)
    assert mean == pytest.approx(k * 1.5 / (sig + JITTER), abs=1e-12)
    assert var == pytest.approx(sig - k * k / (sig + JITTER), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 8))
def test_variance_non_negative(seed, n):
    rng = Xoshiro256pp(seed)
    X = rng.uniform_array(2 * n).reshape(n, 2)
    s = gp_fit(X, rng.uniform_array(n))
    _, var = gp_predict(s, rng.uniform_array(200).reshape(100, 2))
    assert np.all(var >= 0)


# -- acquisition -----------------------------------------------------------

def test_ei_fixtures():
    assert expected_improvement(1.0, 1.0, 1.0) == pytest.approx(0.3989423, abs=1e-6)
    assert expected_improvement(2.0, 0.0, 1.0) == 0.0
    assert expected_improvement(0.5, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert expected_improvement(1.0, 4.0, 1.0) == pytest.approx(2 * 0.3989422804014327, abs=1e-12)
    with pytest.raises(ValueError):
        expected_improvement(0.0, -1.0, 0.0)


@given(st.floats(-10, 10), st.floats(0, 10), st.floats(-10, 10))
def test_ei_non_negative(mean, var, best):
    ei = expected_improvement(mean, var, best)
    assert ei >= 0
    if var == 0 and mean >= best:
        assert ei == 0


def _flat_surrogate():
    # noise-free fit to a constant: variance 0 at the data, no improvement anywhere nearby
    X = np.array([[0.2, 0.2], [0.8, 0.8]])
    return gp_fit(X, np.array([1.0, 1.0]))


def test_propose_ties_with_zero_ei():
    s = _flat_surrogate()
    # force the zero-EI regime: mean above best and zero variance via a huge best gap
    s.y = np.array([-1e9, -1e9])
    cands = np.array([[0.3, 0.3], [0.6, 0.1], [0.9, 0.9]])
    mean, var = gp_predict(s, cands)
    assert np.all(expected_improvement(mean, var, s.best) == 0.0)
    assert propose_next(s, Xoshiro256pp(0), cands).tolist() == [0.3, 0.3]


def test_propose_planted_peak():
    X = np.array([[0.0, 0.0], [0.05, 0.0], [0.0, 0.05], [0.05, 0.05]])
    s = gp_fit(X, np.array([1.0, 1.1, 0.9, 1.0]))
    cands = np.vstack([X + 0.01, [[0.95, 0.95]]])
    got = propose_next(s, Xoshiro256pp(0), cands)
    assert got.tolist() == [0.95, 0.95]


def test_propose_deterministic():
    X = Xoshiro256pp(9).uniform_array(10).reshape(5, 2)
    s = gp_fit(X, np.array([quadratic(x) for x in X]))
    a = propose_next(s, Xoshiro256pp(5))
    b = propose_next(s, Xoshiro256pp(5))
    assert a.tolist() == b.tolist()
    assert np.all((a >= 0) & (a <= 1))


def test_halton_prefix():
    h = halton(4, 2)
    assert h[:, 0].tolist() == [0.5, 0.25, 0.75, 0.125]
    assert h[:, 1] == pytest.approx([1 / 3, 2 / 3, 1 / 9, 4 / 9])


# -- loop ------------------------------------------------------------------

def test_pure_random_search_ledger(tmp_path):
    path = tmp_path / "trials.csv"
    res = optimize(quadratic, 2, n_random=6, n_bayes=0, seed=1, ledger_path=path)
    assert len(res.trials) == 6
    assert {t.phase for t in res.trials} == {"random"}
    rows = read_ledger(path)
    assert len(rows) == 6
    assert path.read_text().splitlines()[0] == ",".join(LEDGER_HEADER)


def test_best_so_far_monotone_and_best_is_min():
    res = optimize(quadratic, 2, n_random=4, n_bayes=6, seed=3)
    bsf = res.best_so_far()
    assert all(b <= a for a, b in zip(bsf, bsf[1:]))
    assert res.best.value == min(t.value for t in res.trials) == bsf[-1]
    assert [t.phase for t in res.trials] == ["random"] * 4 + ["bayes"] * 6


def test_failed_trials_get_penalty():
    calls = []

    def objective(x):
        calls.append(x)
        return math.nan if len(calls) in (1, 3) else quadratic(x)

    res = optimize(objective, 2, n_random=4, n_bayes=2, seed=0)
    t = res.trials
    assert t[0].failed and t[0].value == 1.0
    assert t[2].failed and t[2].value == pytest.approx(2 * t[1].value)
    assert not res.best.failed
    assert len(t) == 6


def test_optimize_deterministic():
    a = optimize(quadratic, 2, n_random=3, n_bayes=4, seed=11)
    b = optimize(quadratic, 2, n_random=3, n_bayes=4, seed=11)
    assert [t.point.tolist() for t in a.trials] == [t.point.tolist() for t in b.trials]


def test_optimize_preconditions():
    with pytest.raises(ValueError):
        optimize(quadratic, 2, n_random=1)


def test_tune_space_configs_in_bounds(tmp_path):
    seen = []

    def objective(cfg):
        seen.append(cfg)
        return abs(math.log10(cfg.learning_rate) + 2.3) + abs(cfg.dropout_rate - 0.3)

    res = tune_space(objective, n_random=3, n_bayes=2, seed=4, ledger_path=tmp_path / "t.csv")
    assert all(SPACE.contains(c) for c in seen)
    assert res.best.config in seen
    rows = read_ledger(tmp_path / "t.csv")
    assert int(rows[0]["lstm_units"]) == seen[0].lstm_units
