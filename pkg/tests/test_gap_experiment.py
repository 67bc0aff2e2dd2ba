from math import exp, factorial

import numpy as np
import pytest

from kmono.densities import CustomDensity, Exponential, parse_density
from kmono.gap_experiment import (
    GapTrialResult,
    _remainder_values,
    _signed_measure_integral,
    estimate_rate,
    inequality_audit,
    knot_count,
    largest_interval_midpoint,
    limit_constants,
    resolve_workers,
    run_trial,
    run_trials,
    select_window,
    simulate_Yk,
    stochastic_variance,
    summarize,
    trial_rng,
)
from kmono.lse import SampleSet, fit_lse
from oracles import grenander_slopes


# --- window selection -----------------------------------------------------------

def test_knot_count():
    assert [knot_count(k) for k in (1, 2, 3, 4)] == [2, 2, 4, 6]


def test_window_brackets_x0():
    knots = np.array([0.1, 0.4, 0.9, 1.3, 2.0, 3.5])
    assert select_window(knots, 1.0, 4).tolist() == [0.4, 0.9, 1.3, 2.0]
    assert select_window(knots, 1.0, 2).tolist() == [0.9, 1.3]


def test_window_outside_range():
    knots = np.array([0.1, 0.4, 0.9, 1.3])
    assert select_window(knots, 10.0, 2).tolist() == [0.9, 1.3]
    assert select_window(knots, 0.01, 2).tolist() == [0.1, 0.4]
    assert select_window(knots[:1], 1.0, 2).tolist() == [0.1]


def test_largest_interval_leftmost_tie():
    assert largest_interval_midpoint([0.0, 1.0, 2.0, 2.5]) == 0.5


def test_trial_rng_independent_of_order():
    a = trial_rng(3, 2, 100, 7).standard_normal(4)
    trial_rng(3, 2, 100, 6).standard_normal(10)
    b = trial_rng(3, 2, 100, 7).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, trial_rng(3, 2, 100, 8).standard_normal(4))


# --- trials ----------------------------------------------------------------------

def test_k1_trial_gap_is_grenander_jump_pair():
    res = run_trial(1000, 1, x0=1.0, seed=4)
    assert not res.failed and not res.degenerate
    assert res.gap > 0
    lo, hi = res.knots_near_x0
    assert lo <= 1.0 < hi
    # independent check: the hull vertices of the empirical c.d.f. bracketing x0
    x = trial_rng(4, 1, 1000, 0).exponential(1.0, 1000)
    px, slope = grenander_slopes(x)
    vertices = px[1:][np.diff(slope) != 0]
    i = np.searchsorted(vertices, 1.0, side="right")
    assert [lo, hi] == pytest.approx([vertices[i - 1], vertices[i]], abs=1e-12)


def test_trial_bit_reproducible():
    a = run_trial(300, 2, seed=9, trial=3)
    b = run_trial(300, 2, seed=9, trial=3)
    assert a.row() == b.row()
    assert np.array_equal(a.knots_near_x0, b.knots_near_x0)


def test_parallel_matches_serial(monkeypatch):
    monkeypatch.delenv("KMONO_WORKERS", raising=False)
    serial = run_trials(2, [100, 200], 3, seed=1, workers=1)
    parallel = run_trials(2, [100, 200], 3, seed=1, workers=2)
    assert [t.row() for t in serial] == [t.row() for t in parallel]


def test_worker_env_override(monkeypatch):
    monkeypatch.setenv("KMONO_WORKERS", "3")
    assert resolve_workers(8) == 3
    monkeypatch.delenv("KMONO_WORKERS")
    assert resolve_workers(5) == 5


def test_k3_large_n_statistic():
    res = run_trial(5000, 3, seed=2)
    assert not res.failed and not res.degenerate
    assert np.isfinite(res.noncoalescence_stat) and res.noncoalescence_stat > 0
    assert np.all(np.diff(res.knots_near_x0) > 0)


def test_degenerate_small_sample():
    res = run_trial(1, 3, seed=0)
    assert res.degenerate and not res.failed


def test_trial_validation():
    with pytest.raises(ValueError):
        run_trial(0, 2)
    with pytest.raises(ValueError):
        run_trial(10, 2, x0=-1.0)


def test_sign_condition_checked():
    flat = CustomDensity("flat-ish", lambda x, j: np.ones_like(np.asarray(x, float)) if j == 0 else 0 * np.asarray(x, float),
                         lambda x: x, lambda r, n: r.uniform(0, 1, n))
    with pytest.raises(ValueError):
        run_trial(10, 2, density=flat)


def test_csv_row_columns():
    res = run_trial(50, 2, seed=0)
    assert len(res.row()) == len(GapTrialResult.CSV_COLUMNS)


# --- rate estimation ---------------------------------------------------------------

def test_estimate_rate_validation():
    with pytest.raises(ValueError):
        estimate_rate(1, [100, 200], 20)
    with pytest.raises(ValueError):
        estimate_rate(1, [100, 200, 400], 10)
    with pytest.raises(ValueError):
        estimate_rate(1, [400, 200, 800], 20)


def _fake(n, gap, degenerate=False):
    return GapTrialResult(n, 1, 1.0, np.zeros(0), gap, gap, 1.0 / gap, 0, degenerate=degenerate)


def test_summarize_exact_power_law():
    trials = [_fake(n, 2.0 * n ** (-1 / 3) * (1 + 0.01 * t)) for n in (100, 1000, 10000) for t in range(5)]
    est = summarize(trials, 1, [100, 1000, 10000], 5, n_boot=300)
    assert est.slope == pytest.approx(-1 / 3, abs=1e-12)
    assert est.covers(-1 / 3)
    assert est.n_bootstrap == 300


def test_summarize_degenerate_warning():
    trials = [_fake(100, 0.5, degenerate=True)] * 3 + [_fake(100, 0.5)]
    trials += [_fake(n, 0.3) for n in (200, 400) for _ in range(4)]
    with pytest.warns(RuntimeWarning):
        est = summarize(trials, 1, [100, 200, 400], 4, n_boot=200)
    assert "degenerate" in est.warning
    assert est.degenerate_fraction[0] == 0.75


def test_rate_json_fields():
    trials = [_fake(n, n ** -0.2) for n in (10, 20, 40) for _ in range(3)]
    d = summarize(trials, 2, [10, 20, 40], 3, n_boot=200).to_dict()
    for key in ("k", "n_values", "median_gaps", "slope", "slope_ci", "trials_per_n"):
        assert key in d
    assert len(d["slope_ci"]) == 2


# --- inequality audit ------------------------------------------------------------------

@pytest.mark.parametrize("k,n,seed", [(2, 200, 0), (2, 1000, 1), (3, 500, 2), (3, 2000, 3)])
def test_audit_holds_on_fits(k, n, seed):
    res = run_trial(n, k, seed=seed, audit=True)
    a = res.audit
    assert a is not None and not a.skipped
    assert a.holds
    # the corrected expectation and remainder close the identity with the fit gap
    assert a.margin == pytest.approx(a.fit_gap, abs=1e-9)
    assert np.isfinite(a.envelope_max) and np.isfinite(a.literal_expectation)


def test_audit_explicit_tau():
    s = SampleSet.exponential(400, 1.0, seed=6)
    fit = fit_lse(s, 2)
    a = inequality_audit(fit, s, tau_bar=2.0)
    assert not a.skipped and a.holds


def test_audit_rejects_k1():
    s = SampleSet.exponential(20, 1.0, seed=6)
    with pytest.raises(ValueError):
        inequality_audit(fit_lse(s, 1), s, tau_bar=1.0)


def test_audit_skips_coalescent_knots():
    s = SampleSet.exponential(100, 1.0, seed=6)
    fit = fit_lse(s, 3)
    a = inequality_audit(fit, s, nodes=[0.5, 1.0, 1.0 + 1e-15, 2.0])
    assert a.skipped and a.reason


def test_expectation_vanishes_under_truth():
    f = lambda u: np.cos(np.atleast_1d(u))
    assert _signed_measure_integral(f, None, Exponential(1.0), 0.2, 1.7, [0.5]) == 0.0


def test_signed_measure_integral_of_indicator():
    x = np.array([0.1, 0.3, 0.9, 1.4, 2.5])
    lo, hi = 0.25, 1.5
    val = _signed_measure_integral(lambda u: np.ones_like(np.atleast_1d(u)), x, Exponential(1.0), lo, hi, [])
    assert val == pytest.approx(3 / 5 - (exp(-lo) - exp(-hi)), abs=1e-10)


def test_remainder_vanishes_for_constant_kth_derivative():
    k = 3
    const = CustomDensity("poly", lambda x, j: np.full_like(np.asarray(x, float), -2.0) if j == k else np.asarray(x, float) * 0,
                          lambda x: x)
    v, s = _remainder_values(np.array([0.2, 0.6, 1.1, 1.9]), k, 0.8, const)
    assert np.all(v == 0.0) and np.all(s == 0.0)


# --- limit constants --------------------------------------------------------------------

def test_limit_constants_exponential_k3():
    c = limit_constants(3, 1.0).c
    assert c[0] == pytest.approx((exp(-3) * exp(-1) / 6) ** (1 / 7), rel=1e-12)
    assert len(c) == 3 and all(v > 0 for v in c)


def test_limit_constants_k1():
    assert limit_constants(1, 1.0).c[0] == pytest.approx(exp(-2 / 3), rel=1e-12)


def test_limit_constants_normalized():
    k = 2
    dens = CustomDensity("norm", lambda x, j: 1.0 if j == 0 else (float(factorial(k)) * (-1) ** k if j == k else 0.0),
                         lambda x: x)
    assert limit_constants(k, 0.5, dens).c == pytest.approx((1.0, 1.0), rel=1e-14)


def test_limit_constants_sign_error():
    dens = CustomDensity("bad", lambda x, j: 1.0 if j == 0 else 1.0, lambda x: x)
    with pytest.raises(ValueError):
        limit_constants(1, 1.0, dens)


def test_parse_density():
    assert parse_density("exponential(2.5)").rate == 2.5
    assert parse_density("exp").rate == 1.0
    with pytest.raises(ValueError):
        parse_density("gamma")


# --- the drift process ---------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
def test_Yk_origin_and_drift(k):
    p = simulate_Yk(k, 2.0, 0.01, seed=3)
    mid = p.grid.size // 2
    assert p.grid[mid] == 0.0 and p.values[mid] == 0.0
    expect = (-1) ** k * factorial(k) * p.grid ** (2 * k) / factorial(2 * k)
    assert np.array_equal(p.drift, expect)


def test_Y1_is_brownian():
    p = simulate_Yk(1, 1.0, 0.01, seed=5)
    assert np.allclose(p.stochastic, p.W, atol=1e-14)


def test_Yk_reproducible():
    a = simulate_Yk(2, 1.0, 0.01, seed=8)
    b = simulate_Yk(2, 1.0, 0.01, seed=8)
    assert np.array_equal(a.values, b.values)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_Yk_stochastic_part_moments(k):
    seeds = 2000
    vals = np.array([simulate_Yk(k, 1.0, 0.02, seed=s).stochastic[[0, -1]] for s in range(seeds)])
    for col in range(2):
        se = vals[:, col].std() / np.sqrt(seeds)
        assert abs(vals[:, col].mean()) <= 3 * se
    assert np.var(vals[:, 1]) == pytest.approx(stochastic_variance(k, 1.0), rel=0.1)


def test_Yk_validation():
    with pytest.raises(ValueError):
        simulate_Yk(2, -1.0, 0.1)
    with pytest.raises(ValueError):
        simulate_Yk(0, 1.0, 0.1)
