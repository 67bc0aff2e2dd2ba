from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kmono.counterexample import (
    Method,
    bareiss_det,
    blowup_scan,
    build_D,
    closed_form_deltas,
    conjecture1_sup,
    cross_check,
    deltas,
    e5_at_zero,
    mp_det,
    rational_det,
)
from kmono.spline_core import HermiteOperator, perfect_spline, truncated_power_poly


def closed_delta1(t):
    return t**12 * (1 - 2 * t) ** 6 * (4 - 32 * t + 189 * t**2 - 312 * t**3 + 159 * t**4) / 360


def closed_delta2(t):
    return 4 * t**13 * (1 - 2 * t) ** 6 * (1 - t) * (7 - 5 * t)


def rel(a, b):
    return abs(a - b) / abs(b)


# --- the matrix ---------------------------------------------------------------

def test_D_printed_entries():
    t1, t2 = Fraction(1, 7), Fraction(3, 5)
    D = build_D(t1, t2)
    assert len(D) == 7 and all(len(r) == 6 for r in D)
    assert D[0][0] == t1**2
    assert D[0][1] == 2 * t1
    assert D[5][0] == 0 and D[5][1] == 0
    assert D[5][4] == (1 - t2) ** 5
    assert D[6][0] == t1**6 / 720


def test_D_rejects_bad_order():
    with pytest.raises(ValueError):
        build_D(0.5, 0.4)
    with pytest.raises(ValueError):
        deltas(0.2, 1.0)


def test_D_columns_are_interpolation_functionals():
    # every row is a function sampled as value/slope at tau1, tau2 and 1; the last
    # row is the perfect spline, whose samples must match spline_core
    t1, t2 = 0.25, 0.5
    D = build_D(t1, t2)
    S = perfect_spline(3, [t1, t2])
    pts = [t1, t2, 1.0]
    expect = [v for p in pts for v in (S(p), S(p, 1))]
    assert [float(x) for x in D[6]] == pytest.approx(expect, rel=1e-12)


# --- determinants -------------------------------------------------------------

def test_bareiss_and_float_paths_agree():
    rows = [[Fraction(2), Fraction(1), Fraction(3)], [Fraction(0), Fraction(4), Fraction(1)],
            [Fraction(5), Fraction(2), Fraction(7)]]
    exact = rational_det(rows)
    assert exact == bareiss_det(rows) == Fraction(-3)
    with mpmath.workprec(128):
        assert float(mp_det([[mpmath.mpf(float(x)) for x in r] for r in rows])) == pytest.approx(-3.0, rel=1e-30)


@pytest.mark.parametrize("t1", [0.1, 0.25])
def test_deltas_match_closed_forms(t1):
    dp = deltas(t1, 2 * t1)
    assert dp.exact
    t = Fraction(t1)
    assert dp.delta1 == closed_delta1(t)
    assert dp.delta2 == closed_delta2(t)
    assert rel(float(dp.delta1), float(closed_delta1(t))) <= 1e-10


def test_deltas_mp_path():
    a, b = mpmath.mpf(1) / 10, mpmath.mpf(1) / 5
    dp = deltas(a, b)
    assert not dp.exact
    with mpmath.workprec(128):
        assert rel(dp.delta1, closed_delta1(a)) <= 1e-30
        assert rel(dp.delta2, closed_delta2(a)) <= 1e-30


def test_closed_form_limits():
    t = Fraction(1, 10**9)
    cf = closed_form_deltas(t)
    assert float(cf.delta1 / t**12) == pytest.approx(1 / 90, rel=1e-7)
    assert float(cf.delta2 / t**13) == pytest.approx(28, rel=1e-7)


def test_closed_form_matches_deltas():
    cf = closed_form_deltas(0.1)
    dp = deltas(0.1, 0.2)
    assert rel(float(cf.delta1), float(dp.delta1)) <= 1e-10
    assert rel(float(cf.delta2), float(dp.delta2)) <= 1e-10


def test_closed_form_domain():
    with pytest.raises(ValueError):
        closed_form_deltas(0.5)
    with pytest.raises(ValueError):
        closed_form_deltas(0.0)


def test_delta2_nonzero():
    assert not deltas(0.3, 0.7).degenerate


@settings(max_examples=50)
@given(num=st.integers(1, 48), den=st.integers(49, 10_000))
def test_property_rational_identity(num, den):
    t = Fraction(num, den) if Fraction(num, den) < Fraction(49, 100) else Fraction(1, den)
    dp = deltas(t, 2 * t)
    cf = closed_form_deltas(t)
    assert dp.delta1 == cf.delta1
    assert dp.delta2 == cf.delta2


# --- fifth derivative of the error at zero ------------------------------------

def test_asymptote_at_small_tau():
    row = e5_at_zero(Fraction(1, 1000), Fraction(2, 1000))
    assert 0.95 <= row.product_21tau1 <= 1.05


@pytest.mark.parametrize("t1", [0.01, 0.005, 0.001, 0.0001])
def test_asymptote_bracket(t1):
    row = e5_at_zero(t1, 2 * t1)
    assert 1 - 10 * t1 <= row.product_21tau1 <= 1 + 10 * t1


def test_determinant_equals_closed_form():
    a = e5_at_zero(0.25, 0.5, Method.DETERMINANT).e5_at_zero
    b = e5_at_zero(0.25, 0.5, Method.CLOSED_FORM).e5_at_zero
    assert rel(a, b) <= 1e-10


@pytest.mark.parametrize("t1,t2", [(0.2, 0.4), (0.2, 0.8), (0.35, 0.6), (0.5, 0.8)])
def test_determinant_matches_spline(t1, t2):
    a = e5_at_zero(t1, t2, Method.DETERMINANT).e5_at_zero
    b = e5_at_zero(t1, t2, Method.SPLINE_NUMERIC).e5_at_zero
    assert rel(b, a) <= 1e-6


def test_closed_form_requires_double_link():
    with pytest.raises(ValueError):
        e5_at_zero(0.2, 0.5, Method.CLOSED_FORM)


def test_spline_numeric_is_a_coefficient():
    # compare against the fifth derivative of the assembled error polynomial
    t1, t2 = 0.3, 0.55
    S = perfect_spline(3, [t1, t2])
    H = HermiteOperator([0.0, t1, t2, 1.0], 3).apply(S)
    row = e5_at_zero(t1, t2, Method.SPLINE_NUMERIC)
    assert row.e5_at_zero == pytest.approx(H(0.0, 5) - S(0.0, 5), rel=1e-12)


def test_error_sixth_derivative_signs():
    t1, t2 = 0.2, 0.45
    S = perfect_spline(3, [t1, t2])
    H = HermiteOperator([0.0, t1, t2, 1.0], 3).apply(S)
    e6 = [H(t, 6) - S(t, 6) for t in (0.1, 0.3, 0.8)]
    assert e6 == [-1.0, 1.0, -1.0]


# --- scans --------------------------------------------------------------------

def test_scan_diverges():
    rows = blowup_scan([0.2, 0.1, 0.05, 0.025, 0.0125], methods=[Method.DETERMINANT])
    vals = [r.e5_at_zero for r in rows]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_scan_single_point_consistent():
    rows = blowup_scan([0.1])
    assert {r.method for r in rows} == set(Method)
    worst, ok = cross_check(rows, 1e-6)
    assert ok, worst


def test_scan_custom_link():
    rows = blowup_scan([0.3], link=lambda t: t + 0.3)
    assert all(np.isfinite(r.e5_at_zero) for r in rows)
    assert cross_check(rows, 1e-6)[1]


def test_scan_inadmissible_link():
    with pytest.raises(ValueError):
        blowup_scan([0.6])


def test_cross_check_flags_disagreement():
    rows = blowup_scan([0.1], methods=[Method.DETERMINANT])
    bad = [rows[0], type(rows[0])(0.1, 0.2, rows[0].e5_at_zero * 1.01, 0.0, Method.SPLINE_NUMERIC)]
    worst, ok = cross_check(bad, 1e-6)
    assert not ok and worst == pytest.approx(0.01, rel=1e-9)


# --- the envelope quantity ------------------------------------------------------

def test_conjecture1_sup_grows_with_coalescence():
    vals = [conjecture1_sup(1.5 * t, [0.0, t, 2 * t, 1.0], 3) for t in (0.1, 0.05, 0.025)]
    assert vals[0] < vals[1] < vals[2]


def test_conjecture1_sup_matches_grid():
    b = truncated_power_poly(0.5, 3, 0.0, 1.0)
    H = HermiteOperator([0.0, 0.3, 0.6, 1.0], 3).apply(b)
    x = np.linspace(0, 1, 100_001)
    oracle = np.max(np.abs(b(x) - H(x)))
    assert conjecture1_sup(0.5, [0.0, 0.3, 0.6, 1.0], 3) == pytest.approx(oracle, rel=1e-8)


def test_conjecture1_sup_at_node():
    assert np.isfinite(conjecture1_sup(0.3, [0.0, 0.3, 0.6, 1.0], 3))
