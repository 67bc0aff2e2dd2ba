"""Blow-up of the k = 3 Hermite error for the perfect spline.

For ``E = H_3[S] - S`` with ``S`` the perfect spline on knots ``(tau1, tau2)``,
the fifth derivative at zero equals ``120 * delta1 / delta2`` where the deltas
are 6x6 minors of a 7x6 matrix ``D``.  Three routes compute it:

* ``determinant``: exact minors of ``D`` (rational Bareiss elimination, or
  128-bit mpmath LU for mpf inputs),
* ``closed_form``: the factored polynomials valid on the line ``tau2 = 2 tau1``,
* ``spline_numeric``: the leading coefficients of the interpolant itself.

Along ``tau2 = 2 tau1`` the value behaves like ``1 / (21 tau1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import mpmath
import numpy as np

from .spline_core import HermiteOperator, perfect_spline, truncated_power_poly, interp_error

MP_PRECISION = 128


class Method(str, enum.Enum):
    DETERMINANT = "determinant"
    CLOSED_FORM = "closed_form"
    SPLINE_NUMERIC = "spline_numeric"


def _exact(x):
    """Exact rational for ints, floats and Fractions; mpf passes through."""
    if isinstance(x, mpmath.mpf):
        return x
    if isinstance(x, (int, float, Fraction)):
        return Fraction(x)
    if isinstance(x, np.floating):
        return Fraction(float(x))
    raise TypeError(f"unsupported number type {type(x).__name__}")


def _check_order(tau1, tau2):
    if not (0 < tau1 < tau2 < 1):
        raise ValueError(f"need 0 < tau1 < tau2 < 1, got tau1={tau1}, tau2={tau2}")


def build_D(tau1, tau2):
    """The 7x6 matrix whose minors give ``delta1`` and ``delta2``.

    Rows follow the basis ``t^2, t^2(t-t1), t^2(t-t1)^2, t^2(t-t1)^2(t-t2),
    (t-t1)_+^5, (t-t2)_+^5, S(t)``; columns are value and slope at
    ``t1``, ``t2`` and ``1``.  Entries are exact ``Fraction`` objects unless
    an input is an ``mpmath.mpf``.
    """
    _check_order(tau1, tau2)
    with mpmath.workprec(MP_PRECISION):
        return _build_D(_exact(tau1), _exact(tau2))


def _build_D(a, b):
    if isinstance(a, mpmath.mpf) or isinstance(b, mpmath.mpf):
        a, b = mpmath.mpf(a), mpmath.mpf(b)
    one = a - a + 1
    p = 2 * b * (b - a) * (2 * b - a)
    q = (one - a) * (2 * (one - b) * (2 - a) + one - a)
    f6, f5 = 720, 120
    return [
        [a**2, 2 * a, b**2, 2 * b, one, 2 * one],
        [0 * one, a**2, b**2 * (b - a), b * (3 * b - 2 * a), one - a, 3 - 2 * a],
        [0 * one, 0 * one, b**2 * (b - a) ** 2, p, (one - a) ** 2, 2 * (one - a) * (2 - a)],
        [0 * one, 0 * one, 0 * one, b**2 * (b - a) ** 2, (one - a) ** 2 * (one - b), q],
        [0 * one, 0 * one, (b - a) ** 5, 5 * (b - a) ** 4, (one - a) ** 5, 5 * (one - a) ** 4],
        [0 * one, 0 * one, 0 * one, 0 * one, (one - b) ** 5, 5 * (one - b) ** 4],
        [
            a**6 / f6,
            a**5 / f5,
            (b**6 - 2 * (b - a) ** 6) / f6,
            (b**5 - 2 * (b - a) ** 5) / f5,
            (one - 2 * (one - a) ** 6 + 2 * (one - b) ** 6) / f6,
            (one - 2 * (one - a) ** 5 + 2 * (one - b) ** 5) / f5,
        ],
    ]


def bareiss_det(rows):
    """Exact determinant of a square integer matrix by fraction-free elimination."""
    m = [list(r) for r in rows]
    n = len(m)
    sign, prev = 1, 1
    for i in range(n - 1):
        if m[i][i] == 0:
            swap = next((r for r in range(i + 1, n) if m[r][i] != 0), None)
            if swap is None:
                return 0
            m[i], m[swap] = m[swap], m[i]
            sign = -sign
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                m[r][c] = (m[r][c] * m[i][i] - m[r][i] * m[i][c]) // prev
        prev = m[i][i]
    return sign * m[-1][-1]


def rational_det(rows):
    """Exact determinant of a square ``Fraction`` matrix.

    Each row is scaled to integers by the lcm of its denominators before
    fraction-free elimination.
    """
    scale = Fraction(1)
    int_rows = []
    for r in rows:
        den = 1
        for x in r:
            den = lcm(den, Fraction(x).denominator)
        int_rows.append([int(Fraction(x) * den) for x in r])
        scale *= den
    return Fraction(bareiss_det(int_rows)) / scale


def mp_det(rows, prec=MP_PRECISION):
    """Determinant by LU with scaled partial pivoting at ``prec`` bits."""
    with mpmath.workprec(prec):
        m = [[mpmath.mpf(x) for x in r] for r in rows]
        n = len(m)
        scales = [max(abs(x) for x in r) or mpmath.mpf(1) for r in m]
        det = mpmath.mpf(1)
        for i in range(n):
            piv = max(range(i, n), key=lambda r: abs(m[r][i]) / scales[r])
            if m[piv][i] == 0:
                return mpmath.mpf(0)
            if piv != i:
                m[i], m[piv] = m[piv], m[i]
                scales[i], scales[piv] = scales[piv], scales[i]
                det = -det
            det *= m[i][i]
            for r in range(i + 1, n):
                f = m[r][i] / m[i][i]
                for c in range(i + 1, n):
                    m[r][c] -= f * m[i][c]
        return det


@dataclass(frozen=True)
class DeltaPair:
    delta1: object
    delta2: object
    tau1: float
    tau2: float
    cond_estimate: float
    exact: bool

    @property
    def degenerate(self):
        return self.delta2 == 0

    @property
    def ratio(self):
        """``delta1 / delta2`` in the working arithmetic."""
        return self.delta1 / self.delta2


def _cond(rows):
    a = np.array([[float(x) for x in r] for r in rows])
    # column equilibration so the estimate reflects the minor, not its units
    norms = np.linalg.norm(a, axis=0)
    norms[norms == 0] = 1.0
    return float(np.linalg.cond(a / norms))


def deltas(tau1, tau2) -> DeltaPair:
    """``delta1`` (D without row 4) and ``delta2`` (D without row 7)."""
    D = build_D(tau1, tau2)
    m1 = D[:3] + D[4:]
    m2 = D[:6]
    exact = not any(isinstance(x, mpmath.mpf) for r in D for x in r)
    det = rational_det if exact else mp_det
    with mpmath.workprec(MP_PRECISION):
        d1, d2 = det(m1), det(m2)
    return DeltaPair(d1, d2, float(tau1), float(tau2), _cond(m2), exact)


def closed_form_deltas(tau1) -> DeltaPair:
    """Factored ``delta1``, ``delta2`` on the line ``tau2 = 2 tau1``."""
    if not (0 < tau1 < 0.5):
        raise ValueError(f"closed forms need 0 < tau1 < 1/2 (tau2 = 2 tau1 < 1), got {tau1}")
    t = _exact(tau1)
    if isinstance(t, mpmath.mpf):
        with mpmath.workprec(MP_PRECISION):
            return _closed(t, exact=False)
    return _closed(t, exact=True)


def _closed(t, exact):
    common = t**12 * (1 - 2 * t) ** 6
    d1 = common * (4 - 32 * t + 189 * t**2 - 312 * t**3 + 159 * t**4) / 360
    d2 = 4 * t * common * (1 - t) * (7 - 5 * t)
    return DeltaPair(d1, d2, float(t), float(2 * t), float("nan"), exact)


@dataclass(frozen=True)
class BlowupRow:
    tau1: float
    tau2: float
    e5_at_zero: float
    product_21tau1: float
    method: Method
    condition: float = float("nan")

    def to_dict(self):
        return {
            "tau1": self.tau1,
            "tau2": self.tau2,
            "e5_at_zero": self.e5_at_zero,
            "product_21tau1": self.product_21tau1,
            "method": self.method.value,
            "condition": self.condition,
        }


def spline_e5_at_zero(tau1, tau2):
    """Fifth derivative at ``0+`` of ``H_3[S] - S`` and the system condition."""
    tau1, tau2 = float(tau1), float(tau2)
    S = perfect_spline(3, [tau1, tau2])
    op = HermiteOperator([0.0, tau1, tau2, 1.0], 3)
    H = op.apply(S)
    # S has no fifth-order term on the first piece, so this is H's coefficient
    return 120.0 * (H.coeffs[0, 5] - S.coeffs[0, 5]), op.condition


def e5_at_zero(tau1, tau2, method=Method.DETERMINANT) -> BlowupRow:
    """``E_3^{(5)}(0)`` by the requested route.

    Raises:
        ValueError: inadmissible knots, or ``closed_form`` off the line
            ``tau2 = 2 tau1``.
        ConditioningError: the ``spline_numeric`` system was rejected.
    """
    method = Method(method)
    _check_order(tau1, tau2)
    cond = float("nan")
    if method is Method.DETERMINANT:
        dp = deltas(tau1, tau2)
        with mpmath.workprec(MP_PRECISION):
            value = 120 * dp.ratio
        cond = dp.cond_estimate
    elif method is Method.CLOSED_FORM:
        if _exact(tau2) != 2 * _exact(tau1):
            raise ValueError("closed_form requires tau2 == 2 * tau1")
        with mpmath.workprec(MP_PRECISION):
            value = 120 * closed_form_deltas(tau1).ratio
    else:
        value, cond = spline_e5_at_zero(tau1, tau2)
    value = float(value)
    return BlowupRow(float(tau1), float(tau2), value, 21.0 * float(tau1) * value, method, cond)


def double_link(tau1):
    return 2 * tau1


def blowup_scan(tau1_grid, link=double_link, methods=tuple(Method)):
    """``e5_at_zero`` for each grid value and method; ``tau2 = link(tau1)``.

    ``closed_form`` rows are only produced where ``link(tau1) == 2 * tau1``.
    """
    rows = []
    for t1 in tau1_grid:
        t2 = link(t1)
        _check_order(t1, t2)
        for m in methods:
            m = Method(m)
            if m is Method.CLOSED_FORM and _exact(t2) != 2 * _exact(t1):
                continue
            rows.append(e5_at_zero(t1, t2, m))
    return rows


def cross_check(rows, rtol=1e-6):
    """Largest relative disagreement between methods at equal ``tau1``.

    Returns:
        ``(max_rel_diff, ok)``.
    """
    by_tau = {}
    for r in rows:
        by_tau.setdefault((r.tau1, r.tau2), []).append(r.e5_at_zero)
    worst = 0.0
    for vals in by_tau.values():
        ref = vals[0]
        for v in vals[1:]:
            worst = max(worst, abs(v - ref) / max(abs(ref), 1e-300))
    return worst, worst <= rtol


def conjecture1_sup(t, nodes, k):
    """``||b_t - H_k b_t||_inf`` over the node span for the truncated power ``b_t``."""
    nodes = np.asarray(nodes, dtype=float)
    if not (nodes[0] < t < nodes[-1]):
        raise ValueError(f"t must lie inside the node span, got t={t}")
    b = truncated_power_poly(t, k, nodes[0], nodes[-1])
    return interp_error(b, nodes, k).sup_norms[0]
