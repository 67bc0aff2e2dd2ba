"""Piecewise polynomials and Hermite spline interpolation on arbitrary knots.

Polynomial pieces are stored in the local power basis: on the interval
``[b[i], b[i+1])`` the function is ``sum_j c[i, j] * (x - b[i])**j``.
Evaluation at a breakpoint takes the right limit, except at the last
breakpoint where the left limit is used.

The Hermite operator maps a function ``f`` to the unique spline of degree
``2k - 1`` with simple internal knots ``a_1 < ... < a_{2k-4}`` that matches
``f`` and ``f'`` at all ``2k - 2`` nodes ``a_0, ..., a_{2k-3}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .errors import ConditioningError, DomainError

# Rejection thresholds for the Hermite system.
MIN_NODE_SEPARATION = 1e-13
MAX_CONDITION = 1e13

SUP_GRID_POINTS = 2048
SUP_REFINE_TOP = 3
SUP_REFINE_RTOL = 1e-10


class KnotVector:
    """Strictly increasing, finite breakpoints ``a_0 < a_1 < ... < a_{p+1}``."""

    __slots__ = ("points",)

    def __init__(self, points):
        if isinstance(points, KnotVector):
            points = points.points
        pts = np.array(points, dtype=float).ravel()
        if pts.size < 2:
            raise ValueError("a knot vector needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("knot vector entries must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError(f"knot vector must be strictly increasing: {pts}")
        pts.flags.writeable = False
        self.points = pts

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points.tolist())

    def __getitem__(self, i):
        return self.points[i]

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, KnotVector) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self):
        return f"KnotVector({self.points.tolist()})"

    @property
    def span(self):
        return float(self.points[-1] - self.points[0])


def _taylor_shift(coeffs, s):
    """Re-expand rows of local coefficients about ``left + s`` (row-wise shift)."""
    coeffs = np.asarray(coeffs, dtype=float)
    d = coeffs.shape[1] - 1
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(coeffs)
    # powers[:, p] = s**p
    powers = s[:, None] ** np.arange(d + 1)[None, :]
    for a in range(d + 1):
        for j in range(a, d + 1):
            out[:, a] += comb(j, a) * coeffs[:, j] * powers[:, j - a]
    return out


def _horner(coeffs, s):
    """Evaluate each row of ``coeffs`` at the matching local abscissa ``s``."""
    out = np.zeros_like(s)
    for j in range(coeffs.shape[1] - 1, -1, -1):
        out = out * s + coeffs[:, j]
    return out


def _derivative_coeffs(coeffs, nu):
    d = coeffs.shape[1] - 1
    if nu > d:
        return np.zeros((coeffs.shape[0], 1))
    fac = np.array([factorial(j) / factorial(j - nu) for j in range(nu, d + 1)])
    return coeffs[:, nu:] * fac[None, :]


class PiecewisePoly:
    """Piecewise polynomial of fixed degree in the local shifted power basis.

    Args:
        breakpoints: strictly increasing breakpoints (``m + 1`` of them).
        coeffs: array of shape ``(m, degree + 1)``; row ``i`` holds the
            coefficients of ``(x - breakpoints[i])**j``.
    """

    def __init__(self, breakpoints, coeffs):
        self.breakpoints = KnotVector(breakpoints).points
        c = np.array(coeffs, dtype=float)
        if c.ndim == 1:
            c = c[None, :]
        if c.ndim != 2 or c.shape[0] != self.breakpoints.size - 1 or c.shape[1] < 1:
            raise ValueError(
                f"coeffs must have shape ({self.breakpoints.size - 1}, degree+1), got {c.shape}"
            )
        c.flags.writeable = False
        self.coeffs = c

    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    @property
    def domain(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def n_intervals(self):
        return self.coeffs.shape[0]

    def __repr__(self):
        return (
            f"PiecewisePoly(degree={self.degree}, intervals={self.n_intervals}, "
            f"domain={self.domain})"
        )

    @classmethod
    def polynomial(cls, coeffs, a, b):
        """Single-piece polynomial ``sum_j coeffs[j] * x**j`` on ``[a, b]``."""
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        return cls([a, b], _taylor_shift(c, np.array([a], dtype=float)))

    @classmethod
    def constant(cls, value, a, b):
        return cls([a, b], [[float(value)]])

    def _locate(self, x, left=False):
        bp = self.breakpoints
        if left:
            idx = np.searchsorted(bp, x, side="left") - 1
        else:
            idx = np.searchsorted(bp, x, side="right") - 1
        return np.clip(idx, 0, self.n_intervals - 1)

    def _check(self, x, nu):
        if nu < 0 or int(nu) != nu:
            raise ValueError(f"derivative order must be a nonnegative integer, got {nu}")
        if nu > self.degree + 1:
            raise ValueError(f"derivative order {nu} exceeds degree+1 = {self.degree + 1}")
        a, b = self.domain
        if np.any(x < a) or np.any(x > b) or np.any(np.isnan(x)):
            raise DomainError(f"evaluation point outside [{a}, {b}]")

    def __call__(self, x, nu=0):
        """Value of the ``nu``-th derivative at ``x`` (scalar or array)."""
        xa = np.asarray(x, dtype=float)
        self._check(xa, nu)
        return self._eval(xa, nu, left=False)

    def left(self, x, nu=0):
        """Left limit of the ``nu``-th derivative (right limit at the first breakpoint)."""
        xa = np.asarray(x, dtype=float)
        self._check(xa, nu)
        return self._eval(xa, nu, left=True)

    def _eval(self, xa, nu, left):
        scalar = xa.ndim == 0
        flat = np.atleast_1d(xa).ravel()
        idx = self._locate(flat, left=left)
        dc = _derivative_coeffs(self.coeffs[idx], nu)
        out = _horner(dc, flat - self.breakpoints[idx])
        if scalar:
            return float(out[0])
        return out.reshape(xa.shape)

    def derivative(self, nu=1):
        return PiecewisePoly(self.breakpoints, _derivative_coeffs(self.coeffs, nu))

    def antiderivative(self, value_at_left=0.0):
        """Continuous antiderivative taking ``value_at_left`` at the first breakpoint."""
        d = self.degree
        c = np.zeros((self.n_intervals, d + 2))
        c[:, 1:] = self.coeffs / np.arange(1, d + 2)[None, :]
        h = np.diff(self.breakpoints)
        increments = _horner(c, h)
        c[:, 0] = value_at_left + np.concatenate([[0.0], np.cumsum(increments)[:-1]])
        return PiecewisePoly(self.breakpoints, c)

    def integral(self):
        """Integral over the whole domain."""
        anti = self.antiderivative()
        return float(anti.left(self.breakpoints[-1]))

    def with_degree(self, degree):
        if degree < self.degree:
            raise ValueError("cannot lower the degree")
        c = np.zeros((self.n_intervals, degree + 1))
        c[:, : self.degree + 1] = self.coeffs
        return PiecewisePoly(self.breakpoints, c)

    def refine(self, points):
        """Exact re-expansion on the union of current breakpoints and ``points``.

        Points outside the domain are discarded.
        """
        a, b = self.domain
        pts = np.asarray(points, dtype=float).ravel()
        pts = pts[(pts >= a) & (pts <= b)]
        bp = np.union1d(self.breakpoints, pts)
        if bp.size == self.breakpoints.size:
            return self
        lefts = bp[:-1]
        idx = self._locate(lefts)
        coeffs = _taylor_shift(self.coeffs[idx], lefts - self.breakpoints[idx])
        return PiecewisePoly(bp, coeffs)

    def _binary(self, other, sign):
        if np.isscalar(other):
            c = np.array(self.coeffs)
            c[:, 0] += sign * float(other)
            return PiecewisePoly(self.breakpoints, c)
        if self.domain != other.domain:
            raise ValueError(f"domains differ: {self.domain} vs {other.domain}")
        deg = max(self.degree, other.degree)
        lhs = self.refine(other.breakpoints).with_degree(deg)
        rhs = other.refine(self.breakpoints).with_degree(deg)
        return PiecewisePoly(lhs.breakpoints, lhs.coeffs + sign * rhs.coeffs)

    def __add__(self, other):
        return self._binary(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return PiecewisePoly(self.breakpoints, -self.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return PiecewisePoly(self.breakpoints, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def jumps(self, nu):
        """Jump (right minus left limit) of the ``nu``-th derivative at internal breakpoints."""
        inner = self.breakpoints[1:-1]
        if inner.size == 0:
            return np.zeros(0)
        dc = _derivative_coeffs(self.coeffs, nu)
        right = dc[1:, 0]
        left = _horner(dc[:-1], np.diff(self.breakpoints)[:-1])
        return right - left

    def minimize(self):
        """Global minimum over the closed pieces.

        Each piece is minimized over its closed interval, so a left limit at a
        breakpoint counts as attained at that breakpoint.

        Returns:
            ``(x, value)`` of the smallest candidate (leftmost on ties).
        """
        h = np.diff(self.breakpoints)
        m = self.n_intervals
        rows = [np.arange(m), np.arange(m)]
        locs = [np.zeros(m), h]
        if self.degree >= 2:
            r, s = _critical_points(self.coeffs, h)
            rows.append(r)
            locs.append(s)
        rows = np.concatenate(rows)
        locs = np.concatenate(locs)
        vals = _horner(self.coeffs[rows], locs)
        x = self.breakpoints[rows] + locs
        best = np.min(vals)
        ties = np.flatnonzero(vals == best)
        i = ties[np.argmin(x[ties])]
        return float(x[i]), float(vals[i])


def _critical_points(coeffs, h):
    """Real zeros of the derivative strictly inside each piece."""
    return piece_roots(_derivative_coeffs(coeffs, 1), h)


def piece_roots(dc, h):
    """Real zeros of each local polynomial row strictly inside ``(0, h)``.

    Works in the unit variable ``u = s / h``.  Coefficients below ``1e-10``
    of the row maximum are dropped, rows are grouped by the remaining degree
    and each group is solved in one batch.

    Returns:
        ``(row_index, offset)`` arrays.
    """
    p = dc.shape[1] - 1
    scaled = dc * (h[:, None] ** np.arange(p + 1)[None, :])
    scale = np.max(np.abs(scaled), axis=1)
    live = np.abs(scaled) > 1e-10 * np.maximum(scale, np.finfo(float).tiny)[:, None]
    live &= (scale > 0)[:, None]
    # effective degree: index of the highest surviving coefficient
    eff = np.where(live.any(axis=1), p - np.argmax(live[:, ::-1], axis=1), 0)
    scaled = np.where(live, scaled, 0.0)
    out_rows, out_u = [], []
    for e in range(1, p + 1):
        ri = np.flatnonzero(eff == e)
        if ri.size:
            r, u = _batched_real_roots(scaled[ri, : e + 1])
            out_rows.append(ri[r])
            out_u.append(u)
    if not out_rows:
        return np.zeros(0, dtype=int), np.zeros(0)
    rows = np.concatenate(out_rows).astype(int)
    u = np.concatenate(out_u)
    keep = (u > 0) & (u < 1)
    return rows[keep], u[keep] * h[rows[keep]]


def _batched_real_roots(c):
    """Real roots of each row polynomial ``c[i, 0] + c[i, 1] u + ...`` (nonzero leading term).

    Returns ``(row_index, root)`` arrays.
    """
    m, e = c.shape[0], c.shape[1] - 1
    if e == 1:
        return np.arange(m), -c[:, 0] / c[:, 1]
    if e == 2:
        a, b, cc = c[:, 2], c[:, 1], c[:, 0]
        disc = b * b - 4 * a * cc
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        q = -0.5 * (b + np.copysign(sq, b))
        r1 = q / a
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.where(q != 0, cc / q, 0.0)
        idx = np.flatnonzero(ok)
        return np.concatenate([idx, idx]), np.concatenate([r1[idx], r2[idx]])
    comp = np.zeros((m, e, e))
    comp[:, np.arange(1, e), np.arange(e - 1)] = 1.0
    comp[:, :, -1] = -c[:, :e] / c[:, e : e + 1]
    ev = np.linalg.eigvals(comp)
    real = np.abs(ev.imag) <= 1e-8 * (1.0 + np.abs(ev.real))
    rr, cc = np.nonzero(real)
    return rr, ev.real[rr, cc]


@dataclass(frozen=True)
class HermiteData:
    """Values and slopes of a function at the interpolation nodes."""

    nodes: KnotVector
    values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        nodes = KnotVector(self.nodes)
        values = np.asarray(self.values, dtype=float).ravel()
        slopes = np.asarray(self.slopes, dtype=float).ravel()
        if values.size != len(nodes) or slopes.size != len(nodes):
            raise ValueError("values and slopes must match the number of nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def sample(cls, f, nodes):
        """Build data from ``f(x, nu)`` evaluated at the nodes."""
        nodes = KnotVector(nodes)
        x = nodes.points
        return cls(nodes, np.asarray(f(x, 0), float), np.asarray(f(x, 1), float))


class HermiteOperator:
    """Factorized Hermite spline interpolation for a fixed node set.

    The system is assembled in a per-interval basis ``((x - a_i) / h_i)**j``
    with C^{2k-2} continuity rows scaled by the shorter adjacent interval,
    and solved by column-pivoted QR.

    Raises:
        ValueError: wrong number of nodes or ``k < 2``.
        ConditioningError: nodes closer than ``1e-13 * span`` or condition
            estimate above ``1e13``.
    """

    def __init__(self, nodes, k):
        if int(k) != k or k < 2:
            raise ValueError(f"Hermite interpolation needs integer k >= 2, got {k}")
        k = int(k)
        nodes = KnotVector(nodes)
        if len(nodes) != 2 * k - 2:
            raise ValueError(f"order k={k} needs exactly {2 * k - 2} nodes, got {len(nodes)}")
        a = nodes.points
        h = np.diff(a)
        if np.min(h) < MIN_NODE_SEPARATION * nodes.span:
            raise ConditioningError(
                f"nodes closer than {MIN_NODE_SEPARATION:g} * span: {a.tolist()}", knots=nodes
            )
        self.k = k
        self.nodes = nodes
        self._h = h
        self._build(a, h)

    def _build(self, a, h):
        k = self.k
        deg = 2 * k - 1
        nint = a.size - 1
        ncol = nint * (deg + 1)
        A = np.zeros((ncol, ncol))
        row = 0
        self._value_rows = np.zeros(a.size, dtype=int)
        self._slope_rows = np.zeros(a.size, dtype=int)
        self._slope_scale = np.zeros(a.size)

        def col(i, j):
            return i * (deg + 1) + j

        for i in range(nint):
            A[row, col(i, 0)] = 1.0
            self._value_rows[i] = row
            A[row + 1, col(i, 1)] = 1.0
            self._slope_rows[i] = row + 1
            self._slope_scale[i] = h[i]
            row += 2
        last = nint - 1
        for j in range(deg + 1):
            A[row, col(last, j)] = 1.0
            A[row + 1, col(last, j)] = j
        self._value_rows[nint] = row
        self._slope_rows[nint] = row + 1
        self._slope_scale[nint] = h[last]
        row += 2
        for i in range(1, nint):
            s = min(h[i - 1], h[i])
            for d in range(2 * k - 1):
                left = (s / h[i - 1]) ** d
                for j in range(d, deg + 1):
                    A[row, col(i - 1, j)] = left * comb(j, d)
                A[row, col(i, d)] = -((s / h[i]) ** d)
                row += 1
        assert row == ncol
        self.condition = float(np.linalg.cond(A))
        if not np.isfinite(self.condition) or self.condition > MAX_CONDITION:
            raise ConditioningError(
                f"Hermite system condition estimate {self.condition:.3e} exceeds "
                f"{MAX_CONDITION:g} for nodes {a.tolist()}",
                cond=self.condition,
                knots=self.nodes,
            )
        self._qr = scipy.linalg.qr(A, pivoting=True)
        self._unscale = h[:, None] ** -np.arange(deg + 1)[None, :]

    def _solve(self, rhs):
        Q, R, P = self._qr
        y = scipy.linalg.solve_triangular(R, Q.T @ rhs)
        sol = np.empty_like(y)
        sol[P] = y
        return sol

    def _rhs(self, values, slopes):
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        n = self.nodes.points.size
        if values.shape[0] != n or slopes.shape[0] != n:
            raise ValueError("values and slopes must match the number of nodes")
        b = np.zeros((self._qr[0].shape[0],) + values.shape[1:])
        b[self._value_rows] = values
        scale = self._slope_scale.reshape((-1,) + (1,) * (values.ndim - 1))
        b[self._slope_rows] = slopes * scale
        return b

    def __call__(self, values, slopes):
        """Interpolant of the given node values and slopes as a ``PiecewisePoly``."""
        sol = self._solve(self._rhs(values, slopes))
        coeffs = sol.reshape(self._h.size, 2 * self.k) * self._unscale
        return PiecewisePoly(self.nodes.points, coeffs)

    def apply(self, f):
        """Interpolate a callable ``f(x, nu)``."""
        x = self.nodes.points
        return self(np.asarray(f(x, 0), float), np.asarray(f(x, 1), float))

    def cardinal_weights(self, x):
        """Weights ``(alpha, beta)`` with ``H[f](x) = alpha @ f(a) + beta @ f'(a)``."""
        n = self.nodes.points.size
        eye = np.eye(n)
        sol_v = self._solve(self._rhs(eye, np.zeros((n, n))))
        sol_s = self._solve(self._rhs(np.zeros((n, n)), eye))
        i = int(np.clip(np.searchsorted(self.nodes.points, x, side="right") - 1, 0, self._h.size - 1))
        t = (x - self.nodes.points[i]) / self._h[i]
        powers = t ** np.arange(2 * self.k)
        blk = slice(i * 2 * self.k, (i + 1) * 2 * self.k)
        return powers @ sol_v[blk], powers @ sol_s[blk]


def hermite_interpolate(data: HermiteData, k: int) -> PiecewisePoly:
    """Hermite spline of degree ``2k - 1`` matching ``data`` at its nodes."""
    return HermiteOperator(data.nodes, k)(data.values, data.slopes)


def truncated_power(u, k, x):
    """``(x - u)_+^{k-1} / (k-1)!``, with ``(x - u)_+^0 = 1`` for ``x >= u``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(x, dtype=float)
    d = x - u
    if k == 1:
        out = (d >= 0).astype(float)
    else:
        out = np.where(d > 0, d, 0.0) ** (k - 1) / factorial(k - 1)
    return float(out) if out.ndim == 0 else out


def truncated_power_poly(u, k, a, b):
    """``truncated_power(u, k, .)`` as a piecewise polynomial on ``[a, b]``."""
    deg = k - 1
    if u <= a:
        c = np.zeros(deg + 1)
        c[deg] = 1.0 / factorial(deg)
        return PiecewisePoly([a, b], _taylor_shift(c[None, :], np.array([a - u])))
    if u >= b:
        return PiecewisePoly([a, b], np.zeros((1, deg + 1)))
    coeffs = np.zeros((2, deg + 1))
    coeffs[1, deg] = 1.0 / factorial(deg)
    return PiecewisePoly([a, u, b], coeffs)


def perfect_spline(k, internal_knots) -> PiecewisePoly:
    """The perfect spline of degree ``2k`` on ``[0, 1]``.

    ``S(t) = (t**(2k) + 2 * sum_i (-1)**i * (t - tau_i)_+**(2k)) / (2k)!`` so that
    its ``2k``-th derivative is ``+1`` on ``[0, tau_1)`` and flips sign at every
    internal knot.
    """
    if int(k) != k or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k}")
    k = int(k)
    tau = np.asarray(internal_knots, dtype=float).ravel()
    if tau.size != 2 * k - 4:
        raise ValueError(f"order k={k} needs {2 * k - 4} internal knots, got {tau.size}")
    bp = KnotVector(np.concatenate([[0.0], tau, [1.0]])).points
    deg = 2 * k
    fact = factorial(deg)
    coeffs = np.zeros((bp.size - 1, deg + 1))
    for i, left in enumerate(bp[:-1]):
        centers = [0.0] + list(tau[:i])
        weights = [1.0] + [2.0 * (-1) ** (j + 1) for j in range(i)]
        row = np.zeros(deg + 1)
        for c, w in zip(centers, weights):
            off = left - c
            for j in range(deg + 1):
                row[j] += w * comb(deg, j) * off ** (deg - j)
        coeffs[i] = row / fact
    return PiecewisePoly(bp, coeffs)


@dataclass
class ErrorReport:
    """Sup norms of the Hermite error ``H[f] - f`` and its derivatives.

    ``sup_norms[d]`` and ``argmax[d]`` refer to derivative order ``d``;
    ``interval_signs[i]`` is the sign of the order-0 error at its largest
    magnitude point inside knot interval ``i``.
    """

    k: int
    nodes: KnotVector
    sup_norms: list
    argmax: list
    interval_signs: list
    condition: float
    interpolant: PiecewisePoly = field(repr=False)

    def to_dict(self):
        return {
            "k": self.k,
            "nodes": self.nodes.points.tolist(),
            "sup_norms": [float(v) for v in self.sup_norms],
            "argmax": [float(v) for v in self.argmax],
            "interval_signs": [int(v) for v in self.interval_signs],
            "condition": self.condition,
        }


def sup_abs(func, breakpoints, n_grid=SUP_GRID_POINTS, top=SUP_REFINE_TOP, rtol=SUP_REFINE_RTOL):
    """Sup of ``|func|`` over ``[breakpoints[0], breakpoints[-1]]``.

    Samples ``n_grid`` uniform points per interval and refines the ``top``
    largest local maxima with bounded Brent search.

    Returns:
        ``(sup, location)``.
    """
    bp = np.asarray(breakpoints, dtype=float)
    xs, vs = [], []
    for lo, hi in zip(bp[:-1], bp[1:]):
        x = np.linspace(lo, hi, n_grid)
        xs.append(x)
        vs.append(np.abs(func(x)))
    best_x, best_v = None, -np.inf
    candidates = []
    for x, v in zip(xs, vs):
        i = int(np.argmax(v))
        if v[i] > best_v:
            best_x, best_v = float(x[i]), float(v[i])
        interior = np.flatnonzero((v[1:-1] >= v[:-2]) & (v[1:-1] >= v[2:])) + 1
        for j in interior:
            candidates.append((float(v[j]), float(x[j - 1]), float(x[j + 1])))
    candidates.sort(reverse=True)
    span = bp[-1] - bp[0]
    for _, lo, hi in candidates[:top]:
        res = minimize_scalar(
            lambda t: -abs(float(func(np.array([t]))[0])),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": rtol * max(span, abs(hi))},
        )
        if -res.fun > best_v:
            best_x, best_v = float(res.x), float(-res.fun)
    return best_v, best_x


def interp_error(target, nodes, k) -> ErrorReport:
    """Sup-norm report for the Hermite interpolation error of ``target``.

    Args:
        target: callable ``target(x, nu)`` returning the ``nu``-th derivative;
            a ``PiecewisePoly`` qualifies.
        nodes: interpolation nodes (``2k - 2`` of them).
        k: interpolation order.
    """
    if isinstance(target, PiecewisePoly):
        poly = target
        target = lambda x, nu: poly(x, nu) if nu <= poly.degree else np.zeros_like(x)
    op = HermiteOperator(nodes, k)
    interp = op.apply(target)
    bp = op.nodes.points
    sups, locs = [], []
    for d in range(2 * k):
        sup, loc = sup_abs(lambda x, d=d: interp(x, d) - np.asarray(target(x, d), float), bp)
        sups.append(sup)
        locs.append(loc)
    signs = []
    for lo, hi in zip(bp[:-1], bp[1:]):
        x = np.linspace(lo, hi, SUP_GRID_POINTS)[1:-1]
        e = interp(x) - np.asarray(target(x, 0), float)
        signs.append(int(np.sign(e[np.argmax(np.abs(e))])))
    return ErrorReport(k, op.nodes, sups, locs, signs, op.condition, interp)
