"""Least-squares estimation of a k-monotone density.

The k-monotone cone on ``(0, inf)`` is generated by the kernels
``psi_theta(x) = (theta - x)_+^{k-1} / (k-1)!``.  For ``g = sum_j w_j psi_{theta_j}``
the criterion ``Q(g) = 1/2 int g^2 - int g dG_n`` has directional derivative
``H(theta) - Y(theta)`` along ``psi_theta``, where ``H`` is the k-fold integral
of ``g`` and ``Y`` the (k-1)-fold integral of the empirical c.d.f.  The
minimizer is characterized by ``H >= Y`` everywhere with equality at the
support points ``theta_j`` (the knots of ``g``).

The solver is a support-reduction scheme: add the global minimizer of
``H - Y``, re-solve the weights on the current support, drop points whose
weights would turn negative.  For ``k >= 2`` a Newton step then moves the
support points to exact zeros of ``H - Y`` and ``H' - Y'``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields, replace
from math import comb, factorial

import numpy as np
import scipy.linalg

from .densities import Exponential
from .errors import ConvergenceError
from .spline_core import KnotVector, PiecewisePoly, _critical_points, _horner, piece_roots

log = logging.getLogger(__name__)

_REFINE = 1e-5
_POLISH_ROUNDS = 20


@dataclass(frozen=True)
class SampleSet:
    """Positive i.i.d. observations and the seed that produced them."""

    observations: np.ndarray
    seed: int = 0
    source: str = "user_supplied"

    def __post_init__(self):
        x = np.array(self.observations, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("a sample set needs at least one observation")
        if not np.all(np.isfinite(x)) or np.any(x <= 0):
            raise ValueError("observations must be finite and strictly positive")
        x.flags.writeable = False
        object.__setattr__(self, "observations", x)

    @classmethod
    def exponential(cls, n, rate=1.0, seed=0):
        rng = np.random.default_rng(seed)
        x = Exponential(rate).sample(rng, n)
        return cls(x, seed=seed, source=f"exponential({rate:g})")

    @property
    def n(self):
        return self.observations.size

    def scaled(self, c):
        return SampleSet(self.observations * c, seed=self.seed, source=self.source)


def empirical_Y(samples, k, x, deriv_order=0):
    """``deriv_order``-th derivative of the (k-1)-fold integral of ``G_n``.

    Equals ``mean((x - X_i)_+^m) / m!`` with ``m = k - 1 - deriv_order``; for
    ``m = 0`` this is the empirical c.d.f. (right-continuous).
    """
    if not 0 <= deriv_order <= k - 1:
        raise ValueError(f"deriv_order must lie in [0, {k - 1}], got {deriv_order}")
    obs = samples.observations if isinstance(samples, SampleSet) else np.asarray(samples, float)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("x must be nonnegative")
    m = k - 1 - deriv_order
    d = xa[..., None] - obs
    if m == 0:
        vals = (d >= 0).astype(float)
    else:
        vals = np.where(d > 0, d, 0.0) ** m / factorial(m)
    out = vals.mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def _power_integral(e1, e2, m, d):
    """``int_0^m u^e1 (u + d)^e2 du`` for nonnegative integer exponents."""
    out = np.zeros(np.broadcast(m, d).shape)
    for j in range(e2 + 1):
        out = out + comb(e2, j) * d ** (e2 - j) * m ** (e1 + j + 1) / (e1 + j + 1)
    return out


def kernel_inner(p, q, a, b):
    """``int_0^{min(a,b)} (a-x)^p (b-x)^q dx / (p! q!)``.

    ``q = -1`` denotes the b-derivative of the ``q = 0`` case,
    ``1{b < a} (a - b)^p / p!``; ``p = -1`` likewise in ``a``.
    """
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if q < 0:
        return np.where(b < a, np.abs(a - b) ** p / factorial(p), 0.0)
    if p < 0:
        return np.where(a < b, np.abs(b - a) ** q / factorial(q), 0.0)
    m = np.minimum(a, b)
    d = np.abs(a - b)
    low_a = _power_integral(p, q, m, d)
    low_b = _power_integral(q, p, m, d)
    return np.where(a <= b, low_a, low_b) / (factorial(p) * factorial(q))


@dataclass(frozen=True)
class SolverConfig:
    """Options for ``fit_lse``.

    ``support_pad`` sets the initial search range for support points,
    ``[0, (1 + support_pad) * max(X)]``; ``None`` means ``2k - 1`` (the
    single-observation fit has its knot at ``(2k - 1) * X``).  The range is
    doubled whenever the exact tail check beyond it fails.
    """

    tolerance: float = 1e-8
    max_iterations: int = 500
    support_pad: float | None = None
    polish: bool = True

    def to_string(self):
        return ",".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))

    @classmethod
    def from_string(cls, text):
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in types:
                raise ValueError(f"unknown solver option {key!r}")
            val = val.strip()
            if key == "max_iterations":
                kwargs[key] = int(val)
            elif key == "polish":
                kwargs[key] = val.lower() in ("1", "true", "yes")
            elif key == "support_pad":
                kwargs[key] = None if val.lower() == "none" else float(val)
            else:
                kwargs[key] = float(val)
        return cls(**kwargs)


@dataclass
class LseFit:
    """Fitted k-monotone spline ``g = sum_j w_j (theta_j - x)_+^{k-1} / (k-1)!``.

    ``kernel_weights`` are the ``w_j``; ``weights`` re-express the same fit as
    a mixture of the unit-mass kernels ``(k/theta)(1 - x/theta)_+^{k-1}`` so
    that ``sum(weights) == mass``.
    """

    k: int
    thetas: np.ndarray
    kernel_weights: np.ndarray
    observations: np.ndarray = field(repr=False)
    domain_end: float
    objective: float
    iterations: int
    fenchel_min: float = float("nan")
    converged: bool = True

    @property
    def weights(self):
        return self.kernel_weights * self.thetas**self.k / factorial(self.k)

    @property
    def mass(self):
        return float(np.sum(self.weights))

    @property
    def knots(self):
        return np.array(self.thetas)

    @property
    def spline(self) -> PiecewisePoly:
        """The fitted density as a degree ``k - 1`` piecewise polynomial on ``[0, domain_end]``."""
        return _mixture_poly(self.k, self.thetas, self.kernel_weights, self.domain_end)

    @property
    def scale(self):
        """Reference size for Fenchel tolerances, see ``tolerance_scale``."""
        return tolerance_scale(self.observations, self.k)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        d = self.thetas - x[..., None]
        vals = np.where(d > 0, d, 0.0) ** (self.k - 1) / factorial(self.k - 1)
        if self.k == 1:
            vals = (d > 0).astype(float)
        return vals @ self.kernel_weights

    def integrated(self, x, deriv_order=0):
        """``deriv_order``-th derivative of the k-fold integral ``H`` of the fit."""
        x = np.asarray(x, dtype=float)
        q = self.k - 1 - deriv_order
        vals = kernel_inner(self.k - 1, q, self.thetas, x[..., None])
        return vals @ self.kernel_weights

    def fenchel_gap(self, x, deriv_order=0):
        """``H - Y_n`` (or its derivative) at ``x``."""
        return self.integrated(x, deriv_order) - empirical_Y(
            self.observations, self.k, x, deriv_order
        )

    def to_dict(self):
        return {
            "k": self.k,
            "knots": self.thetas.tolist(),
            "weights": self.weights.tolist(),
            "thetas": self.thetas.tolist(),
            "kernel_weights": self.kernel_weights.tolist(),
            "objective": self.objective,
            "fenchel_min": self.fenchel_min,
            "mass": self.mass,
            "domain_end": self.domain_end,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_mixture(cls, k, thetas, kernel_weights, observations, domain_end=None):
        """Build a fit object from an explicit kernel mixture (no solving)."""
        thetas = np.asarray(thetas, dtype=float)
        w = np.asarray(kernel_weights, dtype=float)
        obs = np.sort(np.asarray(observations, dtype=float))
        T = float(domain_end if domain_end is not None else max(thetas.max(), obs.max()))
        G = kernel_inner(k - 1, k - 1, thetas[:, None], thetas[None, :])
        c = empirical_Y(obs, k, thetas)
        obj = 0.5 * w @ G @ w - c @ w
        return cls(k, thetas, w, obs, T, float(obj), 0)


def tolerance_scale(observations, k):
    """``1 + Y_n(T)`` with ``T = (1 + 1/k) max(X)``; Fenchel tolerances are relative to it."""
    obs = np.asarray(observations, dtype=float)
    return 1.0 + float(empirical_Y(obs, k, (1.0 + 1.0 / k) * obs.max()))


def _mixture_poly(k, thetas, w, T):
    """Piecewise-polynomial form of ``sum_j w_j psi_{theta_j}`` on ``[0, T]``."""
    thetas = np.asarray(thetas, dtype=float)
    inner = np.unique(thetas[(thetas > 0) & (thetas < T)])
    bp = np.concatenate([[0.0], inner, [T]])
    lefts = bp[:-1]
    coeffs = np.zeros((lefts.size, k))
    for th, wj in zip(thetas, w):
        active = lefts < th
        off = th - lefts[active]
        for j in range(k):
            coeffs[active, j] += wj * comb(k - 1, j) * off ** (k - 1 - j) * (-1) ** j
    return PiecewisePoly(bp, coeffs / factorial(k - 1))


def _empirical_Y_poly(obs, k, T):
    """``Y_n`` as an exact piecewise polynomial on ``[0, T]``.

    Local coefficients at each distinct observation are accumulated by Taylor
    shifts so that every term is a sum of nonnegative numbers.
    """
    u, counts = np.unique(obs, return_counts=True)
    n = obs.size
    deg = k - 1
    bp = np.concatenate([[0.0], u[u < T], [T]]) if u[0] > 0 else np.concatenate([u, [T]])
    # sums[b] = sum_{X_j <= current point} (point - X_j)^b
    sums = [0.0] * (deg + 1)
    rows = []
    prev = None
    for ui, ci in zip(u, counts):
        if prev is not None:
            h = ui - prev
            sums = [sum(comb(b, a) * h ** (b - a) * sums[a] for a in range(b + 1)) for b in range(deg + 1)]
        sums[0] += ci
        prev = ui
        rows.append([comb(deg, a) * sums[deg - a] for a in range(deg + 1)])
    coeffs = np.array(rows, dtype=float) / (n * factorial(deg))
    if u[0] > 0:
        coeffs = np.vstack([np.zeros((1, deg + 1)), coeffs])
    return PiecewisePoly(bp, coeffs[: bp.size - 1])


class _Problem:
    """Fixed data for one fit: sorted sample, ``Y_n`` polynomial, search range."""

    def __init__(self, obs, k, T):
        self.obs = obs
        self.k = k
        self.set_range(T)

    def set_range(self, T):
        self.T = float(T)
        self.Y = _empirical_Y_poly(self.obs, self.k, self.T)
        self.scale = tolerance_scale(self.obs, self.k)

    def gram(self, th):
        return kernel_inner(self.k - 1, self.k - 1, th[:, None], th[None, :])

    def rhs(self, th):
        return self.Yn(th)

    def Yn(self, x, deriv_order=0):
        """``empirical_Y`` through the exact piecewise form on ``[0, T]``."""
        x = np.asarray(x, dtype=float)
        inside = x <= self.T
        if np.all(inside):
            return self.Y(x, deriv_order)
        out = empirical_Y(self.obs, self.k, x, deriv_order)
        out[inside] = self.Y(x[inside], deriv_order)
        return out

    def gap_poly(self, th, w):
        g = _mixture_poly(self.k, th, w, self.T)
        H = g
        for _ in range(self.k):
            H = H.antiderivative()
        return H - self.Y

    def worst(self, th, w):
        """Location and value of the smallest normalized gap ``(H - Y_n) / nu``.

        ``nu(t) = min(1, (t / max X)**(k - 1/2))`` is the kernel norm relative
        to the kernel at the largest observation.  Near the origin the optimal
        kernel weights grow without bound while ``H - Y_n`` is tiny, so the
        plain gap would stop the solver with a visible loss in the criterion.
        ``nu <= 1``, hence a bound on this value also bounds the plain gap.
        """
        k = self.k
        ref = float(self.obs[-1])
        p = k - 0.5
        D = self.gap_poly(th, w).refine([ref])
        c = D.coeffs
        lefts = D.breakpoints[:-1]
        h = np.diff(D.breakpoints)
        m, deg = c.shape[0], c.shape[1] - 1
        rows = [np.arange(m), np.arange(m)]
        offs = [np.zeros(m), h]

        def ratio_of(x, vals):
            nu = np.minimum(1.0, (np.maximum(x, 0.0) / ref) ** p)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(x > 0, vals / nu, 0.0)

        # skip root finding on pieces whose lower bound cannot beat the endpoints
        ends = np.concatenate([lefts, lefts + h])
        best_end = np.min(ratio_of(ends, np.concatenate([c[:, 0], _horner(c, h)])))
        lb = c[:, 0] - np.sum(np.abs(c[:, 1:]) * h[:, None] ** np.arange(1, deg + 1), axis=1)
        nu_left = np.minimum(1.0, (np.maximum(lefts, 0.0) / ref) ** p)
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = np.where(lb >= 0, lb, lb / nu_left)
        live = bound <= best_end + 1e-13 * self.scale
        low = np.flatnonzero(live & (lefts < ref))
        high = np.flatnonzero(live & (lefts >= ref))
        if low.size:
            # stationary points of D(t) t^-p solve t D'(t) - p D(t) = 0
            j = np.arange(deg + 1)
            E = (j - p)[None, :] * c[low]
            E[:, :deg] += lefts[low, None] * c[low, 1:] * j[None, 1:]
            r, s = piece_roots(E, h[low])
            rows.append(low[r])
            offs.append(s)
        if high.size and deg >= 2:
            r, s = _critical_points(c[high], h[high])
            rows.append(high[r])
            offs.append(s)
        rows = np.concatenate(rows)
        offs = np.concatenate(offs)
        x = lefts[rows] + offs
        ratio = ratio_of(x, _horner(c[rows], offs))
        best = np.min(ratio)
        ties = np.flatnonzero(ratio == best)
        i = ties[np.argmin(x[ties])]
        return float(x[i]), float(ratio[i])

    def objective(self, th, w):
        return float(0.5 * w @ self.gram(th) @ w - self.rhs(th) @ w)

    def tail_ok(self, th, w, tol):
        """``H - Y_n >= -tol`` on ``[T, inf)``; both are polynomials of degree k-1 there."""
        k, T = self.k, self.T
        taylor = np.array(
            [
                (kernel_inner(k - 1, k - 1 - r, th, T) @ w - empirical_Y(self.obs, k, T, r))
                / factorial(r)
                for r in range(k)
            ]
        )
        if taylor[0] < -tol:
            return False
        if k == 1:
            return True
        # leading coefficient is (mass - 1) / (k-1)!
        if taylor[-1] < -tol * 1e-3:
            return False
        crit = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(taylor))
        crit = crit[np.abs(crit.imag) <= 1e-12 * (1 + np.abs(crit.real))].real
        crit = crit[crit > 0]
        vals = np.polynomial.polynomial.polyval(crit, taylor)
        return bool(np.all(vals >= -tol))


def _solve_weights(G, c):
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), c)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return scipy.linalg.lstsq(G, c)[0]


def _support_reduce(prob, th, w, theta_new):
    """Add ``theta_new`` and re-solve, dropping points that hit zero weight."""
    th = np.append(th, theta_new)
    old = np.append(w, 0.0)
    order = np.argsort(th, kind="stable")
    th, old = th[order], old[order]
    while True:
        new = _solve_weights(prob.gram(th), prob.rhs(th))
        neg = new <= 0
        if not np.any(neg):
            return th, new
        idx = np.flatnonzero(neg)
        lam = old[idx] / (old[idx] - new[idx])
        j = idx[np.argmin(lam)]
        step = np.min(lam)
        old = old + step * (new - old)
        keep = np.ones(th.size, dtype=bool)
        keep[j] = False
        keep &= old > 0
        if not np.any(keep):
            keep[np.argmax(new)] = True
            old = np.where(keep, np.maximum(old, 0.0), 0.0)
        th, old = th[keep], old[keep]


def _stationarity(prob, th, w, jac=True):
    """Residual ``[D(theta_j), D'(theta_j)]`` and its Jacobian in ``(w, theta)``."""
    k = prob.k
    m = th.size
    A = th[:, None]
    B = th[None, :]
    # [i, j]: kernel i paired with evaluation point j
    G = kernel_inner(k - 1, k - 1, A, B)
    G1 = kernel_inner(k - 1, k - 2, A, B)
    D = G.T @ w - prob.Yn(th)
    D1 = G1.T @ w - prob.Yn(th, 1)
    F = np.concatenate([D, D1])
    if not jac:
        return F, None
    Ga = kernel_inner(k - 2, k - 1, A, B)
    Gaa = kernel_inner(k - 2, k - 2, A, B)
    D2 = kernel_inner(k - 1, k - 3, A, B).T @ w
    if k >= 3:
        D2 = D2 - prob.Yn(th, 2)
    J = np.zeros((2 * m, 2 * m))
    J[:m, :m] = G.T
    J[m:, :m] = G1.T
    J[:m, m:] = (Ga * w[:, None]).T + np.diag(D1)
    J[m:, m:] = (Gaa * w[:, None]).T + np.diag(D2)
    return F, J


def _newton_polish(prob, th, w, max_steps=50):
    """Solve ``D(theta_j) = D'(theta_j) = 0`` jointly in weights and locations.

    Newton runs in ``(log w, log theta)``: weights near the origin can be
    orders of magnitude larger than elsewhere, and multiplicative updates keep
    both positive without truncating the step.

    Returns the polished ``(th, w)`` or ``None`` if Newton fails to reduce the
    residual while keeping locations ordered.
    """
    k, m = prob.k, th.size
    scale = prob.scale
    F, J = _stationarity(prob, th, w)
    norm = np.linalg.norm(F)
    for _ in range(max_steps):
        if norm <= 1e-14 * scale:
            break
        x = np.concatenate([w, th])
        try:
            dz = np.linalg.solve(J * x[None, :], -F)
        except np.linalg.LinAlgError:
            return None
        dz = np.clip(dz, -2.0, 2.0)
        t = 1.0
        while t > 1e-6:
            x2 = x * np.exp(t * dz)
            w2, th2 = x2[:m], x2[m:]
            if np.all(np.diff(th2) > 0) and np.all(np.isfinite(x2)):
                n2 = np.linalg.norm(_stationarity(prob, th2, w2, jac=False)[0])
                if n2 < norm:
                    break
            t *= 0.5
        else:
            break
        th, w, norm = th2, w2, n2
        F, J = _stationarity(prob, th, w)
    if norm > 1e-9 * scale:
        log.debug("Newton polish stalled at residual %.3e", norm)
        return None
    return th, w


def _merge_closest(th, w):
    """Replace the relatively closest adjacent pair by its weighted mean."""
    j = int(np.argmin(np.diff(th) / th[1:]))
    tot = w[j] + w[j + 1]
    t = (w[j] * th[j] + w[j + 1] * th[j + 1]) / tot
    return np.concatenate([th[:j], [t], th[j + 2 :]]), np.concatenate([w[:j], [tot], w[j + 2 :]])


def fit_lse(samples, k, config=None) -> LseFit:
    """Least-squares k-monotone density estimate.

    Raises:
        ConvergenceError: tolerance not met within ``config.max_iterations``
            support updates; ``err.best`` holds the last iterate.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)
    config = config or SolverConfig()
    if not isinstance(samples, SampleSet):
        samples = SampleSet(samples)
    obs = np.sort(samples.observations)
    pad = (2 * k - 1) if config.support_pad is None else config.support_pad
    prob = _Problem(obs, k, (1.0 + pad) * obs[-1])
    tol = config.tolerance * prob.scale
    # knot slopes are only ~sqrt(tol) accurate after support reduction alone
    fine = max(config.tolerance * _REFINE, 1e-15) * prob.scale

    th = np.zeros(0)
    w = np.zeros(0)
    it = 0
    while True:
        th, w, it, dmin = _sra(prob, th, w, tol, it, config.max_iterations)
        if dmin < -tol:
            best = _make_fit(prob, th, w, it, dmin, converged=False)
            raise ConvergenceError(
                f"LSE not converged after {it} iterations "
                f"(worst Fenchel violation {-dmin:.3e})",
                best=best,
                violation=-dmin,
            )
        if k >= 2 and th.size:
            th, w, it, dmin = _refine(prob, th, w, tol, fine, it, config)
        if not prob.tail_ok(th, w, tol):
            log.debug("tail check failed at T=%g, doubling the search range", prob.T)
            prob.set_range(2 * prob.T)
            continue
        break
    return _make_fit(prob, th, w, it, dmin, converged=True)


def _refine(prob, th, w, tol, fine, it, config):
    """Alternate support reduction and Newton polishing down to ``fine``.

    Each round tightens the support-reduction tolerance by ``100`` (never
    below ``fine``) and then polishes; an accepted polish ends the loop, an
    improved one replaces the iterate.
    """
    dmin = prob.worst(th, w)[1]
    cur = tol
    for _ in range(_POLISH_ROUNDS):
        th, w, it, dmin = _sra(prob, th, w, cur, it, config.max_iterations)
        if not config.polish:
            if cur <= fine:
                break
        else:
            th2, w2, dmin2, status = _polish(prob, th, w, fine)
            if status == ACCEPTED:
                return th2, w2, it, dmin2
            if status == IMPROVED:
                th, w, dmin = th2, w2, dmin2
            elif cur <= fine:
                break
        cur = max(cur * 1e-2, fine)
    if dmin < -fine:
        th, w, it, dmin = _sra(prob, th, w, fine, it, config.max_iterations)
    return th, w, it, dmin


def _sra(prob, th, w, tol, it, max_iterations):
    """Support reduction until ``min(H - Y) >= -tol`` or the budget runs out."""
    while True:
        theta, dmin = prob.worst(th, w)
        if dmin >= -tol or it >= max_iterations:
            return th, w, it, dmin
        it += 1
        th, w = _support_reduce(prob, th, w, theta)


ACCEPTED, IMPROVED, FAILED = "accepted", "improved", "failed"


def _polish(prob, th, w, tol, max_rel_merge=0.1):
    """Newton polish of the support found by support reduction.

    Support reduction often represents one knot by a close pair, which makes
    the Newton system singular; on failure the relatively closest pair is
    merged and Newton retried, as long as that pair is within ``max_rel_merge``.

    Returns ``(th, w, dmin, status)``: ``accepted`` when the polished point
    satisfies ``min(H - Y) >= -tol``; ``improved`` when it is stationary on its
    support with a lower criterion but some other location still needs a
    support point; ``failed`` otherwise (inputs returned unchanged).
    """
    obj = prob.objective(th, w)
    best = None
    cand_t, cand_w = th, w
    while True:
        res = _newton_polish(prob, cand_t, cand_w)
        if res is not None:
            th2, w2 = res
            dmin2 = prob.worst(th2, w2)[1]
            if dmin2 >= -tol:
                return th2, w2, dmin2, ACCEPTED
            obj2 = prob.objective(th2, w2)
            if obj2 < obj and (best is None or obj2 < best[3]):
                best = (th2, w2, dmin2, obj2)
        if cand_t.size < 2 or np.min(np.diff(cand_t) / cand_t[1:]) > max_rel_merge:
            break
        cand_t, cand_w = _merge_closest(cand_t, cand_w)
    if best is not None:
        return best[0], best[1], best[2], IMPROVED
    return th, w, None, FAILED


def _make_fit(prob, th, w, it, dmin, converged):
    order = np.argsort(th)
    th, w = th[order], w[order]
    obj = prob.objective(th, w) if th.size else 0.0
    if th.size:
        dmin = prob.gap_poly(th, w).minimize()[1]
    return LseFit(prob.k, th, w, prob.obs, prob.T, obj, it, float(dmin), converged)


@dataclass
class FenchelAudit:
    min_gap: float
    max_knot_gap: float
    max_knot_slope_gap: float
    scale: float
    grid_size: int

    def passed(self, tol=1e-8, slope_tol=1e-6):
        s = self.scale
        ok = self.min_gap >= -tol * s and self.max_knot_gap <= tol * s
        if np.isfinite(self.max_knot_slope_gap):
            ok = ok and self.max_knot_slope_gap <= slope_tol * s
        return bool(ok)

    def to_dict(self):
        return {
            "min_gap": self.min_gap,
            "max_knot_gap": self.max_knot_gap,
            "max_knot_slope_gap": self.max_knot_slope_gap,
            "scale": self.scale,
            "grid_size": self.grid_size,
        }


def fenchel_audit(fit, samples, grid_size=10_000) -> FenchelAudit:
    """Check ``H >= Y_n`` on a grid and ``H = Y_n``, ``H' = Y_n'`` at the knots.

    ``H`` is evaluated from the kernel representation and ``Y_n`` by direct
    summation over ``samples``, independently of the solver's polynomials.
    The slope statistic is ``nan`` for ``k = 1``.
    """
    obs = samples.observations if isinstance(samples, SampleSet) else np.asarray(samples, float)
    k = fit.k

    def gap(x, r=0):
        return fit.integrated(x, r) - empirical_Y(obs, k, x, r)

    grid = np.linspace(0.0, fit.domain_end, grid_size)
    grid = np.union1d(grid, fit.thetas)
    min_gap = float(np.min(np.concatenate([gap(grid[i : i + 2000]) for i in range(0, grid.size, 2000)])))
    knots = fit.thetas
    max_knot = float(np.max(np.abs(gap(knots)))) if knots.size else 0.0
    if k >= 2 and knots.size:
        max_slope = float(np.max(np.abs(gap(knots, 1))))
    else:
        max_slope = float("nan")
    scale = tolerance_scale(obs, k)
    return FenchelAudit(min_gap, max_knot, max_slope, scale, grid_size)


def extract_knots(fit, threshold=1e-8):
    """Locations where the (k-1)-st derivative of the fit jumps by at least
    ``threshold`` times the largest jump; empty when nothing qualifies."""
    jumps = np.abs(fit.kernel_weights)
    if jumps.size == 0 or jumps.max() <= 0:
        return np.zeros(0)
    keep = jumps >= threshold * jumps.max()
    return np.unique(fit.thetas[keep])


def perturb_knot(fit, index, delta):
    """Copy of ``fit`` with one support point shifted (weights kept)."""
    th = np.array(fit.thetas)
    th[index] += delta
    return replace(fit, thetas=th)
