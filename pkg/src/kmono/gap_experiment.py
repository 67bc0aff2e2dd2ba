"""Monte Carlo harness for the knot-gap conjecture.

For data from a k-monotone truth the LSE has knots accumulating at every
``x0`` with ``(-1)^k g0^{(k)}(x0) > 0``.  The conjectured gap between the
``2k - 2`` knots around ``x0`` is of order ``n^{-1/(2k+1)}``.  This module
runs seeded trials, estimates the log-log slope with a bootstrap interval,
audits the interpolation inequality behind the conjecture, and simulates the
limiting drift process ``Y_k``.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from math import factorial

import numpy as np
import scipy.integrate

from .densities import parse_density
from .errors import ConditioningError, ConvergenceError
from .lse import SampleSet, SolverConfig, extract_knots, fit_lse, tolerance_scale
from .spline_core import HermiteOperator, truncated_power

log = logging.getLogger(__name__)

AUDIT_TOLERANCE = 1e-7
QUAD_TOL = 1e-10
# Relative jump cut for knots.  The fit near zero can carry weights ~1e8, so
# the generic 1e-8 cut would hide genuine interior knots.
KNOT_THRESHOLD = 1e-14
DEFAULT_BOOTSTRAP = 1000
_BOOT_TAG = 0xB007


def knot_count(k):
    """Number of knots examined around ``x0``: ``2k - 2``, but at least 2 so ``k = 1`` has a gap."""
    return max(2 * k - 2, 2)


def trial_rng(seed, k, n, trial):
    """Counter-based generator keyed by ``(seed, k, n, trial)``, independent of scheduling."""
    ss = np.random.SeedSequence([int(seed), int(k), int(n), int(trial)])
    return np.random.Generator(np.random.Philox(ss))


def select_window(knots, x0, count):
    """``count`` consecutive knots centred on ``x0``.

    When ``x0`` lies outside the knot range the nearest ``count`` knots are
    returned; with fewer than ``count`` knots, all of them.
    """
    knots = np.asarray(knots, dtype=float)
    m = knots.size
    if m <= count:
        return knots.copy()
    i = int(np.searchsorted(knots, x0, side="right"))
    start = int(np.clip(i - count // 2, 0, m - count))
    return knots[start : start + count]


def largest_interval_midpoint(nodes):
    """Midpoint of the longest knot interval, leftmost on ties."""
    nodes = np.asarray(nodes, dtype=float)
    j = int(np.argmax(np.diff(nodes)))
    return 0.5 * (nodes[j] + nodes[j + 1])


def _check_sign(density, k, x0):
    gk = float(density.deriv(x0, k))
    if not (-1) ** k * gk > 0:
        raise ValueError(f"(-1)^k g0^(k)(x0) must be positive; got {(-1) ** k * gk:g} at x0={x0}")


@dataclass(frozen=True)
class InequalityAudit:
    """One evaluation of ``g0^{(k)}(tau) e_k(tau) <= E_n + R_n`` at ``tau = tau_bar``.

    ``expectation`` and ``remainder`` are the exact forms for which the
    inequality is equivalent to ``H_n(tau) >= Y_n(tau)``; the ``literal_*``
    fields hold the literal one-sided variants for comparison.
    """

    k: int
    nodes: tuple
    tau_bar: float
    lhs: float = float("nan")
    expectation: float = float("nan")
    remainder: float = float("nan")
    tolerance: float = float("nan")
    holds: bool = True
    skipped: bool = False
    reason: str = ""
    e_k: float = float("nan")
    gk_tau: float = float("nan")
    fit_gap: float = float("nan")
    literal_expectation: float = float("nan")
    literal_remainder: float = float("nan")
    envelope_max: float = float("nan")
    condition: float = float("nan")

    @property
    def margin(self):
        """``E_n + R_n - lhs``; nonnegative up to tolerance for an exact fit."""
        return self.expectation + self.remainder - self.lhs

    def to_dict(self):
        d = asdict(self)
        d["nodes"] = list(self.nodes)
        d["margin"] = self.margin
        return d


def _b_matrix(u, k, x):
    """``b_u(x_j)`` for each ``u`` (rows) and ``x_j`` (columns)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))[:, None]
    return truncated_power(u, k, np.asarray(x, dtype=float)[None, :])


def _hermite_of_b(alpha, beta, nodes, k, u):
    """``H_k[b_u](tau)`` from cardinal weights, vectorized over ``u``."""
    return _b_matrix(u, k, nodes) @ alpha + _b_matrix(u, k - 1, nodes) @ beta


def _signed_measure_integral(func, samples, density, lo, hi, points):
    """``int_{[lo, hi]} func d(G_n - G_0)``: exact atom sum minus adaptive quadrature.

    With ``samples=None`` the empirical measure is replaced by ``G_0`` itself
    and the result is zero.
    """
    inner = sorted(p for p in points if lo < p < hi)
    smooth, _ = scipy.integrate.quad(
        lambda u: float(func(u)[0]) * float(density.pdf(u)),
        lo,
        hi,
        points=inner or None,
        epsabs=QUAD_TOL * 1e-3,
        epsrel=QUAD_TOL,
        limit=400,
    )
    if samples is None:
        return smooth - smooth
    x = np.asarray(samples, dtype=float)
    inside = x[(x >= lo) & (x <= hi)]
    atoms = float(np.sum(func(inside))) / x.size if inside.size else 0.0
    return atoms - smooth


def _remainder_values(nodes, k, tau, density, two_sided=True):
    """``r(a_j)`` and ``r'(a_j)`` for the Taylor remainder of ``Y`` about ``tau``."""
    deg = 2 * k - 1
    g_tau = float(density.deriv(tau, k))

    def delta(t):
        return float(density.deriv(t, k)) - g_tau

    vals, slopes = [], []
    for a in nodes:
        if a >= tau:
            v = scipy.integrate.quad(
                lambda t: (a - t) ** deg * delta(t), tau, a, epsabs=0.0, epsrel=QUAD_TOL
            )[0]
            s = scipy.integrate.quad(
                lambda t: (a - t) ** (deg - 1) * delta(t), tau, a, epsabs=0.0, epsrel=QUAD_TOL
            )[0]
        elif two_sided:
            v = scipy.integrate.quad(
                lambda t: (t - a) ** deg * delta(t), a, tau, epsabs=0.0, epsrel=QUAD_TOL
            )[0]
            s = -scipy.integrate.quad(
                lambda t: (t - a) ** (deg - 1) * delta(t), a, tau, epsabs=0.0, epsrel=QUAD_TOL
            )[0]
        else:
            v = s = 0.0
        vals.append(v / factorial(deg))
        slopes.append(s / factorial(deg - 1))
    return np.array(vals), np.array(slopes)


def inequality_audit(fit, samples, truth="exponential", tau_bar=None, nodes=None,
                     tolerance=AUDIT_TOLERANCE) -> InequalityAudit:
    """Check the interpolation inequality on ``2k - 2`` consecutive fitted knots.

    Args:
        fit: an ``LseFit`` with ``k >= 2``.
        samples: the ``SampleSet`` (or array) the fit was computed from.
        truth: density with analytic ``pdf`` and ``deriv``.
        tau_bar: evaluation point strictly inside the node span, not a node.
            Defaults to the midpoint of the largest node interval.
        nodes: the ``2k - 2`` knots; defaults to the fitted knots around ``tau_bar``.
        tolerance: relative to ``tolerance_scale`` of the sample.

    Raises:
        ValueError: ``k < 2``, or neither ``tau_bar`` nor ``nodes`` given, or
            ``tau_bar`` outside the node span or on a node.
    """
    k = fit.k
    if k < 2:
        raise ValueError("the inequality audit needs k >= 2 (no Hermite interpolation for k = 1)")
    truth = parse_density(truth)
    obs = samples.observations if isinstance(samples, SampleSet) else np.asarray(samples, float)
    q = 2 * k - 2
    if nodes is None:
        if tau_bar is None:
            raise ValueError("give tau_bar or nodes")
        nodes = select_window(extract_knots(fit, KNOT_THRESHOLD), tau_bar, q)
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size != q:
        return InequalityAudit(k, tuple(nodes.tolist()), float("nan"), skipped=True,
                               reason=f"only {nodes.size} knots available, need {q}")
    if tau_bar is None:
        tau_bar = largest_interval_midpoint(nodes)
    tau_bar = float(tau_bar)
    if not (nodes[0] < tau_bar < nodes[-1]) or np.any(nodes == tau_bar):
        raise ValueError(f"tau_bar={tau_bar} must lie strictly inside the node span and off the nodes")
    try:
        op = HermiteOperator(nodes, k)
    except ConditioningError as err:
        return InequalityAudit(k, tuple(nodes.tolist()), tau_bar, skipped=True, reason=str(err))
    alpha, beta = op.cardinal_weights(tau_bar)

    # f0 shifted to (x - tau)^{2k}/(2k)!: same e_k (degree < 2k terms are reproduced), no cancellation
    d = nodes - tau_bar
    e_k = -(alpha @ (d ** (2 * k) / factorial(2 * k)) + beta @ (d ** (2 * k - 1) / factorial(2 * k - 1)))
    gk = float(truth.deriv(tau_bar, k))
    lhs = gk * e_k

    lo, hi = nodes[0], nodes[-1]
    pts = list(nodes) + [tau_bar]

    def phi(u):
        return _hermite_of_b(alpha, beta, nodes, k, u) - truncated_power(np.atleast_1d(u), k, tau_bar)

    def hb(u):
        return _hermite_of_b(alpha, beta, nodes, k, u)

    expectation = _signed_measure_integral(phi, obs, truth, lo, hi, pts)
    literal_expectation = _signed_measure_integral(hb, obs, truth, lo, hi, pts)
    rv, rs = _remainder_values(nodes, k, tau_bar, truth, two_sided=True)
    remainder = float(alpha @ rv + beta @ rs)
    pv, ps = _remainder_values(nodes, k, tau_bar, truth, two_sided=False)
    literal_remainder = float(alpha @ pv + beta @ ps)

    ugrid = np.union1d(np.linspace(lo, hi, 513), nodes)
    envelope = float(np.max(np.abs(hb(ugrid))))
    tol = tolerance * tolerance_scale(obs, k)
    holds = bool(lhs <= expectation + remainder + tol)
    return InequalityAudit(
        k=k,
        nodes=tuple(nodes.tolist()),
        tau_bar=tau_bar,
        lhs=float(lhs),
        expectation=float(expectation),
        remainder=remainder,
        tolerance=tol,
        holds=holds,
        e_k=float(e_k),
        gk_tau=gk,
        fit_gap=float(fit.fenchel_gap(tau_bar)),
        literal_expectation=float(literal_expectation),
        literal_remainder=literal_remainder,
        envelope_max=envelope,
        condition=op.condition,
    )


@dataclass(frozen=True)
class GapTrialResult:
    n: int
    k: int
    x0: float
    knots_near_x0: np.ndarray
    gap: float
    min_adjacent_gap: float
    noncoalescence_stat: float
    seed: int
    trial: int = 0
    degenerate: bool = False
    failed: bool = False
    message: str = ""
    n_knots: int = 0
    audit: InequalityAudit | None = field(default=None, repr=False)

    CSV_COLUMNS = (
        "k", "n", "trial", "seed", "x0", "gap", "min_adjacent_gap",
        "noncoalescence_stat", "degenerate", "failed",
    )

    def row(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def run_trial(n, k, x0=1.0, density="exponential", seed=0, trial=0, audit=False,
              config: SolverConfig | None = None) -> GapTrialResult:
    """Sample, fit, and measure the knot gap around ``x0`` for one trial.

    Solver failures are recorded (``failed=True``) rather than raised.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    density = parse_density(density)
    _check_sign(density, k, x0)
    rng = trial_rng(seed, k, n, trial)
    samples = SampleSet(density.sample(rng, n), seed=int(seed), source=density.name)
    nan = float("nan")
    try:
        fit = fit_lse(samples, k, config)
    except ConvergenceError as err:
        return GapTrialResult(n, k, x0, np.zeros(0), nan, nan, nan, int(seed), trial,
                              degenerate=False, failed=True, message=str(err))
    knots = extract_knots(fit, KNOT_THRESHOLD)
    q = knot_count(k)
    window = select_window(knots, x0, q)
    degenerate = knots.size < q
    if window.size >= 2:
        adj = np.diff(window)
        gap = float(window[-1] - window[0])
        min_adj = float(adj.min())
        stat = float(np.max(1.0 / (n ** (1.0 / (2 * k + 1)) * adj)))
    else:
        gap = min_adj = stat = nan
    rec = None
    if audit and k >= 2 and not degenerate:
        rec = inequality_audit(fit, samples, density, nodes=window)
    return GapTrialResult(n, k, x0, window, gap, min_adj, stat, int(seed), trial,
                          degenerate=bool(degenerate), failed=False,
                          n_knots=int(knots.size), audit=rec)


def _trial_task(args):
    return run_trial(*args)


def resolve_workers(workers=None):
    """Worker count: ``KMONO_WORKERS`` overrides, then the argument, then the CPU count."""
    env = os.environ.get("KMONO_WORKERS")
    if env:
        return max(1, int(env))
    if workers:
        return max(1, int(workers))
    return os.cpu_count() or 1


def run_trials(k, n_values, trials_per_n, x0=1.0, seed=0, density="exponential",
               workers=None, audit=False, config=None):
    """All trials of a design, ordered by ``(n, trial)`` regardless of scheduling."""
    tasks = [(n, k, x0, density, seed, t, audit, config) for n in n_values for t in range(trials_per_n)]
    workers = resolve_workers(workers)
    if workers == 1 or len(tasks) <= 1:
        return [_trial_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def _ls_slope(x, y):
    """Least-squares slopes of each row of ``y`` against ``x``."""
    xc = x - x.mean()
    return (y - y.mean(axis=-1, keepdims=True)) @ xc / (xc @ xc)


@dataclass
class RateEstimate:
    k: int
    n_values: list
    median_gaps: list
    slope: float
    slope_ci: tuple
    trials_per_n: int
    degenerate_fraction: list = field(default_factory=list)
    failed_counts: list = field(default_factory=list)
    warning: str = ""
    noncoalescence_quantiles: dict = field(default_factory=dict)
    noncoalescence_trend: float = float("nan")
    audit_violations: int = 0
    audit_skipped: int = 0
    n_bootstrap: int = 0
    trials: list = field(default_factory=list, repr=False)

    def covers(self, value):
        lo, hi = self.slope_ci
        return bool(lo <= value <= hi)

    def to_dict(self):
        return {
            "k": self.k,
            "n_values": list(self.n_values),
            "median_gaps": list(self.median_gaps),
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "trials_per_n": self.trials_per_n,
            "degenerate_fraction": list(self.degenerate_fraction),
            "failed_counts": list(self.failed_counts),
            "warning": self.warning,
            "noncoalescence_quantiles": {str(n): q for n, q in self.noncoalescence_quantiles.items()},
            "noncoalescence_trend": self.noncoalescence_trend,
            "audit_violations": self.audit_violations,
            "audit_skipped": self.audit_skipped,
            "n_bootstrap": self.n_bootstrap,
        }


NONCOALESCENCE_LEVELS = (0.5, 0.9, 0.99)


def summarize(trials, k, n_values, trials_per_n, seed=0, n_boot=DEFAULT_BOOTSTRAP) -> RateEstimate:
    """Median gaps, log-log slope with a percentile bootstrap interval, and diagnostics.

    Gaps enter the medians only from trials that neither failed nor were
    degenerate.  The bootstrap resamples trials within each ``n``.
    """
    n_values = list(n_values)
    by_n = {n: [t for t in trials if t.n == n] for n in n_values}
    gaps, medians, degen, failed, quants, qmed = [], [], [], [], {}, []
    for n in n_values:
        ts = by_n[n]
        g = np.array([t.gap for t in ts if not (t.failed or t.degenerate) and np.isfinite(t.gap)])
        gaps.append(g)
        medians.append(float(np.median(g)) if g.size else float("nan"))
        degen.append(sum(t.degenerate for t in ts) / max(len(ts), 1))
        failed.append(sum(t.failed for t in ts))
        st = np.array([t.noncoalescence_stat for t in ts if np.isfinite(t.noncoalescence_stat)])
        quants[n] = {f"q{int(100 * p)}": float(np.quantile(st, p)) for p in NONCOALESCENCE_LEVELS} if st.size else {}
        qmed.append(float(np.median(st)) if st.size else float("nan"))
    warn = []
    if any(f > 0.5 for f in degen):
        warn.append("more than half of the trials were degenerate at some n")
    logn = np.log(np.array(n_values, dtype=float))
    ok = np.array([g.size > 0 for g in gaps])
    slope, ci = float("nan"), (float("nan"), float("nan"))
    if ok.sum() >= 2:
        x = logn[ok]
        slope = float(_ls_slope(x, np.log(np.array(medians)[ok])))
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(k), _BOOT_TAG])))
        boot = np.empty((n_boot, int(ok.sum())))
        for col, g in enumerate(g for g in gaps if g.size):
            idx = rng.integers(0, g.size, size=(n_boot, g.size))
            boot[:, col] = np.median(g[idx], axis=1)
        slopes = _ls_slope(x, np.log(boot))
        ci = (float(np.quantile(slopes, 0.025)), float(np.quantile(slopes, 0.975)))
    else:
        warn.append("fewer than two n values with usable gaps; no slope")
    trend = float("nan")
    qm = np.array(qmed)
    if np.sum(np.isfinite(qm)) >= 2:
        fin = np.isfinite(qm) & (qm > 0)
        trend = float(_ls_slope(logn[fin], np.log(qm[fin])))
    audits = [t.audit for t in trials if t.audit is not None]
    viol = sum(1 for a in audits if not a.skipped and not a.holds)
    skipped = sum(1 for a in audits if a.skipped)
    if warn:
        for w in warn:
            warnings.warn(w, RuntimeWarning, stacklevel=2)
    return RateEstimate(
        k=k, n_values=n_values, median_gaps=medians, slope=slope, slope_ci=ci,
        trials_per_n=trials_per_n, degenerate_fraction=degen, failed_counts=failed,
        warning="; ".join(warn), noncoalescence_quantiles=quants, noncoalescence_trend=trend,
        audit_violations=viol, audit_skipped=skipped, n_bootstrap=n_boot, trials=list(trials),
    )


def estimate_rate(k, n_values, trials_per_n, x0=1.0, seed=0, density="exponential",
                  workers=None, audit=False, config=None, n_boot=DEFAULT_BOOTSTRAP,
                  strict=True) -> RateEstimate:
    """Run a design and estimate the knot-gap exponent.

    ``strict`` enforces at least three increasing ``n`` values, at least 20
    trials per ``n`` and at least 200 bootstrap resamples.
    """
    n_values = [int(n) for n in n_values]
    if strict:
        if len(n_values) < 3 or any(b <= a for a, b in zip(n_values, n_values[1:])):
            raise ValueError("need at least three increasing n values")
        if trials_per_n < 20:
            raise ValueError("need at least 20 trials per n")
        if n_boot < 200:
            raise ValueError("need at least 200 bootstrap resamples")
    trials = run_trials(k, n_values, trials_per_n, x0, seed, density, workers, audit, config)
    return summarize(trials, k, n_values, trials_per_n, seed, n_boot)


@dataclass(frozen=True)
class LimitConstants:
    x0: float
    k: int
    c: tuple


def limit_constants(k, x0, density="exponential") -> LimitConstants:
    """``c_j = {g0^{k-j} ((-1)^k g0^{(k)} / k!)^{2j+1}}^{1/(2k+1)}`` at ``x0``, ``j = 0..k-1``."""
    density = parse_density(density)
    g = float(density.pdf(x0))
    a = (-1) ** k * float(density.deriv(x0, k)) / factorial(k)
    if not g > 0:
        raise ValueError(f"g0(x0) must be positive, got {g:g}")
    if not a > 0:
        raise ValueError(f"(-1)^k g0^(k)(x0) must be positive, got {a * factorial(k):g}")
    c = tuple(float((g ** (k - j) * a ** (2 * j + 1)) ** (1.0 / (2 * k + 1))) for j in range(k))
    return LimitConstants(float(x0), int(k), c)


@dataclass(frozen=True)
class YkPath:
    """``Y_k`` on a symmetric uniform grid, with its Brownian and drift parts.

    For ``t < 0`` the path ``W`` stores ``int_t^0 dW`` so that ``Y_1 - drift == W``
    on the whole grid.
    """

    k: int
    grid: np.ndarray
    values: np.ndarray
    seed: int
    W: np.ndarray = field(repr=False)
    drift: np.ndarray = field(repr=False)

    @property
    def stochastic(self):
        return self.values - self.drift


def _one_side_integral(k, xi, h):
    """``int_0^t (t - s)^{k-1} / (k-1)! dW(s)`` at ``t = h, 2h, ...`` by midpoint kernels."""
    m = xi.size
    lags = (np.arange(m) + 0.5) * h
    kern = lags ** (k - 1) / factorial(k - 1)
    return np.convolve(xi, kern)[:m]


def simulate_Yk(k, T, step, seed=0) -> YkPath:
    """Simulate ``Y_k`` on ``[-T, T]`` with grid spacing ``step``.

    Gaussian increments on each cell drive both sides; on ``t < 0`` the
    integral ``int_t^0 (t - s)^{k-1} / (k-1)! dW(s)`` is taken as printed,
    so its sign is ``(-1)^{k-1}`` times the mirrored forward integral.
    """
    if not (T > 0 and step > 0):
        raise ValueError("T and step must be positive")
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    m = int(round(T / step))
    if m < 1:
        raise ValueError("step larger than T")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    xi = rng.standard_normal((2, m)) * np.sqrt(step)
    pos = _one_side_integral(k, xi[0], step)
    # mirrored: cell j covers [-(j+1) h, -j h]; (t - s) = -(|t| - |s|)
    neg = (-1) ** (k - 1) * _one_side_integral(k, xi[1], step)
    grid = step * np.arange(-m, m + 1)
    stoch = np.concatenate([neg[::-1], [0.0], pos])
    W = np.concatenate([np.cumsum(xi[1])[::-1], [0.0], np.cumsum(xi[0])])
    drift = (-1) ** k * factorial(k) * grid ** (2 * k) / factorial(2 * k)
    return YkPath(k, grid, stoch + drift, int(seed), W, drift)


def stochastic_variance(k, t):
    """``Var int_0^t (t - s)^{k-1}/(k-1)! dW = t^{2k-1} / ((2k-1) ((k-1)!)^2)``."""
    t = abs(t)
    return t ** (2 * k - 1) / ((2 * k - 1) * factorial(k - 1) ** 2)
