"""Independent reference implementations used as test oracles."""

from math import factorial

import numpy as np


def grenander_slopes(observations):
    """Least concave majorant of the empirical c.d.f. by a monotone-chain hull.

    Returns ``(x, slope)`` where ``slope[i]`` is the LCM slope on
    ``[x[i], x[i+1])`` for sorted distinct sample points ``x`` (with ``0``
    prepended) so that right-continuous evaluation is ``slope[searchsorted]``.
    """
    x = np.sort(np.asarray(observations, dtype=float))
    n = x.size
    ux, counts = np.unique(x, return_counts=True)
    px = np.concatenate([[0.0], ux])
    py = np.concatenate([[0.0], np.cumsum(counts) / n])
    hull = [0]
    for i in range(1, px.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it lies on or below the chord a -> i
            cross = (px[b] - px[a]) * (py[i] - py[a]) - (py[b] - py[a]) * (px[i] - px[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    slope = np.zeros(px.size)
    for a, b in zip(hull[:-1], hull[1:]):
        slope[a:b] = (py[b] - py[a]) / (px[b] - px[a])
    return px, slope


def grenander_at(observations, x):
    px, slope = grenander_slopes(observations)
    idx = np.searchsorted(px, x, side="right") - 1
    return np.where(idx < px.size - 1, slope[np.clip(idx, 0, None)], 0.0)


def _kernel(theta, k, x, closed=False):
    d = theta[None, :] - x[:, None]
    if k == 1:
        # the data term counts X <= theta; for the L2 term the endpoint is irrelevant
        return (d >= 0).astype(float) if closed else (d > 0).astype(float)
    return np.where(d > 0, d, 0.0) ** (k - 1) / factorial(k - 1)


def lawson_hanson_qp(G, c, tol=1e-13, max_iter=1000):
    """Minimize ``0.5 w'Gw - c'w`` over ``w >= 0`` by the Lawson-Hanson active set."""
    m = c.size
    w = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    scale = np.max(np.abs(c)) + 1e-300
    for _ in range(max_iter):
        grad = c - G @ w
        grad[passive] = -np.inf
        j = int(np.argmax(grad))
        if grad[j] <= tol * scale:
            break
        passive[j] = True
        while True:
            idx = np.flatnonzero(passive)
            z = np.zeros(m)
            z[idx] = np.linalg.lstsq(G[np.ix_(idx, idx)], c[idx], rcond=None)[0]
            if np.all(z[idx] > 0):
                w = z
                break
            neg = idx[z[idx] <= 0]
            alpha = np.min(w[neg] / (w[neg] - z[neg]))
            w = w + alpha * (z - w)
            passive &= w > 0
            w[~passive] = 0.0
    return w


def grid_qp_objective(observations, k, grid):
    """Least-squares criterion minimized over nonnegative mixtures on a fixed grid.

    The Gram matrix is assembled with Gauss-Legendre rules that are exact for
    the piecewise polynomials involved; any nonnegative grid mixture is
    feasible, so the value is an upper bound for the continuous problem.
    """
    obs = np.asarray(observations, dtype=float)
    grid = np.sort(np.asarray(grid, dtype=float))
    bp = np.concatenate([[0.0], grid])
    gx, gw = np.polynomial.legendre.leggauss(max(k, 1))
    lo, hi = bp[:-1], bp[1:]
    xq = ((hi - lo)[:, None] * (gx[None, :] + 1) / 2 + lo[:, None]).ravel()
    wq = ((hi - lo)[:, None] * gw[None, :] / 2).ravel()
    A = np.sqrt(wq)[:, None] * _kernel(grid, k, xq)
    c = _kernel(grid, k, obs, closed=True).mean(axis=0)
    # unit-norm columns keep the active-set solves well scaled
    s = np.linalg.norm(A, axis=0)
    As = A / s
    w = lawson_hanson_qp(As.T @ As, c / s) / s
    r = A @ w
    return 0.5 * float(r @ r) - float(c @ w)


def default_grid(observations, k, size=2000):
    """Half uniform, half geometric (resolving the spike near zero) support grid."""
    m = float(np.max(observations))
    top = (2 * k) * m
    half = size // 2
    uni = np.linspace(top / half, top, half)
    geo = np.geomspace(1e-5 * m, m, size - half)
    return np.unique(np.concatenate([uni, geo]))
