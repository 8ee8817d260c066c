"""Mixing times of reflected Brownian motion on [0, 1].

The transition density with respect to Lebesgue measure is the cosine series

    q_t(x, y) = 1 + 2 sum_{k >= 1} exp(-k^2 pi^2 t) cos(k pi x) cos(k pi y),

i.e. the heat semigroup of ``d^2/dx^2`` with Neumann boundary conditions.
Everything here is computed from the series alone, independently of the
graph code, so it can serve as an oracle for path graphs.
"""
from __future__ import annotations

import math

import numpy as np

SERIES_TOL = 1e-14
GRID_POINTS = 2048
TIME_TOL = 1e-10


def series_terms(t, tol=SERIES_TOL):
    """Modes ``k`` whose weight ``exp(-k^2 pi^2 t)`` is at least ``tol``."""
    if t <= 0:
        raise ValueError("time must be positive")
    kmax = int(math.floor(math.sqrt(-math.log(tol) / (math.pi ** 2 * t)))) + 1
    k = np.arange(1, kmax + 1)
    w = np.exp(-(k * math.pi) ** 2 * t)
    keep = w >= tol
    return k[keep], w[keep]


def rbm_kernel(t, x, y, tol=SERIES_TOL):
    """``q_t(x, y)`` on arrays ``x`` (rows) and ``y`` (columns)."""
    k, w = series_terms(t, tol)
    cx = np.cos(np.pi * np.outer(np.atleast_1d(x), k))
    cy = np.cos(np.pi * np.outer(np.atleast_1d(y), k))
    return 1.0 + 2.0 * (cx * w) @ cy.T


def _trapezoid_weights(n):
    w = np.full(n, 1.0 / (n - 1))
    w[0] = w[-1] = 0.5 / (n - 1)
    return w


def rbm_distances(t, p, points=GRID_POINTS, tol=SERIES_TOL):
    """``D_p(x, t) = ||q_t(x, .) - 1||_{L^p(dy)}`` on a uniform x-grid including 0 and 1."""
    x = np.linspace(0.0, 1.0, points)
    dev = rbm_kernel(t, x, x, tol) - 1.0
    if p == math.inf:
        return x, np.max(np.abs(dev), axis=1)
    w = _trapezoid_weights(points)
    return x, (np.abs(dev) ** p @ w) ** (1.0 / p)


def rbm_sup_distance(t, p, points=GRID_POINTS, tol=SERIES_TOL):
    x, d = rbm_distances(t, p, points, tol)
    return float(d.max()), float(x[np.argmax(d)])


def rbm_mixing_time(p=math.inf, threshold=0.25, points=GRID_POINTS, tol=TIME_TOL):
    """``inf{t > 0: sup_x D_p(x, t) <= threshold}`` by bisection on ``t``.

    ``sup_x D_p(x, t)`` is non-increasing in ``t`` (the semigroup contracts every
    ``L^p``), so bisection finds the crossing.  Returns ``(t, argmax_x)``.
    """
    if p in ("inf", "infinity"):
        p = math.inf
    p = float(p)
    lo, hi = 1e-4, 1.0
    while rbm_sup_distance(hi, p, points)[0] > threshold:
        hi *= 2.0
    while rbm_sup_distance(lo, p, points)[0] <= threshold:
        lo /= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rbm_sup_distance(mid, p, points)[0] <= threshold:
            hi = mid
        else:
            lo = mid
    return hi, rbm_sup_distance(hi, p, points)[1]


def path_time_scale(N, spacing=None):
    """Time scale ``gamma(N)`` matching the walk on the path with the series.

    One step of the walk moves ``+-spacing`` (default ``1/N``), so it has
    variance ``spacing^2`` per step; the series semigroup has generator
    ``d^2/dx^2``, i.e. variance ``2 t`` at time ``t``.  Matching gives
    ``gamma = 2 / spacing^2``.
    """
    if spacing is None:
        spacing = 1.0 / N
    return 2.0 / spacing ** 2


def walk_step_variance(g, x):
    """Variance of one step of the walk from ``x`` in the graph metric."""
    a = g.adjacency()
    nb = a.indices[a.indptr[x]:a.indptr[x + 1]]
    w = a.data[a.indptr[x]:a.indptr[x + 1]]
    d = np.array([g.distance(x, int(y)) for y in nb])
    return float(np.sum(w * d ** 2) / np.sum(w))
