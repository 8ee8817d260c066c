"""Transition densities, smoothed kernels and L^p mixing times.

Two backends are available.  ``spectral`` diagonalises the symmetrised walk
once and evaluates any kernel entry from the eigenpairs; ``matrix-power``
propagates rows of ``P^m`` forward with sparse products.  Graphs built with
``exact=True`` additionally get Fraction arithmetic for pointwise queries and
for threshold decisions that land within ``1e-9`` of the cut-off.

Interpolated mixing times are computed on the segment ``[m* - 1, m*]`` where
``m*`` is the integer mixing time: the knot values of ``m -> D_p(x, m)`` are
non-increasing and the interpolated curve is convex on each segment, so the
set where it stays below the threshold is a single terminal interval.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import NotMixedWithinHorizon, SizeLimitExceeded
from .graph import stationary

INF = float("inf")
FLOAT_TOL = 1e-12
TIE_BAND = 1e-9
EXACT_LIMIT = 500


def parse_p(p):
    """Accept ``1``, ``2.5``, ``"inf"`` and friends; return a float in [1, inf]."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo", "∞"):
            return INF
        p = float(p)
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def lp_norms(rows, pi, p):
    """Row-wise ``L^p(pi)`` norms of a 2-d array (``p = inf`` ignores ``pi``)."""
    a = np.abs(rows)
    if p == INF:
        return a.max(axis=1)
    if p == 1:
        return a @ pi
    if p == 2:
        return np.sqrt((a * a) @ pi)
    return ((a ** p) @ pi) ** (1.0 / p)


def _exact_norm(vals, pi, p):
    # vals: centred kernel row as Fractions.  Returns a Fraction for p in {1, inf},
    # the squared norm for p = 2, and a float otherwise.
    if p == INF:
        return max(abs(v) for v in vals)
    if p == 1:
        return sum(w * abs(v) for w, v in zip(pi, vals))
    if p == 2:
        return sum(w * v * v for w, v in zip(pi, vals))
    return float(sum(w * abs(float(v)) ** p for w, v in zip(pi, vals))) ** (1.0 / p)


def _exact_leq(vals, pi, p, threshold):
    thr = Fraction(threshold)
    val = _exact_norm(vals, pi, p)
    if p == 2:
        return val <= thr * thr
    if p in (1, INF):
        return val <= thr
    return val <= float(threshold) + FLOAT_TOL


def smoothed_coefficients(lam, t):
    """Spectral weights of ``q_t - 1`` at real time ``t`` (one per eigenvalue)."""
    m = int(math.floor(t))
    s = t - m
    base = np.power(lam, m) * (1.0 + lam) / 2.0
    if s == 0:
        return base
    return base * (1.0 - s + s * lam)


@dataclass
class SpectralData:
    """Eigen-decomposition of the walk.

    ``eigenvectors[:, k]`` is orthonormal in ``L^2(pi)``; column 0 is the
    constant function 1.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gap: float


@dataclass
class MixingReport:
    p: float
    threshold: float
    mode: str
    t_mix: float
    t_integer: int
    vertices: np.ndarray
    per_vertex: Optional[np.ndarray] = None
    per_vertex_integer: Optional[np.ndarray] = None
    curve_m: Optional[np.ndarray] = None
    curves: Optional[np.ndarray] = None
    sup_curve: Optional[np.ndarray] = None
    approximate_sup: bool = False
    exact: bool = False
    backend: str = "spectral"
    horizon: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self):
        def arr(a):
            return None if a is None else np.asarray(a).tolist()
        return {
            "p": "inf" if self.p == INF else self.p,
            "threshold": self.threshold,
            "mode": self.mode,
            "t_mix": self.t_mix,
            "t_integer": self.t_integer,
            "vertices": arr(self.vertices),
            "per_vertex": arr(self.per_vertex),
            "per_vertex_integer": arr(self.per_vertex_integer),
            "curve_m": arr(self.curve_m),
            "curves": arr(self.curves),
            "sup_curve": arr(self.sup_curve),
            "approximate_sup": self.approximate_sup,
            "exact": self.exact,
            "backend": self.backend,
            "horizon": self.horizon,
            **self.extra,
        }

    def to_csv(self):
        """Two columns: ``m`` and ``sup_x D_p(x, m)``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "sup_D"])
        if self.curve_m is not None:
            for m, d in zip(self.curve_m, self.sup_curve):
                w.writerow([int(m), repr(float(d))])
        return buf.getvalue()


def _least_true(pred, horizon, start=1):
    """Least integer m >= start with pred(m) true, for monotone pred."""
    lo, hi = start - 1, start
    while not pred(hi):
        if hi >= horizon:
            raise NotMixedWithinHorizon(f"not mixed within horizon {horizon}")
        lo, hi = hi, min(2 * hi, horizon)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _segment_entry(f, threshold, tol=1e-12):
    """Least s in [0, 1] with f(s) <= threshold given f convex and f(1) <= threshold."""
    if f(0.0) <= threshold + FLOAT_TOL:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) <= threshold + FLOAT_TOL:
            hi = mid
        else:
            lo = mid
    return hi


def default_horizon(g):
    """``64 * mu(G) * diam_R`` with diam_R computed exactly up to 2000 vertices and
    replaced by the series bound ``(n - 1) / min weight`` beyond."""
    mass = g.total_mass()
    if g.n <= 2000:
        from .resistance import ResistanceOracle
        diam = ResistanceOracle(g).diameter().value
    else:
        diam = (g.n - 1) / float(g.min_weight())
    return max(2, int(math.ceil(64 * mass * diam)))


class KernelEvaluator:
    """Kernel queries and mixing times for one graph.

    Parameters
    ----------
    g : WeightedGraph
    backend : {"auto", "spectral", "matrix-power"}
        ``auto`` picks spectral up to ``spectral_limit`` vertices.
    spectral_limit : int
        Largest graph the dense eigensolver is allowed to handle.
    sup_limit : int
        Beyond this many vertices global suprema use a vertex sample.
    """

    def __init__(self, g, backend="auto", spectral_limit=5000, sup_limit=5000,
                 sample_size=256, seed=0):
        self.graph = g
        self.n = g.n
        mu = g.vertex_weights()
        self.mu = mu
        self.mass = float(mu.sum())
        self.pi = mu / self.mass
        w = g.adjacency()
        self.P_sparse = sp.csr_matrix(sp.diags(1.0 / mu) @ w)
        self._PT = self.P_sparse.T.tocsr()
        if backend == "auto":
            backend = "spectral" if g.n <= spectral_limit else "matrix-power"
        if backend not in ("spectral", "matrix-power"):
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "spectral" and g.n > spectral_limit:
            raise SizeLimitExceeded(f"{g.n} vertices exceeds spectral limit {spectral_limit}")
        self.backend = backend
        self.spectral_limit = spectral_limit
        self.sup_limit = sup_limit
        self.sample_size = sample_size
        self.seed = seed
        self._spec = None
        self._exact = None
        self._exact_rows = {}
        self._dense_P = None

    # structure

    def transition_matrix(self):
        if self._dense_P is None:
            self._dense_P = self.P_sparse.toarray()
        return self._dense_P

    def spectral(self):
        """Eigen-decomposition of the pi-symmetrised transition operator."""
        if self._spec is None:
            if self.n > self.spectral_limit:
                raise SizeLimitExceeded(
                    f"{self.n} vertices exceeds spectral limit {self.spectral_limit}")
            w = self.graph.weight_matrix()
            d = 1.0 / np.sqrt(self.mu)
            s = w * d[:, None] * d[None, :]
            lam, u = np.linalg.eigh(s)
            lam, u = lam[::-1], u[:, ::-1]
            lam = np.clip(lam, -1.0, 1.0)
            phi = u / np.sqrt(self.pi)[:, None]
            if phi[0, 0] < 0:
                phi[:, 0] = -phi[:, 0]
            gap = 1.0 - lam[1]
            self._spec = SpectralData(lam, phi, float(gap))
            self._phi1 = phi[:, 1:]
            self._phi1sq = self._phi1 ** 2
            self._lam1 = lam[1:]
        return self._spec

    # exact arithmetic

    def _exact_setup(self):
        if self._exact is None:
            g = self.graph if self.graph.exact else self.graph.as_exact()
            st = stationary(g)
            nbrs = [[] for _ in range(g.n)]
            for u, v, w in g.edges:
                nbrs[u].append((v, w / st.weights[u]))
                nbrs[v].append((u, w / st.weights[v]))
            self._exact = (st, nbrs)
        return self._exact

    def exact_row(self, x, m):
        """Row ``P^m(x, .)`` as Fractions (cached incrementally)."""
        st, nbrs = self._exact_setup()
        m0, row = self._exact_rows.get(x, (0, None))
        if row is None or m0 > m:
            m0 = 0
            row = [Fraction(0)] * self.n
            row[x] = Fraction(1)
        while m0 < m:
            new = [Fraction(0)] * self.n
            for z, mass in enumerate(row):
                if mass:
                    for y, pr in nbrs[z]:
                        new[y] += mass * pr
            row = new
            m0 += 1
        self._exact_rows[x] = (m0, row)
        return row

    def exact_centered(self, x, m):
        """``q_m(x, .) - 1`` in exact arithmetic."""
        st, _ = self._exact_setup()
        a = list(self.exact_row(x, m))
        b = self.exact_row(x, m + 1)
        return [(u + v) / (2 * p) - 1 for u, v, p in zip(a, b, st.probabilities)]

    # float row evaluation

    def _power_rows(self, xs, m, count):
        """Rows of P^m, ..., P^(m+count-1) for the start vertices ``xs``."""
        xs = np.atleast_1d(xs)
        if self.n <= 2000 and m > 64:
            v = np.linalg.matrix_power(self.transition_matrix(), m)[xs]
        else:
            v = np.zeros((len(xs), self.n))
            v[np.arange(len(xs)), xs] = 1.0
            for _ in range(m):
                v = (self._PT @ v.T).T
        out = [v]
        for _ in range(count - 1):
            v = (self._PT @ v.T).T
            out.append(v)
        return out

    def centered_rows(self, t, xs):
        """``q_t(x, y) - 1`` for x in ``xs`` and every y, at real time ``t >= 0``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        if self.backend == "spectral":
            self.spectral()
            c = smoothed_coefficients(self._lam1, t)
            return (self._phi1[xs] * c) @ self._phi1.T
        m = int(math.floor(t))
        s = t - m
        if s == 0:
            a, b = self._power_rows(xs, m, 2)
            return (a + b) / (2 * self.pi) - 1.0
        a, b, c = self._power_rows(xs, m, 3)
        return ((1 - s) * (a + b) + s * (b + c)) / (2 * self.pi) - 1.0

    # pointwise queries

    def density(self, m, x, y):
        """``p_m(x, y) = P_x(X_m = y) / pi(y)``."""
        m = int(m)
        if self.graph.exact:
            st, _ = self._exact_setup()
            return self.exact_row(x, m)[y] / st.probabilities[y]
        if self.backend == "spectral":
            spec = self.spectral()
            val = np.sum(np.power(self._lam1, m) * self._phi1[x] * self._phi1[y])
            return float(1.0 + val)
        return float(self._power_rows([x], m, 1)[0][0, y] / self.pi[y])

    def smoothed(self, m, x, y):
        """``q_m = (p_m + p_{m+1}) / 2``."""
        if self.graph.exact:
            return (self.density(m, x, y) + self.density(m + 1, x, y)) / 2
        return float(self.centered_rows(int(m), [x])[0, y] + 1.0)

    def interpolated(self, t, x, y):
        """Linear interpolation of ``m -> q_m(x, y)`` at real time ``t``."""
        if t < 0:
            raise ValueError("time must be nonnegative")
        m = math.floor(t)
        s = t - m
        if self.graph.exact:
            s = Fraction(s)
            a = self.smoothed(m, x, y)
            return a if s == 0 else (1 - s) * a + s * self.smoothed(m + 1, x, y)
        return float(self.centered_rows(t, [x])[0, y] + 1.0)

    def dp_distance(self, x, m, p):
        """``|| q_m(x, .) - 1 ||`` in ``L^p(pi)``; ``p = inf`` is the plain maximum.

        Exact graphs return a Fraction for integer ``m`` and ``p`` in {1, inf}.
        """
        p = parse_p(p)
        if self.graph.exact and float(m) == int(m):
            st, _ = self._exact_setup()
            vals = self.exact_centered(x, int(m))
            val = _exact_norm(vals, st.probabilities, p)
            if p == 2:
                return math.sqrt(val)
            return val
        rows = self.centered_rows(m, [x])
        return float(lp_norms(rows, self.pi, p)[0])

    def l2_identity_check(self, x, m):
        """Return ``(D_2(x, m)^2, q_{2m}(x, x) - 1)``.

        The left side is the weighted sum of squares of a kernel row, the right
        side a single diagonal entry at twice the time.
        """
        m = int(m)
        if self.graph.exact:
            st, _ = self._exact_setup()
            lhs = _exact_norm(self.exact_centered(x, m), st.probabilities, 2)
            rhs = self.exact_centered(x, 2 * m)[x]
            return lhs, rhs
        row = self.centered_rows(m, [x])[0]
        lhs = float(np.sum(self.pi * row * row))
        rhs = float(self.centered_rows(2 * m, [x])[0, x])
        return lhs, rhs

    # suprema over vertices

    def vertex_set(self):
        """Vertices over which the global supremum is taken, and whether it is sampled."""
        if self.n <= self.sup_limit:
            return np.arange(self.n), False
        rng = np.random.default_rng(self.seed)
        k = min(self.sample_size, self.n)
        xs = set(rng.choice(self.n, size=k, replace=False).tolist())
        if self.graph.root is not None:
            xs.add(self.graph.root)
        return np.array(sorted(xs)), True

    def distances_at(self, t, p, xs, block=512):
        """Vector of ``D_p(x, t)`` over ``xs``."""
        xs = np.asarray(xs)
        if self.backend == "spectral":
            self.spectral()
            c = smoothed_coefficients(self._lam1, t)
            if p == 2:
                return np.sqrt(np.maximum(self._phi1sq[xs] @ (c * c), 0.0))
        out = np.empty(len(xs))
        for i in range(0, len(xs), block):
            sl = xs[i:i + block]
            out[i:i + block] = lp_norms(self.centered_rows(t, sl), self.pi, p)
        return out

    def sup_distance(self, t, p, xs=None):
        """``max_x D_p(x, t)``; uses the positive-semidefinite shortcut for p = inf."""
        if xs is None:
            xs, _ = self.vertex_set()
        if self.backend == "spectral" and p == INF:
            self.spectral()
            c = smoothed_coefficients(self._lam1, t)
            if np.all(c >= 0):
                # PSD kernel: |K(x,y)| <= sqrt(K(x,x) K(y,y)), so the max sits on the diagonal
                if len(xs) == self.n:
                    return float(max(np.max(self._phi1sq @ c), 0.0))
        return float(np.max(self.distances_at(t, p, xs)))

    # mixing times

    def mixing_time(self, p=1, threshold=0.25, mode="integer", horizon=None,
                    per_vertex=None, curves=False, rational=None, vertices=None):
        """L^p mixing time of the graph.

        Parameters
        ----------
        p : float or "inf"
        threshold : float
            Cut-off for ``sup_x D_p``; 1/4 by default.
        mode : {"integer", "interpolated"}
        horizon : int, optional
            Largest time examined; defaults to ``64 mu(G) diam_R``.
        per_vertex : bool, optional
            Also compute per-vertex times (default: when ``n <= 1000``).
        curves : bool
            Record ``D_p(x, m)`` on a grid of times.
        rational : bool, optional
            Certify near-threshold decisions in exact arithmetic (default: when
            the graph was built exact and has at most 500 vertices).

        Returns
        -------
        MixingReport
        """
        p = parse_p(p)
        if mode not in ("integer", "interpolated"):
            raise ValueError(f"unknown mode {mode!r}")
        if horizon is None:
            horizon = default_horizon(self.graph)
        if vertices is None:
            xs, approx = self.vertex_set()
        else:
            xs, approx = np.asarray(vertices), len(vertices) < self.n
        if per_vertex is None:
            per_vertex = self.n <= 1000
        if rational is None:
            rational = self.graph.exact
        rational = bool(rational) and self.n <= EXACT_LIMIT and p in (1, 2, INF)
        thr = float(threshold)

        if self.backend == "matrix-power":
            rep = self._mixing_forward(p, thr, mode, horizon, xs, curves)
        else:
            rep = self._mixing_spectral(p, thr, mode, horizon, xs, per_vertex, curves,
                                        full=(not approx and len(xs) == self.n))
        rep.approximate_sup = approx
        if rational:
            self._certify_report(rep, p, threshold, xs, per_vertex)
            rep.exact = True
        if mode == "integer":
            rep.t_mix = rep.t_integer
            if rep.per_vertex_integer is not None:
                rep.per_vertex = rep.per_vertex_integer.astype(float)
        return rep

    def _mixing_spectral(self, p, thr, mode, horizon, xs, per_vertex, curves, full):
        self.spectral()

        def pred(m):
            return self.sup_distance(m, p, xs) <= thr + FLOAT_TOL

        if p == INF and full:
            # even times are decided from the diagonal alone
            j = _least_true(lambda j: pred(2 * j), (horizon + 1) // 2 + 1)
            m_star = 2 * j - 1 if pred(2 * j - 1) else 2 * j
        else:
            m_star = _least_true(pred, horizon)
        rep = MixingReport(p=p, threshold=thr, mode=mode, t_mix=float(m_star),
                           t_integer=int(m_star), vertices=xs, backend="spectral",
                           horizon=int(horizon))
        if mode == "interpolated":
            rep.t_mix = self._interp_global(p, thr, m_star, xs)
        if per_vertex:
            ints = np.empty(len(xs), dtype=np.int64)
            reals = np.empty(len(xs))
            for i, x in enumerate(xs):
                mi, ti = self._vertex_spectral(x, p, thr, m_star, mode)
                ints[i], reals[i] = mi, ti
            rep.per_vertex_integer = ints
            rep.per_vertex = reals
        if curves:
            grid = _curve_grid(m_star)
            mat = np.column_stack([self.distances_at(m, p, xs) for m in grid])
            rep.curve_m, rep.curves, rep.sup_curve = grid, mat, mat.max(axis=0)
        return rep

    def _interp_global(self, p, thr, m_star, xs):
        m0 = m_star - 1
        if self.backend == "spectral" and p == 2:
            return m0 + _segment_entry(lambda s: self.sup_distance(m0 + s, p, xs), thr)
        k0 = self._block_rows(m0, xs)
        k1 = self._block_rows(m_star, xs)
        if p == INF:
            f = lambda s: float(np.max(np.abs((1 - s) * k0 + s * k1)))
        else:
            f = lambda s: float(np.max(lp_norms((1 - s) * k0 + s * k1, self.pi, p)))
        return m0 + _segment_entry(f, thr)

    def _block_rows(self, t, xs):
        return self.centered_rows(t, xs)

    def _vertex_spectral(self, x, p, thr, cap, mode):
        def d(t):
            return float(lp_norms(self.centered_rows(t, [x]), self.pi, p)[0])

        m = _least_true(lambda m: d(m) <= thr + FLOAT_TOL, cap)
        if mode == "integer":
            return m, float(m)
        k0 = self.centered_rows(m - 1, [x])
        k1 = self.centered_rows(m, [x])
        f = lambda s: float(lp_norms((1 - s) * k0 + s * k1, self.pi, p)[0])
        return m, (m - 1) + _segment_entry(f, thr)

    def _mixing_forward(self, p, thr, mode, horizon, xs, curves):
        """Forward propagation of P^m rows for every start vertex in ``xs``."""
        xs = np.asarray(xs)
        k = len(xs)
        v_prev = np.zeros((k, self.n))
        v_prev[np.arange(k), xs] = 1.0
        v_cur = (self._PT @ v_prev.T).T
        inv2pi = 1.0 / (2 * self.pi)
        per_int = np.zeros(k, dtype=np.int64)
        k_hist = {}
        cm, cv = [], []
        m = 0
        centred = (v_prev + v_cur) * inv2pi - 1.0
        d = lp_norms(centred, self.pi, p)
        if curves:
            cm.append(0)
            cv.append(d)
        last = {0: centred}
        pending = np.ones(k, dtype=bool)
        while True:
            m += 1
            if m > horizon:
                raise NotMixedWithinHorizon(f"not mixed within horizon {horizon}")
            v_prev, v_cur = v_cur, (self._PT @ v_cur.T).T
            centred = (v_prev + v_cur) * inv2pi - 1.0
            d = lp_norms(centred, self.pi, p)
            last[m] = centred
            last.pop(m - 2, None)
            if curves:
                cm.append(m)
                cv.append(d)
            newly = pending & (d <= thr + FLOAT_TOL)
            per_int[newly] = m
            for i in np.nonzero(newly)[0]:
                k_hist[i] = (last[m - 1][i].copy(), centred[i].copy())
            pending &= ~newly
            if not pending.any():
                break
        m_star = int(per_int.max())
        rep = MixingReport(p=p, threshold=thr, mode=mode, t_mix=float(m_star),
                           t_integer=m_star, vertices=xs, backend="matrix-power",
                           horizon=int(horizon), per_vertex_integer=per_int)
        reals = per_int.astype(float)
        if mode == "interpolated":
            for i in range(k):
                k0, k1 = k_hist[i]
                f = lambda s: float(lp_norms(((1 - s) * k0 + s * k1)[None, :], self.pi, p)[0])
                reals[i] = per_int[i] - 1 + _segment_entry(f, thr)
            top = per_int == m_star
            k0 = np.array([k_hist[i][0] for i in np.nonzero(top)[0]])
            k1 = np.array([k_hist[i][1] for i in np.nonzero(top)[0]])
            f = lambda s: float(np.max(lp_norms((1 - s) * k0 + s * k1, self.pi, p)))
            rep.t_mix = m_star - 1 + _segment_entry(f, thr)
        rep.per_vertex = reals
        if curves:
            rep.curve_m = np.array(cm)
            rep.curves = np.column_stack(cv)
            rep.sup_curve = rep.curves.max(axis=0)
        return rep

    def _certify_report(self, rep, p, threshold, xs, per_vertex):
        st, _ = self._exact_setup()
        pi_ex = st.probabilities

        def exact_ok(x, m):
            return _exact_leq(self.exact_centered(int(x), m), pi_ex, p, threshold)

        def sup_ok(m):
            if m <= 0:
                return False
            d = self.distances_at(m, p, xs)
            far = np.abs(d - float(threshold)) > TIE_BAND
            if np.any(far & (d > threshold)):
                return False
            return all(exact_ok(x, m) for x in np.asarray(xs)[~far])

        m = rep.t_integer
        while not sup_ok(m):
            m += 1
        while m > 1 and sup_ok(m - 1):
            m -= 1
        if m != rep.t_integer:
            rep.t_integer = m
            if rep.mode == "interpolated":
                rep.t_mix = self._interp_global(p, float(threshold), m, xs)
        if rep.per_vertex_integer is not None:
            for i, x in enumerate(xs):
                mi = int(rep.per_vertex_integer[i])

                def ok(mm):
                    if mm <= 0:
                        return False
                    dv = float(lp_norms(self.centered_rows(mm, [x]), self.pi, p)[0])
                    if abs(dv - threshold) > TIE_BAND:
                        return dv <= threshold
                    return exact_ok(x, mm)

                while not ok(mi):
                    mi += 1
                while mi > 1 and ok(mi - 1):
                    mi -= 1
                rep.per_vertex_integer[i] = mi

    def vertex_mixing_time(self, x, p=1, threshold=0.25, horizon=None, method="auto"):
        """Integer and interpolated mixing time started from the single vertex ``x``.

        ``method="iterate"`` propagates one row forward step by step (cheap on
        large sparse graphs); ``"spectral"`` bisects using the eigenpairs.
        """
        p = parse_p(p)
        thr = float(threshold)
        if horizon is None:
            horizon = max(2, int(math.ceil(64 * self.mass * (self.n - 1) /
                                           float(self.graph.min_weight()))))
        if method == "auto":
            method = "spectral" if (self._spec is not None or self.n <= 300) else "iterate"
        if method == "spectral":
            self.spectral()
            saved = self.backend
            self.backend = "spectral"
            try:
                m = _least_true(lambda m: self.dp_distance_float(x, m, p) <= thr + FLOAT_TOL,
                                horizon)
                k0 = self.centered_rows(m - 1, [x])[0]
                k1 = self.centered_rows(m, [x])[0]
            finally:
                self.backend = saved
        else:
            m, k0, k1 = self._iterate_vertex(x, p, thr, horizon)
        f = lambda s: float(lp_norms(((1 - s) * k0 + s * k1)[None, :], self.pi, p)[0])
        return m, (m - 1) + _segment_entry(f, thr)

    def dp_distance_float(self, x, t, p):
        return float(lp_norms(self.centered_rows(t, [x]), self.pi, p)[0])

    def _iterate_vertex(self, x, p, thr, horizon, stride=16):
        # D(x, m) is non-increasing in m, so the distance is only evaluated
        # every ``stride`` steps; the block containing the crossing is replayed
        inv2pi = 1.0 / (2 * self.pi)
        pt = self._PT

        def dist(cur):
            if p == INF:
                return np.max(np.abs(cur))
            if p == 1:
                return np.abs(cur) @ self.pi
            return lp_norms(cur[None, :], self.pi, p)[0]

        a = np.zeros(self.n)
        a[x] = 1.0
        b = pt @ a
        m = 0
        while True:
            saved = (m, a, b)
            for _ in range(stride):
                a, b = b, pt @ b
            m += stride
            if dist((a + b) * inv2pi - 1.0) <= thr + FLOAT_TOL or m >= horizon:
                break
        m, a, b = saved
        prev = (a + b) * inv2pi - 1.0
        while m < horizon:
            a, b = b, pt @ b
            m += 1
            cur = (a + b) * inv2pi - 1.0
            if dist(cur) <= thr + FLOAT_TOL:
                return m, prev, cur
            prev = cur
        raise NotMixedWithinHorizon(f"not mixed within horizon {horizon}")

    def tv_mixing_time(self, threshold=0.125, horizon=None):
        """Least m > 0 with ``max_x TV(Q_m(x, .), pi) <= threshold``.

        ``Q_m`` is the averaged law ``(P^m + P^{m+1}) / 2``.  Computed on
        distributions directly (not through kernel densities), in Fractions
        for exact graphs.
        """
        if horizon is None:
            horizon = default_horizon(self.graph)
        if self.graph.exact and self.n <= EXACT_LIMIT:
            return self._tv_exact(Fraction(threshold), horizon)
        pmat = self.transition_matrix()
        pi = self.pi

        def tv(m):
            a = np.linalg.matrix_power(pmat, m)
            q = 0.5 * (a + a @ pmat)
            return 0.5 * np.max(np.abs(q - pi[None, :]).sum(axis=1))

        return _least_true(lambda m: tv(m) <= threshold + FLOAT_TOL / 2, horizon)

    def _tv_exact(self, thr, horizon):
        st, nbrs = self._exact_setup()
        pi = st.probabilities
        rows = []
        for x in range(self.n):
            r = [Fraction(0)] * self.n
            r[x] = Fraction(1)
            rows.append(r)

        def step(r):
            new = [Fraction(0)] * self.n
            for z, mass in enumerate(r):
                if mass:
                    for y, pr in nbrs[z]:
                        new[y] += mass * pr
            return new

        nxt = [step(r) for r in rows]
        for m in range(1, horizon + 1):
            rows, nxt = nxt, [step(r) for r in nxt]
            worst = max(sum(abs((a + b) / 2 - w) for a, b, w in zip(r0, r1, pi)) / 2
                        for r0, r1 in zip(rows, nxt))
            if worst <= thr:
                return m
        raise NotMixedWithinHorizon(f"not mixed within horizon {horizon}")


def _curve_grid(m_star, dense=256):
    if m_star <= dense:
        return np.arange(0, m_star + 1)
    g = np.unique(np.round(np.geomspace(1, m_star, dense)).astype(np.int64))
    return np.unique(np.r_[0, g, m_star - 1, m_star])


def mixing_time(g, p=1, threshold=0.25, mode="integer", **kw):
    """Convenience wrapper building a :class:`KernelEvaluator`."""
    backend = kw.pop("backend", "auto")
    return KernelEvaluator(g, backend=backend).mixing_time(p, threshold, mode, **kw)


def tv_mixing_time(g, threshold=0.125, **kw):
    return KernelEvaluator(g).tv_mixing_time(threshold, **kw)
