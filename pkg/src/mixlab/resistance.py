"""Effective resistance, killed Green functions, hitting and commute times.

All quantities come from Laplacian solves with boundary values imposed
directly (potential 1 on one set, 0 on the other); no pseudo-inverse is
formed for set-to-set queries.  Graphs up to ``dense_limit`` vertices use
dense factorisations, larger ones a Jacobi-preconditioned conjugate
gradient (tolerance 1e-10) or a sparse LU where many right-hand sides share
one matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EmptyComplement, OverlappingSets, VertexInTargets

CG_TOL = 1e-10


@dataclass
class DiameterResult:
    value: float
    pair: tuple
    approximate: bool = False


@dataclass
class KilledWalkData:
    """Green function of the walk killed on leaving ``B``.

    ``green[i, j]`` is ``g_B(B[i], B[j])``; ``exit_mean[i]`` is ``E_{B[i]} tau_B``.
    """

    B: np.ndarray
    green: np.ndarray
    exit_mean: np.ndarray
    mu_B: np.ndarray
    P_BB: object = None
    _survival: Optional[np.ndarray] = field(default=None, repr=False)

    def index(self, x):
        return int(np.searchsorted(self.B, x))

    def survival(self, horizon=None):
        """``P_x(tau_B > n)`` for n = 0..horizon, shape ``(horizon + 1, |B|)``.

        The default horizon is ``8 * max_x E_x tau_B``.
        """
        if horizon is None:
            horizon = int(math.ceil(8 * float(self.exit_mean.max())))
        if self._survival is not None and self._survival.shape[0] > horizon:
            return self._survival[:horizon + 1]
        out = np.empty((horizon + 1, len(self.B)))
        u = np.ones(len(self.B))
        out[0] = u
        for k in range(1, horizon + 1):
            u = self.P_BB @ u
            out[k] = u
        self._survival = out
        return out


def _as_index_set(s, n):
    arr = np.unique(np.atleast_1d(np.asarray(list(s) if not np.isscalar(s) else [s],
                                             dtype=np.int64)))
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise ValueError("vertex out of range")
    return arr


class ResistanceOracle:
    """Resistance metric and killed-walk quantities for one graph."""

    def __init__(self, g, dense_limit=5000, exact_diameter_limit=2000):
        self.graph = g
        self.n = g.n
        w = g.adjacency()
        self.mu = g.vertex_weights()
        self.mass = float(self.mu.sum())
        self.L = sp.csr_matrix(sp.diags(self.mu) - w)
        self.dense_limit = dense_limit
        self.exact_diameter_limit = exact_diameter_limit
        self._Ld = None
        self._rmat = None

    def _dense_L(self):
        if self._Ld is None:
            self._Ld = self.L.toarray()
        return self._Ld

    def _solve(self, idx, rhs):
        """Solve ``L[idx, idx] x = rhs`` (rhs may have several columns)."""
        if len(idx) <= self.dense_limit:
            a = self._dense_L()[np.ix_(idx, idx)]
            return sla.solve(a, rhs, assume_a="pos")
        a = self.L[idx][:, idx].tocsr()
        dinv = 1.0 / a.diagonal()
        prec = spla.LinearOperator(a.shape, matvec=lambda v: dinv * v)
        rhs2 = rhs if rhs.ndim == 2 else rhs[:, None]
        cols = []
        for j in range(rhs2.shape[1]):
            sol, info = spla.cg(a, rhs2[:, j], rtol=CG_TOL, atol=0.0, M=prec,
                                maxiter=20 * len(idx))
            if info != 0:
                sol = spla.spsolve(a.tocsc(), rhs2[:, j])
            cols.append(sol)
        out = np.column_stack(cols)
        return out if rhs.ndim == 2 else out[:, 0]

    def _check_disjoint(self, A, B):
        A = _as_index_set(A, self.n)
        B = _as_index_set(B, self.n)
        if A.size == 0 or B.size == 0:
            raise ValueError("both vertex sets must be nonempty")
        if np.intersect1d(A, B).size:
            raise OverlappingSets("sets must be disjoint")
        return A, B

    def harmonic(self, A, B):
        """Potential equal to 1 on A, 0 on B and harmonic elsewhere."""
        A, B = self._check_disjoint(A, B)
        f = np.zeros(self.n)
        f[A] = 1.0
        mask = np.ones(self.n, dtype=bool)
        mask[A] = False
        mask[B] = False
        inner = np.nonzero(mask)[0]
        if inner.size:
            rhs = -(self.L[inner][:, A] @ np.ones(A.size))
            f[inner] = self._solve(inner, np.asarray(rhs).ravel())
        return f

    def energy(self, f):
        """Dirichlet form ``(1/2) sum mu_xy (f(x) - f(y))^2``."""
        u, v, w = self.graph._arrays()
        return float(np.sum(w * (f[u] - f[v]) ** 2))

    def effective_resistance(self, A, B):
        """``R_eff(A, B)``: reciprocal of the minimal energy with f = 1 on A, 0 on B."""
        f = self.harmonic(A, B)
        return 1.0 / self.energy(f)

    def resistance_matrix(self):
        """All pairwise resistances (dense, O(n^3))."""
        if self._rmat is None:
            n = self.n
            j = np.full((n, n), 1.0 / n)
            gam = np.linalg.inv(self._dense_L() + j) - j
            d = np.diag(gam)
            r = d[:, None] + d[None, :] - 2 * gam
            r = 0.5 * (r + r.T)
            np.fill_diagonal(r, 0.0)
            self._rmat = np.maximum(r, 0.0)
        return self._rmat

    def resistance(self, x, y):
        if x == y:
            return 0.0
        if self._rmat is not None:
            return float(self._rmat[x, y])
        return self.effective_resistance([x], [y])

    def resistances_from(self, x):
        """``R_eff(x, y)`` for every y."""
        if self._rmat is not None or self.n <= self.exact_diameter_limit:
            return self.resistance_matrix()[x].copy()
        g = self.graph
        if g.is_tree():
            return self._tree_resistances(x)
        idx = np.setdiff1d(np.arange(self.n), [x])
        lu = spla.splu(self.L[idx][:, idx].tocsc())
        out = np.zeros(self.n)
        e = np.zeros(idx.size)
        for k in range(idx.size):
            e[k] = 1.0
            out[idx[k]] = lu.solve(e)[k]
            e[k] = 0.0
        return out

    def _tree_resistances(self, x):
        # series circuits: resistance is the sum of 1/weight along the unique path
        a = self.graph.adjacency()
        out = np.full(self.n, -1.0)
        out[x] = 0.0
        stack = [x]
        while stack:
            z = stack.pop()
            for k in range(a.indptr[z], a.indptr[z + 1]):
                y = a.indices[k]
                if out[y] < 0:
                    out[y] = out[z] + 1.0 / a.data[k]
                    stack.append(y)
        return out

    def diameter(self, n_pairs=2000, seed=0):
        """Resistance diameter; exact up to ``exact_diameter_limit`` vertices."""
        if self.n <= self.exact_diameter_limit:
            r = self.resistance_matrix()
            i, j = np.unravel_index(np.argmax(r), r.shape)
            return DiameterResult(float(r[i, j]), (int(i), int(j)), False)
        if self.graph.is_tree():
            # exact by double sweep: the farthest vertex from anywhere is an endpoint
            r0 = self._tree_resistances(0)
            a = int(np.argmax(r0))
            ra = self._tree_resistances(a)
            b = int(np.argmax(ra))
            return DiameterResult(float(ra[b]), (a, b), False)
        root = self.graph.root if self.graph.root is not None else 0
        rr = self.resistances_from(root)
        best = (float(rr.max()), (root, int(np.argmax(rr))))
        rng = np.random.default_rng(seed)
        for _ in range(n_pairs):
            x, y = rng.choice(self.n, size=2, replace=False)
            val = self.effective_resistance([x], [y])
            if val > best[0]:
                best = (val, (int(x), int(y)))
        return DiameterResult(best[0], best[1], True)

    def green_killed(self, B):
        """Green function, exit means and killed kernel for the set ``B``."""
        B = _as_index_set(B, self.n)
        if B.size == 0:
            raise ValueError("B must be nonempty")
        if B.size >= self.n:
            raise EmptyComplement("B has empty complement")
        mu_b = self.mu[B]
        if B.size <= self.dense_limit:
            lbb = self._dense_L()[np.ix_(B, B)]
            green = sla.inv(lbb)
            green = 0.5 * (green + green.T)
        else:
            lu = spla.splu(self.L[B][:, B].tocsc())
            green = lu.solve(np.eye(B.size))
        exit_mean = green @ mu_b
        pbb = sp.csr_matrix(sp.diags(1.0 / mu_b) @ (-(self.L[B][:, B] - sp.diags(mu_b))))
        return KilledWalkData(B, green, exit_mean, mu_b, pbb)

    def hitting_probability(self, x, A, B):
        """``P_x(T_A < T_B)`` by a harmonic solve."""
        A, B = self._check_disjoint(A, B)
        if x in set(A.tolist()) | set(B.tolist()):
            raise VertexInTargets(f"start vertex {x} lies in A or B")
        return float(self.harmonic(A, B)[x])

    def hitting_times_to(self, y):
        """``E_z sigma_y`` for all z (zero at y), by first-step analysis."""
        idx = np.setdiff1d(np.arange(self.n), [y])
        h = np.zeros(self.n)
        h[idx] = self._solve(idx, self.mu[idx])
        return h

    def commute_time(self, x, y):
        """``E_x sigma_y + E_y sigma_x`` from two hitting-time solves."""
        if x == y:
            raise ValueError("commute time needs two distinct vertices")
        return float(self.hitting_times_to(y)[x] + self.hitting_times_to(x)[y])


def effective_resistance(g, A, B):
    return ResistanceOracle(g).effective_resistance(A, B)


def resistance_diameter(g):
    return ResistanceOracle(g).diameter()


def green_killed(g, B):
    return ResistanceOracle(g).green_killed(B)


def hitting_probability(g, x, A, B):
    return ResistanceOracle(g).hitting_probability(x, A, B)


def commute_time(g, x, y):
    return ResistanceOracle(g).commute_time(x, y)
