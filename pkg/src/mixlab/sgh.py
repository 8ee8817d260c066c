"""Finite metric-measure-kernel triples and upper bounds on their spectral
Gromov-Hausdorff distance.

The distance is an infimum over all ambient spaces.  Here the ambient space
is always the gluing of the two point sets along a correspondence ``C``,
with cross distances

    d(x, x') = min_{(a, a') in C} d_A(x, a) + rho + d_B(a', x'),  rho = dis(C) / 2,

so every reported value is a certified upper bound.  When ``dis(C) = 0`` the
gluing identifies matched points (a pseudometric); all three terms are
invariant under that quotient.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .errors import AmbientTooLargeForExact, GridMismatch, InvalidCorrespondence
from .graph import check_metric_matrix

EXACT_PROHOROV_LIMIT = 15
LABEL = "certified upper bound"


@dataclass
class FiniteTriple:
    """Points with a metric, a probability measure and a kernel on a time grid.

    ``kernel[k, x, y]`` is the kernel at ``grid[k]``; values between knots are
    linear interpolations, so suprema over time are attained at knots.
    """

    dist: np.ndarray
    weights: np.ndarray
    grid: np.ndarray
    kernel: np.ndarray
    root: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.grid = np.atleast_1d(np.asarray(self.grid, dtype=float))
        self.kernel = np.asarray(self.kernel, dtype=float)
        n = self.dist.shape[0]
        if n == 0:
            raise ValueError("a triple needs at least one point")
        check_metric_matrix(self.dist)
        if self.weights.shape != (n,) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive, one per point")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.grid.size == 0 or np.any(self.grid <= 0) or np.any(np.diff(self.grid) <= 0):
            raise ValueError("time grid must be increasing and inside (0, inf)")
        if self.kernel.shape != (self.grid.size, n, n):
            raise ValueError("kernel must have shape (knots, n, n)")
        if not np.allclose(self.kernel, self.kernel.transpose(0, 2, 1), rtol=0, atol=1e-12):
            raise ValueError("kernel must be symmetric at every knot")
        if self.root is not None and not 0 <= self.root < n:
            raise ValueError("root out of range")

    @property
    def n(self):
        return self.dist.shape[0]

    def relabel(self, perm):
        """Copy with point ``i`` moved to position ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        root = None if self.root is None else int(perm[self.root])
        return FiniteTriple(self.dist[np.ix_(inv, inv)], self.weights[inv], self.grid,
                            self.kernel[:, inv][:, :, inv], root, dict(self.meta))

    def to_json(self):
        return {"dist": self.dist.tolist(), "weights": self.weights.tolist(),
                "grid": self.grid.tolist(), "kernel": self.kernel.tolist(),
                "root": self.root, "meta": self.meta}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["dist"], obj["weights"], obj["grid"], obj["kernel"],
                   obj.get("root"), obj.get("meta", {}))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def _key(self):
        return (self.n, self.dist.tobytes(), self.weights.tobytes(), self.grid.tobytes(),
                self.kernel.tobytes(), -1 if self.root is None else self.root)


class Correspondence:
    """Relation between ``range(nA)`` and ``range(nB)`` covering both sides."""

    def __init__(self, pairs, nA, nB):
        pairs = sorted({(int(a), int(b)) for a, b in pairs})
        if any(not (0 <= a < nA and 0 <= b < nB) for a, b in pairs):
            raise InvalidCorrespondence("pair out of range")
        left = {a for a, _ in pairs}
        right = {b for _, b in pairs}
        if len(left) != nA or len(right) != nB:
            raise InvalidCorrespondence("correspondence must cover both sets")
        self.pairs = pairs
        self.nA = nA
        self.nB = nB
        self._arr = np.array(pairs, dtype=np.int64)

    @classmethod
    def from_maps(cls, f, g, extra=()):
        """Graph of ``f: A -> B`` together with the transposed graph of ``g: B -> A``."""
        pairs = [(a, int(b)) for a, b in enumerate(f)]
        pairs += [(int(a), b) for b, a in enumerate(g)]
        pairs += list(extra)
        return cls(pairs, len(f), len(g))

    @classmethod
    def identity(cls, n):
        return cls([(i, i) for i in range(n)], n, n)

    @property
    def left(self):
        return self._arr[:, 0]

    @property
    def right(self):
        return self._arr[:, 1]

    def transpose(self):
        return Correspondence([(b, a) for a, b in self.pairs], self.nB, self.nA)

    def compose(self, other):
        """``{(x, z): (x, y) in self and (y, z) in other for some y}``."""
        if self.nB != other.nA:
            raise InvalidCorrespondence("middle spaces differ")
        by_mid = {}
        for y, z in other.pairs:
            by_mid.setdefault(y, []).append(z)
        pairs = [(x, z) for x, y in self.pairs for z in by_mid.get(y, ())]
        return Correspondence(pairs, self.nA, other.nB)

    def __contains__(self, pair):
        return tuple(pair) in set(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __repr__(self):
        return f"Correspondence({self.pairs})"


def hausdorff(A, B, dist):
    """Two-sided Hausdorff distance between index sets ``A`` and ``B`` of ``dist``."""
    A = np.atleast_1d(np.asarray(A, dtype=np.int64))
    B = np.atleast_1d(np.asarray(B, dtype=np.int64))
    if A.size == 0 or B.size == 0:
        raise ValueError("both sets must be nonempty")
    d = np.asarray(dist)[np.ix_(A, B)]
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# mass differences below this are rounding in the subset sums, not transport
MASS_TOL = 1e-12


def _one_sided_exact(mu, nu, dist, levels):
    # min over distance levels e of max(e, max_S mu(S) - nu(S^e)); an optimal S
    # lies inside the support of mu
    supp = np.nonzero(mu > 0)[0]
    k = supp.size
    masks = ((np.arange(1, 2 ** k)[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)
    mass = masks @ mu[supp]
    best = math.inf
    dsub = dist[supp]
    for e in levels:
        if e >= best:
            break
        near = (dsub <= e).astype(np.int64)
        reach = (masks.astype(np.int64) @ near) > 0
        gap = float(np.max(mass - reach @ nu))
        if gap <= MASS_TOL:
            gap = 0.0
        best = min(best, max(e, gap))
    return best


def _one_sided_coupling(mu, nu, dist, levels):
    # Strassen: an eps-coupling with P(d > e) <= e bounds the distance by e
    n = len(mu)
    su, sv = np.nonzero(mu > 0)[0], np.nonzero(nu > 0)[0]
    a, b = len(su), len(sv)
    d = dist[np.ix_(su, sv)]
    rows = np.zeros((a + b, a * b))
    for i in range(a):
        rows[i, i * b:(i + 1) * b] = 1.0
    for j in range(b):
        rows[a + j, j::b] = 1.0
    rhs = np.r_[mu[su], nu[sv]]
    best = math.inf
    for e in levels:
        if e >= best:
            break
        cost = (d > e).astype(float).ravel()
        res = linprog(cost, A_eq=rows, b_eq=rhs, bounds=(0, None), method="highs")
        off = float(res.fun) if res.success else 1.0
        if off <= MASS_TOL:
            off = 0.0
        best = min(best, max(e, off))
    return best


def prohorov(mu, nu, dist, method="auto"):
    """Prohorov distance between two probability vectors on a finite metric space.

    ``method="exact"`` enumerates subsets (at most 15 ambient points);
    ``"coupling"`` solves one transport linear program per distance level and
    returns the Strassen coupling bound, which dominates the exact value.
    ``"auto"`` uses exact enumeration when allowed.

    Returns ``(value, method_used)``.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    dist = np.asarray(dist, dtype=float)
    n = len(mu)
    if method == "auto":
        method = "exact" if n <= EXACT_PROHOROV_LIMIT else "coupling"
    if method == "exact" and n > EXACT_PROHOROV_LIMIT:
        raise AmbientTooLargeForExact(f"{n} ambient points exceeds {EXACT_PROHOROV_LIMIT}")
    levels = np.unique(np.r_[0.0, dist[np.triu_indices(n, 1)]])
    levels = levels[levels < 1.0]
    levels = np.r_[levels, 1.0]
    side = _one_sided_exact if method == "exact" else _one_sided_coupling
    val = max(side(mu, nu, dist, levels), side(nu, mu, dist.T, levels))
    return float(min(val, 1.0)), method


def distortion(c, dA, dB):
    """``sup |d_A(x, y) - d_B(x', y')|`` over pairs of pairs in ``c``."""
    a, b = c.left, c.right
    return float(np.max(np.abs(np.asarray(dA)[np.ix_(a, a)] - np.asarray(dB)[np.ix_(b, b)])))


def glued_space(A, B, c):
    """Distance matrix of ``A`` glued to ``B`` along ``c``, and the offset ``rho``."""
    rho = distortion(c, A.dist, B.dist) / 2.0
    a, b = c.left, c.right
    # d_A(x, a) + d_B(a', x') is formed before adding rho so that swapping the
    # roles of A and B reproduces the same floating-point values
    cross = np.min(A.dist[:, a][:, None, :] + B.dist[:, b][None, :, :], axis=2) + rho
    n = A.n + B.n
    d = np.empty((n, n))
    d[:A.n, :A.n] = A.dist
    d[A.n:, A.n:] = B.dist
    d[:A.n, A.n:] = cross
    d[A.n:, :A.n] = cross.T
    return d, rho


def _check_grids(A, B):
    if A.grid.shape != B.grid.shape or not np.array_equal(A.grid, B.grid):
        raise GridMismatch("triples must share the same time grid")


def kernel_gap(A, B, c):
    """``sup`` over pairs of pairs in ``c`` and grid knots of ``|q - q'|``."""
    a, b = c.left, c.right
    qa = A.kernel[:, a][:, :, a]
    qb = B.kernel[:, b][:, :, b]
    return float(np.max(np.abs(qa - qb)))


@dataclass
class DeltaBound:
    value: float
    hausdorff: float
    prohorov: float
    correspondence_term: float
    rho: float
    kernel_gap: float
    prohorov_method: str
    correspondence: Correspondence
    label: str = LABEL

    def to_json(self):
        return {"value": self.value, "label": self.label, "hausdorff": self.hausdorff,
                "prohorov": self.prohorov, "prohorov_method": self.prohorov_method,
                "correspondence_term": self.correspondence_term, "rho": self.rho,
                "kernel_gap": self.kernel_gap,
                "correspondence": [list(p) for p in self.correspondence.pairs]}


def delta_upper(A, B, c, prohorov_method="auto"):
    """Sum of the Hausdorff, Prohorov and correspondence terms in the glued space."""
    _check_grids(A, B)
    if c.nA != A.n or c.nB != B.n:
        raise InvalidCorrespondence("correspondence does not match the triples")
    d, rho = glued_space(A, B, c)
    h = hausdorff(np.arange(A.n), np.arange(A.n, A.n + B.n), d)
    mu = np.r_[A.weights, np.zeros(B.n)]
    nu = np.r_[np.zeros(A.n), B.weights]
    p, used = prohorov(mu, nu, d, prohorov_method)
    kg = kernel_gap(A, B, c)
    corr = 2.0 * rho + kg
    return DeltaBound(h + p + corr, h, p, corr, rho, kg, used, c)


def _forced_pairs(A, B):
    if A.root is not None and B.root is not None:
        return [(A.root, B.root)]
    return []


def _family_size(nA, nB):
    return nB ** nA * nA ** nB


def _pair_tables(A, B):
    # pair p = a * nB + b; tables over pairs of pairs
    a = np.repeat(np.arange(A.n), B.n)
    b = np.tile(np.arange(B.n), A.n)
    dis = np.abs(A.dist[np.ix_(a, a)] - B.dist[np.ix_(b, b)])
    kg = np.max(np.abs(A.kernel[:, a][:, :, a] - B.kernel[:, b][:, :, b]), axis=0)
    return dis, kg


def _exhaustive(A, B, prohorov_method):
    extra = [a * B.n + b for a, b in _forced_pairs(A, B)]
    fa = np.arange(A.n) * B.n
    gb = np.arange(B.n)
    sets = set()
    for f in itertools.product(range(B.n), repeat=A.n):
        left = fa + np.array(f)
        for g in itertools.product(range(A.n), repeat=B.n):
            idx = np.concatenate([left, np.array(g) * B.n + gb, extra]) if extra else \
                np.concatenate([left, np.array(g) * B.n + gb])
            sets.add(tuple(sorted(set(idx.tolist()))))
    dis, kg = _pair_tables(A, B)
    # the Hausdorff term equals rho and the Prohorov term is nonnegative, so
    # 3 rho + kernel gap is a lower bound that lets most candidates be skipped
    cands = []
    for s in sets:
        ix = np.array(s)
        sub = np.ix_(ix, ix)
        cands.append((1.5 * float(dis[sub].max()) + float(kg[sub].max()), s))
    cands.sort()
    best = None
    evaluated = 0
    for lb, s in cands:
        if best is not None and lb >= best.value:
            break
        c = Correspondence([divmod(p, B.n) for p in s], A.n, B.n)
        res = delta_upper(A, B, c, prohorov_method)
        evaluated += 1
        if best is None or res.value < best.value:
            best = res
    return best, len(sets)


def _anneal(A, B, budget, seed, prohorov_method, restarts=4):
    extra = _forced_pairs(A, B)
    rng = np.random.default_rng(seed)
    cache = {}

    def score(f, g):
        c = Correspondence.from_maps(f, g, extra)
        key = tuple(c.pairs)
        if key not in cache:
            cache[key] = delta_upper(A, B, c, prohorov_method)
        return cache[key]

    best = None
    steps = max(1, budget // restarts)
    for _ in range(restarts):
        f = rng.integers(0, B.n, size=A.n)
        g = rng.integers(0, A.n, size=B.n)
        cur = score(f, g)
        temp = max(cur.value, 1e-3) * 0.2
        for k in range(steps):
            f2, g2 = f.copy(), g.copy()
            if rng.random() < A.n / (A.n + B.n):
                f2[rng.integers(A.n)] = rng.integers(B.n)
            else:
                g2[rng.integers(B.n)] = rng.integers(A.n)
            new = score(f2, g2)
            t = temp * (1.0 - k / steps) + 1e-12
            if new.value <= cur.value or rng.random() < math.exp((cur.value - new.value) / t):
                f, g, cur = f2, g2, new
            if best is None or cur.value < best.value:
                best = cur
    return best, len(cache)


@dataclass
class DeltaEstimate:
    value: float
    bound: DeltaBound
    method: str
    evaluated: int
    label: str = LABEL

    @property
    def correspondence(self):
        return self.bound.correspondence

    def to_json(self):
        out = self.bound.to_json()
        out.update({"search": self.method, "evaluated": self.evaluated})
        return out


def delta_estimate(A, B, budget=100000, seed=0, prohorov_method="auto"):
    """Smallest ``delta_upper`` over function-pair correspondences.

    Exhaustive when the family has at most ``budget`` members, simulated
    annealing with ``budget`` evaluations otherwise.  The search always runs
    on a canonical ordering of the two triples, so the result is exactly
    symmetric in its arguments.
    """
    _check_grids(A, B)
    swap = B._key() < A._key()
    X, Y = (B, A) if swap else (A, B)
    if _family_size(X.n, Y.n) <= budget:
        best, count = _exhaustive(X, Y, prohorov_method)
        method = "exhaustive"
    else:
        best, count = _anneal(X, Y, budget, seed, prohorov_method)
        method = "annealing"
    if swap:
        b = best
        best = DeltaBound(b.value, b.hausdorff, b.prohorov, b.correspondence_term, b.rho,
                          b.kernel_gap, b.prohorov_method, b.correspondence.transpose())
    return DeltaEstimate(best.value, best, method, count)


def equivalent(A, B, tol=0.0):
    """Search all bijections for a relabelling matching metric, measure and kernel."""
    if A.n != B.n or not np.array_equal(A.grid, B.grid):
        return None
    for perm in itertools.permutations(range(A.n)):
        p = np.array(perm)
        if A.root is not None and B.root is not None and p[A.root] != B.root:
            continue
        if (np.max(np.abs(A.dist - B.dist[np.ix_(p, p)])) <= tol
                and np.max(np.abs(A.weights - B.weights[p])) <= tol
                and np.max(np.abs(A.kernel - B.kernel[:, p][:, :, p])) <= tol):
            return p
    return None


# triples built from graphs

def graph_triple(g, kernel, grid, gamma):
    """Package ``(V, d_G, pi, q_{gamma t})`` at the knots of ``grid``.

    ``kernel`` is a :class:`~mixlab.kernel.KernelEvaluator` for ``g``.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if gamma <= 0:
        raise ValueError("time scale must be positive")
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("time grid must lie inside (0, inf)")
    xs = np.arange(g.n)
    q = np.stack([kernel.centered_rows(gamma * t, xs) + 1.0 for t in grid])
    q = 0.5 * (q + q.transpose(0, 2, 1))
    return FiniteTriple(g.distance_matrix(), kernel.pi, grid, q, g.root,
                        {"gamma": gamma, "vertices": g.n})


# tightness diagnostics

def _pair_modulus(tr):
    # M[y, z] = max over knots and x of |q(x, y) - q(x, z)|
    q = tr.kernel
    n = tr.n
    out = np.zeros((n, n))
    for y in range(n):
        out[y] = np.max(np.abs(q[:, :, [y]] - q), axis=(0, 1))
    return out


def tightness_modulus(triples, deltas, labels=None):
    """Modulus of continuity of the kernels for each triple and each ``delta``.

    Returns a dict with the table (rows follow ``triples``), whether each row
    is non-decreasing in ``delta``, and whether each positive-``delta`` column
    decreases along the sequence.
    """
    if len(triples) < 2:
        raise ValueError("need at least two triples")
    deltas = np.asarray(deltas, dtype=float)
    labels = list(labels) if labels is not None else list(range(len(triples)))
    table = []
    for tr in triples:
        m = _pair_modulus(tr)
        table.append([float(m[tr.dist <= dl].max()) for dl in deltas])
    table = np.array(table)
    rows_monotone = [bool(np.all(np.diff(r) >= -1e-15)) for r in table]
    cols_decay = {float(dl): bool(np.all(np.diff(table[:, j]) < 0))
                  for j, dl in enumerate(deltas) if dl > 0}
    return {"labels": labels, "deltas": deltas.tolist(), "table": table.tolist(),
            "monotone_in_delta": rows_monotone, "decreasing_in_N": cols_decay,
            "double_limit_estimate": float(table[-1].min() if deltas.size else 0.0)}


def _loglog_fit(x, y):
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    slope, icpt = np.linalg.lstsq(design, ly, rcond=None)[0]
    resid = ly - (slope * lx + icpt)
    tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / tot) if tot > 0 else 1.0
    return float(slope), float(icpt), r2


def resistance_tightness_check(graphs, alpha, gamma, kappa=None, drift_tol=0.25,
                               max_pairs=200000, seed=0):
    """Fit or verify the resistance bound and the volume-time sandwich.

    For each graph ``G^N`` (with its own metric) and scale ``alpha[N]`` the
    per-size constants are

        c1_N = max_{x != y} R(x, y) / (alpha d(x, y))^kappa,
        s_N  = alpha^kappa beta / gamma,  beta = sum_{x, y} mu_xy,

    and the check passes when neither drifts along the sequence (log-log slope
    against the graph size within ``drift_tol``).  ``kappa`` is fitted by
    regressing ``log R`` on ``log(alpha d)`` over all pairs when not given.
    """
    from .resistance import ResistanceOracle

    rng = np.random.default_rng(seed)
    pairs_r, pairs_d, per = [], [], []
    for g, a in zip(graphs, alpha):
        res = ResistanceOracle(g).resistance_matrix()
        d = g.distance_matrix()
        iu = np.triu_indices(g.n, 1)
        r, dd = res[iu], d[iu] * a
        if r.size > max_pairs:
            keep = rng.choice(r.size, size=max_pairs, replace=False)
            r, dd = r[keep], dd[keep]
        pairs_r.append(r)
        pairs_d.append(dd)
        per.append((g, a, r, dd))
    allr, alld = np.concatenate(pairs_r), np.concatenate(pairs_d)
    slope, icpt, r2 = _loglog_fit(alld, allr)
    fitted = kappa is None
    k = slope if fitted else float(kappa)
    sizes, c1s, sand = [], [], []
    for (g, a, r, dd), gm in zip(per, gamma):
        beta = float(g.vertex_weights().sum())
        c1s.append(float(np.max(r / dd ** k)))
        sand.append(a ** k * beta / gm)
        sizes.append(g.n)
    sizes = np.array(sizes, dtype=float)
    c1s, sand = np.array(c1s), np.array(sand)
    drift_c1 = _loglog_fit(sizes, c1s)[0] if len(sizes) > 1 else 0.0
    drift_s = _loglog_fit(sizes, sand)[0] if len(sizes) > 1 else 0.0
    failures = []
    if abs(drift_c1) > drift_tol:
        w = int(np.argmax(c1s)) if drift_c1 > 0 else int(np.argmin(c1s))
        failures.append({"inequality": "resistance", "witness_index": w,
                         "witness_size": int(sizes[w]), "drift": drift_c1})
    if abs(drift_s) > drift_tol:
        w = int(np.argmax(sand)) if drift_s > 0 else int(np.argmin(sand))
        failures.append({"inequality": "sandwich", "witness_index": w,
                         "witness_size": int(sizes[w]), "drift": drift_s})
    return {"kappa": k, "kappa_fitted": fitted, "fit_slope": slope, "fit_r2": r2,
            "c1": float(c1s.max()), "c2": float(sand.min()), "c3": float(sand.max()),
            "per_size": {"sizes": sizes.tolist(), "c1": c1s.tolist(), "sandwich": sand.tolist()},
            "drift": {"resistance": drift_c1, "sandwich": drift_s},
            "passed": not failures, "failures": failures}
