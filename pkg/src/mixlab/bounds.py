"""Resistance/volume growth conditions and the mixing-time bounds built on them.

Balls around the root are open: ``B(R) = {y : d(root, y) < R}`` and
``V(R)`` is the sum of the vertex weights ``mu_x`` over the ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .errors import (BallIsWholeGraph, InsufficientDraws, PreconditionFailed,
                     UnknownFamily)
from .resistance import ResistanceOracle

DEFAULT_C1 = 1.0
MIN_DRAWS = 50
CLAUSES = ("resistance_upper", "volume_upper", "resistance_lower", "inner_volume_lower")


def _pair_ratios(values, grid):
    i, j = np.triu_indices(len(grid), k=0)
    keep = grid[i] > 0
    i, j = i[keep], j[keep]
    return grid[j] / grid[i], values[j] / values[i]


def fit_sandwich(values, lo_exp, hi_exp, grid=None):
    """Smallest ``C >= 1`` with ``C^-1 (R/R')^lo <= f(R)/f(R') <= C (R/R')^hi``."""
    values = np.asarray(values, dtype=float)
    if grid is None:
        grid = np.arange(len(values), dtype=float)
    sel = _check_grid(grid)
    x, y = _pair_ratios(values[sel], grid[sel])
    c_hi = np.max(y / x ** hi_exp)
    c_lo = np.max(x ** lo_exp / y)
    return float(max(1.0, c_hi, c_lo))


def _check_grid(grid, limit=512):
    # exhaustive up to ``limit`` points, geometric subgrid beyond
    if len(grid) <= limit:
        return np.arange(len(grid))
    idx = np.unique(np.round(np.geomspace(1, len(grid) - 1, limit)).astype(int))
    return np.r_[0, idx]


@dataclass
class GrowthSpec:
    """Volume and resistance growth profiles tabulated on ``0..K``.

    Values between grid points are linearly interpolated.
    """

    v_table: np.ndarray
    r_table: np.ndarray
    C1: float = 1.0
    C2: float = 1.0
    d1: float = 1.0
    d2: float = 1.0
    a1: float = 1.0
    a2: float = 1.0
    label: str = ""

    def __post_init__(self):
        self.v_table = np.asarray(self.v_table, dtype=float)
        self.r_table = np.asarray(self.r_table, dtype=float)
        for name, t in (("v", self.v_table), ("r", self.r_table)):
            if len(t) < 2 or t[0] != 0 or t[1] != 1:
                raise ValueError(f"{name} must satisfy {name}(0)=0 and {name}(1)=1")
            if np.any(np.diff(t) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if len(self.v_table) != len(self.r_table):
            raise ValueError("v and r must share a grid")
        if self.C1 < 1 or self.C2 < 1:
            raise ValueError("C1 and C2 must be >= 1")
        if not self.d1 <= self.d2:
            raise ValueError("need d1 <= d2")
        if not 0 < self.a1 <= self.a2 <= 1:
            raise ValueError("need 0 < a1 <= a2 <= 1")

    @classmethod
    def power_law(cls, v_exp, r_exp, r_max, label=""):
        """``v(R) = R^v_exp`` and ``r(R) = R^r_exp`` on ``0..r_max`` with unit constants."""
        k = np.arange(int(math.ceil(r_max)) + 1, dtype=float)
        return cls(k ** v_exp, k ** r_exp, 1.0, 1.0, v_exp, v_exp, r_exp, r_exp,
                   label or f"v=R^{v_exp:g}, r=R^{r_exp:g}")

    @classmethod
    def from_tables(cls, v, r, d=None, alpha=None, label=""):
        """Tabulated profiles with sandwich constants fitted by a ratio scan.

        Missing exponent pairs are taken from a least-squares log-log slope.
        """
        v = np.asarray(v, dtype=float)
        r = np.asarray(r, dtype=float)
        grid = np.arange(len(v), dtype=float)

        def slope(t):
            m = grid >= 1
            return float(np.polyfit(np.log(grid[m]), np.log(t[m]), 1)[0]) if m.sum() > 1 else 1.0

        d1, d2 = d if d is not None else (slope(v),) * 2
        a1, a2 = alpha if alpha is not None else (min(1.0, slope(r)),) * 2
        c1 = fit_sandwich(v, d1, d2)
        c2 = fit_sandwich(r, a1, a2)
        return cls(v, r, c1, c2, d1, d2, a1, a2, label)

    @property
    def r_max(self):
        return len(self.v_table) - 1

    def _eval(self, table, R):
        if np.any(np.asarray(R) > self.r_max + 1e-12) or np.any(np.asarray(R) < 0):
            raise ValueError(f"radius {R} outside the tabulated range [0, {self.r_max}]")
        return np.interp(R, np.arange(len(table)), table)

    def v(self, R):
        return float(self._eval(self.v_table, R)) if np.isscalar(R) else self._eval(self.v_table, R)

    def r(self, R):
        return float(self._eval(self.r_table, R)) if np.isscalar(R) else self._eval(self.r_table, R)

    @property
    def C3(self):
        return 2.0 ** (-2.0 / self.a1) * self.C2 ** (-1.0 / self.a2)

    @property
    def C4(self):
        return self.C3 ** self.d2 / (8.0 * self.C1)

    def check_sandwich(self, tol=1e-12):
        """Verify both doubling sandwiches on the stored grid.

        Returns ``(ok, worst)`` where ``worst`` names the tightest pair.
        """
        grid = np.arange(len(self.v_table), dtype=float)
        sel = _check_grid(grid)
        worst = None
        ok = True
        for name, t, c, lo, hi in (("v", self.v_table, self.C1, self.d1, self.d2),
                                   ("r", self.r_table, self.C2, self.a1, self.a2)):
            x, y = _pair_ratios(t[sel], grid[sel])
            upper = c * x ** hi - y
            lower = y - x ** lo / c
            m = min(upper.min(), lower.min())
            if m < -tol * max(1.0, float(y.max())):
                ok = False
            if worst is None or m < worst[1]:
                worst = (name, float(m))
        return ok, worst

    def to_json(self):
        return {"label": self.label, "C1": self.C1, "C2": self.C2, "d1": self.d1,
                "d2": self.d2, "a1": self.a1, "a2": self.a2, "C3": self.C3, "C4": self.C4,
                "r_max": self.r_max}


def derived_constants(C1, C2, d2, a1, a2, lam, H, c1=DEFAULT_C1):
    """Constants of the lower-bound argument, recomputed from scratch."""
    H0, H1, H2, H3 = H
    C3 = 2.0 ** (-2.0 / a1) * C2 ** (-1.0 / a2)
    C4 = C3 ** d2 / (8.0 * C1)
    H2p = H2 + (H0 + H2) * d2 / a1
    eps0 = c1 * lam ** (-(H0 + sum(H) + H2p) / a1)
    return {"C3": C3, "C4": C4, "H2p": H2p, "eps0": eps0}


@dataclass
class Clause:
    holds: bool
    value: float
    bound: float
    margin: float
    witness: Optional[int] = None


@dataclass
class BoundConditions:
    lam: float
    H: tuple
    H2p: float
    R: float
    root: int
    clauses: dict
    V_R: float
    mass: float
    inner_radius: float
    d2: float = 1.0
    a1: float = 1.0

    @property
    def upper_pair(self):
        """Resistance-upper and volume-upper clauses together."""
        return self.clauses["resistance_upper"].holds and self.clauses["volume_upper"].holds

    @property
    def lower_pair(self):
        """Boundary-resistance and inner-volume clauses together."""
        return (self.clauses["resistance_lower"].holds
                and self.clauses["inner_volume_lower"].holds)

    @property
    def all_hold(self):
        return self.upper_pair and self.lower_pair

    def failed(self):
        return [c for c in CLAUSES if not self.clauses[c].holds]

    def recompute_H2p(self):
        H0, _, H2, _ = self.H
        return H2 + (H0 + H2) * self.d2 / self.a1

    def to_json(self):
        return {"lam": self.lam, "H": list(self.H), "H2p": self.H2p, "R": self.R,
                "root": self.root, "V_R": self.V_R, "mass": self.mass,
                "inner_radius": self.inner_radius, "all_hold": self.all_hold,
                "clauses": {k: asdict(v) for k, v in self.clauses.items()}}


def _oracle(g, oracle):
    return oracle if oracle is not None else ResistanceOracle(g)


def upper_bound(g, oracle=None):
    """``4 * diam_R * mu(G)``: an upper bound on the L^inf mixing time.

    Returns a dict with the value and its two ingredients.
    """
    o = _oracle(g, oracle)
    d = o.diameter()
    return {"value": 4.0 * d.value * o.mass, "diam_R": d.value, "mass": o.mass,
            "approximate": d.approximate}


def ball(g, root, R):
    """Boolean mask of ``{y : d(root, y) < R}``."""
    return g.distances_from(root) < R


def check_conditions(g, root, R, lam, H, spec, oracle=None):
    """Evaluate the four growth inequalities at radius ``R`` around ``root``.

    The clauses are, in order: resistance from the root bounded by
    ``lam^H0 r(d)`` inside the ball; ``V(R) <= lam^H1 v(R)``; resistance
    from the root to the complement at least ``lam^-H2 r(R)``; and the
    volume of the shrunken ball of radius ``C3 lam^(-(H0+H2)/a1) R`` at
    least ``lam^-H3 v`` of that radius.
    """
    if not lam >= 1:
        raise PreconditionFailed("lambda", "need lambda >= 1")
    if not R > 1:
        raise PreconditionFailed("radius", "need R > 1")
    H = tuple(float(h) for h in H)
    if len(H) != 4 or min(H) <= 0:
        raise PreconditionFailed("exponents", "need four positive exponents")
    H0, H1, H2, H3 = H
    o = _oracle(g, oracle)
    dist = g.distances_from(root)
    inside = dist < R
    if inside.all():
        raise BallIsWholeGraph(f"B({R}) contains every vertex")
    mu = o.mu
    res = o.resistances_from(root)
    out = {}

    idx = np.nonzero(inside)[0]
    bounds = lam ** H0 * spec.r(dist[idx])
    margins = bounds - res[idx]
    nontriv = idx != root
    if nontriv.any():
        k = int(np.argmin(np.where(nontriv, margins, np.inf)))
        out["resistance_upper"] = Clause(bool(np.all(margins >= 0)), float(res[idx][k]),
                                         float(bounds[k]), float(margins[k]), int(idx[k]))
    else:
        out["resistance_upper"] = Clause(True, 0.0, 0.0, 0.0, int(root))

    V = float(mu[inside].sum())
    vb = lam ** H1 * spec.v(R)
    out["volume_upper"] = Clause(V <= vb, V, vb, vb - V)

    outside = np.nonzero(~inside)[0]
    rb = o.effective_resistance([root], outside)
    lb = lam ** (-H2) * spec.r(R)
    out["resistance_lower"] = Clause(rb >= lb, rb, lb, rb - lb)

    s = spec.C3 * lam ** (-(H0 + H2) / spec.a1) * R
    Vs = float(mu[dist < s].sum())
    vs = lam ** (-H3) * spec.v(s)
    out["inner_volume_lower"] = Clause(Vs >= vs, Vs, vs, Vs - vs)

    H2p = H2 + (H0 + H2) * spec.d2 / spec.a1
    return BoundConditions(float(lam), H, H2p, float(R), int(root), out, V, o.mass, s,
                           spec.d2, spec.a1)


def lower_bound_global(g, conditions, spec):
    """``C4 lam^(-H2' - H3) v(R) r(R)``, a strict lower bound on the L^1 mixing time.

    Raises PreconditionFailed naming the first violated hypothesis.
    """
    c = conditions
    if not (c.lam > 1 and c.R > 1):
        raise PreconditionFailed("lambda-radius", "need lambda > 1 and R > 1")
    for name in CLAUSES:
        if not c.clauses[name].holds:
            raise PreconditionFailed(name)
    if not c.mass >= 4 * c.V_R:
        raise PreconditionFailed("mass", f"mu(G)={c.mass:g} < 4 V(R)={4 * c.V_R:g}")
    return spec.C4 * c.lam ** (-c.H2p - c.H[3]) * spec.v(c.R) * spec.r(c.R)


def point_radius(lam, H, spec, c1=DEFAULT_C1):
    """``eps0(lam)`` of the pointwise lower bound."""
    H0 = H[0]
    H2p = H[2] + (H[0] + H[2]) * spec.d2 / spec.a1
    return c1 * lam ** (-(H0 + sum(H) + H2p) / spec.a1)


def point_conditions(g, root, R, lam, H, spec, c1=DEFAULT_C1, oracle=None):
    """Conditions at ``R`` and at ``eps0(lam) R`` (both needed for the pointwise bound)."""
    eps0 = point_radius(lam, H, spec, c1)
    if eps0 * R <= 1:
        raise PreconditionFailed("radius-degenerate", f"eps0 R = {eps0 * R:g} <= 1")
    o = _oracle(g, oracle)
    return (check_conditions(g, root, R, lam, H, spec, o),
            check_conditions(g, root, eps0 * R, lam, H, spec, o))


@dataclass
class PointBound:
    value: float
    eps0: float
    c1: float
    bootstrap: dict
    conditional: bool = True


def lower_bound_point(g, root, conditions, spec, c1=None, oracle=None):
    """Lower bound on the L^1 mixing time started at ``root``.

    ``conditions`` is the pair returned by :func:`point_conditions`.  The
    value is conditional on ``c1``; the report also carries a numerical check
    of the exit-time estimate that the argument relies on.
    """
    c1 = DEFAULT_C1 if c1 is None else float(c1)
    cR, cE = conditions
    if not (cR.lam > 1 and cR.R > 1):
        raise PreconditionFailed("lambda-radius", "need lambda > 1 and R > 1")
    eps0 = point_radius(cR.lam, cR.H, spec, c1)
    if eps0 * cR.R <= 1:
        raise PreconditionFailed("radius-degenerate", f"eps0 R = {eps0 * cR.R:g} <= 1")
    if not math.isclose(cE.R, eps0 * cR.R, rel_tol=1e-12):
        raise PreconditionFailed("radius-mismatch", "second condition set is not at eps0 R")
    for which, c in (("R", cR), ("eps0 R", cE)):
        for name in CLAUSES:
            if not c.clauses[name].holds:
                raise PreconditionFailed(f"{name}@{which}")
    if not cR.mass >= 4 * cR.V_R:
        raise PreconditionFailed("mass")
    r_eps = eps0 * cR.R
    value = spec.C4 * cR.lam ** (-cR.H2p - cR.H[3]) * spec.v(r_eps) * spec.r(r_eps)
    boot = bootstrap_check(g, root, cR.R, eps0, cR.lam, cR.H, spec, c1, oracle)
    return PointBound(value, eps0, c1, boot)


def bootstrap_check(g, root, R, eps, lam, H, spec, c1=DEFAULT_C1, oracle=None):
    """Check ``P_y(tau_R <= t0) <= c1 lam^(H0 + sum H + H2') eps^a1`` on ``B(eps R)``.

    ``t0 = C4 lam^(-H2' - H3) v(eps R) r(eps R)``.  Returns the largest
    probability, the bound and the margin.
    """
    o = _oracle(g, oracle)
    H0, H1, H2, H3 = H
    H2p = H2 + (H0 + H2) * spec.d2 / spec.a1
    t0 = spec.C4 * lam ** (-H2p - H3) * spec.v(eps * R) * spec.r(eps * R)
    rhs = c1 * lam ** (H0 + sum(H) + H2p) * eps ** spec.a1
    dist = g.distances_from(root)
    B = np.nonzero(dist < R)[0]
    killed = o.green_killed(B)
    n = int(math.floor(t0))
    surv = killed.survival(n)[n]
    inner = dist[B] < eps * R
    worst = float(np.max(1.0 - surv[inner])) if inner.any() else 0.0
    return {"t0": t0, "max_prob": worst, "bound": rhs, "margin": rhs - worst,
            "holds": worst <= rhs}


@dataclass
class ExitCheck:
    conditions: BoundConditions
    exit_upper: Optional[dict] = None
    exit_lower: Optional[dict] = None
    tail_lower: Optional[dict] = None
    skipped: dict = field(default_factory=dict)

    def margins(self):
        return {k: v["margin"] for k, v in (("exit_upper", self.exit_upper),
                                            ("exit_lower", self.exit_lower),
                                            ("tail_lower", self.tail_lower)) if v}

    def to_json(self):
        return {"conditions": self.conditions.to_json(), "exit_upper": self.exit_upper,
                "exit_lower": self.exit_lower, "tail_lower": self.tail_lower,
                "skipped": self.skipped}


def exit_time_bounds_check(g, root, R, lam, H, spec, oracle=None, strict=False):
    """Exact exit-time moments and tails from the ball versus the growth bounds.

    Upper bound on ``E_x tau_R`` is asserted for x in ``B(R)`` when the
    upper pair of clauses holds; the lower bound on ``E_x tau_R`` and the
    tail bound on ``P_x(tau_R > n)`` are asserted on the shrunken ball when
    all four clauses hold.  Inapplicable checks are listed in ``skipped``
    (or raise PreconditionFailed with ``strict=True``).
    """
    o = _oracle(g, oracle)
    cond = check_conditions(g, root, R, lam, H, spec, o)
    H0, H1, H2, H3 = cond.H
    vr = spec.v(R) * spec.r(R)
    dist = g.distances_from(root)
    B = np.nonzero(dist < R)[0]
    killed = o.green_killed(B)
    rep = ExitCheck(cond)
    if cond.upper_pair:
        ub = 2 * lam ** (H0 + H1) * vr
        k = int(np.argmax(killed.exit_mean))
        rep.exit_upper = {"bound": ub, "max_exit_mean": float(killed.exit_mean[k]),
                          "witness": int(B[k]), "margin": float(ub - killed.exit_mean[k])}
    else:
        rep.skipped["exit_upper"] = cond.failed()
        if strict:
            raise PreconditionFailed(cond.failed()[0])
    if cond.all_hold:
        inner = dist[B] < cond.inner_radius
        lb = 2 * spec.C4 * lam ** (-cond.H2p - H3) * vr
        em = killed.exit_mean[inner]
        k = int(np.argmin(em))
        rep.exit_lower = {"bound": lb, "min_exit_mean": float(em[k]),
                          "witness": int(B[inner][k]), "margin": float(em[k] - lb)}
        ub = 2 * lam ** (H0 + H1) * vr
        n_max = int(math.floor(lb)) + 1
        surv = killed.survival(n_max)[:, inner]
        ns = np.arange(n_max + 1)
        rhs = (lb - ns) / ub
        gaps = surv - rhs[:, None]
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        rep.tail_lower = {"n_max": n_max, "worst_n": int(i), "witness": int(B[inner][j]),
                          "margin": float(gaps[i, j])}
    else:
        rep.skipped["exit_lower"] = rep.skipped["tail_lower"] = cond.failed()
        if strict:
            raise PreconditionFailed(cond.failed()[0])
    return rep


def hitting_bound_check(oracle, x, A, B):
    """``(P_x(T_A < T_B), R_eff(x, B) / R_eff(x, A))``; the first never exceeds the second."""
    lhs = oracle.hitting_probability(x, A, B)
    rhs = oracle.effective_resistance([x], B) / oracle.effective_resistance([x], A)
    return lhs, rhs


# scaling presets

@dataclass
class ExponentPreset:
    """Power-law growth profiles and the associated diameter and time scales."""

    family: str
    v_exp: float
    r_exp: float
    h: Callable
    gamma: Callable
    table: dict
    params: dict = field(default_factory=dict)

    def v(self, R):
        return R ** self.v_exp

    def r(self, R):
        return R ** self.r_exp

    def growth_spec(self, r_max):
        return GrowthSpec.power_law(self.v_exp, min(self.r_exp, 1.0), r_max, self.family)


def preset(family, **params):
    """Exponent table row for ``gasket``, ``gw-tree``, ``er-critical`` or ``srw-range``.

    ``gasket`` takes ``K`` (cells per level), ``L`` (length scale) and
    ``lam`` (resistance scale); ``gw-tree`` takes the stability index ``alpha``.
    """
    if family == "gasket":
        K, L, lam = params.get("K", 3), params.get("L", 2), params.get("lam", 5 / 3)
        return ExponentPreset(
            family, math.log(K) / math.log(L), math.log(lam) / math.log(L),
            lambda N: float(L) ** N, lambda N: float(K * lam) ** N,
            {"v": "R^(log K/log L)", "r": "R^(log lam/log L)", "h": "L^N", "gamma": "(K lam)^N"},
            {"K": K, "L": L, "lam": lam})
    if family == "gw-tree":
        a = float(params.get("alpha", 2.0))
        if not 1 < a <= 2:
            raise UnknownFamily(f"gw-tree needs alpha in (1, 2], got {a}")
        return ExponentPreset(
            family, a / (a - 1), 1.0, lambda N: N ** (1 - 1 / a), lambda N: N ** (2 - 1 / a),
            {"v": "R^(alpha/(alpha-1))", "r": "R", "h": "N^(1-1/alpha)",
             "gamma": "N^(2-1/alpha)"}, {"alpha": a})
    if family == "er-critical":
        return ExponentPreset(family, 2.0, 1.0, lambda N: N ** (1 / 3), lambda N: float(N),
                              {"v": "R^2", "r": "R", "h": "N^(1/3)", "gamma": "N"})
    if family == "srw-range":
        return ExponentPreset(family, 1.0, 1.0, lambda N: float(N), lambda N: float(N) ** 2,
                              {"v": "R", "r": "R", "h": "N", "gamma": "N^2"})
    raise UnknownFamily(f"unknown family {family!r}")


def wilson_interval(k, n, level=0.95):
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def ensemble_tail_bounds(records, preset_row, N, lambdas, thetas=None, c1=1.0, C1=1.0):
    """Empirical tails of an ensemble against the combined resistance/volume bound.

    Parameters
    ----------
    records : list of dict
        One per draw, with ``diam_R``, ``mass`` and ``t_mix_inf``; optionally
        ``t_mix_1`` and ``conditions`` (a dict ``lam -> bool``) for the
        lower-tail part.
    preset_row : ExponentPreset
    N : int
        Size parameter of the ensemble.
    lambdas : sequence of float
    thetas : sequence of float, optional
        Grid for the infimum over theta (default 101 points on [0, 1]).
    c1, C1 : float
        Radius factor of the lower-tail conditions and the volume constant
        entering the lower-tail right-hand side.
    """
    if len(records) < MIN_DRAWS:
        raise InsufficientDraws(f"need at least {MIN_DRAWS} draws, got {len(records)}")
    thetas = np.linspace(0, 1, 101) if thetas is None else np.asarray(thetas, dtype=float)
    n = len(records)
    hN = preset_row.h(N)
    rh, vh, gam = preset_row.r(hN), preset_row.v(hN), preset_row.gamma(N)
    diam = np.array([r["diam_R"] for r in records], dtype=float)
    mass = np.array([r["mass"] for r in records], dtype=float)
    tinf = np.array([r["t_mix_inf"] for r in records], dtype=float)

    def p1(lam):
        return 1.0 if lam < 1 else float(np.mean(diam >= lam * rh))

    def p2(lam):
        return 1.0 if lam < 1 else float(np.mean(mass >= lam * vh))

    rows = []
    for lam in lambdas:
        vals = [p1(lam ** th / 8) + p2(lam ** (1 - th)) for th in thetas]
        j = int(np.argmin(vals))
        k = int(np.sum(tinf >= lam * gam))
        lo, hi = wilson_interval(k, n)
        row = {"lam": float(lam), "empirical": k / n, "ci_low": lo, "ci_high": hi,
               "bound": float(vals[j]), "theta": float(thetas[j]),
               "holds": bool(vals[j] >= lo)}
        if "t_mix_1" in records[0]:
            t1 = np.array([r["t_mix_1"] for r in records], dtype=float)
            k1 = int(np.sum(t1 <= gam / lam))
            row["lower_empirical"] = k1 / n
            row["lower_ci"] = wilson_interval(k1, n)
        if "conditions" in records[0] and lam in records[0]["conditions"]:
            fail = float(np.mean([not r["conditions"][lam] for r in records]))
            scale = lam / (4 * C1 * c1 ** preset_row.v_exp)
            p2_low = 1.0 if scale < 1 else float(np.mean(mass < vh / scale))
            row["lower_rhs"] = 2 * fail + p2_low
        rows.append(row)
    return {"N": N, "draws": n, "gamma": gam, "rows": rows,
            "all_hold": all(r["holds"] for r in rows)}
