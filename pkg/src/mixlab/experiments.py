"""Convergence and tail experiments over graph ensembles.

Each draw is measured independently from ``(family, size, seed, draw
index)``, so records can be produced by any number of workers and merged by
draw index.
"""
from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import ks_2samp, linregress

from .bounds import upper_bound, wilson_interval
from .ensembles import deterministic_box, family_key, make_draw
from .errors import InsufficientDraws, InsufficientSizes, UnknownFamily
from .graph import Metric
from .kernel import INF, KernelEvaluator, parse_p
from .limits import path_time_scale, rbm_mixing_time
from .resistance import ResistanceOracle

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
MIN_TAIL_DRAWS = 50


# time scales

def offspring_sigma(law):
    return {"poisson1": 1.0, "geometric-half": math.sqrt(2.0)}.get(law)


def time_scale(family, N, params=None):
    """``gamma(N)`` used to rescale mixing times of a family.

    ``box``: ``2 d N^2`` (diffusive, unit-speed cosine-series limit);
    ``er``: ``N``; ``gw``: ``sqrt(2) N^(3/2) / sigma`` for finite-variance
    offspring, ``N^(2 - 1/alpha)`` for ``stable:alpha``; ``gasket``:
    ``5^level``; ``range``: ``N^2``.
    """
    params = params or {}
    fam = family_key(family)
    if fam == "box":
        return 2.0 * params.get("d", 1) * N ** 2
    if fam == "er":
        return float(N)
    if fam == "gw":
        law = params.get("offspring", "poisson1")
        sigma = offspring_sigma(law)
        if sigma is not None:
            return math.sqrt(2.0) * N ** 1.5 / sigma
        alpha = float(law.split(":", 1)[1]) if ":" in law else 1.5
        return N ** (2.0 - 1.0 / alpha)
    if fam == "gasket":
        return 5.0 ** N
    if fam == "range":
        return float(N) ** 2
    raise UnknownFamily(f"unknown family {family!r}")


def rooted_default(family):
    """Whether the family's limit theorem concerns the walk from its root."""
    return family_key(family) in ("er", "gw")


# per-draw measurement

def _draw_graph(family, N, seed, index, params):
    fam = family_key(family)
    if fam == "box":
        d = (params or {}).get("d", 1)
        g = deterministic_box(N, d).with_metric(Metric.scaled(1.0 / N))
        return g, {}
    draw = make_draw(fam, N, seed, index, params)
    return draw.graph, draw.meta


def measure(g, p=1, rooted=False, resistance=True, upper=False, extra_p=()):
    """Mixing times of one graph: integer and interpolated, plus optional extras."""
    p = parse_p(p)
    ev = KernelEvaluator(g)
    rec = {"vertices": g.n, "mass": float(g.vertex_weights().sum())}
    for q in (p,) + tuple(parse_p(e) for e in extra_p):
        key = _pkey(q)
        if rooted:
            mi, mr = ev.vertex_mixing_time(g.root, q)
        else:
            rep = ev.mixing_time(q, mode="interpolated", per_vertex=False)
            mi, mr = rep.t_integer, rep.t_mix
        rec[f"t_int_{key}"] = int(mi)
        rec[f"t_interp_{key}"] = float(mr)
    if resistance or upper:
        d = ResistanceOracle(g).diameter()
        rec["diam_R"] = d.value
        rec["diam_R_approximate"] = d.approximate
        if upper:
            rec["upper_bound"] = 4.0 * d.value * rec["mass"]
    return rec


def _pkey(p):
    return "inf" if p == INF else str(int(p)) if float(p).is_integer() else str(p)


def _measure_task(args):
    family, N, seed, index, params, p, rooted, resistance, upper, extra_p = args
    t0 = time.perf_counter()
    g, meta = _draw_graph(family, N, seed, index, params)
    rec = {"family": family_key(family), "N": N, "seed": seed, "index": index}
    rec.update(measure(g, p, rooted, resistance, upper, extra_p))
    rec["meta"] = meta
    rec["seconds"] = time.perf_counter() - t0
    return rec


def measure_ensemble(family, N, draws, seed=0, params=None, p=1, rooted=None,
                     resistance=False, upper=False, extra_p=(), jobs=1):
    """Records for draws ``0..draws-1``, ordered by draw index."""
    if rooted is None:
        rooted = rooted_default(family)
    if family_key(family) == "box":
        draws = 1
    args = [(family, N, seed, i, params, p, rooted, resistance, upper, tuple(extra_p))
            for i in range(draws)]
    if jobs <= 1:
        return [_measure_task(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        out = list(ex.map(_measure_task, args))
    return sorted(out, key=lambda r: r["index"])


# results

@dataclass
class ExperimentResult:
    config: dict
    records: list
    summary: list = field(default_factory=list)
    oracle: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return _plain(asdict(self))

    def records_csv(self):
        cols = RECORD_COLUMNS
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.records:
            w.writerow([r.get(c, "") for c in cols])
        return buf.getvalue()

    def summary_csv(self):
        cols = SUMMARY_COLUMNS
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for s in self.summary:
            w.writerow([s.get(c, "") for c in cols])
        return buf.getvalue()


RECORD_COLUMNS = ["family", "N", "seed", "index", "vertices", "mass", "t_int_1", "t_interp_1",
                  "t_int_2", "t_interp_2", "t_int_inf", "t_interp_inf", "diam_R",
                  "upper_bound", "rescaled"]
SUMMARY_COLUMNS = ["N", "gamma", "draws", "mean", "q05", "q25", "q50", "q75", "q95",
                   "ks_previous", "relative_error"]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def ks_distance(a, b):
    # only the statistic is used; the asymptotic p-value warns on tiny samples
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(ks_2samp(a, b, method="asymp").statistic)


def summarize(samples):
    x = np.asarray(samples, dtype=float)
    qs = np.quantile(x, QUANTILES)
    out = {"draws": int(x.size), "mean": float(x.mean())}
    out.update({f"q{int(round(q * 100)):02d}": float(v) for q, v in zip(QUANTILES, qs)})
    return out


def converge(family, sizes, draws=1, seed=0, p=1, params=None, jobs=1, rooted=None,
             resistance=False, oracle_points=2048):
    """Rescaled interpolated mixing times across a ladder of sizes.

    For the path family the series limit of reflected Brownian motion is
    attached together with the relative error at each size.
    """
    fam = family_key(family)
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise InsufficientSizes("need at least two sizes")
    if draws < 1:
        raise InsufficientDraws("need at least one draw per size")
    p = parse_p(p)
    key = _pkey(p)
    params = dict(params or {})
    cfg = {"family": fam, "sizes": sizes, "draws": draws, "seed": seed, "p": key,
           "params": params, "rooted": rooted_default(fam) if rooted is None else rooted}
    res = ExperimentResult(cfg, [])
    prev = None
    limit = None
    if fam == "box" and params.get("d", 1) == 1:
        limit, argmax = rbm_mixing_time(p, points=oracle_points)
        res.oracle = {"limit": limit, "argmax_x": argmax, "points": oracle_points,
                      "time_scale": "2 N^2"}
    for N in sizes:
        recs = measure_ensemble(fam, N, draws, seed, params, p, cfg["rooted"], resistance,
                                jobs=jobs)
        gam = time_scale(fam, N, params)
        vals = []
        for r in recs:
            r["gamma"] = gam
            r["rescaled"] = r[f"t_interp_{key}"] / gam
            vals.append(r["rescaled"])
        s = {"N": N, "gamma": gam}
        s.update(summarize(vals))
        s["ks_previous"] = ks_distance(prev, vals) if prev is not None else None
        if limit is not None:
            s["relative_error"] = abs(s["mean"] - limit) / limit
        res.summary.append(s)
        res.records.extend(recs)
        prev = vals
    if limit is not None:
        errs = [s["relative_error"] for s in res.summary]
        res.oracle["errors"] = errs
        res.oracle["non_increasing"] = bool(all(b <= a for a, b in zip(errs, errs[1:])))
    return res


# tails

def fit_tail(lams, probs, axis="linear"):
    """Fit ``log P`` against ``lam`` (``axis="linear"``) or ``lam^2`` (``"quadratic"``).

    Points with zero empirical probability are dropped.  Returns ``None``
    when fewer than two points remain.
    """
    lams = np.asarray(lams, dtype=float)
    probs = np.asarray(probs, dtype=float)
    keep = probs > 0
    if keep.sum() < 2:
        return None
    x = lams[keep] if axis == "linear" else lams[keep] ** 2
    y = np.log(probs[keep])
    if np.ptp(x) == 0:
        return None
    fit = linregress(x, y)
    se = float(fit.stderr) if np.isfinite(fit.stderr) else float("nan")
    return {"axis": axis, "slope": float(fit.slope), "intercept": float(fit.intercept),
            "stderr": se, "band": [float(fit.slope) - 1.96 * se, float(fit.slope) + 1.96 * se],
            "points": int(keep.sum())}


def tails(family, N, draws, lambdas, seed=0, params=None, jobs=1, upper_p="inf", lower_p=1,
          scale=None, records=None):
    """Empirical upper and lower tails of rescaled mixing times.

    Upper tail ``P(t^upper_p / gamma >= lam)``, lower tail
    ``P(t^lower_p / gamma <= 1 / lam)``, both for the whole graph.  The upper
    tail is fitted on a ``lam`` axis for ER and a ``lam^2`` axis for trees.
    """
    fam = family_key(family)
    if draws < MIN_TAIL_DRAWS:
        raise InsufficientDraws(f"need at least {MIN_TAIL_DRAWS} draws, got {draws}")
    params = dict(params or {})
    lambdas = [float(x) for x in lambdas]
    up, lo = parse_p(upper_p), parse_p(lower_p)
    if scale is None:
        scale = {"er": float(N), "gw": float(N) ** 1.5}.get(fam, time_scale(fam, N, params))
    if records is None:
        extra = () if lo == up else (lo,)
        records = measure_ensemble(fam, N, draws, seed, params, up, rooted=False,
                                   resistance=False, extra_p=extra, jobs=jobs)
    xu = np.array([r[f"t_interp_{_pkey(up)}"] for r in records]) / scale
    xl = np.array([r[f"t_interp_{_pkey(lo)}"] for r in records]) / scale
    n = len(records)
    rows = []
    for lam in lambdas:
        ku = int(np.sum(xu >= lam))
        kl = int(np.sum(xl <= 1.0 / lam))
        rows.append({"lam": lam, "upper": ku / n, "upper_ci": wilson_interval(ku, n),
                     "lower": kl / n, "lower_ci": wilson_interval(kl, n)})
    upper = [r["upper"] for r in rows]
    lower = [r["lower"] for r in rows]
    axis = "quadratic" if fam == "gw" else "linear"
    fit_up = fit_tail(lambdas, upper, axis) if len(lambdas) > 1 else None
    fit_lo = fit_tail(lambdas, lower, "linear") if len(lambdas) > 1 else None
    out = {"family": fam, "N": N, "draws": n, "seed": seed, "scale": scale,
           "upper_p": _pkey(up), "lower_p": _pkey(lo), "rows": rows,
           "upper_fit": fit_up, "lower_fit": fit_lo,
           "fit_skipped": len(lambdas) < 2,
           "upper_monotone": bool(all(b <= a for a, b in zip(upper, upper[1:]))),
           "lower_monotone": bool(all(b <= a for a, b in zip(lower, lower[1:]))),
           "records": records}
    return out


# plots

def ecdf_svg(groups, width=480, height=320, title=""):
    """Empirical distribution functions as a standalone SVG string.

    ``groups`` maps a label to a sequence of samples.
    """
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    allx = np.concatenate([np.asarray(v, dtype=float) for v in groups.values()])
    lo, hi = float(allx.min()), float(allx.max())
    if hi == lo:
        hi = lo + 1.0
    pad = 40

    def sx(x):
        return pad + (x - lo) / (hi - lo) * (width - 2 * pad)

    def sy(y):
        return height - pad - y * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="20" font-size="12">{title}</text>',
             f'<line x1="{pad}" y1="{sy(0)}" x2="{width - pad}" y2="{sy(0)}" stroke="black"/>',
             f'<line x1="{pad}" y1="{sy(0)}" x2="{pad}" y2="{sy(1)}" stroke="black"/>',
             f'<text x="{pad}" y="{height - 10}" font-size="10">{lo:.4g}</text>',
             f'<text x="{width - pad}" y="{height - 10}" font-size="10">{hi:.4g}</text>']
    for k, (label, vals) in enumerate(groups.items()):
        x = np.sort(np.asarray(vals, dtype=float))
        y = np.arange(1, x.size + 1) / x.size
        pts = [(sx(x[0]), sy(0))]
        for xi, yi, yp in zip(x, y, np.r_[0, y[:-1]]):
            pts += [(sx(xi), sy(yp)), (sx(xi), sy(yi))]
        path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
        c = colors[k % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{c}" points="{path}"/>')
        parts.append(f'<text x="{width - pad - 60}" y="{pad + 14 * k}" font-size="10" '
                     f'fill="{c}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def converge_svg(result):
    key = result.config["p"]
    groups = {}
    for r in result.records:
        groups.setdefault(f"N={r['N']}", []).append(r["rescaled"])
    return ecdf_svg(groups, title=f"{result.config['family']} rescaled t_mix^{key}")
