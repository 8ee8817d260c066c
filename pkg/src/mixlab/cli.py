"""Command line front end: ``mixlab <command> [options]``.

Exit codes: 0 success, 2 bad input, 3 horizon exceeded, 4 time-grid
mismatch, 5 violated precondition.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .bounds import (GrowthSpec, check_conditions, exit_time_bounds_check,
                     lower_bound_global, upper_bound)
from .ensembles import generate, make_draw, write_ensemble
from .errors import MixlabError
from .experiments import _plain, converge, converge_svg, tails
from .graph import read_graph
from .kernel import KernelEvaluator
from .resistance import ResistanceOracle
from .sgh import FiniteTriple, delta_estimate

EXIT_INPUT = 2


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise MixlabError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _floats(text):
    return [float(x) for x in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(x) for x in str(text).replace(",", " ").split()]


def _params(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise MixlabError(f"family parameter {item!r} must look like key=value")
        k, v = item.split("=", 1)
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


def _emit(args, payload, csv_text=None):
    if args.format == "csv" and csv_text is not None:
        text = csv_text
    else:
        text = json.dumps(_plain(payload), indent=2, default=str) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_graph(args):
    return read_graph(args.graph, exact=True if getattr(args, "rational", False) else None)


# commands

def cmd_compute(args):
    g = _load_graph(args)
    ev = KernelEvaluator(g, backend=args.backend)
    if args.root_only:
        root = g.root if args.vertex is None else args.vertex
        m, t = ev.vertex_mixing_time(root, args.p, args.threshold, horizon=args.horizon)
        payload = {"p": args.p, "vertex": root, "t_integer": m, "t_interpolated": t}
        _emit(args, payload)
        return 0
    rep = ev.mixing_time(args.p, args.threshold, args.mode, horizon=args.horizon,
                         curves=args.csv or args.format == "csv",
                         rational=True if args.rational else None)
    payload = rep.to_json()
    payload["graph"] = {"vertices": g.n, "edges": g.edge_count, "root": g.root}
    if args.csv:
        args.format = "csv"
    _emit(args, payload, rep.to_csv() if args.format == "csv" else None)
    return 0


def cmd_converge(args):
    res = converge(args.family, _ints(args.sizes), args.draws, args.seed, args.p,
                   _params(args.param), args.jobs)
    res.config["config_file"] = args.config_echo
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(converge_svg(res))
    _emit(args, res.to_json(), res.summary_csv() if args.format == "csv" else None)
    return 0


def cmd_tails(args):
    out = tails(args.family, args.size, args.draws, _floats(args.lambdas), args.seed,
                _params(args.param), args.jobs)
    out["config_file"] = args.config_echo
    if not args.keep_records:
        out.pop("records")
    if args.format == "csv":
        lines = ["lam,upper,upper_ci_low,upper_ci_high,lower,lower_ci_low,lower_ci_high"]
        for r in out["rows"]:
            lines.append(",".join(repr(float(v)) for v in
                                  (r["lam"], r["upper"], *r["upper_ci"], r["lower"],
                                   *r["lower_ci"])))
        _emit(args, out, "\n".join(lines) + "\n")
    else:
        _emit(args, out)
    return 0


def bounds_report(g, root, R=None, lam=None, H=None, v_exp=None, r_exp=None, p_values=(1, "inf")):
    """Upper bound, measured mixing times and, if parameters are given, the
    growth conditions, the lower bound and the exit-time margins."""
    o = ResistanceOracle(g)
    ev = KernelEvaluator(g)
    ub = upper_bound(g, o)
    rep = {"graph": {"vertices": g.n, "edges": g.edge_count, "root": root},
           "upper_bound": ub, "measured": {}}
    for p in p_values:
        t = ev.mixing_time(p).t_integer
        rep["measured"][str(p)] = t
    t_inf = rep["measured"].get("inf")
    if t_inf is not None:
        rep["upper_slack"] = ub["value"] - t_inf
        rep["upper_holds"] = bool(t_inf <= ub["value"])
    if R is not None:
        r_max = max(2.0 * R, float(np.max(g.distances_from(root))) + 1.0)
        spec = GrowthSpec.power_law(v_exp, r_exp, r_max, "power-law")
        cond = check_conditions(g, root, R, lam, H, spec, o)
        rep["growth"] = spec.to_json()
        rep["conditions"] = cond.to_json()
        ex = exit_time_bounds_check(g, root, R, lam, H, spec, o)
        rep["exit_time"] = ex.to_json()
        lb = lower_bound_global(g, cond, spec)
        rep["lower_bound"] = lb
        t1 = rep["measured"].get("1")
        if t1 is not None:
            rep["lower_slack"] = t1 - lb
            rep["lower_holds"] = bool(t1 > lb)
    return rep


def cmd_bounds(args):
    if args.graph:
        g = read_graph(args.graph)
    elif args.family:
        g = make_draw(args.family, args.size, args.seed, args.index, _params(args.param)).graph
    else:
        raise MixlabError("give a graph file or --family/--size")
    root = args.root if args.root is not None else (g.root if g.root is not None else 0)
    H = _floats(args.H) if args.H else None
    rep = bounds_report(g, root, args.radius, args.lam, H, args.v_exp, args.r_exp)
    _emit(args, rep)
    return 0


def cmd_ghdist(args):
    A, B = FiniteTriple.load(args.triple_a), FiniteTriple.load(args.triple_b)
    est = delta_estimate(A, B, budget=args.budget, seed=args.seed)
    _emit(args, est.to_json())
    return 0


def cmd_generate(args):
    draws = generate(args.family, args.size, args.draws, args.seed, _params(args.param),
                     args.jobs)
    outdir = args.out or f"{args.family}_N{args.size}_seed{args.seed}"
    entries = write_ensemble(draws, outdir)
    sys.stdout.write(json.dumps({"directory": outdir, "draws": len(entries)}) + "\n")
    return 0


# parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=None, help="output file (directory for generate)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--config", default=None, help="key = value defaults file")

    ap = argparse.ArgumentParser(prog="mixlab", description="Mixing times of random walks "
                                 "on weighted graphs.")
    ap.add_argument("--version", action="version", version=f"mixlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", parents=[common], help="mixing report of a graph file")
    c.add_argument("graph")
    c.add_argument("--p", default="1", help="1, 2, ... or inf")
    c.add_argument("--threshold", type=float, default=0.25)
    c.add_argument("--mode", choices=("integer", "interpolated"), default="integer")
    c.add_argument("--horizon", type=int, default=None)
    c.add_argument("--backend", choices=("auto", "spectral", "matrix-power"), default="auto")
    c.add_argument("--csv", action="store_true", help="emit the (m, sup D) curve as CSV")
    c.add_argument("--rational", action="store_true", help="exact arithmetic")
    c.add_argument("--root-only", action="store_true", help="mixing time from the root")
    c.add_argument("--vertex", type=int, default=None)
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("converge", parents=[common], help="rescaled mixing times over sizes")
    v.add_argument("--family", required=True)
    v.add_argument("--sizes", required=True, help="comma separated")
    v.add_argument("--draws", type=int, default=1)
    v.add_argument("--p", default="1")
    v.add_argument("--param", action="append", help="family parameter key=value")
    v.add_argument("--svg", default=None, help="write an ECDF plot")
    v.set_defaults(func=cmd_converge)

    t = sub.add_parser("tails", parents=[common], help="tail probabilities of an ensemble")
    t.add_argument("--family", required=True)
    t.add_argument("--size", type=int, required=True)
    t.add_argument("--draws", type=int, default=100)
    t.add_argument("--lambdas", required=True, help="comma separated")
    t.add_argument("--param", action="append")
    t.add_argument("--keep-records", action="store_true")
    t.set_defaults(func=cmd_tails)

    b = sub.add_parser("bounds", parents=[common], help="upper/lower mixing bounds")
    b.add_argument("graph", nargs="?")
    b.add_argument("--family")
    b.add_argument("--size", type=int)
    b.add_argument("--index", type=int, default=0)
    b.add_argument("--param", action="append")
    b.add_argument("--root", type=int, default=None)
    b.add_argument("--radius", type=float, default=None)
    b.add_argument("--lam", type=float, default=2.0)
    b.add_argument("--H", default="1,1,1,1", help="four exponents H0..H3")
    b.add_argument("--v-exp", type=float, default=1.0)
    b.add_argument("--r-exp", type=float, default=1.0)
    b.set_defaults(func=cmd_bounds)

    h = sub.add_parser("ghdist", parents=[common], help="distance bound between two triples")
    h.add_argument("triple_a")
    h.add_argument("triple_b")
    h.add_argument("--budget", type=int, default=100000)
    h.set_defaults(func=cmd_ghdist)

    gn = sub.add_parser("generate", parents=[common], help="write an ensemble to disk")
    gn.add_argument("--family", required=True)
    gn.add_argument("--size", type=int, required=True)
    gn.add_argument("--draws", type=int, default=1)
    gn.add_argument("--param", action="append")
    gn.set_defaults(func=cmd_generate)
    return ap


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    # config values become defaults of the chosen subcommand, so explicit
    # flags still win and options supplied by the file are no longer required
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    subs = parser._subparsers._group_actions[0].choices
    cfg = None
    if path is not None and command in subs:
        cfg = read_config(path)
        sub = subs[command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise MixlabError(f"unknown config keys: {', '.join(unknown)}")
        typed = {}
        for a in sub._actions:
            if a.dest not in cfg:
                continue
            val = cfg[a.dest]
            if isinstance(a, argparse._StoreTrueAction):
                val = val.lower() in ("1", "true", "yes", "on")
            elif isinstance(a, argparse._AppendAction):
                val = [s.strip() for s in val.split(";") if s.strip()]
            elif a.type is not None:
                val = a.type(val)
            typed[a.dest] = val
            a.required = False
        sub.set_defaults(**typed)
    args = parser.parse_args(argv)
    args.config_echo = cfg
    return args


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except MixlabError as exc:
        sys.stderr.write(f"mixlab: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"mixlab: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
