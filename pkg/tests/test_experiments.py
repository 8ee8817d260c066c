import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixlab.errors import InsufficientDraws, InsufficientSizes
from mixlab.experiments import (converge, converge_svg, ecdf_svg, fit_tail, ks_distance,
                                measure, measure_ensemble, summarize, tails, time_scale)
from mixlab.graph import cycle_graph, path_graph
from mixlab.kernel import KernelEvaluator

from conftest import FROZEN, SEED


def test_time_scales():
    assert time_scale("box", 10) == 200
    assert time_scale("er", 1000) == 1000
    assert time_scale("gw", 100) == pytest.approx(math.sqrt(2) * 1000)
    assert time_scale("gw", 100, {"offspring": "stable:1.5"}) == pytest.approx(100 ** (4 / 3))
    assert time_scale("gasket", 3) == 125


def test_measure_matches_evaluator():
    g = cycle_graph(64)
    rec = measure(g, p=1, upper=True, extra_p=("inf",))
    assert rec["t_int_1"] == FROZEN["C64"]["t_mix_1"]
    assert rec["t_interp_1"] <= rec["t_int_1"] and rec["t_interp_1"] > rec["t_int_1"] - 1
    assert rec["t_int_inf"] == KernelEvaluator(g).mixing_time(p="inf").t_mix
    assert rec["upper_bound"] == pytest.approx(4 * rec["diam_R"] * rec["mass"])


def test_rooted_measurement():
    g = path_graph(4)
    rec = measure(g, p=1, rooted=True, resistance=False)
    assert rec["t_int_1"] == KernelEvaluator(g).vertex_mixing_time(g.root, 1)[0]
    assert "diam_R" not in rec


def test_ensemble_records_are_ordered_and_reproducible():
    a = measure_ensemble("gw", 60, 5, SEED)
    b = measure_ensemble("gw", 60, 5, SEED, jobs=2)
    assert [r["index"] for r in a] == list(range(5))
    assert [r["t_int_1"] for r in a] == [r["t_int_1"] for r in b]


def test_converge_on_path_boxes():
    res = converge("box", [8, 16, 32], p="inf")
    assert res.oracle["limit"] == pytest.approx(FROZEN["rbm_linf_limit"], abs=1e-8)
    assert res.oracle["non_increasing"]
    assert res.summary[-1]["relative_error"] < 0.07
    json.dumps(res.to_json())
    lines = res.summary_csv().splitlines()
    assert len(lines) == 4 and lines[0].startswith("N,gamma")
    assert "<svg" in converge_svg(res)


def test_converge_needs_two_sizes():
    with pytest.raises(InsufficientSizes):
        converge("box", [8])


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30),
       st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_ks_distance_bounds(a, b):
    d = ks_distance(a, b)
    assert 0 <= d <= 1
    assert ks_distance(a, a) == 0


def test_summary_quantiles():
    s = summarize(np.arange(101))
    assert s["q50"] == 50 and s["q05"] == 5 and s["mean"] == 50


def test_fit_tail_recovers_rate():
    lam = np.array([1.0, 2, 3, 4])
    fit = fit_tail(lam, np.exp(-0.7 * lam))
    assert fit["slope"] == pytest.approx(-0.7) and fit["points"] == 4
    fit = fit_tail(lam, np.exp(-0.3 * lam ** 2), "quadratic")
    assert fit["slope"] == pytest.approx(-0.3)
    assert fit_tail(lam, [0.5, 0, 0, 0]) is None


def _fake(n, seed=SEED):
    rng = np.random.default_rng(seed)
    return [{"t_interp_inf": float(v), "t_interp_1": float(v) / 3}
            for v in rng.exponential(100, n)]


def test_tails_from_records():
    recs = _fake(200)
    out = tails("er", 100, 200, [0.5, 1, 2, 4], records=recs)
    assert out["upper_monotone"] and not out["fit_skipped"]
    up = [r["upper"] for r in out["rows"]]
    x = np.array([r["t_interp_inf"] for r in recs]) / 100
    assert up == [float(np.mean(x >= lam)) for lam in (0.5, 1, 2, 4)]
    # exponential(1) tail: slope near -1 on the linear axis
    assert -1.5 < out["upper_fit"]["slope"] < -0.6


def test_tails_single_lambda_skips_fit():
    out = tails("er", 100, 60, [2], records=_fake(60))
    assert out["fit_skipped"] and out["upper_fit"] is None


def test_tails_need_draws():
    with pytest.raises(InsufficientDraws):
        tails("er", 100, 10, [1, 2])


def test_ecdf_svg():
    svg = ecdf_svg({"a": [1, 2, 3], "b": [2, 2, 2]}, title="t")
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
