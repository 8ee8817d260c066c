import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixlab.errors import AmbientTooLargeForExact, GridMismatch, InvalidCorrespondence
from mixlab.graph import Metric, path_graph, cycle_graph, WeightedGraph
from mixlab.kernel import KernelEvaluator
from mixlab.limits import path_time_scale, rbm_kernel
from mixlab.sgh import (LABEL, Correspondence, FiniteTriple, delta_estimate, delta_upper,
                        distortion, equivalent, glued_space, graph_triple, hausdorff,
                        prohorov, resistance_tightness_check, tightness_modulus)

from conftest import SEED, random_triple


def line(points):
    p = np.asarray(points, dtype=float)
    return np.abs(p[:, None] - p[None, :])


def two_point(gap, knots=(1.0,)):
    return FiniteTriple(line([0, gap]), [0.5, 0.5], knots, np.ones((len(knots), 2, 2)))


# Hausdorff and Prohorov

def test_hausdorff_examples():
    d = line([0, 1, 3, 7])
    assert hausdorff([0, 2], [0, 2], d) == 0
    assert hausdorff([1], [3], d) == 6
    assert hausdorff([0], [0, 1, 3], d) == 7


def test_prohorov_examples():
    d = line([0, 0.3, 2.0])
    mu = np.array([0.2, 0.5, 0.3])
    assert prohorov(mu, mu, d)[0] == 0
    assert prohorov([1, 0, 0], [0, 1, 0], d)[0] == pytest.approx(0.3)
    assert prohorov([1, 0, 0], [0, 0, 1], d)[0] == pytest.approx(1.0)


@given(st.floats(0.01, 3))
def test_prohorov_point_masses(gap):
    d = line([0, gap])
    val, used = prohorov([1, 0], [0, 1], d)
    assert val == pytest.approx(min(gap, 1.0)) and used == "exact"


def test_prohorov_exact_below_coupling_bound():
    rng = np.random.default_rng(SEED)
    for _ in range(20):
        pts = rng.random((8, 2))
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(axis=2))
        mu, nu = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
        ex = prohorov(mu, nu, d, "exact")[0]
        lp = prohorov(mu, nu, d, "coupling")[0]
        assert ex <= lp + 1e-9


def test_prohorov_exact_size_guard():
    d = line(range(16))
    mu = np.full(16, 1 / 16)
    with pytest.raises(AmbientTooLargeForExact):
        prohorov(mu, mu, d, "exact")
    assert prohorov(mu, mu, d)[1] == "coupling"


@given(st.integers(0, 2 ** 32 - 1))
def test_prohorov_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    d = line(rng.random(6) * 2)
    mu, nu = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
    a, b = prohorov(mu, nu, d)[0], prohorov(nu, mu, d)[0]
    assert a == b and 0 <= a <= 1


# correspondences and distortion

def test_correspondence_validation():
    with pytest.raises(InvalidCorrespondence):
        Correspondence([(0, 0)], 2, 1)
    c = Correspondence.from_maps([1, 0], [1, 1])
    assert c.pairs == [(0, 1), (1, 0), (1, 1)]
    assert c.transpose().pairs == [(0, 1), (1, 0), (1, 1)]
    assert Correspondence.identity(2).compose(c).pairs == c.pairs


def test_distortion_two_point_spaces():
    a, b = 1.0, 3.0
    dA, dB = line([0, a]), line([0, b])
    full = Correspondence([(0, 0), (0, 1), (1, 0), (1, 1)], 2, 2)
    assert distortion(full, dA, dB) == max(a, b)
    assert distortion(Correspondence.identity(2), dA, dB) == abs(a - b)


@given(st.integers(0, 2 ** 32 - 1))
def test_sub_correspondence_has_smaller_distortion(seed):
    rng = np.random.default_rng(seed)
    A, B = random_triple(rng, 3), random_triple(rng, 3)
    base = Correspondence.from_maps(rng.integers(0, 3, 3), rng.integers(0, 3, 3))
    extra = [(int(rng.integers(3)), int(rng.integers(3))) for _ in range(3)]
    sup = Correspondence(base.pairs + extra, 3, 3)
    assert distortion(base, A.dist, B.dist) <= distortion(sup, A.dist, B.dist)


@given(st.integers(0, 2 ** 32 - 1))
def test_glued_space_is_metric(seed):
    rng = np.random.default_rng(seed)
    A, B = random_triple(rng), random_triple(rng)
    c = Correspondence.from_maps(rng.integers(0, B.n, A.n), rng.integers(0, A.n, B.n))
    d, rho = glued_space(A, B, c)
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0)
    assert np.all(d[:, :, None] <= d[:, None, :] + d.T[None, :, :] + 1e-12)
    # every point lies within rho of its partners
    for a, b in c.pairs:
        assert d[a, A.n + b] == pytest.approx(rho)


# delta upper bound

def test_delta_upper_identity_is_zero():
    A = random_triple(np.random.default_rng(SEED), 4)
    res = delta_upper(A, A, Correspondence.identity(4))
    assert res.value == 0 and res.label == LABEL


def test_delta_upper_relabelled_copy_is_zero():
    A = random_triple(np.random.default_rng(SEED), 4)
    perm = np.array([2, 0, 3, 1])
    B = A.relabel(perm)
    c = Correspondence([(i, int(perm[i])) for i in range(4)], 4, 4)
    assert delta_upper(A, B, c).value == 0
    assert equivalent(A, B) is not None


def test_delta_upper_kernel_offset():
    A = random_triple(np.random.default_rng(SEED), 3)
    k = A.kernel.copy()
    k[1] += 0.375
    B = FiniteTriple(A.dist, A.weights, A.grid, k)
    res = delta_upper(A, B, Correspondence.identity(3))
    assert res.value == pytest.approx(0.375)
    assert res.hausdorff == 0 and res.prohorov == 0 and res.kernel_gap == pytest.approx(0.375)


def test_delta_upper_grid_mismatch():
    with pytest.raises(GridMismatch):
        delta_upper(two_point(1, (1.0,)), two_point(1, (2.0,)), Correspondence.identity(2))


def test_delta_upper_rejects_foreign_correspondence():
    with pytest.raises(InvalidCorrespondence):
        delta_upper(two_point(1), two_point(1), Correspondence.identity(3))


# estimates

def test_estimate_beats_hand_picked():
    rng = np.random.default_rng(SEED)
    for _ in range(10):
        A, B = random_triple(rng, 3), random_triple(rng, 2)
        est = delta_estimate(A, B)
        assert est.method == "exhaustive"
        for f in ([0, 1, 1], [1, 0, 0], [0, 0, 0]):
            c = Correspondence.from_maps(f, [0, 2])
            assert est.value <= delta_upper(A, B, c).value


def test_two_point_estimate():
    est = delta_estimate(two_point(1.0), two_point(3.0))
    # identity pairing with rho = 1: Hausdorff 1, Prohorov 1 (all mass must move
    # distance 1), correspondence term 2 rho
    assert est.value == pytest.approx(4.0)
    b = est.bound
    assert (b.hausdorff, b.prohorov, b.correspondence_term) == pytest.approx((1, 1, 2))


@given(st.integers(0, 2 ** 32 - 1))
def test_estimate_symmetric(seed):
    rng = np.random.default_rng(seed)
    A, B = random_triple(rng, int(rng.integers(1, 4))), random_triple(rng, int(rng.integers(1, 4)))
    ab, ba = delta_estimate(A, B), delta_estimate(B, A)
    assert ab.value == ba.value
    # the witness is a valid correspondence in each orientation
    assert delta_upper(B, A, ba.correspondence).value == ba.value


@given(st.integers(0, 2 ** 32 - 1))
def test_estimate_triangle_small(seed):
    rng = np.random.default_rng(seed)
    A, B, C = (random_triple(rng, int(rng.integers(1, 4))) for _ in range(3))
    ab, bc, ac = delta_estimate(A, B), delta_estimate(B, C), delta_estimate(A, C)
    assert ac.value <= ab.value + bc.value + 1e-9
    composed = ab.correspondence.compose(bc.correspondence)
    assert ac.value <= delta_upper(A, C, composed).value + 1e-12


@given(st.integers(0, 2 ** 32 - 1))
def test_zero_only_for_equivalent(seed):
    rng = np.random.default_rng(seed)
    A = random_triple(rng, 3)
    B = A.relabel(rng.permutation(3)) if rng.random() < 0.5 else random_triple(rng, 3)
    zero = delta_estimate(A, B).value == 0
    assert zero == (equivalent(A, B) is not None)


def test_annealing_path():
    rng = np.random.default_rng(SEED)
    A = random_triple(rng, 4)
    B = A.relabel([3, 1, 0, 2])
    est = delta_estimate(A, B, budget=2000, seed=SEED)
    assert est.method == "annealing" and est.value >= 0
    assert est.value <= delta_upper(A, B, Correspondence.from_maps([0, 0, 0, 0], [0] * 4)).value


def test_roots_are_paired():
    A = FiniteTriple(line([0, 1]), [0.5, 0.5], [1.0], np.ones((1, 2, 2)), root=0)
    B = FiniteTriple(line([0, 1]), [0.5, 0.5], [1.0], np.ones((1, 2, 2)), root=1)
    est = delta_estimate(A, B)
    assert (0, 1) in est.correspondence
    assert est.value == 0


def test_triple_json_round_trip(tmp_path):
    A = random_triple(np.random.default_rng(SEED), 3)
    A.save(tmp_path / "a.json")
    B = FiniteTriple.load(tmp_path / "a.json")
    assert np.array_equal(A.kernel, B.kernel) and np.array_equal(A.dist, B.dist)


def test_triple_validation():
    with pytest.raises(ValueError):
        FiniteTriple(line([0, 1]), [0.5, 0.5], [0.0], np.ones((1, 2, 2)))
    with pytest.raises(ValueError):
        FiniteTriple(line([0, 1]), [0.7, 0.7], [1.0], np.ones((1, 2, 2)))
    with pytest.raises(ValueError):
        FiniteTriple(line([0, 1]), [0.5, 0.5], [1.0], np.array([[[1.0, 2.0], [0.0, 1.0]]]))


# triples from graphs

def test_graph_triple_k2():
    g = path_graph(2)
    tr = graph_triple(g, KernelEvaluator(g), [1.0], 1.0)
    assert np.allclose(tr.kernel, 1.0)


def test_graph_triple_rejects_zero_time():
    g = path_graph(4)
    with pytest.raises(ValueError):
        graph_triple(g, KernelEvaluator(g), [0.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        graph_triple(g, KernelEvaluator(g), [1.0], 0.0)


def test_graph_triple_self_distance():
    g = path_graph(4)
    tr = graph_triple(g, KernelEvaluator(g), [0.5, 1.0, 2.0], 4.0)
    assert delta_upper(tr, tr, Correspondence.identity(4)).value == 0


# tightness

def test_modulus_trivial_cases():
    flat = [FiniteTriple(line(range(n)) / n, np.full(n, 1 / n), [1.0], np.ones((1, n, n)))
            for n in (3, 5)]
    out = tightness_modulus(flat, [0.0, 0.25, 0.5])
    assert np.all(np.array(out["table"]) == 0)
    rng = np.random.default_rng(SEED)
    rand = [random_triple(rng, 4, integer=False) for _ in range(3)]
    out = tightness_modulus(rand, [0.0, 0.6, 1.2, 5.0])
    tab = np.array(out["table"])
    assert np.all(tab[:, 0] == 0) and all(out["monotone_in_delta"])


def _path_triples(sizes, grid):
    out = []
    for N in sizes:
        g = path_graph(N).with_metric(Metric.scaled(1.0 / N))
        out.append(graph_triple(g, KernelEvaluator(g), grid, path_time_scale(N)))
    return out


def _continuum_modulus(delta, grid, points=401):
    x = np.linspace(0, 1, points)
    best = 0.0
    shift = int(round(delta * (points - 1)))
    for t in grid:
        q = rbm_kernel(t, x, x)
        for s in range(1, shift + 1):
            best = max(best, float(np.max(np.abs(q[:, s:] - q[:, :-s]))))
    return best


def test_path_modulus_approaches_continuum():
    grid = [0.05, 0.1, 0.2]
    sizes = [16, 32, 64]
    out = tightness_modulus(_path_triples(sizes, grid), [0.0, 0.05, 0.1, 0.2], sizes)
    tab = np.array(out["table"])
    assert all(out["monotone_in_delta"])
    # at fixed delta the discrete moduli converge to the continuum modulus
    for j, dl in ((1, 0.05), (2, 0.1), (3, 0.2)):
        err = np.abs(tab[:, j] - _continuum_modulus(dl, grid))
        assert err[-1] < err[0]


def test_resistance_tightness_on_paths():
    sizes = [16, 32, 64, 128]
    graphs = [path_graph(N).with_metric(Metric.scaled(1.0 / N)) for N in sizes]
    rep = resistance_tightness_check(graphs, sizes, [path_time_scale(N) for N in sizes], kappa=1)
    assert rep["passed"] and rep["c1"] == pytest.approx(1.0)
    assert rep["fit_r2"] >= 0.99
    # alpha^kappa beta / gamma = N * 2(N-1) / (2 N^2)
    want = [(N - 1) / N for N in sizes]
    assert np.allclose(rep["per_size"]["sandwich"], want)


def test_resistance_tightness_fits_trees():
    rng = np.random.default_rng(SEED)
    graphs = []
    for n in (50, 100, 200):
        edges = [(int(rng.integers(0, v)), v, 1) for v in range(1, n)]
        graphs.append(WeightedGraph(n, edges))
    rep = resistance_tightness_check(graphs, [1.0] * 3, [1.0] * 3)
    assert rep["kappa"] == pytest.approx(1.0) and rep["fit_r2"] >= 0.99


def test_resistance_tightness_flags_wrong_kappa():
    sizes = [16, 32, 64]
    graphs = [path_graph(N).with_metric(Metric.scaled(1.0 / N)) for N in sizes]
    rep = resistance_tightness_check(graphs, sizes, [path_time_scale(N) for N in sizes], kappa=2)
    assert not rep["passed"]
    assert any(f["inequality"] == "sandwich" and f["witness_size"] == 64 for f in rep["failures"])


def test_resistance_tightness_on_cycles():
    sizes = [16, 32, 64]
    graphs = [cycle_graph(N).with_metric(Metric.scaled(1.0 / N)) for N in sizes]
    rep = resistance_tightness_check(graphs, sizes, [float(N * N) for N in sizes], kappa=1)
    assert rep["passed"] and rep["c1"] <= 1.0
