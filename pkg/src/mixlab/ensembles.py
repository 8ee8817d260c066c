"""Seeded generators for the random graph families and the deterministic boxes.

Every draw takes its own counter-based stream keyed by
``(family, master seed, draw index)``, so an ensemble is reproducible bit for
bit whatever the order or the number of workers used to build it.
"""
from __future__ import annotations

import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import zeta

from .errors import DimensionTooLow, SamplingBudgetExceeded, UnknownFamily
from .graph import Metric, WeightedGraph, to_text

NOT_ESTIMATED = "not-estimated"
REJECTION_BUDGET = 10 ** 6


def draw_rng(family, seed, index):
    """Philox stream for one draw."""
    tag = zlib.crc32(family.encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([tag, int(seed), int(index)])))


@dataclass
class Draw:
    graph: WeightedGraph
    family: str
    seed: int
    index: int
    meta: dict = field(default_factory=dict)

    def manifest(self):
        return {"family": self.family, "seed": self.seed, "index": self.index,
                "vertices": self.graph.n, "edges": self.graph.edge_count,
                "root": self.graph.root, **self.meta}


# deterministic calibration graphs

def deterministic_box(N, d=1):
    """``{1..N}^d`` with nearest-neighbour unit weights, rooted at a corner."""
    if N < 2 or d < 1:
        raise ValueError("need N >= 2 and d >= 1")
    shape = (N,) * d
    idx = np.arange(N ** d).reshape(shape)
    edges = []
    for axis in range(d):
        a = np.take(idx, range(N - 1), axis=axis).ravel()
        b = np.take(idx, range(1, N), axis=axis).ravel()
        edges.extend(zip(a.tolist(), b.tolist(), [1] * len(a)))
    edges.sort()
    coords = np.stack(np.unravel_index(np.arange(N ** d), shape), axis=1) + 1
    return WeightedGraph(N ** d, edges, root=0, coords=coords)


# Erdos-Renyi critical window

def _pair_from_index(k, n):
    # k-th pair (i, j), i < j, in row-major order of the strict upper triangle
    k = np.asarray(k, dtype=np.float64)
    i = np.floor(n - 0.5 - np.sqrt((n - 0.5) ** 2 - 2 * k)).astype(np.int64)
    start = i * (2 * n - i - 1) // 2
    # guard against rounding at row boundaries
    low = start > k
    i[low] -= 1
    start = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    high = nxt <= k
    i[high] += 1
    start = i * (2 * n - i - 1) // 2
    j = (k - start).astype(np.int64) + i + 1
    return i, j


def sample_gnp(N, p, rng):
    """Edge arrays of G(N, p)."""
    total = N * (N - 1) // 2
    m = int(rng.binomial(total, p))
    chosen = np.unique(rng.integers(0, total, size=m))
    while len(chosen) < m:
        extra = rng.integers(0, total, size=m - len(chosen))
        chosen = np.unique(np.r_[chosen, extra])
    return _pair_from_index(chosen, N)


def er_giant(N, lam=0.0, seed=0, index=0):
    """Largest component of ``G(N, 1/N + lam N^(-4/3))`` with a uniform random root.

    Ties between equally large components go to the one containing the
    smallest vertex label.
    """
    if N < 10:
        raise ValueError("need N >= 10")
    rng = draw_rng("er", seed, index)
    p = 1.0 / N + lam * N ** (-4.0 / 3.0)
    p = min(max(p, 0.0), 1.0)
    i, j = sample_gnp(N, p, rng)
    a = coo_matrix((np.ones(len(i)), (i, j)), shape=(N, N))
    _, lab = connected_components(a, directed=False)
    sizes = np.bincount(lab)
    best = sizes.max()
    # components are labelled in order of their smallest vertex
    comp = int(np.nonzero(sizes == best)[0][0])
    verts = np.nonzero(lab == comp)[0]
    if len(verts) < 2:
        raise SamplingBudgetExceeded("largest component is a single vertex")
    pos = -np.ones(N, dtype=np.int64)
    pos[verts] = np.arange(len(verts))
    keep = (lab[i] == comp)
    edges = sorted(zip(pos[i[keep]].tolist(), pos[j[keep]].tolist(), [1] * int(keep.sum())))
    root = int(rng.integers(len(verts)))
    g = WeightedGraph(len(verts), edges, root=root, labels=verts.tolist())
    meta = {"N": N, "lam": lam, "p": p, "component_size": int(len(verts)),
            "sample_edges": int(len(i)), "root_rule": "uniform-random-vertex"}
    return Draw(g, "er", seed, index, meta)


# conditioned Galton-Watson trees

def stable_law(alpha, kmax):
    """Offspring law with ``P(k) = c k^(-1-alpha)`` for k >= 1 and mean one.

    ``c = 1 / zeta(alpha)`` gives mean one and the atom at zero takes the
    remaining mass.  Returned table covers ``0..kmax``; mass beyond is the
    last entry of the second return value.
    """
    if not 1 < alpha < 2:
        raise ValueError("stable offspring needs alpha in (1, 2)")
    c = 1.0 / zeta(alpha)
    p0 = 1.0 - c * zeta(1.0 + alpha)
    k = np.arange(1, kmax + 1, dtype=float)
    probs = np.r_[p0, c * k ** (-1.0 - alpha)]
    return probs, max(0.0, 1.0 - probs.sum())


def _offspring_conditioned(N, law, rng):
    """Child counts ``xi_1..xi_N`` with sum ``N - 1`` (exchangeable)."""
    if law == "poisson1":
        # iid Poisson conditioned on its sum is multinomial
        return rng.multinomial(N - 1, np.full(N, 1.0 / N))
    if law == "geometric-half":
        # iid geometric(1/2) conditioned on its sum is a uniform weak composition
        bars = np.sort(rng.choice(2 * N - 2, size=N - 1, replace=False))
        cuts = np.r_[-1, bars, 2 * N - 2]
        return np.diff(cuts) - 1
    if law.startswith("stable"):
        alpha = float(law.split(":", 1)[1]) if ":" in law else 1.5
        probs, tail = stable_law(alpha, N - 1)
        table = np.r_[probs, tail]
        table /= table.sum()
        for _ in range(REJECTION_BUDGET):
            xi = rng.choice(len(table), size=N, p=table)
            if xi.max() < len(probs) and xi.sum() == N - 1:
                return xi
        raise SamplingBudgetExceeded(f"no accepted sample in {REJECTION_BUDGET} attempts")
    raise UnknownFamily(f"unknown offspring law {law!r}")


def rotate_to_excursion(xi):
    """Cyclic shift of ``xi`` whose walk ``sum (xi_i - 1)`` first hits -1 at the end."""
    s = np.cumsum(np.asarray(xi) - 1)
    k = int(np.argmin(s))  # first index of the minimum
    return np.roll(xi, -(k + 1))


def tree_from_offspring(xi):
    """Edges of the plane tree whose depth-first child counts are ``xi``."""
    edges = []
    stack = []
    for v, c in enumerate(xi):
        if v > 0:
            parent = stack[-1]
            edges.append((parent[0], v, 1))
            parent[1] -= 1
            if parent[1] == 0:
                stack.pop()
        if c > 0:
            stack.append([v, int(c)])
    return edges


def gw_conditioned(N, offspring="poisson1", seed=0, index=0):
    """Galton-Watson tree conditioned on exactly ``N`` vertices, rooted at the ancestor."""
    if N < 2:
        raise ValueError("need N >= 2")
    rng = draw_rng("gw", seed, index)
    xi = rotate_to_excursion(_offspring_conditioned(N, offspring, rng))
    edges = tree_from_offspring(xi)
    g = WeightedGraph(N, edges, root=0)
    depth = g.hop_distances(0)
    meta = {"N": N, "offspring": offspring, "height": int(depth.max()),
            "max_degree": int(np.diff(g.adjacency().indptr).max())}
    return Draw(g, "gw", seed, index, meta)


# Sierpinski gasket

def parse_weight_law(spec):
    """``constant:c``, ``uniform:c1:c2`` or ``two-point:c1:c2`` -> (kind, c1, c2)."""
    if isinstance(spec, (tuple, list)):
        kind, *vals = spec
    else:
        kind, *vals = str(spec).split(":")
        vals = [float(v) for v in vals]
    if kind == "constant":
        c1 = c2 = float(vals[0]) if vals else 1.0
    elif kind in ("uniform", "two-point"):
        c1, c2 = float(vals[0]), float(vals[1])
    else:
        raise ValueError(f"unknown weight law {spec!r}")
    if not 0 < c1 <= c2 < math.inf:
        raise ValueError("weight law support must lie in [c1, c2] with 0 < c1 <= c2")
    return kind, c1, c2


def _sample_weights(law, size, rng):
    kind, c1, c2 = law
    if kind == "constant":
        return np.full(size, c1)
    if kind == "uniform":
        return rng.uniform(c1, c2, size=size)
    return np.where(rng.random(size) < 0.5, c1, c2)


def gasket_cells(level):
    """Lower-left corners of the unit cells of the level-``level`` gasket.

    Coordinates are integers in the skew basis ``e1 = (1, 0)``,
    ``e2 = (1/2, sqrt(3)/2)``; the outer triangle has side ``2^level``.
    """
    cells = [(0, 0)]
    size = 2 ** level
    while size > 1:
        half = size // 2
        cells = [(a + da, b + db) for a, b in cells for da, db in ((0, 0), (half, 0), (0, half))]
        size = half
    return cells


def sierpinski_level(level, weight_law="constant:1", seed=0, index=0):
    """Level-``level`` gasket graph with i.i.d. edge weights and Euclidean distances."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    law = parse_weight_law(weight_law)
    rng = draw_rng("gasket", seed, index)
    pairs = set()
    for a, b in gasket_cells(level):
        p, q, r = (a, b), (a + 1, b), (a, b + 1)
        for u, v in ((p, q), (p, r), (q, r)):
            pairs.add((min(u, v), max(u, v)))
    verts = sorted({v for e in pairs for v in e})
    index_of = {v: i for i, v in enumerate(verts)}
    epairs = sorted((index_of[u], index_of[v]) for u, v in pairs)
    w = _sample_weights(law, len(epairs), rng)
    edges = [(u, v, float(x)) for (u, v), x in zip(epairs, w)]
    ab = np.array(verts, dtype=np.int64)
    da = ab[:, 0][:, None] - ab[:, 0][None, :]
    db = ab[:, 1][:, None] - ab[:, 1][None, :]
    side = float(2 ** level)
    dist = np.sqrt((da * da + da * db + db * db).astype(float)) / side
    g = WeightedGraph(len(verts), edges, root=index_of[(0, 0)], metric=Metric.explicit(dist),
                      coords=ab)
    meta = {"level": level, "weight_law": list(law), "side": 2 ** level}
    return Draw(g, "gasket", seed, index, meta)


def gasket_counts(level):
    """Closed-form vertex and edge counts of the level-``level`` gasket."""
    v = 3
    for _ in range(level):
        v = 3 * v - 3
    return v, 3 ** (level + 1)


# range of a simple random walk

def walk_trace(N, d, rng):
    """Positions ``S_0..S_N`` of a simple random walk in ``Z^d`` started at 0."""
    axes = rng.integers(0, d, size=N)
    signs = rng.integers(0, 2, size=N) * 2 - 1
    steps = np.zeros((N, d), dtype=np.int64)
    steps[np.arange(N), axes] = signs
    return np.vstack([np.zeros((1, d), dtype=np.int64), np.cumsum(steps, axis=0)])


def srw_range(N, d=5, seed=0, index=0):
    """Graph traced by ``N`` steps of simple random walk in ``Z^d`` (d >= 5).

    Vertices are visited sites numbered in order of first visit, edges the
    traversed bonds with unit weight; the root is the origin.
    """
    if d < 5:
        raise DimensionTooLow(d)
    if N < 1:
        raise ValueError("need N >= 1")
    rng = draw_rng("range", seed, index)
    path = walk_trace(N, d, rng)
    _, first, inv = np.unique(path, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    ids = relabel[inv]
    a, b = ids[:-1], ids[1:]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    bonds = np.unique(np.stack([lo, hi], axis=1), axis=0)
    edges = [(int(u), int(v), 1) for u, v in bonds]
    g = WeightedGraph(len(order), edges, root=int(ids[0]), coords=path[np.sort(first)])
    meta = {"N": N, "d": d, "distinct_sites": int(len(order)), "bonds": int(len(bonds)),
            "tau_d": NOT_ESTIMATED, "delta_d": NOT_ESTIMATED, "kappa2_d": NOT_ESTIMATED}
    return Draw(g, "range", seed, index, meta)


# ensembles

FAMILIES = {
    "er": lambda N, seed, index, **kw: er_giant(N, kw.get("lam", 0.0), seed, index),
    "gw": lambda N, seed, index, **kw: gw_conditioned(N, kw.get("offspring", "poisson1"),
                                                      seed, index),
    "gasket": lambda N, seed, index, **kw: sierpinski_level(N, kw.get("weight_law",
                                                                      "uniform:1:2"),
                                                            seed, index),
    "range": lambda N, seed, index, **kw: srw_range(N, kw.get("d", 5), seed, index),
    "box": lambda N, seed, index, **kw: Draw(deterministic_box(N, kw.get("d", 1)), "box",
                                             seed, index, {"N": N, "d": kw.get("d", 1)}),
}

ALIASES = {"er-critical": "er", "gw-tree": "gw", "srw-range": "range", "path": "box",
           "sierpinski": "gasket"}


def family_key(name):
    key = ALIASES.get(name, name)
    if key not in FAMILIES:
        raise UnknownFamily(f"unknown family {name!r}")
    return key


def make_draw(family, N, seed, index, params=None):
    return FAMILIES[family_key(family)](N, seed, index, **(params or {}))


def _make_draw_args(args):
    return make_draw(*args)


def generate(family, N, draws, seed=0, params=None, jobs=1):
    """``draws`` independent draws, ordered by draw index."""
    args = [(family, N, seed, i, params) for i in range(draws)]
    if jobs <= 1:
        return [_make_draw_args(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_make_draw_args, args))


def write_ensemble(draws, directory):
    """Graph files in the edge-list format plus ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    entries = []
    for d in draws:
        name = f"{d.family}_{d.seed}_{d.index:05d}.graph"
        with open(os.path.join(directory, name), "w") as fh:
            fh.write(to_text(d.graph))
        entries.append({"file": name, **d.manifest()})
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump({"draws": entries}, fh, indent=2, default=str)
    return entries
