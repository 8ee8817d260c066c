"""Weighted graphs, their invariant measures and vertex metrics.

A graph is stored as a dense vertex range ``0..n-1`` with one entry per
unordered edge.  Weights are floats by default; ``exact=True`` keeps them as
:class:`fractions.Fraction` so threshold decisions downstream can be made
without rounding.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import (DisconnectedGraph, DuplicateEdge, InvalidMetric,
                     NonPositiveWeight, ParseError, SelfLoop)

METRIC_KINDS = ("graph", "scaled", "explicit")


@dataclass(frozen=True)
class Metric:
    """Vertex metric choice.

    ``kind`` is ``"graph"`` (hop count), ``"scaled"`` (hop count times
    ``factor``) or ``"explicit"`` (a full distance matrix).
    """

    kind: str = "graph"
    factor: float = 1.0
    matrix: Optional[np.ndarray] = None

    @classmethod
    def graph(cls):
        return cls("graph")

    @classmethod
    def scaled(cls, factor):
        if not factor > 0:
            raise InvalidMetric(f"scale factor must be positive, got {factor}")
        return cls("scaled", float(factor))

    @classmethod
    def explicit(cls, matrix):
        return cls("explicit", 1.0, np.array(matrix, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, Metric):
            return NotImplemented
        if self.kind != other.kind or self.factor != other.factor:
            return False
        if self.matrix is None or other.matrix is None:
            return self.matrix is None and other.matrix is None
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.kind, self.factor))


def check_metric_matrix(d, tol=1e-9):
    """Raise InvalidMetric unless ``d`` is symmetric, zero on the diagonal,
    nonnegative and satisfies the triangle inequality."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidMetric("distance matrix must be square")
    if not np.all(np.isfinite(d)):
        raise InvalidMetric("distance matrix has non-finite entries")
    if np.any(np.diag(d) != 0):
        raise InvalidMetric("distance matrix must have zero diagonal")
    if not np.allclose(d, d.T, rtol=0, atol=tol):
        raise InvalidMetric("distance matrix is not symmetric")
    if np.any(d < 0):
        raise InvalidMetric("distance matrix has negative entries")
    scale = max(1.0, float(d.max()))
    for k in range(d.shape[0]):
        if np.any(d > d[:, k:k + 1] + d[k:k + 1, :] + tol * scale):
            raise InvalidMetric("distance matrix violates the triangle inequality")


@dataclass(frozen=True)
class StationaryMeasure:
    """Vertex weights ``mu_x``, total mass and the invariant law ``mu_x / mass``.

    In exact mode the three fields hold Fractions (``weights`` and
    ``probabilities`` as tuples); otherwise they are float arrays.
    """

    weights: object
    total_mass: object
    probabilities: object


class WeightedGraph:
    """Finite connected graph with symmetric positive edge weights.

    Parameters
    ----------
    n : int
        Number of vertices, labelled ``0..n-1``.
    edges : iterable of (u, v, w)
        One entry per unordered pair.
    root : int, optional
        Distinguished vertex.
    metric : Metric, optional
        Defaults to the hop-count metric.
    exact : bool
        Store weights as Fractions.
    labels : sequence, optional
        External vertex labels (side table only).
    """

    def __init__(self, n, edges, root=None, metric=None, exact=False,
                 labels=None, coords=None):
        n = int(n)
        if n < 2:
            raise DisconnectedGraph("a graph needs at least two vertices")
        clean = []
        seen = set()
        for u, v, w in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise SelfLoop(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DuplicateEdge(f"edge {key} listed twice")
            seen.add(key)
            w = Fraction(w) if exact else float(w)
            if not w > 0 or (not exact and not np.isfinite(w)):
                raise NonPositiveWeight(f"edge {key} has weight {w}")
            clean.append((key[0], key[1], w))
        if not clean:
            raise DisconnectedGraph("edge list is empty")
        self.n = n
        self.edges = tuple(clean)
        self.exact = bool(exact)
        self.labels = tuple(labels) if labels is not None else None
        self.coords = None if coords is None else np.asarray(coords)
        if root is not None:
            root = int(root)
            if not 0 <= root < n:
                raise ValueError(f"root {root} out of range")
        self.root = root
        self.metric = metric if metric is not None else Metric.graph()
        self._cache = {}
        ncomp, _ = connected_components(self.adjacency(), directed=False)
        if ncomp != 1:
            raise DisconnectedGraph(f"graph has {ncomp} connected components")
        if self.metric.kind == "explicit":
            if self.metric.matrix is None or self.metric.matrix.shape != (n, n):
                raise InvalidMetric("explicit metric needs an n x n matrix")
            check_metric_matrix(self.metric.matrix)
        elif self.metric.kind not in METRIC_KINDS:
            raise InvalidMetric(f"unknown metric kind {self.metric.kind!r}")

    # basic structure

    @property
    def edge_count(self):
        return len(self.edges)

    def _arrays(self):
        if "arr" not in self._cache:
            u = np.array([e[0] for e in self.edges], dtype=np.int64)
            v = np.array([e[1] for e in self.edges], dtype=np.int64)
            w = np.array([float(e[2]) for e in self.edges])
            self._cache["arr"] = (u, v, w)
        return self._cache["arr"]

    def adjacency(self):
        """Symmetric sparse weight matrix (CSR, float)."""
        if "adj" not in self._cache:
            u, v, w = self._arrays()
            a = sp.coo_matrix((np.r_[w, w], (np.r_[u, v], np.r_[v, u])),
                              shape=(self.n, self.n)).tocsr()
            self._cache["adj"] = a
        return self._cache["adj"]

    def weight_matrix(self):
        """Dense symmetric weight matrix."""
        return self.adjacency().toarray()

    def neighbors(self, x):
        a = self.adjacency()
        return a.indices[a.indptr[x]:a.indptr[x + 1]]

    def vertex_weights(self):
        """``mu_x`` as a float array."""
        return np.asarray(self.adjacency().sum(axis=1)).ravel()

    def total_mass(self):
        return float(self.vertex_weights().sum())

    def min_weight(self):
        return min(e[2] for e in self.edges)

    def is_tree(self):
        return self.edge_count == self.n - 1

    def with_root(self, root):
        return WeightedGraph(self.n, self.edges, root=root, metric=self.metric,
                             exact=self.exact, labels=self.labels, coords=self.coords)

    def with_metric(self, metric):
        return WeightedGraph(self.n, self.edges, root=self.root, metric=metric,
                             exact=self.exact, labels=self.labels, coords=self.coords)

    def as_exact(self):
        return WeightedGraph(self.n, self.edges, root=self.root, metric=self.metric,
                             exact=True, labels=self.labels, coords=self.coords)

    def as_float(self):
        return WeightedGraph(self.n, self.edges, root=self.root, metric=self.metric,
                             exact=False, labels=self.labels, coords=self.coords)

    def to_networkx(self):
        import networkx as nx
        h = nx.Graph()
        h.add_nodes_from(range(self.n))
        h.add_weighted_edges_from(self.edges)
        return h

    # metrics

    def hop_distances(self, source=None):
        """Hop counts from ``source`` (or the full matrix when omitted)."""
        if source is None:
            if "hops" not in self._cache:
                self._cache["hops"] = shortest_path(self.adjacency(), unweighted=True,
                                                    directed=False)
            return self._cache["hops"]
        if "hops" in self._cache:
            return self._cache["hops"][source]
        dist = np.full(self.n, np.inf)
        dist[source] = 0
        a = self.adjacency()
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for y in a.indices[a.indptr[x]:a.indptr[x + 1]]:
                if dist[y] == np.inf:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def distances_from(self, x):
        """Metric distances from ``x`` to every vertex."""
        if self.metric.kind == "explicit":
            return self.metric.matrix[x].copy()
        return self.hop_distances(x) * self.metric.factor

    def distance_matrix(self):
        if self.metric.kind == "explicit":
            return self.metric.matrix.copy()
        return self.hop_distances() * self.metric.factor

    def distance(self, x, y):
        if x == y:
            return 0.0
        if self.metric.kind == "explicit":
            return float(self.metric.matrix[x, y])
        return float(self.hop_distances(x)[y]) * self.metric.factor

    def diameter(self):
        return float(self.distance_matrix().max())

    def __repr__(self):
        return (f"WeightedGraph(n={self.n}, edges={self.edge_count}, root={self.root}, "
                f"metric={self.metric.kind}, exact={self.exact})")

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (self.n == other.n and self.edges == other.edges and self.root == other.root
                and self.metric == other.metric and self.exact == other.exact)

    __hash__ = None


def build_graph(edge_list, metric=None, root=None, exact=False):
    """Build a graph from ``(u, v, weight)`` triples with arbitrary hashable labels.

    Labels are compacted to ``0..n-1`` in sorted order (insertion order if
    the labels are not mutually comparable); the original labels are kept
    in ``graph.labels``.  ``root`` is given as an original label.
    """
    edge_list = list(edge_list)
    if not edge_list:
        raise DisconnectedGraph("edge list is empty")
    seen = {}
    for u, v, _ in edge_list:
        for lab in (u, v):
            if lab not in seen:
                seen[lab] = len(seen)
    try:
        order = sorted(seen)
    except TypeError:
        order = list(seen)
    index = {lab: i for i, lab in enumerate(order)}
    edges = [(index[u], index[v], w) for u, v, w in edge_list]
    for u, v, w in edge_list:
        if u == v:
            raise SelfLoop(f"self-loop at vertex {u!r}")
    rid = None
    if root is not None:
        if root not in index:
            raise ValueError(f"root {root!r} is not a vertex of the edge list")
        rid = index[root]
    labels = None if order == list(range(len(order))) else order
    return WeightedGraph(len(order), edges, root=rid, metric=metric, exact=exact,
                         labels=labels)


def stationary(g):
    """Vertex weights, total mass and invariant probabilities of ``g``."""
    if g.exact:
        mu = [Fraction(0)] * g.n
        for u, v, w in g.edges:
            mu[u] += w
            mu[v] += w
        mass = sum(mu)
        return StationaryMeasure(tuple(mu), mass, tuple(m / mass for m in mu))
    mu = g.vertex_weights()
    mass = float(mu.sum())
    return StationaryMeasure(mu, mass, mu / mass)


def distance(g, x, y):
    return g.distance(x, y)


# text format

def _fmt_weight(w):
    if isinstance(w, Fraction):
        return str(w)
    return repr(float(w))


def _fmt_metric(m):
    if m.kind == "graph":
        return "graph"
    if m.kind == "scaled":
        return f"scaled:{m.factor!r}"
    return "explicit"


def to_text(g):
    """Line-oriented edge list with a ``n=.. root=.. metric=..`` header."""
    root = "none" if g.root is None else str(g.root)
    head = f"n={g.n} root={root} metric={_fmt_metric(g.metric)}"
    if g.exact:
        head += " exact=1"
    lines = [head]
    lines += [f"{u} {v} {_fmt_weight(w)}" for u, v, w in g.edges]
    if g.metric.kind == "explicit":
        lines.append("distances")
        for row in g.metric.matrix:
            lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _parse_number(tok, exact, lineno):
    try:
        val = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        try:
            val = float(tok)
        except ValueError:
            raise ParseError(lineno, f"bad number {tok!r}") from None
        return Fraction(val) if exact else val
    if exact:
        return val
    # keep float tokens bit-identical
    try:
        return float(tok)
    except ValueError:
        return float(val)


def from_text(text, exact=None):
    """Parse the edge-list format produced by :func:`to_text`.

    Blank lines and ``#`` comments are ignored.  Any malformed line raises
    :class:`ParseError` carrying its 1-based line number.
    """
    header = None
    edges = []
    dist_rows = []
    in_dist = False
    head_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            header = {}
            head_line = lineno
            for tok in line.split():
                if "=" not in tok:
                    raise ParseError(lineno, f"header token {tok!r} is not key=value")
                key, val = tok.split("=", 1)
                header[key] = val
            if "n" not in header:
                raise ParseError(lineno, "header must define n")
            if exact is None:
                exact = header.get("exact", "0") in ("1", "true", "yes")
            continue
        if line == "distances":
            in_dist = True
            continue
        parts = line.split()
        if in_dist:
            try:
                dist_rows.append([float(t) for t in parts])
            except ValueError:
                raise ParseError(lineno, "bad distance row") from None
            continue
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 'u v weight', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, "vertex ids must be integers") from None
        edges.append((u, v, _parse_number(parts[2], exact, lineno)))
    if header is None:
        raise ParseError(1, "empty input")
    try:
        n = int(header["n"])
    except ValueError:
        raise ParseError(head_line, "n must be an integer") from None
    root = header.get("root", "none")
    try:
        root = None if root in ("none", "") else int(root)
    except ValueError:
        raise ParseError(head_line, f"bad root {root!r}") from None
    mspec = header.get("metric", "graph")
    if mspec == "graph":
        metric = Metric.graph()
    elif mspec.startswith("scaled:"):
        try:
            metric = Metric.scaled(float(mspec.split(":", 1)[1]))
        except (ValueError, InvalidMetric) as exc:
            raise ParseError(head_line, str(exc)) from None
    elif mspec == "explicit":
        if len(dist_rows) != n or any(len(r) != n for r in dist_rows):
            raise ParseError(head_line, "explicit metric needs an n x n distances block")
        metric = Metric.explicit(dist_rows)
    else:
        raise ParseError(head_line, f"unknown metric {mspec!r}")
    return WeightedGraph(n, edges, root=root, metric=metric, exact=bool(exact))


def to_json(g):
    """JSON-compatible dict mirroring every field of ``g``."""
    out = {
        "vertex_count": g.n,
        "edges": [[u, v, _fmt_weight(w) if g.exact else float(w)] for u, v, w in g.edges],
        "root": g.root,
        "exact": g.exact,
        "metric": {"kind": g.metric.kind, "factor": g.metric.factor,
                   "matrix": None if g.metric.matrix is None else g.metric.matrix.tolist()},
    }
    if g.labels is not None:
        out["labels"] = [str(x) for x in g.labels]
    if g.coords is not None:
        out["coords"] = np.asarray(g.coords).tolist()
    return out


def from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    exact = bool(obj.get("exact", False))
    m = obj.get("metric") or {"kind": "graph"}
    if m["kind"] == "explicit":
        metric = Metric.explicit(m["matrix"])
    elif m["kind"] == "scaled":
        metric = Metric.scaled(m["factor"])
    else:
        metric = Metric.graph()
    edges = [(u, v, Fraction(w) if exact else float(w)) for u, v, w in obj["edges"]]
    return WeightedGraph(obj["vertex_count"], edges, root=obj.get("root"), metric=metric,
                         exact=exact, labels=obj.get("labels"), coords=obj.get("coords"))


def read_graph(path, exact=None):
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        g = from_json(json.loads(text))
        return g.as_exact() if exact else g
    return from_text(text, exact=exact)


def write_graph(g, path):
    with open(path, "w") as fh:
        fh.write(to_text(g))


# small constructors used throughout the tests and the CLI

def path_graph(n, weight=1, root=0, exact=False):
    return WeightedGraph(n, [(i, i + 1, weight) for i in range(n - 1)], root=root, exact=exact)


def cycle_graph(n, weight=1, root=0, exact=False):
    return WeightedGraph(n, [(i, (i + 1) % n, weight) for i in range(n)], root=root, exact=exact)


def complete_graph(n, weight=1, root=0, exact=False):
    return WeightedGraph(n, [(i, j, weight) for i in range(n) for j in range(i + 1, n)],
                         root=root, exact=exact)


def from_networkx(h, weight="weight", root=None, default=1.0, exact=False):
    nodes = sorted(h.nodes())
    index = {v: i for i, v in enumerate(nodes)}
    edges = [(index[u], index[v], d.get(weight, default)) for u, v, d in h.edges(data=True)]
    return WeightedGraph(len(nodes), edges, root=None if root is None else index[root],
                         exact=exact)
