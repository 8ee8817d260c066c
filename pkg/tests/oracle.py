"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test.  Walks are handled with exact
rationals (``fractions.Fraction``) by plain matrix-vector products, linear
systems by Gauss-Jordan elimination over the rationals.
"""
from fractions import Fraction
import math

from scipy.optimize import brentq


def weights_of(n, edges):
    w = [[Fraction(0)] * n for _ in range(n)]
    for u, v, c in edges:
        w[u][v] = w[v][u] = Fraction(c)
    return w


def degrees(w):
    return [sum(row) for row in w]


def stationary(w):
    mu = degrees(w)
    tot = sum(mu)
    return [m / tot for m in mu]


def transition(w):
    mu = degrees(w)
    return [[w[x][y] / mu[x] for y in range(len(w))] for x in range(len(w))]


def step(row, P):
    n = len(P)
    return [sum(row[z] * P[z][y] for z in range(n) if row[z]) for y in range(n)]


def power_row(P, x, m):
    row = [Fraction(int(y == x)) for y in range(len(P))]
    for _ in range(m):
        row = step(row, P)
    return row


def density_row(w, x, m):
    """``p_m(x, .)``: ``P^m(x, y) / pi(y)``."""
    pi = stationary(w)
    return [a / b for a, b in zip(power_row(transition(w), x, m), pi)]


def smoothed_row(w, x, m):
    a, b = density_row(w, x, m), density_row(w, x, m + 1)
    return [(u + v) / 2 for u, v in zip(a, b)]


def dist_l1(w, x, m):
    pi = stationary(w)
    return sum(p * abs(q - 1) for p, q in zip(pi, smoothed_row(w, x, m)))


def dist_l2_squared(w, x, m):
    pi = stationary(w)
    return sum(p * (q - 1) ** 2 for p, q in zip(pi, smoothed_row(w, x, m)))


def dist_linf(w, x, m):
    return max(abs(q - 1) for q in smoothed_row(w, x, m))


def tv_smoothed(w, x, m):
    """Total variation between ``(P^m + P^{m+1})(x, .) / 2`` and ``pi``."""
    P = transition(w)
    a, b = power_row(P, x, m), power_row(P, x, m + 1)
    pi = stationary(w)
    return sum(abs((u + v) / 2 - p) for u, v, p in zip(a, b, pi)) / 2


def mixing_time(w, dist, threshold=Fraction(1, 4), cap=10 ** 4):
    for m in range(1, cap):
        if max(dist(w, x, m) for x in range(len(w))) <= threshold:
            return m
    raise RuntimeError("no mixing within cap")


def solve(A, b):
    """Gauss-Jordan over the rationals."""
    n = len(A)
    M = [list(map(Fraction, row)) + [Fraction(v)] for row, v in zip(A, b)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        pv = M[c][c]
        M[c] = [v / pv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return [M[r][n] for r in range(n)]


def resistance(w, x, y):
    """Ground ``y``, inject unit current at ``x``; the potential at ``x`` is R."""
    n = len(w)
    mu = degrees(w)
    keep = [v for v in range(n) if v != y]
    L = [[(mu[a] if a == b else 0) - w[a][b] for b in keep] for a in keep]
    rhs = [int(a == x) for a in keep]
    pot = solve(L, rhs)
    return pot[keep.index(x)]


def hitting_times(w, target):
    """``E_v sigma_target`` by first-step analysis."""
    n = len(w)
    P = transition(w)
    others = [v for v in range(n) if v != target]
    A = [[int(a == b) - P[a][b] for b in others] for a in others]
    h = solve(A, [1] * len(others))
    out = {v: h[i] for i, v in enumerate(others)}
    out[target] = Fraction(0)
    return out


def commute_time(w, x, y):
    return hitting_times(w, y)[x] + hitting_times(w, x)[y]


def hit_before(w, x, A, B):
    """``P_x(T_A < T_B)``: harmonic off ``A u B``, 1 on A, 0 on B."""
    n = len(w)
    P = transition(w)
    free = [v for v in range(n) if v not in A and v not in B]
    M = [[int(a == b) - P[a][b] for b in free] for a in free]
    rhs = [sum(P[a][z] for z in A) for a in free]
    h = solve(M, rhs)
    return h[free.index(x)]


def green_killed(w, B):
    """``g_B(x, y) = mu_y^-1 sum_k P_x(X_k = y, k < tau_B)`` as a dict of rows."""
    P = transition(w)
    mu = degrees(w)
    B = list(B)
    A = [[int(a == b) - P[a][b] for b in B] for a in B]
    cols = []
    for j in range(len(B)):
        cols.append(solve(A, [int(i == j) for i in range(len(B))]))
    # (I - P_B)^{-1}[a, b] = cols[b][a]
    return {a: {b: cols[j][i] / mu[b] for j, b in enumerate(B)} for i, a in enumerate(B)}


def cycle_l1_mixing(n):
    """Exact L^1 mixing time of the unit-weight cycle from vertex 0 (vertex transitive).

    Walk counts are integers: ``P^m(0, y) = c_m(y) / 2^m``.
    """
    row = [0] * n
    row[0] = 1
    m = 0
    while True:
        nxt = [row[(y - 1) % n] + row[(y + 1) % n] for y in range(n)]
        if m >= 1:
            # q_m(0, y) - 1 = n (row/2^m + nxt/2^(m+1)) / 2 - 1
            s = sum(abs(Fraction(n * (2 * a + b), 2 ** (m + 2)) - 1) for a, b in zip(row, nxt))
            if s / n <= Fraction(1, 4):
                return m
        row = nxt
        m += 1


def gasket_counts(level):
    """Vertex and edge counts by the self-similar recurrence."""
    v, e = 3, 3
    for _ in range(level):
        v, e = 3 * v - 3, 3 * e
    return v, e


def box_counts(N, d):
    return N ** d, d * (N - 1) * N ** (d - 1)


def rbm_linf_limit():
    """Mixing time of reflected Brownian motion on [0, 1] in L^inf.

    At a positive time the centred kernel ``2 sum e^{-k^2 pi^2 t} cos cos`` is
    dominated in absolute value by its value at ``x = y = 0``, so the sup
    distance is ``2 sum_k e^{-k^2 pi^2 t}`` and the time solves a scalar equation.
    """
    def f(t):
        s = sum(math.exp(-(k * math.pi) ** 2 * t) for k in range(1, 200))
        return 2 * s - 0.25
    return brentq(f, 0.05, 1.0, xtol=1e-14)
