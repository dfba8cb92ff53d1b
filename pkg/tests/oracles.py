"""Independent reference computations used by the unit and acceptance tests."""

import itertools
import math

import numpy as np


def hypergeom_by_enumeration(M, K, n):
    """Exact pmf over y from listing every n-subset of an M-gene universe."""
    counts = np.zeros(n + 1)
    for draw in itertools.combinations(range(M), n):
        counts[sum(1 for g in draw if g < K)] += 1
    return counts / math.comb(M, n)


def pooled_t(x1, x2):
    """Textbook two-sample t with pooled variance."""
    n1, n2 = len(x1), len(x2)
    m1, m2 = sum(x1) / n1, sum(x2) / n2
    ss = sum((v - m1) ** 2 for v in x1) + sum((v - m2) ** 2 for v in x2)
    s2 = ss / (n1 + n2 - 2)
    return (m1 - m2) / math.sqrt(s2 * (1 / n1 + 1 / n2))


def _coop2(v1, v2):
    pos = np.sqrt(np.maximum(v1, 0) ** 2 + np.maximum(v2, 0) ** 2)
    neg = np.sqrt(np.minimum(v1, 0) ** 2 + np.minimum(v2, 0) ** 2)
    return pos + neg


def _radial_value(U, t, theta):
    """Best radius along each direction and the objective change it gives.

    Along v = r d with |d| = 1 the objective is 0.5 r^2 - r <u, d> + t r coop(d)
    (up to a constant), minimised at r = max(0, <u, d> - t coop(d)).
    """
    d1, d2 = np.cos(theta), np.sin(theta)
    slope = U[:, :1] * d1 + U[:, 1:] * d2 - t[:, None] * _coop2(d1, d2)
    r = np.maximum(slope, 0.0)
    return r, -0.5 * r**2


def prox_grid(U, t, points=2000, zoom_points=41, shrink=4.0, tol=1e-12):
    """Minimise 0.5||v - u||^2 + t * coop(v) for each row of U numerically.

    The penalty is positively homogeneous, so for each direction the best
    radius is explicit and only the angle has to be searched: a dense grid
    of angles, then repeated zooming around the best one. The four axis
    directions, where the penalty has kinks, are always candidates.
    """
    U = np.asarray(U, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), U.shape[:1])
    rows = np.arange(len(U))
    grid = np.linspace(0.0, 2 * np.pi, points, endpoint=False)[None, :]
    _, g = _radial_value(U, t, grid)
    best = grid[0, np.argmin(g, axis=1)]
    half = np.full(len(U), 2 * np.pi / points)
    offs = np.linspace(-1.0, 1.0, zoom_points)[None, :]
    while half.max() > tol:
        theta = best[:, None] + half[:, None] * offs
        _, g = _radial_value(U, t, theta)
        best = theta[rows, np.argmin(g, axis=1)]
        half = half / shrink
    axes = np.array([[0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi]])
    cand = np.hstack([best[:, None], np.broadcast_to(axes, (len(U), 4))])
    r, g = _radial_value(U, t, cand)
    k = np.argmin(g, axis=1)
    theta, r = cand[rows, k], r[rows, k]
    v = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    # directions along an axis give exact zeros
    on_axis = k > 0
    v[on_axis & (k % 2 == 1), 1] = 0.0
    v[on_axis & (k % 2 == 0), 0] = 0.0
    return v


def objective_p2(K1, K2, S1, S2, n1, n2, rho, lam):
    """Penalised log-likelihood for p = 2 written out by hand."""
    total = 0.0
    for K, S, n in ((K1, S1, n1), (K2, S2, n2)):
        det = K[0][0] * K[1][1] - K[0][1] * K[1][0]
        tr = S[0][0] * K[0][0] + S[1][1] * K[1][1] + 2 * S[0][1] * K[0][1]
        total += n / 2 * (math.log(det) - tr)
    a, b = K1[0][1], K2[0][1]
    coop = math.hypot(max(a, 0), max(b, 0)) + math.hypot(min(a, 0), min(b, 0))
    # both (1,2) and (2,1) entries are penalised
    return total - 2 * lam * rho * coop
