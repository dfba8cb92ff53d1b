"""Joint estimation of two sparse concentration matrices.

We maximise

    sum_c (n_c/2) [log det K_c - tr(S_c K_c)]
        - lam * sum_{i != j} rho_ij * (||[K_ij]_+||_2 + ||[K_ij]_-||_2)

where ``K_ij = (K_1[i, j], K_2[i, j])`` and the sum runs over ordered pairs.
The cooperative norm couples the two conditions and favours edges whose sign
agrees across them. ``rho`` encodes the gene clusters: pairs sharing a cluster
are weighted by ``1/lambda_in``, pairs spread over different clusters by
``1/lambda_out``, and pairs with an unclustered gene by 1.

The solver is proximal gradient descent on the negated objective with
Barzilai-Borwein step proposals and backtracking that keeps every iterate
positive definite. ``oracle_solve_small`` is an unrelated brute-force method
for p <= 4 used to check it.
"""

from __future__ import annotations

import io
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .datamodel import CovariancePair
from .errors import NotPositiveDefinite, SchemaError


@dataclass(frozen=True)
class PenaltyWeights:
    rho: np.ndarray
    lam: float = 1.0
    lambda_in: float = 1.0
    lambda_out: float = 1.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("rho must be square")
        if not np.array_equal(rho, rho.T):
            raise ValueError("rho must be symmetric")
        if (rho < 0).any():
            raise ValueError("rho must be nonnegative")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        np.fill_diagonal(rho, 0.0)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def with_lambda(self, lam: float) -> "PenaltyWeights":
        return replace(self, lam=float(lam))

    @property
    def matrix(self) -> np.ndarray:
        """``lam * rho`` with a zero diagonal."""
        return self.lam * self.rho


def penalty_weights(Z, lambda_in: float, lambda_out: float, p: int | None = None, lam: float = 1.0) -> PenaltyWeights:
    """Pairwise weights from an overlapping cluster indicator matrix ``Z``.

    ``Z`` has one row per gene (rows beyond ``len(Z)`` up to ``p`` are
    unclustered). For two clustered genes the weight sums ``1/lambda_in``
    over shared clusters and ``1/lambda_out`` over every pair of distinct
    clusters (q, l) with i in q and j in l; any pair involving an
    unclustered gene gets weight 1.
    """
    if lambda_in <= 0 or lambda_out <= 0:
        raise ValueError("lambda_in and lambda_out must be positive")
    Z = np.asarray(getattr(Z, "Z", Z), dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    p = Z.shape[0] if p is None else p
    if Z.shape[0] > p:
        raise ValueError("Z has more rows than genes")
    if Z.shape[0] < p:
        Z = np.vstack([Z, np.zeros((p - Z.shape[0], Z.shape[1]))])
    same = Z @ Z.T
    counts = Z.sum(axis=1)
    cross = np.outer(counts, counts) - same
    rho = same / lambda_in + cross / lambda_out
    clustered = counts > 0
    rho[~np.outer(clustered, clustered)] = 1.0
    np.fill_diagonal(rho, 0.0)
    return PenaltyWeights(rho, lam, lambda_in, lambda_out)


def uniform_weights(p: int, lam: float = 1.0) -> PenaltyWeights:
    rho = np.ones((p, p))
    return PenaltyWeights(rho, lam)


# ---------------------------------------------------------------------------
# cooperative norm and its proximal operator


def coop_penalty(u) -> float:
    """``||[u]_+||_2 + ||[u]_-||_2`` for one vector of per-condition values."""
    u = np.asarray(u, dtype=float)
    return float(np.linalg.norm(np.maximum(u, 0.0)) + np.linalg.norm(np.minimum(u, 0.0)))


def _coop_stack(K: np.ndarray) -> np.ndarray:
    """Entrywise cooperative norm across the leading (condition) axis."""
    pos = np.sqrt((np.maximum(K, 0.0) ** 2).sum(axis=0))
    neg = np.sqrt((np.minimum(K, 0.0) ** 2).sum(axis=0))
    return pos + neg


def _prox_stack(K: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Entrywise prox of ``T * coop`` applied across the condition axis.

    The optimum keeps each coordinate's sign or zeroes it, so the problem
    splits into a group soft-threshold of the positive coordinates and one of
    the negative coordinates.
    """
    pos = np.maximum(K, 0.0)
    neg = np.minimum(K, 0.0)
    out = np.zeros_like(K)
    for part in (pos, neg):
        norm = np.sqrt((part**2).sum(axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.where(norm > T, 1.0 - T / norm, 0.0)
        out += part * shrink
    return out


def prox_coop(u, t: float) -> np.ndarray:
    """argmin_v 0.5||v - u||^2 + t * coop_penalty(v)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    u = np.asarray(u, dtype=float)
    return _prox_stack(u[:, None, None], np.array([[t]]))[:, 0, 0]


# ---------------------------------------------------------------------------
# objective


def log_likelihood(K: np.ndarray, S: np.ndarray, n: int) -> float:
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("concentration matrix is not positive definite") from None
    logdet = 2.0 * np.log(np.diag(L)).sum()
    return 0.5 * n * (logdet - float(np.sum(S * K)))


def penalty_value(K: Sequence[np.ndarray], weights: PenaltyWeights) -> float:
    return float((weights.matrix * _coop_stack(np.stack(K))).sum())


def objective(K: Sequence[np.ndarray], S: CovariancePair, weights: PenaltyWeights) -> float:
    """Penalised log-likelihood (to be maximised); the likelihood constant is 0."""
    K = _as_pair(K)
    ll = sum(log_likelihood(k, s, n) for k, s, n in zip(K, S.S, S.n))
    return ll - penalty_value(K, weights)


def _as_pair(K):
    return tuple(getattr(K, "K", K))


# ---------------------------------------------------------------------------
# proximal gradient solver


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 5000
    tol_obj: float = 1e-8
    tol_kkt: float = 1e-7
    eps: float = 1e-4
    max_backtrack: int = 80
    stall_iter: int = 200


@dataclass(frozen=True)
class ConcentrationPair:
    K: tuple
    objective_trace: tuple = ()
    kkt_residual: float = math.nan
    converged: bool = False
    n_iter: int = 0

    def __post_init__(self):
        K = tuple(np.array(k, dtype=float) for k in self.K)
        for k in K:
            k.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else math.nan

    def diagnostics(self) -> dict:
        return {
            "iterations": self.n_iter,
            "final_objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
        }

    def diagnostics_json(self) -> str:
        return json.dumps(self.diagnostics(), indent=2, sort_keys=True) + "\n"


def _smooth(K, S, n):
    """Negated likelihood and its gradient; ``None`` if some K is not PD."""
    val = 0.0
    grad = np.empty_like(K)
    for c in range(K.shape[0]):
        try:
            cf = linalg.cho_factor(K[c], lower=True, check_finite=False)
        except linalg.LinAlgError:
            return None
        if not np.all(np.diag(cf[0]) > 0):
            return None
        logdet = 2.0 * np.log(np.diag(cf[0])).sum()
        inv = linalg.cho_solve(cf, np.eye(K.shape[1]), check_finite=False)
        inv = (inv + inv.T) / 2.0
        val += 0.5 * n[c] * (float(np.sum(S[c] * K[c])) - logdet)
        grad[c] = 0.5 * n[c] * (S[c] - inv)
    return val, grad


def _kkt(K, grad, W, n):
    """Estimated distance to the optimum, in units of K.

    The unit-step gradient mapping of the per-sample problem is divided by
    each condition's strong-convexity modulus ``(n_c / N) / lambda_max(K_c)^2``.
    """
    N = float(sum(n))
    scale = 0.5 * N
    step = K - grad / scale
    gm = np.abs(K - _prox_stack(step, W / scale))
    out = 0.0
    for c in range(K.shape[0]):
        top = np.linalg.eigvalsh(K[c])[-1]
        out = max(out, float(gm[c].max()) * top**2 * N / n[c])
    return out


def _prox_gradient(S, n, W, cfg: SolverConfig, K0=None):
    m, p = S.shape[0], S.shape[1]
    diag = np.stack([np.diag(s) for s in S])
    if (diag <= 0).any():
        c, i = np.argwhere(diag <= 0)[0]
        raise ValueError(f"gene {i} has zero variance in condition {c + 1}")
    if K0 is None:
        K = np.stack([np.diag(1.0 / (d + cfg.eps)) for d in diag])
    else:
        K = np.array(K0, dtype=float)
    scale = 0.5 * float(sum(n))
    res = _smooth(K, S, n)
    if res is None:
        raise NotPositiveDefinite("initial point is not positive definite")
    f, g = res
    F = f + float((W * _coop_stack(K)).sum())
    trace = [-F]
    t = 1.0 / max(0.5 * n[c] * float(np.max(1.0 / np.diag(K[c]))) ** 2 for c in range(m))
    kkt = _kkt(K, g, W, n)
    converged = kkt < cfg.tol_kkt
    it = stall = 0
    K_prev = g_prev = None
    while not converged and it < cfg.max_iter:
        it += 1
        if K_prev is not None:
            s = K - K_prev
            yv = g - g_prev
            sy = float(np.sum(s * yv))
            if sy > 0:
                t = float(np.sum(s * s)) / sy
        for _ in range(cfg.max_backtrack):
            Kn = _prox_stack(K - t * g, t * W)
            res = _smooth(Kn, S, n)
            if res is not None:
                fn, gn = res
                d = Kn - K
                if fn <= f + float(np.sum(g * d)) + float(np.sum(d * d)) / (2.0 * t):
                    break
            t *= 0.5
        else:
            break
        Fn = fn + float((W * _coop_stack(Kn)).sum())
        K_prev, g_prev = K, g
        K, f, g = Kn, fn, gn
        rel = abs(Fn - F) / max(1.0, abs(F))
        F = Fn
        trace.append(-F)
        kkt = _kkt(K, g, W, n)
        stall = stall + 1 if rel < cfg.tol_obj else 0
        if kkt < cfg.tol_kkt:
            converged = True
        elif stall >= cfg.stall_iter:
            break
    return K, tuple(trace), kkt, converged, it


def solve_multitask(S: CovariancePair, weights: PenaltyWeights, cfg: SolverConfig = SolverConfig(), K0=None) -> ConcentrationPair:
    """Maximise the joint penalised likelihood for both conditions."""
    St = np.stack(S.S)
    W = np.broadcast_to(weights.matrix, St.shape[1:])
    K, trace, kkt, conv, it = _prox_gradient(St, S.n, W, cfg, K0)
    return ConcentrationPair((K[0], K[1]), trace, kkt, conv, it)


def solve_independent(S: CovariancePair, weights: PenaltyWeights, cfg: SolverConfig = SolverConfig()) -> ConcentrationPair:
    """Two separate l1-penalised fits, one per condition, with the same weights.

    With a single condition the cooperative norm reduces to ``|K_ij|``, so
    this is the uncoupled counterpart of :func:`solve_multitask`.
    """
    W = weights.matrix
    Ks, traces, kkts, convs, its = [], [], [], [], []
    for s, n in zip(S.S, S.n):
        K, trace, kkt, conv, it = _prox_gradient(np.asarray(s)[None], (n,), W, cfg)
        Ks.append(K[0])
        traces.append(trace[-1])
        kkts.append(kkt)
        convs.append(conv)
        its.append(it)
    return ConcentrationPair(tuple(Ks), (sum(traces),), max(kkts), all(convs), max(its))


# ---------------------------------------------------------------------------
# brute-force oracle for tiny problems


def _oracle_neg_objective(Ks, S, n, W):
    total = 0.0
    for K, s, nc in zip(Ks, S, n):
        sign, logdet = np.linalg.slogdet(K)
        if sign <= 0:
            return math.inf
        total -= 0.5 * nc * (logdet - np.trace(s @ K))
    p = Ks[0].shape[0]
    for i in range(p):
        for j in range(p):
            if i != j and W[i, j]:
                total += W[i, j] * coop_penalty([Ks[0][i, j], Ks[1][i, j]])
    return total


def _chol_to_pair(theta, p):
    Ks = []
    k = p * (p + 1) // 2
    rows, cols = np.tril_indices(p)
    for c in range(2):
        L = np.zeros((p, p))
        L[rows, cols] = theta[c * k:(c + 1) * k]
        L[np.diag_indices(p)] = np.exp(np.diag(L))
        Ks.append(L @ L.T)
    return Ks


def _smoothed_objective(theta, p, S, n, W, eps):
    Ks = _chol_to_pair(theta, p)
    total = 0.0
    for K, s, nc in zip(Ks, S, n):
        logdet = np.linalg.slogdet(K)[1]
        total -= 0.5 * nc * (logdet - np.trace(s @ K))
    for i in range(p):
        for j in range(p):
            if i != j and W[i, j]:
                u = np.array([Ks[0][i, j], Ks[1][i, j]])
                pos = math.sqrt(float((np.maximum(u, 0) ** 2).sum()) + eps**2) - eps
                neg = math.sqrt(float((np.minimum(u, 0) ** 2).sum()) + eps**2) - eps
                total += W[i, j] * (pos + neg)
    return total


# per-pair options: None = both zero, else the sign of each condition's entry
_PAIR_OPTIONS = (None, (1, 1), (1, -1), (-1, 1), (-1, -1))


def _solve_pattern(pattern, pairs, p, S, n, W, start):
    """Minimise the negated objective with the sign pattern enforced by bounds."""
    free = [(k, opt) for k, opt in enumerate(pattern) if opt is not None]
    nx = 2 * p + 2 * len(free)

    def unpack(x):
        Ks = [np.diag(x[:p]).astype(float), np.diag(x[p:2 * p]).astype(float)]
        for m, (k, _) in enumerate(free):
            i, j = pairs[k]
            for c in range(2):
                Ks[c][i, j] = Ks[c][j, i] = x[2 * p + 2 * m + c]
        return Ks

    def fun(x):
        Ks = unpack(x)
        val = 0.0
        grad = np.zeros(nx)
        invs = []
        for c, (K, s, nc) in enumerate(zip(Ks, S, n)):
            sign, logdet = np.linalg.slogdet(K)
            if sign <= 0 or not np.isfinite(logdet):
                return 1e30, np.zeros(nx)
            inv = np.linalg.inv(K)
            invs.append(inv)
            val -= 0.5 * nc * (logdet - np.trace(s @ K))
            grad[c * p:(c + 1) * p] = 0.5 * nc * (np.diag(s) - np.diag(inv))
        for m, (k, opt) in enumerate(free):
            i, j = pairs[k]
            a, b = x[2 * p + 2 * m], x[2 * p + 2 * m + 1]
            w = W[i, j] + W[j, i]
            if opt[0] == opt[1]:
                r = math.hypot(a, b)
                val += w * r
                dpen = (w * a / r, w * b / r) if r > 0 else (0.0, 0.0)
            else:
                val += w * (abs(a) + abs(b))
                dpen = (w * opt[0], w * opt[1])
            for c in range(2):
                # the entry appears at (i, j) and (j, i)
                grad[2 * p + 2 * m + c] = n[c] * (S[c][i, j] - invs[c][i, j]) + dpen[c]
        return val, grad

    bounds = [(1e-12, None)] * (2 * p)
    x0 = list(np.diag(start[0])) + list(np.diag(start[1]))
    for k, opt in free:
        i, j = pairs[k]
        for c in range(2):
            bounds.append((0.0, None) if opt[c] > 0 else (None, 0.0))
            v = start[c][i, j]
            x0.append(v if v * opt[c] > 0 else 0.0)
    x0 = np.array(x0)
    if fun(x0)[0] >= 1e30:
        x0[:2 * p] = np.concatenate([np.diag(start[0]), np.diag(start[1])])
        x0[2 * p:] = 0.0
    res = optimize.minimize(
        fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-11, "maxcor": 30},
    )
    Ks = unpack(res.x)
    return Ks, _oracle_neg_objective(Ks, S, n, W)


def oracle_solve_small(S: CovariancePair, weights: PenaltyWeights, starts: int = 5, seed: int = 0) -> ConcentrationPair:
    """Brute-force maximiser for ``p <= 4``.

    Multi-start quasi-Newton on a Cholesky parameterisation with a smoothed
    penalty locates the basin; every sign pattern of the off-diagonal pairs
    (both zero or one closed orthant) is then solved as a bound-constrained
    smooth problem and the best pattern is returned, preferring sparser
    patterns among numerical ties.
    """
    p = S.p
    if p > 4:
        raise ValueError("the oracle handles p <= 4 only")
    Sl = [np.asarray(s, dtype=float) for s in S.S]
    n = S.n
    if any((np.diag(s) <= 0).any() for s in Sl):
        raise ValueError("zero variance gene")
    W = weights.matrix
    if p == 1:
        Ks = tuple(np.array([[1.0 / s[0, 0]]]) for s in Sl)
        val = -_oracle_neg_objective(Ks, Sl, n, W)
        return ConcentrationPair(Ks, (val,), 0.0, True, 0)

    rng = np.random.default_rng(seed)
    k = p * (p + 1) // 2
    base = np.zeros(2 * k)
    rows, cols = np.tril_indices(p)
    for c in range(2):
        d = np.zeros((p, p))
        d[np.diag_indices(p)] = np.log(1.0 / np.sqrt(np.diag(Sl[c])))
        base[c * k:(c + 1) * k] = d[rows, cols]
    best_theta, best_val = None, math.inf
    for st in range(starts):
        theta = base if st == 0 else base + rng.normal(scale=0.5, size=base.shape)
        for eps in (1e-2, 1e-4, 1e-6):
            with warnings.catch_warnings():
                # finite differences may step outside the positive definite cone
                warnings.simplefilter("ignore", RuntimeWarning)
                r = optimize.minimize(_smoothed_objective, theta, args=(p, Sl, n, W, eps), method="BFGS")
            theta = r.x
        val = _oracle_neg_objective(_chol_to_pair(theta, p), Sl, n, W)
        if val < best_val:
            best_theta, best_val = theta, val
    start = _chol_to_pair(best_theta, p)

    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    options = []
    for i, j in pairs:
        if p <= 3:
            options.append(_PAIR_OPTIONS)
            continue
        # prune to orthants compatible with the located basin
        signs = []
        for c in range(2):
            v = start[c][i, j]
            signs.append((1, -1) if abs(v) < 0.05 else ((1,) if v > 0 else (-1,)))
        options.append((None,) + tuple(itertools.product(*signs)))

    cands = [(best_val, sum(1 for _ in pairs) * 2, start)]
    for pattern in itertools.product(*options):
        Ks, val = _solve_pattern(pattern, pairs, p, Sl, n, W, start)
        nnz = sum(int(Ks[c][i, j] != 0) for i, j in pairs for c in range(2))
        cands.append((val, nnz, Ks))
    top = min(c[0] for c in cands)
    tol = 1e-9 * max(1.0, abs(top))
    val, _, Ks = min((c for c in cands if c[0] <= top + tol), key=lambda c: (c[1], c[0]))
    return ConcentrationPair(tuple(Ks), (-val,), math.nan, True, 0)


# ---------------------------------------------------------------------------
# network extraction and lambda selection


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    present_in: tuple[int, ...]
    pcor: tuple[float, float]
    sign: tuple[int, int]


@dataclass(frozen=True)
class InferredNetwork:
    genes: tuple[str, ...]
    edges: tuple[Edge, ...] = ()

    def support(self, c: int) -> np.ndarray:
        p = len(self.genes)
        A = np.zeros((p, p), dtype=bool)
        for e in self.edges:
            if c in e.present_in:
                A[e.i, e.j] = A[e.j, e.i] = True
        return A


def partial_correlations(K: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.diag(K))
    R = -K / np.outer(d, d)
    np.fill_diagonal(R, 1.0)
    return R


def extract_network(K, tol: float = 0.0, genes=None) -> InferredNetwork:
    """Edges where some condition has ``|K_ij| > tol``, with partial correlations."""
    K = _as_pair(K)
    p = K[0].shape[0]
    genes = tuple(genes) if genes is not None else tuple(str(k) for k in range(p))
    R = [partial_correlations(k) for k in K]
    edges = []
    for i in range(p):
        for j in range(i + 1, p):
            present = tuple(c + 1 for c in range(2) if abs(K[c][i, j]) > tol)
            if not present:
                continue
            pc = tuple(float(np.clip(R[c][i, j], -1.0, 1.0)) if (c + 1) in present else 0.0 for c in range(2))
            edges.append(Edge(i, j, present, pc, tuple(int(np.sign(v)) for v in pc)))
    return InferredNetwork(genes, tuple(edges))


@dataclass(frozen=True)
class LambdaSelection:
    best: float
    table: tuple  # (lambda, bic, log_likelihood, n_nonzero)
    fits: tuple = field(default=(), repr=False)


def bic_score(fit: ConcentrationPair, S: CovariancePair) -> tuple[float, float, int]:
    p = S.p
    ll = sum(log_likelihood(k, s, n) for k, s, n in zip(fit.K, S.S, S.n))
    iu = np.triu_indices(p, k=1)
    nnz = int(sum((k[iu] != 0).sum() for k in fit.K))
    bic = -2.0 * ll + math.log(S.n[0] + S.n[1]) * (nnz + 2 * p)
    return bic, ll, nnz


def select_lambda(S: CovariancePair, template: PenaltyWeights, grid, cfg: SolverConfig = SolverConfig()) -> LambdaSelection:
    """Fit every lambda in ``grid`` from the same start and keep the lowest BIC.

    Ties go to the larger lambda.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    table, fits = [], []
    for lam in grid:
        fit = solve_multitask(S, template.with_lambda(lam), cfg)
        bic, ll, nnz = bic_score(fit, S)
        table.append((lam, bic, ll, nnz))
        fits.append(fit)
    best = min(table, key=lambda r: (r[1], -r[0]))[0]
    return LambdaSelection(best, tuple(table), tuple(fits))


# ---------------------------------------------------------------------------
# TSV export

NETWORK_COLUMNS = ("gene_i", "gene_j", "in_cond1", "in_cond2", "pcor1", "pcor2")


def format_network(net: InferredNetwork) -> str:
    buf = io.StringIO()
    buf.write("\t".join(NETWORK_COLUMNS) + "\n")
    for e in net.edges:
        flags = [int(c in e.present_in) for c in (1, 2)]
        buf.write(
            f"{net.genes[e.i]}\t{net.genes[e.j]}\t{flags[0]}\t{flags[1]}\t{e.pcor[0]:.10g}\t{e.pcor[1]:.10g}\n"
        )
    return buf.getvalue()


def parse_network(text: str, genes=None) -> InferredNetwork:
    """Read a network table; ``genes`` fixes the node order (default: first appearance)."""
    lines = [ln.rstrip("\r") for ln in text.splitlines() if ln.strip()]
    header = tuple(lines[0].split("\t")) if lines else ()
    if header != NETWORK_COLUMNS:
        raise SchemaError(f"network table: expected columns {NETWORK_COLUMNS}, got {header}")
    rows = [ln.split("\t") for ln in lines[1:]]
    if genes is None:
        genes = []
        for r in rows:
            for g in r[:2]:
                if g not in genes:
                    genes.append(g)
    genes = tuple(genes)
    idx = {g: k for k, g in enumerate(genes)}
    edges = []
    for gi, gj, f1, f2, r1, r2 in rows:
        present = tuple(c for c, f in ((1, f1), (2, f2)) if f == "1")
        pc = (float(r1), float(r2))
        i, j = idx[gi], idx[gj]
        edges.append(Edge(i, j, present, pc, tuple(int(np.sign(v)) for v in pc)))
    return InferredNetwork(genes, tuple(edges))
