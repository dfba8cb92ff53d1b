"""Moderated two-sample t-tests and the PCA projection used for QC plots.

The variance prior is fitted by matching the first two moments of the
log sample variances to the scaled-F sampling model: if
``s2 | sigma2 ~ sigma2 * chi2(d_g) / d_g`` and ``1/sigma2 ~ chi2(d0) / (d0 s0^2)``
then ``log s2`` has mean ``log s0^2 + psi(d_g/2) - log(d_g/2) - psi(d0/2) + log(d0/2)``
and variance ``psi'(d_g/2) + psi'(d0/2)``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

from .datamodel import DIFFERENTIAL, ExpressionMatrix, Signature
from .errors import DegenerateVariances, RankDeficient, SchemaError

MIN_GENES_FOR_PRIOR = 10


@dataclass(frozen=True)
class VariancePrior:
    d0: float
    s0_sq: float

    def __post_init__(self):
        if self.d0 < 0:
            raise ValueError("d0 must be >= 0")
        if self.d0 > 0 and not self.s0_sq > 0:
            raise ValueError("s0_sq must be positive when d0 > 0")


@dataclass(frozen=True)
class GeneTestResult:
    gene_id: str
    mean_c: tuple[float, float]
    s2_pooled: float
    s2_posterior: float
    t_mod: float
    df_total: float
    p_value: float


def pooled_variance(X: ExpressionMatrix, gene: int) -> tuple[float, int]:
    s2, d_g = _pooled_all(X)
    return float(s2[gene]), d_g


def _pooled_all(X: ExpressionMatrix) -> tuple[np.ndarray, int]:
    ss = np.zeros(X.p)
    for c in (1, 2):
        block = X.condition_values(c)
        ss += ((block - block.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    d_g = X.n1 + X.n2 - 2
    return ss / d_g, d_g


def trigamma_inverse(x: float) -> float:
    """Solve ``trigamma(y) = x`` for ``y > 0`` by Newton iteration."""
    if x > 1e7:
        return 1.0 / math.sqrt(x)
    if x < 1e-6:
        return 1.0 / x
    y = 0.5 + 1.0 / x
    for _ in range(50):
        tri = special.polygamma(1, y)
        dif = tri * (1.0 - tri / x) / special.polygamma(2, y)
        y += dif
        if -dif / y < 1e-8:
            break
    return float(y)


def fit_variance_prior(s2_list, d_g: int) -> VariancePrior:
    """Estimate ``(d0, s0^2)`` from the spread of per-gene variances.

    Fewer than ten positive variances fall back to ``d0 = 0`` (ordinary t).
    ``d0`` is infinite when the log-variances are no more dispersed than
    sampling noise alone would make them; ``s0^2`` is then the mean variance.
    """
    s2 = np.asarray(s2_list, dtype=float)
    if s2.size == 0 or not (s2 > 0).any():
        raise DegenerateVariances("all gene variances are zero")
    pos = s2[s2 > 0]
    if pos.size < MIN_GENES_FOR_PRIOR:
        return VariancePrior(0.0, float(pos.mean()))
    half = d_g / 2.0
    e = np.log(pos) - special.digamma(half) + math.log(half)
    emean = float(e.mean())
    evar = float(e.var(ddof=1)) - float(special.polygamma(1, half))
    if evar <= 0:
        return VariancePrior(math.inf, float(pos.mean()))
    d0 = 2.0 * trigamma_inverse(evar)
    s0_sq = math.exp(emean + special.digamma(d0 / 2.0) - math.log(d0 / 2.0))
    return VariancePrior(float(d0), float(s0_sq))


def posterior_variance(s2, d_g: int, prior: VariancePrior) -> np.ndarray:
    s2 = np.asarray(s2, dtype=float)
    if math.isinf(prior.d0):
        return np.full_like(s2, prior.s0_sq)
    if prior.d0 == 0:
        return s2.copy()
    return (prior.d0 * prior.s0_sq + d_g * s2) / (prior.d0 + d_g)


def moderated_t(X: ExpressionMatrix, prior: VariancePrior | None = None) -> list[GeneTestResult]:
    """Per-gene moderated t-statistic of condition 1 minus condition 2."""
    s2, d_g = _pooled_all(X)
    if prior is None:
        prior = fit_variance_prior(s2, d_g)
    post = posterior_variance(s2, d_g, prior)
    m1 = X.condition_values(1).mean(axis=1)
    m2 = X.condition_values(2).mean(axis=1)
    diff = m1 - m2
    se = np.sqrt(post) * math.sqrt(1.0 / X.n1 + 1.0 / X.n2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(diff == 0, 0.0, diff / se)
    df = prior.d0 + d_g
    if math.isinf(df):
        p = 2.0 * stats.norm.sf(np.abs(t))
    else:
        p = 2.0 * stats.t.sf(np.abs(t), df)
    p = np.clip(p, 0.0, 1.0)
    return [
        GeneTestResult(
            X.gene_ids[i],
            (float(m1[i]), float(m2[i])),
            float(s2[i]),
            float(post[i]),
            float(t[i]),
            float(df),
            float(p[i]),
        )
        for i in range(X.p)
    ]


def benjamini_hochberg(pvalues) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    scaled = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(scaled, 1.0)
    return out


def select_signature(
    results: Sequence[GeneTestResult], alpha: float = 1e-3, adjust: str = "none"
) -> Signature:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    p = np.array([r.p_value for r in results], dtype=float)
    if adjust == "benjamini_hochberg":
        p = benjamini_hochberg(p)
    elif adjust != "none":
        raise ValueError(f"unknown adjustment {adjust!r}")
    if alpha == 1:
        keep = np.ones(p.size, dtype=bool)
    else:
        keep = p < alpha
    return Signature.from_genes(
        (r.gene_id for r, k in zip(results, keep) if k), DIFFERENTIAL
    )


# ---------------------------------------------------------------------------
# PCA for QC


@dataclass(frozen=True)
class Projection:
    coords: np.ndarray  # samples x dims
    loadings: np.ndarray  # genes x dims
    explained: np.ndarray  # fraction of total variance per axis


def pca_projection(X: ExpressionMatrix, genes, dims: int = 2) -> Projection:
    genes = list(genes)
    if not genes:
        raise ValueError("signature is empty")
    sub = X.subset(genes).values
    if dims < 1 or dims > min(sub.shape):
        raise RankDeficient(f"dims={dims} exceeds min(p, N)={min(sub.shape)}")
    centered = sub - sub.mean(axis=1, keepdims=True)
    # samples x genes
    U, sv, Vt = np.linalg.svd(centered.T, full_matrices=False)
    tol = sv.max(initial=0.0) * max(centered.shape) * np.finfo(float).eps
    rank = int((sv > tol).sum())
    if dims > rank:
        raise RankDeficient(f"dims={dims} exceeds numerical rank {rank}")
    loadings = Vt[:dims].T.copy()
    for k in range(dims):
        j = int(np.argmax(np.abs(loadings[:, k])))
        if loadings[j, k] < 0:
            loadings[:, k] *= -1
    coords = centered.T @ loadings
    total = float((sv**2).sum())
    explained = sv[:dims] ** 2 / total
    return Projection(coords, loadings, explained)


def separation_ratio(coords: np.ndarray, conditions) -> float:
    """Distance between condition centroids over mean within-condition spread."""
    coords = np.asarray(coords, dtype=float)
    conditions = np.asarray(conditions)
    cents, spreads = [], []
    for c in (1, 2):
        pts = coords[conditions == c]
        cent = pts.mean(axis=0)
        cents.append(cent)
        spreads.append(np.linalg.norm(pts - cent, axis=1).mean())
    spread = float(np.mean(spreads))
    gap = float(np.linalg.norm(cents[0] - cents[1]))
    if spread == 0:
        return math.inf if gap > 0 else 0.0
    return gap / spread


# ---------------------------------------------------------------------------
# TSV export

RESULT_COLUMNS = ("gene", "mean1", "mean2", "s2_pooled", "s2_posterior", "t_mod", "df", "p_value")


def _g10(v: float) -> str:
    return format(v, ".10g")


def format_results(results: Sequence[GeneTestResult]) -> str:
    buf = io.StringIO()
    buf.write("\t".join(RESULT_COLUMNS) + "\n")
    for r in results:
        cells = [r.gene_id, *(_g10(v) for v in (*r.mean_c, r.s2_pooled, r.s2_posterior, r.t_mod, r.df_total, r.p_value))]
        buf.write("\t".join(cells) + "\n")
    return buf.getvalue()


def parse_results(text: str) -> list[GeneTestResult]:
    lines = [ln.rstrip("\r") for ln in text.splitlines() if ln.strip()]
    header = tuple(lines[0].split("\t")) if lines else ()
    if header != RESULT_COLUMNS:
        missing = [c for c in RESULT_COLUMNS if c not in header]
        raise SchemaError(f"differential results: expected columns {RESULT_COLUMNS}, missing {missing or header}")
    out = []
    for ln in lines[1:]:
        f = ln.split("\t")
        v = [float(x) for x in f[1:]]
        out.append(GeneTestResult(f[0], (v[0], v[1]), v[2], v[3], v[4], v[5], v[6]))
    return out
