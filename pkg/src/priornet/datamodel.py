"""Core containers, TSV ingestion and a synthetic ground-truth generator.

Expression data are stored genes x samples. Every sample carries a condition
label in {1, 2}. Covariances use the maximum-likelihood divisor ``n_c``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateGene,
    NotPositiveDefinite,
    ParseError,
    TooFewReplicates,
    UnlabeledSample,
)

CONDITIONS = (1, 2)

DIFFERENTIAL = "differential"
FOREST_RETAINED = "forest-retained"
PPI_ADDED = "ppi-added"
PROVENANCES = (DIFFERENTIAL, FOREST_RETAINED, PPI_ADDED)


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ExpressionMatrix:
    """Log-expression values for ``p`` genes over ``N`` labelled samples."""

    gene_ids: tuple[str, ...]
    values: np.ndarray
    conditions: np.ndarray
    sample_ids: tuple[str, ...] = ()

    def __post_init__(self):
        gene_ids = tuple(str(g) for g in self.gene_ids)
        values = _frozen(self.values)
        conditions = _frozen(self.conditions, dtype=int)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D genes x samples array")
        p, n = values.shape
        if p < 1 or len(gene_ids) != p:
            raise ValueError(f"expected {p} gene ids, got {len(gene_ids)}")
        seen = set()
        for g in gene_ids:
            if g in seen:
                raise DuplicateGene(f"duplicate gene id {g!r}")
            seen.add(g)
        if conditions.shape != (n,):
            raise ValueError("one condition label per sample is required")
        if not np.isin(conditions, CONDITIONS).all():
            raise ValueError("condition labels must be 1 or 2")
        if not np.isfinite(values).all():
            raise ParseError("expression values must be finite")
        for c in CONDITIONS:
            if (conditions == c).sum() < 2:
                raise TooFewReplicates(
                    f"condition {c} has {(conditions == c).sum()} samples, need >= 2"
                )
        sample_ids = tuple(self.sample_ids) or tuple(f"s{k + 1}" for k in range(n))
        if len(sample_ids) != n:
            raise ValueError("one sample id per column is required")
        object.__setattr__(self, "gene_ids", gene_ids)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "conditions", conditions)
        object.__setattr__(self, "sample_ids", sample_ids)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def n_c(self, c: int) -> int:
        return int((self.conditions == c).sum())

    @property
    def n1(self) -> int:
        return self.n_c(1)

    @property
    def n2(self) -> int:
        return self.n_c(2)

    def condition_values(self, c: int) -> np.ndarray:
        """Genes x replicates block of condition ``c``."""
        return self.values[:, self.conditions == c]

    def index_of(self, gene: str) -> int:
        return self.gene_ids.index(gene)

    def subset(self, genes: Iterable[str]) -> "ExpressionMatrix":
        """Rows restricted to ``genes``, in the order given."""
        lookup = {g: k for k, g in enumerate(self.gene_ids)}
        genes = list(genes)
        missing = [g for g in genes if g not in lookup]
        if missing:
            raise KeyError(f"genes not in expression matrix: {missing[:5]}")
        rows = [lookup[g] for g in genes]
        return ExpressionMatrix(
            tuple(genes), self.values[rows], self.conditions, self.sample_ids
        )

    def with_values(self, values) -> "ExpressionMatrix":
        return ExpressionMatrix(self.gene_ids, values, self.conditions, self.sample_ids)

    def __eq__(self, other):
        if not isinstance(other, ExpressionMatrix):
            return NotImplemented
        return (
            self.gene_ids == other.gene_ids
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.conditions, other.conditions)
        )

    __hash__ = None


@dataclass(frozen=True)
class Signature:
    """Ordered gene selection; each gene remembers which step selected it."""

    entries: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        entries = tuple((str(g), str(prov)) for g, prov in self.entries)
        seen = set()
        for g, prov in entries:
            if prov not in PROVENANCES:
                raise ValueError(f"unknown provenance {prov!r}")
            if g in seen:
                raise DuplicateGene(f"gene {g!r} listed twice in signature")
            seen.add(g)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_genes(cls, genes: Iterable[str], provenance: str) -> "Signature":
        return cls(tuple((g, provenance) for g in genes))

    @property
    def genes(self) -> tuple[str, ...]:
        return tuple(g for g, _ in self.entries)

    def provenance(self, gene: str) -> str:
        return dict(self.entries)[gene]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.genes)

    def __contains__(self, gene):
        return any(g == gene for g, _ in self.entries)


@dataclass(frozen=True)
class CovariancePair:
    """Per-condition empirical covariances and their sample counts."""

    S: tuple[np.ndarray, np.ndarray]
    n: tuple[int, int]

    def __post_init__(self):
        S = tuple(_frozen(s) for s in self.S)
        if len(S) != 2 or len(self.n) != 2:
            raise ValueError("exactly two conditions are supported")
        for s in S:
            if s.ndim != 2 or s.shape[0] != s.shape[1]:
                raise ValueError("covariance must be square")
            if not np.array_equal(s, s.T):
                raise ValueError("covariance must be exactly symmetric")
            if (np.diag(s) < 0).any():
                raise ValueError("covariance diagonal must be nonnegative")
        if S[0].shape != S[1].shape:
            raise ValueError("covariances of both conditions must share a shape")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))

    @property
    def p(self) -> int:
        return self.S[0].shape[0]


@dataclass(frozen=True)
class GroundTruthModel:
    """Known pair of concentration matrices with overlapping cluster labels."""

    Z: np.ndarray
    K: tuple[np.ndarray, np.ndarray]
    gene_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        K = tuple(_frozen(k) for k in self.K)
        for k in K:
            if not np.array_equal(k, k.T):
                raise ValueError("K must be symmetric")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "Z", _frozen(self.Z, dtype=int))
        if not self.gene_ids:
            width = len(str(self.p))
            ids = tuple(f"g{k + 1:0{width}d}" for k in range(self.p))
            object.__setattr__(self, "gene_ids", ids)

    @property
    def p(self) -> int:
        return self.K[0].shape[0]

    @property
    def edge_support(self) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for k in self.K:
            s = k != 0
            np.fill_diagonal(s, False)
            out.append(s)
        return tuple(out)

    def covariance(self, c: int) -> np.ndarray:
        return np.linalg.inv(self.K[c - 1])


# ---------------------------------------------------------------------------
# TSV ingestion


def _read_rows(path) -> list[list[str]]:
    text = Path(path).read_text(encoding="utf-8")
    rows = []
    for line in text.splitlines():
        line = line.rstrip("\r")
        if not line.strip():
            continue
        rows.append(line.split("\t"))
    return rows


def read_labels(path) -> dict[str, int]:
    labels = {}
    for k, row in enumerate(_read_rows(path)):
        if len(row) < 2:
            raise ParseError(f"{path}: line {k + 1} needs sample<TAB>condition")
        name, cond = row[0].strip(), row[1].strip()
        if k == 0 and cond not in ("1", "2"):
            continue  # header
        if cond not in ("1", "2"):
            raise ParseError(f"{path}: condition for {name!r} must be 1 or 2, got {cond!r}")
        labels[name] = int(cond)
    return labels


def load_expression(path, labels_path) -> ExpressionMatrix:
    """Parse an expression TSV (genes in rows) and its sample-label TSV."""
    rows = _read_rows(path)
    if len(rows) < 2:
        raise ParseError(f"{path}: no data rows")
    samples = [s.strip() for s in rows[0][1:]]
    labels = read_labels(labels_path)
    for s in samples:
        if s not in labels:
            raise UnlabeledSample(f"sample {s!r} has no condition label")
    genes, values = [], []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        gene = row[0].strip()
        if gene in seen:
            raise DuplicateGene(f"{path}: duplicate gene id {gene!r} on line {lineno}")
        seen.add(gene)
        cells = row[1:]
        if len(cells) != len(samples):
            raise ParseError(f"{path}: line {lineno} has {len(cells)} values, expected {len(samples)}")
        try:
            vals = [float(v) for v in cells]
        except ValueError as exc:
            raise ParseError(f"{path}: non-numeric cell on line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"{path}: missing or non-finite value on line {lineno}")
        genes.append(gene)
        values.append(vals)
    conditions = [labels[s] for s in samples]
    return ExpressionMatrix(tuple(genes), np.array(values), np.array(conditions), tuple(samples))


def format_expression(X: ExpressionMatrix) -> str:
    buf = io.StringIO()
    buf.write("gene\t" + "\t".join(X.sample_ids) + "\n")
    for g, row in zip(X.gene_ids, X.values):
        buf.write(g + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def format_labels(X: ExpressionMatrix) -> str:
    lines = ["sample\tcondition"]
    lines += [f"{s}\t{c}" for s, c in zip(X.sample_ids, X.conditions)]
    return "\n".join(lines) + "\n"


def write_expression(X: ExpressionMatrix, path, labels_path) -> None:
    Path(path).write_text(format_expression(X), encoding="utf-8")
    Path(labels_path).write_text(format_labels(X), encoding="utf-8")


# ---------------------------------------------------------------------------
# centering / covariance


def center_by_condition(X: ExpressionMatrix, scale: bool = False) -> ExpressionMatrix:
    """Subtract each gene's mean within each condition.

    With ``scale=True`` genes are also brought to unit (MLE) variance within
    each condition; genes with zero variance are left at zero.
    """
    values = np.array(X.values, dtype=float)
    for c in CONDITIONS:
        mask = X.conditions == c
        block = values[:, mask]
        block = block - block.mean(axis=1, keepdims=True)
        if scale:
            sd = np.sqrt((block**2).mean(axis=1, keepdims=True))
            block = np.divide(block, sd, out=np.zeros_like(block), where=sd > 0)
        values[:, mask] = block
    return X.with_values(values)


def empirical_covariance(X: ExpressionMatrix, c: int) -> np.ndarray:
    """MLE covariance ``(1/n_c) sum_r x_r x_r^T`` of condition ``c`` after centering."""
    if X.n_c(c) < 2:
        raise TooFewReplicates(f"condition {c} needs >= 2 samples")
    block = X.condition_values(c)
    block = block - block.mean(axis=1, keepdims=True)
    n = block.shape[1]
    S = np.zeros((block.shape[0], block.shape[0]))
    for r in range(n):
        x = block[:, r]
        S += np.outer(x, x)
    S /= n
    # outer products are symmetric entrywise but summation order is not;
    # mirror the upper triangle so symmetry is exact
    iu = np.triu_indices_from(S, k=1)
    S[(iu[1], iu[0])] = S[iu]
    return S


def covariance_pair(X: ExpressionMatrix, scale: bool = False) -> CovariancePair:
    if scale:
        X = center_by_condition(X, scale=True)
    return CovariancePair(
        (empirical_covariance(X, 1), empirical_covariance(X, 2)), (X.n1, X.n2)
    )


# ---------------------------------------------------------------------------
# synthetic ground truth


def synth_network(
    p: int,
    Q: int,
    within_density: float,
    between_density: float,
    seed: int,
    *,
    overlap: float = 0.2,
    magnitude: tuple[float, float] = (0.2, 0.4),
    jitter: float = 0.3,
    eig_floor: float = 0.1,
) -> GroundTruthModel:
    """Random modular pair of concentration matrices.

    Genes are dealt to ``Q`` clusters and, with probability ``overlap``, join
    a second one. Pairs sharing a cluster get an edge with probability
    ``within_density``, other pairs with ``between_density``. Edge signs are
    shared by both conditions; condition 2 magnitudes are rescaled by a
    factor in ``[1 - jitter, 1 + jitter]``. Each matrix starts from the
    identity diagonal and is shifted until its smallest eigenvalue reaches
    ``eig_floor``.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    if not 1 <= Q <= p:
        raise ValueError("need 1 <= Q <= p")
    for d in (within_density, between_density):
        if not 0.0 <= d <= 1.0:
            raise ValueError("densities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    primary = rng.permutation(np.arange(p) % Q)
    Z = np.zeros((p, Q), dtype=int)
    Z[np.arange(p), primary] = 1
    if Q > 1:
        extra = rng.random(p) < overlap
        second = (primary + rng.integers(1, Q, size=p)) % Q
        Z[np.flatnonzero(extra), second[extra]] = 1
    same = (Z @ Z.T) > 0

    iu = np.triu_indices(p, k=1)
    dens = np.where(same[iu], within_density, between_density)
    edges = rng.random(len(dens)) < dens
    signs = rng.choice([-1.0, 1.0], size=len(dens))
    mags = rng.uniform(*magnitude, size=len(dens))
    ratio = rng.uniform(1.0 - jitter, 1.0 + jitter, size=len(dens))

    Ks = []
    for scale in (np.ones(len(dens)), ratio):
        A = np.zeros((p, p))
        A[iu] = np.where(edges, signs * mags * scale, 0.0)
        A = A + A.T
        K = A + np.eye(p)
        lo = np.linalg.eigvalsh(K)[0]
        if lo < eig_floor:
            K = K + (eig_floor - lo + 1e-12) * np.eye(p)
        K = (K + K.T) / 2.0
        Ks.append(K)
    return GroundTruthModel(Z, tuple(Ks))


def sample_expression(
    model: GroundTruthModel,
    n1: int,
    n2: int,
    seed: int,
    mean_shift=None,
) -> ExpressionMatrix:
    """Draw ``N(mu_c, inv(K_c))`` replicates; condition 2 mean is ``mean_shift``."""
    if n1 < 2 or n2 < 2:
        raise TooFewReplicates("need at least 2 replicates per condition")
    rng = np.random.default_rng(seed)
    blocks = []
    for c, n in zip(CONDITIONS, (n1, n2)):
        K = model.K[c - 1]
        try:
            np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(f"K for condition {c} is not positive definite") from None
        sigma = np.linalg.inv(K)
        sigma = (sigma + sigma.T) / 2.0
        L = np.linalg.cholesky(sigma)
        block = L @ rng.standard_normal((model.p, n))
        if c == 2 and mean_shift is not None:
            block = block + np.asarray(mean_shift, dtype=float)[:, None]
        blocks.append(block)
    values = np.hstack(blocks)
    conditions = np.array([1] * n1 + [2] * n2)
    samples = tuple(f"s{k + 1}" for k in range(n1 + n2))
    return ExpressionMatrix(model.gene_ids, values, conditions, samples)


def support_f1(true_support: Sequence[np.ndarray], estimated: Sequence[np.ndarray]) -> float:
    """F1 of upper-triangle edge recovery pooled over conditions."""
    tp = fp = fn = 0
    for t, e in zip(true_support, estimated):
        iu = np.triu_indices_from(t, k=1)
        t, e = np.asarray(t)[iu].astype(bool), np.asarray(e)[iu].astype(bool)
        tp += int((t & e).sum())
        fp += int((~t & e).sum())
        fn += int((t & ~e).sum())
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)
