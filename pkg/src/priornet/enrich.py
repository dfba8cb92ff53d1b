"""Pathway over-representation and clustering of pathways into core pathways."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .datamodel import Signature
from .errors import DataWarning, ParseError, SchemaError


@dataclass(frozen=True)
class PathwayCatalog:
    """Named gene sets over a universe of measurable genes."""

    pathways: dict  # name -> frozenset of genes, in file order
    universe: frozenset

    def __post_init__(self):
        for name, genes in self.pathways.items():
            if not genes:
                raise ValueError(f"pathway {name!r} is empty")
            extra = set(genes) - self.universe
            if extra:
                raise ValueError(f"pathway {name!r} has genes outside the universe: {sorted(extra)[:5]}")

    @property
    def M(self) -> int:
        return len(self.universe)


@dataclass(frozen=True)
class EnrichmentResult:
    pathway: str
    K: int
    y: int
    n: int
    M: int
    p_value: float


def build_catalog(pathways: Mapping[str, Sequence[str]], universe=None) -> PathwayCatalog:
    """Catalog from raw gene sets; pathway genes outside ``universe`` are dropped.

    Without an explicit universe the union of all pathway genes is used.
    Pathways left empty after restriction are discarded with a warning.
    """
    if universe is None:
        universe = set().union(*map(set, pathways.values())) if pathways else set()
    universe = frozenset(universe)
    kept = {}
    dropped_genes = 0
    for name, genes in pathways.items():
        gs = frozenset(genes)
        inside = gs & universe
        dropped_genes += len(gs) - len(inside)
        if inside:
            kept[name] = inside
        else:
            warnings.warn(f"pathway {name!r} has no gene in the universe; skipped", DataWarning)
    if dropped_genes:
        warnings.warn(f"dropped {dropped_genes} pathway genes absent from the universe", DataWarning)
    return PathwayCatalog(kept, universe)


def read_gmt(path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise ParseError(f"{path}: line {lineno} needs name, description and genes")
        name = parts[0].strip()
        if name in out:
            raise ParseError(f"{path}: duplicate pathway name {name!r}")
        out[name] = [g.strip() for g in parts[2:] if g.strip()]
    return out


def read_universe(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def load_catalog(gmt_path, universe_path=None, universe=None) -> PathwayCatalog:
    if universe_path is not None:
        universe = read_universe(universe_path)
    return build_catalog(read_gmt(gmt_path), universe)


# ---------------------------------------------------------------------------
# hypergeometric test


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _check_hyper(M, K, n):
    if min(M, K, n) < 0:
        raise ValueError("hypergeometric arguments must be nonnegative")
    if K > M or n > M:
        raise ValueError("need K <= M and n <= M")


def hypergeom_pmf(y: int, M: int, K: int, n: int) -> float:
    """P(Y = y): overlap of a random ``K``-subset with a fixed ``n``-subset of ``M``."""
    _check_hyper(M, K, n)
    if y < 0:
        raise ValueError("y must be nonnegative")
    if y < max(0, K + n - M) or y > min(n, K):
        return 0.0
    logp = _log_comb(n, y) + _log_comb(M - n, K - y) - _log_comb(M, K)
    return float(min(1.0, math.exp(logp)))


def hypergeom_support_pmf(M: int, K: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Support values and their probabilities in one vectorised evaluation."""
    _check_hyper(M, K, n)
    y = np.arange(max(0, K + n - M), min(n, K) + 1)
    logp = _log_comb(n, y) + _log_comb(M - n, K - y) - _log_comb(M, K)
    return y, np.minimum(1.0, np.exp(logp))


def hypergeom_upper_tail(y: int, M: int, K: int, n: int) -> float:
    """P(Y >= y), summed in log space."""
    _check_hyper(M, K, n)
    lo = max(y, 0, K + n - M)
    hi = min(n, K)
    if lo > hi:
        return 0.0
    if lo <= max(0, K + n - M):
        return 1.0
    j = np.arange(lo, hi + 1)
    logs = _log_comb(n, j) + _log_comb(M - n, K - j) - _log_comb(M, K)
    return float(min(1.0, math.exp(logsumexp(logs))))


def restrict_signature(sig: Signature, catalog: PathwayCatalog) -> list[str]:
    inside = [g for g in sig.genes if g in catalog.universe]
    if len(inside) < len(sig):
        warnings.warn(
            f"{len(sig) - len(inside)} signature genes are not in the pathway universe; dropped",
            DataWarning,
        )
    return inside


def enrichment_pvalue(name: str, sig: Signature, catalog: PathwayCatalog, _restricted=None) -> EnrichmentResult:
    genes = catalog.pathways[name]
    restricted = _restricted if _restricted is not None else restrict_signature(sig, catalog)
    if not restricted:
        raise ValueError("signature has no gene in the pathway universe")
    n = len(restricted)
    y = len(genes.intersection(restricted))
    p = hypergeom_upper_tail(y, catalog.M, len(genes), n)
    return EnrichmentResult(name, len(genes), y, n, catalog.M, p)


def enrich_all(sig: Signature, catalog: PathwayCatalog) -> list[EnrichmentResult]:
    restricted = restrict_signature(sig, catalog)
    if not restricted:
        raise ValueError("signature has no gene in the pathway universe")
    return [enrichment_pvalue(name, sig, catalog, restricted) for name in catalog.pathways]


def significant_pathways(results: Sequence[EnrichmentResult], level: float = 0.05) -> list[EnrichmentResult]:
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    keep = [r for r in results if r.p_value < level]
    return sorted(keep, key=lambda r: (r.p_value, r.pathway))


# ---------------------------------------------------------------------------
# membership, distances, Ward clustering


@dataclass(frozen=True)
class MembershipMatrix:
    genes: tuple[str, ...]
    pathways: tuple[str, ...]
    matrix: np.ndarray  # genes x pathways, 0/1


def membership_matrix(pathways: Mapping[str, Sequence[str]]) -> MembershipMatrix:
    """Binary genes x pathways matrix over genes that appear in some pathway.

    ``pathways`` maps each significant pathway to its genes, in column order.
    Rows are sorted by gene id.
    """
    if not pathways:
        raise ValueError("need at least one pathway")
    names = tuple(pathways)
    genes = tuple(sorted(set().union(*map(set, pathways.values()))))
    row = {g: i for i, g in enumerate(genes)}
    mat = np.zeros((len(genes), len(names)), dtype=int)
    for j, name in enumerate(names):
        for g in pathways[name]:
            mat[row[g], j] = 1
    return MembershipMatrix(genes, names, mat)


def jaccard_distance(a, b) -> float:
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    if a.shape != b.shape:
        raise ValueError("columns must have equal length")
    union = int((a | b).sum())
    if union == 0:
        raise ValueError("Jaccard distance undefined for two empty columns")
    return 1.0 - int((a & b).sum()) / union


def jaccard_matrix(mm: MembershipMatrix) -> np.ndarray:
    m = mm.matrix.shape[1]
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            D[i, j] = D[j, i] = jaccard_distance(mm.matrix[:, i], mm.matrix[:, j])
    return D


@dataclass(frozen=True)
class Dendrogram:
    """Merge history: row ``k`` joins clusters ``a`` and ``b`` into cluster ``n + k``."""

    n_leaves: int
    merges: np.ndarray  # (n-1) x 4: a, b, height, size

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]


def ward_cluster(D) -> Dendrogram:
    """Agglomerative clustering with Ward's criterion on squared distances.

    The Lance-Williams update is applied to ``D**2`` and heights are reported
    on the distance scale (the Ward.D2 convention). Ties between equally close
    pairs go to the pair with the smallest cluster ids.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.ndim != 2 or D.shape[1] != n or n < 2:
        raise ValueError("need a square distance matrix of size >= 2")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    d2 = {}
    for i in range(n):
        for j in range(i + 1, n):
            d2[(i, j)] = D[i, j] ** 2
    size = {i: 1 for i in range(n)}
    active = list(range(n))
    merges = []
    for k in range(n - 1):
        best = None
        for ii, a in enumerate(active):
            for b in active[ii + 1:]:
                key = (a, b) if a < b else (b, a)
                v = d2[key]
                if best is None or v < best[0] or (v == best[0] and key < best[1]):
                    best = (v, key)
        v, (a, b) = best
        new = n + k
        na, nb = size[a], size[b]
        for c in active:
            if c in (a, b):
                continue
            nc = size[c]
            dac = d2[(min(a, c), max(a, c))]
            dbc = d2[(min(b, c), max(b, c))]
            d2[(c, new)] = ((na + nc) * dac + (nb + nc) * dbc - nc * v) / (na + nb + nc)
        active = [c for c in active if c not in (a, b)] + [new]
        size[new] = na + nb
        merges.append((a, b, math.sqrt(max(v, 0.0)), na + nb))
    return Dendrogram(n, np.array(merges, dtype=float))


def cut_groups(dendro: Dendrogram, Q: int) -> list[list[int]]:
    """Leaf groups after undoing the last ``Q - 1`` merges, ordered by smallest leaf."""
    n = dendro.n_leaves
    if not 1 <= Q <= n:
        raise ValueError(f"Q must lie in [1, {n}]")
    members = {i: [i] for i in range(n)}
    for k in range(n - Q):
        a, b = int(dendro.merges[k, 0]), int(dendro.merges[k, 1])
        members[n + k] = members.pop(a) + members.pop(b)
    groups = [sorted(v) for v in members.values()]
    return sorted(groups)


def suggest_q(dendro: Dendrogram) -> int:
    """Number of groups left when cutting at the largest relative height gap."""
    h = dendro.heights
    n = dendro.n_leaves
    if n <= 2:
        return 1
    best, best_gap = 1, -1.0
    for i in range(1, len(h)):
        if h[i] <= 0:
            continue
        gap = (h[i] - h[i - 1]) / h[i]
        if gap > best_gap:
            best, best_gap = n - i, gap
    return best


@dataclass(frozen=True)
class ClusterAssignment:
    genes: tuple[str, ...]  # rows of Z, in signature order
    Z: np.ndarray  # genes x Q
    member_pathways: tuple[tuple[str, ...], ...]

    @property
    def Q(self) -> int:
        return self.Z.shape[1]

    def cluster_genes(self, q: int) -> tuple[str, ...]:
        return tuple(g for g, z in zip(self.genes, self.Z[:, q]) if z)


def cut_core_pathways(
    dendro: Dendrogram,
    Q: int,
    significant: Sequence[str],
    pathways: Mapping[str, Sequence[str]],
    sig: Signature,
) -> ClusterAssignment:
    """Gene clusters from ``Q`` groups of significant pathways.

    ``significant`` names the dendrogram leaves in order. Each cluster is the
    union of its pathways' genes intersected with the signature; signature
    genes outside every significant pathway belong to no cluster.
    """
    if len(significant) != dendro.n_leaves:
        raise ValueError("one pathway name per dendrogram leaf is required")
    groups = cut_groups(dendro, Q)
    genes = sig.genes
    row = {g: i for i, g in enumerate(genes)}
    Z = np.zeros((len(genes), len(groups)), dtype=int)
    members = []
    for q, grp in enumerate(groups):
        names = tuple(significant[i] for i in grp)
        members.append(names)
        for name in names:
            for g in pathways[name]:
                if g in row:
                    Z[row[g], q] = 1
        if not Z[:, q].any():
            raise ValueError(f"core pathway {q + 1} shares no gene with the signature")
    return ClusterAssignment(genes, Z, tuple(members))


def cluster_pathways(
    significant: Sequence[EnrichmentResult],
    catalog: PathwayCatalog,
    sig: Signature,
    Q,
) -> tuple[ClusterAssignment, Dendrogram | None]:
    """Jaccard distances, Ward clustering and the cut, from enrichment results.

    ``Q`` may be an int or ``"auto"`` for the height-gap heuristic.
    """
    names = [r.pathway for r in significant]
    if not names:
        raise ValueError("no significant pathway to cluster")
    paths = {nm: sorted(catalog.pathways[nm]) for nm in names}
    if len(names) == 1:
        if Q not in (1, "auto"):
            raise ValueError("Q must be 1 with a single significant pathway")
        dendro = Dendrogram(1, np.zeros((0, 4)))
        return cut_core_pathways(dendro, 1, names, paths, sig), None
    mm = membership_matrix(paths)
    dendro = ward_cluster(jaccard_matrix(mm))
    if Q == "auto":
        Q = suggest_q(dendro)
    return cut_core_pathways(dendro, int(Q), names, paths, sig), dendro


# ---------------------------------------------------------------------------
# TSV export

ENRICHMENT_COLUMNS = ("pathway", "K", "y", "n", "M", "p_value")
CLUSTER_COLUMNS = ("core_pathway", "member_pathways", "genes")


def format_enrichment(results: Sequence[EnrichmentResult]) -> str:
    buf = io.StringIO()
    buf.write("\t".join(ENRICHMENT_COLUMNS) + "\n")
    for r in results:
        buf.write(f"{r.pathway}\t{r.K}\t{r.y}\t{r.n}\t{r.M}\t{r.p_value:.10g}\n")
    return buf.getvalue()


def parse_enrichment(text: str) -> list[EnrichmentResult]:
    lines = [ln.rstrip("\r") for ln in text.splitlines() if ln.strip()]
    header = tuple(lines[0].split("\t")) if lines else ()
    if header != ENRICHMENT_COLUMNS:
        raise SchemaError(f"enrichment table: expected columns {ENRICHMENT_COLUMNS}, got {header}")
    out = []
    for ln in lines[1:]:
        f = ln.split("\t")
        out.append(EnrichmentResult(f[0], int(f[1]), int(f[2]), int(f[3]), int(f[4]), float(f[5])))
    return out


def format_clusters(ca: ClusterAssignment) -> str:
    buf = io.StringIO()
    buf.write("\t".join(CLUSTER_COLUMNS) + "\n")
    for q in range(ca.Q):
        buf.write(f"core{q + 1}\t{','.join(ca.member_pathways[q])}\t{','.join(ca.cluster_genes(q))}\n")
    return buf.getvalue()


def parse_clusters(text: str, genes: Sequence[str]) -> ClusterAssignment:
    """Rebuild a :class:`ClusterAssignment` whose rows follow ``genes``."""
    lines = [ln.rstrip("\r") for ln in text.splitlines() if ln.strip()]
    header = tuple(lines[0].split("\t")) if lines else ()
    if header != CLUSTER_COLUMNS:
        raise SchemaError(f"cluster table: expected columns {CLUSTER_COLUMNS}, got {header}")
    row = {g: i for i, g in enumerate(genes)}
    Z = np.zeros((len(genes), len(lines) - 1), dtype=int)
    members = []
    for q, ln in enumerate(lines[1:]):
        _, paths, gs = ln.split("\t")
        members.append(tuple(p for p in paths.split(",") if p))
        for g in gs.split(","):
            if g:
                if g not in row:
                    raise SchemaError(f"cluster gene {g!r} is not in the signature")
                Z[row[g], q] = 1
    return ClusterAssignment(tuple(genes), Z, tuple(members))
