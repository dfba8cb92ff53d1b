"""Random forest of Gini CART trees with out-of-bag permutation importance.

Trees are grown on bootstrap samples drawn within each condition and look for
the best split among ``mtry`` randomly chosen genes at every node. Each tree
owns a generator derived from ``(seed, tree_index)`` so results do not depend
on the order in which trees are built.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .datamodel import FOREST_RETAINED, ExpressionMatrix, Signature
from .errors import EmptyAfterFilterWarning, SchemaError

LEAF = -1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 1
    seed: int = 0

    def resolve_mtry(self, p: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, math.ceil(math.sqrt(p)))
        if not 1 <= mtry <= p:
            raise ValueError(f"mtry={mtry} must lie in [1, {p}]")
        return mtry


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray  # class predicted at leaves
    bootstrap: np.ndarray  # training indices, with repeats
    oob: np.ndarray  # sorted indices never drawn

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predict labels for the rows of ``X`` (samples x genes)."""
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return self.label[node]

    @property
    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature != LEAF])


@dataclass
class Forest:
    trees: list[Tree]
    classes: tuple[int, int]
    n_samples: int

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting for ``classes[0]``."""
        hits = np.zeros(X.shape[0])
        for t in self.trees:
            hits += t.predict(X) == self.classes[0]
        return hits / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        v = self.votes(X)
        # ties go to the first class
        return np.where(v >= 0.5, self.classes[0], self.classes[1])


@dataclass(frozen=True)
class ImportanceReport:
    gene_ids: tuple[str, ...]
    importance: np.ndarray
    oob_error: float
    oob_count: np.ndarray
    n_never_oob: int = 0
    zero_oob_genes: tuple[str, ...] = field(default=())

    def ranked(self) -> list[tuple[str, float, int]]:
        order = np.lexsort((np.arange(len(self.gene_ids)), -self.importance))
        return [
            (self.gene_ids[k], float(self.importance[k]), rank + 1)
            for rank, k in enumerate(order)
        ]


def _tree_rng(seed: int, tree_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, tree_index, stream])


def _stratified_bootstrap(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    parts = []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        parts.append(rng.choice(members, size=members.size, replace=True))
    return np.sort(np.concatenate(parts))


def _best_split(x: np.ndarray, y1: np.ndarray, min_leaf: int):
    """Best Gini threshold for one gene; returns (impurity, threshold) or None.

    ``y1`` is 1.0 where the sample belongs to the first class.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y1[order]
    n = xs.size
    left_n = np.arange(1, n)
    left_pos = np.cumsum(ys)[:-1]
    right_n = n - left_n
    right_pos = ys.sum() - left_pos
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    pl = left_pos / left_n
    pr = right_pos / right_n
    # weighted Gini, up to the constant factor 2/n
    imp = left_n * pl * (1 - pl) + right_n * pr * (1 - pr)
    imp = np.where(valid, imp, np.inf)
    k = int(np.argmin(imp))  # first minimum = lowest threshold
    return float(imp[k]), float((xs[k] + xs[k + 1]) / 2.0)


def _grow_tree(Xs: np.ndarray, y1: np.ndarray, boot: np.ndarray, mtry: int, min_leaf: int, rng, classes):
    p = Xs.shape[1]
    feature, threshold, left, right, label = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        label.append(classes[0])
        return len(feature) - 1

    root = new_node()
    stack = [(root, boot)]
    while stack:
        node, idx = stack.pop()
        frac = y1[idx].mean()
        label[node] = classes[0] if frac >= 0.5 else classes[1]
        parent_imp = idx.size * frac * (1 - frac)
        if frac in (0.0, 1.0) or idx.size <= min_leaf:
            continue
        cand = np.sort(rng.choice(p, size=mtry, replace=False))
        best = None
        for g in cand:  # ascending gene index, strict improvement => lowest index wins ties
            res = _best_split(Xs[idx, g], y1[idx], min_leaf)
            if res is not None and (best is None or res[0] < best[0]):
                best = (res[0], int(g), res[1])
        if best is None or best[0] >= parent_imp:
            continue
        _, g, thr = best
        mask = Xs[idx, g] <= thr
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node] = g, thr
        left[node], right[node] = lnode, rnode
        stack.append((rnode, idx[~mask]))
        stack.append((lnode, idx[mask]))
    oob = np.setdiff1d(np.arange(Xs.shape[0]), boot)
    return Tree(
        np.array(feature), np.array(threshold), np.array(left), np.array(right),
        np.array(label), boot, oob,
    )


def _as_samples(X) -> np.ndarray:
    if isinstance(X, ExpressionMatrix):
        return np.asarray(X.values, dtype=float).T
    return np.asarray(X, dtype=float)


def grow_forest(X, labels, cfg: ForestConfig = ForestConfig()) -> Forest:
    """Grow ``cfg.n_trees`` classification trees.

    ``X`` is an :class:`ExpressionMatrix` restricted to the signature or a
    samples x genes array; ``labels`` holds one condition per sample.
    """
    Xs = _as_samples(X)
    y = np.asarray(labels)
    if Xs.shape[1] == 0:
        raise ValueError("signature is empty")
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) != 2:
        raise ValueError("exactly two conditions are required")
    for c in classes:
        if (y == c).sum() < 2:
            raise ValueError(f"condition {c} needs >= 2 samples")
    if cfg.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    mtry = cfg.resolve_mtry(Xs.shape[1])
    y1 = (y == classes[0]).astype(float)
    trees = []
    for t in range(cfg.n_trees):
        rng = _tree_rng(cfg.seed, t, 0)
        boot = _stratified_bootstrap(y, rng)
        trees.append(_grow_tree(Xs, y1, boot, mtry, cfg.min_leaf, rng, classes))
    return Forest(trees, classes, Xs.shape[0])


def oob_error(forest: Forest, X, labels) -> tuple[float, int]:
    """Majority-vote OOB misclassification rate and the count of never-OOB samples."""
    Xs = _as_samples(X)
    y = np.asarray(labels)
    hits = np.zeros(Xs.shape[0])
    seen = np.zeros(Xs.shape[0])
    for t in forest.trees:
        if t.oob.size == 0:
            continue
        pred = t.predict(Xs[t.oob])
        hits[t.oob] += pred == forest.classes[0]
        seen[t.oob] += 1
    ok = seen > 0
    never = int((~ok).sum())
    if not ok.any():
        return math.nan, never
    frac = hits[ok] / seen[ok]
    pred = np.where(frac >= 0.5, forest.classes[0], forest.classes[1])
    return float((pred != y[ok]).mean()), never


def importance(forest: Forest, X, labels, gene_ids=None, seed: int | None = None) -> ImportanceReport:
    """Mean decrease in OOB accuracy when a gene's OOB values are permuted."""
    Xs = _as_samples(X)
    y = np.asarray(labels)
    p = Xs.shape[1]
    if gene_ids is None:
        gene_ids = X.gene_ids if isinstance(X, ExpressionMatrix) else tuple(f"v{k}" for k in range(p))
    seed = 0 if seed is None else seed
    total = np.zeros(p)
    count = np.zeros(p, dtype=int)
    for t_idx, tree in enumerate(forest.trees):
        oob = tree.oob
        if oob.size == 0:
            continue
        count += 1
        Xo = Xs[oob]
        base = (tree.predict(Xo) == y[oob]).mean()
        rng = _tree_rng(seed, t_idx, 1)
        for g in tree.used_features:
            perm = Xo.copy()
            perm[:, g] = Xo[rng.permutation(oob.size), g]
            total[g] += base - (tree.predict(perm) == y[oob]).mean()
    imp = np.divide(total, count, out=np.zeros(p), where=count > 0)
    zero = tuple(gene_ids[k] for k in np.flatnonzero(count == 0))
    if zero:
        warnings.warn(f"{len(zero)} genes had no out-of-bag samples; importance set to 0", RuntimeWarning)
    err, never = oob_error(forest, Xs, y)
    if never:
        warnings.warn(f"{never} samples were never out-of-bag and are excluded from the OOB error", RuntimeWarning)
    return ImportanceReport(tuple(gene_ids), imp, err, count, never, zero)


def filter_by_importance(report: ImportanceReport, signature: Signature, rule: str = "positive", fraction: float | None = None) -> Signature:
    """Keep informative genes; ``rule`` is ``"positive"`` or ``"top_fraction"``."""
    imp = dict(zip(report.gene_ids, report.importance))
    missing = [g for g in signature.genes if g not in imp]
    if missing:
        raise ValueError(f"importance report does not cover {missing[:5]}")
    if rule == "positive":
        keep = {g for g in signature.genes if imp[g] > 0}
    elif rule == "top_fraction":
        if fraction is None or not 0 < fraction <= 1:
            raise ValueError("top_fraction needs a fraction in (0, 1]")
        k = math.ceil(fraction * len(signature))
        order = sorted(signature.genes, key=lambda g: (-imp[g], signature.genes.index(g)))
        keep = set(order[:k])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    out = Signature.from_genes((g for g in signature.genes if g in keep), FOREST_RETAINED)
    if not len(out):
        warnings.warn("no gene survived importance filtering", EmptyAfterFilterWarning)
    return out


IMPORTANCE_COLUMNS = ("gene", "importance", "rank")


def format_importance(report: ImportanceReport) -> str:
    buf = io.StringIO()
    buf.write("\t".join(IMPORTANCE_COLUMNS) + "\n")
    rank = {g: r for g, _, r in report.ranked()}
    for g, v in zip(report.gene_ids, report.importance):
        buf.write(f"{g}\t{v:.10g}\t{rank[g]}\n")
    return buf.getvalue()


def parse_importance(text: str) -> ImportanceReport:
    """Read an importance table back; OOB statistics are not stored and come back empty."""
    lines = [ln.rstrip("\r") for ln in text.splitlines() if ln.strip()]
    header = tuple(lines[0].split("\t")) if lines else ()
    if header != IMPORTANCE_COLUMNS:
        raise SchemaError(f"importance table: expected columns {IMPORTANCE_COLUMNS}, got {header}")
    genes, values = [], []
    for ln in lines[1:]:
        g, v, _ = ln.split("\t")
        genes.append(g)
        values.append(float(v))
    return ImportanceReport(tuple(genes), np.array(values), math.nan, np.zeros(len(genes), dtype=int))
