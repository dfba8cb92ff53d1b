"""The three-step pipeline: signature, core pathways, joint network inference.

Every stage reads its inputs from the artifact directory and writes its
outputs there, so running the stages one by one gives the same bytes as
:func:`run_pipeline`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import diffexpr, enrich, forest, ggm, ppi
from .datamodel import ExpressionMatrix, Signature, covariance_pair, load_expression
from .errors import EmptyAfterFilter, PriornetError
from .export import format_dot

log = logging.getLogger(__name__)

SEED_ENV = "PRIORNET_SEED"

ARTIFACTS = {
    "diffexpr": "diffexpr.tsv",
    "forest": "importance.tsv",
    "expand": "signature.tsv",
    "enrich": "enrichment.tsv",
    "cluster": "clusters.tsv",
    "infer": "network.tsv",
    "export": "network.dot",
}
STAGES = tuple(ARTIFACTS)
SOLVER_DIAGNOSTICS = "solver.json"
MANIFEST = "manifest.json"

DEFAULT_GRID = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


class ConfigError(PriornetError):
    pass


class StageError(PriornetError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    expression: str | None = None
    labels: str | None = None
    gmt: str | None = None
    ppi: str | None = None
    universe: str | None = None
    out: str = "priornet_out"
    alpha: float = 1e-3
    adjust: str = "none"
    enrich_level: float = 0.05
    ppi_threshold: float = 0.9
    min_links: int = 1
    max_added: int | None = None
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 1
    filter_rule: str = "positive"
    top_fraction: float | None = None
    q: str | None = None
    lam: float | None = None
    lambda_grid: tuple = DEFAULT_GRID
    lambda_in: float = 2.0
    lambda_out: float = 0.5
    scale: bool = False
    max_iter: int = 5000
    seed: int = 0
    cond1_label: str = "1"
    cond2_label: str = "2"

    def validate(self, stages=STAGES) -> "PipelineConfig":
        need = {"expression", "labels"}
        if {"enrich", "cluster"} & set(stages):
            need.add("gmt")
        for key in sorted(need):
            if getattr(self, key) is None:
                raise ConfigError(f"missing required setting {key!r}")
        for key in ("expression", "labels", "gmt", "ppi", "universe"):
            path = getattr(self, key)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{key} file not found: {path}")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.adjust not in ("none", "benjamini_hochberg"):
            raise ConfigError("adjust must be 'none' or 'benjamini_hochberg'")
        if not 0 < self.enrich_level < 1:
            raise ConfigError("enrich_level must lie in (0, 1)")
        if not 0 < self.ppi_threshold <= 1:
            raise ConfigError("ppi_threshold must lie in (0, 1]")
        if self.min_links < 1:
            raise ConfigError("min_links must be >= 1")
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ConfigError("n_trees and min_leaf must be >= 1")
        if self.filter_rule not in ("positive", "top_fraction"):
            raise ConfigError("filter_rule must be 'positive' or 'top_fraction'")
        if self.filter_rule == "top_fraction" and not (self.top_fraction and 0 < self.top_fraction <= 1):
            raise ConfigError("top_fraction must lie in (0, 1]")
        if {"cluster"} & set(stages):
            if self.q is None:
                raise ConfigError("q (number of core pathways, or 'auto') is required")
            if self.q != "auto" and (not str(self.q).isdigit() or int(self.q) < 1):
                raise ConfigError("q must be a positive integer or 'auto'")
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.lam is None and (not self.lambda_grid or min(self.lambda_grid) < 0):
            raise ConfigError("lambda grid must be nonempty and nonnegative")
        if self.lambda_in <= 0 or self.lambda_out <= 0:
            raise ConfigError("lambda_in and lambda_out must be positive")
        return self

    def forest_config(self) -> forest.ForestConfig:
        return forest.ForestConfig(self.n_trees, self.mtry, self.min_leaf, self.seed)

    def solver_config(self) -> ggm.SolverConfig:
        return ggm.SolverConfig(max_iter=self.max_iter)


# ---------------------------------------------------------------------------
# flat key=value config files

_FIELDS = {f.name: f for f in fields(PipelineConfig)}
_ALIASES = {"lambda": "lam", "Q": "q"}


def _coerce(name: str, raw):
    if raw is None:
        return None
    default = _FIELDS[name].default
    text = str(raw).strip()
    if name in ("ppi", "universe", "mtry", "max_added", "top_fraction", "lam", "q") and text.lower() in ("", "none"):
        return None
    if name == "lambda_grid":
        if isinstance(raw, (list, tuple)):
            return tuple(float(v) for v in raw)
        return tuple(float(v) for v in text.replace(",", " ").split())
    if name == "scale":
        if isinstance(raw, bool):
            return raw
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"scale: expected a boolean, got {text!r}")
    if name in ("mtry", "max_added", "min_links", "n_trees", "min_leaf", "max_iter", "seed"):
        return int(text)
    if name in ("alpha", "enrich_level", "ppi_threshold", "top_fraction", "lam", "lambda_in", "lambda_out"):
        return float(text)
    if name == "q":
        return text
    if isinstance(default, str) or default is None:
        return text
    return text


def normalize_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ConfigError(f"unknown setting {key!r}")
    return key


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Relative paths resolve against the file."""
    base = Path(path).resolve().parent
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        value = value.strip()
        if key in ("expression", "labels", "gmt", "ppi", "universe", "out") and value and value.lower() != "none":
            p = Path(value)
            value = str(p if p.is_absolute() else base / p)
        out[key] = value
    return out


def make_config(file_values: dict | None = None, overrides: dict | None = None, env=None) -> PipelineConfig:
    """Merge settings: command line over config file over ``PRIORNET_SEED`` over defaults."""
    env = os.environ if env is None else env
    values = {}
    if SEED_ENV in env and env[SEED_ENV].strip():
        values["seed"] = env[SEED_ENV]
    values.update(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kwargs = {}
    for key, raw in values.items():
        key = normalize_key(key)
        try:
            kwargs[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return PipelineConfig(**kwargs)


def format_config(cfg: PipelineConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = " ".join(repr(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# stages


def _write(out: Path, name: str, text: str) -> int:
    (out / name).write_text(text, encoding="utf-8", newline="\n")
    return max(0, len([ln for ln in text.splitlines() if ln.strip()]) - 1)


def _read(out: Path, name: str) -> str:
    path = out / name
    if not path.is_file():
        raise FileNotFoundError(f"missing artifact {name} in {out}; run the previous stage first")
    return path.read_text(encoding="utf-8")


def _expression(cfg: PipelineConfig) -> ExpressionMatrix:
    return load_expression(cfg.expression, cfg.labels)


def stage_diffexpr(cfg: PipelineConfig, out: Path) -> int:
    X = _expression(cfg)
    results = diffexpr.moderated_t(X)
    return _write(out, ARTIFACTS["diffexpr"], diffexpr.format_results(results))


def stage_forest(cfg: PipelineConfig, out: Path) -> int:
    X = _expression(cfg)
    results = diffexpr.parse_results(_read(out, ARTIFACTS["diffexpr"]))
    sig = diffexpr.select_signature(results, cfg.alpha, cfg.adjust)
    if not len(sig):
        raise EmptyAfterFilter("no gene passed the differential-expression threshold")
    sub = X.subset(sig.genes)
    f = forest.grow_forest(sub, X.conditions, cfg.forest_config())
    report = forest.importance(f, sub, X.conditions, seed=cfg.seed)
    return _write(out, ARTIFACTS["forest"], forest.format_importance(report))


def stage_expand(cfg: PipelineConfig, out: Path) -> int:
    report = forest.parse_importance(_read(out, ARTIFACTS["forest"]))
    sig = Signature.from_genes(report.gene_ids, "differential")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kept = forest.filter_by_importance(report, sig, cfg.filter_rule, cfg.top_fraction)
    if not len(kept):
        raise EmptyAfterFilter("no gene kept after random-forest filtering")
    if cfg.ppi is not None:
        net = ppi.load_ppi(cfg.ppi)
        kept = ppi.expand_signature(kept, net, cfg.ppi_threshold, cfg.min_links, cfg.max_added)
    return _write(out, ARTIFACTS["expand"], ppi.format_signature(kept))


def _catalog(cfg: PipelineConfig) -> enrich.PathwayCatalog:
    universe = None
    if cfg.universe is None:
        universe = _expression(cfg).gene_ids
    return enrich.load_catalog(cfg.gmt, cfg.universe, universe)


def stage_enrich(cfg: PipelineConfig, out: Path) -> int:
    sig = ppi.parse_signature(_read(out, ARTIFACTS["expand"]))
    results = enrich.enrich_all(sig, _catalog(cfg))
    return _write(out, ARTIFACTS["enrich"], enrich.format_enrichment(results))


def stage_cluster(cfg: PipelineConfig, out: Path) -> int:
    sig = ppi.parse_signature(_read(out, ARTIFACTS["expand"]))
    results = enrich.parse_enrichment(_read(out, ARTIFACTS["enrich"]))
    sig_paths = enrich.significant_pathways(results, cfg.enrich_level)
    if not sig_paths:
        raise EmptyAfterFilter(f"no pathway enriched at level {cfg.enrich_level}")
    q = cfg.q if cfg.q == "auto" else int(cfg.q)
    ca, _ = enrich.cluster_pathways(sig_paths, _catalog(cfg), sig, q)
    return _write(out, ARTIFACTS["cluster"], enrich.format_clusters(ca))


def stage_infer(cfg: PipelineConfig, out: Path) -> int:
    X = _expression(cfg)
    sig = ppi.parse_signature(_read(out, ARTIFACTS["expand"]))
    genes = [g for g in sig.genes if g in set(X.gene_ids)]
    if len(genes) < len(sig):
        warnings.warn(f"{len(sig) - len(genes)} signature genes are not measured and are left out of the network")
    if not genes:
        raise EmptyAfterFilter("no signature gene is measured")
    ca = enrich.parse_clusters(_read(out, ARTIFACTS["cluster"]), sig.genes)
    keep = [sig.genes.index(g) for g in genes]
    Z = ca.Z[keep]
    S = covariance_pair(X.subset(genes), scale=cfg.scale)
    for c, s in enumerate(S.S, start=1):
        flat = [g for g, v in zip(genes, np.diag(s)) if v <= 0]
        if flat:
            raise ValueError(f"gene {flat[0]!r} has zero variance in condition {c}")
    weights = ggm.penalty_weights(Z, cfg.lambda_in, cfg.lambda_out, len(genes))
    scfg = cfg.solver_config()
    table = None
    if cfg.lam is not None:
        lam = cfg.lam
        fit = ggm.solve_multitask(S, weights.with_lambda(lam), scfg)
    else:
        sel = ggm.select_lambda(S, weights, cfg.lambda_grid, scfg)
        lam = sel.best
        fit = sel.fits[[r[0] for r in sel.table].index(lam)]
        table = [dict(zip(("lambda", "bic", "log_likelihood", "n_nonzero"), r)) for r in sel.table]
    net = ggm.extract_network(fit.K, genes=genes)
    diag = fit.diagnostics()
    diag["lambda"] = lam
    diag["lambda_in"] = cfg.lambda_in
    diag["lambda_out"] = cfg.lambda_out
    if table is not None:
        diag["lambda_table"] = table
    (out / SOLVER_DIAGNOSTICS).write_text(_json(diag), encoding="utf-8", newline="\n")
    if not fit.converged:
        log.warning("solver stopped before convergence (kkt residual %.3g)", fit.kkt_residual)
    return _write(out, ARTIFACTS["infer"], ggm.format_network(net))


def stage_export(cfg: PipelineConfig, out: Path) -> int:
    text = _read(out, ARTIFACTS["infer"])
    genes = None
    sig_path = out / ARTIFACTS["expand"]
    if sig_path.is_file():
        sig = ppi.parse_signature(sig_path.read_text(encoding="utf-8"))
        measured = None
        if cfg.expression is not None and cfg.labels is not None:
            measured = set(_expression(cfg).gene_ids)
        genes = [g for g in sig.genes if measured is None or g in measured]
    net = ggm.parse_network(text, genes)
    dot = format_dot(net, (cfg.cond1_label, cfg.cond2_label))
    (out / ARTIFACTS["export"]).write_text(dot, encoding="utf-8", newline="\n")
    return len(net.edges)


STAGE_FUNCS = {
    "diffexpr": stage_diffexpr,
    "forest": stage_forest,
    "expand": stage_expand,
    "enrich": stage_enrich,
    "cluster": stage_cluster,
    "infer": stage_infer,
    "export": stage_export,
}


def run_stage(stage: str, cfg: PipelineConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return STAGE_FUNCS[stage](cfg, out)
    except ConfigError:
        raise
    except EmptyAfterFilter as exc:
        raise EmptyAfterFilter(f"stage {stage!r}: {exc}") from exc
    except Exception as exc:
        raise StageError(stage, exc) from exc


# ---------------------------------------------------------------------------
# manifest and full run


def _json(obj) -> str:
    def fix(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [fix(x) for x in v]
        if isinstance(v, np.generic):
            return v.item()
        return v

    return json.dumps(fix(obj), indent=2, sort_keys=True) + "\n"


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(cfg: PipelineConfig) -> str:
    """Hash of the settings with input paths replaced by their content hashes."""
    d = asdict(cfg)
    d.pop("out")
    for key in ("expression", "labels", "gmt", "ppi", "universe"):
        if d[key] is not None:
            d[key] = _sha256(d[key])
    return hashlib.sha256(_json(d).encode()).hexdigest()


def run_pipeline(cfg: PipelineConfig) -> Path:
    """Run all stages into ``cfg.out`` and write ``manifest.json``."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    counts = {}
    for stage in STAGES:
        log.info("running stage %s", stage)
        counts[stage] = run_stage(stage, cfg)
    inputs = {}
    for key in ("expression", "labels", "gmt", "ppi", "universe"):
        path = getattr(cfg, key)
        if path is not None:
            inputs[key] = {"file": Path(path).name, "sha256": _sha256(path)}
    manifest = {
        "inputs": inputs,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "artifacts": [{"stage": s, "file": ARTIFACTS[s], "rows": counts[s]} for s in STAGES],
        "diagnostics": SOLVER_DIAGNOSTICS,
    }
    (out / MANIFEST).write_text(_json(manifest), encoding="utf-8", newline="\n")
    return out
