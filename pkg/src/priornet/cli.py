"""Command-line entry point: ``priornet <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings

from . import pipeline
from .errors import PriornetError
from .fixture import write_fixture
from .pipeline import ConfigError, PipelineConfig

log = logging.getLogger("priornet")

_D = PipelineConfig()

# (flag, config field, type, help)
_OPTIONS = [
    ("--expression", "expression", str, "expression TSV (genes x samples)"),
    ("--labels", "labels", str, "sample labels TSV (sample, condition 1|2)"),
    ("--gmt", "gmt", str, "pathway catalog in GMT format"),
    ("--ppi", "ppi", str, "protein interaction TSV (a, b, score)"),
    ("--universe", "universe", str, "gene universe, one id per line (default: measured genes)"),
    ("--out", "out", str, "artifact directory"),
    ("--alpha", "alpha", float, "moderated-t p-value threshold"),
    ("--adjust", "adjust", str, "p-value adjustment: none or benjamini_hochberg"),
    ("--enrich-level", "enrich_level", float, "enrichment significance level"),
    ("--ppi-threshold", "ppi_threshold", float, "minimum PPI score in [0, 1]"),
    ("--min-links", "min_links", int, "qualifying links needed to add a gene"),
    ("--max-added", "max_added", int, "cap on PPI additions (default: no cap)"),
    ("--n-trees", "n_trees", int, "trees in the random forest"),
    ("--mtry", "mtry", int, "genes tried per split (default: ceil(sqrt(p)))"),
    ("--min-leaf", "min_leaf", int, "minimum samples per leaf"),
    ("--filter-rule", "filter_rule", str, "forest filter: positive or top_fraction"),
    ("--top-fraction", "top_fraction", float, "fraction kept by the top_fraction rule"),
    ("--q", "q", str, "number of core pathways, or 'auto'"),
    ("--lambda", "lam", float, "fixed penalty level (default: choose from the grid by BIC)"),
    ("--lambda-grid", "lambda_grid", str, "space- or comma-separated penalty grid"),
    ("--lambda-in", "lambda_in", float, "weight divisor for pairs sharing a core pathway"),
    ("--lambda-out", "lambda_out", float, "weight divisor for pairs across core pathways"),
    ("--max-iter", "max_iter", int, "solver iteration cap"),
    ("--seed", "seed", int, "random seed (fallback: $PRIORNET_SEED, then 0)"),
    ("--cond1-label", "cond1_label", str, "display name of condition 1"),
    ("--cond2-label", "cond2_label", str, "display name of condition 2"),
]

_STAGE_HELP = {
    "diffexpr": "moderated t-tests -> diffexpr.tsv",
    "forest": "random forest on significant genes -> importance.tsv",
    "expand": "importance filter and PPI expansion -> signature.tsv",
    "enrich": "hypergeometric pathway enrichment -> enrichment.tsv",
    "cluster": "core pathways by Jaccard/Ward clustering -> clusters.tsv",
    "infer": "joint two-condition network -> network.tsv, solver.json",
    "export": "Graphviz rendering -> network.dot",
}


def _default_text(field: str) -> str:
    v = getattr(_D, field)
    if v is None:
        return "none"
    if isinstance(v, tuple):
        v = " ".join(f"{x:g}" for x in v)
    return f"{v}"


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file (default: none)")
    for flag, field, typ, text in _OPTIONS:
        p.add_argument(
            flag,
            dest=field,
            type=typ,
            default=argparse.SUPPRESS,
            help=text if "(default" in text or "(fallback" in text else f"{text} (default: {_default_text(field)})",
        )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress (default: off)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priornet",
        description="Differential gene network inference guided by pathway priors.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    run = sub.add_parser("run", help="run every stage and write manifest.json")
    _add_pipeline_options(run)
    for stage in pipeline.STAGES:
        sp = sub.add_parser(stage, help=_STAGE_HELP[stage])
        _add_pipeline_options(sp)
    fx = sub.add_parser("fixture", help="write the bundled synthetic dataset")
    fx.add_argument("directory", help="target directory")
    fx.add_argument("--seed", type=int, default=42, help="generator seed (default: 42)")
    return parser


def _config(args: argparse.Namespace) -> PipelineConfig:
    file_values = pipeline.read_config_file(args.config) if args.config else {}
    overrides = {f: getattr(args, f) for _, f, _, _ in _OPTIONS if hasattr(args, f)}
    return pipeline.make_config(file_values, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "fixture":
        paths = write_fixture(args.directory, args.seed)
        print(paths["config"])
        return 0
    try:
        cfg = _config(args)
        if args.command == "run":
            cfg.validate()
        else:
            cfg.validate(stages=(args.command,))
    except (ConfigError, OSError, ValueError) as exc:
        print(f"priornet: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "run":
                out = pipeline.run_pipeline(cfg)
                print(out / pipeline.MANIFEST)
            else:
                rows = pipeline.run_stage(args.command, cfg)
                log.info("%s: %d rows", args.command, rows)
                print(f"{cfg.out}/{pipeline.ARTIFACTS[args.command]}")
    except ConfigError as exc:
        print(f"priornet: configuration error: {exc}", file=sys.stderr)
        return 2
    except (PriornetError, OSError) as exc:
        print(f"priornet: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
