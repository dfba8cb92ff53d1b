"""Small synthetic dataset that exercises every pipeline stage."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .datamodel import sample_expression, synth_network, write_expression

P = 40
Q = 3
N_PER_CONDITION = 30
N_UNMEASURED = 160
SHIFT = 1.5
SHIFTED_PER_CLUSTER = 8

FILES = {
    "expression": "expression.tsv",
    "labels": "labels.tsv",
    "gmt": "pathways.gmt",
    "ppi": "ppi.tsv",
    "universe": "universe.txt",
    "config": "priornet.conf",
}


def write_fixture(directory, seed: int = 42) -> dict[str, Path]:
    """Write expression, labels, pathways, PPI, universe and a config file.

    Genes ``g01..g40`` fall into three modules; eight genes per module are
    shifted in condition 2. Each module is covered by two overlapping
    pathways padded with unmeasured genes, and a few decoy pathways cover
    unmeasured genes only. PPI links with high scores attach one unshifted
    gene per module to the shifted ones.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    model = synth_network(P, Q, 0.3, 0.02, seed, overlap=0.0)
    genes = model.gene_ids
    modules = [[genes[i] for i in np.flatnonzero(model.Z[:, q])] for q in range(Q)]

    shift = np.zeros(P)
    shifted = []
    for mod in modules:
        chosen = sorted(rng.choice(mod, size=SHIFTED_PER_CLUSTER, replace=False))
        shifted.append(chosen)
        for g in chosen:
            shift[genes.index(g)] = SHIFT * rng.choice([-1.0, 1.0])
    X = sample_expression(model, N_PER_CONDITION, N_PER_CONDITION, seed + 1, mean_shift=shift)
    paths = {k: out / v for k, v in FILES.items()}
    write_expression(X, paths["expression"], paths["labels"])

    unmeasured = [f"u{k + 1:03d}" for k in range(N_UNMEASURED)]
    paths["universe"].write_text("\n".join(sorted(genes + tuple(unmeasured))) + "\n", encoding="utf-8")

    pool = list(rng.permutation(unmeasured))
    lines = []
    for q, mod in enumerate(modules):
        half = len(mod) // 2
        core_a = sorted(mod[: half + 3])
        core_b = sorted(mod[half - 3 :])
        for tag, core in (("a", core_a), ("b", core_b)):
            pad = sorted(pool.pop() for _ in range(6))
            lines.append(f"MODULE{q + 1}_{tag.upper()}\tsynthetic module {q + 1}\t" + "\t".join(core + pad))
    for d in range(4):
        decoy = sorted(pool.pop() for _ in range(12))
        lines.append(f"DECOY{d + 1}\tunrelated genes\t" + "\t".join(decoy))
    paths["gmt"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    rows = ["protein_a\tprotein_b\tscore"]
    for mod, sh in zip(modules, shifted):
        quiet = [g for g in mod if g not in sh]
        partner = quiet[0]
        for g in sh[:3]:
            rows.append(f"{g}\t{partner}\t{int(rng.integers(920, 999))}")
        rows.append(f"{sh[3]}\t{quiet[1]}\t{int(rng.integers(400, 880))}")
    for _ in range(10):
        a, b = rng.choice(unmeasured, size=2, replace=False)
        rows.append(f"{a}\t{b}\t{int(rng.integers(100, 999))}")
    paths["ppi"].write_text("\n".join(rows) + "\n", encoding="utf-8")

    conf = [
        "# synthetic fixture: 40 genes, 3 modules, 30 + 30 samples",
        f"expression = {FILES['expression']}",
        f"labels = {FILES['labels']}",
        f"gmt = {FILES['gmt']}",
        f"ppi = {FILES['ppi']}",
        f"universe = {FILES['universe']}",
        "q = 3",
        "n_trees = 300",
        f"seed = {seed}",
        "cond1_label = pCR",
        "cond2_label = not-pCR",
    ]
    paths["config"].write_text("\n".join(conf) + "\n", encoding="utf-8")
    return paths
