"""Protein-protein interaction network ingestion and signature expansion."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .datamodel import PPI_ADDED, Signature
from .errors import DataWarning, ParseError, SchemaError


@dataclass(frozen=True)
class PpiNetwork:
    """Undirected scored edges keyed by the sorted gene pair."""

    edges: dict = field(default_factory=dict)
    n_duplicates: int = 0
    n_self_loops: int = 0

    def neighbors(self, gene: str):
        for (a, b), s in self.edges.items():
            if a == gene:
                yield b, s
            elif b == gene:
                yield a, s

    @property
    def nodes(self) -> set[str]:
        return {g for pair in self.edges for g in pair}

    def score(self, a: str, b: str) -> float | None:
        return self.edges.get(tuple(sorted((a, b))))


def build_ppi(rows) -> PpiNetwork:
    """Build a network from ``(a, b, score)`` rows with scores already in [0, 1]."""
    edges: dict[tuple[str, str], float] = {}
    dup = loops = 0
    for a, b, s in rows:
        if a == b:
            loops += 1
            continue
        if not 0.0 <= s <= 1.0:
            raise ParseError(f"score {s} for {a}-{b} outside [0, 1]")
        key = tuple(sorted((a, b)))
        if key in edges:
            dup += 1
            edges[key] = max(edges[key], s)
        else:
            edges[key] = s
    if loops:
        warnings.warn(f"skipped {loops} self-loop rows", DataWarning)
    if dup:
        warnings.warn(f"collapsed {dup} duplicate edges, keeping the highest score", DataWarning)
    return PpiNetwork(dict(sorted(edges.items())), dup, loops)


def load_ppi(path) -> PpiNetwork:
    """Read ``protein_a<TAB>protein_b<TAB>score``.

    Scores are either in [0, 1] or STRING-style integers 0-999; if any score
    in the file exceeds 1 all of them are divided by 1000.
    """
    raw = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            parts = line.split()
        if len(parts) < 3:
            raise ParseError(f"{path}: line {lineno} needs three columns")
        try:
            score = float(parts[2])
        except ValueError:
            if lineno == 1:
                continue  # header
            raise ParseError(f"{path}: bad score on line {lineno}") from None
        raw.append((parts[0].strip(), parts[1].strip(), score))
    if any(s < 0 for _, _, s in raw):
        raise ParseError(f"{path}: negative score")
    if any(s > 1 for _, _, s in raw):
        if any(s > 999 for _, _, s in raw):
            raise ParseError(f"{path}: scores exceed both [0, 1] and 0-999 conventions")
        raw = [(a, b, s / 1000.0) for a, b, s in raw]
    return build_ppi(raw)


def expand_signature(
    sig: Signature,
    ppi: PpiNetwork,
    threshold: float = 0.9,
    min_links: int = 1,
    max_added: int | None = None,
) -> Signature:
    """Add outside genes with at least ``min_links`` links scoring >= ``threshold``.

    Candidates are ranked by number of qualifying links, then summed score,
    then gene id when ``max_added`` caps the additions. A single round only.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if min_links < 1:
        raise ValueError("min_links must be >= 1")
    members = set(sig.genes)
    links: dict[str, list[float]] = {}
    for (a, b), s in ppi.edges.items():
        if s < threshold:
            continue
        if a in members and b not in members:
            links.setdefault(b, []).append(s)
        elif b in members and a not in members:
            links.setdefault(a, []).append(s)
    cand = [(g, len(v), sum(v)) for g, v in links.items() if len(v) >= min_links]
    cand.sort(key=lambda c: (-c[1], -c[2], c[0]))
    if max_added is not None:
        cand = cand[:max_added]
    added = sorted(g for g, _, _ in cand)
    return Signature(sig.entries + tuple((g, PPI_ADDED) for g in added))


SIGNATURE_COLUMNS = ("gene", "provenance")


def format_signature(sig: Signature) -> str:
    buf = io.StringIO()
    buf.write("\t".join(SIGNATURE_COLUMNS) + "\n")
    for g, prov in sig.entries:
        buf.write(f"{g}\t{prov}\n")
    return buf.getvalue()


def parse_signature(text: str) -> Signature:
    lines = [ln.rstrip("\r") for ln in text.splitlines() if ln.strip()]
    header = tuple(lines[0].split("\t")) if lines else ()
    if header != SIGNATURE_COLUMNS:
        raise SchemaError(f"signature: expected columns {SIGNATURE_COLUMNS}, got {header}")
    return Signature(tuple(tuple(ln.split("\t")) for ln in lines[1:]))

