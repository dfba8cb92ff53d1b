"""Graphviz export of a differential network."""

from __future__ import annotations

from pathlib import Path

from .ggm import InferredNetwork

BOTH = "style=dashed, color=black"
ONLY_1 = "color=green, style=solid"
ONLY_2 = "color=red, style=solid"


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_dot(net: InferredNetwork, labels: tuple[str, str] = ("1", "2")) -> str:
    """DOT text: black dashed = both conditions, green = condition 1 only, red = condition 2 only."""
    lines = ["graph network {"]
    lines.append(f"  // green: only in {labels[0]}; red: only in {labels[1]}; black dashed: both")
    lines.append("  node [shape=ellipse];")
    for g in sorted(net.genes):
        lines.append(f"  {_q(g)};")
    edges = []
    for e in net.edges:
        a, b = sorted((net.genes[e.i], net.genes[e.j]))
        if len(e.present_in) == 2:
            style = BOTH
        elif e.present_in == (1,):
            style = ONLY_1
        else:
            style = ONLY_2
        edges.append((a, b, style))
    for a, b, style in sorted(edges):
        lines.append(f"  {_q(a)} -- {_q(b)} [{style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(net: InferredNetwork, path, labels: tuple[str, str] = ("1", "2")) -> None:
    Path(path).write_text(format_dot(net, labels), encoding="utf-8")
