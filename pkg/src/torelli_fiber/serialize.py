"""JSON and DOT encodings for trees, strata and ideals.

Tree JSON::

    {"vertices": [{"id": "a", "genus": 1}, ...], "edges": [["a", "b"], ...]}

with optional ``edgeIds`` and ``halfEdgeIds`` (default ``"i:0"``/``"i:1"``).
Strata add ``"coloring": {vertexId: int}`` and ``"parts": [int]``.
"""

from __future__ import annotations

import json
from typing import Any

from .graph_core import StableTree
from .strata import ColoredStratum

__all__ = [
    "ParseError",
    "dumps",
    "stratum_from_json",
    "stratum_to_json",
    "tree_from_json",
    "tree_to_dot",
    "tree_to_json",
]


class ParseError(ValueError):
    pass


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def tree_to_json(tree: StableTree) -> dict:
    pairs, eids, hids = [], [], []
    for e, a, b in tree.edges:
        pairs.append(list(tree.ends(e)))
        eids.append(e)
        hids.append([a, b])
    return {
        "vertices": [{"id": v, "genus": g} for v, g in tree.vertices],
        "edges": pairs,
        "edgeIds": eids,
        "halfEdgeIds": hids,
    }


def tree_from_json(data: Any) -> StableTree:
    try:
        vertices = [(str(v["id"]), v["genus"]) for v in data["vertices"]]
        pairs = [(str(a), str(b)) for a, b in data.get("edges", [])]
        eids = [str(e) for e in data.get("edgeIds", [f"e{i}" for i in range(len(pairs))])]
        hids = data.get("halfEdgeIds", [[f"{i}:0", f"{i}:1"] for i in range(len(pairs))])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed tree JSON: {exc}") from exc
    if len(eids) != len(pairs) or len(hids) != len(pairs):
        raise ParseError("edgeIds/halfEdgeIds length differs from edges")
    for _, genus in vertices:
        if not isinstance(genus, int) or isinstance(genus, bool) or genus < 0:
            raise ParseError(f"genus must be a nonnegative integer, got {genus!r}")
    half_edges = []
    triples = []
    for (a, b), e, (ha, hb) in zip(pairs, eids, hids):
        half_edges += [(str(ha), a), (str(hb), b)]
        triples.append((e, str(ha), str(hb)))
    return StableTree(tuple(vertices), tuple(half_edges), tuple(triples))


def stratum_to_json(stratum: ColoredStratum) -> dict:
    out = tree_to_json(stratum.tree)
    out["coloring"] = dict(stratum.coloring)
    out["parts"] = list(stratum.parts)
    return out


def stratum_from_json(data: Any) -> ColoredStratum:
    tree = tree_from_json(data)
    try:
        coloring = {str(v): int(c) for v, c in data.get("coloring", {}).items()}
        parts = [int(p) for p in data.get("parts", [tree.genus])]
    except (AttributeError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed stratum JSON: {exc}") from exc
    if "coloring" not in data:
        # single-factor default: every positive-genus vertex gets colour 1
        coloring = {v: 1 for v, g in tree.vertices if g > 0}
    return ColoredStratum.make(tree, coloring, parts)


def tree_to_dot(tree: StableTree, name: str = "T", coloring: dict[str, int] | None = None) -> str:
    lines = [f"graph {name} {{"]
    for v, g in tree.vertices:
        label = str(g) if coloring is None else f"{g}/{coloring.get(v, 0)}"
        lines.append(f'  "{v}" [label="{label}"];')
    for e, _, _ in tree.edges:
        a, b = tree.ends(e)
        lines.append(f'  "{a}" -- "{b}" [label="{e}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
