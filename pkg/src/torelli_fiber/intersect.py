"""Codimension of product loci and when their Torelli pullbacks vanish."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator

from .strata import ColoredStratum, Specialization

__all__ = [
    "Classification",
    "RankLedger",
    "classify",
    "closed_form",
    "codim",
    "enumerate_nonvanishing",
    "part_tuple",
    "partitions",
    "rank_ledger",
    "specialization_rank",
]

PartTuple = tuple[int, ...]


class Classification(enum.Enum):
    POSSIBLY_NONZERO = "POSSIBLY_NONZERO"
    VANISHES_TAUTOLOGICAL = "VANISHES_TAUTOLOGICAL"
    VANISHES_DIMENSION = "VANISHES_DIMENSION"


def part_tuple(parts: Iterable[int]) -> PartTuple:
    """Sort ascending; reject empty tuples and nonpositive entries."""
    out = tuple(sorted(int(p) for p in parts))
    if not out:
        raise ValueError("part tuple must be nonempty")
    if out[0] < 1:
        raise ValueError(f"parts must be positive, got {out}")
    return out


def codim(parts: Iterable[int]) -> int:
    """``sum_{i<j} g_i g_j``, computed as ``(g^2 - sum g_i^2) / 2``."""
    p = part_tuple(parts)
    g = sum(p)
    return (g * g - sum(x * x for x in p)) // 2


def classify(parts: Iterable[int]) -> Classification:
    p = part_tuple(parts)
    g, d = sum(p), codim(p)
    if d <= 2 * g - 3:
        return Classification.POSSIBLY_NONZERO
    if d <= 3 * g - 3:
        return Classification.VANISHES_TAUTOLOGICAL
    return Classification.VANISHES_DIMENSION


def partitions(g: int, min_part: int = 1) -> Iterator[PartTuple]:
    """All partitions of ``g`` as ascending tuples."""
    if g == 0:
        yield ()
        return
    for first in range(min_part, g + 1):
        for rest in partitions(g - first, first):
            yield (first,) + rest


def enumerate_nonvanishing(g: int) -> list[PartTuple]:
    """Tuples with ``k >= 2`` and ``d <= 2g - 3``.

    ``d <= 2g-3`` is ``sum g_i^2 >= g^2 - 4g + 6``.  Parts are chosen in
    descending order.  Placing ``R`` more in parts of size at most ``p`` adds
    at most ``p * R`` to the sum of squares, so a branch is cut as soon as
    ``squares + p * R < target``.
    """
    if g < 2:
        raise ValueError("g must be at least 2")
    target = g * g - 4 * g + 6
    found: list[PartTuple] = []

    def walk(prefix: list[int], remaining: int, squares: int) -> None:
        if remaining == 0:
            if len(prefix) >= 2:
                found.append(tuple(reversed(prefix)))
            return
        top = min(remaining, prefix[-1]) if prefix else remaining
        for part in range(top, 0, -1):
            if squares + part * remaining < target:
                # monotone in part, so smaller parts only do worse
                break
            prefix.append(part)
            walk(prefix, remaining - part, squares + part * part)
            prefix.pop()

    walk([], g, 0)
    return sorted(found)


def closed_form(g: int) -> list[PartTuple]:
    cands = [(1, g - 1), (1, 1, g - 2), (2, g - 2)]
    out = {c for c in cands if min(c) >= 1 and list(c) == sorted(c)}
    if g == 6:
        out.add((3, 3))
    return sorted(out)


@dataclass(frozen=True)
class RankLedger:
    """Ranks of normal bundles and the dimension count around one stratum.

    ``product_normal_rank`` is the rank of the normal bundle of the product
    locus; ``excess`` compares it with the codimension of the stratum.
    """

    g: int
    parts: PartTuple
    product_normal_rank: int
    edges: int
    stratum_dimension: int
    expected_dimension: int
    excess: int
    specialization_rank: int | None = None

    def to_json(self) -> dict:
        out = {
            "g": self.g,
            "parts": list(self.parts),
            "productNormalRank": self.product_normal_rank,
            "edges": self.edges,
            "stratumDimension": self.stratum_dimension,
            "expectedDimension": self.expected_dimension,
            "excess": self.excess,
        }
        if self.specialization_rank is not None:
            out["specializationRank"] = self.specialization_rank
        return out


def specialization_rank(spec: Specialization) -> int:
    return len(spec.source.tree.edges) - len(spec.target.tree.edges)


def rank_ledger(item: ColoredStratum | Specialization, parts: Iterable[int]) -> RankLedger:
    p = part_tuple(parts)
    g = sum(p)
    stratum = item.source if isinstance(item, Specialization) else item
    if stratum.g != g:
        raise ValueError(f"stratum has genus {stratum.g}, parts sum to {g}")
    d = codim(p)
    n_edges = len(stratum.tree.edges)
    return RankLedger(
        g=g,
        parts=p,
        product_normal_rank=d,
        edges=n_edges,
        stratum_dimension=3 * g - 3 - n_edges,
        expected_dimension=3 * g - 3 - d,
        excess=d - n_edges,
        specialization_rank=specialization_rank(item) if isinstance(item, Specialization) else None,
    )
