"""Coloured strata ``(T, sigma)`` of the fiber product and their specializations.

A stratum is a stable tree together with a colouring of its positive-genus
vertices by the factors ``1..k`` of a part tuple ``(g_1, ..., g_k)``.  It is
accepted as a stratum index when every edge lies on a critical path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import networkx as nx

from .graph_core import (
    StableTree,
    canonical_form,
    canonical_relabel_map,
    contract,
    enumerate_stable_trees,
    iter_isomorphisms,
)

__all__ = [
    "ColoredStratum",
    "CriticalPath",
    "GenericStructure",
    "InvalidColoring",
    "MixedFiberError",
    "SStructure",
    "Specialization",
    "StrataPoset",
    "StratumValidity",
    "compose",
    "contract_stratum",
    "critical_paths",
    "enumerate_strata",
    "fiber_product_decomposition",
    "generic_structure",
    "irreducible_components",
    "is_valid_stratum",
    "relabel_stratum",
    "specializations_between",
    "strata_poset",
    "strata_y",
]


class InvalidColoring(ValueError):
    pass


class MixedFiberError(ValueError):
    """A contraction would merge positive-genus vertices of different colours."""


@dataclass(frozen=True)
class ColoredStratum:
    """A stable tree with a colouring of ``V(T)_{>0}`` into ``parts``."""

    tree: StableTree
    coloring: tuple[tuple[str, int], ...]
    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        coloring = self.coloring
        if isinstance(coloring, Mapping):
            coloring = coloring.items()
        object.__setattr__(self, "coloring", tuple(sorted((str(v), int(c)) for v, c in coloring)))
        object.__setattr__(self, "parts", tuple(int(p) for p in self.parts))

    @classmethod
    def make(cls, tree: StableTree, coloring: Mapping[str, int], parts: Sequence[int]) -> ColoredStratum:
        """Build and check a stratum; raises :class:`InvalidColoring`."""
        out = cls(tree, tuple(coloring.items()), tuple(parts))
        out.check()
        return out

    @cached_property
    def color(self) -> dict[str, int]:
        return dict(self.coloring)

    @property
    def k(self) -> int:
        return len(self.parts)

    @property
    def g(self) -> int:
        return self.tree.genus

    def color_of(self, v: str) -> int:
        """Colour of ``v``, with 0 for genus-0 vertices."""
        return self.color.get(v, 0)

    def labels(self) -> dict[str, str]:
        return {v: f"g{g}c{self.color_of(v)}" for v, g in self.tree.vertices}

    def check(self) -> None:
        """Raise :class:`InvalidColoring` unless the colouring is admissible."""
        positive = {v for v, g in self.tree.vertices if g > 0}
        if set(self.color) != positive:
            raise InvalidColoring("colouring must be defined exactly on positive-genus vertices")
        if any(p < 1 for p in self.parts) or not self.parts:
            raise InvalidColoring("parts must be positive")
        sums = [0] * self.k
        for v, c in self.coloring:
            if not 1 <= c <= self.k:
                raise InvalidColoring(f"vertex {v}: colour {c} outside 1..{self.k}")
            sums[c - 1] += self.tree.genus_of[v]
        if tuple(sums) != self.parts:
            raise InvalidColoring(f"colour genus sums {tuple(sums)} differ from parts {self.parts}")

    @cached_property
    def canonical(self) -> str:
        return canonical_form(self.tree, self.labels())

    def canonical_unordered(self) -> str:
        """Canonical form modulo permutations of colours with equal parts."""
        best = None
        for perm in _equal_part_permutations(self.parts):
            labels = {v: f"g{g}c{perm[self.color_of(v)]}" for v, g in self.tree.vertices}
            code = canonical_form(self.tree, labels)
            if best is None or code < best:
                best = code
        return best

    def recolor(self, perm: Mapping[int, int]) -> ColoredStratum:
        return ColoredStratum(self.tree, tuple((v, perm[c]) for v, c in self.coloring), self.parts)


def _equal_part_permutations(parts: Sequence[int]) -> Iterator[dict[int, int]]:
    groups: dict[int, list[int]] = {}
    for i, p in enumerate(parts, start=1):
        groups.setdefault(p, []).append(i)
    blocks = list(groups.values())
    for choice in itertools.product(*(itertools.permutations(b) for b in blocks)):
        perm = {0: 0}
        for block, image in zip(blocks, choice):
            perm.update(zip(block, image))
        yield perm


# -- critical paths -------------------------------------------------------------


class CriticalPath(NamedTuple):
    vertices: tuple[str, ...]
    edges: tuple[str, ...]

    @property
    def ends(self) -> tuple[str, str]:
        return self.vertices[0], self.vertices[-1]


def critical_paths(stratum: ColoredStratum) -> tuple[CriticalPath, ...]:
    """All critical paths: positive-genus, differently coloured ends and
    genus-0 interior.  Each path is listed once, oriented from its smaller end.
    """
    stratum.check()
    tree = stratum.tree
    out = []
    for start, g in tree.vertices:
        if g == 0:
            continue
        stack = [(start, (start,), ())]
        while stack:
            v, verts, edges = stack.pop()
            for oe in tree.out_edges(v):
                w = tree.target(oe)
                if w in verts:
                    continue
                if tree.genus_of[w] == 0:
                    stack.append((w, verts + (w,), edges + (oe.edge,)))
                elif start < w and stratum.color_of(w) != stratum.color_of(start):
                    out.append(CriticalPath(verts + (w,), edges + (oe.edge,)))
    return tuple(sorted(out, key=lambda p: (len(p.edges), p.edges, p.vertices)))


class StratumValidity(NamedTuple):
    valid: bool
    uncovered_edge: str | None = None

    def __bool__(self) -> bool:
        return self.valid


def is_valid_stratum(stratum: ColoredStratum) -> StratumValidity:
    covered = {e for path in critical_paths(stratum) for e in path.edges}
    for e in stratum.tree.edge_ids:
        if e not in covered:
            return StratumValidity(False, e)
    return StratumValidity(True)


# -- specializations ------------------------------------------------------------


@dataclass(frozen=True)
class Specialization:
    """A colour-compatible contraction ``source -> target``.

    ``vertex_map`` is the induced map ``f`` and ``edge_map`` sends the
    surviving edges of the source onto the edges of the target.
    """

    source: ColoredStratum
    target: ColoredStratum
    contracted: frozenset[str]
    vertex_map: Mapping[str, str] = field(hash=False, compare=False)
    edge_map: Mapping[str, str] = field(hash=False, compare=False)

    @property
    def is_isomorphism(self) -> bool:
        return not self.contracted

    def check(self) -> None:
        f = self.vertex_map
        if set(f) != set(self.source.tree.vertex_ids) or set(f.values()) != set(self.target.tree.vertex_ids):
            raise ValueError("vertex map is not a surjection between the trees")
        for v in self.source.color:
            if self.source.color_of(v) != self.target.color_of(f[v]):
                raise ValueError(f"colour of {v} not preserved")


def contract_stratum(stratum: ColoredStratum, edges: Iterable[str]) -> tuple[ColoredStratum, dict[str, str]]:
    """Contract ``edges`` with the induced colouring; returns the new stratum
    and the vertex map.  Raises :class:`MixedFiberError` on mixed fibers."""
    c = contract(stratum.tree, edges)
    coloring: dict[str, int] = {}
    for v, w in c.vertex_map.items():
        col = stratum.color_of(v)
        if col == 0:
            continue
        if coloring.setdefault(w, col) != col:
            raise MixedFiberError(f"fiber {w} mixes colours")
    return ColoredStratum.make(c.target, coloring, stratum.parts), dict(c.vertex_map)


def _identity(stratum: ColoredStratum) -> Specialization:
    ids = stratum.tree.vertex_ids
    return Specialization(
        stratum, stratum, frozenset(), {v: v for v in ids}, {e: e for e in stratum.tree.edge_ids}
    )


def _colored_iso(a: ColoredStratum, b: ColoredStratum) -> dict[str, str] | None:
    if a.canonical != b.canonical:
        return None
    return next(iter_isomorphisms(a.tree, b.tree, a.labels(), b.labels()), None)


def _edge_map_from_vertices(a: StableTree, b: StableTree, vmap: Mapping[str, str]) -> dict[str, str]:
    by_ends = {frozenset(b.ends(e)): e for e in b.edge_ids}
    return {e: by_ends[frozenset(vmap[x] for x in a.ends(e))] for e in a.edge_ids}


def specialize(source: ColoredStratum, edges: Iterable[str], target: ColoredStratum) -> Specialization | None:
    """The specialization contracting ``edges`` onto ``target``, if one exists."""
    edges = frozenset(edges)
    try:
        image, f = contract_stratum(source, edges)
    except MixedFiberError:
        return None
    iso = _colored_iso(image, target)
    if iso is None:
        return None
    vertex_map = {v: iso[f[v]] for v in source.tree.vertex_ids}
    edge_map = _edge_map_from_vertices(image.tree, target.tree, iso)
    return Specialization(source, target, edges, vertex_map, edge_map)


def specializations_between(a: ColoredStratum, b: ColoredStratum) -> list[Specialization]:
    """All specializations ``a -> b``, one representative per ``Aut(b)``-orbit.

    Two specializations differing by an automorphism of ``b`` contract the same
    edge set, so representatives are indexed by contracted edge sets.
    """
    return list(_specializations(a, b))


@lru_cache(maxsize=65536)
def _specializations(a: ColoredStratum, b: ColoredStratum) -> tuple[Specialization, ...]:
    drop = len(a.tree.edges) - len(b.tree.edges)
    if drop < 0 or a.parts != b.parts:
        return ()
    out = []
    for edges in itertools.combinations(a.tree.edge_ids, drop):
        spec = specialize(a, edges, b)
        if spec is not None:
            out.append(spec)
    return tuple(out)


def compose(first: Specialization, second: Specialization) -> Specialization:
    """``second o first``; requires ``first.target == second.source``."""
    if first.target != second.source:
        raise ValueError("specializations are not composable")
    vmap = {v: second.vertex_map[w] for v, w in first.vertex_map.items()}
    emap = {e: second.edge_map[x] for e, x in first.edge_map.items() if x in second.edge_map}
    lost = {e for e, x in first.edge_map.items() if x in second.contracted}
    return Specialization(first.source, second.target, first.contracted | lost, vmap, emap)


# -- S-structures -------------------------------------------------------------------


@dataclass(frozen=True)
class SStructure:
    base: ColoredStratum
    specializations: tuple[Specialization, ...]

    def __post_init__(self) -> None:
        for spec in self.specializations:
            if spec.source != self.base:
                raise ValueError("every specialization must start at the base stratum")

    @property
    def members(self) -> tuple[ColoredStratum, ...]:
        return tuple(s.target for s in self.specializations)

    def common_contracted(self) -> frozenset[str]:
        if not self.specializations:
            raise ValueError("an S-structure needs at least one member")
        return frozenset.intersection(*(s.contracted for s in self.specializations))

    @property
    def is_generic(self) -> bool:
        return not self.common_contracted()

    def canonical(self) -> str:
        """Encoding invariant under isomorphism of S-structures.

        Each edge is labelled by the members whose specialization contracts it.
        """
        labels = {
            e: "".join("1" if e in s.contracted else "0" for s in self.specializations)
            for e in self.base.tree.edge_ids
        }
        return canonical_form(self.base.tree, self.base.labels(), labels)


class GenericStructure(NamedTuple):
    structure: SStructure
    factoring: Specialization


def generic_structure(structure: SStructure) -> GenericStructure:
    """The generic S-structure through which ``structure`` factors.

    It contracts exactly the edges contracted by every member specialization;
    the returned ``factoring`` satisfies ``phi_i' o factoring == phi_i``.
    """
    common = structure.common_contracted()
    base = structure.base
    image, f = contract_stratum(base, common)
    factoring = Specialization(
        base,
        image,
        common,
        f,
        {e: e for e in base.tree.edge_ids if e not in common},
    )
    new_specs = []
    for spec in structure.specializations:
        vmap = {f[v]: w for v, w in spec.vertex_map.items()}
        emap = {e: x for e, x in spec.edge_map.items()}
        new_specs.append(Specialization(image, spec.target, spec.contracted - common, vmap, emap))
    return GenericStructure(SStructure(image, tuple(new_specs)), factoring)


# -- enumeration -------------------------------------------------------------------


def _check_parts(g: int, parts: Sequence[int]) -> tuple[int, ...]:
    parts = tuple(int(p) for p in parts)
    if not parts or any(p < 1 for p in parts):
        raise ValueError("parts must be a nonempty tuple of positive integers")
    if sum(parts) != g:
        raise ValueError(f"parts {parts} do not sum to g={g}")
    return parts


def _colorings(tree: StableTree, parts: tuple[int, ...]) -> Iterator[dict[str, int]]:
    positive = [v for v, g in tree.vertices if g > 0]
    remaining = list(parts)

    def assign(i: int, current: dict[str, int]) -> Iterator[dict[str, int]]:
        if i == len(positive):
            if not any(remaining):
                yield dict(current)
            return
        v = positive[i]
        gv = tree.genus_of[v]
        for c in range(1, len(parts) + 1):
            if remaining[c - 1] >= gv:
                remaining[c - 1] -= gv
                current[v] = c
                yield from assign(i + 1, current)
                del current[v]
                remaining[c - 1] += gv

    yield from assign(0, {})


def enumerate_strata(g: int, parts: Sequence[int], dedup_unordered: bool = False) -> list[ColoredStratum]:
    """Valid strata ``(T, sigma)`` up to isomorphism, sorted by canonical form.

    With ``dedup_unordered`` strata differing by a permutation of colours with
    equal parts are identified.
    """
    parts = _check_parts(g, parts)
    found: dict[str, ColoredStratum] = {}
    for tree in enumerate_stable_trees(g):
        for coloring in _colorings(tree, parts):
            stratum = ColoredStratum.make(tree, coloring, parts)
            if not is_valid_stratum(stratum):
                continue
            key = stratum.canonical_unordered() if dedup_unordered else stratum.canonical
            if key not in found:
                found[key] = relabel_stratum(stratum)
    return [found[k] for k in sorted(found)]


def relabel_stratum(stratum: ColoredStratum) -> ColoredStratum:
    """Canonically renamed copy (vertices ``v0..``, edges ``e0..``)."""
    tree, vmap, _ = canonical_relabel_map(stratum.tree, stratum.labels())
    return ColoredStratum.make(tree, {vmap[v]: c for v, c in stratum.coloring}, stratum.parts)


# -- poset ------------------------------------------------------------------------


@dataclass
class StrataPoset:
    """Specialization order on the valid strata of one ``(g, parts)``.

    Nodes are indices into ``strata``.  ``graph`` holds the covering
    relations, directed from the deeper stratum to the coarser one, so its
    sinks are the irreducible components.  ``contractions[(i, j)]`` lists the
    edge sets of ``strata[i]`` whose contraction yields ``strata[j]``.
    """

    g: int
    parts: tuple[int, ...]
    strata: list[ColoredStratum]
    graph: nx.DiGraph
    up: dict[int, frozenset[int]]
    contractions: dict[tuple[int, int], list[frozenset[str]]]
    components: frozenset[int]
    in_strata_y: frozenset[int]

    def index(self, stratum: ColoredStratum) -> int:
        return self._by_canonical[stratum.canonical]

    @cached_property
    def _by_canonical(self) -> dict[str, int]:
        return {s.canonical: i for i, s in enumerate(self.strata)}

    def above(self, i: int) -> frozenset[int]:
        """Strata that ``strata[i]`` strictly specializes to."""
        return self.up[i]

    def below(self, i: int) -> frozenset[int]:
        return frozenset(j for j, ups in self.up.items() if i in ups)

    def maximal_above(self, i: int) -> frozenset[int]:
        """Irreducible components containing ``strata[i]`` (itself if maximal)."""
        return frozenset(j for j in self.up[i] | {i} if j in self.components)

    def specializes(self, i: int, j: int) -> bool:
        return i == j or j in self.up[i]

    def to_json(self) -> dict:
        from .serialize import stratum_to_json

        return {
            "g": self.g,
            "parts": list(self.parts),
            "nodes": [
                {
                    "id": f"S{i}",
                    "stratum": stratum_to_json(s),
                    "edges": len(s.tree.edges),
                    "irreducible": i in self.components,
                    "inStrataY": i in self.in_strata_y,
                }
                for i, s in enumerate(self.strata)
            ],
            "covers": sorted([f"S{a}", f"S{b}"] for a, b in self.graph.edges),
        }

    def to_dot(self) -> str:
        lines = ["digraph strata {"]
        for i, s in enumerate(self.strata):
            desc = " ".join(f"{v}:{g}/{s.color_of(v)}" for v, g in s.tree.vertices)
            shape = "doublecircle" if i in self.components else "ellipse"
            lines.append(f'  S{i} [label="S{i}\\n{desc}\\n|E|={len(s.tree.edges)}", shape={shape}];')
        for a, b in sorted(self.graph.edges):
            lines.append(f"  S{a} -> S{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _edge_subsets(edges: Sequence[str]) -> Iterator[frozenset[str]]:
    for size in range(1, len(edges) + 1):
        for combo in itertools.combinations(edges, size):
            yield frozenset(combo)


def _has_disjoint_choice(choices: list[list[frozenset[str]]], universe: frozenset[str]) -> bool:
    def search(i: int, common: frozenset[str]) -> bool:
        if not common:
            return True
        if i == len(choices):
            return False
        return any(search(i + 1, common & a) for a in choices[i])

    return search(0, universe)


def strata_poset(g: int, parts: Sequence[int], strata: list[ColoredStratum] | None = None) -> StrataPoset:
    """Build the specialization poset of valid strata.

    For each stratum every nonempty colour-compatible edge contraction landing
    on a valid stratum is recorded; the relation is transitive by construction
    and the covering graph is its transitive reduction.
    """
    parts = _check_parts(g, parts)
    if strata is None:
        strata = enumerate_strata(g, parts)
    by_canonical = {s.canonical: i for i, s in enumerate(strata)}
    contractions: dict[tuple[int, int], list[frozenset[str]]] = {}
    for i, s in enumerate(strata):
        for edges in _edge_subsets(s.tree.edge_ids):
            try:
                image, _ = contract_stratum(s, edges)
            except MixedFiberError:
                continue
            if not is_valid_stratum(image):
                continue
            j = by_canonical[image.canonical]
            contractions.setdefault((i, j), []).append(edges)
    relation = nx.DiGraph()
    relation.add_nodes_from(range(len(strata)))
    relation.add_edges_from(contractions)
    up = {i: frozenset(relation.successors(i)) for i in relation.nodes}
    components = frozenset(i for i in relation.nodes if not up[i])
    covering = nx.transitive_reduction(relation)

    in_strata_y = set()
    for i, s in enumerate(strata):
        tops = sorted(j for j in up[i] | {i} if j in components)
        choices = [[frozenset()] if j == i else contractions[(i, j)] for j in tops]
        if _has_disjoint_choice(choices, frozenset(s.tree.edge_ids)):
            in_strata_y.add(i)
    return StrataPoset(
        g, parts, list(strata), covering, up, contractions, components, frozenset(in_strata_y)
    )


def irreducible_components(g: int, parts: Sequence[int]) -> list[ColoredStratum]:
    """Strata admitting no nontrivial specialization: the maximal elements."""
    poset = strata_poset(g, parts)
    return [poset.strata[i] for i in sorted(poset.components)]


def fiber_product_decomposition(
    members: Sequence[ColoredStratum],
    candidates: Sequence[ColoredStratum] | None = None,
) -> list[SStructure]:
    """All generic S-structures for the collection ``members``, up to isomorphism.

    Bases range over the valid strata of the common ``(g, parts)``; a base of a
    generic structure over valid members is itself valid, so nothing is missed.
    """
    if not members:
        raise ValueError("need at least one member")
    g, parts = members[0].g, members[0].parts
    for m in members:
        if (m.g, m.parts) != (g, parts):
            raise ValueError("members mix different (g, parts)")
    if candidates is None:
        candidates = enumerate_strata(g, parts)
    found: dict[str, SStructure] = {}
    for base in candidates:
        options = []
        for m in members:
            specs = _specializations(base, m)
            if not specs:
                break
            options.append(specs)
        if len(options) < len(members):
            continue
        for choice in itertools.product(*options):
            structure = SStructure(base, tuple(choice))
            if structure.is_generic:
                found.setdefault(structure.canonical(), structure)
    return [found[k] for k in sorted(found)]


def strata_y(g: int, parts: Sequence[int]) -> tuple[list[ColoredStratum], list[ColoredStratum]]:
    """Split the valid strata into those in ``Strata(Y)`` and the rest.

    A valid stratum belongs to ``Strata(Y)`` when it carries a generic
    ``S_Z``-structure for some set ``Z`` of irreducible components.
    """
    poset = strata_poset(g, parts)
    inside = [s for i, s in enumerate(poset.strata) if i in poset.in_strata_y]
    outside = [s for i, s in enumerate(poset.strata) if i not in poset.in_strata_y]
    return inside, outside
