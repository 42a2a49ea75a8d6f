"""Genus-labelled stable trees with half-edges, contractions and canonical forms.

A tree is stored in the half-edge model: every edge is a pair of half-edges
and every half-edge sits at one vertex.  An oriented edge is identified with
the half-edge at its source, so ``q_e`` (the preimage of the node on the
source component) has a natural home.
"""

from __future__ import annotations

import itertools
import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import networkx as nx

__all__ = [
    "Contraction",
    "OrientedEdge",
    "StableTree",
    "ValidationReport",
    "canonical_form",
    "canonical_relabel",
    "canonical_relabel_map",
    "contract",
    "enumerate_stable_trees",
    "iter_isomorphisms",
    "validate",
]


class OrientedEdge(NamedTuple):
    """An edge together with a direction; ``-e`` reverses it."""

    edge: str
    reverse: bool = False

    def __neg__(self) -> OrientedEdge:
        return OrientedEdge(self.edge, not self.reverse)

    def __str__(self) -> str:
        return ("-" if self.reverse else "") + self.edge

    @classmethod
    def parse(cls, text: str) -> OrientedEdge:
        if text.startswith("-"):
            return cls(text[1:], True)
        return cls(text, False)


@dataclass(frozen=True)
class StableTree:
    """A genus-labelled graph in the half-edge model.

    ``vertices`` holds ``(id, genus)`` pairs, ``half_edges`` holds
    ``(half-edge id, vertex id)`` pairs and ``edges`` holds
    ``(edge id, half-edge id, half-edge id)`` triples.  The forward
    orientation of an edge starts at its first half-edge.

    Construction does not check stability or acyclicity; use :func:`validate`.
    """

    vertices: tuple[tuple[str, int], ...]
    half_edges: tuple[tuple[str, str], ...]
    edges: tuple[tuple[str, str, str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(sorted((str(v), int(g)) for v, g in self.vertices)))
        object.__setattr__(self, "half_edges", tuple(sorted((str(h), str(v)) for h, v in self.half_edges)))
        object.__setattr__(self, "edges", tuple(sorted((str(e), str(a), str(b)) for e, a, b in self.edges)))

    @classmethod
    def from_edges(
        cls,
        genera: Mapping[str, int],
        edges: Sequence[tuple[str, str]],
        edge_ids: Sequence[str] | None = None,
    ) -> StableTree:
        """Build a tree from vertex genera and a list of vertex pairs.

        Half-edge ids are ``"i:0"`` and ``"i:1"`` for the ``i``-th edge.
        """
        if edge_ids is None:
            edge_ids = [f"e{i}" for i in range(len(edges))]
        if len(edge_ids) != len(edges):
            raise ValueError("edge_ids and edges differ in length")
        half_edges = []
        triples = []
        for i, ((a, b), eid) in enumerate(zip(edges, edge_ids)):
            half_edges.append((f"{i}:0", a))
            half_edges.append((f"{i}:1", b))
            triples.append((eid, f"{i}:0", f"{i}:1"))
        return cls(tuple(genera.items()), tuple(half_edges), tuple(triples))

    # -- derived data -------------------------------------------------------

    @cached_property
    def genus_of(self) -> dict[str, int]:
        return dict(self.vertices)

    @cached_property
    def vertex_of_half_edge(self) -> dict[str, str]:
        return dict(self.half_edges)

    @cached_property
    def edge_halves(self) -> dict[str, tuple[str, str]]:
        return {e: (a, b) for e, a, b in self.edges}

    @property
    def vertex_ids(self) -> list[str]:
        return [v for v, _ in self.vertices]

    @property
    def edge_ids(self) -> list[str]:
        return [e for e, _, _ in self.edges]

    @property
    def genus(self) -> int:
        return sum(g for _, g in self.vertices)

    def ends(self, edge: str) -> tuple[str, str]:
        a, b = self.edge_halves[edge]
        return self.vertex_of_half_edge[a], self.vertex_of_half_edge[b]

    def valence(self, vertex: str) -> int:
        return self._valence[vertex]

    @cached_property
    def _valence(self) -> dict[str, int]:
        n = {v: 0 for v in self.genus_of}
        for h, v in self.half_edges:
            if v in n:
                n[v] += 1
        return n

    def source(self, oe: OrientedEdge) -> str:
        a, b = self.ends(oe.edge)
        return b if oe.reverse else a

    def target(self, oe: OrientedEdge) -> str:
        return self.source(-oe)

    def half_edge(self, oe: OrientedEdge) -> str:
        """The half-edge at the source of ``oe``."""
        a, b = self.edge_halves[oe.edge]
        return b if oe.reverse else a

    @cached_property
    def _out_edges(self) -> dict[str, tuple[OrientedEdge, ...]]:
        out: dict[str, list[OrientedEdge]] = {v: [] for v in self.genus_of}
        for e, _, _ in self.edges:
            a, b = self.ends(e)
            out[a].append(OrientedEdge(e, False))
            out[b].append(OrientedEdge(e, True))
        return {v: tuple(sorted(es)) for v, es in out.items()}

    def out_edges(self, vertex: str) -> tuple[OrientedEdge, ...]:
        """Oriented edges with source ``vertex`` (the set ``E_v``)."""
        return self._out_edges[vertex]

    def neighbors(self, vertex: str) -> list[str]:
        return [self.target(oe) for oe in self.out_edges(vertex)]

    def geodesic(self, u: str, v: str) -> list[OrientedEdge]:
        """Oriented edges of the unique shortest path from ``u`` to ``v``."""
        parent: dict[str, OrientedEdge | None] = {u: None}
        queue = deque([u])
        while queue:
            x = queue.popleft()
            if x == v:
                break
            for oe in self.out_edges(x):
                y = self.target(oe)
                if y not in parent:
                    parent[y] = oe
                    queue.append(y)
        if v not in parent:
            raise ValueError(f"no path from {u!r} to {v!r}")
        path = []
        x = v
        while parent[x] is not None:
            oe = parent[x]
            path.append(oe)
            x = self.source(oe)
        return path[::-1]

    def distance(self, u: str, v: str) -> int:
        return len(self.geodesic(u, v))

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        for v, g in self.vertices:
            graph.add_node(v, genus=g)
        for e, _, _ in self.edges:
            a, b = self.ends(e)
            graph.add_edge(a, b, id=e)
        return graph

    def relabel(self, vertex_map: Mapping[str, str], edge_map: Mapping[str, str] | None = None) -> StableTree:
        edge_map = edge_map or {}
        return StableTree(
            tuple((vertex_map.get(v, v), g) for v, g in self.vertices),
            tuple((h, vertex_map.get(v, v)) for h, v in self.half_edges),
            tuple((edge_map.get(e, e), a, b) for e, a, b in self.edges),
        )


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.valid


def validate(tree: StableTree) -> ValidationReport:
    """Report every violated structural or stability invariant of ``tree``."""
    problems: list[str] = []
    ids = [v for v, _ in tree.vertices]
    if len(set(ids)) != len(ids):
        problems.append("duplicate vertex ids")
    if not ids:
        problems.append("tree has no vertices")
    for v, g in tree.vertices:
        if g < 0:
            problems.append(f"vertex {v}: negative genus {g}")
    hids = [h for h, _ in tree.half_edges]
    if len(set(hids)) != len(hids):
        problems.append("duplicate half-edge ids")
    for h, v in tree.half_edges:
        if v not in tree.genus_of:
            problems.append(f"half-edge {h}: unknown vertex {v}")
    eids = [e for e, _, _ in tree.edges]
    if len(set(eids)) != len(eids):
        problems.append("duplicate edge ids")
    used: dict[str, int] = defaultdict(int)
    for e, a, b in tree.edges:
        for h in (a, b):
            used[h] += 1
            if h not in tree.vertex_of_half_edge:
                problems.append(f"edge {e}: unknown half-edge {h}")
    for h, count in sorted(used.items()):
        if count > 1:
            problems.append(f"half-edge {h} paired {count} times")
    for h in hids:
        if h not in used:
            problems.append(f"half-edge {h} is unpaired")
    if problems:
        return ValidationReport(tuple(problems))

    seen_pairs: set[frozenset[str]] = set()
    for e, _, _ in tree.edges:
        a, b = tree.ends(e)
        if a == b:
            problems.append(f"edge {e} is a loop")
        pair = frozenset((a, b))
        if pair in seen_pairs and a != b:
            problems.append(f"edge {e} is a multi-edge")
        seen_pairs.add(pair)
    graph = nx.MultiGraph()
    graph.add_nodes_from(ids)
    graph.add_edges_from(tree.ends(e) for e in eids)
    if not nx.is_connected(graph):
        problems.append("graph is not connected")
    elif len(eids) != len(ids) - 1:
        problems.append("graph is not a tree (first Betti number > 0)")

    if len(ids) == 1:
        # a lone vertex stands for a smooth curve; genus 1 is admitted as M_{1,1}
        if tree.vertices[0][1] < 1:
            problems.append(f"vertex {ids[0]}: stability violated (genus 0 smooth curve)")
    else:
        for v, g in tree.vertices:
            n = tree.valence(v)
            if 2 * g - 2 + n <= 0:
                problems.append(f"vertex {v}: stability violated (2g-2+n = {2 * g - 2 + n})")
    return ValidationReport(tuple(problems))


# -- contraction --------------------------------------------------------------


@dataclass(frozen=True)
class Contraction:
    """A contraction ``source -> target`` with its vertex map ``f``.

    Target vertices are named by joining the sorted source ids of their fiber
    with ``+``; contracted-away edges disappear and all other ids survive.
    """

    source: StableTree
    target: StableTree
    contracted: frozenset[str]
    vertex_map: Mapping[str, str] = field(hash=False)

    def fibers(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for v, w in sorted(self.vertex_map.items()):
            out[w].append(v)
        return dict(out)


def _fiber_name(atoms: Iterable[str]) -> str:
    return "+".join(sorted(atoms))


def contract(tree: StableTree, edges: Iterable[str]) -> Contraction:
    """Contract ``edges`` of ``tree``, summing genera over each fiber."""
    edges = frozenset(edges)
    unknown = edges - set(tree.edge_ids)
    if unknown:
        raise KeyError(f"unknown edge ids: {sorted(unknown)}")
    parent = {v: v for v in tree.vertex_ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edges:
        a, b = tree.ends(e)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    classes: dict[str, list[str]] = defaultdict(list)
    for v in tree.vertex_ids:
        classes[find(v)].append(v)
    vertex_map: dict[str, str] = {}
    genera: dict[str, int] = {}
    for members in classes.values():
        if len(members) == 1:
            name = members[0]
        else:
            name = _fiber_name(atom for m in members for atom in m.split("+"))
        genera[name] = sum(tree.genus_of[m] for m in members)
        for m in members:
            vertex_map[m] = name
    target = StableTree(
        tuple(genera.items()),
        tuple(
            (h, vertex_map[v])
            for h, v in tree.half_edges
            if not any(h in (a, b) for e, a, b in tree.edges if e in edges)
        ),
        tuple(t for t in tree.edges if t[0] not in edges),
    )
    return Contraction(tree, target, edges, vertex_map)


# -- canonical forms ------------------------------------------------------------

_LABEL = re.compile(r"^[A-Za-z0-9_.:#-]*$")


def _centroids(tree: StableTree) -> list[str]:
    ids = tree.vertex_ids
    if len(ids) <= 2:
        return ids
    degree = {v: tree.valence(v) for v in ids}
    remaining = len(ids)
    layer = [v for v in ids if degree[v] <= 1]
    removed = set()
    while remaining > 2:
        remaining -= len(layer)
        nxt = []
        for v in layer:
            removed.add(v)
            for w in tree.neighbors(v):
                if w in removed:
                    continue
                degree[w] -= 1
                if degree[w] == 1:
                    nxt.append(w)
        layer = nxt
    return sorted(v for v in ids if v not in removed)


def _rooted_code(
    tree: StableTree,
    root: str,
    vlabel: Mapping[str, str],
    elabel: Mapping[str, str],
) -> str:
    def code(v: str, parent: str | None) -> str:
        children = []
        for oe in tree.out_edges(v):
            w = tree.target(oe)
            if w == parent:
                continue
            children.append(elabel.get(oe.edge, "") + ">" + code(w, v))
        children.sort()
        return "(" + vlabel[v] + ("" if not children else " " + " ".join(children)) + ")"

    return code(root, None)


def canonical_form(
    tree: StableTree,
    labels: Mapping[str, object] | None = None,
    edge_labels: Mapping[str, object] | None = None,
) -> str:
    """Isomorphism-invariant encoding of a (vertex/edge labelled) tree.

    Vertex labels default to the genus.  The tree is rooted at its centroid
    (the smaller code wins when there are two) and encoded bottom-up with
    sorted child codes.
    """
    vlabel = {v: str(labels[v]) if labels is not None else str(g) for v, g in tree.vertices}
    elabel = {e: str(lab) for e, lab in (edge_labels or {}).items()}
    for lab in itertools.chain(vlabel.values(), elabel.values()):
        if not _LABEL.match(lab):
            raise ValueError(f"label {lab!r} contains reserved characters")
    if len(tree.edges) != len(tree.vertices) - 1 or not tree.vertices:
        raise ValueError("canonical_form requires a tree")
    codes = [_rooted_code(tree, c, vlabel, elabel) for c in _centroids(tree)]
    return min(codes)


def canonical_relabel(
    tree: StableTree,
    labels: Mapping[str, object] | None = None,
    vertex_prefix: str = "v",
    edge_prefix: str = "e",
) -> StableTree:
    """Rename vertices ``v0, v1, ...`` and edges ``e0, e1, ...`` canonically.

    Isomorphic (labelled) trees are mapped to identical trees.
    """
    return canonical_relabel_map(tree, labels, vertex_prefix, edge_prefix)[0]


def canonical_relabel_map(
    tree: StableTree,
    labels: Mapping[str, object] | None = None,
    vertex_prefix: str = "v",
    edge_prefix: str = "e",
) -> tuple[StableTree, dict[str, str], dict[str, str]]:
    """Like :func:`canonical_relabel`, also returning the vertex and edge renamings."""
    vlabel = {v: str(labels[v]) if labels is not None else str(g) for v, g in tree.vertices}
    root = min(_centroids(tree), key=lambda c: _rooted_code(tree, c, vlabel, {}))
    order: list[str] = []
    edge_order: list[str] = []

    def visit(v: str, parent: str | None) -> None:
        order.append(v)
        children = []
        for oe in tree.out_edges(v):
            w = tree.target(oe)
            if w != parent:
                children.append((_rooted_code_from(tree, w, v, vlabel), w, oe.edge))
        for _, w, e in sorted(children):
            edge_order.append(e)
            visit(w, v)

    visit(root, None)
    vmap = {v: f"{vertex_prefix}{i}" for i, v in enumerate(order)}
    emap = {e: f"{edge_prefix}{i}" for i, e in enumerate(edge_order)}
    position = {v: i for i, v in enumerate(order)}
    half_edges = []
    triples = []
    for i, e in enumerate(edge_order):
        a, b = tree.ends(e)
        if position[a] > position[b]:
            a, b = b, a
        half_edges += [(f"{i}:0", vmap[a]), (f"{i}:1", vmap[b])]
        triples.append((emap[e], f"{i}:0", f"{i}:1"))
    relabeled = StableTree(
        tuple((vmap[v], tree.genus_of[v]) for v in order),
        tuple(half_edges),
        tuple(triples),
    )
    return relabeled, vmap, emap


def _rooted_code_from(tree: StableTree, v: str, parent: str | None, vlabel: Mapping[str, str]) -> str:
    children = []
    for oe in tree.out_edges(v):
        w = tree.target(oe)
        if w != parent:
            children.append(">" + _rooted_code_from(tree, w, v, vlabel))
    children.sort()
    return "(" + vlabel[v] + ("" if not children else " " + " ".join(children)) + ")"


def iter_isomorphisms(
    a: StableTree,
    b: StableTree,
    labels_a: Mapping[str, object] | None = None,
    labels_b: Mapping[str, object] | None = None,
) -> Iterator[dict[str, str]]:
    """Yield every label-preserving vertex bijection ``V(a) -> V(b)``."""
    ga, gb = a.to_networkx(), b.to_networkx()
    for g, tree, labels in ((ga, a, labels_a), (gb, b, labels_b)):
        for v, genus in tree.vertices:
            g.nodes[v]["label"] = labels[v] if labels is not None else genus
    matcher = nx.algorithms.isomorphism.GraphMatcher(
        ga, gb, node_match=lambda x, y: x["label"] == y["label"]
    )
    yield from matcher.isomorphisms_iter()


# -- enumeration ----------------------------------------------------------------


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _shapes(n: int) -> Iterator[nx.Graph]:
    if n == 1:
        g = nx.Graph()
        g.add_node(0)
        yield g
        return
    yield from nx.nonisomorphic_trees(n)


def enumerate_stable_trees(g: int, max_vertices: int | None = None) -> list[StableTree]:
    """All stable trees of total genus ``g`` up to isomorphism.

    Leaves carry positive genus and genus-0 vertices have valence at least 3,
    so a tree with ``p`` positive-genus vertices has at most ``p - 2`` genus-0
    vertices and at most ``2g - 2`` vertices overall.
    """
    if g < 1:
        raise ValueError("genus must be at least 1")
    bound = max(1, 2 * g - 2)
    if max_vertices is not None:
        bound = min(bound, max_vertices)
    found: dict[str, StableTree] = {}
    for n in range(1, bound + 1):
        for shape in _shapes(n):
            nodes = sorted(shape.nodes)
            branch = [v for v in nodes if shape.degree(v) >= 3]
            for z in range(0, len(branch) + 1):
                p = n - z
                if p < 1 or p > g:
                    continue
                for zeros in itertools.combinations(branch, z):
                    positive = [v for v in nodes if v not in zeros]
                    for genera in _compositions(g, p):
                        assignment = dict(zip(positive, genera))
                        assignment.update({v: 0 for v in zeros})
                        tree = StableTree.from_edges(
                            {f"v{v}": assignment[v] for v in nodes},
                            [(f"v{a}", f"v{b}") for a, b in sorted(shape.edges)],
                        )
                        if not validate(tree):
                            continue
                        key = canonical_form(tree)
                        if key not in found:
                            found[key] = canonical_relabel(tree)
    return [found[k] for k in sorted(found)]
