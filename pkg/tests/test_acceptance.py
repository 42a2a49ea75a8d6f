"""Acceptance suite: one test per criterion, each recording a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
"acceptance criteria" section of the terminal summary.
"""

import itertools
import random
import time
from fractions import Fraction

import networkx as nx

from oracles import graph_of, member, minimal_covers
from torelli_fiber.coefficients import Coeff, basis_b, period_B, xi
from torelli_fiber.graph_core import StableTree, canonical_form
from torelli_fiber.ideal import (
    components_through_point,
    in_prime_intersection,
    local_ring,
    minimal_primes,
    monomial_membership,
)
from torelli_fiber.intersect import (
    Classification,
    classify,
    codim,
    enumerate_nonvanishing,
    partitions,
)
from torelli_fiber.plumbing_series import (
    PlumbingEngine,
    SeriesRing,
    default_positions,
    period_block,
    verify_refinement,
)
from torelli_fiber.strata import (
    ColoredStratum,
    MixedFiberError,
    SStructure,
    compose,
    contract_stratum,
    enumerate_strata,
    fiber_product_decomposition,
    generic_structure,
    specialize,
    strata_poset,
)


def all_strata(g_max):
    for g in range(2, g_max + 1):
        for parts in partitions(g):
            yield from enumerate_strata(g, parts)


def refinement_cases():
    """Distinct trees of valid strata with at most five edges, with every
    ordered pair of positive-genus vertices joined through genus 0 only."""
    trees = {}
    for s in all_strata(5):
        if len(s.tree.edges) <= 5:
            trees.setdefault(canonical_form(s.tree), s.tree)
    for key in sorted(trees):
        t = trees[key]
        pos = [v for v in t.vertex_ids if t.genus_of[v] > 0]
        for v, vp in itertools.permutations(pos, 2):
            path = t.geodesic(v, vp)
            interior = [t.target(oe) for oe in path[:-1]]
            if all(t.genus_of[x] == 0 for x in interior):
                yield t, v, vp, len(path)


# -- 1 ---------------------------------------------------------------------------


def test_criterion_1_nonvanishing_tuples(acceptance):
    start = time.perf_counter()
    bad = []
    for g in range(2, 61):
        expected = {(1, g - 1), (1, 1, g - 2), (2, g - 2)}
        expected = {tuple(sorted(t)) for t in expected if min(t) >= 1}
        if g == 6:
            expected.add((3, 3))
        got = enumerate_nonvanishing(g)
        if sorted(expected) != got:
            bad.append((g, got, sorted(expected)))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 1.0
    acceptance(1, ok, f"g=2..60 exact match, {len(bad)} mismatches, {elapsed:.3f}s")
    assert ok, bad[:3]


# -- 2 ---------------------------------------------------------------------------


def test_criterion_2_boundary_arithmetic(acceptance):
    ok = codim((3, 3)) == 9 == 2 * 6 - 3 and classify((3, 3)) is Classification.POSSIBLY_NONZERO
    wrong = [g for g in range(7, 31) if classify((3, g - 3)) is not Classification.VANISHES_TAUTOLOGICAL]
    ok = ok and not wrong
    acceptance(2, ok, f"codim(3,3)=9, (3,g-3) tautological for g=7..30, {len(wrong)} exceptions")
    assert ok, wrong


# -- 3 ---------------------------------------------------------------------------


def test_criterion_3_reducedness(acceptance):
    start = time.perf_counter()
    failures = []
    count = 0
    for s in all_strata(5):
        count += 1
        ideal = local_ring(s)
        if any(n != 1 for gen in ideal.generators for _, n in gen):
            failures.append(("not square-free", s.canonical))
        primes = minimal_primes(ideal)
        supports = ideal.supports
        for bits in itertools.product((0, 1), repeat=len(ideal.variables)):
            exps = dict(zip(ideal.variables, bits))
            got = monomial_membership(ideal, exps)
            if got != member(supports, exps):
                failures.append(("membership", s.canonical, exps))
            if got != in_prime_intersection(primes, exps):
                failures.append(("prime intersection", s.canonical, exps))
        if len(ideal.variables) <= 6:
            # non-square-free monomials too, so equality is not only on the radical
            for exps in itertools.product(range(3), repeat=len(ideal.variables)):
                e = dict(zip(ideal.variables, exps))
                if monomial_membership(ideal, e) != in_prime_intersection(primes, e):
                    failures.append(("prime intersection", s.canonical, e))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    acceptance(3, ok, f"{count} strata at g<=5, {len(failures)} failures, {elapsed:.2f}s")
    assert ok, failures[:3]


# -- 4 ---------------------------------------------------------------------------


def test_criterion_4_forked_stratum(acceptance, forked):
    ideal = local_ring(forked)
    primes = minimal_primes(ideal)
    gens_ok = ideal.sorted_generators() == [["f1"], ["f2", "f3"], ["f2", "f4"]]
    got = {p.cover: p.dimension for p in primes}
    expected = {frozenset({"f1", "f2"}): 7, frozenset({"f1", "f3", "f4"}): 6}
    covers_ok = set(got) == minimal_covers(ideal.supports, list(ideal.variables)) == set(expected)
    ok = gens_ok and covers_ok and got == expected
    acceptance(4, ok, f"generators {ideal.sorted_generators()}, primes {sorted((p.sorted_cover(), p.dimension) for p in primes)}")
    assert ok


# -- 5 ---------------------------------------------------------------------------


def random_tree(rng: random.Random) -> StableTree:
    n = rng.randint(1, 8)
    if n == 1:
        edges = []
    elif n == 2:
        edges = [(0, 1)]
    else:
        edges = list(nx.from_prufer_sequence([rng.randrange(n) for _ in range(n - 2)]).edges)
    degree = [0] * n
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    genus = [0 if degree[i] >= 3 and rng.random() < 0.5 else rng.randint(1, 2) for i in range(n)]
    names = rng.sample([f"n{i}" for i in range(20)], n)
    enames = rng.sample([f"k{i}" for i in range(20)], len(edges))
    return StableTree.from_edges(
        {names[i]: genus[i] for i in range(n)}, [(names[a], names[b]) for a, b in edges], enames
    )


def random_stratum(rng: random.Random) -> ColoredStratum:
    tree = random_tree(rng)
    pos = [v for v in tree.vertex_ids if tree.genus_of[v] > 0]
    k = rng.randint(1, 3)
    raw = {v: rng.randint(1, k) for v in pos}
    used = sorted(set(raw.values()))
    coloring = {v: used.index(c) + 1 for v, c in raw.items()}
    parts = [sum(tree.genus_of[v] for v in pos if coloring[v] == c) for c in range(1, len(used) + 1)]
    return ColoredStratum.make(tree, coloring, parts)


def renamed(stratum: ColoredStratum, rng: random.Random, prefix: str):
    vs, es = stratum.tree.vertex_ids, stratum.tree.edge_ids
    vmap = dict(zip(vs, rng.sample([f"{prefix}{i}" for i in range(20)], len(vs))))
    emap = dict(zip(es, rng.sample([f"{prefix}e{i}" for i in range(20)], len(es))))
    tree = stratum.tree.relabel(vmap, emap)
    return ColoredStratum.make(tree, {vmap[v]: c for v, c in stratum.coloring}, stratum.parts), vmap, emap


def random_member(base: ColoredStratum, rng: random.Random):
    for _ in range(20):
        edges = frozenset(e for e in base.tree.edge_ids if rng.random() < 0.5)
        try:
            image, _ = contract_stratum(base, edges)
        except MixedFiberError:
            continue
        break
    else:
        edges = frozenset()
        image = base
    target, _, _ = renamed(image, rng, "t")
    return specialize(base, edges, target)


def same_map(a, b):
    return a.contracted == b.contracted and dict(a.vertex_map) == dict(b.vertex_map) and a.target == b.target


def check_s_structure(structure: SStructure, rng: random.Random) -> list[str]:
    problems = []
    base = structure.base
    gen = generic_structure(structure)
    common = frozenset.intersection(*(s.contracted for s in structure.specializations))

    # existence: generic, and each member factors through it
    if not gen.structure.is_generic:
        problems.append("result is not generic")
    gen.factoring.check()
    if gen.factoring.contracted != common:
        problems.append("factoring contracts the wrong edges")
    for old, new in zip(structure.specializations, gen.structure.specializations):
        new.check()
        if not same_map(compose(gen.factoring, new), old):
            problems.append("composition differs from the original specialization")

    # uniqueness: renaming the base leaves the result unchanged up to isomorphism
    moved, vmap, emap = renamed(base, rng, "r")
    specs = [specialize(moved, {emap[e] for e in s.contracted}, s.target) for s in structure.specializations]
    gen2 = generic_structure(SStructure(moved, tuple(specs)))
    if gen2.structure.canonical() != gen.structure.canonical():
        problems.append("canonical form depends on labels")
    if not generic_structure(gen.structure).factoring.is_isomorphism:
        problems.append("generic structure is not a fixed point")

    # universal property, by exhaustive search over contracted sets C
    edges = base.tree.edge_ids
    for r in range(len(edges) + 1):
        for c in itertools.combinations(edges, r):
            c = frozenset(c)
            factors = all(
                len({s.vertex_map[x] for x in base.tree.ends(e)}) == 1
                for s in structure.specializations
                for e in c
            )
            if factors != (c <= common):
                problems.append(f"factoring through {sorted(c)} misjudged")
                continue
            if not factors:
                continue
            rest = [s.contracted - c for s in structure.specializations]
            if (not frozenset.intersection(*rest)) != (c == common):
                problems.append(f"{sorted(c)} gives a generic structure but is not the common set")
            image, _ = contract_stratum(base, c)
            for s, a in zip(structure.specializations, rest):
                if specialize(image, a, s.target) is None:
                    problems.append(f"no induced specialization through {sorted(c)}")
    return problems


def test_criterion_5_generic_structures(acceptance):
    rng = random.Random(20260401)
    failures = []
    for trial in range(1000):
        base = random_stratum(rng)
        members = tuple(random_member(base, rng) for _ in range(rng.randint(1, 4)))
        problems = check_s_structure(SStructure(base, members), rng)
        if problems:
            failures.append((trial, base.canonical, problems[:2]))
    ok = not failures
    acceptance(5, ok, f"1000 random S-structures, {len(failures)} failures")
    assert ok, failures[:3]


# -- 6 ---------------------------------------------------------------------------


def quotient(h: nx.Graph, edges: set) -> nx.Graph | None:
    """Contract the edges with the given ids; None when a fiber mixes colours."""
    uf = nx.utils.UnionFind(h.nodes)
    for a, b, d in h.edges(data=True):
        if d["id"] in edges:
            uf.union(a, b)
    block_of = {}
    q = nx.Graph()
    for block in uf.to_sets():
        block = frozenset(block)
        colours = {h.nodes[v]["color"] for v in block} - {0}
        if len(colours) > 1:
            return None
        q.add_node(block, genus=sum(h.nodes[v]["genus"] for v in block), color=min(colours, default=0))
        block_of.update(dict.fromkeys(block, block))
    for a, b, d in h.edges(data=True):
        if d["id"] not in edges:
            q.add_edge(block_of[a], block_of[b])
    return q


def same_colored(a: nx.Graph, b: nx.Graph) -> bool:
    match = lambda x, y: x["genus"] == y["genus"] and x["color"] == y["color"]  # noqa: E731
    return nx.is_isomorphic(a, b, node_match=match)


def edge_automorphisms(h: nx.Graph) -> list[dict]:
    match = lambda x, y: x["genus"] == y["genus"] and x["color"] == y["color"]  # noqa: E731
    out = []
    for vmap in nx.algorithms.isomorphism.GraphMatcher(h, h, node_match=match).isomorphisms_iter():
        out.append({d["id"]: h.edges[vmap[a], vmap[b]]["id"] for a, b, d in h.edges(data=True)})
    return out


def orbit_key(choice: tuple, auts: list[dict]) -> tuple:
    return min(tuple(tuple(sorted(a[e] for e in c)) for c in choice) for a in auts)


def test_criterion_6_decomposition(acceptance):
    failures = []
    checked = 0
    for g in range(2, 5):
        for parts in partitions(g):
            poset = strata_poset(g, parts)
            graphs = [graph_of(s.tree, s.color) for s in poset.strata]
            comps = sorted(poset.components)
            auts = [edge_automorphisms(h) for h in graphs]
            # contraction sets onto each component, from networkx quotients
            onto = {}
            for i, h in enumerate(graphs):
                ids = [d["id"] for _, _, d in h.edges(data=True)]
                for z in comps:
                    onto[(i, z)] = [
                        frozenset(c)
                        for r in range(len(ids) + 1)
                        for c in itertools.combinations(ids, r)
                        if (q := quotient(h, set(c))) is not None and same_colored(q, graphs[z])
                    ]
            for r in range(1, len(comps) + 1):
                for zs in itertools.combinations(comps, r):
                    checked += 1
                    expected = set()
                    for i in range(len(graphs)):
                        for choice in itertools.product(*(onto[(i, z)] for z in zs)):
                            if not frozenset.intersection(*choice):
                                expected.add((i, orbit_key(choice, auts[i])))
                    got = [
                        (poset.index(s.base), orbit_key(tuple(x.contracted for x in s.specializations), auts[poset.index(s.base)]))
                        for s in fiber_product_decomposition([poset.strata[z] for z in zs], poset.strata)
                    ]
                    if len(got) != len(set(got)) or set(got) != expected:
                        failures.append((g, parts, zs, sorted(got), sorted(expected)))
    ok = not failures
    acceptance(6, ok, f"{checked} component subsets at g<=4, {len(failures)} mismatches")
    assert ok, failures[:2]


# -- 7 ---------------------------------------------------------------------------


def test_criterion_7_refinement(acceptance):
    start = time.perf_counter()
    failures = []
    cases = list(refinement_cases())
    for tree, v, vp, r in cases:
        for index in sorted({1, tree.genus_of[vp]}):
            for r_max in (r + 1, r + 2):
                report = verify_refinement(tree, v, vp, r_max, index=index)
                if not report.passed:
                    failures.append((canonical_form(tree), v, vp, index, r_max, report.failures()))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    trees = len({canonical_form(t) for t, *_ in cases})
    acceptance(7, ok, f"{len(cases)} pairs on {trees} trees, orders up to r+2, {len(failures)} failures, {elapsed:.2f}s")
    assert ok, failures[:3]


# -- 8 ---------------------------------------------------------------------------


def test_criterion_8_one_step(acceptance):
    failures = []
    for tree, v, vp, r in refinement_cases():
        if r != 1:
            continue
        (e,) = tree.geodesic(v, vp)
        engine = PlumbingEngine(tree, (vp, 1), SeriesRing(tree.edge_ids, 2))
        lead = engine.eta(v, 1).homogeneous_part(1)
        expected = engine.ring.monomial({e.edge: 1}, Coeff.product([basis_b(v, str(e)), xi(str(-e))], -1))
        if lead != expected:
            failures.append((v, vp, lead.to_text()))
    single = StableTree.from_edges({"v": 1, "vp": 1}, [("v", "vp")], ["e"])
    engine = PlumbingEngine(single, ("vp", 1), SeriesRing(("e",), 1))
    if engine.eta("v", 1).to_text() != "s[e] : -b[v;e](z)*xi[-e]":
        failures.append(("single edge", engine.eta("v", 1).to_text()))
    ok = not failures
    acceptance(8, ok, f"eta^(1) leading term is -s*b(z,q)*xi on every adjacent pair, {len(failures)} failures")
    assert ok, failures[:3]


# -- 9 ---------------------------------------------------------------------------


FRACTIONS = sorted({Fraction(a, b) for a in range(-9, 10) for b in range(1, 5)})


def test_criterion_9_unit(acceptance):
    rng = random.Random(7)
    failures = []
    checked = 0
    for tree, v, vp, r in refinement_cases():
        geo = tree.geodesic(v, vp)
        for trial in range(2):
            pos = default_positions(tree)
            if trial:
                for w in tree.vertex_ids:
                    if tree.genus_of[w] == 0:
                        out = tree.out_edges(w)
                        for oe, q in zip(out, rng.sample(FRACTIONS, len(out))):
                            pos[oe] = q
            block = period_block(tree, v, vp, r, positions=pos)
            # independent value: (-1)^r times 1/(q_in - q_out)^2 at each interior vertex
            scale = Fraction((-1) ** r)
            for a, b in zip(geo, geo[1:]):
                scale /= (pos[-a] - pos[b]) ** 2
            for (i, j), _ in block.entries.items():
                checked += 1
                lead = block.leading_coefficient(i, j)
                want = Coeff.product([period_B(j, str(geo[0])), xi(str(-geo[-1]), 0, i)], scale)
                if lead != want or scale == 0 or not lead.is_monomial():
                    failures.append((v, vp, i, j, str(lead), str(want)))
    ok = not failures
    acceptance(9, ok, f"{checked} leading period coefficients are nonzero monomials, {len(failures)} failures")
    assert ok, failures[:3]


# -- 10 --------------------------------------------------------------------------


def test_criterion_10_cross_module(acceptance):
    witnesses = []
    count = 0
    for g in range(2, 5):
        for parts in partitions(g):
            poset = strata_poset(g, parts)
            for i, s in enumerate(poset.strata):
                count += 1
                edges = frozenset(s.tree.edge_ids)
                local = components_through_point(s)
                got_tops = sorted({poset.index(c) for _, c in local})
                tops = sorted(poset.maximal_above(i))
                # one local branch per contraction onto a component, so compare
                # the contracted edge sets themselves, multiplicity included
                got_sets = sorted(sorted(edges - p.cover) for p, _ in local)
                want_sets = sorted(
                    sorted(c)
                    for j in tops
                    for c in ([frozenset()] if j == i else poset.contractions[(i, j)])
                )
                landed = all(poset.index(c) in tops for _, c in local)
                if got_tops != tops or got_sets != want_sets or not landed:
                    witnesses.append((g, parts, s.canonical, got_tops, tops, got_sets, want_sets))
    for w in witnesses:
        print("witness:", w)
    ok = not witnesses
    acceptance(10, ok, f"{count} strata at g<=4, {len(witnesses)} discrepancies")
    assert ok, witnesses[:3]
