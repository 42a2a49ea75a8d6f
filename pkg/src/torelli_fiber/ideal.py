"""Monomial local rings of the fiber product at a point ``([C], J, sigma)``.

The local ring is a power series ring in the boundary coordinates ``x`` and
the smoothing parameters ``s_e`` modulo the products of ``s_e`` along the
critical paths.  Only its combinatorial shadow is kept: the variable names,
the monomial generators and the number of free ``x`` coordinates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .strata import (
    ColoredStratum,
    MixedFiberError,
    contract_stratum,
    critical_paths,
    is_valid_stratum,
)

__all__ = [
    "InvalidStratum",
    "MinimalPrime",
    "SquareFreeIdeal",
    "components_through_point",
    "in_prime_intersection",
    "is_radical_squarefree",
    "local_ring",
    "minimal_primes",
    "minimal_transversals",
    "monomial_membership",
]

Monomial = tuple[tuple[str, int], ...]


class InvalidStratum(ValueError):
    pass


def _monomial(exps: Mapping[str, int] | Iterable[str]) -> Monomial:
    if isinstance(exps, Mapping):
        return tuple(sorted((str(v), int(n)) for v, n in exps.items() if n))
    counts: dict[str, int] = {}
    for v in exps:
        counts[str(v)] = counts.get(str(v), 0) + 1
    return tuple(sorted(counts.items()))


def _divides(a: Monomial, b: Mapping[str, int]) -> bool:
    return all(b.get(v, 0) >= n for v, n in a)


@dataclass(frozen=True)
class SquareFreeIdeal:
    """Monomial ideal in the variables ``s_e``; generators as exponent tuples.

    ``dim_x`` counts the free boundary coordinates.  Generators loaded from
    outside may carry exponents above one; :func:`is_radical_squarefree`
    detects those.
    """

    variables: tuple[str, ...]
    generators: tuple[Monomial, ...]
    dim_x: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(sorted(set(self.variables))))
        gens = sorted({_monomial(dict(g)) for g in self.generators})
        for g in gens:
            if not g:
                raise ValueError("generators must be nonconstant monomials")
            for v, _ in g:
                if v not in self.variables:
                    raise KeyError(f"generator uses unknown variable {v!r}")
        object.__setattr__(self, "generators", tuple(gens))

    @classmethod
    def from_supports(cls, variables: Iterable[str], supports: Iterable[Iterable[str]], dim_x: int = 0) -> SquareFreeIdeal:
        return cls(tuple(variables), tuple(_monomial(s) for s in supports), dim_x).minimalized()

    def minimalized(self) -> SquareFreeIdeal:
        gens = self.generators
        keep = [
            g
            for g in gens
            if not any(h != g and _divides(h, dict(g)) for h in gens)
        ]
        return SquareFreeIdeal(self.variables, tuple(keep), self.dim_x)

    @property
    def supports(self) -> list[frozenset[str]]:
        return [frozenset(v for v, _ in g) for g in self.generators]

    @property
    def is_zero(self) -> bool:
        return not self.generators

    @property
    def ambient_dimension(self) -> int:
        return self.dim_x + len(self.variables)

    def sorted_generators(self) -> list[list[str]]:
        """Generators as sorted variable lists (repeated for exponents)."""
        out = [[v for v, n in g for _ in range(n)] for g in self.generators]
        return sorted(out, key=lambda g: (len(g), g))

    def to_json(self) -> dict:
        return {"vars": list(self.variables), "gens": self.sorted_generators(), "dimX": self.dim_x}

    @classmethod
    def from_json(cls, data: Mapping) -> SquareFreeIdeal:
        return cls(
            tuple(data["vars"]),
            tuple(_monomial(g) for g in data["gens"]),
            int(data.get("dimX", 0)),
        )


class MinimalPrime(NamedTuple):
    """The prime ``(s_e : e in cover)``; ``dimension`` of its component."""

    cover: frozenset[str]
    dimension: int

    def sorted_cover(self) -> list[str]:
        return sorted(self.cover)


def local_ring(stratum: ColoredStratum) -> SquareFreeIdeal:
    """Generators ``prod_{e in gamma} s_e`` for the critical paths ``gamma``."""
    validity = is_valid_stratum(stratum)
    if not validity:
        raise InvalidStratum(f"edge {validity.uncovered_edge} lies on no critical path")
    tree = stratum.tree
    dim_x = sum(3 * g - 3 + tree.valence(v) for v, g in tree.vertices)
    return SquareFreeIdeal.from_supports(
        tree.edge_ids, (p.edges for p in critical_paths(stratum)), dim_x
    )


def is_radical_squarefree(ideal: SquareFreeIdeal) -> bool:
    """A monomial ideal is radical iff its minimal generators are square-free."""
    return all(n == 1 for g in ideal.minimalized().generators for _, n in g)


def monomial_membership(ideal: SquareFreeIdeal, monomial: Mapping[str, int]) -> bool:
    for v in monomial:
        if v not in ideal.variables:
            raise KeyError(f"unknown variable {v!r}")
    return any(_divides(g, monomial) for g in ideal.generators)


def minimal_transversals(hyperedges: Sequence[frozenset[str]]) -> list[frozenset[str]]:
    """Minimal vertex covers of a hypergraph, built one hyperedge at a time.

    After adding hyperedge ``h`` the covers are the old covers meeting ``h``
    plus old covers extended by one element of ``h``, minimalized.
    """
    covers: set[frozenset[str]] = {frozenset()}
    for h in sorted(hyperedges, key=lambda e: (len(e), sorted(e))):
        nxt = set()
        for c in covers:
            if c & h:
                nxt.add(c)
            else:
                nxt.update(c | {x} for x in h)
        covers = {c for c in nxt if not any(d < c for d in nxt)}
    return sorted(covers, key=lambda c: (len(c), sorted(c)))


def minimal_primes(ideal: SquareFreeIdeal) -> list[MinimalPrime]:
    covers = minimal_transversals(ideal.supports)
    return [MinimalPrime(c, ideal.ambient_dimension - len(c)) for c in covers]


def in_prime_intersection(primes: Sequence[MinimalPrime], monomial: Mapping[str, int]) -> bool:
    """Membership in the intersection of the monomial primes."""
    support = {v for v, n in monomial.items() if n > 0}
    return all(p.cover & support for p in primes)


def components_through_point(stratum: ColoredStratum) -> list[tuple[MinimalPrime, ColoredStratum]]:
    """For each minimal prime ``W`` the stratum obtained by smoothing the
    edges outside ``W``; it is the component through the point on that branch."""
    ideal = local_ring(stratum)
    out = []
    for prime in minimal_primes(ideal):
        smoothed = set(stratum.tree.edge_ids) - prime.cover
        try:
            image, _ = contract_stratum(stratum, smoothed)
        except MixedFiberError as exc:
            raise InvalidStratum(f"cover {prime.sorted_cover()} merges colours: {exc}") from exc
        if not is_valid_stratum(image):
            raise InvalidStratum(f"cover {prime.sorted_cover()} yields an invalid stratum")
        out.append((prime, image))
    return out


def square_free_monomials(variables: Sequence[str]) -> Iterable[dict[str, int]]:
    """All ``2^n`` square-free monomials, as exponent maps."""
    for bits in itertools.product((0, 1), repeat=len(variables)):
        yield {v: b for v, b in zip(variables, bits) if b}
