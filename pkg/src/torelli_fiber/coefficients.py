"""Exact coefficients for plumbing expansions.

A :class:`Coeff` is a polynomial with :class:`~fractions.Fraction`
coefficients in named symbols.  The symbols stand for kernel and differential
data that is never evaluated numerically:

``beta[v;e,e']`` / ``beta[v;e,e';p,n]``
    Taylor coefficient of ``z_e^p zeta_{e'}^n`` in the regular part of the
    bidifferential of a positive-genus component.  ``beta[v;e,e']`` is the
    value at the two nodes.
``kappa[v;e,e';p]``
    Taylor coefficient of the constant (in ``zeta``) kernel term.
``xi[e]`` / ``xi[e;n]``
    Taylor coefficients of the varied differential at the node ``q_e``.  The
    differential index is printed as ``xi<i>[...]`` when it is not 1.
``B[j;e]`` / ``B[j;e;n]``
    ``B_j``-periods of the basis differentials ``b[v;e;n](z)``.
``b[v;e](z)`` / ``b[v;e;n](z)``
    Global differentials on a component, coefficients of the kernel
    expansion near ``q_e``.
``K[v;e](z)``
    The Cauchy kernel evaluated at ``q_e``.

Edges inside symbols are oriented edge strings such as ``-f1``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Union

__all__ = [
    "Coeff",
    "Sym",
    "basis_b",
    "beta",
    "cauchy_k",
    "kappa",
    "period_B",
    "xi",
]

Number = Union[int, Fraction]


class Sym(NamedTuple):
    kind: str
    args: tuple

    def __str__(self) -> str:
        k, a = self.kind, self.args
        if k == "beta":
            v, e, f, p, n = a
            return f"beta[{v};{e},{f}]" if p == n == 0 else f"beta[{v};{e},{f};{p},{n}]"
        if k == "kappa":
            v, e, f, p = a
            return f"kappa[{v};{e},{f}]" if p == 0 else f"kappa[{v};{e},{f};{p}]"
        if k == "xi":
            i, e, n = a
            head = "xi" if i == 1 else f"xi<{i}>"
            return f"{head}[{e}]" if n == 0 else f"{head}[{e};{n}]"
        if k == "B":
            j, e, n = a
            return f"B[{j};{e}]" if n == 0 else f"B[{j};{e};{n}]"
        if k == "b":
            v, e, n = a
            return f"b[{v};{e}](z)" if n == 0 else f"b[{v};{e};{n}](z)"
        if k == "K":
            v, e = a
            return f"K[{v};{e}](z)"
        return f"{k}{list(a)}"


def beta(v: str, e: str, f: str, p: int = 0, n: int = 0) -> Sym:
    """Symmetric under ``(e, p) <-> (f, n)``; stored in the smaller order."""
    if (f, n) < (e, p):
        e, f, p, n = f, e, n, p
    return Sym("beta", (v, e, f, p, n))


def kappa(v: str, e: str, f: str, p: int = 0) -> Sym:
    return Sym("kappa", (v, e, f, p))


def xi(e: str, n: int = 0, index: int = 1) -> Sym:
    return Sym("xi", (index, e, n))


def period_B(j: int, e: str, n: int = 0) -> Sym:
    return Sym("B", (j, e, n))


def basis_b(v: str, e: str, n: int = 0) -> Sym:
    return Sym("b", (v, e, n))


def cauchy_k(v: str, e: str) -> Sym:
    return Sym("K", (v, e))


Mono = tuple[tuple[Sym, int], ...]


def _mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for s, k in b:
        out[s] = out.get(s, 0) + k
    return tuple(sorted(out.items()))


def _fmt_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class Coeff:
    """Immutable polynomial over the rationals in :class:`Sym` variables."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Mono, Number] | None = None):
        clean: dict[Mono, Fraction] = {}
        if terms:
            for m, c in terms.items():
                if c:
                    clean[m] = Fraction(c)
        self._terms = clean
        self._hash: int | None = None

    @classmethod
    def _raw(cls, terms: dict[Mono, Fraction]) -> Coeff:
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    @classmethod
    def const(cls, c: Number) -> Coeff:
        return cls({(): c})

    @classmethod
    def of(cls, sym: Sym, c: Number = 1) -> Coeff:
        return cls({((sym, 1),): c})

    @classmethod
    def product(cls, syms: Iterable[Sym], c: Number = 1) -> Coeff:
        m: Mono = ()
        for s in syms:
            m = _mono_mul(m, ((s, 1),))
        return cls({m: c})

    def terms(self) -> Iterator[tuple[Mono, Fraction]]:
        return iter(sorted(self._terms.items(), key=lambda t: _mono_key(t[0])))

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def constant_term(self) -> Fraction:
        return self._terms.get((), Fraction(0))

    def symbols(self) -> set[Sym]:
        return {s for m in self._terms for s, _ in m}

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Coeff.const(other)
        if not isinstance(other, Coeff):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __add__(self, other: Coeff | Number) -> Coeff:
        if not isinstance(other, Coeff):
            other = Coeff.const(other)
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Coeff._raw(out)

    __radd__ = __add__

    def __neg__(self) -> Coeff:
        return Coeff._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other: Coeff | Number) -> Coeff:
        if not isinstance(other, Coeff):
            other = Coeff.const(other)
        return self + (-other)

    def __rsub__(self, other: Number) -> Coeff:
        return Coeff.const(other) - self

    def __mul__(self, other: Coeff | Number) -> Coeff:
        if not isinstance(other, Coeff):
            if not other:
                return Coeff()
            q = Fraction(other)
            return Coeff._raw({m: c * q for m, c in self._terms.items()})
        if not self._terms or not other._terms:
            return Coeff()
        out: dict[Mono, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                v = out.get(m, 0) + c1 * c2
                if v:
                    out[m] = v
                else:
                    out.pop(m, None)
        return Coeff._raw(out)

    __rmul__ = __mul__

    def substitute(self, fn: Callable[[Sym], Coeff | None]) -> Coeff:
        """Replace each symbol ``s`` by ``fn(s)`` (kept when ``fn`` returns None)."""
        out = Coeff()
        for m, c in self._terms.items():
            term = Coeff.const(c)
            for s, k in m:
                rep = fn(s)
                if rep is None:
                    rep = Coeff.of(s)
                for _ in range(k):
                    term = term * rep
            out = out + term
        return out

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for m, c in self.terms():
            body = "*".join(str(s) if k == 1 else f"{s}^{k}" for s, k in m)
            if not body:
                text = _fmt_fraction(c)
            elif c == 1:
                text = body
            elif c == -1:
                text = "-" + body
            else:
                text = f"{_fmt_fraction(c)}*{body}"
            parts.append(text)
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def __repr__(self) -> str:
        return f"Coeff({str(self)!r})"

    def to_json(self) -> list:
        return [
            [_fmt_fraction(c), [[str(s), k] for s, k in m]]
            for m, c in self.terms()
        ]


def _mono_key(m: Mono) -> tuple:
    return (sum(k for _, k in m), [(str(s), k) for s, k in m])
