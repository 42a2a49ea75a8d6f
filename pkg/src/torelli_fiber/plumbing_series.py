"""Formal plumbing expansions of holomorphic differentials.

A differential ``Omega`` supported on one positive-genus component ``v'`` is
extended over the standard plumbing ``z_e = s_e / z_{-e}``.  The correction on
a component ``v`` is a power series in the smoothing parameters ``s_e`` whose
terms come from iterated residues: each step pulls a differential across a
node and integrates it against the Cauchy kernel of the next component.

Everything is exact.  Genus-0 components are charts on ``P^1`` with explicit
rational node positions, so their kernels are explicit.  Positive-genus
components contribute named symbols (see :mod:`.coefficients`).

Truncation.  A :class:`SeriesRing` drops monomials with some exponent above
``max_degree`` or total degree above ``total_degree``.  Local jets are kept to
``z``-precision ``N = min(max_degree, total_degree)``; pulling back a term
``z^n dz`` produces ``s^(n+1)``, so orders ``n >= N`` can never survive and a
jet of precision ``N`` pulls back to a complete jet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from .coefficients import Coeff, Sym, basis_b, beta, cauchy_k, kappa, period_B, xi
from .graph_core import OrientedEdge, StableTree

__all__ = [
    "CoincidentNodes",
    "KernelJet",
    "LocalJet",
    "OrderCheck",
    "PathFamily",
    "PeriodBlock",
    "PlumbingEngine",
    "PlumbingError",
    "PlumbingSeries",
    "PoleOrderError",
    "RefinementReport",
    "SeriesRing",
    "TruncationUnderflow",
    "default_positions",
    "eta_components",
    "eta_series",
    "genus0_kernel",
    "geodesic_monomial",
    "global_kernel",
    "path_family",
    "path_sum_leading",
    "period_block",
    "pullback_transition",
    "residue_integrate",
    "symbolic_kernel",
    "verify_refinement",
    "xi_recursion",
]


class PlumbingError(ValueError):
    pass


class TruncationUnderflow(PlumbingError):
    """A jet does not carry enough orders for the requested truncation."""


class PoleOrderError(PlumbingError):
    """The integrand has a pole deeper than the kernel jet reaches."""


class CoincidentNodes(PlumbingError):
    pass


# ---------------------------------------------------------------------------
# multivariate series in the smoothing parameters


@dataclass(frozen=True)
class SeriesRing:
    """Variables ``s_e`` (one per edge id) with truncation data."""

    variables: tuple[str, ...]
    max_degree: int
    total_degree: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(sorted(set(self.variables))))
        if self.max_degree < 0:
            raise ValueError("max_degree must be nonnegative")

    @property
    def jet_precision(self) -> int:
        if self.total_degree is None:
            return self.max_degree
        return min(self.max_degree, self.total_degree)

    def index(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise KeyError(f"unknown smoothing variable {var!r}") from None

    def keeps(self, exps: tuple[int, ...]) -> bool:
        if any(x > self.max_degree for x in exps):
            return False
        return self.total_degree is None or sum(exps) <= self.total_degree

    def zero(self) -> PlumbingSeries:
        return PlumbingSeries(self, {})

    def const(self, c: Coeff | int | Fraction) -> PlumbingSeries:
        return self.monomial({}, c)

    def monomial(self, exps: Mapping[str, int], c: Coeff | int | Fraction = 1) -> PlumbingSeries:
        key = [0] * len(self.variables)
        for v, k in exps.items():
            key[self.index(v)] += k
        return PlumbingSeries(self, {tuple(key): c if isinstance(c, Coeff) else Coeff.const(c)})


class PlumbingSeries:
    """Truncated series ``sum c_a s^a`` with :class:`Coeff` coefficients.

    Exponents may be negative (only the transition involution needs that);
    truncation then acts on the positive side only.
    """

    __slots__ = ("ring", "_terms")

    def __init__(self, ring: SeriesRing, terms: Mapping[tuple[int, ...], Coeff]):
        self.ring = ring
        self._terms = {k: c for k, c in terms.items() if c and ring.keeps(k)}

    @classmethod
    def _raw(cls, ring: SeriesRing, terms: dict) -> PlumbingSeries:
        obj = cls.__new__(cls)
        obj.ring = ring
        obj._terms = terms
        return obj

    def _check(self, other: PlumbingSeries) -> None:
        if other.ring != self.ring:
            raise ValueError("series live in different rings")

    def items(self) -> list[tuple[tuple[int, ...], Coeff]]:
        return sorted(self._terms.items(), key=lambda t: (sum(t[0]), t[0]))

    def coefficient(self, exps: Mapping[str, int]) -> Coeff:
        key = [0] * len(self.ring.variables)
        for v, k in exps.items():
            key[self.ring.index(v)] += k
        return self._terms.get(tuple(key), Coeff())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PlumbingSeries):
            return NotImplemented
        return self.ring == other.ring and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.ring, frozenset(self._terms.items())))

    def __add__(self, other: PlumbingSeries) -> PlumbingSeries:
        self._check(other)
        if not other._terms:
            return self
        out = dict(self._terms)
        for k, c in other._terms.items():
            v = out[k] + c if k in out else c
            if v:
                out[k] = v
            else:
                out.pop(k, None)
        return PlumbingSeries._raw(self.ring, out)

    def __neg__(self) -> PlumbingSeries:
        return PlumbingSeries._raw(self.ring, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: PlumbingSeries) -> PlumbingSeries:
        return self + (-other)

    def scale(self, c: Coeff | int | Fraction) -> PlumbingSeries:
        if not c:
            return self.ring.zero()
        out = {}
        for k, v in self._terms.items():
            w = v * c
            if w:
                out[k] = w
        return PlumbingSeries._raw(self.ring, out)

    def shift(self, var: str, power: int) -> PlumbingSeries:
        """Multiply by ``s_var ** power`` and re-truncate."""
        i = self.ring.index(var)
        out = {}
        for k, c in self._terms.items():
            nk = k[:i] + (k[i] + power,) + k[i + 1 :]
            if self.ring.keeps(nk):
                out[nk] = c
        return PlumbingSeries._raw(self.ring, out)

    def __mul__(self, other: PlumbingSeries | Coeff | int | Fraction) -> PlumbingSeries:
        if not isinstance(other, PlumbingSeries):
            return self.scale(other)
        self._check(other)
        out: dict[tuple[int, ...], Coeff] = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                if not self.ring.keeps(k):
                    continue
                v = out[k] + c1 * c2 if k in out else c1 * c2
                if v:
                    out[k] = v
                else:
                    out.pop(k, None)
        return PlumbingSeries._raw(self.ring, out)

    def map_coefficients(self, fn) -> PlumbingSeries:
        return PlumbingSeries(self.ring, {k: fn(c) for k, c in self._terms.items()})

    def min_degree(self) -> int | None:
        return min((sum(k) for k in self._terms), default=None)

    def homogeneous_part(self, degree: int) -> PlumbingSeries:
        return PlumbingSeries._raw(self.ring, {k: c for k, c in self._terms.items() if sum(k) == degree})

    def divisible_by(self, exps: Mapping[str, int]) -> bool:
        idx = [(self.ring.index(v), n) for v, n in exps.items()]
        return all(all(k[i] >= n for i, n in idx) for k in self._terms)

    def monomial_text(self, key: tuple[int, ...]) -> str:
        parts = []
        for v, n in zip(self.ring.variables, key):
            if n:
                parts.append(f"s[{v}]" if n == 1 else f"s[{v}]^{n}")
        return "*".join(parts) or "1"

    def to_text(self) -> str:
        if not self._terms:
            return "0"
        return "\n".join(f"{self.monomial_text(k)} : {c}" for k, c in self.items())

    def to_json(self) -> list:
        return [
            {
                "s": {v: n for v, n in zip(self.ring.variables, k) if n},
                "coeff": str(c),
                "terms": c.to_json(),
            }
            for k, c in self.items()
        ]


# ---------------------------------------------------------------------------
# local jets and the two elementary operations


@dataclass(frozen=True)
class LocalJet:
    """Laurent jet ``sum_n a_n z_e^n (dz_e)`` with series coefficients.

    ``edge`` is the oriented edge whose chart carries ``z``; ``None`` marks a
    global differential on a component (all ``z``-dependence then lives in
    basis-differential symbols and the only key is ``0``).  ``precision`` is
    the first unknown order, or ``None`` when the jet is complete.
    """

    edge: OrientedEdge | None
    ring: SeriesRing
    terms: Mapping[int, PlumbingSeries] = field(default_factory=dict)
    precision: int | None = None
    differential: bool = True

    def __post_init__(self) -> None:
        clean = {}
        for n, c in self.terms.items():
            if self.precision is not None and n >= self.precision:
                continue
            if c:
                clean[int(n)] = c
        object.__setattr__(self, "terms", clean)

    def is_zero(self) -> bool:
        return not self.terms

    def orders(self) -> list[int]:
        return sorted(self.terms)

    def coefficient(self, n: int) -> PlumbingSeries:
        if self.precision is not None and n >= self.precision:
            raise TruncationUnderflow(f"order {n} is beyond precision {self.precision}")
        return self.terms.get(n, self.ring.zero())

    def __add__(self, other: LocalJet) -> LocalJet:
        if other.edge != self.edge or other.differential != self.differential:
            raise ValueError("jets live on different charts")
        prec = _min_prec(self.precision, other.precision)
        out = dict(self.terms)
        for n, c in other.terms.items():
            out[n] = out[n] + c if n in out else c
        return LocalJet(self.edge, self.ring, out, prec, self.differential)

    def __neg__(self) -> LocalJet:
        return LocalJet(self.edge, self.ring, {n: -c for n, c in self.terms.items()}, self.precision, self.differential)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocalJet):
            return NotImplemented
        return (
            self.edge == other.edge
            and self.ring == other.ring
            and self.precision == other.precision
            and self.differential == other.differential
            and self.terms == other.terms
        )

    def truncated(self, precision: int) -> LocalJet:
        return LocalJet(self.edge, self.ring, self.terms, _min_prec(self.precision, precision), self.differential)

    def to_text(self) -> str:
        var = "z" if self.edge is None else f"z[{self.edge}]"
        lines = []
        for n in self.orders():
            zpart = "" if self.edge is None else f"{var}^{n}" + (f" d{var}" if self.differential else "")
            for k, c in self.terms[n].items():
                mono = self.terms[n].monomial_text(k)
                lines.append(f"{mono} {zpart} : {c}".replace("  ", " "))
        tail = "" if self.precision is None else f"\n+ O({var}^{self.precision})"
        return ("\n".join(lines) or "0") + tail


def _min_prec(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def pullback_transition(jet: LocalJet, target: OrientedEdge | None = None) -> LocalJet:
    """Pull a jet on the chart of ``-e`` back to the chart of ``e``.

    Substitutes ``w = s_e / z``, so ``w^n dw = -s_e^(n+1) z^(-n-2) dz`` and a
    function term ``w^n`` becomes ``s_e^n z^(-n)``.
    """
    if jet.edge is None:
        raise PlumbingError("a global differential has no transition chart")
    target = -jet.edge if target is None else target
    if target != -jet.edge:
        raise PlumbingError(f"{jet.edge} does not glue to {target}")
    ring = jet.ring
    if jet.precision is not None and jet.precision < ring.jet_precision:
        raise TruncationUnderflow(
            f"jet known to order {jet.precision}, truncation needs {ring.jet_precision}"
        )
    var = jet.edge.edge
    out: dict[int, PlumbingSeries] = {}
    for n, c in jet.terms.items():
        if jet.differential:
            term = (-c).shift(var, n + 1)
            order = -n - 2
        else:
            term = c.shift(var, n)
            order = -n
        if term:
            out[order] = term
    return LocalJet(target, ring, out, None, jet.differential)


@dataclass(frozen=True)
class KernelJet:
    """``2 pi i`` times a kernel, expanded as ``sum_m k_m(z) zeta^m``.

    ``coeffs[m][p]`` is the coefficient of ``z^p zeta^m`` (for a global kernel
    only ``p = 0`` occurs).  Orders ``m > m_max`` are unknown; ``z`` orders
    ``p >= z_precision`` are unknown (``None``: complete).
    """

    vertex: str
    out_edge: OrientedEdge | None
    in_edge: OrientedEdge
    coeffs: Mapping[int, Mapping[int, Coeff]]
    m_max: int
    z_precision: int | None


def residue_integrate(kernel: KernelJet, integrand: LocalJet) -> LocalJet:
    """``oint K(z, zeta) f(zeta) dzeta`` over a small positive loop.

    The kernel already carries the factor ``2 pi i``, so the result is
    ``sum_m k_m(z) a_(-1-m)`` with ``a`` the integrand coefficients.
    """
    if not integrand.differential:
        raise PlumbingError("residue needs a differential integrand")
    if integrand.edge != kernel.in_edge:
        raise PlumbingError(f"integrand lives on {integrand.edge}, kernel on {kernel.in_edge}")
    if integrand.precision is not None and integrand.precision < 0:
        raise TruncationUnderflow("integrand principal part is not fully known")
    ring = integrand.ring
    out: dict[int, PlumbingSeries] = {}
    for order, a in integrand.terms.items():
        if order >= 0:
            continue
        m = -1 - order
        if m > kernel.m_max:
            raise PoleOrderError(f"pole of order {-order} exceeds kernel jet depth {kernel.m_max}")
        for p, k in kernel.coeffs.get(m, {}).items():
            if k:
                term = a.scale(k)
                out[p] = out[p] + term if p in out else term
    return LocalJet(kernel.out_edge, ring, out, kernel.z_precision, True)


# ---------------------------------------------------------------------------
# kernels


def default_positions(tree: StableTree) -> dict[OrientedEdge, Fraction]:
    """Nodes of each genus-0 component at ``0, 1, 2, ...`` in edge-id order."""
    pos = {}
    for v, g in tree.vertices:
        if g == 0:
            for i, oe in enumerate(sorted(tree.out_edges(v), key=lambda o: o.edge)):
                pos[oe] = Fraction(i)
    return pos


def _check_positions(tree: StableTree, positions: Mapping[OrientedEdge, Fraction]) -> dict[OrientedEdge, Fraction]:
    out = {}
    for v, g in tree.vertices:
        if g:
            continue
        seen: dict[Fraction, OrientedEdge] = {}
        for oe in tree.out_edges(v):
            if oe not in positions:
                raise PlumbingError(f"no node position for {oe} on genus-0 vertex {v}")
            q = Fraction(positions[oe])
            if q in seen:
                raise CoincidentNodes(f"{seen[q]} and {oe} share position {q} on {v}")
            seen[q] = oe
            out[oe] = q
    return out


def genus0_kernel(
    vertex: str,
    out_edge: OrientedEdge,
    in_edge: OrientedEdge,
    positions: Mapping[OrientedEdge, Fraction],
    m_max: int,
    z_precision: int,
) -> KernelJet:
    """Regular part of ``dz / (z - zeta)`` on ``P^1`` in centred node charts.

    With ``D = q_e - q_e'`` the bidifferential ``dz dzeta / (z - zeta + D)^2``
    has ``z^p zeta^n`` coefficient ``(-1)^p (p+n+1) C(p+n, p) / D^(p+n+2)``;
    the same-node regular part vanishes.
    """
    coeffs: dict[int, dict[int, Coeff]] = {}
    if out_edge != in_edge:
        d = Fraction(positions[out_edge]) - Fraction(positions[in_edge])
        if d == 0:
            raise CoincidentNodes(f"{out_edge} and {in_edge} coincide on {vertex}")
        coeffs[0] = {p: Coeff.const(Fraction((-1) ** p) / d ** (p + 1)) for p in range(z_precision)}
        for m in range(1, m_max + 1):
            n = m - 1
            coeffs[m] = {
                p: Coeff.const(
                    Fraction((-1) ** p * (p + n + 1) * math.comb(p + n, p), m) / d ** (p + n + 2)
                )
                for p in range(z_precision)
            }
    return KernelJet(vertex, out_edge, in_edge, coeffs, m_max, z_precision)


def symbolic_kernel(
    vertex: str, out_edge: OrientedEdge, in_edge: OrientedEdge, m_max: int, z_precision: int
) -> KernelJet:
    """Kernel of a positive-genus component: ``kappa`` at ``m = 0`` and
    ``beta[v;e,e';p,m-1] / m`` at ``z^p zeta^m``."""
    e, f = str(out_edge), str(in_edge)
    coeffs = {0: {p: Coeff.of(kappa(vertex, e, f, p)) for p in range(z_precision)}}
    for m in range(1, m_max + 1):
        coeffs[m] = {p: Coeff.of(beta(vertex, e, f, p, m - 1), Fraction(1, m)) for p in range(z_precision)}
    return KernelJet(vertex, out_edge, in_edge, coeffs, m_max, z_precision)


def global_kernel(vertex: str, in_edge: OrientedEdge, m_max: int) -> KernelJet:
    """``2 pi i K_v(z, zeta)`` for ``z`` away from the nodes."""
    e = str(in_edge)
    coeffs = {0: {0: Coeff.of(cauchy_k(vertex, e))}}
    for m in range(1, m_max + 1):
        coeffs[m] = {0: Coeff.of(basis_b(vertex, e, m - 1), Fraction(1, m))}
    return KernelJet(vertex, None, in_edge, coeffs, m_max, None)


# ---------------------------------------------------------------------------
# the recursion


def _default_ring(tree: StableTree, r_max: int, max_degree: int | None, total_degree: int | None) -> SeriesRing:
    s = r_max + 1 if max_degree is None else max_degree
    t = r_max + 1 if total_degree is None else total_degree
    return SeriesRing(tuple(tree.edge_ids), s, t)


class PlumbingEngine:
    """Memoized ``xi^(r)_e`` and ``eta^(r)_v`` for one placed differential.

    ``omega`` is ``(v', i)``: the ``i``-th basis differential of ``C_{v'}``,
    zero on every other component.
    """

    def __init__(
        self,
        tree: StableTree,
        omega: tuple[str, int],
        ring: SeriesRing,
        positions: Mapping[OrientedEdge, Fraction] | None = None,
    ):
        vp, i = omega
        if vp not in tree.genus_of:
            raise KeyError(f"unknown vertex {vp!r}")
        if not 1 <= i <= tree.genus_of[vp]:
            raise PlumbingError(f"{vp} has no differential with index {i}")
        if set(ring.variables) != set(tree.edge_ids):
            raise PlumbingError("series ring variables must be the tree's edges")
        self.tree = tree
        self.omega = (vp, i)
        self.ring = ring
        self.positions = _check_positions(tree, default_positions(tree) if positions is None else positions)
        self.precision = ring.jet_precision
        self._xi: dict[tuple[OrientedEdge, int], LocalJet] = {}
        self._eta: dict[tuple[str, int], PlumbingSeries] = {}
        self._kernels: dict[tuple[OrientedEdge, OrientedEdge], KernelJet] = {}

    def kernel(self, out_edge: OrientedEdge, in_edge: OrientedEdge) -> KernelJet:
        key = (out_edge, in_edge)
        if key not in self._kernels:
            v = self.tree.source(out_edge)
            n = self.precision
            if self.tree.genus_of[v] == 0:
                self._kernels[key] = genus0_kernel(v, out_edge, in_edge, self.positions, n, n)
            else:
                self._kernels[key] = symbolic_kernel(v, out_edge, in_edge, n, n)
        return self._kernels[key]

    def xi(self, e: OrientedEdge, r: int) -> LocalJet:
        key = (e, r)
        if key in self._xi:
            return self._xi[key]
        tree, ring, n = self.tree, self.ring, self.precision
        v = tree.source(e)
        if r == 0:
            vp, i = self.omega
            if v == vp:
                terms = {k: ring.const(Coeff.of(xi(str(e), k, i))) for k in range(n)}
                jet = LocalJet(e, ring, terms, n)
            else:
                jet = LocalJet(e, ring, {}, None)
        else:
            jet = LocalJet(e, ring, {}, n)
            for f in tree.out_edges(v):
                prev = self.xi(-f, r - 1)
                if prev.is_zero():
                    continue
                jet = jet + residue_integrate(self.kernel(e, f), pullback_transition(prev, f))
        self._xi[key] = jet
        return jet

    def eta(self, v: str, r: int) -> PlumbingSeries:
        """``eta^(r)_v`` as a series whose coefficients are linear in the
        basis differentials ``b[v;e;n](z)``."""
        if r < 1:
            raise ValueError("eta is defined for r >= 1")
        key = (v, r)
        if key in self._eta:
            return self._eta[key]
        total = self.ring.zero()
        for e in self.tree.out_edges(v):
            prev = self.xi(-e, r - 1)
            if prev.is_zero():
                continue
            res = residue_integrate(global_kernel(v, e, self.precision), pullback_transition(prev, e))
            total = total + res.coefficient(0)
        self._eta[key] = total
        return total


def xi_recursion(
    tree: StableTree,
    omega: tuple[str, int],
    r_max: int,
    max_degree: int | None = None,
    total_degree: int | None = None,
    positions: Mapping[OrientedEdge, Fraction] | None = None,
) -> dict[tuple[OrientedEdge, int], LocalJet]:
    """All ``xi^(r)_e`` for ``0 <= r <= r_max``."""
    engine = PlumbingEngine(tree, omega, _default_ring(tree, r_max, max_degree, total_degree), positions)
    return {
        (e, r): engine.xi(e, r)
        for r in range(r_max + 1)
        for v in tree.vertex_ids
        for e in tree.out_edges(v)
    }


def eta_components(
    tree: StableTree,
    omega: tuple[str, int],
    v: str,
    r_max: int,
    max_degree: int | None = None,
    total_degree: int | None = None,
    positions: Mapping[OrientedEdge, Fraction] | None = None,
) -> dict[int, PlumbingSeries]:
    engine = PlumbingEngine(tree, omega, _default_ring(tree, r_max, max_degree, total_degree), positions)
    return {r: engine.eta(v, r) for r in range(1, r_max + 1)}


def eta_series(
    tree: StableTree,
    omega: tuple[str, int],
    v: str,
    r_max: int,
    max_degree: int | None = None,
    total_degree: int | None = None,
    positions: Mapping[OrientedEdge, Fraction] | None = None,
) -> PlumbingSeries:
    """``eta_v = sum_{1 <= r <= r_max} eta^(r)_v``, truncated."""
    parts = eta_components(tree, omega, v, r_max, max_degree, total_degree, positions)
    total = next(iter(parts.values())).ring.zero() if parts else None
    for s in parts.values():
        total = total + s
    return total


# ---------------------------------------------------------------------------
# closed-form path sums


@dataclass(frozen=True)
class PathFamily:
    """Walks of length ``length`` from ``base`` ending at ``end``."""

    base: str
    end: str
    length: int
    walks: tuple[tuple[OrientedEdge, ...], ...]


def path_family(tree: StableTree, v: str, end: str, length: int) -> PathFamily:
    walks: list[tuple[OrientedEdge, ...]] = []

    def extend(at: str, prefix: list[OrientedEdge]) -> None:
        if len(prefix) == length:
            if at == end:
                walks.append(tuple(prefix))
            return
        if tree.distance(at, end) > length - len(prefix):
            return
        for oe in tree.out_edges(at):
            prefix.append(oe)
            extend(tree.target(oe), prefix)
            prefix.pop()

    if length >= 1:
        extend(v, [])
    return PathFamily(v, end, length, tuple(walks))


def _beta_value(tree: StableTree, positions: Mapping[OrientedEdge, Fraction], e: OrientedEdge, f: OrientedEdge) -> Coeff:
    u = tree.source(e)
    if tree.genus_of[u] > 0:
        return Coeff.of(beta(u, str(e), str(f)))
    if e == f:
        return Coeff()
    d = Fraction(positions[e]) - Fraction(positions[f])
    return Coeff.const(1 / (d * d))


def path_sum_leading(
    tree: StableTree,
    v: str,
    target: str,
    index: int,
    order: int,
    ring: SeriesRing,
    positions: Mapping[OrientedEdge, Fraction] | None = None,
) -> PlumbingSeries:
    """``(-1)^r' sum_l s(l) b_v(z, q_e1) beta(l) xi_(-e_r')`` over walks that
    end at ``target``; zero below the distance."""
    pos = _check_positions(tree, default_positions(tree) if positions is None else positions)
    total = ring.zero()
    for walk in path_family(tree, v, target, order).walks:
        c = Coeff.of(basis_b(v, str(walk[0])), (-1) ** order)
        for a, b in zip(walk, walk[1:]):
            c = c * _beta_value(tree, pos, -a, b)
            if not c:
                break
        if not c:
            continue
        c = c * Coeff.of(xi(str(-walk[-1]), 0, index))
        exps: dict[str, int] = {}
        for oe in walk:
            exps[oe.edge] = exps.get(oe.edge, 0) + 1
        total = total + ring.monomial(exps, c)
    return total


def geodesic_monomial(tree: StableTree, v: str, target: str) -> dict[str, int]:
    return {oe.edge: 1 for oe in tree.geodesic(v, target)}


# ---------------------------------------------------------------------------
# verification of the refined expansion


@dataclass(frozen=True)
class OrderCheck:
    order: int
    expect_zero: bool
    vanishes: bool
    leading_matches: bool
    divisible: bool
    degree_ok: bool
    leading: PlumbingSeries
    expected: PlumbingSeries

    @property
    def ok(self) -> bool:
        if self.expect_zero:
            return self.vanishes
        return self.leading_matches and self.divisible and self.degree_ok


@dataclass(frozen=True)
class RefinementReport:
    tree: StableTree
    source: str
    target: str
    index: int
    geodesic: tuple[OrientedEdge, ...]
    r_max: int
    ring: SeriesRing
    checks: tuple[OrderCheck, ...]

    @property
    def distance(self) -> int:
        return len(self.geodesic)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[str]:
        out = []
        for c in self.checks:
            if c.ok:
                continue
            if c.expect_zero:
                out.append(f"order {c.order}: expected zero below distance {self.distance}")
                continue
            if not c.leading_matches:
                out.append(f"order {c.order}: leading part differs from the path sum")
            if not c.divisible:
                out.append(f"order {c.order}: a monomial is not divisible by the geodesic monomial")
            if not c.degree_ok:
                out.append(f"order {c.order}: a monomial has total degree below {c.order}")
        return out

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "index": self.index,
            "geodesic": [str(e) for e in self.geodesic],
            "rMax": self.r_max,
            "maxDegree": self.ring.max_degree,
            "totalDegree": self.ring.total_degree,
            "passed": self.passed,
            "orders": [
                {
                    "order": c.order,
                    "expectZero": c.expect_zero,
                    "vanishes": c.vanishes,
                    "leadingMatches": c.leading_matches,
                    "divisible": c.divisible,
                    "degreeOk": c.degree_ok,
                    "leading": c.leading.to_json(),
                }
                for c in self.checks
            ],
            "failures": self.failures(),
        }

    def to_text(self) -> str:
        geo = " ".join(str(e) for e in self.geodesic)
        lines = [
            f"eta[{self.source}] from xi<{self.index}> at {self.target}; geodesic ({geo}), r = {self.distance}",
            f"truncation: s-degree <= {self.ring.max_degree} per variable, total <= {self.ring.total_degree}",
        ]
        for c in self.checks:
            if c.expect_zero:
                lines.append(f"order {c.order}: {'zero' if c.vanishes else 'NONZERO'}")
                continue
            flags = ", ".join(
                f"{name}={'yes' if ok else 'no'}"
                for name, ok in (("leading", c.leading_matches), ("divisible", c.divisible), ("degree", c.degree_ok))
            )
            lines.append(f"order {c.order}: {flags}")
            for line in c.leading.to_text().splitlines():
                lines.append("  " + line)
        lines.append("PASS" if self.passed else "FAIL: " + "; ".join(self.failures()))
        return "\n".join(lines)


def _validate_pair(tree: StableTree, v: str, target: str) -> None:
    for x in (v, target):
        if x not in tree.genus_of:
            raise KeyError(f"unknown vertex {x!r}")
    if v == target:
        raise PlumbingError("source and target must differ")
    if tree.genus_of[target] < 1:
        raise PlumbingError(f"target {target} has genus 0 and carries no differential")


def verify_refinement(
    tree: StableTree,
    v: str,
    target: str,
    r_max: int,
    index: int = 1,
    max_degree: int | None = None,
    total_degree: int | None = None,
    positions: Mapping[OrientedEdge, Fraction] | None = None,
    engine: PlumbingEngine | None = None,
) -> RefinementReport:
    """Compare ``eta^(r')_v`` with the path sum for ``1 <= r' <= r_max``.

    Below the distance ``r`` the correction must vanish.  From ``r`` on, the
    degree-``r'`` part must equal the path sum and every monomial must be
    divisible by the geodesic monomial and have total degree at least ``r'``.
    """
    _validate_pair(tree, v, target)
    if r_max < 1:
        raise ValueError("r_max must be at least 1")
    if engine is None:
        ring = _default_ring(tree, r_max, max_degree, total_degree)
        engine = PlumbingEngine(tree, (target, index), ring, positions)
    elif engine.omega != (target, index):
        raise PlumbingError("engine places its differential elsewhere")
    ring = engine.ring
    if ring.max_degree < r_max or (ring.total_degree is not None and ring.total_degree < r_max):
        raise TruncationUnderflow(f"truncation {ring.max_degree}/{ring.total_degree} cannot resolve order {r_max}")
    geo = tuple(tree.geodesic(v, target))
    mono = {oe.edge: 1 for oe in geo}
    checks = []
    for order in range(1, r_max + 1):
        eta = engine.eta(v, order)
        expected = path_sum_leading(tree, v, target, index, order, ring, engine.positions)
        leading = eta.homogeneous_part(order)
        low = eta.min_degree()
        checks.append(
            OrderCheck(
                order=order,
                expect_zero=order < len(geo),
                vanishes=eta.is_zero(),
                leading_matches=leading == expected,
                divisible=eta.divisible_by(mono),
                degree_ok=low is None or low >= order,
                leading=leading,
                expected=expected,
            )
        )
    return RefinementReport(tree, v, target, index, geo, r_max, ring, tuple(checks))


# ---------------------------------------------------------------------------
# period blocks


def _b_period(j: int) -> Callable[[Sym], Coeff | None]:
    def sub(s: Sym) -> Coeff | None:
        if s.kind == "b":
            _, e, n = s.args
            return Coeff.of(period_B(j, e, n))
        if s.kind == "K":
            raise PlumbingError("Cauchy-kernel term reached a period integral")
        return None

    return sub


@dataclass(frozen=True)
class PeriodBlock:
    """Entries ``(i, j)``: the ``B_j``-period on ``C_v`` of the extension of
    the ``i``-th differential of ``C_{v'}``, truncated.  ``transposed`` marks
    the partner block indexed the other way round."""

    tree: StableTree
    source: str
    target: str
    geodesic: tuple[OrientedEdge, ...]
    entries: Mapping[tuple[int, int], PlumbingSeries]
    transposed: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        rows = max((i for i, _ in self.entries), default=0)
        cols = max((j for _, j in self.entries), default=0)
        return rows, cols

    def transpose(self) -> PeriodBlock:
        return PeriodBlock(
            self.tree,
            self.source,
            self.target,
            self.geodesic,
            {(j, i): s for (i, j), s in self.entries.items()},
            not self.transposed,
        )

    def geodesic_monomial(self) -> dict[str, int]:
        return {oe.edge: 1 for oe in self.geodesic}

    def divisible_by_geodesic(self) -> bool:
        mono = self.geodesic_monomial()
        return all(s.divisible_by(mono) for s in self.entries.values())

    def leading_coefficient(self, i: int, j: int) -> Coeff:
        return self.entries[(i, j)].coefficient(self.geodesic_monomial())

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "transposed": self.transposed,
            "geodesic": [str(e) for e in self.geodesic],
            "entries": [
                {"i": i, "j": j, "series": s.to_json()} for (i, j), s in sorted(self.entries.items())
            ],
        }


def period_block(
    tree: StableTree,
    v: str,
    target: str,
    r_max: int,
    max_degree: int | None = None,
    total_degree: int | None = None,
    positions: Mapping[OrientedEdge, Fraction] | None = None,
) -> PeriodBlock:
    _validate_pair(tree, v, target)
    if tree.genus_of[v] < 1:
        raise PlumbingError(f"source {v} has genus 0 and no B-cycles")
    ring = _default_ring(tree, r_max, max_degree, total_degree)
    entries = {}
    for i in range(1, tree.genus_of[target] + 1):
        engine = PlumbingEngine(tree, (target, i), ring, positions)
        eta = ring.zero()
        for order in range(1, r_max + 1):
            eta = eta + engine.eta(v, order)
        for j in range(1, tree.genus_of[v] + 1):
            entries[(i, j)] = eta.map_coefficients(lambda c, j=j: c.substitute(_b_period(j)))
    return PeriodBlock(tree, v, target, tuple(tree.geodesic(v, target)), entries)
