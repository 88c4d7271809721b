"""Multigraph monomials over replica labels, and exact integer polynomials on
their isomorphism classes.

A monomial is written like ``{1,2}^2{1,3}{2}``: unordered edges ``{i,j}`` with
multiplicities (powers of the pairwise overlap between replicas i and j)
together with legs ``{v}`` (unpaired Gaussian insertions sitting on replica
v).  Quenched expectations only see the isomorphism class of the labeling, so
every container here keys terms by a canonical representative.

The canonical representative of a class is the minimum, under a fixed total
order on encodings, over candidate labelings produced by partition refinement
with individualization, run independently on each edge-connected component.
The candidate set is itself an isomorphism invariant, which makes the minimum
a complete invariant while keeping the search tiny for the sparse graphs that
occur here (at most ~10 vertices).
"""

from __future__ import annotations

import functools
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from operator import index
from typing import Iterable, Mapping

__all__ = [
    "Multigraph",
    "CanonicalMultigraph",
    "Pairing",
    "GraphPolynomial",
    "EMPTY",
    "make_multigraph",
    "edge",
    "leg",
    "compose",
    "relabel",
    "canonicalize",
    "sort_key",
    "enumerate_pairings",
    "poly_add",
    "poly_scale",
    "poly_mul",
]


@dataclass(frozen=True)
class Multigraph:
    """Edges as ``(i, j, mult)`` with ``i < j``, legs as ``(v, mult)``, both sorted.

    Absent pairs/vertices mean multiplicity zero.  Loop edges are banned: the
    diagonal overlap is identically one and never stored.  The support is
    exactly the set of vertices mentioned by an edge or a leg, so isolated
    vertices cannot be represented.
    """

    edges: tuple[tuple[int, int, int], ...] = ()
    legs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        prev = (0, 0)
        for i, j, m in self.edges:
            if not 0 < i < j:
                raise ValueError(f"edge ({i},{j}) must satisfy 0 < i < j")
            if m < 1:
                raise ValueError(f"edge ({i},{j}) has multiplicity {m} < 1")
            if (i, j) <= prev:
                raise ValueError("edges must be strictly sorted by vertex pair")
            prev = (i, j)
        prev_v = 0
        for v, n in self.legs:
            if v < 1:
                raise ValueError(f"leg vertex {v} must be >= 1")
            if n < 1:
                raise ValueError(f"leg at {v} has multiplicity {n} < 1")
            if v <= prev_v:
                raise ValueError("legs must be strictly sorted by vertex")
            prev_v = v

    @cached_property
    def support(self) -> tuple[int, ...]:
        verts = {v for v, _ in self.legs}
        for i, j, _ in self.edges:
            verts.add(i)
            verts.add(j)
        return tuple(sorted(verts))

    @property
    def grading(self) -> tuple[int, int]:
        """(total edge multiplicity, total leg multiplicity)."""
        return (
            sum(m for _, _, m in self.edges),
            sum(n for _, n in self.legs),
        )

    def edge_dict(self) -> dict[tuple[int, int], int]:
        return {(i, j): m for i, j, m in self.edges}

    def leg_dict(self) -> dict[int, int]:
        return {v: n for v, n in self.legs}

    def is_leg_free(self) -> bool:
        return not self.legs

    def __repr__(self):
        return f"Multigraph(edges={list(self.edges)}, legs={list(self.legs)})"


#: Canonical multigraphs are ordinary :class:`Multigraph` values that are
#: fixed points of :func:`canonicalize`; no separate wrapper type is used.
CanonicalMultigraph = Multigraph

#: A pairing is a tuple of ordered pairs: within each pair the earlier label
#: comes first, and first members strictly increase across pairs.
Pairing = tuple[tuple[int, int], ...]

EMPTY = Multigraph()


def make_multigraph(edge_list=(), leg_list=()) -> Multigraph:
    """Build a multigraph from ``(i, j, mult)`` edges and ``(v, mult)`` legs.

    Repeated pairs/vertices accumulate.  Loop edges and nonpositive
    multiplicities are rejected.
    """
    edges: dict[tuple[int, int], int] = {}
    for i, j, m in edge_list:
        i, j, m = index(i), index(j), index(m)
        if i == j:
            raise ValueError(f"loop edge ({i},{i}) is not allowed")
        if min(i, j) < 1:
            raise ValueError("vertex labels must be positive integers")
        if m < 1:
            raise ValueError(f"edge multiplicity {m} must be >= 1")
        key = (i, j) if i < j else (j, i)
        edges[key] = edges.get(key, 0) + m
    legs: dict[int, int] = {}
    for v, n in leg_list:
        v, n = index(v), index(n)
        if v < 1:
            raise ValueError("vertex labels must be positive integers")
        if n < 1:
            raise ValueError(f"leg multiplicity {n} must be >= 1")
        legs[v] = legs.get(v, 0) + n
    return Multigraph(
        tuple((i, j, m) for (i, j), m in sorted(edges.items())),
        tuple(sorted(legs.items())),
    )


def edge(i: int, j: int, mult: int = 1) -> Multigraph:
    return make_multigraph([(i, j, mult)])


def leg(v: int, mult: int = 1) -> Multigraph:
    return make_multigraph([], [(v, mult)])


def compose(g1: Multigraph, g2: Multigraph) -> Multigraph:
    """Same-label product: edge and leg multiplicities add pointwise."""
    edges = g1.edge_dict()
    for key, m in g2.edge_dict().items():
        edges[key] = edges.get(key, 0) + m
    legs = g1.leg_dict()
    for v, n in g2.leg_dict().items():
        legs[v] = legs.get(v, 0) + n
    return Multigraph(
        tuple((i, j, m) for (i, j), m in sorted(edges.items())),
        tuple(sorted(legs.items())),
    )


def relabel(g: Multigraph, mapping: Mapping[int, int]) -> Multigraph:
    """Apply a vertex relabeling; must be injective and cover the support."""
    missing = [v for v in g.support if v not in mapping]
    if missing:
        raise ValueError(f"mapping does not cover support vertices {missing}")
    images = [mapping[v] for v in g.support]
    if len(set(images)) != len(images):
        raise ValueError("mapping must be injective on the support")
    if images and min(images) < 1:
        raise ValueError("vertex labels must be positive integers")
    return make_multigraph(
        [(mapping[i], mapping[j], m) for i, j, m in g.edges],
        [(mapping[v], n) for v, n in g.legs],
    )


def sort_key(g: Multigraph) -> tuple:
    """Deterministic total order used for canonical choice and printing."""
    return (len(g.support), g.legs, g.edges)


def _components(g: Multigraph) -> list[frozenset[int]]:
    adj: dict[int, set[int]] = defaultdict(set)
    for i, j, _ in g.edges:
        adj[i].add(j)
        adj[j].add(i)
    seen: set[int] = set()
    comps = []
    for start in g.support:
        if start in seen:
            continue
        stack, comp = [start], set()
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(adj[v] - comp)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def _canonical_component(g: Multigraph, comp: frozenset[int]):
    """Minimal encoding (k, legs, edges) of one edge-connected component."""
    legs = {v: n for v, n in g.legs if v in comp}
    comp_edges = [(i, j, m) for i, j, m in g.edges if i in comp]
    adj: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for i, j, m in comp_edges:
        adj[i].append((j, m))
        adj[j].append((i, m))
    k = len(comp)

    def initial_cells():
        groups = defaultdict(list)
        for v in comp:
            mults = tuple(sorted((m for _, m in adj[v]), reverse=True))
            groups[(legs.get(v, 0), sum(mults), mults)].append(v)
        return [sorted(groups[s]) for s in sorted(groups, reverse=True)]

    def refine(cells):
        while True:
            color = {v: c for c, cell in enumerate(cells) for v in cell}
            out, changed = [], False
            for cell in cells:
                if len(cell) == 1:
                    out.append(cell)
                    continue
                buckets = defaultdict(list)
                for v in cell:
                    key = tuple(
                        sorted(((m, color[u]) for u, m in adj[v]), reverse=True)
                    )
                    buckets[key].append(v)
                if len(buckets) > 1:
                    changed = True
                out.extend(sorted(buckets[key]) for key in sorted(buckets, reverse=True))
            if not changed:
                return out
            cells = out

    def encode(cells):
        label = {cell[0]: pos + 1 for pos, cell in enumerate(cells)}
        enc_legs = tuple(sorted((label[v], n) for v, n in legs.items()))
        enc_edges = tuple(
            sorted(
                (min(label[i], label[j]), max(label[i], label[j]), m)
                for i, j, m in comp_edges
            )
        )
        return (k, enc_legs, enc_edges)

    best = None

    def search(cells):
        nonlocal best
        for idx, cell in enumerate(cells):
            if len(cell) > 1:
                break
        else:
            enc = encode(cells)
            if best is None or enc < best:
                best = enc
            return
        for v in cells[idx]:
            rest = [u for u in cells[idx] if u != v]
            search(refine(cells[:idx] + [[v], rest] + cells[idx + 1 :]))

    search(refine(initial_cells()))
    return best


@functools.lru_cache(maxsize=None)
def canonicalize(g: Multigraph) -> Multigraph:
    """Canonical representative of the isomorphism class of ``g``.

    The support is relabeled to ``{1..k}``; two multigraphs related by any
    vertex bijection map to the same output, and the map is idempotent.
    Components are canonicalized independently and concatenated in encoding
    order, which also erases gaps left by unused labels.
    """
    if not g.edges and not g.legs:
        return g
    encodings = sorted(_canonical_component(g, comp) for comp in _components(g))
    edges, legs, offset = [], [], 0
    for k, enc_legs, enc_edges in encodings:
        legs.extend((v + offset, n) for v, n in enc_legs)
        edges.extend((i + offset, j + offset, m) for i, j, m in enc_edges)
        offset += k
    return Multigraph(tuple(sorted(edges)), tuple(sorted(legs)))


def enumerate_pairings(labels: Iterable[int]) -> list[Pairing]:
    """All pairings of the given ordered labels.

    Within each pair the earlier label comes first, and first members
    strictly increase across pairs, so each perfect matching appears exactly
    once; there are (2m-1)!! of them.  An odd number of labels gives an empty
    list (the contraction-annihilates case).
    """
    items = list(labels)
    if len(set(items)) != len(items):
        raise ValueError("labels must be distinct")
    if len(items) % 2:
        return []
    out: list[Pairing] = []

    def rec(rem, acc):
        if not rem:
            out.append(tuple(acc))
            return
        first = rem[0]
        for t in range(1, len(rem)):
            acc.append((first, rem[t]))
            rec(rem[1:t] + rem[t + 1 :], acc)
            acc.pop()

    rec(items, [])
    return out


class GraphPolynomial:
    """Finite linear combination of canonical multigraphs with exact signed
    arbitrary-precision integer coefficients.  Zero coefficients are never
    stored; all construction paths re-canonicalize their keys."""

    __slots__ = ("_terms",)

    def __init__(self, terms=()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Multigraph, int] = {}
        for g, c in items:
            if not isinstance(g, Multigraph):
                raise TypeError(f"expected Multigraph key, got {type(g).__name__}")
            c = index(c)
            if c == 0:
                continue
            key = canonicalize(g)
            tot = acc.get(key, 0) + c
            if tot:
                acc[key] = tot
            else:
                acc.pop(key, None)
        self._terms = acc

    @classmethod
    def _from_canonical(cls, terms: dict[Multigraph, int]) -> "GraphPolynomial":
        # Internal fast path: keys already canonical, zeros already dropped.
        p = object.__new__(cls)
        p._terms = terms
        return p

    @classmethod
    def zero(cls) -> "GraphPolynomial":
        return cls._from_canonical({})

    @classmethod
    def monomial(cls, g: Multigraph, coeff: int = 1) -> "GraphPolynomial":
        return cls(((g, coeff),))

    def items(self) -> list[tuple[Multigraph, int]]:
        """Terms as (canonical graph, coefficient), in :func:`sort_key` order."""
        return sorted(self._terms.items(), key=lambda t: sort_key(t[0]))

    def coefficient(self, g: Multigraph) -> int:
        return self._terms.get(canonicalize(g), 0)

    def coefficient_sum(self) -> int:
        """Value under the scalar evaluation sending every monomial to 1."""
        return sum(self._terms.values())

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if not isinstance(other, GraphPolynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __add__(self, other):
        if not isinstance(other, GraphPolynomial):
            return NotImplemented
        acc = dict(self._terms)
        for g, c in other._terms.items():
            tot = acc.get(g, 0) + c
            if tot:
                acc[g] = tot
            else:
                acc.pop(g, None)
        return GraphPolynomial._from_canonical(acc)

    def __neg__(self):
        return GraphPolynomial._from_canonical({g: -c for g, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, GraphPolynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, GraphPolynomial):
            acc: dict[Multigraph, int] = {}
            for g1, c1 in self._terms.items():
                for g2, c2 in other._terms.items():
                    key = canonicalize(compose(g1, g2))
                    tot = acc.get(key, 0) + c1 * c2
                    if tot:
                        acc[key] = tot
                    else:
                        acc.pop(key, None)
            return GraphPolynomial._from_canonical(acc)
        try:
            c = index(other)
        except TypeError:
            return NotImplemented
        if c == 0:
            return GraphPolynomial.zero()
        return GraphPolynomial._from_canonical(
            {g: c * v for g, v in self._terms.items()}
        )

    __rmul__ = __mul__

    def __repr__(self):
        return f"GraphPolynomial({len(self._terms)} terms)"


def poly_add(p: GraphPolynomial, q: GraphPolynomial) -> GraphPolynomial:
    return p + q


def poly_scale(p: GraphPolynomial, c: int) -> GraphPolynomial:
    return p * c


def poly_mul(p: GraphPolynomial, q: GraphPolynomial) -> GraphPolynomial:
    """Bilinear extension of :func:`compose` (same-label multiplication)."""
    return p * q
