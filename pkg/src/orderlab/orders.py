"""Strict partial orders, bi-orders, and small directed graphs.

Orders are over lab name strings.  Enumeration is exhaustive and intended
for n <= 5 elements (labeled strict partial order counts 1, 3, 19, 219,
4231 for n = 1..5).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class PartialOrder:
    """A strict partial order: irreflexive, antisymmetric, transitive."""

    elements: tuple[str, ...]
    relation: frozenset[tuple[str, str]]

    def __post_init__(self) -> None:
        elements = tuple(self.elements)
        relation = frozenset(self.relation)
        if len(set(elements)) != len(elements):
            raise ValueError(f"duplicate elements: {elements}")
        known = set(elements)
        for a, b in relation:
            if a not in known or b not in known:
                raise ValueError(f"pair ({a}, {b}) outside elements {elements}")
            if a == b:
                raise ValueError(f"relation is not irreflexive: ({a}, {b})")
            if (b, a) in relation:
                raise ValueError(f"relation is not antisymmetric: ({a}, {b}) and ({b}, {a})")
        for (a, b), (c, d) in itertools.product(relation, repeat=2):
            if b == c and (a, d) not in relation:
                raise ValueError(f"relation is not transitive: missing ({a}, {d})")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "relation", relation)

    @classmethod
    def empty(cls, elements: Sequence[str]) -> "PartialOrder":
        return cls(tuple(elements), frozenset())

    @classmethod
    def chain(cls, elements: Sequence[str]) -> "PartialOrder":
        """Total order with the given sequence from earliest to latest."""
        elements = tuple(elements)
        rel = {(elements[i], elements[j]) for i in range(len(elements)) for j in range(i + 1, len(elements))}
        return cls(elements, frozenset(rel))

    @classmethod
    def from_cover(cls, elements: Sequence[str], pairs: Iterable[tuple[str, str]]) -> "PartialOrder":
        """Build from generating pairs, taking the transitive closure."""
        rel = set(pairs)
        changed = True
        while changed:
            changed = False
            for (a, b), (c, d) in itertools.product(tuple(rel), repeat=2):
                if b == c and (a, d) not in rel:
                    rel.add((a, d))
                    changed = True
        return cls(tuple(elements), frozenset(rel))

    def predecessors(self, x: str) -> frozenset[str]:
        return frozenset(a for a, b in self.relation if b == x)

    def successors(self, x: str) -> frozenset[str]:
        return frozenset(b for a, b in self.relation if a == x)

    def reverse(self) -> "PartialOrder":
        return PartialOrder(self.elements, frozenset((b, a) for a, b in self.relation))

    def restrict(self, subset: Iterable[str]) -> "PartialOrder":
        subset = tuple(e for e in self.elements if e in set(subset))
        rel = frozenset((a, b) for a, b in self.relation if a in subset and b in subset)
        return PartialOrder(subset, rel)

    def linear_extension(self) -> tuple[str, ...]:
        """Deterministic topological order (lexicographic tie-break)."""
        remaining = set(self.elements)
        out: list[str] = []
        while remaining:
            ready = sorted(x for x in remaining if not (self.predecessors(x) & remaining))
            out.append(ready[0])
            remaining.discard(ready[0])
        return tuple(out)

    def sort_key(self) -> tuple:
        return (len(self.relation), tuple(sorted(self.relation)))

    def __str__(self) -> str:
        if not self.relation:
            return "(no relations)"
        return ", ".join(f"{a}<{b}" for a, b in sorted(self.relation))


@dataclass(frozen=True)
class BiOrder:
    """Equivalence class of a strict partial order and its full reversal."""

    representative: PartialOrder

    def canonical_relation(self) -> tuple[tuple[str, str], ...]:
        fwd = tuple(sorted(self.representative.relation))
        rev = tuple(sorted(self.representative.reverse().relation))
        return min(fwd, rev)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BiOrder):
            return NotImplemented
        return (sorted(self.representative.elements) == sorted(other.representative.elements)
                and self.canonical_relation() == other.canonical_relation())

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.representative.elements)), self.canonical_relation()))

    def __str__(self) -> str:
        return "{%s  ~  %s}" % (self.representative, self.representative.reverse())


@dataclass(frozen=True)
class DirectedGraph:
    """A small directed graph on named nodes; cycles allowed."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self) -> None:
        known = set(self.nodes)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) outside nodes {self.nodes}")

    def has_cycle(self) -> bool:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
        state: dict[str, int] = {}  # 0 visiting, 1 done

        def visit(u: str) -> bool:
            state[u] = 0
            for v in adj[u]:
                if state.get(v) == 0:
                    return True
                if v not in state and visit(v):
                    return True
            state[u] = 1
            return False

        return any(n not in state and visit(n) for n in self.nodes)

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(self.edges)


def enumerate_posets(elements: int | Sequence[str]) -> list[PartialOrder]:
    """All labeled strict partial orders on the given elements (n <= 5).

    The scan runs over every irreflexive relation as a bitmask, keeping the
    antisymmetric transitive ones; matrices are checked in vectorized
    chunks so n = 5 (2^20 candidates) stays fast.
    """
    if isinstance(elements, int):
        names: tuple[str, ...] = tuple(f"x{i}" for i in range(elements))
    else:
        names = tuple(elements)
    n = len(names)
    if n > 5:
        raise ValueError(f"poset enumeration supports at most 5 elements, got {n}")
    if n == 0:
        return [PartialOrder((), frozenset())]

    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    n_bits = len(pairs)
    found: list[PartialOrder] = []
    chunk = 1 << 16
    for start in range(0, 1 << n_bits, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n_bits), dtype=np.int64)
        rel = np.zeros((idx.size, n, n), dtype=bool)
        for bit, (i, j) in enumerate(pairs):
            rel[:, i, j] = (idx >> bit) & 1
        anti = ~(rel & rel.transpose(0, 2, 1)).any(axis=(1, 2))
        comp = np.einsum("mik,mkj->mij", rel.astype(np.uint8), rel.astype(np.uint8)) > 0
        trans = ~(comp & ~rel).any(axis=(1, 2))
        for k in np.nonzero(anti & trans)[0]:
            pr = frozenset((names[i], names[j]) for (i, j) in pairs if rel[k, i, j])
            found.append(PartialOrder(names, pr))
    found.sort(key=PartialOrder.sort_key)
    return found
