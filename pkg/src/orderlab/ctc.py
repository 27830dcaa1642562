"""Classical process functions on closed timelike curves.

Labs carry one bit each.  A process function maps the joint lab outputs
back to the joint lab inputs; it is consistent when every choice of local
operations leaves exactly one fixed point (no contradiction, no
ambiguity).  Joint bit vectors are encoded little-endian: bit i of the
integer is lab i's value.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .orders import DirectedGraph

# per-lab operations as (f(0), f(1)) pairs
OP_TABLE: tuple[tuple[int, int], ...] = ((0, 0), (1, 1), (0, 1), (1, 0))
OP_NAMES = {(0, 0): "const0", (1, 1): "const1", (0, 1): "id", (1, 0): "flip"}
OPS_BY_NAME = {v: k for k, v in OP_NAMES.items()}


@dataclass(frozen=True)
class ProcessFunction:
    n_labs: int
    table: tuple[int, ...]  # table[y] = joint input bits fed back for joint output y

    def __post_init__(self) -> None:
        size = 1 << self.n_labs
        table = tuple(int(v) for v in self.table)
        if len(table) != size:
            raise ValueError(f"table needs {size} entries for {self.n_labs} labs, got {len(table)}")
        if any(v < 0 or v >= size for v in table):
            raise ValueError("table values out of range")
        object.__setattr__(self, "table", table)

    def component(self, i: int, y: int) -> int:
        return (self.table[y] >> i) & 1


@dataclass(frozen=True)
class LocalOperationSet:
    ops: tuple[tuple[int, int], ...]  # per-lab (f(0), f(1))

    def apply(self, x: int) -> int:
        y = 0
        for i, f in enumerate(self.ops):
            y |= f[(x >> i) & 1] << i
        return y

    def __str__(self) -> str:
        return ",".join(OP_NAMES[f] for f in self.ops)

    @classmethod
    def from_names(cls, names: str | list[str]) -> "LocalOperationSet":
        parts = names.split(",") if isinstance(names, str) else list(names)
        try:
            return cls(tuple(OPS_BY_NAME[p.strip()] for p in parts))
        except KeyError as exc:
            raise ValueError(f"unknown operation {exc.args[0]!r}; use const0/const1/id/flip") from exc


@dataclass(frozen=True)
class ConsistencyReport:
    valid: bool
    counterexample: tuple[LocalOperationSet, int] | None  # (ops, fixed point count)


def iter_operation_sets(n: int):
    for combo in itertools.product(OP_TABLE, repeat=n):
        yield LocalOperationSet(combo)


def fixed_point_count(p: ProcessFunction, ops: LocalOperationSet) -> int:
    """Fixed points of x -> w(f(x)) on the joint input bits."""
    if len(ops.ops) != p.n_labs:
        raise ValueError(f"operation set has {len(ops.ops)} labs, process has {p.n_labs}")
    return sum(1 for x in range(1 << p.n_labs) if p.table[ops.apply(x)] == x)


def check_consistency(p: ProcessFunction) -> ConsistencyReport:
    """Exhaustive scan over all 4^n local operation sets (n <= 4).

    A counterexample with 0 fixed points is a contradiction, 2 or more an
    ambiguity; either invalidates the process function.
    """
    if p.n_labs > 4:
        raise ValueError("consistency scan supports at most 4 labs")
    for ops in iter_operation_sets(p.n_labs):
        count = fixed_point_count(p, ops)
        if count != 1:
            return ConsistencyReport(False, (ops, count))
    return ConsistencyReport(True, None)


def signalling_structure(p: ProcessFunction) -> DirectedGraph:
    """Edge j -> i when input component i depends on output bit j."""
    n = p.n_labs
    edges = set()
    for j in range(n):
        for i in range(n):
            if any(p.component(i, y) != p.component(i, y ^ (1 << j)) for y in range(1 << n)):
                edges.add((str(j), str(i)))
    return DirectedGraph(tuple(str(k) for k in range(n)), frozenset(edges))


def is_trivial(p: ProcessFunction) -> bool:
    """True when the dynamics reduce to a fixed-order process.

    Equivalent to the dependence graph being acyclic: each lab's input then
    depends only on outputs of strictly earlier labs (constants are the
    empty-dependence case).
    """
    return not signalling_structure(p).has_cycle()


def _opset_maps(n: int) -> np.ndarray:
    """All composed input->output maps, most restrictive op-sets first."""
    size = 1 << n
    rows = []
    for combo in itertools.product(OP_TABLE, repeat=n):
        f = np.zeros(size, dtype=np.uint8)
        for x in range(size):
            y = 0
            for i, fn in enumerate(combo):
                y |= fn[(x >> i) & 1] << i
            f[x] = y
        n_const = sum(1 for fn in combo if fn in ((0, 0), (1, 1)))
        rows.append((n_const, f))
    rows.sort(key=lambda r: r[0])  # bijective op-sets reject the most candidates
    return np.array([f for _, f in rows])


def enumerate_valid(n: int, chunk: int = 1 << 20) -> list[ProcessFunction]:
    """All valid process functions on n bit labs by exhaustive search (n <= 3).

    Candidates are scanned in vectorized chunks; each op-set prunes the
    survivors (a candidate must leave exactly one fixed point under every
    op-set), so the 8^8 candidates for n = 3 run in seconds.
    """
    if n > 3:
        raise ValueError("exhaustive enumeration supports at most 3 labs")
    size = 1 << n
    total = size ** size
    opmaps = _opset_maps(n)
    points = np.arange(size, dtype=np.uint8)
    shifts = size ** np.arange(size, dtype=np.int64)
    survivors: list[np.ndarray] = []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        tables = ((idx[:, None] // shifts[None, :]) % size).astype(np.uint8)
        for f in opmaps:
            loop = tables[:, f]  # x -> w(f(x)) for every candidate
            alive = (loop == points[None, :]).sum(axis=1) == 1
            tables = tables[alive]
            if tables.shape[0] == 0:
                break
        if tables.shape[0]:
            survivors.append(tables)
    found = [ProcessFunction(n, tuple(int(v) for v in row)) for t in survivors for row in t]
    found.sort(key=lambda p: p.table)
    return found
