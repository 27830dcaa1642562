"""Observational versus interventionist descriptions of chain processes.

An interventionist description fixes inputs and lists the operations that
carry each variable to the next; the observational description is the
joint distribution over all variables.  Reversal inverts every operation
and flips the wiring, and for invertible chains driven by uniform inputs
the observational table is reversal-invariant, which is what lets causal
order be read as a bi-order rather than a directed order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .orders import BiOrder, PartialOrder
from .structure import Behavior, CausalOrderVerdict


class NotInvertibleError(ValueError):
    """A chain operation has no inverse (non-bijective or non-unitary)."""


@dataclass(frozen=True)
class ChainOperation:
    """One step of a chain: a function table or a unitary on d levels."""

    name: str
    dim: int
    table: tuple[int, ...] | None = None
    matrix: np.ndarray | None = None
    inverted: bool = False

    def __post_init__(self) -> None:
        if (self.table is None) == (self.matrix is None):
            raise ValueError(f"operation {self.name!r}: give either a table or a matrix")
        if self.table is not None:
            table = tuple(int(v) for v in self.table)
            if len(table) != self.dim or any(v < 0 or v >= self.dim for v in table):
                raise ValueError(f"operation {self.name!r}: table must map 0..{self.dim - 1}")
            object.__setattr__(self, "table", table)
        else:
            mat = np.array(self.matrix, dtype=np.complex128, copy=True)
            if mat.shape != (self.dim, self.dim):
                raise ValueError(f"operation {self.name!r}: matrix must be {self.dim} x {self.dim}")
            if np.max(np.abs(mat.conj().T @ mat - np.eye(self.dim))) > 1e-9:
                raise ValueError(f"operation {self.name!r}: matrix is not unitary")
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)

    @property
    def is_invertible(self) -> bool:
        if self.matrix is not None:
            return True
        return sorted(self.table) == list(range(self.dim))

    def invert(self) -> "ChainOperation":
        if not self.is_invertible:
            raise NotInvertibleError(f"operation {self.name!r} is not a bijection")
        if self.matrix is not None:
            return replace(self, matrix=self.matrix.conj().T, inverted=not self.inverted)
        inv = [0] * self.dim
        for x, y in enumerate(self.table):
            inv[y] = x
        return replace(self, table=tuple(inv), inverted=not self.inverted)

    def kernel(self) -> np.ndarray:
        """Row-stochastic transition matrix K[i, j] = P(out = j | in = i)."""
        k = np.zeros((self.dim, self.dim))
        if self.table is not None:
            for x, y in enumerate(self.table):
                k[x, y] = 1.0
        else:
            k = np.abs(self.matrix.T) ** 2  # Born transition probabilities
        return k

    def display_name(self) -> str:
        return f"{self.name}^-1" if self.inverted else self.name

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChainOperation):
            return NotImplemented
        if (self.name, self.dim, self.inverted) != (other.name, other.dim, other.inverted):
            return False
        if (self.table is None) != (other.table is None):
            return False
        if self.table is not None:
            return self.table == other.table
        return bool(np.array_equal(self.matrix, other.matrix))


def permutation_op(name: str, table: Sequence[int]) -> ChainOperation:
    return ChainOperation(name, len(tuple(table)), table=tuple(table))


def unitary_op(name: str, matrix: np.ndarray) -> ChainOperation:
    matrix = np.asarray(matrix, dtype=np.complex128)
    return ChainOperation(name, matrix.shape[0], matrix=matrix)


@dataclass(frozen=True)
class ISDescription:
    """A chain of operations carrying variable v_i into v_{i+1}."""

    operations: tuple[ChainOperation, ...]
    variables: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ops = tuple(self.operations)
        if not ops:
            raise ValueError("a chain needs at least one operation")
        dims = {op.dim for op in ops}
        if len(dims) != 1:
            raise ValueError(f"all chain operations must share one dimension, got {sorted(dims)}")
        names = [op.name for op in ops]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate operation names: {names}")
        variables = tuple(self.variables) or tuple(f"v{i}" for i in range(len(ops) + 1))
        if len(variables) != len(ops) + 1 or len(set(variables)) != len(variables):
            raise ValueError("need one unique variable name per wire (n_ops + 1)")
        object.__setattr__(self, "operations", ops)
        object.__setattr__(self, "variables", variables)

    @property
    def dim(self) -> int:
        return self.operations[0].dim

    @property
    def n_ops(self) -> int:
        return len(self.operations)


@dataclass(frozen=True)
class OSDistribution:
    """Joint probability table over the chain variables."""

    variables: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        table = np.array(self.table, dtype=float, copy=True)
        if abs(table.sum() - 1.0) > 1e-9 or table.min() < -1e-12:
            raise ValueError("joint table must be a probability distribution")
        table.setflags(write=False)
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "table", table)


def os_from_is(d: ISDescription, input_dist: np.ndarray | None = None) -> OSDistribution:
    """Push the input distribution through the chain (uniform by default).

    Unitary steps contribute their Born transition kernels, so the table is
    the joint statistics of transparent level measurements between steps.
    """
    dim = d.dim
    p0 = np.full(dim, 1.0 / dim) if input_dist is None else np.asarray(input_dist, dtype=float)
    if p0.shape != (dim,) or abs(p0.sum() - 1.0) > 1e-9:
        raise ValueError("input distribution must be a length-d probability vector")
    table = p0
    for op in d.operations:
        table = table[..., None] * op.kernel()[(None,) * (table.ndim - 1) + (slice(None), slice(None))]
    return OSDistribution(d.variables, table)


def reverse_is(d: ISDescription) -> ISDescription:
    """Invert every operation and flip the wiring direction."""
    ops = tuple(op.invert() for op in reversed(d.operations))
    return ISDescription(ops, tuple(reversed(d.variables)))


def chain_behavior(d: ISDescription) -> Behavior:
    """Interventional statistics of the chain, one lab per variable.

    Each lab measures the arriving variable (its outcome) and feeds its
    setting forward, so lab i's outcome distribution is the kernel of
    operation i applied to lab i-1's setting.  The first lab only prepares.
    """
    dim = d.dim
    n_vars = d.n_ops + 1
    settings = (dim,) * n_vars
    outcomes = (1,) + (dim,) * d.n_ops
    table = np.ones(settings + outcomes)
    for i, op in enumerate(d.operations):
        k = op.kernel()
        shape = [1] * (2 * n_vars)
        shape[i] = dim  # setting axis of lab i (the feeder)
        shape[n_vars + 1 + i] = dim  # outcome axis of lab i+1
        table = table * k.reshape(shape)
    return Behavior(d.variables, settings, outcomes, table)


def causal_reversibility_check(d: ISDescription, tol: float = 1e-9) -> bool:
    """Does reversal preserve the observational table and the causal order?

    Requires every operation invertible (reported via
    :class:`NotInvertibleError` otherwise).  True when the uniform-input
    joint tables of the chain and its reversal agree and the reversed chain
    satisfies the signal requirement under the reversed total order.
    """
    for op in d.operations:
        if not op.is_invertible:
            raise NotInvertibleError(f"operation {op.name!r} is not invertible; "
                                     "reversal is defined for bijective chains only")
    forward = os_from_is(d)
    rev = reverse_is(d)
    backward = os_from_is(rev)
    flipped = np.transpose(backward.table, tuple(reversed(range(backward.table.ndim))))
    if float(np.max(np.abs(forward.table - flipped))) > tol:
        return False
    reversed_order = PartialOrder.chain(rev.variables)
    from .structure import signal_requirement_check
    return signal_requirement_check(chain_behavior(rev), reversed_order)


def biorder_of(verdict: CausalOrderVerdict) -> BiOrder:
    """Bi-order class of the witnessing compatible order.

    Uses the first compatible order of the verdict (enumeration is sorted,
    and for chains the compatible order is unique).
    """
    if not verdict.exhibits:
        raise ValueError("the verdict does not exhibit causal order")
    return BiOrder(verdict.compatible_orders[0])
