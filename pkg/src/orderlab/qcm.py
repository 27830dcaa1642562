"""Quantum causal models: DAGs of quantum nodes and the Markov condition.

A model assigns each node a channel from its parents' outgoing systems to
its own incoming system (as a plain Choi operator); all channels must
pairwise commute once embedded on the full space, and the process operator
is their product.  Influence in a unitary channel is read off the marginal
Choi operator: an input has no influence on an output exactly when that
marginal factorizes as identity on the input times something else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .orders import DirectedGraph
from .process import Lab
from .spaces import (
    DenseOperator,
    NotUnitaryError,
    SpaceLabel,
    embed,
    identity,
    kraus_from_choi,
    partial_trace,
    random_cptp_choi,
    random_density_matrix,
    tensor,
    trace_and_replace,
)

QuantumNode = Lab

COMMUTATION_TOL = 1e-8
FACTORIZATION_TOL = 1e-7


@dataclass(frozen=True)
class DAG:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self) -> None:
        graph = DirectedGraph(self.nodes, frozenset(self.edges))
        if graph.has_cycle():
            raise ValueError(f"graph has a directed cycle: {sorted(self.edges)}")
        object.__setattr__(self, "edges", frozenset(self.edges))

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if (n, node) in self.edges)

    def reverse(self) -> "DAG":
        return DAG(self.nodes, frozenset((b, a) for a, b in self.edges))


def _full_factors(nodes: Sequence[QuantumNode]) -> tuple[SpaceLabel, ...]:
    factors: list[SpaceLabel] = []
    for node in nodes:
        factors.extend([node.in_space, node.out_space])
    return tuple(factors)


@dataclass(frozen=True)
class ProcessOperator:
    """Operator over all node in/out spaces; Hermitian by construction."""

    operator: DenseOperator

    def __post_init__(self) -> None:
        if not self.operator.is_hermitian(1e-8):
            raise ValueError("process operator must be Hermitian")


@dataclass(frozen=True)
class QuantumCausalModel:
    nodes: tuple[QuantumNode, ...]
    dag: DAG
    channels: Mapping[str, DenseOperator]

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        names = tuple(n.name for n in nodes)
        if set(names) != set(self.dag.nodes):
            raise ValueError("model nodes and DAG nodes differ")
        by_name = {n.name: n for n in nodes}
        channels = dict(self.channels)
        if set(channels) != set(names):
            raise ValueError("need exactly one channel per node")
        for name in names:
            node = by_name[name]
            expected = (node.in_space,) + tuple(by_name[p].out_space for p in self.dag.parents(name))
            ch = channels[name]
            if ch.factors != expected:
                raise ValueError(f"channel for {name}: factors {ch.names}, expected "
                                 f"{tuple(s.name for s in expected)}")
            evals = np.linalg.eigvalsh((ch.matrix + ch.matrix.conj().T) / 2)
            if evals.min() < -1e-8:
                raise ValueError(f"channel for {name} is not PSD")
            if len(expected) > 1:
                traced = partial_trace(ch, [s.name for s in expected[1:]])
                if np.max(np.abs(traced.matrix - np.eye(traced.dim))) > 1e-7:
                    raise ValueError(f"channel for {name} is not trace preserving onto its parents")
            elif abs(np.trace(ch.matrix) - 1.0) > 1e-7:
                raise ValueError(f"root state for {name} must have unit trace")
        full = _full_factors(nodes)
        embedded = [embed(channels[name], full) for name in names]
        for i in range(len(embedded)):
            for j in range(i + 1, len(embedded)):
                comm = embedded[i].matrix @ embedded[j].matrix - embedded[j].matrix @ embedded[i].matrix
                if np.max(np.abs(comm)) > COMMUTATION_TOL:
                    raise ValueError(f"channels for {names[i]} and {names[j]} do not commute")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "channels", channels)

    def node(self, name: str) -> QuantumNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


def build_process_operator(m: QuantumCausalModel) -> ProcessOperator:
    """Product of the embedded node channels (order-free by commutation)."""
    full = _full_factors(m.nodes)
    out = identity(full).matrix
    for node in m.nodes:
        out = out @ embed(m.channels[node.name], full).matrix
    return ProcessOperator(DenseOperator(full, out))


def verify_markov(sigma: ProcessOperator, m: QuantumCausalModel,
                  tol: float = FACTORIZATION_TOL) -> bool:
    """True when sigma factorizes as the model's product of channels."""
    built = build_process_operator(m)
    if sigma.operator.names != built.operator.names:
        return False
    return bool(np.max(np.abs(sigma.operator.matrix - built.operator.matrix)) <= tol)


def influence_graph(u_choi: DenseOperator, inputs: Sequence[str], outputs: Sequence[str],
                    tol: float = COMMUTATION_TOL) -> DAG:
    """Influence structure of a unitary channel from its Choi operator.

    Edge a -> b is absent exactly when the marginal Choi operator onto
    output b is of the form I_a (x) K.  The result is acyclic by
    construction since inputs strictly precede outputs.
    """
    u_choi = u_choi.reordered(list(inputs) + list(outputs))
    d_in = 1
    for name in inputs:
        d_in *= u_choi.factors[u_choi.factor_index(name)].dim
    kraus = kraus_from_choi(u_choi.matrix, d_in, u_choi.dim // d_in, atol=1e-7)
    if len(kraus) != 1 or np.max(np.abs(kraus[0].conj().T @ kraus[0] - np.eye(d_in))) > 1e-6:
        raise NotUnitaryError("influence graphs are defined for unitary channels")
    edges = set()
    for b in outputs:
        marginal = partial_trace(u_choi, list(inputs) + [b])
        for a in inputs:
            replaced = trace_and_replace(marginal, [a])
            if np.max(np.abs(marginal.matrix - replaced.matrix)) > tol:
                edges.add((a, b))
    return DAG(tuple(inputs) + tuple(outputs), frozenset(edges))


def markov_discover(sigma: ProcessOperator, nodes: Sequence[QuantumNode], dag: DAG,
                    tol: float = FACTORIZATION_TOL) -> QuantumCausalModel | None:
    """Extract candidate channels by partial traces, then verify.

    The candidate for node X is the marginal of sigma on in(X) and the
    parents' out spaces, rescaled to channel normalization.  Any extraction
    or verification failure reports None, never a crash.
    """
    nodes = tuple(nodes)
    by_name = {n.name: n for n in nodes}
    total = float(np.real(np.trace(sigma.operator.matrix)))
    if total <= 0:
        return None
    channels = {}
    for node in nodes:
        parents = dag.parents(node.name)
        keep_factors = [node.in_space.name] + [by_name[p].out_space.name for p in parents]
        cand = partial_trace(sigma.operator, keep_factors).reordered(keep_factors)
        d_parents = 1
        for p in parents:
            d_parents *= by_name[p].out_space.dim
        cand = cand * (d_parents / total)
        channels[node.name] = cand
    try:
        model = QuantumCausalModel(nodes, dag, channels)
    except ValueError:
        return None
    if not verify_markov(sigma, model, tol):
        return None
    return model


def random_markov_model(seed: int, pattern: str = "chain") -> QuantumCausalModel:
    """Random three-node model with commuting channels by construction.

    Patterns: ``chain`` (A -> B -> C), ``fork`` (A -> B, A -> C; A's output
    splits into one qubit per child), ``collider`` (A -> C <- B).
    """
    rng = np.random.default_rng(seed)
    if pattern == "chain":
        a, b, c = Lab.qubit("A"), Lab.qubit("B"), Lab.qubit("C")
        dag = DAG(("A", "B", "C"), frozenset({("A", "B"), ("B", "C")}))
        ch_a = DenseOperator((a.in_space,), random_density_matrix(2, rng))
        ch_b = DenseOperator((a.out_space, b.in_space), random_cptp_choi(2, 2, rng)) \
            .reordered([b.in_space.name, a.out_space.name])
        ch_c = DenseOperator((b.out_space, c.in_space), random_cptp_choi(2, 2, rng)) \
            .reordered([c.in_space.name, b.out_space.name])
        return QuantumCausalModel((a, b, c), dag, {"A": ch_a, "B": ch_b, "C": ch_c})
    if pattern == "fork":
        a = Lab(name="A", in_space=SpaceLabel("A_in", 2), out_space=SpaceLabel("A_out", 4))
        b, c = Lab.qubit("B"), Lab.qubit("C")
        dag = DAG(("A", "B", "C"), frozenset({("A", "B"), ("A", "C")}))
        ch_a = DenseOperator((a.in_space,), random_density_matrix(2, rng))
        # A's 4-dim output is virtually two qubits, one feeding each child
        q1, q2 = SpaceLabel("q1", 2), SpaceLabel("q2", 2)
        j_b = DenseOperator((q1, b.in_space), random_cptp_choi(2, 2, rng))
        j_b = tensor(j_b, identity([q2])).reordered([b.in_space.name, "q1", "q2"])
        ch_b = DenseOperator((b.in_space, a.out_space), j_b.matrix)
        j_c = DenseOperator((q2, c.in_space), random_cptp_choi(2, 2, rng))
        j_c = tensor(identity([q1]), j_c).reordered([c.in_space.name, "q1", "q2"])
        ch_c = DenseOperator((c.in_space, a.out_space), j_c.matrix)
        return QuantumCausalModel((a, b, c), dag, {"A": ch_a, "B": ch_b, "C": ch_c})
    if pattern == "collider":
        a, b = Lab.qubit("A"), Lab.qubit("B")
        c = Lab.qubit("C")
        dag = DAG(("A", "B", "C"), frozenset({("A", "C"), ("B", "C")}))
        ch_a = DenseOperator((a.in_space,), random_density_matrix(2, rng))
        ch_b = DenseOperator((b.in_space,), random_density_matrix(2, rng))
        joint = random_cptp_choi(4, 2, rng)  # (A_out x B_out) -> C_in
        j_c = DenseOperator((a.out_space, b.out_space, c.in_space), joint) \
            .reordered([c.in_space.name, a.out_space.name, b.out_space.name])
        return QuantumCausalModel((a, b, c), dag, {"A": ch_a, "B": ch_b, "C": j_c})
    raise ValueError(f"unknown pattern {pattern!r}")
