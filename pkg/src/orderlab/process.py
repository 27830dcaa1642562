"""Laboratories, instruments, process matrices, validity, and the Born rule.

The probability rule is ``p = Tr[W . (J_1 (x) ... (x) J_n)^T]`` with the
plain column Choi operators of :mod:`orderlab.spaces`.  Under this pairing
the process matrix of a fixed-order circuit is assembled without any
transposes: a single laboratory fed the state ``rho`` has
``W = rho (x) I_out``, and a chain inserts each connecting channel's Choi
operator on the (out_i, in_{i+1}) factors.  The trace normalization
``Tr W = prod_i dim(out_i)`` is a convention matching the unnormalized
Choi convention, not a law; it is what makes deterministic instruments
sum to probability one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .orders import PartialOrder
from .spaces import (
    DenseOperator,
    SpaceLabel,
    SpaceMismatchError,
    choi_matrix_of_kraus,
    identity,
    ket_to_dm,
    haar_random_unitary,
    partial_trace,
    random_instrument_chois,
    tensor,
    tomographic_states,
)

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Lab:
    """An agent's laboratory: one incoming and one outgoing system."""

    name: str
    in_space: SpaceLabel
    out_space: SpaceLabel

    def __post_init__(self) -> None:
        if self.in_space.name == self.out_space.name:
            raise ValueError(f"lab {self.name!r} needs distinct in/out space labels")

    @classmethod
    def qubit(cls, name: str) -> "Lab":
        return cls(name, SpaceLabel(f"{name}_in", 2), SpaceLabel(f"{name}_out", 2))

    @classmethod
    def of_dims(cls, name: str, d_in: int, d_out: int) -> "Lab":
        return cls(name, SpaceLabel(f"{name}_in", d_in), SpaceLabel(f"{name}_out", d_out))

    @property
    def d_in(self) -> int:
        return self.in_space.dim

    @property
    def d_out(self) -> int:
        return self.out_space.dim


@dataclass(frozen=True)
class Instrument:
    """One CP map (Choi operator) per outcome; the sum is trace preserving."""

    lab: str
    cp_maps: tuple[DenseOperator, ...]

    @property
    def n_outcomes(self) -> int:
        return len(self.cp_maps)

    def validate(self, lab: Lab, tol: float = DEFAULT_TOL) -> None:
        expected = (lab.in_space.name, lab.out_space.name)
        total = np.zeros((lab.d_in * lab.d_out,) * 2, dtype=np.complex128)
        for choi in self.cp_maps:
            if choi.names != expected:
                raise SpaceMismatchError(f"instrument on {self.lab}: factors {choi.names}, expected {expected}")
            evals = np.linalg.eigvalsh((choi.matrix + choi.matrix.conj().T) / 2)
            if evals.min() < -tol * 10:
                raise ValueError(f"instrument on {self.lab}: CP map not PSD (min eig {evals.min():.2e})")
            total = total + choi.matrix
        reduced = partial_trace(DenseOperator((lab.in_space, lab.out_space), total), [lab.in_space.name])
        if np.max(np.abs(reduced.matrix - np.eye(lab.d_in))) > max(tol * 100, 1e-7):
            raise ValueError(f"instrument on {self.lab}: outcome sum is not trace preserving")


@dataclass(frozen=True)
class ProcessMatrix:
    """A higher-order map from local operations to outcome probabilities."""

    labs: tuple[Lab, ...]
    w: DenseOperator

    def __post_init__(self) -> None:
        labs = tuple(self.labs)
        names = [lab.name for lab in labs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate lab names: {names}")
        expected = []
        for lab in labs:
            expected.extend([lab.in_space, lab.out_space])
        if self.w.factors != tuple(expected):
            raise SpaceMismatchError(
                f"W factors {self.w.names} do not match interleaved lab spaces "
                f"{tuple(s.name for s in expected)}")
        object.__setattr__(self, "labs", labs)

    @property
    def lab_names(self) -> tuple[str, ...]:
        return tuple(lab.name for lab in self.labs)

    def lab(self, name: str) -> Lab:
        for lab in self.labs:
            if lab.name == name:
                return lab
        raise KeyError(name)

    @property
    def out_dim_product(self) -> int:
        d = 1
        for lab in self.labs:
            d *= lab.d_out
        return d


@dataclass(frozen=True)
class ValidityReport:
    psd_ok: bool
    trace_ok: bool
    normalization_ok: bool
    max_normalization_deviation: float
    min_eigenvalue: float
    trace_value: float

    @property
    def valid(self) -> bool:
        return self.psd_ok and self.trace_ok and self.normalization_ok


def _resolve_choice(p: ProcessMatrix,
                    choice: Mapping[str, DenseOperator] | Sequence[DenseOperator]) -> list[DenseOperator]:
    if isinstance(choice, Mapping):
        missing = [lab.name for lab in p.labs if lab.name not in choice]
        if missing:
            raise SpaceMismatchError(f"no CP map supplied for labs {missing}")
        maps = [choice[lab.name] for lab in p.labs]
    else:
        maps = list(choice)
        if len(maps) != len(p.labs):
            raise SpaceMismatchError(f"expected {len(p.labs)} CP maps, got {len(maps)}")
    for lab, op in zip(p.labs, maps):
        if op.names != (lab.in_space.name, lab.out_space.name):
            raise SpaceMismatchError(
                f"CP map for lab {lab.name} has factors {op.names}, "
                f"expected {(lab.in_space.name, lab.out_space.name)}")
    return maps


def born_probability(p: ProcessMatrix,
                     choice: Mapping[str, DenseOperator] | Sequence[DenseOperator]) -> float:
    """Outcome probability ``Tr[W . (x)_i Choi_i^T]`` for one CP map per lab."""
    maps = _resolve_choice(p, choice)
    k = maps[0].matrix
    for op in maps[1:]:
        k = np.kron(k, op.matrix)
    val = complex(np.einsum("ij,ij->", p.w.matrix, k))
    if abs(val.imag) > 1e-8:
        raise ValueError(f"probability has imaginary part {val.imag:.2e}; non-Hermitian inputs?")
    return float(val.real)


def born_table(p: ProcessMatrix, stacks: Sequence[np.ndarray]) -> np.ndarray:
    """Contract W against per-lab arrays of Choi matrices.

    ``stacks[i]`` has shape (settings_i, outcomes_i, D_i, D_i) with
    D_i = d_in*d_out of lab i.  Returns the probability table with axes
    (settings_1..settings_n, outcomes_1..outcomes_n).
    """
    n = len(p.labs)
    lab_dims = [lab.d_in * lab.d_out for lab in p.labs]
    t = p.w.matrix.reshape(tuple(lab_dims) + tuple(lab_dims))
    for i, stack in enumerate(stacks):
        row, col = 2 * i, n + i
        t = np.tensordot(stack, t, axes=([2, 3], [row, col]))
    # axes are now (S_n, O_n, ..., S_1, O_1); flip to settings-major order
    perm_settings = [2 * (n - 1 - i) for i in range(n)]
    perm_outcomes = [2 * (n - 1 - i) + 1 for i in range(n)]
    table = t.transpose(perm_settings + perm_outcomes)
    if np.max(np.abs(table.imag)) > 1e-8:
        raise ValueError("probability table has a significant imaginary part")
    return np.ascontiguousarray(table.real)


# ---------------------------------------------------------------------------
# Instrument constructors

def measure_and_reprepare(lab: Lab,
                          effects: Sequence[np.ndarray],
                          preparations: np.ndarray | Sequence[np.ndarray]) -> Instrument:
    """Instrument that applies a POVM and re-prepares a fixed state per outcome.

    The CP map for outcome k is ``rho -> Tr[F_k rho] tau_k`` with Choi
    ``F_k^T (x) tau_k``.
    """
    preps: list[np.ndarray]
    if isinstance(preparations, np.ndarray) and preparations.ndim == 2:
        preps = [preparations] * len(effects)
    else:
        preps = list(preparations)  # type: ignore[arg-type]
        if len(preps) != len(effects):
            raise ValueError("need one preparation per POVM element")
    maps = []
    for f, tau in zip(effects, preps):
        choi = np.kron(np.asarray(f).T, np.asarray(tau))
        maps.append(DenseOperator((lab.in_space, lab.out_space), choi))
    return Instrument(lab.name, tuple(maps))


def trace_and_prepare(lab: Lab, state: np.ndarray) -> Instrument:
    """Single-outcome instrument: discard the input, prepare ``state``."""
    return measure_and_reprepare(lab, [np.eye(lab.d_in, dtype=np.complex128)], state)


def channel_instrument(lab: Lab, choi: np.ndarray) -> Instrument:
    """Single-outcome instrument applying a fixed channel."""
    return Instrument(lab.name, (DenseOperator((lab.in_space, lab.out_space), choi),))


def projective_measurement(lab: Lab, basis: Sequence[np.ndarray] | None = None,
                           reprepare: np.ndarray | None = None) -> Instrument:
    """Measure in an orthonormal basis (default computational), re-prepare."""
    if basis is None:
        basis = [np.eye(lab.d_in, dtype=np.complex128)[:, j] for j in range(lab.d_in)]
    tau = reprepare if reprepare is not None else np.eye(lab.d_out, dtype=np.complex128) / lab.d_out
    return measure_and_reprepare(lab, [ket_to_dm(b) for b in basis], tau)


def random_instrument(lab: Lab, rng: np.random.Generator, n_outcomes: int = 2) -> Instrument:
    chois = random_instrument_chois(lab.d_in, lab.d_out, n_outcomes, rng)
    return Instrument(lab.name, tuple(DenseOperator((lab.in_space, lab.out_space), j) for j in chois))


def tp_spanning_chois(d_in: int, d_out: int) -> list[np.ndarray]:
    """CPTP Choi matrices that affinely span the trace-preserving slice.

    Starts from the fully depolarizing channel ``I (x) I/d_out`` and adds a
    scaled Hermitian basis of the traceless-on-output directions, keeping
    every member PSD.
    """
    d = d_in * d_out
    j0 = np.kron(np.eye(d_in), np.eye(d_out) / d_out).astype(np.complex128)
    family = [j0]
    basis: list[np.ndarray] = []
    for a in range(d):
        for b in range(a, d):
            if a == b:
                h = np.zeros((d, d), dtype=np.complex128)
                h[a, a] = 1.0
                basis.append(h)
            else:
                h = np.zeros((d, d), dtype=np.complex128)
                h[a, b] = h[b, a] = 1.0
                basis.append(h)
                h = np.zeros((d, d), dtype=np.complex128)
                h[a, b] = -1j
                h[b, a] = 1j
                basis.append(h)
    seen_rank = 0
    kept_flat: list[np.ndarray] = []
    for h in basis:
        h4 = h.reshape(d_in, d_out, d_in, d_out)
        tr_out = np.einsum("iaja->ij", h4)
        delta = h - np.kron(tr_out, np.eye(d_out) / d_out)
        if np.max(np.abs(delta)) < 1e-12:
            continue
        kept_flat.append(delta.reshape(-1))
        rank = np.linalg.matrix_rank(np.array(kept_flat), tol=1e-10)
        if rank == seen_rank:
            kept_flat.pop()
            continue
        seen_rank = rank
        norm = np.linalg.norm(delta, 2)
        family.append(j0 + delta * (1.0 / (2 * d_out * norm)))
    return family


def ic_instrument_family(lab: Lab) -> list[Instrument]:
    """Tomographically complete instrument settings for one lab.

    Measure-and-reprepare settings span every ``I (x) tau`` total map and
    give outcome statistics that are tomographic on the input; the
    conditional re-preparation settings extend the span of the summed
    (trace-preserving) maps to the full affine slice, so setting-dependence
    scans see every signalling direction.
    """
    in_states = tomographic_states(lab.d_in)
    out_states = [ket_to_dm(v) for v in tomographic_states(lab.d_out)]
    eye_in = np.eye(lab.d_in, dtype=np.complex128)
    settings: list[Instrument] = []
    for psi in in_states:
        proj = ket_to_dm(psi)
        for tau in out_states:
            settings.append(measure_and_reprepare(lab, [proj, eye_in - proj], tau))
    for psi in in_states:
        proj = ket_to_dm(psi)
        for k in range(len(out_states) - 1):
            settings.append(
                measure_and_reprepare(lab, [proj, eye_in - proj], [out_states[k], out_states[k + 1]]))
    return settings


# ---------------------------------------------------------------------------
# Validity

def validate_process(p: ProcessMatrix, n_random: int = 32, tol: float = DEFAULT_TOL,
                     seed: int = 0) -> ValidityReport:
    """Check PSD, trace normalization, and unit total probability.

    Normalization is exercised on (a) a deterministic affinely spanning
    family of CPTP channels per lab, which by multilinearity certifies all
    deterministic instruments, and (b) ``n_random`` random multi-outcome
    instruments.
    """
    w = p.w.matrix
    herm_dev = float(np.max(np.abs(w - w.conj().T)))
    evals = np.linalg.eigvalsh((w + w.conj().T) / 2)
    min_eig = float(evals.min())
    psd_ok = herm_dev <= max(tol, 1e-8) and min_eig >= -max(tol, 1e-8)

    target = float(p.out_dim_product)
    trace_value = float(np.real(np.trace(w)))
    trace_ok = abs(trace_value - target) <= tol * max(1.0, target) * 10

    max_dev = 0.0
    spanning = []
    for lab in p.labs:
        chois = tp_spanning_chois(lab.d_in, lab.d_out)
        spanning.append(np.array(chois)[:, None, :, :])  # (S, 1, D, D)
    table = born_table(p, spanning)
    max_dev = float(np.max(np.abs(table - 1.0)))

    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        stacks = []
        for lab in p.labs:
            n_out = int(rng.integers(2, 4))
            chois = random_instrument_chois(lab.d_in, lab.d_out, n_out, rng)
            stacks.append(np.array(chois)[None, :, :, :])  # (1, O, D, D)
        probs = born_table(p, stacks)
        max_dev = max(max_dev, float(abs(probs.sum() - 1.0)))
    normalization_ok = max_dev <= max(tol * 100, 1e-7)
    return ValidityReport(psd_ok, trace_ok, normalization_ok, max_dev, min_eig, trace_value)


# ---------------------------------------------------------------------------
# Constructors

def w_from_chain(state: np.ndarray | DenseOperator,
                 channels: Sequence[np.ndarray | DenseOperator],
                 labs: Sequence[Lab],
                 tol: float = DEFAULT_TOL) -> ProcessMatrix:
    """Process matrix of the fixed-order circuit lab_1 -> ... -> lab_n.

    ``state`` enters lab 1; ``channels[i]`` is the Choi operator of the
    channel from lab i's output to lab i+1's input; the last output is
    discarded.  The result is ``state (x) K_1 (x) ... (x) K_{n-1} (x) I``
    on the interleaved (in, out) factors.
    """
    labs = tuple(labs)
    if len(channels) != len(labs) - 1:
        raise ValueError(f"{len(labs)} labs need {len(labs) - 1} channels, got {len(channels)}")
    rho = state.matrix if isinstance(state, DenseOperator) else np.asarray(state, dtype=np.complex128)
    if rho.shape != (labs[0].d_in, labs[0].d_in):
        raise ValueError(f"state dim {rho.shape} does not match lab {labs[0].name} input {labs[0].d_in}")
    if abs(np.trace(rho) - 1.0) > 1e-6 or np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -1e-8:
        raise ValueError("initial state must be a unit-trace PSD density operator")
    mats = []
    for i, ch in enumerate(channels):
        m = ch.matrix if isinstance(ch, DenseOperator) else np.asarray(ch, dtype=np.complex128)
        d_a, d_b = labs[i].d_out, labs[i + 1].d_in
        if m.shape != (d_a * d_b, d_a * d_b):
            raise ValueError(f"channel {i} has shape {m.shape}, expected {(d_a * d_b, d_a * d_b)} "
                             f"for {labs[i].name}_out -> {labs[i + 1].name}_in")
        tr_out = np.einsum("iaja->ij", m.reshape(d_a, d_b, d_a, d_b))
        if np.max(np.abs(tr_out - np.eye(d_a))) > max(tol * 100, 1e-7):
            raise ValueError(f"channel {i} is not trace preserving")
        mats.append(m)
    w = rho
    for m in mats:
        w = np.kron(w, m)
    w = np.kron(w, np.eye(labs[-1].d_out, dtype=np.complex128))
    factors = []
    for lab in labs:
        factors.extend([lab.in_space, lab.out_space])
    return ProcessMatrix(labs, DenseOperator(tuple(factors), w))


class _CombState:
    """Pure-state register machine used to assemble comb process matrices."""

    def __init__(self) -> None:
        self.names: list[str] = []
        self.dims: list[int] = []
        self.psi = np.ones(1, dtype=np.complex128)

    def inject(self, name: str, amplitudes: np.ndarray) -> None:
        self.names.append(name)
        self.dims.append(amplitudes.shape[0])
        self.psi = np.tensordot(self.psi.reshape(self.dims[:-1] or (1,)), amplitudes, axes=0).reshape(-1) \
            if len(self.dims) > 1 else amplitudes.copy()

    def inject_pair(self, name_a: str, name_b: str, joint: np.ndarray) -> None:
        d_a, d_b = joint.shape
        base = self.psi.reshape(self.dims or (1,))
        self.psi = np.tensordot(base, joint, axes=0).reshape(-1)
        self.names.extend([name_a, name_b])
        self.dims.extend([d_a, d_b])

    def apply_unitary(self, u: np.ndarray, targets: Sequence[str]) -> None:
        idx = [self.names.index(t) for t in targets]
        rest = [i for i in range(len(self.names)) if i not in idx]
        t = self.psi.reshape(self.dims)
        t = np.transpose(t, idx + rest)
        block = int(np.prod([self.dims[i] for i in idx]))
        t = t.reshape(block, -1)
        t = u @ t
        t = t.reshape([self.dims[i] for i in idx] + [self.dims[i] for i in rest])
        inv = np.argsort(idx + rest)
        self.psi = np.transpose(t, inv).reshape(-1)

    def rename(self, old: str, new: str) -> None:
        self.names[self.names.index(old)] = new

    def reduced(self, keep: Sequence[str]) -> np.ndarray:
        idx = [self.names.index(k) for k in keep]
        rest = [i for i in range(len(self.names)) if i not in idx]
        t = self.psi.reshape(self.dims)
        t = np.transpose(t, idx + rest)
        d_keep = int(np.prod([self.dims[i] for i in idx]))
        a = t.reshape(d_keep, -1)
        return a @ a.conj().T


def random_causal_process(seed: int, order: PartialOrder,
                          labs: Sequence[Lab] | None = None) -> ProcessMatrix:
    """A random process matrix wired to respect ``order`` exactly.

    Each lab's input is produced by a Haar-random unitary acting on a fresh
    ancilla together with relay registers written by the lab's strict
    predecessors only, so no signalling path exists outside the order.
    Deterministic in ``seed``.
    """
    if labs is None:
        labs = [Lab.qubit(name) for name in order.elements]
    labs = list(labs)
    by_name = {lab.name: lab for lab in labs}
    if set(by_name) != set(order.elements):
        raise ValueError("labs and order elements differ")
    for lab in labs:
        if lab.d_in != 2 or lab.d_out != 2:
            raise ValueError("random causal processes are generated over qubit labs")
    rng = np.random.default_rng(seed)
    comb = _CombState()
    ket0 = np.array([1.0, 0.0], dtype=np.complex128)
    pair = np.eye(2, dtype=np.complex128)  # unnormalized |00> + |11>
    for name in order.linear_extension():
        preds = sorted(order.predecessors(name))
        comb.inject(f"anc_{name}", ket0)
        block = [f"relay_{p}" for p in preds] + [f"anc_{name}"]
        u = haar_random_unitary(2 ** len(block), rng)
        comb.apply_unitary(u, block)
        comb.rename(f"anc_{name}", f"IN_{name}")
        comb.inject_pair(f"OUT_{name}", f"relay_{name}", pair)
    keep = []
    for lab in labs:
        keep.extend([f"IN_{lab.name}", f"OUT_{lab.name}"])
    w = comb.reduced(keep)
    factors = []
    for lab in labs:
        factors.extend([lab.in_space, lab.out_space])
    return ProcessMatrix(tuple(labs), DenseOperator(tuple(factors), w))


def identity_channel_choi(d: int) -> np.ndarray:
    return choi_matrix_of_kraus([np.eye(d, dtype=np.complex128)])


def depolarizing_channel_choi(d: int, strength: float = 1.0) -> np.ndarray:
    ident = identity_channel_choi(d)
    depol = np.kron(np.eye(d), np.eye(d) / d).astype(np.complex128)
    return (1 - strength) * ident + strength * depol


def loop_process_matrix() -> ProcessMatrix:
    """A lab whose own output is wired straight back to its input.

    This is the closed-loop configuration that produces the bit-flip
    contradiction; it has the right trace and is PSD, but fails the
    normalization check (a bit-flip instrument has total probability 0).
    """
    lab = Lab.qubit("L")
    k_id = identity_channel_choi(2)  # identity from L_out to L_in, reordered below
    op = DenseOperator((lab.out_space, lab.in_space), k_id).reordered([lab.in_space.name, lab.out_space.name])
    return ProcessMatrix((lab,), op)
