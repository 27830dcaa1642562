"""The quantum SWITCH: a control qubit decides the order of two gate slots.

Order convention: control |0> applies slot A first, then slot B.  For
unitary slots U (slot A), V (slot B) and control a|0> + b|1>, the output on
a pure target |psi> is ``a |0> (x) VU|psi> + b |1> (x) UV|psi>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .process import Lab, ProcessMatrix
from .spaces import (
    DenseOperator,
    NotUnitaryError,
    apply_choi,
    basis_ket,
    choi_matrix_of_kraus,
    ket_to_dm,
    kraus_from_choi,
    tomographic_states,
    trace_distance,
    SpaceLabel,
)


def _check_cptp(choi: np.ndarray, d: int, what: str, tol: float = 1e-8) -> None:
    evals = np.linalg.eigvalsh((choi + choi.conj().T) / 2)
    if evals.min() < -tol:
        raise ValueError(f"{what}: Choi operator is not PSD")
    tr_out = np.einsum("iaja->ij", choi.reshape(d, d, d, d))
    if np.max(np.abs(tr_out - np.eye(d))) > tol:
        raise ValueError(f"{what}: channel is not trace preserving")


@dataclass(frozen=True)
class SwitchInstance:
    """Control preparation plus the two gate slots (as Choi operators)."""

    control_state: np.ndarray
    slot_a: np.ndarray
    slot_b: np.ndarray
    target_dim: int

    def __post_init__(self) -> None:
        c = np.array(self.control_state, dtype=np.complex128, copy=True)
        if c.shape != (2, 2) or abs(np.trace(c) - 1.0) > 1e-9 \
                or np.linalg.eigvalsh((c + c.conj().T) / 2).min() < -1e-9:
            raise ValueError("control must be a qubit density operator")
        d = int(self.target_dim)
        a = np.array(self.slot_a, dtype=np.complex128, copy=True)
        b = np.array(self.slot_b, dtype=np.complex128, copy=True)
        if a.shape != (d * d, d * d) or b.shape != (d * d, d * d):
            raise ValueError(f"slot Choi operators must be {d * d} x {d * d}")
        _check_cptp(a, d, "slot A")
        _check_cptp(b, d, "slot B")
        for m in (c, a, b):
            m.setflags(write=False)
        object.__setattr__(self, "control_state", c)
        object.__setattr__(self, "slot_a", a)
        object.__setattr__(self, "slot_b", b)
        object.__setattr__(self, "target_dim", d)

    @classmethod
    def from_unitaries(cls, u: np.ndarray, v: np.ndarray,
                       control: np.ndarray | None = None) -> "SwitchInstance":
        u = np.asarray(u, dtype=np.complex128)
        d = u.shape[0]
        if control is None:
            plus = (basis_ket(2, 0) + basis_ket(2, 1)) / np.sqrt(2)
            control = ket_to_dm(plus)
        elif control.ndim == 1:
            control = ket_to_dm(control)
        return cls(control, choi_matrix_of_kraus([u]), choi_matrix_of_kraus([np.asarray(v)]), d)

    def slot_unitaries(self) -> tuple[np.ndarray, np.ndarray]:
        """The slot unitaries, when both slots are unitary channels."""
        d = self.target_dim
        out = []
        for choi, name in ((self.slot_a, "A"), (self.slot_b, "B")):
            kraus = kraus_from_choi(choi, d, d, atol=1e-9)
            if len(kraus) != 1 or np.max(np.abs(kraus[0].conj().T @ kraus[0] - np.eye(d))) > 1e-8:
                raise NotUnitaryError(f"slot {name} is not a unitary channel")
            out.append(kraus[0])
        return out[0], out[1]


def switch_kraus(slot_a: np.ndarray, slot_b: np.ndarray, d: int) -> list[np.ndarray]:
    """Kraus operators of the switched channel on control (x) target."""
    kraus_a = kraus_from_choi(slot_a, d, d)
    kraus_b = kraus_from_choi(slot_b, d, d)
    p0 = ket_to_dm(basis_ket(2, 0))
    p1 = ket_to_dm(basis_ket(2, 1))
    out = []
    for ka in kraus_a:
        for kb in kraus_b:
            out.append(np.kron(p0, kb @ ka) + np.kron(p1, ka @ kb))
    return out


def switch_supermap(s: SwitchInstance) -> DenseOperator:
    """Choi operator of the induced channel on control (x) target.

    CPTP whenever the slots are CPTP; with a classical control value it
    reduces exactly to the fixed-order composition of the slots.
    """
    d = s.target_dim
    choi = choi_matrix_of_kraus(switch_kraus(s.slot_a, s.slot_b, d))
    factors = (SpaceLabel("ctrl_in", 2), SpaceLabel("tgt_in", d),
               SpaceLabel("ctrl_out", 2), SpaceLabel("tgt_out", d))
    return DenseOperator(factors, choi)


def switch_output_state(s: SwitchInstance, target_state: np.ndarray) -> np.ndarray:
    """Joint control (x) target output for the instance's control preparation."""
    d = s.target_dim
    rho_in = np.kron(s.control_state, np.asarray(target_state, dtype=np.complex128))
    return apply_choi(switch_supermap(s).matrix, rho_in, 2 * d, 2 * d)


@dataclass(frozen=True)
class DiscriminationResult:
    probability: float
    relation: str  # "commuting", "anticommuting", or "neither"
    warning: bool


def switch_discriminate(u: np.ndarray, v: np.ndarray,
                        target: np.ndarray | None = None,
                        tol: float = 1e-9) -> DiscriminationResult:
    """Probability of the + outcome on the control after the SWITCH.

    With control |+> the branches recombine so that commuting slot pairs
    give + with certainty and anticommuting pairs give - with certainty.
    Pairs that neither commute nor anticommute yield an intermediate,
    target-dependent value and are flagged.
    """
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    d = u.shape[0]
    psi = np.asarray(target, dtype=np.complex128) if target is not None else basis_ket(d, 0)
    psi = psi / np.linalg.norm(psi)
    scale = max(float(np.max(np.abs(u @ v))), 1e-12)
    commutes = float(np.max(np.abs(u @ v - v @ u))) / scale <= 1e-7
    anticommutes = float(np.max(np.abs(u @ v + v @ u))) / scale <= 1e-7
    prob = float(0.25 * np.linalg.norm((v @ u + u @ v) @ psi) ** 2)
    if commutes:
        relation = "commuting"
    elif anticommutes:
        relation = "anticommuting"
    else:
        relation = "neither"
    return DiscriminationResult(prob, relation, not (commutes or anticommutes))


def _controlled_step(u_branch0: np.ndarray, u_branch1: np.ndarray) -> np.ndarray:
    p0 = ket_to_dm(basis_ket(2, 0))
    p1 = ket_to_dm(basis_ket(2, 1))
    return np.kron(p0, u_branch0) + np.kron(p1, u_branch1)


def fine_grained_equivalence(s: SwitchInstance, shared_regions: bool = True) -> float:
    """Max trace distance between the SWITCH and its four-slot routing circuit.

    The circuit has one region per gate, persisting over two time slots; a
    region carries a flag qubit flipped when the target passes through, and
    the gate acts as external control so the flag is the only record.  With
    shared regions both branches flip the same flags and the deviation
    vanishes; with distinct per-branch gate copies the flags record which
    branch was taken and the branches decohere.
    """
    u, v = s.slot_unitaries()
    d = s.target_dim
    flip = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    eye2 = np.eye(2, dtype=np.complex128)

    if shared_regions:
        n_flags = 2
        gate_a = np.kron(u, np.kron(flip, eye2))
        gate_b = np.kron(v, np.kron(eye2, flip))
    else:
        n_flags = 4
        def pad(mat: np.ndarray, pos: int) -> np.ndarray:
            ops = [eye2] * 4
            ops[pos] = flip
            out = ops[0]
            for o in ops[1:]:
                out = np.kron(out, o)
            return np.kron(mat, out)
        gate_a0, gate_b0 = pad(u, 0), pad(v, 1)
        gate_b1, gate_a1 = pad(v, 3), pad(u, 2)

    if shared_regions:
        t1 = _controlled_step(gate_a, gate_b)
        t2 = _controlled_step(gate_b, gate_a)
    else:
        t1 = _controlled_step(gate_a0, gate_b1)
        t2 = _controlled_step(gate_b0, gate_a1)
    circuit = t2 @ t1

    d_flags = 2 ** n_flags
    flags0 = np.zeros((d_flags, d_flags), dtype=np.complex128)
    flags0[0, 0] = 1.0
    switch_choi = switch_supermap(s).matrix
    worst = 0.0
    for ket in tomographic_states(d):
        sigma = ket_to_dm(ket)
        rho_in = np.kron(s.control_state, sigma)
        out_switch = apply_choi(switch_choi, rho_in, 2 * d, 2 * d)
        big = circuit @ np.kron(rho_in, flags0) @ circuit.conj().T
        t = big.reshape(2 * d, d_flags, 2 * d, d_flags)
        out_circuit = np.einsum("afbf->ab", t)
        worst = max(worst, trace_distance(out_switch, out_circuit))
    return worst


def switch_w_matrix(control: np.ndarray | None = None,
                    target: np.ndarray | None = None) -> ProcessMatrix:
    """The SWITCH as a two-lab process matrix over qubit slot labs.

    The control and target are prepared in the global past (defaults
    |+> and |0>); in the global future the control is measured and the
    outcome discarded along with the target, which is the purification
    convention that leaves a two-lab object.  The matrix is reconstructed
    from the supermap by multilinearity over a tomographic family of slot
    operations.  Discarding the future control erases the coherence
    between the two orderings, so this two-lab reduction equals the even
    mixture of the two fixed-order chains: it is causally separable but
    not causally ordered, and it violates no causal inequality.
    """
    d = 2
    if control is None:
        control = ket_to_dm((basis_ket(2, 0) + basis_ket(2, 1)) / np.sqrt(2))
    if target is None:
        target = ket_to_dm(basis_ket(d, 0))
    rho_in = np.kron(control, target)
    states = tomographic_states(d * d)
    projectors = [ket_to_dm(k) for k in states]
    kraus_ops = [k.reshape(d, d).T for k in states]  # single Kraus of each rank-1 CP slot
    p0 = ket_to_dm(basis_ket(2, 0))
    p1 = ket_to_dm(basis_ket(2, 1))

    n = len(projectors)
    rows = np.empty((n * n, (d * d * d * d) ** 2), dtype=np.complex128)
    vals = np.empty(n * n, dtype=np.complex128)
    for m, (pm, ka) in enumerate(zip(projectors, kraus_ops)):
        for k, (qk, kb) in enumerate(zip(projectors, kraus_ops)):
            kraus = np.kron(p0, kb @ ka) + np.kron(p1, ka @ kb)
            vals[m * n + k] = np.trace(kraus @ rho_in @ kraus.conj().T)
            rows[m * n + k] = np.kron(pm, qk).reshape(-1)
    w_vec = np.linalg.solve(rows, vals)
    w = w_vec.reshape(d * d * d * d, d * d * d * d)
    w = (w + w.conj().T) / 2.0
    lab_a, lab_b = Lab.qubit("A"), Lab.qubit("B")
    factors = (lab_a.in_space, lab_a.out_space, lab_b.in_space, lab_b.out_space)
    return ProcessMatrix((lab_a, lab_b), DenseOperator(factors, w))
