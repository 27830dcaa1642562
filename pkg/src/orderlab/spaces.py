"""Dense complex linear algebra over labeled tensor-product spaces.

Conventions fixed here and relied on by every other module:

* A composite space is an ordered tuple of :class:`SpaceLabel`; the first
  factor is the most significant Kronecker index (C order, as in
  ``numpy.kron``).
* Choi operators use the unnormalized column convention
  ``J(E) = sum_ij |i><j| (x) E(|i><j|)``.  The first factor of a Choi
  operator is the input copy, the second the output, and the Choi operator
  of a trace-preserving map has trace equal to the input dimension.
* Channel application under that convention is
  ``E(rho) = Tr_in[J (rho^T (x) I_out)]``, implemented by :func:`apply_choi`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class SpaceMismatchError(ValueError):
    """Operator factor labels do not line up with what an operation expects."""


class NotHermitianError(ValueError):
    """Input operator is not Hermitian within the requested tolerance."""


class NotUnitaryError(ValueError):
    """Input matrix is not unitary within the requested tolerance."""


@dataclass(frozen=True)
class SpaceLabel:
    """A named factor of a tensor-product space."""

    name: str
    dim: int

    def __post_init__(self) -> None:
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ValueError(f"space {self.name!r} needs an integer dim >= 1, got {self.dim!r}")


@dataclass(frozen=True)
class DenseOperator:
    """A square complex matrix over an ordered list of labeled factors.

    Instances are immutable (the backing array is marked read-only) and can
    be shared freely between threads.
    """

    factors: tuple[SpaceLabel, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        factors = tuple(self.factors)
        names = [f.name for f in factors]
        if len(set(names)) != len(names):
            raise SpaceMismatchError(f"duplicate factor names in {names}")
        mat = np.array(self.matrix, dtype=np.complex128, copy=True)
        d = 1
        for f in factors:
            d *= f.dim
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match factor dims {tuple(f.dim for f in factors)}")
        mat.setflags(write=False)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def factor_index(self, name: str) -> int:
        for i, f in enumerate(self.factors):
            if f.name == name:
                return i
        raise SpaceMismatchError(f"no factor named {name!r} (have {self.names})")

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.factors, self.matrix.conj().T)

    def is_hermitian(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def reordered(self, names: Sequence[str]) -> "DenseOperator":
        """Permute the factor order (same operator, relabeled index layout)."""
        if sorted(names) != sorted(self.names):
            raise SpaceMismatchError(f"cannot reorder {self.names} into {tuple(names)}")
        perm = [self.factor_index(n) for n in names]
        n = len(self.factors)
        dims = self.dims
        t = self.matrix.reshape(dims + dims)
        t = t.transpose([*perm, *[n + p for p in perm]])
        d = self.dim
        return DenseOperator(tuple(self.factors[p] for p in perm), t.reshape(d, d))

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        self._check_same_factors(other)
        return DenseOperator(self.factors, self.matrix + other.matrix)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        self._check_same_factors(other)
        return DenseOperator(self.factors, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "DenseOperator":
        return DenseOperator(self.factors, self.matrix * scalar)

    __rmul__ = __mul__

    def _check_same_factors(self, other: "DenseOperator") -> None:
        if self.factors != other.factors:
            raise SpaceMismatchError(f"factor mismatch: {self.names} vs {other.names}")


@dataclass(frozen=True)
class Spectrum:
    """Real eigenvalues of a Hermitian operator, sorted descending."""

    eigenvalues: tuple[float, ...]

    def is_psd(self, tol: float = 1e-9) -> bool:
        return min(self.eigenvalues) >= -tol

    def min(self) -> float:
        return min(self.eigenvalues)

    def max(self) -> float:
        return max(self.eigenvalues)


def tensor(a: DenseOperator, b: DenseOperator) -> DenseOperator:
    """Kronecker product; factor lists concatenate (duplicates rejected)."""
    return DenseOperator(a.factors + b.factors, np.kron(a.matrix, b.matrix))


def tensor_all(ops: Sequence[DenseOperator]) -> DenseOperator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def partial_trace(op: DenseOperator, keep: Iterable[SpaceLabel | str]) -> DenseOperator:
    """Trace out every factor not in ``keep``.

    Kept factors stay in their original order.  ``keep`` may be empty, in
    which case the result is the full trace as a 1x1 operator with no
    factors.
    """
    keep_names = {k.name if isinstance(k, SpaceLabel) else k for k in keep}
    have = set(op.names)
    unknown = keep_names - have
    if unknown:
        raise SpaceMismatchError(f"unknown labels in keep: {sorted(unknown)} (have {op.names})")
    n = len(op.factors)
    t = op.matrix.reshape(op.dims + op.dims)
    row_sub = list(range(n))
    col_sub = [i if op.factors[i].name not in keep_names else n + i for i in range(n)]
    out_sub = [i for i in range(n) if op.factors[i].name in keep_names]
    out_sub += [n + i for i in range(n) if op.factors[i].name in keep_names]
    reduced = np.einsum(t, row_sub + col_sub, out_sub)
    kept = tuple(f for f in op.factors if f.name in keep_names)
    d = 1
    for f in kept:
        d *= f.dim
    return DenseOperator(kept, reduced.reshape(d, d))


def embed(op: DenseOperator, target: Sequence[SpaceLabel]) -> DenseOperator:
    """Pad ``op`` with identities so it lives on the full ``target`` space."""
    target = tuple(target)
    own = {f.name: f for f in op.factors}
    for f in target:
        if f.name in own and own[f.name].dim != f.dim:
            raise SpaceMismatchError(f"dim clash for {f.name}: {own[f.name].dim} vs {f.dim}")
    missing = [f for f in target if f.name not in own]
    if len(op.factors) + len(missing) != len(target):
        extra = set(op.names) - {f.name for f in target}
        raise SpaceMismatchError(f"operator factors {sorted(extra)} not present in target")
    full = op
    for f in missing:
        full = tensor(full, identity([f]))
    return full.reordered([f.name for f in target])


def identity(factors: Sequence[SpaceLabel]) -> DenseOperator:
    d = 1
    for f in factors:
        d *= f.dim
    return DenseOperator(tuple(factors), np.eye(d, dtype=np.complex128))


def trace_and_replace(op: DenseOperator, names: Iterable[str]) -> DenseOperator:
    """Trace the named factors and re-insert them maximally mixed."""
    names = set(names)
    keep = [n for n in op.names if n not in names]
    d = 1
    for f in op.factors:
        if f.name in names:
            d *= f.dim
    return embed(partial_trace(op, keep), op.factors) * (1.0 / d)


def hermitian_spectrum(op: DenseOperator, tol: float = 1e-9) -> Spectrum:
    """Eigenvalues of a Hermitian operator, descending.

    Uses a Hermitian-specialized solver (LAPACK ``eigh``); rejects
    non-Hermitian input beyond ``tol``.
    """
    dev = float(np.max(np.abs(op.matrix - op.matrix.conj().T)))
    if dev > tol:
        raise NotHermitianError(f"max |M - M^dag| = {dev:.3e} exceeds tol {tol:.3e}")
    vals = np.linalg.eigvalsh((op.matrix + op.matrix.conj().T) / 2.0)
    return Spectrum(tuple(float(v) for v in vals[::-1]))


def choi_of_unitary(u: np.ndarray | DenseOperator,
                    in_space: SpaceLabel | None = None,
                    out_space: SpaceLabel | None = None,
                    tol: float = 1e-9) -> DenseOperator:
    """Choi operator ``J = sum_ij |i><j| (x) U|i><j|U^dag`` of a unitary."""
    mat = u.matrix if isinstance(u, DenseOperator) else np.asarray(u, dtype=np.complex128)
    d = mat.shape[0]
    if mat.shape != (d, d) or np.max(np.abs(mat.conj().T @ mat - np.eye(d))) > tol:
        raise NotUnitaryError("input is not unitary within tol")
    v = mat.T.reshape(-1)  # v[(i,a)] = U[a,i]
    j = np.outer(v, v.conj())
    in_space = in_space or SpaceLabel("in", d)
    out_space = out_space or SpaceLabel("out", d)
    return DenseOperator((in_space, out_space), j)


def choi_matrix_of_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Plain Choi matrix of the CP map with the given Kraus operators."""
    vecs = [np.asarray(k, dtype=np.complex128).T.reshape(-1) for k in kraus]
    d2 = vecs[0].shape[0]
    j = np.zeros((d2, d2), dtype=np.complex128)
    for v in vecs:
        j += np.outer(v, v.conj())
    return j


def kraus_from_choi(choi: np.ndarray, d_in: int, d_out: int, atol: float = 1e-10) -> list[np.ndarray]:
    """Kraus operators of a CP map from its plain Choi matrix."""
    herm = (choi + choi.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(herm)
    ops = []
    for lam, v in zip(vals, vecs.T):
        if lam > atol:
            ops.append(np.sqrt(lam) * v.reshape(d_in, d_out).T)
    return ops


def apply_choi(choi: np.ndarray, rho: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Apply a channel given by its plain Choi matrix to a state."""
    j4 = np.asarray(choi).reshape(d_in, d_out, d_in, d_out)
    return np.einsum("iajb,ij->ab", j4, np.asarray(rho))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = (a - b + (a - b).conj().T) / 2.0
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# Qubit constants and small state/unitary factories used across the package.

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
S_GATE = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
T_GATE = np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128)

NAMED_GATES = {
    "I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z,
    "H": HADAMARD, "S": S_GATE, "T": T_GATE,
}


def basis_ket(d: int, j: int) -> np.ndarray:
    v = np.zeros(d, dtype=np.complex128)
    v[j] = 1.0
    return v


def ket_to_dm(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    return np.outer(v, v.conj())


def tomographic_states(d: int) -> list[np.ndarray]:
    """d^2 pure states whose projectors span the Hermitian operators on C^d."""
    kets = [basis_ket(d, j) for j in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            kets.append((basis_ket(d, j) + basis_ket(d, k)) / np.sqrt(2))
            kets.append((basis_ket(d, j) + 1j * basis_ket(d, k)) / np.sqrt(2))
    return kets


def haar_random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def haar_random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_cptp_choi(d_in: int, d_out: int, rng: np.random.Generator, env: int = 2) -> np.ndarray:
    """Choi matrix of a random channel (Stinespring with a random isometry)."""
    g = rng.standard_normal((d_out * env, d_in)) + 1j * rng.standard_normal((d_out * env, d_in))
    q, _ = np.linalg.qr(g)
    v = q[:, :d_in].reshape(d_out, env, d_in)
    kraus = [v[:, e, :] for e in range(env)]
    return choi_matrix_of_kraus(kraus)


def random_instrument_chois(d_in: int, d_out: int, n_outcomes: int,
                            rng: np.random.Generator) -> list[np.ndarray]:
    """Choi matrices of a random instrument (one CP map per outcome, sum CPTP)."""
    g = rng.standard_normal((d_out * n_outcomes, d_in)) + 1j * rng.standard_normal((d_out * n_outcomes, d_in))
    q, _ = np.linalg.qr(g)
    v = q[:, :d_in].reshape(d_out, n_outcomes, d_in)
    return [choi_matrix_of_kraus([v[:, e, :]]) for e in range(n_outcomes)]
