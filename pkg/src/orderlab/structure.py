"""Behaviors, signalling analysis, causal-order detection, classification.

A process exhibits causal order over a subset of its labs when, relative to
some background order on the remaining labs, at least one candidate order
satisfies the signal requirement and at least one does not.  Statistical
dependence is measured in total variation with a small tolerance because
tables are produced by floating-point Born contractions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .orders import DirectedGraph, PartialOrder, enumerate_posets
from .process import Instrument, ProcessMatrix, born_table, ic_instrument_family
from .spaces import DenseOperator, PAULI_X, PAULI_Z, ket_to_dm

TV_TOL = 1e-7


@dataclass(frozen=True)
class Behavior:
    """P(joint outcomes | joint settings) over named labs.

    ``table`` has the settings axes first, then the outcome axes, both in
    lab order.
    """

    labs: tuple[str, ...]
    settings: tuple[int, ...]
    outcomes: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        labs = tuple(self.labs)
        settings = tuple(int(s) for s in self.settings)
        outcomes = tuple(int(o) for o in self.outcomes)
        if not (len(labs) == len(settings) == len(outcomes)):
            raise ValueError("labs, settings and outcomes must have equal length")
        table = np.array(self.table, dtype=float, copy=True)
        if table.shape != settings + outcomes:
            raise ValueError(f"table shape {table.shape} != {settings + outcomes}")
        if table.min() < -1e-12:
            raise ValueError(f"negative probability {table.min():.3e}")
        sums = table.sum(axis=tuple(range(len(labs), 2 * len(labs))))
        if np.max(np.abs(sums - 1.0)) > 1e-9:
            raise ValueError(f"conditional distributions deviate from 1 by {np.max(np.abs(sums - 1.0)):.3e}")
        table.setflags(write=False)
        object.__setattr__(self, "labs", labs)
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "table", table)

    @property
    def n_labs(self) -> int:
        return len(self.labs)

    def lab_index(self, name: str) -> int:
        return self.labs.index(name)


def _max_tv_along_setting(m: np.ndarray, setting_axis: int, n_setting_axes: int) -> float:
    """Largest TV distance between outcome tables across one lab's settings."""
    a = np.moveaxis(m, setting_axis, 0)
    n_out_axes = a.ndim - n_setting_axes  # a[x] keeps the other settings first
    best = 0.0
    for x in range(a.shape[0]):
        for y in range(x + 1, a.shape[0]):
            diff = np.abs(a[x] - a[y])
            if n_out_axes:
                tv = 0.5 * diff.sum(axis=tuple(range(diff.ndim - n_out_axes, diff.ndim)))
                best = max(best, float(np.max(tv)))
            else:
                best = max(best, 0.5 * float(np.max(diff)))
    return best


def signalling_graph(b: Behavior, tol: float = TV_TOL) -> DirectedGraph:
    """Edge j -> i when lab i's outcome marginal depends on lab j's setting."""
    n = b.n_labs
    edges = set()
    for i in range(n):
        other_out = tuple(n + k for k in range(n) if k != i)
        marginal = b.table.sum(axis=other_out) if other_out else b.table
        for j in range(n):
            if j == i:
                continue
            if _max_tv_along_setting(marginal, j, n) > tol:
                edges.add((b.labs[j], b.labs[i]))
    return DirectedGraph(b.labs, frozenset(edges))


def signal_requirement_check(b: Behavior, order: PartialOrder, tol: float = TV_TOL) -> bool:
    """True when outcomes depend only on own and earlier labs' settings.

    For each lab i, the joint outcome distribution of i and its
    predecessors must be independent of every non-predecessor's setting.
    """
    n = b.n_labs
    for i, lab in enumerate(b.labs):
        preds = order.predecessors(lab)
        group = {i} | {k for k, other in enumerate(b.labs) if other in preds}
        drop = tuple(n + k for k in range(n) if k not in group)
        m = b.table.sum(axis=drop) if drop else b.table
        for j, other in enumerate(b.labs):
            if j in group:
                continue
            if _max_tv_along_setting(m, j, n) > tol:
                return False
    return True


@dataclass(frozen=True)
class CausalOrderVerdict:
    exhibits: bool
    witnessing_background_order: PartialOrder | None
    compatible_orders: tuple[PartialOrder, ...]
    incompatible_orders: tuple[PartialOrder, ...]


def detect_causal_order(b: Behavior, subset: Iterable[str] | None = None,
                        tol: float = TV_TOL) -> CausalOrderVerdict:
    """Causal-order detection for a subset of labs.

    Conditioning on a background order O for the remaining labs is read as
    restricting the signal-requirement test to full orders extending both O
    and the candidate order on the subset.  The verdict is positive when
    some background order leaves both a compatible and an incompatible
    candidate.
    """
    labs = b.labs
    if len(labs) > 5:
        raise ValueError("causal-order detection supports at most 5 labs")
    chosen = set(subset) if subset is not None else set(labs)
    unknown = chosen - set(labs)
    if unknown:
        raise ValueError(f"unknown labs in subset: {sorted(unknown)}")
    sub = tuple(l for l in labs if l in chosen)
    comp = tuple(l for l in labs if l not in chosen)
    full_orders = enumerate_posets(labs)
    passes = {o: signal_requirement_check(b, o, tol) for o in full_orders}
    sub_orders = enumerate_posets(sub)
    first_lists: tuple[tuple[PartialOrder, ...], tuple[PartialOrder, ...]] | None = None
    for bg in enumerate_posets(comp):
        compatible, incompatible = [], []
        for ox in sub_orders:
            ok = any(passes[fo] for fo in full_orders
                     if fo.restrict(sub) == ox and fo.restrict(comp) == bg)
            (compatible if ok else incompatible).append(ox)
        if first_lists is None:
            first_lists = (tuple(compatible), tuple(incompatible))
        if compatible and incompatible:
            return CausalOrderVerdict(True, bg, tuple(compatible), tuple(incompatible))
    assert first_lists is not None
    return CausalOrderVerdict(False, None, first_lists[0], first_lists[1])


def behavior_of(p: ProcessMatrix,
                instrument_sets: Mapping[str, Sequence[Instrument]] | Sequence[Sequence[Instrument]],
                validate: bool = True) -> Behavior:
    """Evaluate Born probabilities for every joint setting and outcome."""
    if isinstance(instrument_sets, Mapping):
        per_lab = [list(instrument_sets[lab.name]) for lab in p.labs]
    else:
        per_lab = [list(s) for s in instrument_sets]
        if len(per_lab) != len(p.labs):
            raise ValueError(f"expected instrument lists for {len(p.labs)} labs")
    stacks = []
    outcome_counts = []
    for lab, insts in zip(p.labs, per_lab):
        counts = {inst.n_outcomes for inst in insts}
        if len(counts) != 1:
            raise ValueError(f"lab {lab.name}: settings disagree on outcome count {sorted(counts)}")
        if validate:
            for inst in insts:
                inst.validate(lab)
        outcome_counts.append(counts.pop())
        stacks.append(np.array([[choi.matrix for choi in inst.cp_maps] for inst in insts]))
    table = born_table(p, stacks)
    table = np.clip(table, 0.0, None)
    return Behavior(p.lab_names, tuple(len(s) for s in per_lab), tuple(outcome_counts), table)


def is_causally_ordered(p: ProcessMatrix, tol: float = TV_TOL) -> PartialOrder | None:
    """First strict partial order compatible with the signal requirement.

    Statistics come from a tomographically complete instrument family per
    lab; returns None when no order is compatible.
    """
    if len(p.labs) > 4:
        raise ValueError("ordered-process detection supports at most 4 labs")
    families = {lab.name: ic_instrument_family(lab) for lab in p.labs}
    b = behavior_of(p, families, validate=False)
    for order in enumerate_posets(p.lab_names):
        if signal_requirement_check(b, order, tol):
            return order
    return None


# ---------------------------------------------------------------------------
# Two-lab causal separability (alternating-projection feasibility search)

def _permute_factors(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    n = len(dims)
    t = mat.reshape(tuple(dims) + tuple(dims))
    t = t.transpose(list(perm) + [n + p for p in perm])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def _trace_replace(mat: np.ndarray, dims: Sequence[int], positions: Sequence[int]) -> np.ndarray:
    """Trace the given factors and re-insert the maximally mixed state."""
    n = len(dims)
    keep = [i for i in range(n) if i not in positions]
    perm = keep + list(positions)
    moved = _permute_factors(mat, dims, perm)
    d_keep = int(np.prod([dims[i] for i in keep], initial=1))
    d_tr = int(np.prod([dims[i] for i in positions], initial=1))
    t = moved.reshape(d_keep, d_tr, d_keep, d_tr)
    reduced = np.einsum("atbt->ab", t)
    rebuilt = np.kron(reduced, np.eye(d_tr, dtype=np.complex128) / d_tr)
    inv = np.argsort(perm)
    return _permute_factors(rebuilt, [dims[i] for i in perm], inv)


@dataclass(frozen=True)
class SeparabilityVerdict:
    status: str  # "separable" or "undecided"
    weight_a_first: float | None
    component_a_first: DenseOperator | None
    component_b_first: DenseOperator | None
    residual: float
    iterations: int

    @property
    def separable(self) -> bool:
        return self.status == "separable"


def is_causally_separable_2lab(p: ProcessMatrix, tol: float = 1e-8,
                               max_iter: int = 6000) -> SeparabilityVerdict:
    """Search for W = W_{A<=B} + W_{B<=A} with PSD, valid, ordered parts.

    Runs Dykstra's alternating projections over the sum constraint, the two
    affine order subspaces (no backward signalling plus process validity),
    and the PSD cone.  A residual at or below ``tol`` certifies a
    decomposition; exhausting ``max_iter`` reports undecided with the final
    gap, never a proof of non-separability.
    """
    if len(p.labs) != 2:
        raise ValueError("separability search is implemented for exactly 2 labs")
    a, b = p.labs
    dims = (a.d_in, a.d_out, b.d_in, b.d_out)
    w = p.w.matrix.astype(np.complex128)

    def o_aout(x: np.ndarray) -> np.ndarray:
        return _trace_replace(x, dims, (1,))

    def o_bout(x: np.ndarray) -> np.ndarray:
        return _trace_replace(x, dims, (3,))

    def t_a(x: np.ndarray) -> np.ndarray:
        return _trace_replace(x, dims, (0, 1))

    def t_b(x: np.ndarray) -> np.ndarray:
        return _trace_replace(x, dims, (2, 3))

    def q_valid(x: np.ndarray) -> np.ndarray:
        # remove the doubly-output-traceless sector
        x = x - (x - o_aout(x) - o_bout(x) + o_aout(o_bout(x)))
        # remove output-traceless sectors seen by the other lab's full trace
        x = x - (t_b(x) - o_aout(t_b(x)))
        x = x - (t_a(x) - o_bout(t_a(x)))
        return x

    def q_a_first(x: np.ndarray) -> np.ndarray:
        return q_valid(o_bout(x))

    def q_b_first(x: np.ndarray) -> np.ndarray:
        return q_valid(o_aout(x))

    def proj_sum(pair):
        m = (w - pair[0] - pair[1]) / 2.0
        return [pair[0] + m, pair[1] + m]

    def proj_sub(pair):
        return [q_a_first(pair[0]), q_b_first(pair[1])]

    def proj_psd(pair):
        out = []
        for x in pair:
            h = (x + x.conj().T) / 2.0
            vals, vecs = np.linalg.eigh(h)
            out.append((vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T)
        return out

    projections = [proj_sum, proj_sub, proj_psd]
    x = [w / 2.0, w / 2.0]
    incr = [[np.zeros_like(w), np.zeros_like(w)] for _ in projections]
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        for s, proj in enumerate(projections):
            y = [x[0] + incr[s][0], x[1] + incr[s][1]]
            z = proj(y)
            incr[s] = [y[0] - z[0], y[1] - z[1]]
            x = z
        residual = max(
            float(np.max(np.abs(x[0] + x[1] - w))),
            float(np.max(np.abs(x[0] - q_a_first(x[0])))),
            float(np.max(np.abs(x[1] - q_b_first(x[1])))),
        )
        if residual <= tol:
            break
    if residual <= tol:
        weight = float(np.real(np.trace(x[0])) / np.real(np.trace(w)))
        comp_a = DenseOperator(p.w.factors, x[0])
        comp_b = DenseOperator(p.w.factors, x[1])
        return SeparabilityVerdict("separable", weight, comp_a, comp_b, residual, iterations)
    return SeparabilityVerdict("undecided", None, None, None, residual, iterations)


# ---------------------------------------------------------------------------
# Two-lab causal polytope membership (Frank-Wolfe with pairwise steps)

@dataclass(frozen=True)
class MembershipVerdict:
    causal: bool
    distance: float
    iterations: int
    weights: tuple[tuple[float, str], ...]
    distance_history: tuple[float, ...]


def _one_way_lmo(c: np.ndarray, first: int) -> tuple[np.ndarray, str]:
    """Minimize <c, v> over deterministic strategies where ``first`` signals.

    The leader's outcome is a function of its own setting; the follower
    sees both settings, so its best response is chosen pointwise.
    """
    if first == 1:
        c = c.transpose(1, 0, 3, 2)
    s_a, s_b, o_a, o_b = c.shape
    best_score, best_f, best_g = np.inf, None, None
    for f in itertools.product(range(o_a), repeat=s_a):
        sel = np.stack([c[sa, :, f[sa], :] for sa in range(s_a)])  # (s_a, s_b, o_b)
        g = np.argmin(sel, axis=2)
        score = float(np.min(sel, axis=2).sum())
        if score < best_score - 1e-15:
            best_score, best_f, best_g = score, f, g
    v = np.zeros_like(c)
    for sa in range(s_a):
        for sb in range(s_b):
            v[sa, sb, best_f[sa], best_g[sa, sb]] = 1.0
    label = ("A<=B" if first == 0 else "B<=A") + f" f={best_f} g={tuple(map(tuple, best_g))}"
    if first == 1:
        v = v.transpose(1, 0, 3, 2)
    return v, label


def _causal_lmo(c: np.ndarray) -> tuple[np.ndarray, str]:
    v0, l0 = _one_way_lmo(c, 0)
    v1, l1 = _one_way_lmo(c, 1)
    return (v0, l0) if float((c * v0).sum()) <= float((c * v1).sum()) else (v1, l1)


def causal_membership(b: Behavior, tol: float = 1e-6, max_iter: int = 5000) -> MembershipVerdict:
    """Distance from the convex hull of two-lab one-way-signalling strategies.

    Frank-Wolfe with pairwise steps and an exact linear-minimization oracle
    over the deterministic vertices; the squared distance is non-increasing
    across iterations.  ``causal`` when the converged distance is at or
    below ``tol``.
    """
    if b.n_labs != 2:
        raise ValueError("causal membership is implemented for 2 labs")
    if max(b.settings) > 4 or max(b.outcomes) > 4:
        raise ValueError("scenario too large (settings/outcomes up to 4)")
    target = b.table.astype(float)
    v0, l0 = _causal_lmo(-target)
    q = v0.copy()
    active: dict[str, tuple[float, np.ndarray]] = {l0: (1.0, v0)}
    history = [float(np.linalg.norm(q - target))]
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (q - target)
        s_vertex, s_label = _causal_lmo(grad)
        away_label = max(active, key=lambda k: float((grad * active[k][1]).sum()))
        away_w, away_vertex = active[away_label]
        gap = float((grad * (q - s_vertex)).sum())
        if gap <= tol * tol:
            history.append(float(np.linalg.norm(q - target)))
            break
        d = s_vertex - away_vertex
        denom = float((d * d).sum())
        if denom <= 1e-300:
            break
        gamma = float(((target - q) * d).sum()) / denom
        gamma = max(0.0, min(gamma, away_w))
        q = q + gamma * d
        w_s = active.get(s_label, (0.0, s_vertex))[0] + gamma
        active[s_label] = (w_s, s_vertex)
        if away_w - gamma <= 1e-12:
            active.pop(away_label, None)
        else:
            active[away_label] = (away_w - gamma, away_vertex)
        history.append(float(np.linalg.norm(q - target)))
    distance = history[-1]
    weights = tuple(sorted(((w, lab) for lab, (w, _) in active.items()), reverse=True))
    return MembershipVerdict(distance <= tol, distance, it, weights, tuple(history))


# ---------------------------------------------------------------------------
# Reference no-signalling behaviors

def tsirelson_behavior() -> Behavior:
    """CHSH statistics of the optimally measured maximally entangled pair."""
    phi = np.zeros(4, dtype=np.complex128)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    rho = ket_to_dm(phi)
    alice = [PAULI_Z, PAULI_X]
    bob = [(PAULI_Z + PAULI_X) / np.sqrt(2), (PAULI_Z - PAULI_X) / np.sqrt(2)]
    eye = np.eye(2)
    table = np.zeros((2, 2, 2, 2))
    for a, sa in enumerate(alice):
        for c, sb in enumerate(bob):
            for x in range(2):
                for y in range(2):
                    proj = np.kron(eye + (-1) ** x * sa, eye + (-1) ** y * sb) / 4.0
                    table[a, c, x, y] = float(np.real(np.trace(proj @ rho)))
    return Behavior(("A", "B"), (2, 2), (2, 2), table)


def pr_box_behavior() -> Behavior:
    table = np.zeros((2, 2, 2, 2))
    for a, c, x, y in itertools.product(range(2), repeat=4):
        if (x ^ y) == (a & c):
            table[a, c, x, y] = 0.5
    return Behavior(("A", "B"), (2, 2), (2, 2), table)


def chsh_value(b: Behavior) -> float:
    t = b.table
    value = 0.0
    for a in range(2):
        for c in range(2):
            e = t[a, c, 0, 0] + t[a, c, 1, 1] - t[a, c, 0, 1] - t[a, c, 1, 0]
            value += e if (a, c) != (1, 1) else -e
    return float(value)
