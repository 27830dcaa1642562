"""Causal games: brute-forced causal bounds and violation certificates.

Game definitions ship as JSON data files with explicit payoff tables; every
numeric bound quoted anywhere is regenerated by :func:`causal_bound`, which
maximizes over deterministic one-way-signalling strategies (enough, by
convexity, to bound every causal process).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .process import (
    Instrument,
    Lab,
    ProcessMatrix,
    measure_and_reprepare,
)
from .spaces import (
    DenseOperator,
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    SpaceLabel,
    basis_ket,
    ket_to_dm,
)
from .structure import Behavior, behavior_of


@dataclass(frozen=True)
class CausalGame:
    """Two-lab game with product input distribution and 0/1 payoff."""

    name: str
    labs: tuple[str, str]
    settings: tuple[int, int]
    outcomes: tuple[int, int]
    input_dist: np.ndarray  # shape settings
    payoff: np.ndarray  # shape settings + outcomes

    def __post_init__(self) -> None:
        dist = np.array(self.input_dist, dtype=float, copy=True)
        pay = np.array(self.payoff, dtype=float, copy=True)
        if dist.shape != tuple(self.settings):
            raise ValueError(f"input distribution shape {dist.shape} != {self.settings}")
        if abs(dist.sum() - 1.0) > 1e-9 or dist.min() < 0:
            raise ValueError("input distribution must be a probability distribution")
        if pay.shape != tuple(self.settings) + tuple(self.outcomes):
            raise ValueError(f"payoff shape {pay.shape} != {tuple(self.settings) + tuple(self.outcomes)}")
        dist.setflags(write=False)
        pay.setflags(write=False)
        object.__setattr__(self, "input_dist", dist)
        object.__setattr__(self, "payoff", pay)

    @classmethod
    def from_dict(cls, data: dict) -> "CausalGame":
        settings = tuple(int(s) for s in data["settings"])
        outcomes = tuple(int(o) for o in data["outcomes"])
        if data.get("input_distribution", "uniform") == "uniform":
            dist = np.full(settings, 1.0 / np.prod(settings))
        else:
            dist = np.array(data["input_distribution"], dtype=float)
        return cls(data["name"], tuple(data["labs"]), settings, outcomes, dist,
                   np.array(data["payoff"], dtype=float))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "labs": list(self.labs),
            "settings": list(self.settings),
            "outcomes": list(self.outcomes),
            "input_distribution": self.input_dist.tolist(),
            "payoff": self.payoff.tolist(),
        }


@dataclass(frozen=True)
class GameResult:
    value: float
    bound: float
    violates: bool


BUILTIN_GAMES = ("ocb", "gyni", "lgyni")


def load_game(name_or_path: str) -> CausalGame:
    """Load a shipped game by name or any game definition from a JSON file."""
    if name_or_path in BUILTIN_GAMES:
        text = resources.files("orderlab.data.games").joinpath(f"{name_or_path}.json").read_text()
    else:
        text = Path(name_or_path).read_text()
    return CausalGame.from_dict(json.loads(text))


def causal_bound(g: CausalGame) -> float:
    """Max success probability over deterministic one-way-signalling strategies.

    For a fixed direction the leader's outcome is a function of its own
    setting and the follower's best response is chosen pointwise in the
    leader's setting and outcome; the payoff being affine in the behavior
    makes this exhaustive over the polytope's vertices.
    """
    if max(g.settings) > 4 or max(g.outcomes) > 4:
        raise ValueError("scenario too large for the brute-force bound (sizes up to 4)")
    weighted = g.input_dist[..., None, None] * g.payoff

    def best_for_direction(w: np.ndarray) -> float:
        s_a, s_b, o_a, o_b = w.shape
        best = -np.inf
        for f in itertools.product(range(o_a), repeat=s_a):
            sel = np.stack([w[sa, :, f[sa], :] for sa in range(s_a)])  # (s_a, s_b, o_b)
            best = max(best, float(sel.max(axis=2).sum()))
        return best

    return max(best_for_direction(weighted),
               best_for_direction(weighted.transpose(1, 0, 3, 2)))


def game_value(b: Behavior, g: CausalGame) -> float:
    """Expected payoff of a behavior under the game's input distribution."""
    if b.settings != g.settings or b.outcomes != g.outcomes:
        raise ValueError(f"behavior scenario {b.settings}/{b.outcomes} does not match "
                         f"game {g.settings}/{g.outcomes}")
    return float((g.input_dist[..., None, None] * g.payoff * b.table).sum())


def evaluate_game(b: Behavior, g: CausalGame, tol: float = 1e-9) -> GameResult:
    value = game_value(b, g)
    bound = causal_bound(g)
    return GameResult(value, bound, value > bound + tol)


# ---------------------------------------------------------------------------
# The two-qubit-lab process matrix that beats the 3/4 bound

def ocb_labs() -> tuple[Lab, Lab]:
    return Lab.qubit("A"), Lab.qubit("B")


def ocb_process() -> ProcessMatrix:
    """The two-qubit-lab process matrix violating the guessing-game bound.

    W = 1/4 [ I + (Z_{A_out} Z_{B_in} + Z_{A_in} X_{B_in} Z_{B_out}) / sqrt(2) ]
    on the interleaved (A_in, A_out, B_in, B_out) factors.  The two Pauli
    strings anticommute, so W is PSD with eigenvalues {0, 1/2}.
    """
    lab_a, lab_b = ocb_labs()

    def string(p_ain, p_aout, p_bin, p_bout):
        return np.kron(np.kron(np.kron(p_ain, p_aout), p_bin), p_bout)

    ident = string(PAULI_I, PAULI_I, PAULI_I, PAULI_I)
    term1 = string(PAULI_I, PAULI_Z, PAULI_Z, PAULI_I)
    term2 = string(PAULI_Z, PAULI_I, PAULI_X, PAULI_Z)
    w = (ident + (term1 + term2) / np.sqrt(2)) / 4.0
    factors = (lab_a.in_space, lab_a.out_space, lab_b.in_space, lab_b.out_space)
    return ProcessMatrix((lab_a, lab_b), DenseOperator(factors, w))


def ocb_instruments() -> dict[str, list[Instrument]]:
    """Optimal strategies for the direction-bit guessing game.

    Alice always measures Z and re-prepares her input bit in the Z basis.
    Bob's setting is ``2*b + bprime``: when ``bprime = 1`` he measures Z to
    read Alice's bit; when ``bprime = 0`` he measures X and encodes ``b``
    (up to the measurement back-action sign) for Alice to read.
    """
    lab_a, lab_b = ocb_labs()
    p0, p1 = ket_to_dm(basis_ket(2, 0)), ket_to_dm(basis_ket(2, 1))
    plus = ket_to_dm((basis_ket(2, 0) + basis_ket(2, 1)) / np.sqrt(2))
    minus = ket_to_dm((basis_ket(2, 0) - basis_ket(2, 1)) / np.sqrt(2))
    alice = [measure_and_reprepare(lab_a, [p0, p1], ket_to_dm(basis_ket(2, a))) for a in (0, 1)]
    bob = []
    for b in (0, 1):  # setting index is 2*b + bprime
        for bprime in (0, 1):
            if bprime == 1:
                bob.append(measure_and_reprepare(lab_b, [p0, p1], np.eye(2) / 2))
            else:
                preps = [ket_to_dm(basis_ket(2, b)), ket_to_dm(basis_ket(2, 1 - b))]
                bob.append(measure_and_reprepare(lab_b, [plus, minus], preps))
    return {"A": alice, "B": bob}


def ocb_behavior() -> Behavior:
    return behavior_of(ocb_process(), ocb_instruments())


def standard_instruments(game: CausalGame, p: ProcessMatrix) -> dict[str, list[Instrument]] | None:
    """Instrument families used when scanning a process against a game.

    Returns None when the process's lab shapes cannot host the game.
    """
    if len(p.labs) != 2 or any(lab.d_in != 2 or lab.d_out != 2 for lab in p.labs):
        return None
    if game.outcomes != (2, 2):
        return None
    lab_a, lab_b = p.labs
    if game.name == "ocb" and game.settings == (2, 4):
        base = ocb_instruments()
        return {lab_a.name: [Instrument(lab_a.name, i.cp_maps) for i in base["A"]],
                lab_b.name: [Instrument(lab_b.name, i.cp_maps) for i in base["B"]]}
    if game.settings[0] <= 2 and game.settings[1] <= 2:
        p0, p1 = ket_to_dm(basis_ket(2, 0)), ket_to_dm(basis_ket(2, 1))
        out = {}
        for lab, n_settings in zip((lab_a, lab_b), game.settings):
            out[lab.name] = [measure_and_reprepare(lab, [p0, p1], ket_to_dm(basis_ket(2, s % 2)))
                             for s in range(n_settings)]
        return out
    return None
