"""Per-gate error sampling for four noise models, with leak tracking.

Models
------
* ``LT``   -- decay during CZ gates: with probability ``p_e`` per gate one of
  the two participants leaks; the leak carries a jump coin (jump-from-|1>
  deposits Z on every later-scheduled partner of the leaker) and a dephasing
  coin (Z on the gate partner).  Leaks are only discovered at the final
  measurement, where leaked qubits return uniformly random outcomes.
* ``EC``   -- mid-circuit conversion baseline: each gate erases its measured
  face with probability ``p_e`` into a *known* erasure set; no propagation.
* ``PAULI`` -- two-qubit depolarizing noise only.
* ``LOSS`` -- each gate participant is independently lost with probability
  ``p_e/2``; loss propagates the jump coin like LT but never dephases the
  partner.

All models add, independently per gate with probability ``p_p``, one of the
15 non-identity two-qubit Paulis; the component on the edge qubit propagates
(X/Y deposit Z on later partners), the component on the face flips its frame.

Randomness contract
-------------------
One ``Generator.random(6 * n_gates + n_faces)`` call per shot.  Gates are
visited in round-major order (round r, then face id); gate ``g`` owns slots
``6g..6g+5`` = (event, second-event, dephase, jump, pauli-event, pauli-kind),
and face ``f`` owns slot ``6*n_gates + f`` (its outcome coin if leaked).  The
compiled kernel consumes the identical stream, so reference and kernel can be
compared shot-for-shot.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lattice import Lattice

SLOTS_PER_GATE = 6
SLOT_EVENT = 0        # LT/EC leak-or-erase draw; LOSS: face-loss draw
SLOT_SIDE = 1         # LT: which participant leaks; LOSS: edge-loss draw
SLOT_DEPHASE = 2      # LT: partner-dephasing coin; LOSS: face jump coin
SLOT_JUMP = 3         # LT: jump coin (from |1> vs from |0>); LOSS: edge jump coin
SLOT_PAULI_EVENT = 4
SLOT_PAULI_KIND = 5


class Model(enum.Enum):
    LT = "lt"
    EC = "ec"
    PAULI = "pauli"
    LOSS = "loss"


@dataclass(frozen=True)
class NoiseParams:
    """Per-CZ-gate error strengths: leak/loss/erasure rate and Pauli rate."""

    p_e: float = 0.0
    p_p: float = 0.0
    model: Model = Model.LT
    #: Alternative reweighting marginals treating dephasing/propagation as
    #: independent bits rather than jointly enumerated outcomes (sensitivity
    #: knob for the decoder; sampling is unaffected).
    independent_leak_bits: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_e and 0.0 <= self.p_p):
            raise ValueError("error rates must be non-negative")
        if self.p_e + self.p_p > 1.0:
            raise ValueError("total per-gate error rate must not exceed 1")
        if self.model is Model.PAULI and self.p_e > 0.0:
            raise ValueError("the depolarizing-only model has no leak rate; set p_e=0")

    @property
    def p(self) -> float:
        return self.p_e + self.p_p

    @property
    def r_e(self) -> float:
        return self.p_e / self.p if self.p > 0 else 0.0

    @staticmethod
    def from_total(p: float, r_e: float, model: Model, **kw) -> "NoiseParams":
        if not 0.0 <= r_e <= 1.0:
            raise ValueError("erasure fraction must be in [0, 1]")
        return NoiseParams(p_e=p * r_e, p_p=p * (1.0 - r_e), model=model, **kw)


@dataclass
class ShotSample:
    """Outcome of one sampled shot on the measured (face) sublattice."""

    zframe: np.ndarray        # uint8 per face: accumulated Z frame
    face_leaked: np.ndarray   # uint8 per face: leaked/lost/erased flag
    edge_leaked: np.ndarray   # uint8 per edge qubit: leaked/lost flag
    eff: np.ndarray           # uint8 per face: final outcome flip
    syndrome: np.ndarray      # sorted int32 ids of flipped detectors
    actual_mask: int          # 3-bit logical-flip mask of the effective error

    @property
    def erased_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_leaked).astype(np.int32)


def random_slot_count(lattice: Lattice) -> int:
    return SLOTS_PER_GATE * 4 * lattice.n_faces + lattice.n_faces


def sample_shot(
    lattice: Lattice,
    params: NoiseParams,
    rng: np.random.Generator,
    u: Optional[np.ndarray] = None,
) -> ShotSample:
    """Sample one shot (pure numpy reference implementation).

    ``u`` may supply the pre-drawn uniform buffer (for forcing specific
    events in tests); otherwise exactly one ``rng.random(m)`` call is made.
    """
    n_faces = lattice.n_faces
    n_gates = 4 * n_faces
    if u is None:
        u = rng.random(random_slot_count(lattice))
    elif len(u) != random_slot_count(lattice):
        raise ValueError("uniform buffer has wrong length")

    model = params.model
    p_e, p_p = params.p_e, params.p_p
    zframe = np.zeros(n_faces, dtype=np.uint8)
    face_leaked = np.zeros(n_faces, dtype=np.uint8)
    edge_leaked = np.zeros(lattice.n_edges, dtype=np.uint8)
    partners = lattice.face_partners
    edge_partners = lattice.edge_partners

    g = -1
    for r in range(4):
        for f in range(n_faces):
            g += 1
            e = int(partners[f, r])
            base = SLOTS_PER_GATE * g

            if model is Model.LT:
                f_leak, e_leak = bool(face_leaked[f]), bool(edge_leaked[e])
                if not f_leak and not e_leak:
                    if u[base + SLOT_EVENT] < p_e:
                        edge_side = u[base + SLOT_SIDE] < 0.5
                        dephase = u[base + SLOT_DEPHASE] < 0.5
                        jump_from_one = u[base + SLOT_JUMP] < 0.5
                        if edge_side:
                            edge_leaked[e] = 1
                            if dephase:
                                zframe[f] ^= 1
                            if jump_from_one:
                                for later in range(r + 1, 4):
                                    zframe[edge_partners[e, later]] ^= 1
                        else:
                            face_leaked[f] = 1
                            # dephasing would land on the edge qubit and the
                            # jump would kick the face's later edge partners;
                            # neither affects the measured sublattice.
                elif f_leak != e_leak:
                    if u[base + SLOT_EVENT] < p_e / 2.0:
                        jump_from_one = u[base + SLOT_JUMP] < 0.5
                        if f_leak:
                            edge_leaked[e] = 1
                            if jump_from_one:
                                for later in range(r + 1, 4):
                                    zframe[edge_partners[e, later]] ^= 1
                        else:
                            face_leaked[f] = 1
            elif model is Model.EC:
                if u[base + SLOT_EVENT] < p_e:
                    face_leaked[f] = 1
            elif model is Model.LOSS:
                if not face_leaked[f] and u[base + SLOT_EVENT] < p_e / 2.0:
                    face_leaked[f] = 1
                    # the face's jump coin (SLOT_DEPHASE) would kick its later
                    # edge partners; irrelevant for the measured sublattice.
                if not edge_leaked[e] and u[base + SLOT_SIDE] < p_e / 2.0:
                    edge_leaked[e] = 1
                    if u[base + SLOT_JUMP] < 0.5:
                        for later in range(r + 1, 4):
                            zframe[edge_partners[e, later]] ^= 1

            if p_p > 0.0 and u[base + SLOT_PAULI_EVENT] < p_p:
                kind = int(u[base + SLOT_PAULI_KIND] * 15.0) + 1  # 1..15
                edge_comp, face_comp = kind >> 2, kind & 3
                if face_comp in (2, 3):  # Y or Z flips the face outcome
                    zframe[f] ^= 1
                if edge_comp in (1, 2) and not edge_leaked[e]:  # X or Y
                    for later in range(r + 1, 4):
                        zframe[edge_partners[e, later]] ^= 1

    coins = u[SLOTS_PER_GATE * n_gates :]
    eff = np.where(face_leaked == 1, (coins < 0.5).astype(np.uint8), zframe)
    flipped = np.flatnonzero(eff)
    det_counts = np.zeros(lattice.n_cells, dtype=np.uint8)
    for f in flipped:
        det_counts[lattice.face_dets[f, 0]] ^= 1
        det_counts[lattice.face_dets[f, 1]] ^= 1
    syndrome = np.flatnonzero(det_counts).astype(np.int32)
    actual_mask = 0
    for f in flipped:
        actual_mask ^= int(lattice.face_mask[f])
    return ShotSample(
        zframe=zframe,
        face_leaked=face_leaked,
        edge_leaked=edge_leaked,
        eff=eff.astype(np.uint8),
        syndrome=syndrome,
        actual_mask=actual_mask,
    )


def effective_pauli_rates(p_p: float) -> tuple:
    """First-order reduced priors of the two-qubit depolarizing channel.

    Per face qubit, the single-Z mechanisms accumulated over its four gates
    (own Y/Z components plus edge-propagated kicks that reduce to a single
    face) total ``32 p_p / 15``; per edge qubit, the two-face kick that
    survives reduction (positions {3,4}) totals ``8 p_p / 15``.
    """
    if p_p < 0:
        raise ValueError("p_p must be non-negative")
    return 32.0 * p_p / 15.0, 8.0 * p_p / 15.0


def final_erasure_probability(p_e: float) -> float:
    """Probability that a face survives none of its 4 gates unerased (EC)."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must be a probability")
    return 1.0 - (1.0 - p_e) ** 4
