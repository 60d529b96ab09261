"""Dense three-level (qubit + leaked level) operator algebra.

Verification oracle for the error model: each atom is modeled as a qutrit with
basis ``|0>, |1>, |L>`` where ``|L>`` collects all population outside the
qubit subspace.  Two-qubit gates act as the qubit gate on the qubit block and
as identity on anything involving ``|L>`` (a leaked atom no longer picks up
conditional phases).  This module builds the gates and decay jump operators as
explicit matrices (at most two qutrits, 9x9) so that every propagation and
twirling identity used by the samplers can be checked numerically, and so that
the leak-propagation table consumed by the decoder can be *generated* from
matrix conjugation rather than hand-entered.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np

from .lattice import reduce_mod_stabilizer

ATOL = 1e-12

# Single-qutrit basics -------------------------------------------------------

KET0 = np.array([1, 0, 0], dtype=complex)
KET1 = np.array([0, 1, 0], dtype=complex)
KETL = np.array([0, 0, 1], dtype=complex)
KET_PLUS = (KET0 + KET1) / np.sqrt(2)
KET_MINUS = (KET0 - KET1) / np.sqrt(2)


def embed(op2: np.ndarray) -> np.ndarray:
    """Embed a 2x2 qubit operator as ``op2 (+) |L><L|`` on the qutrit."""
    out = np.zeros((3, 3), dtype=complex)
    out[:2, :2] = op2
    out[2, 2] = 1.0
    return out


I2 = np.eye(2)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)
Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z2 = np.array([[1, 0], [0, -1]], dtype=complex)

I3 = embed(I2)
X3 = embed(X2)
Y3 = embed(Y2)
Z3 = embed(Z2)
PAULIS3 = (I3, X3, Y3, Z3)

#: Projector onto the leaked level.
PROJ_L = np.outer(KETL, KETL.conj())

# Two-qutrit gates: the qubit-subspace gate, identity on leaked components.
CZ = np.eye(9, dtype=complex) - 2.0 * np.outer(
    np.kron(KET1, KET1), np.kron(KET1, KET1).conj()
)
_k10 = np.kron(KET1, KET0)
_k11 = np.kron(KET1, KET1)
CNOT = (
    np.eye(9, dtype=complex)
    - np.outer(_k10, _k10.conj())
    - np.outer(_k11, _k11.conj())
    + np.outer(_k10, _k11.conj())
    + np.outer(_k11, _k10.conj())
)


@dataclass(frozen=True)
class DecayKraus:
    """Jump/no-jump operators of the per-gate decay channel at strength p_e."""

    p_e: float
    no_jump: np.ndarray    # K0:  |0><0| + sqrt(1-p_e)|1><1| + |L><L|
    jump: np.ndarray       # K1:  sqrt(p_e)    |L><1|
    jump_from0: np.ndarray  # K0L: sqrt(p_e/2) |L><0|
    jump_from1: np.ndarray  # K1L: sqrt(p_e/2) |L><1|
    jump_from_plus: np.ndarray   # K+L: sqrt(p_e/2) |L><+|
    jump_from_minus: np.ndarray  # K-L: sqrt(p_e/2) |L><-|


def decay_kraus(p_e: float) -> DecayKraus:
    if not 0.0 <= p_e <= 1.0:
        raise ValueError(f"p_e must be a probability, got {p_e}")
    s = np.sqrt(p_e / 2.0)
    return DecayKraus(
        p_e=p_e,
        no_jump=np.diag([1.0, np.sqrt(1.0 - p_e), 1.0]).astype(complex),
        jump=np.sqrt(p_e) * np.outer(KETL, KET1.conj()),
        jump_from0=s * np.outer(KETL, KET0.conj()),
        jump_from1=s * np.outer(KETL, KET1.conj()),
        jump_from_plus=s * np.outer(KETL, KET_PLUS.conj()),
        jump_from_minus=s * np.outer(KETL, KET_MINUS.conj()),
    )


# Conjugation and channels ---------------------------------------------------


def conjugate_through_gate(
    gate: np.ndarray, error: np.ndarray, slot: int
) -> np.ndarray:
    """Forward-propagate a single-qutrit error operator through a 9x9 gate.

    Returns ``gate @ (error embedded in slot) @ gate^-1`` where slot 1 is the
    first tensor factor and slot 2 the second.
    """
    if gate.shape != (9, 9):
        raise ValueError("gate must act on two qutrits (9x9)")
    if error.shape != (3, 3):
        raise ValueError("error must be a single-qutrit operator (3x3)")
    if slot == 1:
        emb = np.kron(error, I3)
    elif slot == 2:
        emb = np.kron(I3, error)
    else:
        raise ValueError("slot must be 1 or 2")
    return gate @ emb @ gate.conj().T


def apply_channel(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def _check_density(rho: np.ndarray) -> None:
    if rho.shape != (3, 3):
        raise ValueError("density must be a single-qutrit operator")
    if abs(np.trace(rho) - 1.0) > 1e-9 or np.abs(rho - rho.conj().T).max() > 1e-9:
        raise ValueError("density must be Hermitian with unit trace")


def twirl_channel(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Pauli-twirled channel action: (1/4) sum_i P_i xi(P_i rho P_i) P_i.

    The twirling group is the embedded qubit Pauli group {I', X', Y', Z'},
    which acts trivially on the leaked level.
    """
    _check_density(rho)
    out = np.zeros_like(rho)
    for p in PAULIS3:
        out += p @ apply_channel(kraus, p @ rho @ p) @ p
    return out / 4.0


def factor_as_pauli_kick(m9: np.ndarray, error: np.ndarray) -> str:
    """Factor a 9x9 operator as ``error (x) P`` with P in {I', Z'}.

    Returns "I" or "Z" naming the second factor; raises if the operator does
    not factor that way (which would signal a broken propagation identity).
    """
    for name, p in (("I", I3), ("Z", Z3)):
        if np.abs(m9 - np.kron(error, p)).max() <= ATOL:
            return name
    raise ValueError("operator does not factor as error (x) {I', Z'}")


# Leak-propagation table -----------------------------------------------------

Instance = str  # "L*I" (leak, partner untouched) or "L*Z" (leak, partner dephased)
Kraus = str     # "K0L" (jump from |0>) or "K1L" (jump from |1>)

INSTANCES: Tuple[Instance, Instance] = ("L*I", "L*Z")
KRAUSES: Tuple[Kraus, Kraus] = ("K0L", "K1L")


def propagation_table(p_e: float = 0.1) -> Dict[Tuple[int, Instance, Kraus], FrozenSet[int]]:
    """Z-kick pattern left on an edge qubit's four CZ partners by a leak.

    For every (schedule position 1..4, instance, jump operator) the leaked
    edge's residual operator is pushed through the remaining CZ gates one at a
    time by matrix conjugation; each gate either commutes or deposits a Z on
    its face partner, as decided numerically.  The dephasing instance adds a Z
    on the position's own partner.  The accumulated partner subset is reduced
    modulo the joint 4-kick to its canonical representative.
    """
    dk = decay_kraus(p_e)
    table: Dict[Tuple[int, Instance, Kraus], FrozenSet[int]] = {}
    for pos in (1, 2, 3, 4):
        for instance in INSTANCES:
            for kraus_name in KRAUSES:
                err = dk.jump_from0 if kraus_name == "K0L" else dk.jump_from1
                kicks = set()
                if instance == "L*Z":
                    kicks ^= {pos}
                for later in range(pos + 1, 5):
                    conj = conjugate_through_gate(CZ, err, slot=1)
                    if factor_as_pauli_kick(conj, err) == "Z":
                        kicks ^= {later}
                table[(pos, instance, kraus_name)] = reduce_mod_stabilizer(kicks)
    return table


def leak_marginals(p_e: float = 0.1) -> Dict[FrozenSet[int], float]:
    """Marginal probability of each reduced kick pattern around a leaked edge.

    Enumerates the 16 equally likely (position, instance, jump) outcomes of
    ``propagation_table`` at weight 1/16 each and accumulates by reduced
    subset.  Consumed by the decoder's edge-reweighting step.
    """
    table = propagation_table(p_e)
    marginals: Dict[FrozenSet[int], float] = {}
    for subset in table.values():
        marginals[subset] = marginals.get(subset, 0.0) + 1.0 / 16.0
    return marginals


# Identity report (CLI + acceptance) ----------------------------------------


def _random_density(rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def verify_cnot_structure(p_e: float) -> List[Tuple[str, bool, float]]:
    """Numerical checks of the jump-operator behavior under CNOT conjugation."""
    if not 0.0 < p_e < 1.0:
        raise ValueError(f"p_e must be in (0, 1), got {p_e}")
    dk = decay_kraus(p_e)
    checks: List[Tuple[str, bool, float]] = []

    # control |0> or leaked control: gate inert; control |1>: target toggled.
    proj0_or_leaked = embed((I2 + Z2) / 2)
    proj1 = np.zeros((3, 3), dtype=complex)
    proj1[1, 1] = 1.0
    lhs = conjugate_through_gate(CNOT, dk.jump_from1, slot=2)
    rhs = np.kron(proj0_or_leaked, dk.jump_from1) + np.kron(proj1, dk.jump_from0)
    checks.append(_entry("CNOT maps target jump-from-|1> to a control-conditioned jump", lhs, rhs))

    lhs = conjugate_through_gate(CNOT, dk.jump_from_minus, slot=2)
    checks.append(_entry("CNOT propagates target jump-from-|-> as Z on control", lhs, np.kron(Z3, dk.jump_from_minus)))

    lhs = conjugate_through_gate(CNOT, dk.jump_from_plus, slot=2)
    checks.append(_entry("target jump-from-|+> commutes with CNOT", lhs, np.kron(I3, dk.jump_from_plus)))

    rng = np.random.default_rng(20260814)
    worst = 0.0
    for _ in range(8):
        rho = _random_density(rng)
        a = apply_channel([dk.jump_from0, dk.jump_from1], rho)
        b = apply_channel([dk.jump_from_plus, dk.jump_from_minus], rho)
        worst = max(worst, float(np.abs(a - b).max()))
    checks.append(("computational and conjugate jump pairs act as the same channel", worst <= ATOL, worst))
    return checks


def _entry(name: str, lhs: np.ndarray, rhs: np.ndarray) -> Tuple[str, bool, float]:
    dev = float(np.abs(lhs - rhs).max())
    return (name, dev <= ATOL, dev)


def identity_report(p_e: float = 0.1) -> List[Tuple[str, bool, float]]:
    """Run every channel/propagation identity; returns (name, ok, deviation)."""
    dk = decay_kraus(p_e)
    checks: List[Tuple[str, bool, float]] = []

    comp = dk.no_jump.conj().T @ dk.no_jump + dk.jump.conj().T @ dk.jump
    checks.append(_entry("no-jump and jump operators are trace-complete", comp, I3))

    lhs = conjugate_through_gate(CZ, dk.jump, slot=2)
    checks.append(_entry("CZ propagates a partner jump as Z on the spectator", lhs, np.kron(Z3, dk.jump)))

    lhs = conjugate_through_gate(CZ, dk.jump_from0, slot=2)
    checks.append(_entry("jump-from-|0> commutes with CZ", lhs, np.kron(I3, dk.jump_from0)))

    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(8):
        rho = _random_density(rng)
        twirled = twirl_channel([dk.jump_from0, dk.jump_from1], rho)
        target = (p_e / 2.0) * (1.0 - rho[2, 2].real) * PROJ_L
        worst = max(worst, float(np.abs(twirled - target).max()))
    checks.append(("twirled jump channel feeds the leaked level at rate p_e/2", worst <= ATOL, worst))

    checks.extend(verify_cnot_structure(p_e))

    # Twirled no-jump channel: diagonal Pauli transfer with exact weights
    # a^2 on identity and b^2 on Z, where a, b = (1 +/- sqrt(1-p_e))/2.
    a = (1.0 + np.sqrt(1.0 - p_e)) / 2.0
    b = (1.0 - np.sqrt(1.0 - p_e)) / 2.0
    worst = 0.0
    for _ in range(8):
        # Valid on block-diagonal states (no qubit<->leak coherence), which is
        # the invariant subspace the twirled dynamics actually lives in.
        rho = _random_density(rng)
        rho[2, :2] = 0.0
        rho[:2, 2] = 0.0
        rho /= np.trace(rho).real
        twirled = twirl_channel([dk.no_jump], rho)
        qubit_block = rho.copy()
        qubit_block[2, 2] = 0.0
        target = (
            a * a * qubit_block
            + b * b * (Z3 @ qubit_block @ Z3)
            + rho[2, 2] * PROJ_L
        )
        worst = max(worst, float(np.abs(twirled - target).max()))
    checks.append(("twirled no-jump channel is a Z-dephasing of exact weight", worst <= ATOL, worst))
    checks.append(
        (
            "no-jump dephasing weights sum to the survival probability",
            abs((a * a + b * b) - (1.0 - p_e / 2.0)) <= ATOL,
            abs((a * a + b * b) - (1.0 - p_e / 2.0)),
        )
    )
    return checks
