"""Sampling: forced-event injections vs the operator-algebra table, plus
statistical checks of the reduced mechanism rates."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhgsim import algebra
from rhgsim.lattice import build_lattice, detector_flip_set, logical_flip_mask
from rhgsim.noise import (
    SLOT_DEPHASE,
    SLOT_EVENT,
    SLOT_JUMP,
    SLOT_PAULI_EVENT,
    SLOT_PAULI_KIND,
    SLOT_SIDE,
    SLOTS_PER_GATE,
    Model,
    NoiseParams,
    effective_pauli_rates,
    final_erasure_probability,
    random_slot_count,
    sample_shot,
)

RNG = np.random.default_rng(0)


def quiet_buffer(lat):
    """A uniform buffer in which no event fires and all coins land on 0."""
    return np.ones(random_slot_count(lat))


def gate_base(lat, r, f):
    return SLOTS_PER_GATE * (r * lat.n_faces + f)


def test_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(p_e=-0.1)
    with pytest.raises(ValueError):
        NoiseParams(p_e=0.6, p_p=0.6)
    with pytest.raises(ValueError):
        NoiseParams.from_total(0.01, 1.2, Model.LT)
    p = NoiseParams.from_total(0.01, 0.7, Model.LT)
    assert p.p == pytest.approx(0.01)
    assert p.r_e == pytest.approx(0.7)
    assert p.p_e == pytest.approx(0.007)


@pytest.mark.parametrize("d", [2, 3])
def test_edge_leak_injections_match_operator_table(d):
    """Force every (position, dephasing, jump) outcome; the sampled flips must
    agree with the conjugation-derived table modulo the four-face stabilizer."""
    lat = build_lattice(d)
    params = NoiseParams(p_e=0.2, model=Model.LT)
    table = algebra.propagation_table(0.2)
    for e in range(0, lat.n_edges, max(1, lat.n_edges // 7)):
        for pos in (1, 2, 3, 4):
            r = pos - 1
            f = int(lat.edge_partners[e, r])
            for instance in ("L*I", "L*Z"):
                for kraus in ("K0L", "K1L"):
                    u = quiet_buffer(lat)
                    base = gate_base(lat, r, f)
                    u[base + SLOT_EVENT] = 0.0  # leak fires
                    u[base + SLOT_SIDE] = 0.0  # edge side leaks
                    u[base + SLOT_DEPHASE] = 0.0 if instance == "L*Z" else 1.0
                    u[base + SLOT_JUMP] = 0.0 if kraus == "K1L" else 1.0
                    s = sample_shot(lat, params, RNG, u=u)
                    assert s.edge_leaked[e] == 1
                    assert s.face_leaked.sum() == 0
                    reduced = table[(pos, instance, kraus)]
                    faces = [int(lat.edge_partners[e, p - 1]) for p in sorted(reduced)]
                    assert set(s.syndrome) == detector_flip_set(lat, faces)
                    assert s.actual_mask == logical_flip_mask(lat, faces)


def test_face_side_leak_deposits_nothing_and_randomizes_outcome():
    lat = build_lattice(2)
    params = NoiseParams(p_e=0.2, model=Model.LT)
    for coin, want in ((0.2, 1), (0.8, 0)):
        u = quiet_buffer(lat)
        base = gate_base(lat, 1, 5)
        u[base + SLOT_EVENT] = 0.0
        u[base + SLOT_SIDE] = 0.9  # face side leaks
        u[base + SLOT_DEPHASE] = 0.0  # dephasing lands on the edge: dropped
        u[base + SLOT_JUMP] = 0.0  # jump kicks edge qubits: dropped
        u[SLOTS_PER_GATE * 4 * lat.n_faces + 5] = coin
        s = sample_shot(lat, params, RNG, u=u)
        assert s.face_leaked[5] == 1 and s.face_leaked.sum() == 1
        assert s.edge_leaked.sum() == 0
        assert s.zframe.sum() == 0
        assert s.eff[5] == want


def test_one_live_leak_fires_at_half_rate_without_dephasing():
    lat = build_lattice(2)
    p_e = 0.2
    params = NoiseParams(p_e=p_e, model=Model.LT)
    f = 3
    e_later = int(lat.face_partners[f, 2])
    for second_u, leaks in ((0.99 * p_e / 2, True), (1.01 * p_e / 2, False)):
        u = quiet_buffer(lat)
        base0 = gate_base(lat, 0, f)
        u[base0 + SLOT_EVENT] = 0.0
        u[base0 + SLOT_SIDE] = 0.9  # face leaks at its first gate
        u[base0 + SLOT_JUMP] = 1.0
        base2 = gate_base(lat, 2, f)
        u[base2 + SLOT_EVENT] = second_u
        u[base2 + SLOT_DEPHASE] = 0.0  # must be ignored: partner is leaked
        u[base2 + SLOT_JUMP] = 1.0  # quiet jump branch
        s = sample_shot(lat, params, RNG, u=u)
        assert s.face_leaked[f] == 1
        assert bool(s.edge_leaked[e_later]) == leaks
        assert s.zframe.sum() == 0  # no dephasing either way


def test_one_live_leak_jump_still_propagates():
    lat = build_lattice(3)
    params = NoiseParams(p_e=0.2, model=Model.LT)
    f = 10
    e = int(lat.face_partners[f, 1])
    r_in_e = int(np.flatnonzero(lat.edge_partners[e] == f)[0])
    u = quiet_buffer(lat)
    base0 = gate_base(lat, 0, f)
    u[base0 + SLOT_EVENT] = 0.0
    u[base0 + SLOT_SIDE] = 0.9  # face leaks first
    base1 = gate_base(lat, r_in_e, f)
    u[base1 + SLOT_EVENT] = 0.0  # the edge qubit now leaks too
    u[base1 + SLOT_JUMP] = 0.0  # jump branch: kicks the edge's later partners
    s = sample_shot(lat, params, RNG, u=u)
    assert s.edge_leaked[e] == 1
    kicked = [int(lat.edge_partners[e, rr]) for rr in range(r_in_e + 1, 4)]
    expect = np.zeros(lat.n_faces, dtype=np.uint8)
    for k in kicked:
        expect[k] ^= 1
    assert np.array_equal(s.zframe, expect)


def test_both_leaked_gate_is_inert():
    lat = build_lattice(3)
    params = NoiseParams(p_e=0.5, model=Model.LT)
    f = 0
    e3 = int(lat.face_partners[f, 2])  # meets f at round 2
    f3 = int(lat.edge_partners[e3, 1])  # e3's round-1 face, distinct from f
    assert f3 != f
    u = quiet_buffer(lat)
    base0 = gate_base(lat, 0, f)
    u[base0 + SLOT_EVENT] = 0.0
    u[base0 + SLOT_SIDE] = 0.9  # f leaks (face side)
    u[base0 + SLOT_JUMP] = 1.0
    base1 = gate_base(lat, 1, f3)
    u[base1 + SLOT_EVENT] = 0.0
    u[base1 + SLOT_SIDE] = 0.0  # e3 leaks (edge side) at its round-1 gate
    u[base1 + SLOT_DEPHASE] = 1.0
    u[base1 + SLOT_JUMP] = 1.0
    # now f and e3 meet at round 2 with both already leaked: firing every
    # slot of that gate must do nothing at all
    base2 = gate_base(lat, 2, f)
    u[base2 + SLOT_EVENT] = 0.0
    u[base2 + SLOT_SIDE] = 0.0
    u[base2 + SLOT_DEPHASE] = 0.0
    u[base2 + SLOT_JUMP] = 0.0
    s = sample_shot(lat, params, RNG, u=u)
    assert s.face_leaked[f] == 1 and s.face_leaked.sum() == 1
    assert s.edge_leaked[e3] == 1 and s.edge_leaked.sum() == 1
    assert s.zframe.sum() == 0  # nothing ever dephased or kicked


def test_pauli_components_all_fifteen():
    lat = build_lattice(3)
    params = NoiseParams(p_p=0.3, model=Model.PAULI)
    f, r = 40, 1
    e = int(lat.face_partners[f, r])
    for kind in range(1, 16):
        u = quiet_buffer(lat)
        base = gate_base(lat, r, f)
        u[base + SLOT_PAULI_EVENT] = 0.0
        u[base + SLOT_PAULI_KIND] = (kind - 1 + 0.5) / 15.0
        s = sample_shot(lat, params, RNG, u=u)
        edge_comp, face_comp = kind >> 2, kind & 3
        expect = np.zeros(lat.n_faces, dtype=np.uint8)
        if face_comp in (2, 3):
            expect[f] ^= 1
        if edge_comp in (1, 2):
            for rr in range(r + 1, 4):
                expect[int(lat.edge_partners[e, rr])] ^= 1
        assert np.array_equal(s.zframe, expect), f"kind {kind}"


def test_pauli_edge_component_dropped_when_edge_leaked():
    lat = build_lattice(2)
    params = NoiseParams(p_e=0.4, p_p=0.3, model=Model.LT)
    f, r = 7, 0
    e = int(lat.face_partners[f, r])
    u = quiet_buffer(lat)
    base = gate_base(lat, r, f)
    u[base + SLOT_EVENT] = 0.0
    u[base + SLOT_SIDE] = 0.0  # edge leaks at this gate
    u[base + SLOT_DEPHASE] = 1.0
    u[base + SLOT_JUMP] = 1.0
    # at the edge's next gate, fire a pure edge-X Pauli: must be dropped
    f2 = int(lat.edge_partners[e, r + 1])
    base2 = gate_base(lat, r + 1, f2)
    u[base2 + SLOT_PAULI_EVENT] = 0.0
    u[base2 + SLOT_PAULI_KIND] = (4 - 1 + 0.5) / 15.0  # kind 4 = X (x) I
    s = sample_shot(lat, params, RNG, u=u)
    assert s.edge_leaked[e] == 1
    assert s.zframe.sum() == 0


def test_ec_erasure_no_propagation_and_no_edge_leaks():
    lat = build_lattice(3)
    params = NoiseParams(p_e=0.3, model=Model.EC)
    u = quiet_buffer(lat)
    for r, f in ((0, 2), (1, 2), (3, 50)):
        base = gate_base(lat, r, f)
        u[base + SLOT_EVENT] = 0.0
        u[base + SLOT_SIDE] = 0.0
        u[base + SLOT_DEPHASE] = 0.0
        u[base + SLOT_JUMP] = 0.0
    s = sample_shot(lat, params, RNG, u=u)
    assert set(s.erased_faces) == {2, 50}
    assert s.edge_leaked.sum() == 0
    assert s.zframe.sum() == 0


def test_loss_edge_propagates_face_does_not_and_never_dephases():
    lat = build_lattice(3)
    params = NoiseParams(p_e=0.2, model=Model.LOSS)
    f, r = 5, 1
    e = int(lat.face_partners[f, r])
    # lose the edge qubit with the kicking jump branch
    u = quiet_buffer(lat)
    base = gate_base(lat, r, f)
    u[base + SLOT_SIDE] = 0.0  # edge-loss draw
    u[base + SLOT_JUMP] = 0.0  # kick later partners
    u[base + SLOT_DEPHASE] = 0.0  # face jump coin: shouldn't matter (no loss)
    s = sample_shot(lat, params, RNG, u=u)
    assert s.edge_leaked[e] == 1 and s.face_leaked.sum() == 0
    expect = np.zeros(lat.n_faces, dtype=np.uint8)
    for rr in range(r + 1, 4):
        expect[int(lat.edge_partners[e, rr])] ^= 1
    assert np.array_equal(s.zframe, expect)

    # lose the face qubit: no frame effect at all on the measured sublattice
    u = quiet_buffer(lat)
    u[base + SLOT_EVENT] = 0.0  # face-loss draw
    u[base + SLOT_DEPHASE] = 0.0  # its jump kicks edge qubits: dropped
    s = sample_shot(lat, params, RNG, u=u)
    assert s.face_leaked[f] == 1 and s.edge_leaked.sum() == 0
    assert s.zframe.sum() == 0

    # both participants lost at the same gate
    u = quiet_buffer(lat)
    u[base + SLOT_EVENT] = 0.0
    u[base + SLOT_SIDE] = 0.0
    u[base + SLOT_JUMP] = 0.0
    s = sample_shot(lat, params, RNG, u=u)
    assert s.face_leaked[f] == 1 and s.edge_leaked[e] == 1
    assert s.zframe.sum() != 0  # the edge kick still fires


def test_loss_rate_is_half_per_participant():
    lat = build_lattice(2)
    p_e = 0.3
    params = NoiseParams(p_e=p_e, model=Model.LOSS)
    f, r = 0, 0
    for uu, lost in ((0.99 * p_e / 2, True), (1.01 * p_e / 2, False)):
        u = quiet_buffer(lat)
        u[gate_base(lat, r, f) + SLOT_EVENT] = uu
        s = sample_shot(lat, params, RNG, u=u)
        assert bool(s.face_leaked[f]) == lost


def test_syndrome_is_detector_flip_set_of_effective_faces():
    lat = build_lattice(3)
    params = NoiseParams(p_e=0.05, p_p=0.02, model=Model.LT)
    rng = np.random.default_rng(77)
    for _ in range(30):
        s = sample_shot(lat, params, rng)
        flipped = [int(f) for f in np.flatnonzero(s.eff)]
        assert set(int(v) for v in s.syndrome) == detector_flip_set(lat, flipped)
        assert s.actual_mask == logical_flip_mask(lat, flipped)
        assert len(s.syndrome) % 2 == 0


def test_deterministic_given_seed():
    lat = build_lattice(3)
    params = NoiseParams(p_e=0.03, p_p=0.01, model=Model.LT)
    a = sample_shot(lat, params, np.random.default_rng(123))
    b = sample_shot(lat, params, np.random.default_rng(123))
    c = sample_shot(lat, params, np.random.default_rng(124))
    assert np.array_equal(a.zframe, b.zframe)
    assert np.array_equal(a.eff, b.eff)
    assert np.array_equal(a.syndrome, b.syndrome)
    assert not (
        np.array_equal(a.zframe, c.zframe)
        and np.array_equal(a.face_leaked, c.face_leaked)
        and np.array_equal(a.edge_leaked, c.edge_leaked)
    )


def test_final_erasure_probability_formula():
    assert final_erasure_probability(0.0) == 0.0
    assert final_erasure_probability(1.0) == 1.0
    assert final_erasure_probability(0.1) == pytest.approx(1 - 0.9**4)


def test_final_erasure_probability_monte_carlo():
    lat = build_lattice(2)
    p_e = 0.05
    params = NoiseParams(p_e=p_e, model=Model.EC)
    rng = np.random.default_rng(9)
    n_shots = 3000
    erased = 0
    for _ in range(n_shots):
        s = sample_shot(lat, params, rng)
        erased += int(s.face_leaked.sum())
    n = n_shots * lat.n_faces
    q = final_erasure_probability(p_e)
    sigma = np.sqrt(q * (1 - q) / n)
    assert abs(erased / n - q) < 3 * sigma


@pytest.mark.slow
def test_reduced_mechanism_rates_monte_carlo():
    """Empirical frequencies of the reduced Pauli mechanisms at small p_p:
    single-face rate 32*p_p/15 and two-face rate 8*p_p/15, over >= 1e7 gates.

    Counted as whole-shot signatures, so p_p must sit low enough that multi-
    event shots are a sub-percent correction next to the 3-sigma band."""
    lat = build_lattice(3)
    p_p = 1e-4
    params = NoiseParams(p_p=p_p, model=Model.PAULI)
    rng = np.random.default_rng(31)
    n_shots = 31000  # x 324 gates/shot = 1.0e7 gates
    face_key = {}
    for f in range(lat.n_faces):
        key = (frozenset(int(v) for v in lat.face_dets[f]), int(lat.face_mask[f]))
        assert key not in face_key
        face_key[key] = f
    hook_key = {}
    for e in range(lat.n_edges):
        key = (frozenset(int(v) for v in lat.hook_dets[e]), int(lat.hook_mask[e]))
        assert key not in hook_key
        hook_key[key] = e
    n_face_events = 0
    n_hook_events = 0
    for _ in range(n_shots):
        s = sample_shot(lat, params, rng)
        key = (frozenset(int(v) for v in s.syndrome), s.actual_mask)
        if key in face_key:
            n_face_events += 1
        elif key in hook_key:
            n_hook_events += 1
    p_face, p_hook = effective_pauli_rates(p_p)
    for count, rate, n_sites in (
        (n_face_events, p_face, lat.n_faces),
        (n_hook_events, p_hook, lat.n_edges),
    ):
        expect = rate * n_sites  # per shot, to first order in p_p
        sigma = np.sqrt(expect / n_shots)
        assert abs(count / n_shots - expect) < 3 * sigma + 0.03 * expect


def test_effective_pauli_rates_values():
    f, h = effective_pauli_rates(0.15)
    assert f == pytest.approx(0.32)
    assert h == pytest.approx(0.08)
