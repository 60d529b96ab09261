"""Decoding graph: priors, weights, overlays, and leak reweighting."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhgsim.dem import (
    WEIGHT_CAP,
    ShotOverlay,
    build_base_graph,
    combine_prob,
    leak_mix_probs,
    weight_of,
)
from rhgsim.lattice import build_lattice
from rhgsim.noise import Model, NoiseParams

# Frozen: marginals of the reduced leak mechanisms [Z1, Z2, Z3, Z4, Z3Z4],
# each outcome of the 16-cell enumeration carrying weight 1/16.
FROZEN_LEAK_MIX = np.array([3, 1, 1, 3, 2], dtype=float) / 16.0
# Frozen: raw per-face marginals when reduction and correlation are ignored.
FROZEN_LEAK_MIX_INDEPENDENT = np.array([2, 4, 6, 8, 0], dtype=float) / 16.0


def graph_for(d=3, p_e=0.02, p_p=0.003, model=Model.LT, **kw):
    lat = build_lattice(d)
    return build_base_graph(lat, NoiseParams(p_e=p_e, p_p=p_p, model=model, **kw))


def test_leak_mix_matches_frozen_enumeration():
    assert np.allclose(leak_mix_probs(False), FROZEN_LEAK_MIX, atol=1e-15)
    assert np.allclose(leak_mix_probs(True), FROZEN_LEAK_MIX_INDEPENDENT, atol=1e-15)
    assert leak_mix_probs(False).sum() == pytest.approx(10 / 16)


def test_combine_prob_basics():
    assert combine_prob(0.0, 0.3) == pytest.approx(0.3)
    assert combine_prob(0.5, 0.123) == pytest.approx(0.5)
    assert combine_prob(0.2, 0.2) == pytest.approx(0.32)
    with pytest.raises(ValueError):
        combine_prob(-0.1, 0.2)
    with pytest.raises(ValueError):
        combine_prob(0.2, 1.3)


@given(
    st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 0.5)
)
@settings(max_examples=80, deadline=None)
def test_combine_prob_properties(a, b, c):
    assert combine_prob(a, b) == pytest.approx(combine_prob(b, a))
    assert combine_prob(combine_prob(a, b), c) == pytest.approx(
        combine_prob(a, combine_prob(b, c)), abs=1e-12
    )
    assert 0.0 <= combine_prob(a, b) <= 0.5 + 1e-12


def test_weight_of():
    assert weight_of(0.0) == WEIGHT_CAP
    assert weight_of(0.5) == 0.0
    assert weight_of(0.1) == pytest.approx(np.log(9.0))
    with pytest.raises(ValueError):
        weight_of(0.6)
    with pytest.raises(ValueError):
        weight_of(-0.01)


@given(st.floats(1e-9, 0.5), st.floats(1e-9, 0.5))
@settings(max_examples=60, deadline=None)
def test_weight_is_monotone_decreasing(p, q):
    lo, hi = min(p, q), max(p, q)
    assert weight_of(lo) >= weight_of(hi)


@pytest.mark.parametrize("d", [2, 3])
def test_base_graph_priors_and_structure(d):
    g = graph_for(d=d, p_p=0.003)
    lat = g.lattice
    assert g.n_graph_edges == 6 * d**3
    assert np.allclose(g.base_p[: lat.n_faces], 32 * 0.003 / 15)
    assert np.allclose(g.base_p[lat.n_faces :], 8 * 0.003 / 15)
    assert np.all(g.base_w > 0)
    # CSR symmetry: each graph edge appears exactly twice
    assert len(g.adj_det) == 2 * g.n_graph_edges
    degrees = np.diff(g.adj_indptr)
    assert np.all(degrees == 12)  # 6 face edges + 6 hook edges per cell
    # half-edge consistency
    for v in range(g.n_dets):
        for h in range(g.adj_indptr[v], g.adj_indptr[v + 1]):
            e = int(g.adj_edge[h])
            assert v in set(int(x) for x in g.edge_dets[e])
            assert int(g.adj_det[h]) in set(int(x) for x in g.edge_dets[e])


def test_pauli_free_graph_gets_capped_weights():
    g = graph_for(p_e=0.02, p_p=0.0)
    assert np.all(g.base_p == 0.0)
    assert np.all(g.base_w == WEIGHT_CAP)


def test_rejects_oversized_pauli_rate():
    lat = build_lattice(2)
    with pytest.raises(ValueError):
        build_base_graph(lat, NoiseParams(p_p=0.25, model=Model.PAULI))


@pytest.mark.parametrize("d", [3, 4])
def test_detector_pair_keys_unique_at_d_ge_3(d):
    g = graph_for(d=d)
    idx = g.key_index()
    assert all(len(v) == 1 for v in idx.values())
    # even ignoring the logical mask, detector pairs are unique
    pairs = set()
    for gid in range(g.n_graph_edges):
        a, b = sorted(int(x) for x in g.edge_dets[gid])
        assert (a, b) not in pairs
        pairs.add((a, b))


def test_parallel_mechanisms_exist_at_d_2():
    g = graph_for(d=2)
    pairs = {}
    for gid in range(g.n_graph_edges):
        a, b = sorted(int(x) for x in g.edge_dets[gid])
        pairs.setdefault((a, b), []).append(gid)
    assert any(len(v) > 1 for v in pairs.values())
    # but (pair, mask) keys may still collide only among hook mechanisms
    idx = g.key_index()
    n_faces = g.lattice.n_faces
    for key, gids in idx.items():
        if len(gids) > 1:
            assert all(gid >= n_faces for gid in gids)


def test_erase_overlay():
    g = graph_for()
    ov = ShotOverlay(g).erase_faces([0, 5])
    assert ov.p[0] == 0.5 and ov.w[0] == 0.0
    assert ov.p[5] == 0.5 and ov.w[5] == 0.0
    untouched = np.ones(g.n_graph_edges, dtype=bool)
    untouched[[0, 5]] = False
    assert np.array_equal(ov.p[untouched], g.base_p[untouched])
    with pytest.raises(ValueError):
        ov.erase_face(g.lattice.n_faces)  # hook ids are not erasable qubits
    with pytest.raises(ValueError):
        ov.erase_face(-1)


def test_reweight_uses_enumerated_marginals():
    g = graph_for(p_p=0.0)  # clean background: priors land exactly on the mix
    ov = ShotOverlay(g).reweight_leaked_edge_qubit(7)
    mech = g.leak_mech_edges[7]
    for k in range(5):
        assert ov.p[mech[k]] == pytest.approx(FROZEN_LEAK_MIX[k])
        assert ov.w[mech[k]] == pytest.approx(np.log((1 - ov.p[mech[k]]) / ov.p[mech[k]]))
    # all other edges untouched
    untouched = np.ones(g.n_graph_edges, dtype=bool)
    untouched[mech] = False
    assert np.array_equal(ov.w[untouched], g.base_w[untouched])


def test_reweight_combines_with_pauli_prior():
    g = graph_for(p_p=0.003)
    ov = ShotOverlay(g).reweight_leaked_edge_qubit(7)
    mech = g.leak_mech_edges[7]
    for k in range(5):
        base = g.base_p[mech[k]]
        expect = base + FROZEN_LEAK_MIX[k] - 2 * base * FROZEN_LEAK_MIX[k]
        assert ov.p[mech[k]] == pytest.approx(expect)
        assert ov.p[mech[k]] > base  # mixing strictly increases the prior


def test_reweight_order_independent_and_guarded():
    g = graph_for()
    a = ShotOverlay(g).reweight_leaked_edge_qubit(3).reweight_leaked_edge_qubit(11)
    b = ShotOverlay(g).reweight_leaked_edge_qubit(11).reweight_leaked_edge_qubit(3)
    assert np.array_equal(a.p, b.p)
    assert np.array_equal(a.w, b.w)
    with pytest.raises(ValueError):
        a.reweight_leaked_edge_qubit(3)  # same qubit twice in one shot
    with pytest.raises(ValueError):
        a.reweight_leaked_edge_qubit(g.lattice.n_edges)


def test_reweighted_priors_stay_valid_under_many_leaks():
    g = graph_for(d=3, p_p=0.01)
    ov = ShotOverlay(g)
    rng = np.random.default_rng(2)
    for e in rng.choice(g.lattice.n_edges, size=40, replace=False):
        ov.reweight_leaked_edge_qubit(int(e))
    assert np.all(ov.p >= 0.0)
    assert np.all(ov.p <= 0.5)
    assert np.all(ov.w >= 0.0)


def test_edge_masks_follow_lattice():
    g = graph_for(d=3)
    lat = g.lattice
    assert np.array_equal(g.edge_mask[: lat.n_faces], lat.face_mask)
    assert np.array_equal(g.edge_mask[lat.n_faces :], lat.hook_mask)


def test_independent_bits_flag_changes_only_the_mix():
    lat = build_lattice(2)
    g0 = build_base_graph(lat, NoiseParams(p_e=0.01, p_p=0.001, model=Model.LT))
    g1 = build_base_graph(
        lat, NoiseParams(p_e=0.01, p_p=0.001, model=Model.LT, independent_leak_bits=True)
    )
    assert np.array_equal(g0.base_p, g1.base_p)
    assert not np.array_equal(g0.leak_mix, g1.leak_mix)
