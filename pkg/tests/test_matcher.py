"""Decoder: peeling, shortest paths, matching, and end-to-end correctness."""
import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from rhgsim.dem import ShotOverlay, build_base_graph
from rhgsim.lattice import build_lattice, detector_flip_set
from rhgsim.matcher import decode_shot, dijkstra_from, peel_erasure
from rhgsim.noise import Model, NoiseParams, sample_shot

from _oracles import erasure_components_span, mask_of_edges, syndrome_of_edges


def overlay_for_sample(graph, s):
    ov = ShotOverlay(graph)
    ov.erase_faces(s.erased_faces)
    if graph.params.model in (Model.LT, Model.LOSS):
        for e in np.flatnonzero(s.edge_leaked):
            ov.reweight_leaked_edge_qubit(int(e))
    return ov


def scipy_weight_matrix(graph, w):
    n = graph.n_dets
    rows, cols, vals = [], [], []
    seen = {}
    for g in range(graph.n_graph_edges):
        a, b = int(graph.edge_dets[g, 0]), int(graph.edge_dets[g, 1])
        key = (min(a, b), max(a, b))
        if key in seen:
            seen[key] = min(seen[key], w[g])
        else:
            seen[key] = w[g]
    for (a, b), v in seen.items():
        rows += [a, b]
        cols += [b, a]
        vals += [v, v]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@pytest.mark.parametrize("model,pe,pp", [
    (Model.LT, 0.03, 0.002),
    (Model.EC, 0.05, 0.002),
    (Model.LOSS, 0.04, 0.001),
    (Model.PAULI, 0.0, 0.01),
])
def test_dijkstra_matches_scipy(model, pe, pp):
    lat = build_lattice(3)
    graph = build_base_graph(lat, NoiseParams(p_e=pe, p_p=pp, model=model))
    rng = np.random.default_rng(17)
    for _ in range(5):
        s = sample_shot(lat, graph.params, rng)
        w = overlay_for_sample(graph, s).w
        mat = scipy_weight_matrix(graph, w)
        # compare full single-source distances (no early exit) from a few dets
        for src in (0, 7, lat.n_cells - 1):
            dist, _, _ = dijkstra_from(graph, w, src)
            ref = csgraph.dijkstra(mat, indices=src)
            assert np.allclose(dist, ref, rtol=1e-12, atol=1e-9)


def test_peel_resolves_even_clusters_exactly():
    lat = build_lattice(3)
    graph = build_base_graph(lat, NoiseParams(p_e=0.02, p_p=0.001, model=Model.EC))
    # axis-0 faces at cells (0,0,0) and (1,0,0) form a chain of two erased
    # edges through three detectors
    faces = [0, 9]
    ov = ShotOverlay(graph).erase_faces(faces)
    # pretend only the first face actually flipped
    flipped = [0]
    syndrome = sorted(detector_flip_set(lat, flipped))
    assert syndrome == [0, 9]
    peel = peel_erasure(graph, ov.w, syndrome)
    assert len(peel.residuals) == 0
    assert syndrome_of_edges(graph, peel.peeled_edges) == set(syndrome)
    assert peel.peeled_mask == mask_of_edges(graph, flipped)


def test_peel_leaves_residual_for_odd_cluster():
    lat = build_lattice(3)
    graph = build_base_graph(lat, NoiseParams(p_e=0.02, p_p=0.001, model=Model.EC))
    ov = ShotOverlay(graph).erase_faces([0])
    a, b = (int(x) for x in graph.edge_dets[0])
    # single defect on one endpoint of the erased edge: odd cluster
    peel = peel_erasure(graph, ov.w, [a])
    assert len(peel.residuals) == 1
    # the residual sits inside the cluster {a, b}
    assert int(peel.residuals[0]) in {a, b}
    # defects outside any erased cluster survive untouched
    far = lat.n_cells - 1
    peel = peel_erasure(graph, ov.w, [a, far])
    assert far in set(int(v) for v in peel.residuals)


def test_decode_empty_syndrome():
    lat = build_lattice(2)
    graph = build_base_graph(lat, NoiseParams(p_p=0.01, model=Model.PAULI))
    res = decode_shot(graph, graph.base_w.copy(), [])
    assert res.predicted_mask == 0
    assert res.pairs == []


def test_decode_corrects_single_mechanism_exactly():
    lat = build_lattice(3)
    graph = build_base_graph(lat, NoiseParams(p_p=0.005, model=Model.PAULI))
    for gid in range(0, graph.n_graph_edges, 11):
        dets = [int(v) for v in graph.edge_dets[gid]]
        res = decode_shot(graph, graph.base_w, sorted(dets))
        assert syndrome_of_edges(graph, res.flipped_edges) == set(dets)
        assert res.predicted_mask == int(graph.edge_mask[gid])


def test_decode_output_is_always_a_valid_correction():
    lat = build_lattice(3)
    for model, pe, pp in [
        (Model.LT, 0.03, 0.003),
        (Model.EC, 0.05, 0.002),
        (Model.LOSS, 0.05, 0.001),
        (Model.PAULI, 0.0, 0.012),
    ]:
        graph = build_base_graph(lat, NoiseParams(p_e=pe, p_p=pp, model=model))
        rng = np.random.default_rng(5)
        for _ in range(60):
            s = sample_shot(lat, graph.params, rng)
            ov = overlay_for_sample(graph, s)
            res = decode_shot(graph, ov.w, s.syndrome)
            assert syndrome_of_edges(graph, res.flipped_edges) == set(
                int(v) for v in s.syndrome
            )
            assert res.predicted_mask == mask_of_edges(graph, res.flipped_edges)


def test_peeling_equals_direct_matching_when_clusters_do_not_span():
    # Tiny random perturbations on the nonzero weights make the optimum
    # generically unique; the two routes may then differ only by zero-weight
    # cycles, which are contractible whenever no erased cluster spans.
    lat = build_lattice(3)
    graph = build_base_graph(lat, NoiseParams(p_e=0.04, p_p=0.002, model=Model.EC))
    rng = np.random.default_rng(23)
    compared = 0
    for _ in range(120):
        s = sample_shot(lat, graph.params, rng)
        if erasure_components_span(lat, s.erased_faces):
            continue
        ov = overlay_for_sample(graph, s)
        w = ov.w.copy()
        nz = w > 0
        w[nz] *= 1.0 + 1e-6 * rng.random(int(nz.sum()))
        fast = decode_shot(graph, w, s.syndrome, use_peel=True)
        slow = decode_shot(graph, w, s.syndrome, use_peel=False)
        assert fast.total_weight == pytest.approx(slow.total_weight, abs=1e-9)
        assert fast.predicted_mask == slow.predicted_mask
        compared += 1
    assert compared > 60


def test_erasure_only_noise_is_always_corrected_when_not_spanning():
    lat = build_lattice(4)
    graph = build_base_graph(lat, NoiseParams(p_e=0.04, model=Model.EC))
    rng = np.random.default_rng(8)
    decided = 0
    for _ in range(150):
        s = sample_shot(lat, graph.params, rng)
        if erasure_components_span(lat, s.erased_faces):
            continue
        ov = overlay_for_sample(graph, s)
        res = decode_shot(graph, ov.w, s.syndrome)
        assert (res.predicted_mask ^ s.actual_mask) == 0
        decided += 1
    assert decided > 100


def test_matched_paths_prefer_reweighted_leak_edges():
    # a leaked edge qubit's two-face kick must be explained by its own hook
    # mechanism, not by two expensive background edges
    lat = build_lattice(3)
    graph = build_base_graph(lat, NoiseParams(p_e=0.02, p_p=0.001, model=Model.LT))
    e = 13
    hook_id = lat.n_faces + e
    dets = sorted(int(v) for v in graph.edge_dets[hook_id])
    ov = ShotOverlay(graph).reweight_leaked_edge_qubit(e)
    res = decode_shot(graph, ov.w, dets)
    assert res.flipped_edges == [hook_id]
    assert res.total_weight == pytest.approx(ov.w[hook_id])


def test_decode_rejects_odd_syndrome():
    lat = build_lattice(2)
    graph = build_base_graph(lat, NoiseParams(p_p=0.01, model=Model.PAULI))
    with pytest.raises(RuntimeError):
        decode_shot(graph, graph.base_w, [0])
