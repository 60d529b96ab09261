"""Compiled per-shot simulation + decode loop.

This module mirrors, instruction for instruction, the pure-Python reference
path (``noise.sample_shot`` -> ``ShotOverlay`` -> ``matcher.decode_shot``),
consuming the identical per-shot uniform stream and applying the identical
tie-breaking rules, so the two can be compared shot-for-shot in tests.  All
hot loops are nopython-compiled; the minimum-weight perfect matching calls
straight into the compiled blossom solver through a C function pointer.

The depolarizing-only model additionally uses precomputed all-pairs
distances/path-masks (its graph never changes between shots), which skips
the per-shot Dijkstra entirely without changing any decode decision.
"""
from __future__ import annotations

import ctypes
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import _wmatch
from .dem import WEIGHT_CAP, DecodingGraph
from .lattice import Lattice
from .noise import Model, NoiseParams

_lib = ctypes.CDLL(_wmatch.__file__)
_solve_addr = ctypes.cast(_lib.wmatch_solve_dense, ctypes.c_void_p).value
_SOLVE_DENSE = ctypes.CFUNCTYPE(
    ctypes.c_int64, ctypes.c_int64, ctypes.c_int64, ctypes.c_int64
)(_solve_addr)

MODEL_IDS = {Model.LT: 0, Model.EC: 1, Model.PAULI: 2, Model.LOSS: 3}


@njit(cache=True)
def _sample_shot_into(
    u, model, p_e, p_p, face_partners, edge_partners, zframe, face_leaked, edge_leaked
):
    n_faces = face_partners.shape[0]
    zframe[:] = 0
    face_leaked[:] = 0
    edge_leaked[:] = 0
    g = -1
    for r in range(4):
        for f in range(n_faces):
            g += 1
            e = face_partners[f, r]
            base = 6 * g
            if model == 0:  # leak tracking
                f_leak = face_leaked[f]
                e_leak = edge_leaked[e]
                if f_leak == 0 and e_leak == 0:
                    if u[base] < p_e:
                        if u[base + 1] < 0.5:  # edge side leaks
                            edge_leaked[e] = 1
                            if u[base + 2] < 0.5:  # dephase the live face
                                zframe[f] ^= 1
                            if u[base + 3] < 0.5:  # kicking jump branch
                                for later in range(r + 1, 4):
                                    zframe[edge_partners[e, later]] ^= 1
                        else:
                            face_leaked[f] = 1
                elif f_leak != e_leak:
                    if u[base] < p_e / 2.0:
                        if f_leak == 1:
                            edge_leaked[e] = 1
                            if u[base + 3] < 0.5:
                                for later in range(r + 1, 4):
                                    zframe[edge_partners[e, later]] ^= 1
                        else:
                            face_leaked[f] = 1
            elif model == 1:  # mid-circuit erasure conversion
                if u[base] < p_e:
                    face_leaked[f] = 1
            elif model == 3:  # atom loss
                if face_leaked[f] == 0 and u[base] < p_e / 2.0:
                    face_leaked[f] = 1
                if edge_leaked[e] == 0 and u[base + 1] < p_e / 2.0:
                    edge_leaked[e] = 1
                    if u[base + 3] < 0.5:
                        for later in range(r + 1, 4):
                            zframe[edge_partners[e, later]] ^= 1
            if p_p > 0.0 and u[base + 4] < p_p:
                kind = int(u[base + 5] * 15.0) + 1
                fc = kind & 3
                if fc == 2 or fc == 3:
                    zframe[f] ^= 1
                ec = kind >> 2
                if (ec == 1 or ec == 2) and edge_leaked[e] == 0:
                    for later in range(r + 1, 4):
                        zframe[edge_partners[e, later]] ^= 1


@njit(cache=True)
def _measure_into(u, coin_base, zframe, face_leaked, face_dets, face_mask, det_parity, eff):
    n_faces = zframe.shape[0]
    det_parity[:] = 0
    actual = 0
    for f in range(n_faces):
        if face_leaked[f] == 1:
            b = 1 if u[coin_base + f] < 0.5 else 0
        else:
            b = int(zframe[f])
        eff[f] = b
        if b == 1:
            det_parity[face_dets[f, 0]] ^= 1
            det_parity[face_dets[f, 1]] ^= 1
            actual ^= face_mask[f]
    return actual


@njit(cache=True)
def _shot_weights_into(
    model, base_p, base_w, face_leaked, edge_leaked, leak_mech_edges, leak_mix, p, w
):
    p[:] = base_p
    w[:] = base_w
    n_faces = face_leaked.shape[0]
    for f in range(n_faces):
        if face_leaked[f] == 1:
            p[f] = 0.5
            w[f] = 0.0
    if model == 0 or model == 3:
        for e in range(edge_leaked.shape[0]):
            if edge_leaked[e] == 1:
                for k in range(5):
                    ge = leak_mech_edges[e, k]
                    a = p[ge]
                    m = leak_mix[k]
                    pn = a * (1.0 - m) + m * (1.0 - a)
                    p[ge] = pn
                    if pn == 0.0:
                        w[ge] = WEIGHT_CAP
                    else:
                        w[ge] = np.log((1.0 - pn) / pn)


@njit(cache=True)
def _peel_into(
    det_parity, w, edge_dets, edge_mask,
    zdeg, zindptr, zadj_det, zadj_edge,
    visited, parent_det, parent_edge, preorder, stack, residuals,
):
    """Bubble defects up a DFS forest of the zero-weight subgraph.

    Returns (peeled_mask, n_residuals); residual detector ids are written to
    ``residuals`` in ascending order.
    """
    n_dets = det_parity.shape[0]
    n_edges = edge_dets.shape[0]
    zdeg[:] = 0
    for g in range(n_edges):
        if w[g] == 0.0:
            zdeg[edge_dets[g, 0] + 1] += 1
            zdeg[edge_dets[g, 1] + 1] += 1
    zindptr[0] = 0
    for v in range(n_dets):
        zindptr[v + 1] = zindptr[v] + zdeg[v + 1]
    zdeg[1:] = 0  # reuse as cursors: zdeg[v+1] = next slot offset for v
    for g in range(n_edges):
        if w[g] == 0.0:
            a = edge_dets[g, 0]
            b = edge_dets[g, 1]
            ia = zindptr[a] + zdeg[a + 1]
            zadj_det[ia] = b
            zadj_edge[ia] = g
            zdeg[a + 1] += 1
            ib = zindptr[b] + zdeg[b + 1]
            zadj_det[ib] = a
            zadj_edge[ib] = g
            zdeg[b + 1] += 1

    visited[:] = False
    parent_det[:] = -1
    pre_len = 0
    for root in range(n_dets):
        if zindptr[root + 1] == zindptr[root] or visited[root]:
            continue
        visited[root] = True
        sp = 0
        stack[sp] = root
        sp += 1
        preorder[pre_len] = root
        pre_len += 1
        while sp > 0:
            sp -= 1
            v = stack[sp]
            for h in range(zindptr[v], zindptr[v + 1]):
                nbr = zadj_det[h]
                if not visited[nbr]:
                    visited[nbr] = True
                    parent_det[nbr] = v
                    parent_edge[nbr] = zadj_edge[h]
                    stack[sp] = nbr
                    sp += 1
                    preorder[pre_len] = nbr
                    pre_len += 1

    mask = 0
    for idx in range(pre_len - 1, -1, -1):
        v = preorder[idx]
        if det_parity[v] == 1 and parent_det[v] >= 0:
            det_parity[v] = 0
            det_parity[parent_det[v]] ^= 1
            mask ^= edge_mask[parent_edge[v]]

    n_res = 0
    for v in range(n_dets):
        if det_parity[v] == 1:
            residuals[n_res] = v
            n_res += 1
    return mask, n_res


@njit(cache=True)
def _heap_push(heap_d, heap_v, size, d, v):
    i = size
    heap_d[i] = d
    heap_v[i] = v
    while i > 0:
        par = (i - 1) >> 1
        if heap_d[par] > heap_d[i] or (heap_d[par] == heap_d[i] and heap_v[par] > heap_v[i]):
            heap_d[par], heap_d[i] = heap_d[i], heap_d[par]
            heap_v[par], heap_v[i] = heap_v[i], heap_v[par]
            i = par
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(heap_d, heap_v, size):
    d = heap_d[0]
    v = heap_v[0]
    size -= 1
    if size > 0:
        heap_d[0] = heap_d[size]
        heap_v[0] = heap_v[size]
        i = 0
        while True:
            l = 2 * i + 1
            if l >= size:
                break
            r = l + 1
            c = l
            if r < size and (
                heap_d[r] < heap_d[l] or (heap_d[r] == heap_d[l] and heap_v[r] < heap_v[l])
            ):
                c = r
            if heap_d[c] < heap_d[i] or (heap_d[c] == heap_d[i] and heap_v[c] < heap_v[i]):
                heap_d[c], heap_d[i] = heap_d[i], heap_d[c]
                heap_v[c], heap_v[i] = heap_v[i], heap_v[c]
                i = c
            else:
                break
    return d, v, size


@njit(cache=True)
def _dijkstra_into(
    src, adj_indptr, adj_det, adj_edge, w,
    target_flag, n_targets,
    dist, pred_det, pred_edge, settled, heap_d, heap_v,
):
    """Heap order is (distance, node); relaxation strict: deterministic."""
    n = dist.shape[0]
    dist[:] = np.inf
    pred_det[:] = -1
    pred_edge[:] = -1
    settled[:] = False
    remaining = n_targets
    dist[src] = 0.0
    size = _heap_push(heap_d, heap_v, 0, 0.0, src)
    while size > 0:
        d, v, size = _heap_pop(heap_d, heap_v, size)
        if settled[v]:
            continue
        settled[v] = True
        if target_flag[v] and v != src:
            remaining -= 1
            if remaining == 0:
                break
        for h in range(adj_indptr[v], adj_indptr[v + 1]):
            nbr = adj_det[h]
            if settled[nbr]:
                continue
            nd = d + w[adj_edge[h]]
            if nd < dist[nbr]:
                dist[nbr] = nd
                pred_det[nbr] = v
                pred_edge[nbr] = adj_edge[h]
                size = _heap_push(heap_d, heap_v, size, nd, nbr)


@njit(cache=True)
def _walk_mask(edge_mask, pred_det, pred_edge, src, target):
    mask = 0
    v = target
    while v != src:
        mask ^= edge_mask[pred_edge[v]]
        v = pred_det[v]
    return mask


@njit(cache=True)
def _all_pairs(adj_indptr, adj_det, adj_edge, w, edge_mask, n_dets):
    dist = np.empty((n_dets, n_dets), dtype=np.float64)
    mask = np.zeros((n_dets, n_dets), dtype=np.uint8)
    pred_det = np.empty(n_dets, dtype=np.int32)
    pred_edge = np.empty(n_dets, dtype=np.int32)
    settled = np.empty(n_dets, dtype=np.bool_)
    target_flag = np.zeros(n_dets, dtype=np.bool_)
    heap_d = np.empty(2 * adj_det.shape[0] + 16, dtype=np.float64)
    heap_v = np.empty(2 * adj_det.shape[0] + 16, dtype=np.int32)
    row = np.empty(n_dets, dtype=np.float64)
    for s in range(n_dets):
        _dijkstra_into(
            s, adj_indptr, adj_det, adj_edge, w, target_flag, 0,
            row, pred_det, pred_edge, settled, heap_d, heap_v,
        )
        dist[s, :] = row
        for t in range(n_dets):
            if t != s:
                mask[s, t] = _walk_mask(edge_mask, pred_det, pred_edge, s, t)
    return dist, mask


@njit  # (not cached: the matcher function pointer is a process-local address)
def _run_chunk(
    gen, n_shots, model, p_e, p_p,
    face_partners, edge_partners, face_dets, face_mask,
    edge_dets, edge_mask, base_p, base_w,
    adj_indptr, adj_det, adj_edge, leak_mech_edges, leak_mix,
    use_tables, table_dist, table_mask,
    dump, dump_eff, dump_face_leaked, dump_edge_leaked, dump_actual, dump_predicted,
):
    n_faces = face_partners.shape[0]
    n_edges_q = edge_partners.shape[0]
    n_graph_edges = edge_dets.shape[0]
    n_dets = adj_indptr.shape[0] - 1
    n_slots = 6 * 4 * n_faces + n_faces
    coin_base = 6 * 4 * n_faces

    zframe = np.empty(n_faces, dtype=np.uint8)
    face_leaked = np.empty(n_faces, dtype=np.uint8)
    edge_leaked = np.empty(n_edges_q, dtype=np.uint8)
    eff = np.empty(n_faces, dtype=np.uint8)
    det_parity = np.empty(n_dets, dtype=np.uint8)
    p = np.empty(n_graph_edges, dtype=np.float64)
    w = np.empty(n_graph_edges, dtype=np.float64)

    zdeg = np.empty(n_dets + 1, dtype=np.int32)
    zindptr = np.empty(n_dets + 1, dtype=np.int32)
    zadj_det = np.empty(2 * n_graph_edges, dtype=np.int32)
    zadj_edge = np.empty(2 * n_graph_edges, dtype=np.int32)
    visited = np.empty(n_dets, dtype=np.bool_)
    parent_det = np.empty(n_dets, dtype=np.int32)
    parent_edge = np.empty(n_dets, dtype=np.int32)
    preorder = np.empty(n_dets, dtype=np.int32)
    stack = np.empty(n_dets, dtype=np.int32)
    residuals = np.empty(n_dets, dtype=np.int32)

    target_flag = np.zeros(n_dets, dtype=np.bool_)
    settled = np.empty(n_dets, dtype=np.bool_)
    dist_row = np.empty(n_dets, dtype=np.float64)
    heap_d = np.empty(2 * adj_det.shape[0] + 16, dtype=np.float64)
    heap_v = np.empty(2 * adj_det.shape[0] + 16, dtype=np.int32)

    failures = 0
    for shot in range(n_shots):
        u = gen.random(n_slots)
        _sample_shot_into(
            u, model, p_e, p_p, face_partners, edge_partners,
            zframe, face_leaked, edge_leaked,
        )
        actual = _measure_into(
            u, coin_base, zframe, face_leaked, face_dets, face_mask, det_parity, eff
        )

        _shot_weights_into(
            model, base_p, base_w, face_leaked, edge_leaked, leak_mech_edges, leak_mix, p, w
        )
        peel_mask, n_res = _peel_into(
            det_parity, w, edge_dets, edge_mask,
            zdeg, zindptr, zadj_det, zadj_edge,
            visited, parent_det, parent_edge, preorder, stack, residuals,
        )
        predicted = peel_mask
        if n_res > 0:
            dmat = np.zeros((n_res, n_res), dtype=np.float64)
            mate = np.full(n_res, -1, dtype=np.int32)
            if use_tables:
                for i in range(n_res):
                    for j in range(n_res):
                        dmat[i, j] = table_dist[residuals[i], residuals[j]]
                dmat_flat = np.ascontiguousarray(dmat)
                rc = _SOLVE_DENSE(n_res, dmat_flat.ctypes.data, mate.ctypes.data)
                if rc != 0:
                    return -1000 - rc  # signals an internal matcher error
                for i in range(n_res):
                    j = mate[i]
                    if j > i:
                        predicted ^= table_mask[residuals[i], residuals[j]]
            else:
                preds_det = np.empty((n_res, n_dets), dtype=np.int32)
                preds_edge = np.empty((n_res, n_dets), dtype=np.int32)
                for i in range(n_res):
                    target_flag[residuals[i]] = True
                for i in range(n_res):
                    src = residuals[i]
                    _dijkstra_into(
                        src, adj_indptr, adj_det, adj_edge, w,
                        target_flag, n_res - 1,
                        dist_row, preds_det[i], preds_edge[i], settled, heap_d, heap_v,
                    )
                    for j in range(n_res):
                        dmat[i, j] = dist_row[residuals[j]]
                for i in range(n_res):
                    target_flag[residuals[i]] = False
                    dmat[i, i] = 0.0
                rc = _SOLVE_DENSE(n_res, dmat.ctypes.data, mate.ctypes.data)
                if rc != 0:
                    return -1000 - rc
                for i in range(n_res):
                    j = mate[i]
                    if j > i:
                        predicted ^= _walk_mask(
                            edge_mask, preds_det[i], preds_edge[i],
                            residuals[i], residuals[j],
                        )

        if (predicted ^ actual) & 1 == 1:
            failures += 1
        if dump:
            dump_eff[shot, :] = eff
            dump_face_leaked[shot, :] = face_leaked
            dump_edge_leaked[shot, :] = edge_leaked
            dump_actual[shot] = actual
            dump_predicted[shot] = predicted
    return failures


@dataclass
class KernelContext:
    """Flat-array view of one (lattice, noise) configuration for the kernel."""

    lattice: Lattice
    graph: DecodingGraph
    params: NoiseParams
    model_id: int
    table_dist: np.ndarray
    table_mask: np.ndarray

    @classmethod
    def build(cls, graph: DecodingGraph) -> "KernelContext":
        lat = graph.lattice
        params = graph.params
        model_id = MODEL_IDS[params.model]
        if params.model is Model.PAULI:
            table_dist, table_mask = _all_pairs(
                graph.adj_indptr, graph.adj_det, graph.adj_edge,
                graph.base_w, graph.edge_mask, graph.n_dets,
            )
        else:  # 1x1 placeholders keep the kernel signature uniform
            table_dist = np.zeros((1, 1), dtype=np.float64)
            table_mask = np.zeros((1, 1), dtype=np.uint8)
        return cls(
            lattice=lat, graph=graph, params=params, model_id=model_id,
            table_dist=table_dist, table_mask=table_mask,
        )

    def run(self, n_shots: int, gen: np.random.Generator, dump: bool = False):
        """Simulate+decode ``n_shots``; returns failures or full per-shot dump."""
        lat, g = self.lattice, self.graph
        if dump:
            dump_eff = np.empty((n_shots, lat.n_faces), dtype=np.uint8)
            dump_face_leaked = np.empty((n_shots, lat.n_faces), dtype=np.uint8)
            dump_edge_leaked = np.empty((n_shots, lat.n_edges), dtype=np.uint8)
            dump_actual = np.empty(n_shots, dtype=np.int64)
            dump_predicted = np.empty(n_shots, dtype=np.int64)
        else:
            dump_eff = np.empty((1, 1), dtype=np.uint8)
            dump_face_leaked = np.empty((1, 1), dtype=np.uint8)
            dump_edge_leaked = np.empty((1, 1), dtype=np.uint8)
            dump_actual = np.empty(1, dtype=np.int64)
            dump_predicted = np.empty(1, dtype=np.int64)
        failures = _run_chunk(
            gen, n_shots, self.model_id, self.params.p_e, self.params.p_p,
            lat.face_partners, lat.edge_partners, lat.face_dets, lat.face_mask,
            g.edge_dets, g.edge_mask, g.base_p, g.base_w,
            g.adj_indptr, g.adj_det, g.adj_edge, g.leak_mech_edges, g.leak_mix,
            self.model_id == MODEL_IDS[Model.PAULI], self.table_dist, self.table_mask,
            dump, dump_eff, dump_face_leaked, dump_edge_leaked, dump_actual, dump_predicted,
        )
        if failures < 0:
            raise RuntimeError(f"matcher failed inside kernel (code {failures + 1000})")
        if dump:
            return {
                "failures": failures,
                "eff": dump_eff,
                "face_leaked": dump_face_leaked,
                "edge_leaked": dump_edge_leaked,
                "actual": dump_actual,
                "predicted": dump_predicted,
            }
        return failures
