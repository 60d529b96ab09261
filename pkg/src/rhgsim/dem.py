"""Detector-error graph: priors, weights, and per-shot overlays.

The graph has one node per parity-check cell and one edge per elementary
error mechanism that flips exactly two checks:

* ``face edges`` (ids ``0 .. n_faces-1``): a Z flip on face ``f`` connects its
  two adjacent cells, prior ``32 p_p / 15``.
* ``hook edges`` (ids ``n_faces .. n_faces + n_edges - 1``): the two-face kick
  left by an edge-qubit error between scheduled gates 2 and 3, prior
  ``8 p_p / 15``.

Per-shot overlays never rebuild the structure; they copy the two per-edge
float arrays (prior and weight) and touch only affected entries:

* erasing a face sets its edge to prior 1/2, weight 0;
* a leaked edge qubit mixes the enumerated leak marginals into the priors of
  its four face edges and its own hook edge.

Weights are ``ln((1-p)/p)``, capped at ``WEIGHT_CAP`` for p == 0 so the graph
stays connected without ever making a zero-prior edge attractive.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Tuple

import numpy as np

from . import algebra
from .lattice import Lattice
from .noise import NoiseParams, effective_pauli_rates

WEIGHT_CAP = 1.0e6


def combine_prob(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent flips fires."""
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
    return p1 * (1.0 - p2) + p2 * (1.0 - p1)


def weight_of(p: float) -> float:
    """Log-likelihood weight of an edge with flip probability ``p``."""
    if not 0.0 <= p <= 0.5:
        raise ValueError("edge priors must lie in [0, 1/2]")
    if p == 0.0:
        return WEIGHT_CAP
    return float(np.log((1.0 - p) / p))


def leak_mix_probs(independent_bits: bool = False) -> np.ndarray:
    """Marginals [Z1, Z2, Z3, Z4, Z3Z4] deposited by one leaked edge qubit.

    Derived by enumerating the (position, dephasing instance, jump operator)
    outcomes of the leak channel and reducing each deposited set modulo the
    four-face stabilizer of the leaked qubit; see ``algebra.leak_marginals``.

    ``independent_bits`` instead assigns each face its raw single-flip
    marginal (no stabilizer reduction, no correlated two-face mechanism): a
    strictly simpler sensitivity knob for the decoder priors.
    """
    if not independent_bits:
        marg = algebra.leak_marginals()
        keys = [
            frozenset({1}),
            frozenset({2}),
            frozenset({3}),
            frozenset({4}),
            frozenset({3, 4}),
        ]
        return np.array([marg.get(k, 0.0) for k in keys], dtype=np.float64)
    probs = np.zeros(5, dtype=np.float64)
    for pos in range(1, 5):
        for dephase in (False, True):
            for jump_from_one in (False, True):
                raw = set()
                if dephase:
                    raw.add(pos)
                if jump_from_one:
                    raw.update(range(pos + 1, 5))
                for face_pos in raw:
                    probs[face_pos - 1] += 1.0 / 16.0
    return probs


@dataclass
class DecodingGraph:
    """Static decoding graph for one lattice + noise configuration."""

    lattice: Lattice
    params: NoiseParams
    n_dets: int
    n_graph_edges: int          # n_faces face edges + n_edges hook edges
    edge_dets: np.ndarray       # (n_graph_edges, 2) int32
    edge_mask: np.ndarray       # (n_graph_edges,) uint8 logical-flip mask
    base_p: np.ndarray          # (n_graph_edges,) float64 priors
    base_w: np.ndarray          # (n_graph_edges,) float64 weights
    adj_indptr: np.ndarray      # CSR over detector nodes
    adj_det: np.ndarray         # neighbor detector per half-edge
    adj_edge: np.ndarray        # graph-edge id per half-edge
    leak_mech_edges: np.ndarray  # (n_edges, 5) graph-edge ids touched by a leak
    leak_mix: np.ndarray        # (5,) marginals aligned with leak_mech_edges

    def key_index(self) -> Dict[Tuple[Tuple[int, int], int], list]:
        """Map (sorted detector pair, logical mask) -> graph edge ids."""
        out: Dict[Tuple[Tuple[int, int], int], list] = {}
        for g in range(self.n_graph_edges):
            a, b = int(self.edge_dets[g, 0]), int(self.edge_dets[g, 1])
            key = ((min(a, b), max(a, b)), int(self.edge_mask[g]))
            out.setdefault(key, []).append(g)
        return out


def build_base_graph(lattice: Lattice, params: NoiseParams) -> DecodingGraph:
    n_faces, n_edges = lattice.n_faces, lattice.n_edges
    n_graph_edges = n_faces + n_edges
    p_face, p_hook = effective_pauli_rates(params.p_p)
    if p_face > 0.5 or p_hook > 0.5:
        raise ValueError("Pauli rate too large for a meaningful prior")

    edge_dets = np.empty((n_graph_edges, 2), dtype=np.int32)
    edge_mask = np.empty(n_graph_edges, dtype=np.uint8)
    base_p = np.empty(n_graph_edges, dtype=np.float64)

    edge_dets[:n_faces] = lattice.face_dets
    edge_mask[:n_faces] = lattice.face_mask
    base_p[:n_faces] = p_face
    edge_dets[n_faces:] = lattice.hook_dets
    edge_mask[n_faces:] = lattice.hook_mask
    base_p[n_faces:] = p_hook

    for g in range(n_graph_edges):
        if edge_dets[g, 0] == edge_dets[g, 1]:
            raise ValueError("degenerate mechanism: fewer than two detectors")

    base_w = np.array([weight_of(p) for p in base_p], dtype=np.float64)

    counts = np.zeros(lattice.n_cells + 1, dtype=np.int64)
    for g in range(n_graph_edges):
        counts[edge_dets[g, 0] + 1] += 1
        counts[edge_dets[g, 1] + 1] += 1
    adj_indptr = np.cumsum(counts).astype(np.int32)
    adj_det = np.empty(2 * n_graph_edges, dtype=np.int32)
    adj_edge = np.empty(2 * n_graph_edges, dtype=np.int32)
    cursor = adj_indptr[:-1].copy()
    for g in range(n_graph_edges):
        a, b = int(edge_dets[g, 0]), int(edge_dets[g, 1])
        adj_det[cursor[a]], adj_edge[cursor[a]] = b, g
        cursor[a] += 1
        adj_det[cursor[b]], adj_edge[cursor[b]] = a, g
        cursor[b] += 1

    leak_mech_edges = np.empty((n_edges, 5), dtype=np.int32)
    for e in range(n_edges):
        leak_mech_edges[e, :4] = lattice.edge_partners[e]
        leak_mech_edges[e, 4] = n_faces + e
    leak_mix = leak_mix_probs(params.independent_leak_bits)

    return DecodingGraph(
        lattice=lattice,
        params=params,
        n_dets=lattice.n_cells,
        n_graph_edges=n_graph_edges,
        edge_dets=edge_dets,
        edge_mask=edge_mask,
        base_p=base_p,
        base_w=base_w,
        adj_indptr=adj_indptr,
        adj_det=adj_det,
        adj_edge=adj_edge,
        leak_mech_edges=leak_mech_edges,
        leak_mix=leak_mix,
    )


class ShotOverlay:
    """Per-shot view of the graph: copied priors/weights, shared structure."""

    def __init__(self, graph: DecodingGraph):
        self.graph = graph
        self.p = graph.base_p.copy()
        self.w = graph.base_w.copy()
        self._reweighted_edges: set = set()

    def erase_face(self, face: int) -> None:
        g = self.graph
        if not 0 <= face < g.lattice.n_faces:
            raise ValueError(f"unknown face qubit id {face}")
        self.p[face] = 0.5
        self.w[face] = 0.0

    def erase_faces(self, faces: Iterable[int]) -> "ShotOverlay":
        for f in faces:
            self.erase_face(f)
        return self

    def reweight_leaked_edge_qubit(self, e: int) -> "ShotOverlay":
        """Mix the leak marginals into the 5 mechanisms of edge qubit ``e``."""
        g = self.graph
        if not 0 <= e < g.lattice.n_edges:
            raise ValueError(f"unknown edge qubit id {e}")
        if e in self._reweighted_edges:
            raise ValueError(f"edge qubit {e} reweighted twice in one shot")
        self._reweighted_edges.add(e)
        for k in range(5):
            ge = int(g.leak_mech_edges[e, k])
            p_new = combine_prob(self.p[ge], float(g.leak_mix[k]))
            self.p[ge] = p_new
            self.w[ge] = weight_of(p_new)
        return self
