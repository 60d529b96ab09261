"""Reference decoder: erasure peeling, shortest paths, perfect matching.

The decode pipeline, shared by every noise model:

1. *Peel* the zero-weight subgraph (erased faces): defects bubble up a
   DFS spanning forest toward the roots, so paired defects inside one erased
   component cost nothing.  Components with odd defect count leave a single
   residual defect at the root; its exact position is immaterial because any
   two vertices of the component are joined by zero-weight paths.
2. *Dijkstra* from each residual defect over the full weighted graph
   (zero-weight edges included), with early exit once all other residuals
   are settled.
3. *Blossom* minimum-weight perfect matching on the residual defects, then
   XOR the logical-flip masks along each matched shortest path.

Tie-breaking is deterministic and mirrored by the compiled kernel: heap
entries compare ``(distance, node)`` lexicographically, relaxation is strict,
and neighbours are scanned in ascending mechanism-id order.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import _wmatch
from .dem import DecodingGraph


@dataclass
class PeelResult:
    residuals: np.ndarray      # int32 detector ids still carrying a defect
    peeled_mask: int           # logical mask of zero-weight corrections
    peeled_edges: List[int] = field(default_factory=list)


@dataclass
class MatchResult:
    predicted_mask: int
    peeled_mask: int
    matched_mask: int
    pairs: List[Tuple[int, int]] = field(default_factory=list)
    total_weight: float = 0.0
    flipped_edges: List[int] = field(default_factory=list)


def zero_weight_edges(w: np.ndarray) -> np.ndarray:
    return np.flatnonzero(w == 0.0).astype(np.int32)


def peel_erasure(
    graph: DecodingGraph, w: np.ndarray, syndrome: Sequence[int]
) -> PeelResult:
    """Resolve defects through the zero-weight subgraph."""
    defect = np.zeros(graph.n_dets, dtype=np.uint8)
    for v in syndrome:
        defect[v] ^= 1

    zero = zero_weight_edges(w)
    adj: Dict[int, List[Tuple[int, int]]] = {}
    for g in zero:
        a, b = int(graph.edge_dets[g, 0]), int(graph.edge_dets[g, 1])
        adj.setdefault(a, []).append((b, int(g)))
        adj.setdefault(b, []).append((a, int(g)))

    visited: Dict[int, bool] = {}
    parent_det = {}
    parent_edge = {}
    mask = 0
    peeled_edges: List[int] = []
    for root in sorted(adj):
        if visited.get(root):
            continue
        visited[root] = True
        stack = [root]
        preorder = [root]
        while stack:
            v = stack.pop()
            for nbr, eid in adj[v]:
                if not visited.get(nbr):
                    visited[nbr] = True
                    parent_det[nbr] = v
                    parent_edge[nbr] = eid
                    stack.append(nbr)
                    preorder.append(nbr)
        for v in reversed(preorder):
            if defect[v] and v in parent_det:
                defect[v] = 0
                defect[parent_det[v]] ^= 1
                mask ^= int(graph.edge_mask[parent_edge[v]])
                peeled_edges.append(parent_edge[v])

    residuals = np.flatnonzero(defect).astype(np.int32)
    return PeelResult(residuals=residuals, peeled_mask=mask, peeled_edges=peeled_edges)


def dijkstra_from(
    graph: DecodingGraph,
    w: np.ndarray,
    source: int,
    targets: Sequence[int] = (),
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-source shortest paths; stops early once ``targets`` settle.

    Returns (dist, pred_det, pred_edge); unsettled nodes keep dist == inf and
    pred == -1.  Heap order is ``(distance, node)`` and relaxation is strict,
    so results are bit-deterministic.
    """
    n = graph.n_dets
    dist = np.full(n, np.inf)
    pred_det = np.full(n, -1, dtype=np.int32)
    pred_edge = np.full(n, -1, dtype=np.int32)
    settled = np.zeros(n, dtype=bool)
    want = set(int(t) for t in targets if int(t) != source)
    remaining = len(want)

    dist[source] = 0.0
    heap: List[Tuple[float, int]] = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if settled[v]:
            continue
        settled[v] = True
        if v in want:
            remaining -= 1
            if remaining == 0:
                break
        for h in range(graph.adj_indptr[v], graph.adj_indptr[v + 1]):
            nbr = int(graph.adj_det[h])
            if settled[nbr]:
                continue
            nd = d + w[graph.adj_edge[h]]
            if nd < dist[nbr]:
                dist[nbr] = nd
                pred_det[nbr] = v
                pred_edge[nbr] = graph.adj_edge[h]
                heapq.heappush(heap, (nd, nbr))
    return dist, pred_det, pred_edge


def path_edges(
    graph: DecodingGraph, pred_det: np.ndarray, pred_edge: np.ndarray,
    source: int, target: int,
) -> List[int]:
    """Edge ids along the recorded shortest path target -> source."""
    edges: List[int] = []
    v = target
    while v != source:
        e = int(pred_edge[v])
        if e < 0:
            raise RuntimeError("no recorded path to source")
        edges.append(e)
        v = int(pred_det[v])
        if len(edges) > graph.n_dets:
            raise RuntimeError("predecessor walk did not terminate")
    return edges


def decode_shot(
    graph: DecodingGraph, w: np.ndarray, syndrome: Sequence[int],
    use_peel: bool = True,
) -> MatchResult:
    """Full decode of one shot's syndrome under per-shot weights ``w``.

    ``use_peel=False`` skips the zero-weight peeling stage and matches the
    raw syndrome directly (slower; used to cross-check peeling).
    """
    if use_peel:
        peel = peel_erasure(graph, w, syndrome)
    else:
        peel = PeelResult(
            residuals=np.asarray(sorted(int(s) for s in syndrome), dtype=np.int32),
            peeled_mask=0,
        )
    res = peel.residuals
    k = len(res)
    if k % 2 != 0:
        raise RuntimeError("odd number of residual defects")
    if k == 0:
        return MatchResult(
            predicted_mask=peel.peeled_mask,
            peeled_mask=peel.peeled_mask,
            matched_mask=0,
            flipped_edges=list(peel.peeled_edges),
        )

    dmat = np.zeros((k, k), dtype=np.float64)
    preds = []
    for i, s in enumerate(res):
        dist, pd, pe = dijkstra_from(graph, w, int(s), targets=res)
        preds.append((pd, pe))
        for j, t in enumerate(res):
            dmat[i, j] = dist[t]
    if not np.all(np.isfinite(dmat)):
        raise RuntimeError("residual defects are not mutually reachable")
    np.fill_diagonal(dmat, 0.0)

    mate = _wmatch.min_weight_perfect_matching(dmat)
    matched_mask = 0
    pairs = []
    total = 0.0
    flipped = list(peel.peeled_edges)
    for i in range(k):
        j = int(mate[i])
        if j <= i:
            continue
        pairs.append((int(res[i]), int(res[j])))
        total += dmat[i, j]
        pd, pe = preds[i]
        edges = path_edges(graph, pd, pe, int(res[i]), int(res[j]))
        flipped.extend(edges)
        for e in edges:
            matched_mask ^= int(graph.edge_mask[e])

    return MatchResult(
        predicted_mask=peel.peeled_mask ^ matched_mask,
        peeled_mask=peel.peeled_mask,
        matched_mask=matched_mask,
        pairs=pairs,
        total_weight=total,
        flipped_edges=flipped,
    )
