"""Independent oracles shared by the test suite.

Everything here is deliberately written with different algorithms/libraries
than the package under test, so agreement is meaningful.
"""
from __future__ import annotations

import itertools
from typing import List, Sequence, Set, Tuple

import numpy as np


def brute_force_min_perfect_matching(dmat: np.ndarray) -> Tuple[float, List[Tuple[int, int]]]:
    """Exhaustive minimum-weight perfect matching over all pairings."""
    n = dmat.shape[0]
    assert n % 2 == 0
    nodes = list(range(n))

    best = (np.inf, [])

    def rec(remaining: List[int], acc_w: float, acc_pairs: List[Tuple[int, int]]):
        nonlocal best
        if not remaining:
            if acc_w < best[0]:
                best = (acc_w, list(acc_pairs))
            return
        a = remaining[0]
        for idx in range(1, len(remaining)):
            b = remaining[idx]
            w = acc_w + dmat[a, b]
            if w >= best[0]:
                continue
            rest = remaining[1:idx] + remaining[idx + 1 :]
            acc_pairs.append((a, b))
            rec(rest, w, acc_pairs)
            acc_pairs.pop()

    rec(nodes, 0.0, [])
    return best


def brute_force_max_weight_matching(
    n: int, edges: Sequence[Tuple[int, int, int]], maxcardinality: bool
) -> Tuple[int, int]:
    """Exhaustive (cardinality, weight) optimum over all matchings.

    Returns the lexicographic optimum (cardinality first) if maxcardinality,
    else the max-weight optimum as (cardinality, weight).
    """
    assert n <= 16, "exhaustive matcher limited to 16 vertices"
    adj = {i: [] for i in range(n)}
    for i, j, w in edges:
        adj[i].append((j, w))
        adj[j].append((i, w))

    from functools import lru_cache

    def better(a, b):
        return a > b if maxcardinality else (a[1], a[0]) > (b[1], b[0])

    @lru_cache(maxsize=None)
    def rec(free_mask: int) -> Tuple[int, int]:
        if free_mask == 0:
            return (0, 0)
        i = (free_mask & -free_mask).bit_length() - 1
        best = rec(free_mask & ~(1 << i))  # leave i unmatched
        for j, w in adj[i]:
            if free_mask >> j & 1 and j != i:
                c, t = rec(free_mask & ~(1 << i) & ~(1 << j))
                cand = (c + 1, t + w)
                if better(cand, best):
                    best = cand
        return best

    return rec((1 << n) - 1)


def syndrome_of_edges(graph, edge_ids: Sequence[int]) -> Set[int]:
    """Detector set flipped by XOR-ing a list of graph edges."""
    counts = {}
    for e in edge_ids:
        for v in graph.edge_dets[e]:
            counts[int(v)] = counts.get(int(v), 0) ^ 1
    return {v for v, c in counts.items() if c}


def mask_of_edges(graph, edge_ids: Sequence[int]) -> int:
    out = 0
    for e in edge_ids:
        out ^= int(graph.edge_mask[e])
    return out


def erasure_components_span(lattice, erased_faces: np.ndarray) -> bool:
    """True if any erased-face cluster wraps around a periodic direction.

    Spanning is detected with the standard relative-coordinate union-find:
    joining two cells already in one cluster with a mismatching coordinate
    offset means the cluster contains a non-contractible loop.
    """
    parent = {}
    offset = {}  # offset[v] = coords of v minus coords of parent[v], unwrapped

    def find(v):
        if parent[v] == v:
            return v
        root = find(parent[v])
        offset[v] = offset[v] + offset[parent[v]]
        parent[v] = root
        return root

    for f in erased_faces:
        a, b = int(lattice.face_dets[f, 0]), int(lattice.face_dets[f, 1])
        axis = int(lattice.face_axis[f])
        step = np.zeros(3, dtype=np.int64)
        step[axis] = 1  # b = a + e_axis before periodic wrapping
        for v in (a, b):
            if v not in parent:
                parent[v] = v
                offset[v] = np.zeros(3, dtype=np.int64)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
            offset[rb] = offset[a] + step - offset[b]
        elif not np.array_equal(offset[b], offset[a] + step):
            return True
    return False
