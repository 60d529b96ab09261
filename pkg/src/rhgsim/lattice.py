"""Periodic 3D cluster-state geometry: qubits, CZ schedule, detectors, logical surfaces.

The simulated volume is a d x d x d box of cubic cells with periodic boundaries.
Two qubit species matter for decoding one sublattice:

* *face qubits* -- one per (cell, axis): the face of cell ``c`` on its
  positive-``axis`` side.  Their X-basis outcomes feed the cell detectors.
* *edge qubits* -- one per (vertex, axis): the lattice edge from vertex ``v``
  to ``v + e_axis``.  Each edge qubit touches exactly four face qubits via CZ
  gates, one per schedule round.

A *detector* is the parity of the six face outcomes of one cell; every face
belongs to exactly two detectors, so every elementary error mechanism flips
zero or two of them.  A *correlation surface* is a torus-spanning sheet of
faces whose joint parity is deterministic in the absence of errors; one such
sheet per axis defines the three logical observables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Sequence, Tuple

import numpy as np

Subset = FrozenSet[int]

#: Schedule round count: every face and every edge participates in exactly one
#: CZ per round, i.e. the interaction graph is 4-edge-colored.
N_ROUNDS = 4


@dataclass(frozen=True)
class Lattice:
    """Immutable geometry tables for one periodic ``d^3`` lattice.

    All qubit/detector identifiers are dense integers: cells (= detectors) are
    ``(x*d + y)*d + z``; face and edge qubits are ``axis*d^3 + cell_index``.
    """

    d: int
    n_cells: int
    n_faces: int
    n_edges: int
    #: (n_faces,) anchor-cell index of each face qubit.
    face_cell: np.ndarray
    #: (n_faces,) normal axis of each face qubit.
    face_axis: np.ndarray
    #: (n_faces, 2) the two detectors (cells) whose parity each face feeds.
    face_dets: np.ndarray
    #: (n_faces,) 3-bit mask: bit a set iff the face lies on the axis-a
    #: correlation surface.
    face_mask: np.ndarray
    #: (n_edges,) base-vertex index of each edge qubit.
    edge_vertex: np.ndarray
    #: (n_edges,) direction axis of each edge qubit.
    edge_axis: np.ndarray
    #: (n_edges, 4) ordered CZ partners (face ids) of each edge, rounds 1..4.
    edge_partners: np.ndarray
    #: (n_faces, 4) ordered CZ partners (edge ids) of each face, rounds 1..4.
    face_partners: np.ndarray
    #: (n_edges, 2) detectors flipped by Z on partners {3,4} of an edge (the
    #: two-detector signature of a late two-face kick).
    hook_dets: np.ndarray
    #: (n_edges,) 3-bit logical mask of that same two-face kick.
    hook_mask: np.ndarray
    #: per-axis tuple of face-id arrays forming the correlation surfaces.
    surfaces: Tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)

    def cell_coord(self, cell: int) -> Tuple[int, int, int]:
        d = self.d
        return (cell // (d * d), (cell // d) % d, cell % d)


def _cell_index(d: int, x: int, y: int, z: int) -> int:
    return ((x % d) * d + (y % d)) * d + (z % d)


def _shift(d: int, cell: int, axis: int, delta: int) -> int:
    x, y, z = cell // (d * d), (cell // d) % d, cell % d
    c = [x, y, z]
    c[axis] = (c[axis] + delta) % d
    return _cell_index(d, *c)


def build_lattice(d: int) -> Lattice:
    """Construct the full geometry for a periodic ``d^3`` lattice.

    The four-round CZ schedule follows one rotationally consistent rule: the
    round-``r`` partner of edge qubit ``(v, a)`` is the face lying in
    transverse direction ``(+e_{a+1}, +e_{a+2}, -e_{a+1}, -e_{a+2})[r]`` from
    the edge.  This makes each round a perfect matching and places the two
    late partners (rounds 3, 4) on faces sharing exactly one cell, so a joint
    Z kick on them flips exactly two detectors.
    """
    if d < 2:
        raise ValueError(f"lattice size must be >= 2, got {d}")

    n_cells = d ** 3
    n_faces = 3 * n_cells
    n_edges = 3 * n_cells

    face_cell = np.empty(n_faces, dtype=np.int32)
    face_axis = np.empty(n_faces, dtype=np.int8)
    face_dets = np.empty((n_faces, 2), dtype=np.int32)
    face_mask = np.zeros(n_faces, dtype=np.uint8)
    edge_vertex = np.empty(n_edges, dtype=np.int32)
    edge_axis = np.empty(n_edges, dtype=np.int8)
    edge_partners = np.empty((n_edges, 4), dtype=np.int32)

    def face_id(axis: int, cell: int) -> int:
        return axis * n_cells + cell

    def edge_id(axis: int, vertex: int) -> int:
        return axis * n_cells + vertex

    for axis in range(3):
        for cell in range(n_cells):
            f = face_id(axis, cell)
            face_cell[f] = cell
            face_axis[f] = axis
            face_dets[f, 0] = cell
            face_dets[f, 1] = _shift(d, cell, axis, +1)
            coord = (cell // (d * d), (cell // d) % d, cell % d)
            if coord[axis] == 0:
                face_mask[f] = 1 << axis

    for axis in range(3):
        b1 = (axis + 1) % 3  # first transverse axis
        b2 = (axis + 2) % 3  # second transverse axis
        for vertex in range(n_cells):
            e = edge_id(axis, vertex)
            edge_vertex[e] = vertex
            edge_axis[e] = axis
            m_b1 = _shift(d, vertex, b1, -1)
            m_b2 = _shift(d, vertex, b2, -1)
            m_b12 = _shift(d, m_b1, b2, -1)
            # Transverse directions (+e_b1, +e_b2, -e_b1, -e_b2): the face in
            # direction +e_g has normal b (the other transverse axis) and
            # anchor cell v - e_b.
            edge_partners[e, 0] = face_id(b2, m_b2)   # +e_b1
            edge_partners[e, 1] = face_id(b1, m_b1)   # +e_b2
            edge_partners[e, 2] = face_id(b2, m_b12)  # -e_b1
            edge_partners[e, 3] = face_id(b1, m_b12)  # -e_b2

    # Invert to the per-face ordered partner list; each (face, edge) gate must
    # occupy the same round in both orderings for the schedule to be a valid
    # 4-edge-coloring.
    face_partners = np.full((n_faces, 4), -1, dtype=np.int32)
    for e in range(n_edges):
        for r in range(4):
            f = edge_partners[e, r]
            if face_partners[f, r] != -1:
                raise AssertionError("schedule is not a perfect matching per round")
            face_partners[f, r] = e
    if (face_partners < 0).any():
        raise AssertionError("schedule does not cover every face in every round")

    hook_dets = np.empty((n_edges, 2), dtype=np.int32)
    hook_mask = np.empty(n_edges, dtype=np.uint8)
    for e in range(n_edges):
        f3, f4 = int(edge_partners[e, 2]), int(edge_partners[e, 3])
        dets = _symdiff_pairs([tuple(face_dets[f3]), tuple(face_dets[f4])])
        if len(dets) != 2:
            raise AssertionError(
                f"late-partner kick of edge {e} flips {len(dets)} detectors, expected 2"
            )
        hook_dets[e] = sorted(dets)
        hook_mask[e] = face_mask[f3] ^ face_mask[f4]

    surfaces = tuple(
        np.sort(np.flatnonzero(face_mask & (1 << axis)).astype(np.int32))
        for axis in range(3)
    )
    for axis in range(3):
        if len(surfaces[axis]) != d * d:
            raise AssertionError("correlation surface must contain d^2 faces")

    return Lattice(
        d=d,
        n_cells=n_cells,
        n_faces=n_faces,
        n_edges=n_edges,
        face_cell=face_cell,
        face_axis=face_axis,
        face_dets=face_dets,
        face_mask=face_mask,
        edge_vertex=edge_vertex,
        edge_axis=edge_axis,
        edge_partners=edge_partners,
        face_partners=face_partners,
        hook_dets=hook_dets,
        hook_mask=hook_mask,
        surfaces=surfaces,  # type: ignore[arg-type]
    )


def _symdiff_pairs(pairs: Iterable[Tuple[int, int]]) -> set:
    out: set = set()
    for a, b in pairs:
        out ^= {int(a), int(b)}
    return out


def detector_flip_set(lattice: Lattice, faces: Iterable[int]) -> set:
    """Detectors flipped by Z errors on the given face qubits.

    Each face feeds exactly two detectors, so the result is the symmetric
    difference of those pairs; it always has even cardinality.
    """
    return _symdiff_pairs(tuple(lattice.face_dets[f]) for f in faces)


def logical_flip_mask(lattice: Lattice, faces: Iterable[int]) -> int:
    """3-bit mask of correlation surfaces flipped by Z errors on ``faces``."""
    mask = 0
    for f in faces:
        mask ^= int(lattice.face_mask[f])
    return mask


def reduce_mod_stabilizer(subset: Iterable[int]) -> Subset:
    """Canonical representative of a partner subset modulo the joint 4-kick.

    A Z kick on all four CZ partners of one edge qubit flips no detector and
    no logical observable, so any subset of ``{1,2,3,4}`` is equivalent to its
    complement.  Returns whichever of the two has size <= 2; a 2-vs-2 tie
    returns the input unchanged.
    """
    s = frozenset(int(i) for i in subset)
    if not s <= {1, 2, 3, 4}:
        raise ValueError(f"subset must be within {{1,2,3,4}}, got {sorted(s)}")
    if len(s) <= 2:
        return s
    return frozenset({1, 2, 3, 4}) - s
