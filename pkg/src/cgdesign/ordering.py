"""Importance orderings of a conflict graph.

An ordering lists units from most to least important. ``before[i]`` is the
set of conflict-graph neighbors placed ahead of ``i``; an ordering is an
importance ordering when no unit has more than ``lam - 1`` of them.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, SpectralResult

TIE_RTOL = 1e-9


class OrderingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImportanceOrdering:
    """Vertex ordering plus its directed parent structure.

    ``order[p]`` is the unit in position ``p`` (0 = most important) and
    ``position`` is its inverse. ``before`` is a CSR matrix whose row ``i``
    marks the more important conflict neighbors of ``i``; its transpose
    marks the less important ones.
    """

    order: np.ndarray
    position: np.ndarray
    before: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.order.size

    @property
    def after(self) -> sp.csr_matrix:
        return self.before.T.tocsr()

    def before_set(self, i: int) -> np.ndarray:
        b = self.before
        return b.indices[b.indptr[i]:b.indptr[i + 1]]

    def after_set(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.before[:, i].toarray().ravel())

    @property
    def before_counts(self) -> np.ndarray:
        return np.diff(self.before.indptr)


def from_order(h: Graph, order) -> ImportanceOrdering:
    """Wrap a permutation (most important first) of the vertices of ``h``."""
    order = np.asarray(order, dtype=np.int64)
    if order.size != h.n or not np.array_equal(np.sort(order), np.arange(h.n)):
        raise OrderingError("ordering must be a permutation of the vertices")
    position = np.empty(h.n, dtype=np.int64)
    position[order] = np.arange(h.n)
    rows = np.repeat(np.arange(h.n), h.degrees)
    cols = h.indices
    keep = position[cols] < position[rows]
    before = sp.csr_matrix(
        (np.ones(int(keep.sum()), dtype=np.int8), (rows[keep], cols[keep])), shape=(h.n, h.n)
    )
    before.sort_indices()
    order.setflags(write=False)
    position.setflags(write=False)
    return ImportanceOrdering(order, position, before)


def eigenvector_ordering(h: Graph, spec: SpectralResult) -> ImportanceOrdering:
    """Sort each component by Perron entry (descending), ties by vertex id.

    Entries within ``TIE_RTOL`` (relative to the component maximum) of the
    previous entry count as tied. Components are concatenated in order of
    their smallest vertex id.
    """
    if spec.vector.shape != (h.n,) or spec.components.shape != (h.n,):
        raise OrderingError("spectral result does not match the conflict graph")
    labels = spec.components
    first_seen = {}
    for v, c in enumerate(labels.tolist()):
        first_seen.setdefault(c, v)
    chunks = []
    for c in sorted(first_seen, key=first_seen.get):
        members = np.flatnonzero(labels == c)
        chunks.append(_sort_with_ties(members, spec.vector[members]))
    return from_order(h, np.concatenate(chunks))


def _sort_with_ties(ids: np.ndarray, vals: np.ndarray) -> np.ndarray:
    idx = np.lexsort((ids, -vals))
    ids, vals = ids[idx], vals[idx]
    tol = TIE_RTOL * max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
    # runs of near-equal values are re-sorted by vertex id
    breaks = np.flatnonzero(vals[:-1] - vals[1:] > tol) + 1
    return np.concatenate([np.sort(run) for run in np.split(ids, breaks)])


def sequential_degree_ordering(h: Graph) -> ImportanceOrdering:
    """Repeatedly peel a minimum-degree vertex into the last free position.

    Among tied vertices the largest id is peeled first, so tied vertices end
    up in ascending id order. Uses a lazy-deletion heap, so runs in
    ``O((n + m) log n)``.
    """
    deg = h.degrees.astype(np.int64).copy()
    removed = np.zeros(h.n, dtype=bool)
    heap = [(int(d), -v) for v, d in enumerate(deg)]
    heapq.heapify(heap)
    order = np.empty(h.n, dtype=np.int64)
    slot = h.n - 1
    while heap:
        d, v = heapq.heappop(heap)
        v = -v
        if removed[v] or d != deg[v]:
            continue
        removed[v] = True
        order[slot] = v
        slot -= 1
        for u in h.neighbors(v):
            if not removed[u]:
                deg[u] -= 1
                heapq.heappush(heap, (int(deg[u]), -int(u)))
    return from_order(h, order)


def verify_importance(h: Graph, ordering: ImportanceOrdering, lam: float) -> bool:
    if ordering.n != h.n:
        raise OrderingError("ordering and graph sizes differ")
    if h.n == 0:
        return True
    return bool(ordering.before_counts.max() <= lam - 1 + 1e-9)


# ---------------------------------------------------------------------------
# counting helpers over an interference graph with an induced ordering


def boundary_edges(g: Graph, a, b) -> int:
    """Edges of ``g`` whose endpoints lie in different cells of
    ``{A ∩ B, A \\ B, B \\ A}``."""
    a, b = set(a), set(b)
    cell = {}
    for v in a | b:
        cell[v] = (v in a) + 2 * (v in b)
    count = 0
    for i, j in g.edges():
        ci, cj = cell.get(int(i)), cell.get(int(j))
        if ci is not None and cj is not None and ci != cj:
            count += 1
    return count


def common_parent_products(g: Graph, ordering: ImportanceOrdering, a, b) -> int:
    """Sum over parents ``k`` outside ``A ∪ B`` of ``|N_a(k) ∩ A| * |N_a(k) ∩ B|``.

    Children of ``k`` are its neighbors in ``g`` placed after it.
    """
    a, b = set(a), set(b)
    pos = ordering.position
    total = 0
    for k in range(g.n):
        if k in a or k in b:
            continue
        kids = [int(u) for u in g.neighbors(k) if pos[u] > pos[k]]
        ca = sum(u in a for u in kids)
        cb = sum(u in b for u in kids)
        total += ca * cb
    return total
