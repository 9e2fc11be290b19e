"""Undirected graphs, dominant-eigenvalue computation and graph generators.

A :class:`Graph` stores a simple undirected graph in CSR form together with an
independent per-vertex self-loop flag. Conflict graphs always carry a loop on
every vertex; interference graphs usually carry none.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with optional self-loops.

    ``indptr``/``indices`` hold sorted, loop-free neighbor lists; ``self_loops``
    flags which vertices carry a loop.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    self_loops: np.ndarray

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.self_loops):
            arr.setflags(write=False)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def closed_neighborhood(self, i: int) -> np.ndarray:
        """Sorted ids of ``{i} ∪ N(i)``."""
        return np.sort(np.append(self.neighbors(i), i))

    @property
    def degrees(self) -> np.ndarray:
        """Degrees counting neighbors only (loops excluded)."""
        return np.diff(self.indptr)

    @property
    def loop_degrees(self) -> np.ndarray:
        """Degrees counting a self-loop as one incident edge."""
        return self.degrees + self.self_loops.astype(np.int64)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    def edges(self) -> np.ndarray:
        """Array of shape (m, 2) with ``i < j`` for every non-loop edge."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return bool(self.self_loops[i])
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < nb.size and nb[k] == j)

    def adjacency(self, loops: bool = True, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=dtype)
        a = sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))
        if loops and self.self_loops.any():
            a = a + sp.diags(self.self_loops.astype(dtype), format="csr")
        return a.tocsr()

    def with_self_loops(self, flag: bool = True) -> "Graph":
        return Graph(self.n, self.indptr, self.indices, np.full(self.n, flag, dtype=bool))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.self_loops, other.self_loops)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges}, loops={int(self.self_loops.sum())})"


def from_edge_list(n: int, edges: Iterable, self_loops=()) -> Graph:
    """Build a symmetric, deduplicated graph from ``(i, j)`` pairs.

    ``self_loops`` is either a boolean flag applied to every vertex or an
    iterable of vertex ids that carry a loop. Loops may not appear in ``edges``.
    """
    if n < 0:
        raise GraphError(f"vertex count must be nonnegative, got {n}")
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    e = e.reshape(-1, 2)
    if e.size:
        if e.min() < 0 or e.max() >= n:
            bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
            raise GraphError(f"edge {tuple(bad)} has a vertex outside [0, {n})")
        if (e[:, 0] == e[:, 1]).any():
            bad = e[e[:, 0] == e[:, 1]][0]
            raise GraphError(f"edge {tuple(bad)} is a self-loop; use the self_loops argument")
    both = np.concatenate([e, e[:, ::-1]]) if e.size else e
    m = sp.csr_matrix(
        (np.ones(len(both), dtype=np.int8), (both[:, 0], both[:, 1])), shape=(n, n)
    )
    m.sum_duplicates()
    m.sort_indices()
    loops = _loop_flags(n, self_loops)
    return Graph(n, m.indptr.astype(np.int64), m.indices.astype(np.int64), loops)


def _loop_flags(n: int, self_loops) -> np.ndarray:
    if isinstance(self_loops, (bool, np.bool_)):
        return np.full(n, bool(self_loops))
    flags = np.zeros(n, dtype=bool)
    ids = np.asarray(list(self_loops), dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise GraphError("self-loop vertex outside range")
    flags[ids] = True
    return flags


def from_sparse(a: sp.spmatrix, self_loops=True) -> Graph:
    """Graph from the off-diagonal pattern of a symmetric sparse matrix."""
    a = sp.coo_matrix(a)
    keep = (a.row != a.col) & (a.data != 0)
    return from_edge_list(a.shape[0], np.column_stack([a.row[keep], a.col[keep]]), self_loops)


def power_graph_two(g: Graph) -> Graph:
    """Edges between distinct vertices at distance at most two; loops everywhere."""
    a = g.adjacency(loops=False)
    a2 = a + a @ a
    return from_sparse(a2, self_loops=True)


# ---------------------------------------------------------------------------
# spectral


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    vector: np.ndarray
    iterations: int
    residual: float
    components: np.ndarray  # component label per vertex


def largest_eigenvalue(g: Graph, tol: float = 1e-10, max_iter: int = 100_000) -> SpectralResult:
    """Dominant eigenvalue and Perron vector of the loop-inclusive adjacency.

    Power iteration runs separately on every connected component, starting
    from the normalized all-ones vector, on ``A + I`` so that bipartite
    components do not oscillate. Iteration stops once
    ``||A v - lam v||_inf <= tol * lam``. The returned vector is a unit
    Perron vector on each component.
    """
    if g.n < 1:
        raise GraphError("largest_eigenvalue needs at least one vertex")
    a = g.adjacency(loops=True)
    ncomp, labels = connected_components(a, directed=False)
    vec = np.zeros(g.n)
    lam = 0.0
    iters = 0
    resid = 0.0
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    for c in range(ncomp):
        members = order[bounds[c]:bounds[c + 1]]
        if members.size == 1:
            v = members[0]
            lam_c = float(g.self_loops[v])
            vec[v] = 1.0
            lam = max(lam, lam_c)
            continue
        sub = a[members][:, members]
        lam_c, v, it, res = _power_iterate(sub, tol, max_iter, shift=1.0)
        vec[members] = v
        lam = max(lam, lam_c)
        iters = max(iters, it)
        resid = max(resid, res)
    return SpectralResult(lam, vec, iters, resid, labels)


def _power_iterate(m: sp.spmatrix, tol: float, max_iter: int, shift: float = 0.0, start=None,
                   criterion: str = "residual"):
    """Power iteration on ``m + shift*I``; returns ``(lam, v, iterations, rel_residual)``.

    ``criterion="residual"`` stops on ``||m v - lam v||_inf <= tol * lam``;
    ``"rayleigh"`` stops once the Rayleigh quotient changes by at most
    ``tol`` relative, which stays fast when the top eigenvalues nearly tie.
    """
    size = m.shape[0]
    v = np.ones(size) if start is None else np.asarray(start, dtype=float).copy()
    v /= np.linalg.norm(v)
    res = np.inf
    prev = np.inf
    for it in range(1, max_iter + 1):
        w = m @ v + shift * v
        mu = float(v @ w)
        lam = mu - shift
        scale = max(abs(lam), np.finfo(float).tiny)
        res = float(np.max(np.abs(w - mu * v)))
        if criterion == "rayleigh":
            done = abs(lam - prev) <= tol * scale
        else:
            done = res <= tol * scale
        if done:
            return lam, np.abs(v) if start is None else v, it, res / scale
        prev = lam
        norm = np.linalg.norm(w)
        if norm == 0:
            # v lies in the null space of the shifted matrix
            return lam, v, it, 0.0
        v = w / norm
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations (residual {res:.3e})", res
    )


def walk_count(g: Graph, i: int, j: int, s: int) -> int:
    """Number of walks of length ``s`` from ``i`` to ``j`` over non-loop edges."""
    if s not in (1, 2, 3, 4):
        raise GraphError(f"walk length must be in 1..4, got {s}")
    a = g.adjacency(loops=False, dtype=np.int64)
    x = np.zeros(g.n, dtype=np.int64)
    x[j] = 1
    for _ in range(s):
        x = a @ x
    return int(x[i])


def walk_count_matrix(g: Graph, s: int) -> np.ndarray:
    """Dense integer matrix of all length-``s`` walk counts."""
    a = g.adjacency(loops=False, dtype=np.int64)
    out = sp.identity(g.n, dtype=np.int64, format="csr")
    for _ in range(s):
        out = out @ a
    return out.toarray()


# ---------------------------------------------------------------------------
# generators


def path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs n >= 1")
    return from_edge_list(n, [(i, i + 1) for i in range(n - 1)])


def star(n: int) -> Graph:
    """Vertex 0 joined to vertices ``1..n-1``."""
    if n < 1:
        raise GraphError("star needs n >= 1")
    return from_edge_list(n, [(0, i) for i in range(1, n)])


def clique(n: int) -> Graph:
    if n < 1:
        raise GraphError("clique needs n >= 1")
    iu = np.triu_indices(n, 1)
    return from_edge_list(n, np.column_stack(iu))


def empty(n: int) -> Graph:
    return from_edge_list(n, [])


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return from_edge_list(n, np.column_stack([iu[keep], ju[keep]]))


def preferential_attachment(n: int, m: int, r_exp: float, rng: np.random.Generator) -> Graph:
    """Nonlinear preferential attachment.

    Starts from ``m`` isolated vertices; vertex ``t`` then attaches to ``m``
    distinct earlier vertices drawn with probability proportional to
    ``deg(i) ** r_exp``. Degree-zero vertices get the smallest positive weight
    present (or 1 when every degree is zero).
    """
    if not (n > m >= 1):
        raise GraphError(f"preferential attachment needs n > m >= 1, got n={n}, m={m}")
    deg = np.zeros(n, dtype=np.int64)
    edges = np.empty(((n - m) * m, 2), dtype=np.int64)
    k = 0
    for t in range(m, n):
        w = deg[:t].astype(float) ** r_exp
        pos = w > 0
        if not pos.all():
            w[~pos] = w[pos].min() if pos.any() else 1.0
        targets = rng.choice(t, size=m, replace=False, p=w / w.sum())
        edges[k:k + m, 0] = t
        edges[k:k + m, 1] = targets
        k += m
        deg[targets] += 1
        deg[t] = m
    return from_edge_list(n, edges)


class HubLayout(NamedTuple):
    hub: int
    secondary: np.ndarray
    blocks: list
    block_size: int


def hub_cliques_layout(n: int) -> HubLayout:
    """Vertex roles of :func:`hub_cliques`.

    Vertex 0 is the main hub, vertices ``1..m`` the secondary hubs and the
    remaining ``n`` vertices are split into consecutive blocks of
    ``t = ceil(sqrt(n) * ln n)`` (the last block may be shorter), with
    ``m = ceil(n / t)``.
    """
    if n < 4:
        raise GraphError("hub_cliques needs n >= 4")
    t = min(n, math.ceil(math.sqrt(n) * math.log(n)))
    m = math.ceil(n / t)
    base = 1 + m
    blocks = [np.arange(base + b * t, base + min(n, (b + 1) * t)) for b in range(m)]
    return HubLayout(0, np.arange(1, 1 + m), blocks, t)


def hub_cliques(n: int) -> Graph:
    """Slow-rate graph: a hub over ``n`` block vertices plus block-local hubs."""
    lay = hub_cliques_layout(n)
    total = 1 + len(lay.secondary) + n
    edges = [(lay.hub, v) for v in range(1 + len(lay.secondary), total)]
    for k, block in zip(lay.secondary, lay.blocks):
        edges.extend((int(k), int(v)) for v in block)
    return from_edge_list(total, edges)


def clique_of_cliques(n: int) -> Graph:
    """``k = ceil(sqrt(n))`` disjoint ``k``-cliques whose first vertices form a clique."""
    if n < 1:
        raise GraphError("clique_of_cliques needs n >= 1")
    k = math.isqrt(n)
    if k * k < n:
        k += 1
    edges = []
    for c in range(k):
        base = c * k
        edges.extend((base + a, base + b) for a in range(k) for b in range(a + 1, k))
    reps = [c * k for c in range(k)]
    edges.extend((reps[a], reps[b]) for a in range(k) for b in range(a + 1, k))
    return from_edge_list(k * k, edges)


# ---------------------------------------------------------------------------
# edge-list files


def read_edge_list(path) -> Graph:
    """Parse ``n <count>`` followed by ``i j`` lines (0-indexed, no loops)."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2 or lines[0][0] != "n":
        raise GraphError(f"{path}: first line must be 'n <count>'")
    try:
        n = int(lines[0][1])
        edges = [(int(a), int(b)) for a, b in lines[1:]]
    except ValueError as exc:
        raise GraphError(f"{path}: malformed edge line ({exc})") from None
    return from_edge_list(n, edges)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"n {g.n}\n")
        for i, j in g.edges():
            fh.write(f"{i} {j}\n")
