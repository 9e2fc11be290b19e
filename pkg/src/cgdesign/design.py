"""The Conflict Graph Design sampler, its exact probabilities, and baselines.

Desired exposures are coded as int8: ``E0 = 0``, ``E1 = 1``, ``STAR = 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .estimand import Estimand, build_conflict_graph, closed_adjacency, contrast_matrices
from .graph import Graph, largest_eigenvalue
from .ordering import ImportanceOrdering, eigenvector_ordering

E0 = 0
E1 = 1
STAR = 2
SYMBOLS = {E1: "1", E0: "0", STAR: "*"}


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class DesignParams:
    lam: float
    r: float = 2.0

    def __post_init__(self):
        if not (self.r > 0 and self.lam >= 1 - 1e-12):
            raise DesignError(f"need r > 0 and lambda >= 1, got r={self.r}, lambda={self.lam}")
        if self.r * self.lam < 1 - 1e-12:
            raise DesignError(f"r * lambda must be at least 1, got {self.r * self.lam}")

    @property
    def p(self) -> float:
        """Probability of each non-null desired exposure."""
        return 1.0 / (2.0 * self.r * self.lam)

    @property
    def q(self) -> float:
        """Probability of the null desired exposure ``*``."""
        return max(0.0, 1.0 - 1.0 / (self.r * self.lam))


@dataclass(frozen=True)
class DesignDraw:
    u: np.ndarray
    z: np.ndarray

    def u_string(self) -> str:
        return "".join(SYMBOLS[int(c)] for c in self.u)

    def z_string(self) -> str:
        return "".join(str(int(b)) for b in self.z)


@dataclass(eq=False)
class ConflictGraphDesign:
    """A fully prepared design: graph, estimand, conflict graph, ordering, parameters.

    Use :meth:`prepare` to build the conflict graph, its eigenvalue and the
    eigenvector ordering in one step.
    """

    g: Graph
    est: Estimand
    h: Graph
    ordering: ImportanceOrdering
    params: DesignParams
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.h.n != self.g.n or self.ordering.n != self.g.n:
            raise DesignError("graph, conflict graph and ordering sizes differ")
        if abs(self.params.r * self.params.lam - 1) < 1e-12 and self.h.num_edges > 0:
            raise DesignError("r * lambda = 1 leaves no null option; only valid without conflicts")
        self.t1, self.t0 = contrast_matrices(self.g, self.est)
        self.closed = closed_adjacency(self.g)

    @classmethod
    def prepare(cls, g: Graph, est: Estimand, r: float = 2.0, ordering=None) -> "ConflictGraphDesign":
        h = build_conflict_graph(g, est)
        spec = largest_eigenvalue(h)
        if ordering is None:
            ordering = eigenvector_ordering(h, spec)
        elif callable(ordering):
            ordering = ordering(h)
        return cls(g, est, h, ordering, DesignParams(spec.lam, r))

    @property
    def n(self) -> int:
        return self.g.n

    # -- sampling ------------------------------------------------------------

    def draw_u(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Desired exposures; consumes ``n`` uniforms per draw in vertex order."""
        shape = (self.n,) if size is None else (size, self.n)
        return u_from_uniforms(rng.random(shape), self.params)

    def events(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Indicators of the desired exposure events ``E_(i,1)`` and ``E_(i,0)``."""
        return desired_events(u, self.ordering)

    def realize(self, u: np.ndarray) -> np.ndarray:
        """Intervention produced by the design for desired exposures ``u``.

        Units whose desired event fires are pairwise non-conflicting, so the
        neighborhoods they write agree wherever they overlap; ``Z`` is the union
        of their treated sets.
        """
        f1, f0 = self.events(np.atleast_2d(u))
        treated = (self.t1.T @ f1.T.astype(np.float64)) + (self.t0.T @ f0.T.astype(np.float64))
        z = (treated.T > 0).astype(np.int8)
        return z[0] if u.ndim == 1 else z

    def sample(self, rng: np.random.Generator) -> DesignDraw:
        u = self.draw_u(rng)
        return DesignDraw(u, self.realize(u))

    def sample_batch(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        u = self.draw_u(rng, size)
        return u, self.realize(u)

    def realize_loop(self, u: np.ndarray, visit=None) -> np.ndarray:
        """Literal for-loop form of the design, visiting units in ``visit`` order."""
        z = np.zeros(self.n, dtype=np.int8)
        visit = range(self.n) if visit is None else visit
        for i in visit:
            if u[i] == STAR:
                continue
            if np.any(u[self.ordering.before_set(i)] != STAR):
                continue
            t = self.t1 if u[i] == E1 else self.t0
            nb = self.g.closed_neighborhood(i)
            z[nb] = 0
            z[t.indices[t.indptr[i]:t.indptr[i + 1]]] = 1
        return z

    # -- exact probabilities -------------------------------------------------

    def prob_single(self) -> np.ndarray:
        """``Pr[E_(i,k)]`` for every unit (identical for both k)."""
        if "p1" not in self._cache:
            self._cache["p1"] = self.params.p * self.params.q ** self.ordering.before_counts
        return self._cache["p1"]

    def shared_parents(self) -> sp.csr_matrix:
        """Sparse ``|N_b(i) ∩ N_b(j)|`` counts."""
        if "shared" not in self._cache:
            b = self.ordering.before.astype(np.int64)
            self._cache["shared"] = (b @ b.T).tocsr()
        return self._cache["shared"]

    def prob_pair(self, i: int, k: int, j: int, l: int) -> float:
        return prob_pair(i, k, j, l, self.h, self.ordering, self.params)

    def covariance_entry(self, i: int, k: int, j: int, l: int) -> float:
        return covariance_entry(i, k, j, l, self.h, self.ordering, self.params)


# ---------------------------------------------------------------------------
# free-function forms


def u_from_uniforms(x: np.ndarray, params: DesignParams) -> np.ndarray:
    """Map uniforms to desired exposures: ``[0, p)`` is e1, ``[p, 2p)`` is e0."""
    u = np.full(x.shape, STAR, dtype=np.int8)
    u[x < 2 * params.p] = E0
    u[x < params.p] = E1
    return u


def desired_events(u: np.ndarray, ordering: ImportanceOrdering) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized desired-event indicators for one draw or a batch of rows."""
    u = np.asarray(u)
    u2 = np.atleast_2d(u)
    active = (u2 != STAR).astype(np.float64)
    blocked = (ordering.before.astype(np.float64) @ active.T).T > 0
    f1 = (u2 == E1) & ~blocked
    f0 = (u2 == E0) & ~blocked
    if u.ndim == 1:
        return f1[0], f0[0]
    return f1, f0


def sample(g: Graph, est: Estimand, h: Graph, ordering: ImportanceOrdering,
           params: DesignParams, rng: np.random.Generator) -> DesignDraw:
    return ConflictGraphDesign(g, est, h, ordering, params).sample(rng)


def desired_event(i: int, k: int, u, ordering: ImportanceOrdering) -> bool:
    u = np.asarray(u)
    if u[i] != (E1 if k == 1 else E0):
        return False
    return bool(np.all(u[ordering.before_set(i)] == STAR))


def prob_single(i: int, k: int, ordering: ImportanceOrdering, params: DesignParams) -> float:
    return params.p * params.q ** int(ordering.before_counts[i])


def prob_pair(i: int, k: int, j: int, l: int, h: Graph,
              ordering: ImportanceOrdering, params: DesignParams) -> float:
    if i == j:
        return prob_single(i, k, ordering, params) if k == l else 0.0
    if h.has_edge(i, j):
        return 0.0
    union = np.union1d(ordering.before_set(i), ordering.before_set(j)).size
    return params.p ** 2 * params.q ** union


def covariance_entry(i: int, k: int, j: int, l: int, h: Graph,
                     ordering: ImportanceOrdering, params: DesignParams) -> float:
    """Covariance of ``1{E_(i,k)}/Pr`` and ``1{E_(j,l)}/Pr``."""
    if i == j:
        if k != l:
            return -1.0
        return 1.0 / prob_single(i, k, ordering, params) - 1.0
    if h.has_edge(i, j):
        return -1.0
    shared = np.intersect1d(ordering.before_set(i), ordering.before_set(j)).size
    if shared == 0:
        return 0.0
    return params.q ** (-shared) - 1.0


# ---------------------------------------------------------------------------
# baselines


def bernoulli_design(n: int, p: float, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    shape = (n,) if size is None else (size, n)
    return (rng.random(shape) < p).astype(np.int8)


def independent_set_design(g: Graph, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Random greedy maximal independent set, then fair coins on the set.

    The set equals the one built by scanning vertices in a uniformly random
    order and keeping each vertex with no kept neighbor; it is computed in
    parallel rounds (a vertex is kept once its priority beats every undecided
    neighbor).
    """
    single = size is None
    rounds = 1 if single else size
    # each draw consumes 2n uniforms back to back, so batching does not matter
    x = rng.random((rounds, 2, g.n))
    prio = x[:, 0]
    coins = x[:, 1] < 0.5
    in_set = greedy_mis(g, prio)
    z = (in_set & coins).astype(np.int8)
    return z[0] if single else z


def greedy_mis(g: Graph, prio: np.ndarray) -> np.ndarray:
    """Greedy maximal independent sets for each row of priorities (lower first)."""
    prio = np.atleast_2d(prio)
    rows, n = prio.shape
    dst = g.indices
    adj = g.adjacency(loops=False)
    undecided = np.ones((rows, n), dtype=bool)
    in_set = np.zeros((rows, n), dtype=bool)
    nonempty = np.flatnonzero(g.degrees > 0)
    starts = g.indptr[nonempty]
    while undecided.any():
        best = np.full((rows, n), np.inf)
        if dst.size:
            nb_prio = np.where(undecided[:, dst], prio[:, dst], np.inf)
            best[:, nonempty] = np.minimum.reduceat(nb_prio, starts, axis=1)
        win = undecided & (prio < best)
        in_set |= win
        undecided &= ~win
        if dst.size:
            undecided &= ~((adj @ win.T.astype(np.float64)).T > 0)
    return in_set
