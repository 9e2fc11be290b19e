"""Contrastive estimands, exposure mappings and conflict graphs.

Every estimand fixes, for each unit ``i``, two exposures ``e1`` and ``e0``:
the sets of treated units inside the closed neighborhood ``Ñ(i)`` under the
two contrasting interventions. An exposure pins the whole of ``z`` on
``Ñ(i)`` (members treated, everything else in ``Ñ(i)`` untreated), which is
what the conflict predicate works with.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .graph import Graph, from_edge_list, power_graph_two

GATE = "gate"
DIRECT = "direct"
SPILLOVER = "spillover"
CUSTOM = "custom"
KINDS = (GATE, DIRECT, SPILLOVER, CUSTOM)


class EstimandError(ValueError):
    pass


@dataclass(frozen=True)
class Estimand:
    """Contrastive estimand.

    ``seeds`` (spill-over only) holds ``M_i`` per unit. ``z1``/``z0`` (custom
    only) hold per unit a mapping ``unit -> bit`` over ``Ñ(i)``; unlisted
    neighborhood coordinates are 0.
    """

    kind: str
    seeds: Optional[tuple] = None
    z1: Optional[tuple] = None
    z0: Optional[tuple] = None

    @classmethod
    def gate(cls) -> "Estimand":
        return cls(GATE)

    @classmethod
    def direct(cls) -> "Estimand":
        return cls(DIRECT)

    @classmethod
    def spillover(cls, seeds) -> "Estimand":
        return cls(SPILLOVER, seeds=tuple(tuple(sorted(set(int(u) for u in s))) for s in seeds))

    @classmethod
    def custom(cls, z1, z0) -> "Estimand":
        def norm(z):
            return tuple(tuple(sorted((int(u), int(b)) for u, b in dict(zi).items())) for zi in z)

        return cls(CUSTOM, z1=norm(z1), z0=norm(z0))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EstimandError(f"unknown estimand kind {self.kind!r}")

    # -- per-unit exposures ------------------------------------------------

    def exposures(self, g: Graph, i: int) -> tuple[frozenset, frozenset]:
        if self.kind == GATE:
            return frozenset(g.closed_neighborhood(i).tolist()), frozenset()
        if self.kind == DIRECT:
            return frozenset((i,)), frozenset()
        if self.kind == SPILLOVER:
            return frozenset(self.seeds[i]), frozenset()
        return (
            frozenset(u for u, b in self.z1[i] if b),
            frozenset(u for u, b in self.z0[i] if b),
        )

    def validate(self, g: Graph) -> None:
        if self.kind == SPILLOVER:
            if self.seeds is None or len(self.seeds) != g.n:
                raise EstimandError(f"spill-over estimand needs seeds for all {g.n} units")
            for i, s in enumerate(self.seeds):
                if not s:
                    raise EstimandError(f"unit {i}: seed set is empty")
                nb = set(g.neighbors(i).tolist())
                extra = set(s) - nb
                if extra:
                    raise EstimandError(f"unit {i}: seeds {sorted(extra)} are not neighbors")
        elif self.kind == CUSTOM:
            for name, z in (("z1", self.z1), ("z0", self.z0)):
                if z is None or len(z) != g.n:
                    raise EstimandError(f"custom estimand needs {name} for all {g.n} units")
            for i in range(g.n):
                closed = set(g.closed_neighborhood(i).tolist())
                for name, z in (("z1", self.z1), ("z0", self.z0)):
                    for u, b in z[i]:
                        if u not in closed:
                            raise EstimandError(
                                f"unit {i}: {name} sets coordinate {u} outside its closed neighborhood"
                            )
                        if b not in (0, 1):
                            raise EstimandError(f"unit {i}: {name} bit must be 0 or 1, got {b}")
                e1, e0 = self.exposures(g, i)
                if e1 == e0:
                    raise EstimandError(f"unit {i}: contrasting interventions give the same exposure")

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == SPILLOVER:
            out["seeds"] = [list(s) for s in self.seeds]
        if self.kind == CUSTOM:
            out["z1"] = [[list(p) for p in zi] for zi in self.z1]
            out["z0"] = [[list(p) for p in zi] for zi in self.z0]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Estimand":
        kind = obj.get("kind")
        if kind == GATE:
            return cls.gate()
        if kind == DIRECT:
            return cls.direct()
        if kind == SPILLOVER:
            if "seeds" not in obj:
                raise EstimandError("spill-over estimand JSON needs 'seeds'")
            return cls.spillover(obj["seeds"])
        if kind == CUSTOM:
            if "z1" not in obj or "z0" not in obj:
                raise EstimandError("custom estimand JSON needs 'z1' and 'z0'")
            return cls.custom([dict(map(tuple, zi)) for zi in obj["z1"]],
                              [dict(map(tuple, zi)) for zi in obj["z0"]])
        raise EstimandError(f"unknown estimand kind {kind!r}")


def load_estimand(path_or_name) -> Estimand:
    """Read an estimand JSON file; the bare names ``gate``/``direct`` also work."""
    if str(path_or_name) in (GATE, DIRECT):
        return Estimand(str(path_or_name))
    with open(path_or_name) as fh:
        return Estimand.from_json(json.load(fh))


# ---------------------------------------------------------------------------


def exposure_of(g: Graph, i: int, z) -> frozenset:
    """Treated units inside ``Ñ(i)`` under intervention ``z``."""
    z = np.asarray(z)
    nb = g.closed_neighborhood(i)
    return frozenset(nb[z[nb] == 1].tolist())


def contrastive_exposures(g: Graph, est: Estimand, i: int) -> tuple[frozenset, frozenset]:
    if est.kind in (SPILLOVER, CUSTOM):
        est.validate(g)
    return est.exposures(g, i)


def _pins_disagree(g: Graph, i: int, a: frozenset, j: int, b: frozenset) -> bool:
    shared = np.intersect1d(g.closed_neighborhood(i), g.closed_neighborhood(j))
    return any((u in a) != (u in b) for u in shared.tolist())


def conflict(g: Graph, est: Estimand, i: int, j: int) -> bool:
    """Whether no intervention realizes some pair of contrastive exposures of i and j."""
    if i == j:
        return True
    ei = est.exposures(g, i)
    ej = est.exposures(g, j)
    return any(_pins_disagree(g, i, a, j, b) for a in ei for b in ej)


def build_conflict_graph(g: Graph, est: Estimand) -> Graph:
    """Conflict graph with a self-loop on every unit."""
    est.validate(g)
    if est.kind == DIRECT:
        return g.with_self_loops(True)
    if est.kind == GATE:
        return power_graph_two(g)
    if est.kind == SPILLOVER:
        return _spillover_conflicts(g, est)
    pairs = power_graph_two(g).edges()
    keep = [(int(i), int(j)) for i, j in pairs if conflict(g, est, int(i), int(j))]
    return from_edge_list(g.n, keep, self_loops=True)


def _spillover_conflicts(g: Graph, est: Estimand) -> Graph:
    # i ~ j iff a seed of i or of j lies in Ñ(i) ∩ Ñ(j). Seeds of i already
    # sit in Ñ(i), so (T1 Ñ)[i, j] = |M_i ∩ Ñ(j)| > 0 covers one direction.
    t1, _ = contrast_matrices(g, est)
    closed = closed_adjacency(g)
    reach = (t1 @ closed).astype(bool)
    pattern = (reach + reach.T).tocoo()
    keep = pattern.row != pattern.col
    return from_edge_list(g.n, np.column_stack([pattern.row[keep], pattern.col[keep]]), True)


def closed_adjacency(g: Graph) -> sp.csr_matrix:
    """0/1 matrix with ones on ``Ñ(i)`` in row ``i``."""
    a = g.adjacency(loops=False, dtype=np.int8) + sp.identity(g.n, dtype=np.int8, format="csr")
    return a.tocsr()


def contrast_matrices(g: Graph, est: Estimand) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse 0/1 matrices ``T1``, ``T0`` with ``T_k[i, j] = 1`` iff ``j ∈ e_k(i)``."""
    rows = [[], []]
    cols = [[], []]
    if est.kind == GATE:
        return closed_adjacency(g), sp.csr_matrix((g.n, g.n), dtype=np.int8)
    if est.kind == DIRECT:
        return sp.identity(g.n, dtype=np.int8, format="csr"), sp.csr_matrix((g.n, g.n), dtype=np.int8)
    for i in range(g.n):
        for k, e in zip((1, 0), est.exposures(g, i)):
            rows[k].extend([i] * len(e))
            cols[k].extend(sorted(e))
    mats = [
        sp.csr_matrix((np.ones(len(rows[k]), dtype=np.int8), (rows[k], cols[k])), shape=(g.n, g.n))
        for k in (1, 0)
    ]
    return mats[0], mats[1]
