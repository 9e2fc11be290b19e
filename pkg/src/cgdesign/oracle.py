"""Exact distribution of the design by enumerating every desired-exposure assignment.

Ground truth for the probabilistic claims at small ``n``. Nothing here reuses
the vectorized sampler: ``Z`` is rebuilt by the literal guarded loop and
events by direct per-unit checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .design import E0, E1, STAR, ConflictGraphDesign, DesignParams
from .estimand import Estimand
from .graph import Graph
from .ordering import ImportanceOrdering

MAX_N = 12
LOG_SPACE_ABOVE = 9

# per-coordinate enumeration order
CODE_ORDER = (E1, E0, STAR)


class OracleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OracleDistribution:
    """All ``3^n`` atoms in lexicographic order (e1 < e0 < * per coordinate)."""

    u: np.ndarray  # (atoms, n) int8
    prob: np.ndarray  # (atoms,)
    z: np.ndarray  # (atoms, n) int8
    n: int

    def __len__(self) -> int:
        return self.prob.size

    @property
    def atoms(self):
        for k in range(len(self)):
            yield self.u[k], float(self.prob[k]), self.z[k]


def _all_assignments(n: int) -> np.ndarray:
    codes = np.array(CODE_ORDER, dtype=np.int8)
    idx = np.array(list(itertools.product(range(3), repeat=n)), dtype=np.int64).reshape(-1, n)
    return codes[idx]


def _atom_probs(u: np.ndarray, params: DesignParams) -> np.ndarray:
    p, q = params.p, params.q
    n = u.shape[1]
    n_on = np.count_nonzero(u != STAR, axis=1)
    n_star = n - n_on
    if n <= LOG_SPACE_ABOVE:
        return p ** n_on * q ** n_star
    with np.errstate(divide="ignore"):
        logp = n_on * math.log(p) + np.where(n_star > 0, n_star * (math.log(q) if q > 0 else -np.inf), 0.0)
    return np.exp(logp)


def algorithm_one(u: np.ndarray, design: ConflictGraphDesign, visit=None) -> np.ndarray:
    """Literal guarded loop, batched over rows of ``u``.

    Units are visited in ordering order unless ``visit`` gives another order.
    """
    u = np.atleast_2d(u)
    z = np.zeros(u.shape, dtype=np.int8)
    g, est, ordering = design.g, design.est, design.ordering
    for i in (ordering.order if visit is None else visit):
        i = int(i)
        parents = ordering.before_set(i)
        free = np.all(u[:, parents] == STAR, axis=1)
        e1, e0 = est.exposures(g, i)
        nb = g.closed_neighborhood(i)
        for code, treated in ((E1, e1), (E0, e0)):
            rows = np.flatnonzero(free & (u[:, i] == code))
            if rows.size == 0:
                continue
            pins = np.array([1 if v in treated else 0 for v in nb.tolist()], dtype=np.int8)
            z[np.ix_(rows, nb)] = pins
    return z


def enumerate_design(design: ConflictGraphDesign) -> OracleDistribution:
    n = design.n
    if n > MAX_N:
        raise OracleError(f"enumeration supports n <= {MAX_N}, got {n}")
    u = _all_assignments(n)
    prob = _atom_probs(u, design.params)
    z = algorithm_one(u, design)
    for arr in (u, prob, z):
        arr.setflags(write=False)
    return OracleDistribution(u, prob, z, n)


def enumerate(g: Graph, est: Estimand, h: Graph, ordering: ImportanceOrdering,
              params: DesignParams) -> OracleDistribution:  # noqa: A001
    return enumerate_design(ConflictGraphDesign(g, est, h, ordering, params))


# ---------------------------------------------------------------------------
# moments

Statistic = Union[np.ndarray, Callable]


def _values(dist: OracleDistribution, statistic: Statistic) -> np.ndarray:
    vals = statistic(dist.u, dist.z) if callable(statistic) else statistic
    vals = np.asarray(vals, dtype=float)
    if vals.shape[0] != len(dist):
        raise OracleError("statistic must give one value per atom")
    return vals


def expectation(dist: OracleDistribution, statistic: Statistic):
    """Exact mean of a statistic.

    ``statistic`` is an array with one row per atom or a callable
    ``f(u, z)`` evaluated on the stacked atoms.
    """
    vals = _values(dist, statistic)
    return np.tensordot(dist.prob, vals, axes=(0, 0))


def variance(dist: OracleDistribution, statistic: Statistic) -> float:
    vals = _values(dist, statistic)
    mu = float(dist.prob @ vals)
    return float(dist.prob @ (vals - mu) ** 2)


def covariance(dist: OracleDistribution, a: Statistic, b: Statistic) -> float:
    va, vb = _values(dist, a), _values(dist, b)
    return float(dist.prob @ ((va - dist.prob @ va) * (vb - dist.prob @ vb)))


def covariance_matrix(dist: OracleDistribution, statistic: Statistic) -> np.ndarray:
    """Exact covariance of a vector-valued statistic (atoms x d)."""
    vals = _values(dist, statistic)
    centered = vals - dist.prob @ vals
    return centered.T @ (centered * dist.prob[:, None])


# ---------------------------------------------------------------------------
# event and exposure probabilities


def event_indicators(dist: OracleDistribution, ordering: ImportanceOrdering) -> np.ndarray:
    """Boolean ``(atoms, 2n)`` array; column ``i`` is ``E_(i,1)``, column ``n+i`` is ``E_(i,0)``."""
    n = dist.n
    out = np.zeros((len(dist), 2 * n), dtype=bool)
    for i in range(n):
        free = np.all(dist.u[:, ordering.before_set(i)] == STAR, axis=1)
        out[:, i] = free & (dist.u[:, i] == E1)
        out[:, n + i] = free & (dist.u[:, i] == E0)
    return out


def event_probs(dist: OracleDistribution, ordering: ImportanceOrdering) -> np.ndarray:
    """Exact ``Pr[E_(i,k)]`` as a ``(2, n)`` array indexed ``[1 - k, i]``."""
    p = expectation(dist, event_indicators(dist, ordering).astype(float))
    return p.reshape(2, dist.n)


def pair_event_probs(dist: OracleDistribution, ordering: ImportanceOrdering) -> np.ndarray:
    """Exact joint probabilities, ``(2n, 2n)`` in the same index layout."""
    ev = event_indicators(dist, ordering).astype(float)
    return ev.T @ (ev * dist.prob[:, None])


def exposure_indicators(dist: OracleDistribution, g: Graph, est: Estimand) -> np.ndarray:
    """Boolean ``(atoms, 2n)``: realized exposure of ``i`` equals ``e1`` / ``e0``."""
    n = dist.n
    out = np.zeros((len(dist), 2 * n), dtype=bool)
    for i in range(n):
        nb = g.closed_neighborhood(i)
        for col, treated in zip((i, n + i), est.exposures(g, i)):
            pins = np.array([v in treated for v in nb.tolist()], dtype=np.int8)
            out[:, col] = np.all(dist.z[:, nb] == pins, axis=1)
    return out


def exact_exposure_probs(dist: OracleDistribution, g: Graph, est: Estimand) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``Pr[d_i(Z) = e1]`` and ``Pr[d_i(Z) = e0]`` per unit."""
    p = expectation(dist, exposure_indicators(dist, g, est).astype(float))
    return p[:dist.n], p[dist.n:]


# ---------------------------------------------------------------------------
# invariant battery


def _fixtures():
    from . import graph as gr

    rng = np.random.default_rng(20240611)
    tri = gr.clique(3)
    p3 = gr.path(3)
    st = gr.star(5)
    er = gr.erdos_renyi(7, 0.35, rng)
    c4 = gr.from_edge_list(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    seeds_c4 = [[1], [2], [3], [0]]
    out = []
    for name, g in (("triangle", tri), ("path3", p3), ("star5", st), ("er7", er), ("cycle4", c4)):
        out.append((name, g, Estimand.direct()))
        out.append((name, g, Estimand.gate()))
    out.append(("cycle4", c4, Estimand.spillover(seeds_c4)))
    seeds_st = [[1]] + [[0]] * 4
    out.append(("star5", st, Estimand.spillover(seeds_st)))
    return out


def run_battery(r: float = 2.0, seed: int = 0) -> dict:
    """Check the exact identities on built-in fixtures; returns max deviations."""
    from . import estimator as es
    from .design import covariance_entry, prob_pair

    rng = np.random.default_rng(seed)
    dev = {
        "prob_sum": 0.0,
        "marginals": 0.0,
        "unbiased_modified": 0.0,
        "unbiased_standard": 0.0,
        "prob_single": 0.0,
        "prob_pair": 0.0,
        "covariance": 0.0,
        "variance": 0.0,
        "vbhat_unbiased": 0.0,
        "bound_chain_violations": 0,
        "desired_exposure_violations": 0,
        "loop_order_mismatches": 0,
    }
    tol = {"prob_sum": 1e-12, "marginals": 1e-12, "unbiased_modified": 1e-12,
           "unbiased_standard": 1e-12, "prob_single": 1e-12, "prob_pair": 1e-12,
           "covariance": 1e-10, "variance": 1e-10, "vbhat_unbiased": 1e-12}
    cases = []
    for name, g, est in _fixtures():
        design = ConflictGraphDesign.prepare(g, est, r=r)
        dist = enumerate_design(design)
        n = g.n
        out = es.OutcomeTable(rng.uniform(-5, 5, n), rng.uniform(-5, 5, n))
        tau = es.true_effect(out)
        o, prm = design.ordering, design.params

        dev["prob_sum"] = max(dev["prob_sum"], abs(dist.prob.sum() - 1))
        for code, pk in ((E1, prm.p), (E0, prm.p), (STAR, prm.q)):
            marg = expectation(dist, (dist.u == code).astype(float))
            dev["marginals"] = max(dev["marginals"], float(np.max(np.abs(marg - pk))))

        est_vals = es.modified_ht(out, dist.u, o, prm)
        dev["unbiased_modified"] = max(dev["unbiased_modified"], abs(float(expectation(dist, est_vals)) - tau))

        p1, p0 = exact_exposure_probs(dist, g, est)
        std = es.standard_ht(out, g, est, dist.z, (p1, p0))
        dev["unbiased_standard"] = max(dev["unbiased_standard"], abs(float(expectation(dist, std)) - tau))

        ev = event_probs(dist, o)
        closed = np.array([design.prob_single()[i] for i in range(n)])
        dev["prob_single"] = max(dev["prob_single"], float(np.max(np.abs(ev - closed))))

        joint = pair_event_probs(dist, o)
        wts = event_indicators(dist, o) / np.concatenate([closed, closed])
        cov = covariance_matrix(dist, wts)
        for a in range(2 * n):
            i, k = a % n, 1 - a // n
            for b in range(2 * n):
                j, l = b % n, 1 - b // n
                dev["prob_pair"] = max(dev["prob_pair"],
                                       abs(joint[a, b] - prob_pair(i, k, j, l, design.h, o, prm)))
                dev["covariance"] = max(dev["covariance"],
                                        abs(cov[a, b] - covariance_entry(i, k, j, l, design.h, o, prm)))

        var_o = variance(dist, est_vals)
        var_c = es.exact_variance_modified(out, design.h, o, prm)
        dev["variance"] = max(dev["variance"], abs(var_o - var_c))

        lam_v = es.lambda_v(es.build_v_matrix(design.h, o, prm))
        vb = es.variance_bound(out, lam_v)
        vbh = es.vb_estimator(out, dist.u, o, prm, lam_v)
        dev["vbhat_unbiased"] = max(dev["vbhat_unbiased"], abs(float(expectation(dist, vbh)) - vb))
        bound = 12.5 * prm.lam / n * out.second_moment()
        if not (var_o <= vb * (1 + 1e-9) + 1e-12 and vb <= bound * (1 + 1e-9)):
            dev["bound_chain_violations"] += 1

        fired = event_indicators(dist, o)
        hit = exposure_indicators(dist, g, est)
        dev["desired_exposure_violations"] += int(np.count_nonzero(fired & ~hit))

        z_sparse = design.realize(dist.u)
        z_ids = np.stack([design.realize_loop(row) for row in dist.u])
        dev["loop_order_mismatches"] += int(np.count_nonzero(np.any(z_sparse != dist.z, axis=1)))
        dev["loop_order_mismatches"] += int(np.count_nonzero(np.any(z_ids != dist.z, axis=1)))
        cases.append({"fixture": name, "estimand": est.kind, "n": n, "lambda_H": prm.lam})

    failures = [k for k, t in tol.items() if not dev[k] <= t]
    failures += [k for k in ("bound_chain_violations", "desired_exposure_violations", "loop_order_mismatches")
                 if dev[k] != 0]
    return {"passed": not failures, "failures": failures, "max_deviation": dev,
            "tolerance": tol, "cases": cases}
