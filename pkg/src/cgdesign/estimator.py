"""Effect estimators, exact variance, the operator-norm variance bound and intervals."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import ndtr, ndtri

from .design import ConflictGraphDesign, DesignDraw, DesignParams, desired_events
from .estimand import Estimand, closed_adjacency, contrast_matrices
from .graph import ConvergenceError, Graph
from .ordering import ImportanceOrdering


class PositivityError(ValueError):
    pass


@dataclass(frozen=True)
class OutcomeTable:
    y1: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float)
        y0 = np.asarray(self.y0, dtype=float)
        if y1.shape != y0.shape or y1.ndim != 1:
            raise ValueError("y1 and y0 must be 1-d arrays of equal length")
        if not (np.isfinite(y1).all() and np.isfinite(y0).all()):
            raise ValueError("potential outcomes must be finite")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y0", y0)

    @property
    def n(self) -> int:
        return self.y1.size

    def second_moment(self) -> float:
        """``mean(y1**2) + mean(y0**2)``."""
        return float(np.mean(self.y1 ** 2) + np.mean(self.y0 ** 2))


def read_outcomes_csv(path) -> OutcomeTable:
    """Read ``unit,y1,y0`` rows; units must cover ``0..n-1`` exactly once."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"unit", "y1", "y0"} <= set(rows[0]):
        raise ValueError(f"{path}: expected columns unit,y1,y0")
    units = np.array([int(r["unit"]) for r in rows])
    if not np.array_equal(np.sort(units), np.arange(len(rows))):
        raise ValueError(f"{path}: units must be 0..{len(rows) - 1}, each once")
    y1 = np.empty(len(rows))
    y0 = np.empty(len(rows))
    y1[units] = [float(r["y1"]) for r in rows]
    y0[units] = [float(r["y0"]) for r in rows]
    return OutcomeTable(y1, y0)


def write_outcomes_csv(outcomes: OutcomeTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit", "y1", "y0"])
        for i, (a, b) in enumerate(zip(outcomes.y1, outcomes.y0)):
            w.writerow([i, repr(float(a)), repr(float(b))])


def true_effect(outcomes: OutcomeTable) -> float:
    return float(np.mean(outcomes.y1 - outcomes.y0))


# ---------------------------------------------------------------------------
# point estimators


def _as_u(draw):
    return draw.u if isinstance(draw, DesignDraw) else np.asarray(draw)


def _event_probs(ordering: ImportanceOrdering, params: DesignParams) -> np.ndarray:
    return params.p * params.q ** ordering.before_counts


def modified_ht(outcomes: OutcomeTable, draw, ordering: ImportanceOrdering, params: DesignParams):
    """Horvitz-Thompson estimate indexed by the desired exposure events.

    ``draw`` is a :class:`DesignDraw` or desired exposures (one row or a batch);
    returns a float or one estimate per row.
    """
    u = _as_u(draw)
    f1, f0 = desired_events(u, ordering)
    p = _event_probs(ordering, params)
    # outcomes enter only through the event that fired, so Y_i = y_i(e_k) there
    contrib = (f1 * (outcomes.y1 / p)) - (f0 * (outcomes.y0 / p))
    est = contrib.mean(axis=-1)
    return float(est) if np.ndim(est) == 0 else est


def realized_exposures(g: Graph, est: Estimand, z) -> tuple[np.ndarray, np.ndarray]:
    """Indicators ``d_i(z) = e1`` and ``d_i(z) = e0`` (per row for a batch)."""
    z = np.asarray(z)
    z2 = np.atleast_2d(z).astype(np.float64)
    closed = closed_adjacency(g).astype(np.float64)
    t1, t0 = contrast_matrices(g, est)
    on = (closed @ z2.T).T
    hits = []
    for t in (t1, t0):
        t = t.astype(np.float64)
        size = np.asarray(t.sum(axis=1)).ravel()
        mismatch = on + size - 2 * (t @ z2.T).T
        hits.append(np.abs(mismatch) < 0.5)
    if z.ndim == 1:
        return hits[0][0], hits[1][0]
    return hits[0], hits[1]


def standard_ht(outcomes: OutcomeTable, g: Graph, est: Estimand, z, exposure_probs,
                strict: bool = True):
    """Horvitz-Thompson estimate indexed by realized exposures.

    ``exposure_probs`` is ``(p1, p0)``, the per-unit probabilities of
    receiving ``e1`` / ``e0``. A firing indicator with recorded probability 0
    raises :class:`PositivityError`; with ``strict=False`` the affected rows
    come back as NaN instead.
    """
    p1, p0 = (np.asarray(p, dtype=float) for p in exposure_probs)
    h1, h0 = realized_exposures(g, est, z)
    h1, h0 = np.atleast_2d(h1), np.atleast_2d(h0)
    bad = ((h1 & (p1 <= 0)) | (h0 & (p0 <= 0))).any(axis=1)
    if strict and bad.any():
        raise PositivityError(
            f"{int(bad.sum())} draw(s) realize an exposure whose recorded probability is 0"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = np.where(p1 > 0, outcomes.y1 / p1, 0.0)
        w0 = np.where(p0 > 0, outcomes.y0 / p0, 0.0)
    est_ = (h1 * w1 - h0 * w0).mean(axis=1)
    est_[bad] = np.nan
    return float(est_[0]) if np.ndim(z) == 1 else est_


# ---------------------------------------------------------------------------
# variance and the variance bound


@dataclass(frozen=True, eq=False)
class VMatrix:
    """Signed covariance matrix of the weighted event indicators.

    Rows/columns ``0..n-1`` index ``(i, e1)`` and ``n..2n-1`` index ``(i, e0)``.
    """

    matrix: sp.csr_matrix
    n: int

    def quadratic(self, outcomes: OutcomeTable) -> float:
        w = np.concatenate([outcomes.y1, outcomes.y0])
        return float(w @ (self.matrix @ w))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def build_v_matrix(h: Graph, ordering: ImportanceOrdering, params: DesignParams) -> VMatrix:
    n = h.n
    p = _event_probs(ordering, params)
    b = ordering.before.astype(np.int64)
    shared = (b @ b.T).tocoo()
    off = shared.row != shared.col
    rows, cols, cnt = shared.row[off], shared.col[off], shared.data[off]
    q = params.q
    # same covariance for every contrast pair when i != j
    cov_far = sp.csr_matrix((q ** (-cnt.astype(float)) - 1.0, (rows, cols)), shape=(n, n))
    adj = h.adjacency(loops=False)
    # conflict neighbors override the shared-parent formula with -1
    cov = cov_far - cov_far.multiply(adj) - adj
    same = (cov + sp.diags(1.0 / p - 1.0)).tocsr()
    cross = (cov - sp.identity(n)).tocsr()
    v = sp.bmat([[same, -cross], [-cross, same]], format="csr")
    v.eliminate_zeros()
    return VMatrix(v, n)


_LAMBDA_V_CACHE: dict = {}


def _content_key(h: Graph, ordering: ImportanceOrdering, params: DesignParams) -> str:
    d = hashlib.sha256()
    for arr in (h.indptr, h.indices, ordering.order):
        d.update(np.ascontiguousarray(arr).tobytes())
    d.update(repr((params.r, params.lam)).encode())
    return d.hexdigest()


DENSE_LIMIT = 256


def lambda_v(v: VMatrix, tol: float = 1e-12, max_iter: int = 100_000, seed: int = 0) -> float:
    """Largest eigenvalue of ``V``.

    ``V = [[M, -N], [-N, M]]`` with ``M - N = diag(1/p)``, so its spectrum is
    that of ``diag(1/p)`` (vectors ``(x, x)``) together with that of ``M + N``
    (vectors ``(x, -x)``). The top eigenvalue of ``M + N`` comes from a dense
    symmetric solver for small ``n`` and from Lanczos iteration (seeded
    start) otherwise; plain power iteration stalls when the top eigenvalues
    nearly tie, which is common here.
    """
    n = v.n
    if n == 0:
        return 0.0
    mat = v.matrix
    same = mat[:n, :n]
    cross = mat[:n, n:]  # this block is -N
    top_diag = float((same.diagonal() + cross.diagonal()).max())
    plus = (same - cross).tocsr()
    if n <= DENSE_LIMIT:
        lam = float(np.linalg.eigvalsh(plus.toarray())[-1])
    else:
        start = np.random.default_rng(seed).standard_normal(n)
        try:
            vals = eigsh(plus, k=1, which="LA", v0=start, tol=tol, maxiter=max_iter,
                         return_eigenvectors=False)
        except ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos iteration for lambda(V) did not converge: {exc}",
                                   float("nan")) from None
        lam = float(vals[0])
    return max(top_diag, lam)


def lambda_v_for(h: Graph, ordering: ImportanceOrdering, params: DesignParams, **kw) -> float:
    """Cached ``lambda(V)`` keyed by the content of ``(h, ordering, r, lambda)``."""
    key = _content_key(h, ordering, params)
    if key not in _LAMBDA_V_CACHE:
        _LAMBDA_V_CACHE[key] = lambda_v(build_v_matrix(h, ordering, params), **kw)
    return _LAMBDA_V_CACHE[key]


def exact_variance_modified(outcomes: OutcomeTable, h: Graph, ordering: ImportanceOrdering,
                            params: DesignParams) -> float:
    v = build_v_matrix(h, ordering, params)
    return v.quadratic(outcomes) / outcomes.n ** 2


def variance_bound(outcomes: OutcomeTable, lam_v: float) -> float:
    return lam_v / outcomes.n * outcomes.second_moment()


def vb_estimator(outcomes: OutcomeTable, draw, ordering: ImportanceOrdering, params: DesignParams,
                 lam_v: float):
    u = _as_u(draw)
    f1, f0 = desired_events(u, ordering)
    p = _event_probs(ordering, params)
    terms = f1 * (outcomes.y1 ** 2 / p) + f0 * (outcomes.y0 ** 2 / p)
    out = lam_v / outcomes.n * terms.mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# intervals


def normal_quantile(prob):
    return ndtri(prob)


def _check_alpha(alpha: float) -> None:
    if not (0 < alpha <= 1):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def chebyshev_interval(tau_hat, vb_hat, alpha: float = 0.05):
    _check_alpha(alpha)
    half = np.sqrt(vb_hat) / math.sqrt(alpha)
    return tau_hat - half, tau_hat + half


def wald_interval(tau_hat, vb_hat, alpha: float = 0.05):
    _check_alpha(alpha)
    half = normal_quantile(1 - alpha / 2) * np.sqrt(vb_hat)
    return tau_hat - half, tau_hat + half


def predicted_coverage(alpha: float, sigma2_ratio: float, lam_over_n: float, c: float) -> float:
    """Large-sample Wald coverage when the variance estimate has relative error ``c·λ/n``.

    ``sigma2_ratio`` is ``Var / VB``.
    """
    _check_alpha(alpha)
    if not (0 <= sigma2_ratio <= 1):
        raise ValueError("sigma2_ratio must lie in [0, 1]")
    if not (c * lam_over_n < 1):
        raise ValueError("c * lambda / n must be below 1")
    x = normal_quantile(1 - alpha / 2) * math.sqrt(1 - c * lam_over_n)
    if sigma2_ratio == 0:
        return 1.0
    return float(1 - 2 * (1 - ndtr(x / math.sqrt(sigma2_ratio))))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateReport:
    tau_hat: float
    vb: float
    vb_hat: float
    var_exact: Optional[float]
    alpha: float
    ci_cheb: tuple
    ci_wald: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci_cheb"] = list(self.ci_cheb)
        d["ci_wald"] = list(self.ci_wald)
        return d


def estimate(outcomes: OutcomeTable, design: ConflictGraphDesign, draw, alpha: float = 0.05,
             lam_v: Optional[float] = None) -> EstimateReport:
    """Point estimate, variance bound and both intervals for one draw."""
    if lam_v is None:
        lam_v = lambda_v_for(design.h, design.ordering, design.params)
    tau = modified_ht(outcomes, draw, design.ordering, design.params)
    vb_hat = vb_estimator(outcomes, draw, design.ordering, design.params, lam_v)
    var = exact_variance_modified(outcomes, design.h, design.ordering, design.params)
    return EstimateReport(
        tau_hat=tau,
        vb=variance_bound(outcomes, lam_v),
        vb_hat=vb_hat,
        var_exact=var,
        alpha=alpha,
        ci_cheb=tuple(float(x) for x in chebyshev_interval(tau, vb_hat, alpha)),
        ci_wald=tuple(float(x) for x in wald_interval(tau, vb_hat, alpha)),
    )
