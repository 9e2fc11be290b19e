"""Monte Carlo harness comparing designs and estimators on a fixed graph and outcomes.

Everything is conditional on one generated graph and one outcome table; the
only randomness across replicates is the treatment assignment.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Union

import numpy as np

from . import graph as gr
from .design import ConflictGraphDesign, bernoulli_design, independent_set_design, u_from_uniforms
from .estimand import Estimand, load_estimand
from .estimator import (
    OutcomeTable,
    chebyshev_interval,
    lambda_v_for,
    exact_variance_modified,
    modified_ht,
    realized_exposures,
    standard_ht,
    true_effect,
    variance_bound,
    vb_estimator,
    wald_interval,
)

DESIGNS = ("cgd", "bernoulli", "independent_set")
DESIGN_IDS = {name: k for k, name in enumerate(DESIGNS)}
CSV_COLUMNS = (
    "design", "estimator", "n", "lambda_H", "dmax_H", "lambda_V", "mean_tau_hat", "true_tau",
    "emp_var", "exact_var", "vb", "coverage_cheb", "width_cheb", "coverage_wald", "width_wald",
    "vbhat_ratio_var", "replicates", "dropped",
)

# spawn-key tags for the independent random streams
_TAG_REPLICATE = 0
_TAG_PROBS = 1
_TAG_SETUP = 2


@dataclass
class SimConfig:
    """Simulation settings.

    ``graph`` is a :class:`Graph`, an edge-list path, or a generator spec such
    as ``{"kind": "pa", "n": 500, "m": 4, "r_exp": 1.5}``. ``outcomes`` is
    ``"large"``, ``"medium"``, ``"hub"`` (slow-rate pattern for
    :func:`hub_cliques` graphs), a CSV path, or an :class:`OutcomeTable`.
    """

    graph: object
    estimand: Union[Estimand, str] = "direct"
    designs: tuple = DESIGNS
    outcomes: object = "large"
    replicates: int = 1000
    mc_prob_draws: int = 10_000
    alpha: float = 0.05
    r: float = 2.0
    seed: int = 0
    bernoulli_p: float = 0.5
    chunk: int = 2000

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must lie in (0, 1]")
        unknown = set(self.designs) - set(DESIGNS)
        if unknown:
            raise ValueError(f"unknown designs {sorted(unknown)}; choose from {DESIGNS}")
        if self.mc_prob_draws < 1:
            raise ValueError("mc_prob_draws must be at least 1")


@dataclass
class SimRow:
    design: str
    estimator: str
    n: int
    lambda_H: float
    dmax_H: int
    lambda_V: float
    mean_tau_hat: float
    true_tau: float
    emp_var: float
    exact_var: float
    vb: float
    coverage_cheb: float
    width_cheb: float
    coverage_wald: float
    width_wald: float
    vbhat_ratio_var: float
    replicates: int
    dropped: int
    # extras (JSON only)
    mse: float = math.nan
    coverage_cheb_vb: float = math.nan
    width_cheb_vb: float = math.nan
    coverage_wald_vb: float = math.nan
    width_wald_vb: float = math.nan


@dataclass
class SimReport:
    rows: list = field(default_factory=list)

    def row(self, design: str, estimator: str) -> SimRow:
        for r in self.rows:
            if r.design == design and r.estimator == estimator:
                return r
        raise KeyError((design, estimator))

    def to_json(self) -> str:
        return json.dumps({"rows": [asdict(r) for r in self.rows]}, indent=2, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "SimReport":
        return cls([SimRow(**r) for r in json.loads(text)["rows"]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_csv_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def __eq__(self, other):
        if not isinstance(other, SimReport) or len(self.rows) != len(other.rows):
            return False
        for a, b in zip(self.rows, other.rows):
            for f in fields(SimRow):
                x, y = getattr(a, f.name), getattr(b, f.name)
                if isinstance(x, float) and math.isnan(x):
                    if not (isinstance(y, float) and math.isnan(y)):
                        return False
                elif x != y:
                    return False
        return True


def _csv_cell(x):
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return x


def emit(report: SimReport, fmt: str = "csv", path=None) -> str:
    """Serialize ``report``; writes to ``path`` when given and returns the text."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    text = report.to_csv() if fmt == "csv" else report.to_json() + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# inputs


def gen_outcomes(g: gr.Graph, model: str, rng: np.random.Generator) -> OutcomeTable:
    """Outlier outcome models: ``y0 = a1``, ``y1 = a2 * deg**e``.

    ``a1 ~ N(1, 1)`` and ``a2 ~ N(2, 1)`` i.i.d.; ``e = 1/2`` for ``large``
    and ``1/4`` for ``medium``.
    """
    expo = {"large": 0.5, "medium": 0.25}
    if model not in expo:
        raise ValueError(f"unknown outcome model {model!r}")
    a1 = rng.normal(1.0, 1.0, g.n)
    a2 = rng.normal(2.0, 1.0, g.n)
    deg = g.degrees.astype(float)
    return OutcomeTable(a2 * deg ** expo[model], a1)


def hub_outcomes(n: int) -> OutcomeTable:
    """Slow-rate pattern on ``hub_cliques(n)``: ``y0 = sqrt(t)`` on secondary hubs, else 0; ``y1 = 0``."""
    lay = gr.hub_cliques_layout(n)
    total = 1 + len(lay.secondary) + n
    y0 = np.zeros(total)
    y0[lay.secondary] = math.sqrt(lay.block_size)
    return OutcomeTable(np.zeros(total), y0)


def build_graph(spec, rng: np.random.Generator) -> gr.Graph:
    if isinstance(spec, gr.Graph):
        return spec
    if isinstance(spec, str):
        return gr.read_edge_list(spec)
    kind = spec.get("kind")
    if kind == "pa":
        return gr.preferential_attachment(spec["n"], spec.get("m", 4), spec.get("r_exp", 1.0), rng)
    if kind == "er":
        return gr.erdos_renyi(spec["n"], spec["p"], rng)
    if kind in ("path", "star", "clique", "empty", "hub_cliques", "clique_of_cliques"):
        return getattr(gr, kind)(spec["n"])
    raise ValueError(f"unknown graph spec {spec!r}")


def _outcomes(cfg: SimConfig, g: gr.Graph, rng) -> OutcomeTable:
    o = cfg.outcomes
    if isinstance(o, OutcomeTable):
        return o
    if o == "hub":
        lay_n = cfg.graph.get("n") if isinstance(cfg.graph, dict) else None
        if lay_n is None:
            raise ValueError("the hub outcome pattern needs a hub_cliques graph spec")
        return hub_outcomes(lay_n)
    if o in ("large", "medium"):
        return gen_outcomes(g, o, rng)
    from .estimator import read_outcomes_csv

    return read_outcomes_csv(o)


# ---------------------------------------------------------------------------
# running


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _replicate_draws(name, design, cfg, reps):
    """Draws for replicate ids ``reps``, each from its own stream."""
    n = design.n
    did = DESIGN_IDS[name]
    if name == "cgd":
        x = np.stack([_stream(cfg.seed, _TAG_REPLICATE, did, int(k)).random(n) for k in reps])
        u = u_from_uniforms(x, design.params)
        return u, design.realize(u)
    if name == "bernoulli":
        z = np.stack([bernoulli_design(n, cfg.bernoulli_p, _stream(cfg.seed, _TAG_REPLICATE, did, int(k)))
                      for k in reps])
        return None, z
    z = np.stack([independent_set_design(design.g, _stream(cfg.seed, _TAG_REPLICATE, did, int(k)))
                  for k in reps])
    return None, z


def mc_exposure_probs(name: str, design: ConflictGraphDesign, cfg: SimConfig):
    """Monte Carlo ``Pr[d_i(Z) = e_k]`` from ``cfg.mc_prob_draws`` auxiliary draws."""
    rng = _stream(cfg.seed, _TAG_PROBS, DESIGN_IDS[name])
    c1 = np.zeros(design.n)
    c0 = np.zeros(design.n)
    left = cfg.mc_prob_draws
    while left > 0:
        size = min(cfg.chunk, left)
        if name == "cgd":
            _, z = design.sample_batch(rng, size)
        elif name == "bernoulli":
            z = bernoulli_design(design.n, cfg.bernoulli_p, rng, size)
        else:
            z = independent_set_design(design.g, rng, size)
        h1, h0 = realized_exposures(design.g, design.est, z)
        c1 += h1.sum(axis=0)
        c0 += h0.sum(axis=0)
        left -= size
    return c1 / cfg.mc_prob_draws, c0 / cfg.mc_prob_draws


def _var(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1)) if x.size > 1 else math.nan


def _interval_stats(tau_hat, var_hat, tau, alpha):
    lo, hi = chebyshev_interval(tau_hat, var_hat, alpha)
    cov_c = float(np.mean((lo <= tau) & (tau <= hi)))
    wid_c = float(np.mean(hi - lo))
    lo, hi = wald_interval(tau_hat, var_hat, alpha)
    cov_w = float(np.mean((lo <= tau) & (tau <= hi)))
    wid_w = float(np.mean(hi - lo))
    return cov_c, wid_c, cov_w, wid_w


def prepare(cfg: SimConfig):
    """Generate (once) the graph, outcomes and the prepared design."""
    setup = _stream(cfg.seed, _TAG_SETUP)
    g = build_graph(cfg.graph, setup)
    est = cfg.estimand if isinstance(cfg.estimand, Estimand) else load_estimand(cfg.estimand)
    outcomes = _outcomes(cfg, g, setup)
    if outcomes.n != g.n:
        raise ValueError(f"outcomes cover {outcomes.n} units but the graph has {g.n}")
    design = ConflictGraphDesign.prepare(g, est, r=cfg.r)
    return g, outcomes, design


def run_simulation(cfg: SimConfig, exposure_probs: Optional[dict] = None) -> SimReport:
    """Run every requested design for ``cfg.replicates`` replicates.

    ``exposure_probs`` optionally maps a design name to exact ``(p1, p0)``,
    replacing the Monte Carlo estimates for the standard estimator.
    """
    g, outcomes, design = prepare(cfg)
    tau = true_effect(outcomes)
    h = design.h
    lam_h = float(design.params.lam)
    dmax = int(h.loop_degrees.max())
    lam_v = lambda_v_for(h, design.ordering, design.params)
    vb = variance_bound(outcomes, lam_v)
    exact_var = exact_variance_modified(outcomes, h, design.ordering, design.params)
    n = g.n
    base = dict(n=n, lambda_H=lam_h, dmax_H=dmax, true_tau=tau, replicates=cfg.replicates)
    report = SimReport()
    for name in cfg.designs:
        if exposure_probs and name in exposure_probs:
            probs = exposure_probs[name]
        else:
            probs = mc_exposure_probs(name, design, cfg)
        mod, vbh, std = [], [], []
        for start in range(0, cfg.replicates, cfg.chunk):
            reps = range(start, min(cfg.replicates, start + cfg.chunk))
            u, z = _replicate_draws(name, design, cfg, reps)
            if u is not None:
                mod.append(modified_ht(outcomes, u, design.ordering, design.params))
                vbh.append(vb_estimator(outcomes, u, design.ordering, design.params, lam_v))
            std.append(standard_ht(outcomes, g, design.est, z, probs, strict=False))
        if mod:
            t = np.concatenate(mod)
            v = np.concatenate(vbh)
            cc, wc, cw, ww = _interval_stats(t, v, tau, cfg.alpha)
            cc2, wc2, cw2, ww2 = _interval_stats(t, np.full_like(t, vb), tau, cfg.alpha)
            report.rows.append(SimRow(
                design=name, estimator="modified", lambda_V=lam_v, mean_tau_hat=float(np.mean(t)),
                emp_var=_var(t), exact_var=exact_var, vb=vb, coverage_cheb=cc, width_cheb=wc,
                coverage_wald=cw, width_wald=ww,
                vbhat_ratio_var=_var(v / vb) if vb > 0 else math.nan, dropped=0,
                mse=float(np.mean((t - tau) ** 2)), coverage_cheb_vb=cc2, width_cheb_vb=wc2,
                coverage_wald_vb=cw2, width_wald_vb=ww2, **base,
            ))
        s = np.concatenate(std)
        kept = s[~np.isnan(s)]
        nan = math.nan
        report.rows.append(SimRow(
            design=name, estimator="standard", lambda_V=nan,
            mean_tau_hat=float(np.mean(kept)) if kept.size else nan, emp_var=_var(kept),
            exact_var=nan, vb=nan, coverage_cheb=nan, width_cheb=nan, coverage_wald=nan,
            width_wald=nan, vbhat_ratio_var=nan, dropped=int(s.size - kept.size),
            mse=float(np.mean((kept - tau) ** 2)) if kept.size else nan, **base,
        ))
    return report
