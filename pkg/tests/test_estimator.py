import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgdesign import graph as gr
from cgdesign import oracle as orc
from cgdesign.design import STAR, ConflictGraphDesign, DesignParams
from cgdesign.estimand import Estimand
from cgdesign.estimator import (
    OutcomeTable,
    PositivityError,
    build_v_matrix,
    chebyshev_interval,
    estimate,
    exact_variance_modified,
    lambda_v,
    lambda_v_for,
    modified_ht,
    normal_quantile,
    predicted_coverage,
    read_outcomes_csv,
    realized_exposures,
    standard_ht,
    true_effect,
    variance_bound,
    vb_estimator,
    wald_interval,
    write_outcomes_csv,
)

from _util import dense_lambda, normal_quantile_bisect, random_instance


def signed_oracle_cov(design):
    dist = orc.enumerate_design(design)
    p = design.prob_single()
    w = orc.event_indicators(dist, design.ordering) / np.concatenate([p, p])
    c = orc.covariance_matrix(dist, w)
    n = design.n
    sign = np.ones((2 * n, 2 * n))
    sign[:n, n:] = -1
    sign[n:, :n] = -1
    return dist, sign * c


@pytest.mark.parametrize(
    "y1, y0, tau",
    [((1, 2, 3), (0, 0, 0), 2.0), ((1, 2), (1, 2), 0.0), ((5,), (3,), 2.0)],
)
def test_true_effect(y1, y0, tau):
    assert true_effect(OutcomeTable(y1, y0)) == tau


def test_outcome_table_validation():
    with pytest.raises(ValueError):
        OutcomeTable([1, 2], [1])
    with pytest.raises(ValueError):
        OutcomeTable([1, np.nan], [1, 2])


def test_outcomes_csv_round_trip(tmp_path):
    out = OutcomeTable([1.5, -2.0, 0.25], [0.0, 3.0, -1.0])
    path = tmp_path / "o.csv"
    write_outcomes_csv(out, path)
    back = read_outcomes_csv(path)
    assert np.array_equal(back.y1, out.y1) and np.array_equal(back.y0, out.y0)


def test_outcomes_csv_bad(tmp_path):
    path = tmp_path / "o.csv"
    path.write_text("unit,y1\n0,1\n")
    with pytest.raises(ValueError):
        read_outcomes_csv(path)
    path.write_text("unit,y1,y0\n0,1,0\n2,1,0\n")
    with pytest.raises(ValueError):
        read_outcomes_csv(path)


# -- point estimators ---------------------------------------------------------


def test_modified_all_null_is_zero():
    d = ConflictGraphDesign.prepare(gr.path(4), Estimand.gate())
    out = OutcomeTable(np.ones(4), np.ones(4))
    assert modified_ht(out, np.full(4, STAR, dtype=np.int8), d.ordering, d.params) == 0.0


def test_modified_edgeless_r1_is_ipw_difference():
    n = 6
    d = ConflictGraphDesign.prepare(gr.empty(n), Estimand.direct(), r=1.0)
    rng = np.random.default_rng(0)
    out = OutcomeTable(rng.normal(size=n), rng.normal(size=n))
    draw = d.sample(rng)
    z = draw.z
    expect = np.mean(out.y1 * z / 0.5 - out.y0 * (1 - z) / 0.5)
    assert modified_ht(out, draw, d.ordering, d.params) == pytest.approx(expect)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_modified_unbiased_exact(seed):
    d, out = random_instance(np.random.default_rng(seed), 2, 7)
    dist = orc.enumerate_design(d)
    vals = modified_ht(out, dist.u, d.ordering, d.params)
    assert float(orc.expectation(dist, vals)) == pytest.approx(true_effect(out), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_standard_unbiased_with_exact_probs(seed):
    d, out = random_instance(np.random.default_rng(seed), 2, 7)
    dist = orc.enumerate_design(d)
    probs = orc.exact_exposure_probs(dist, d.g, d.est)
    vals = standard_ht(out, d.g, d.est, dist.z, probs)
    assert float(orc.expectation(dist, vals)) == pytest.approx(true_effect(out), abs=1e-12)


def test_standard_positivity_error():
    g = gr.path(3)
    out = OutcomeTable(np.ones(3), np.ones(3))
    z = np.array([1, 0, 0], dtype=np.int8)
    probs = (np.array([0.0, 0.5, 0.5]), np.full(3, 0.5))
    with pytest.raises(PositivityError):
        standard_ht(out, g, Estimand.direct(), z, probs)
    assert np.isnan(standard_ht(out, g, Estimand.direct(), z[None], probs, strict=False)[0])


def test_standard_no_exposure_is_zero():
    # GATE exposures need a whole closed neighborhood in one arm
    g = gr.path(3)
    out = OutcomeTable(np.ones(3), np.ones(3))
    z = np.array([1, 0, 1], dtype=np.int8)
    assert standard_ht(out, g, Estimand.gate(), z, (np.full(3, 0.1), np.full(3, 0.1))) == 0.0


def test_direct_e1_exposure_equals_desired_event():
    rng = np.random.default_rng(8)
    g = gr.preferential_attachment(60, 3, 1.5, rng)
    d = ConflictGraphDesign.prepare(g, Estimand.direct())
    mism = 0
    for _ in range(10):
        u, z = d.sample_batch(rng, 10_000)
        f1, _ = d.events(u)
        h1, _ = realized_exposures(g, d.est, z)
        mism += int(np.count_nonzero(f1 != h1))
    assert mism == 0


# -- variance, V, bounds ------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_v_matrix_matches_oracle(seed):
    d, out = random_instance(np.random.default_rng(seed), 2, 7)
    dist, sc = signed_oracle_cov(d)
    v = build_v_matrix(d.h, d.ordering, d.params).toarray()
    np.testing.assert_allclose(v, sc, atol=1e-10)
    var = orc.variance(dist, modified_ht(out, dist.u, d.ordering, d.params))
    assert exact_variance_modified(out, d.h, d.ordering, d.params) == pytest.approx(var, abs=1e-10)


def test_v_single_vertex():
    d = ConflictGraphDesign.prepare(gr.empty(1), Estimand.direct(), r=1.0)
    v = build_v_matrix(d.h, d.ordering, d.params)
    np.testing.assert_allclose(v.toarray(), [[1.0, 1.0], [1.0, 1.0]])
    assert lambda_v(v) == pytest.approx(2.0)


def lambda_v_blocks(design):
    """max(max 1/p, lambda(M + N)) from the two-block structure of V."""
    v = build_v_matrix(design.h, design.ordering, design.params).toarray()
    n = design.n
    m, neg_n = v[:n, :n], v[:n, n:]
    return max(float(np.max(1 / design.prob_single())), dense_lambda(m - neg_n))


@pytest.mark.parametrize("seed", range(8))
def test_lambda_v_matches_dense(seed):
    rng = np.random.default_rng(seed)
    g = gr.preferential_attachment(60, 2, 1.0, rng)
    d = ConflictGraphDesign.prepare(g, Estimand(["direct", "gate"][seed % 2]))
    v = build_v_matrix(d.h, d.ordering, d.params)
    dense = v.toarray()
    assert np.allclose(dense, dense.T)
    ev = np.linalg.eigvalsh(dense)
    assert ev[0] >= -1e-8 * ev[-1]
    lv = lambda_v(v)
    assert lv == pytest.approx(ev[-1], rel=1e-8)
    assert lv == pytest.approx(lambda_v_blocks(d), rel=1e-8)


def test_lambda_v_cache():
    d = ConflictGraphDesign.prepare(gr.star(8), Estimand.gate())
    a = lambda_v_for(d.h, d.ordering, d.params)
    b = lambda_v_for(d.h, d.ordering, d.params)
    assert a == b
    c = lambda_v_for(d.h, d.ordering, DesignParams(d.params.lam, 3.0))
    assert c != a


@pytest.mark.parametrize("r, const", [(2.0, 12.5), (2.19, 12.08)])
def test_lambda_v_constant(r, const):
    rng = np.random.default_rng(int(r * 100))
    for _ in range(25):
        g = gr.preferential_attachment(int(rng.integers(10, 80)), int(rng.integers(1, 4)), 1.0, rng)
        d = ConflictGraphDesign.prepare(g, Estimand(["direct", "gate"][int(rng.integers(2))]), r=r)
        lv = lambda_v(build_v_matrix(d.h, d.ordering, d.params))
        assert lv <= const * d.params.lam * (1 + 1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_bound_chain_and_vbhat(seed):
    d, out = random_instance(np.random.default_rng(seed), 2, 7)
    dist = orc.enumerate_design(d)
    var = orc.variance(dist, modified_ht(out, dist.u, d.ordering, d.params))
    lv = lambda_v(build_v_matrix(d.h, d.ordering, d.params))
    vb = variance_bound(out, lv)
    assert var <= vb * (1 + 1e-9) + 1e-12
    assert vb <= 12.5 * d.params.lam / d.n * out.second_moment() * (1 + 1e-9)
    vbh = vb_estimator(out, dist.u, d.ordering, d.params, lv)
    assert float(orc.expectation(dist, vbh)) == pytest.approx(vb, abs=1e-12 * max(1.0, vb))


def test_zero_outcomes():
    d = ConflictGraphDesign.prepare(gr.path(5), Estimand.gate())
    out = OutcomeTable(np.zeros(5), np.zeros(5))
    lv = lambda_v_for(d.h, d.ordering, d.params)
    assert variance_bound(out, lv) == 0.0
    assert exact_variance_modified(out, d.h, d.ordering, d.params) == 0.0
    assert vb_estimator(out, d.draw_u(np.random.default_rng(0)), d.ordering, d.params, lv) == 0.0


def test_bound_attained_by_leading_eigenvector():
    d = ConflictGraphDesign.prepare(gr.star(6), Estimand.gate())
    v = build_v_matrix(d.h, d.ordering, d.params)
    vals, vecs = np.linalg.eigh(v.toarray())
    w = vecs[:, -1]
    out = OutcomeTable(w[:d.n], w[d.n:])
    var = exact_variance_modified(out, d.h, d.ordering, d.params)
    vb = variance_bound(out, lambda_v(v))
    assert vb / var <= 1 + 1e-6


# -- intervals ----------------------------------------------------------------


def test_normal_quantile_reference():
    assert normal_quantile(0.975) == pytest.approx(normal_quantile_bisect(0.975), abs=1e-9)
    assert normal_quantile(0.975) == pytest.approx(1.9599640, abs=1e-6)


def test_interval_multipliers():
    lo, hi = chebyshev_interval(0.0, 1.0, 0.05)
    assert hi == pytest.approx(math.sqrt(20))
    lo, hi = wald_interval(0.0, 1.0, 0.05)
    assert hi == pytest.approx(1.959963984540054)


def test_degenerate_interval():
    assert chebyshev_interval(1.5, 0.0, 0.1) == (1.5, 1.5)
    assert wald_interval(1.5, 0.0, 0.1) == (1.5, 1.5)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_alpha_checked(alpha):
    with pytest.raises(ValueError):
        chebyshev_interval(0.0, 1.0, alpha)


@given(st.floats(1e-6, 0.31), st.floats(0.0, 1e6))
def test_chebyshev_wider_than_wald(alpha, vb_hat):
    c = chebyshev_interval(0.0, vb_hat, alpha)
    w = wald_interval(0.0, vb_hat, alpha)
    assert c[1] - c[0] >= w[1] - w[0] - 1e-12


@given(st.floats(1e-3, 0.5), st.floats(1e-4, 1e4))
def test_widths_scale_with_root(alpha, vb_hat):
    for f in (chebyshev_interval, wald_interval):
        a = f(0.0, vb_hat, alpha)
        b = f(0.0, 4 * vb_hat, alpha)
        assert b[1] == pytest.approx(2 * a[1])


def test_predicted_coverage():
    assert predicted_coverage(0.05, 1.0, 0.0, 0.0) == pytest.approx(0.95)
    assert predicted_coverage(0.05, 0.5, 0.0, 0.0) > 0.95
    assert predicted_coverage(0.05, 1.0, 0.01, 2.0) < 0.95
    lim = predicted_coverage(0.05, 0.7, 1e-12, 3.0)
    z = normal_quantile(0.975)
    expect = 1 - 2 * (1 - 0.5 * (1 + math.erf(z / math.sqrt(0.7) / math.sqrt(2))))
    assert lim == pytest.approx(expect)
    with pytest.raises(ValueError):
        predicted_coverage(0.05, 1.2, 0.0, 0.0)
    with pytest.raises(ValueError):
        predicted_coverage(0.05, 1.0, 0.5, 2.0)


def test_estimate_report():
    rng = np.random.default_rng(3)
    d = ConflictGraphDesign.prepare(gr.path(6), Estimand.direct())
    out = OutcomeTable(rng.normal(size=6), rng.normal(size=6))
    draw = d.sample(rng)
    rep = estimate(out, d, draw, alpha=0.1)
    half = math.sqrt(rep.vb_hat / 0.1)
    assert rep.ci_cheb[1] - rep.ci_cheb[0] == pytest.approx(2 * half)
    assert rep.var_exact <= rep.vb
    assert set(rep.to_dict()) == {"tau_hat", "vb", "vb_hat", "var_exact", "alpha", "ci_cheb", "ci_wald"}
