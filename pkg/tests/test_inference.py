import math

import numpy as np
import pytest

from p1tdre import inference as inf
from p1tdre.asymptotics import plug_in
from p1tdre.errors import InvalidIndices, SingularCovariance
from p1tdre.estimator import estimate_filtered, gamma_filter
from p1tdre.model import Digraph, ParamVector, linear_design, sample_graph, tally


@pytest.fixture(scope="module")
def fitted():
    g = sample_graph(linear_design(120, 0.5, -0.5), 17)
    return g, inf.fit(g)


def test_normal_functions():
    assert inf.normal_cdf(0.0) == 0.5
    assert inf.normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-14)
    assert inf.normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-14)
    assert inf.normal_cdf(-30.0) == pytest.approx(4.906713927148187e-198, rel=1e-12)
    # chi-square with 2 df has survival exp(-x/2)
    assert inf.chi2_sf(3.0, 2) == pytest.approx(math.exp(-1.5), rel=1e-14)
    assert inf.chi2_sf(3.841458820694124, 1) == pytest.approx(0.05, rel=1e-12)


def test_difference_covariance_shape():
    v = [1.0, 2.0, 3.0, 4.0]
    cov = inf.difference_covariance(v)
    expected = np.array([[3.0, -2.0, 0.0], [-2.0, 5.0, -3.0], [0.0, -3.0, 7.0]])
    assert np.array_equal(cov, expected)
    printed = inf.difference_covariance(v, "printed")
    assert printed[1, 2] == 3.0 and printed[0, 1] == -2.0


def test_wald_matches_explicit_inverse():
    rng = np.random.default_rng(0)
    for k in (2, 3, 5, 8):
        est = rng.normal(size=k)
        var = rng.uniform(0.1, 2.0, size=k)
        d = est[:-1] - est[1:]
        cov = inf.difference_covariance(var)
        assert inf.wald_statistic(est, var) == pytest.approx(d @ np.linalg.inv(cov) @ d, rel=1e-12)


def test_wald_derived_is_the_covariance_of_differences():
    rng = np.random.default_rng(1)
    var = np.array([0.5, 1.0, 1.5, 2.0])
    draws = rng.normal(size=(200_000, 4)) * np.sqrt(var)
    emp = np.cov(-np.diff(draws, axis=1), rowvar=False)
    assert np.allclose(emp, inf.difference_covariance(var), atol=0.03)
    assert not np.allclose(emp, inf.difference_covariance(var, "printed"), atol=0.03)


def test_wald_singular():
    with pytest.raises(SingularCovariance):
        inf.wald_statistic([1.0, 2.0, 3.0], [0.0, 0.0, 1e-20])


def test_reciprocity_report(fitted):
    g, f = fitted
    rep = inf.test_reciprocity(None, fitted=f)
    centre = f.report.rho - f.table.rho_star
    assert rep.statistic == pytest.approx(abs(centre) / f.table.sigma_rho)
    assert rep.p_value == pytest.approx(2 * inf.normal_cdf(-rep.statistic))
    assert rep.reject == (rep.p_value < 0.05)
    lo, hi = rep.ci
    assert lo < centre < hi
    assert rep.to_dict()["null_distribution"] == "normal"
    # the fit is recomputed when not supplied
    assert inf.test_reciprocity(g).statistic == rep.statistic


def test_intervals_widen_with_confidence(fitted):
    _, f = fitted
    widths = [np.diff(inf.ci_rho(None, lvl, fitted=f).ci)[0] for lvl in (0.2, 0.05, 0.01, 1e-4)]
    assert all(a < b for a, b in zip(widths, widths[1:]))
    th = inf.ci_theta(None, 0.05, fitted=f)
    assert th.estimate == pytest.approx(f.report.theta - f.table.theta_star)
    with pytest.raises(ValueError):
        inf.ci_rho(None, 1.5, fitted=f)


def test_parameter_differences(fitted):
    _, f = fitted
    rep = inf.ci_alpha_diff(None, 0, 5, fitted=f)
    se = math.sqrt(f.table.sigma_alpha2[0] + f.table.sigma_alpha2[5])
    assert rep.estimate == pytest.approx(f.report.alpha[0] - f.report.alpha[5])
    assert rep.statistic == pytest.approx(rep.estimate / se)
    same = inf.ci_param_diff(None, ("alpha", 3), ("beta", 3), fitted=f)
    se_ii = math.sqrt(f.table.sigma_alpha2[3] + f.table.sigma_beta2[3] - 2 * f.table.sigma_cross[3])
    assert same.statistic == pytest.approx(same.estimate / se_ii)
    with pytest.raises(InvalidIndices):
        inf.ci_alpha_diff(None, 2, 2, fitted=f)
    with pytest.raises(InvalidIndices):
        inf.ci_beta_diff(None, 0, 500, fitted=f)


def test_equality_tests(fitted):
    _, f = fitted
    two = inf.test_alpha_equality(None, [0, 1], fitted=f)
    assert two.null_distribution == "normal"
    many = inf.test_beta_equality(None, [0, 30, 60, 90], fitted=f)
    assert many.null_distribution == "chi2(3)"
    assert 0.0 <= many.p_value <= 1.0
    # the linear design spreads alpha over [-1, 1]; opposite ends differ
    assert inf.test_alpha_equality(None, [59, 119], fitted=f).reject
    with pytest.raises(InvalidIndices):
        inf.test_alpha_equality(None, [3], fitted=f)
    with pytest.raises(InvalidIndices):
        inf.test_alpha_equality(None, [3, 3], fitted=f)


def test_compare_graphs(fitted):
    g, f = fitted
    h = sample_graph(linear_design(120, 0.0, -0.5), 18)
    fh = inf.fit(h)
    ab = inf.compare_graphs(None, None, fitted1=f, fitted2=fh)
    ba = inf.compare_graphs(None, None, fitted1=fh, fitted2=f)
    assert ab.statistic == pytest.approx(-ba.statistic)
    assert ab.p_value == pytest.approx(ba.p_value)
    assert inf.compare_graphs(g, g).statistic == 0.0


def test_filtered_fit_maps_node_labels():
    core = sample_graph(ParamVector.zeros(60), 9)
    g = Digraph(70, core.src, core.dst)
    t = tally(g)
    rep = estimate_filtered(t, gamma_filter(t))
    f = inf.Fit(rep, plug_in(rep))
    assert f.table.n == 60
    assert inf.ci_alpha_diff(None, 0, 59, fitted=f).ci is not None
    with pytest.raises(InvalidIndices):
        inf.ci_alpha_diff(None, 0, 65, fitted=f)


def test_size_under_null_small():
    # quick sanity version of the size check: about 5% of 40 draws
    par = linear_design(160, 0.0, 0.0)
    rejects = sum(inf.test_reciprocity(sample_graph(par, 500 + s)).reject for s in range(40))
    assert rejects <= 8
