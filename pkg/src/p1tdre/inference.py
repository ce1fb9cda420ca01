"""Bias-corrected intervals and tests built on plug-in asymptotics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, ndtr, ndtri

from .asymptotics import AsymptoticTable, plug_in
from .errors import InvalidIndices, SingularCovariance
from .estimator import EstimateReport, estimate_all
from .model import Digraph, tally

__all__ = [
    "TestReport",
    "Fit",
    "fit",
    "normal_cdf",
    "normal_quantile",
    "chi2_sf",
    "test_reciprocity",
    "ci_theta",
    "ci_rho",
    "test_alpha_equality",
    "test_beta_equality",
    "wald_statistic",
    "compare_graphs",
    "ci_alpha_diff",
    "ci_beta_diff",
    "ci_param_diff",
]

COND_LIMIT = 1e12


def normal_cdf(z):
    """Standard normal CDF (``scipy.special.ndtr``)."""
    return ndtr(z)


def normal_quantile(q):
    """Inverse standard normal CDF (``scipy.special.ndtri``)."""
    return ndtri(q)


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square law via the regularized incomplete gamma."""
    return float(gammaincc(df / 2.0, x / 2.0))


def _z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return float(normal_quantile(1.0 - level / 2.0))


@dataclass
class TestReport:
    """Outcome of one test or interval.

    ``null_distribution`` is ``"normal"`` or ``"chi2(df)"``.  For
    interval-only reports ``statistic`` and ``p_value`` are NaN and
    ``reject`` is False.
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    null_distribution: str
    p_value: float
    level: float
    reject: bool
    ci: tuple[float, float] | None = None
    estimate: float | None = None

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "name": self.name,
            "statistic": num(self.statistic),
            "null_distribution": self.null_distribution,
            "p_value": num(self.p_value),
            "level": self.level,
            "reject": bool(self.reject),
            "ci": None if self.ci is None else [float(self.ci[0]), float(self.ci[1])],
            "estimate": num(self.estimate),
        }


def _normal_test(name, stat, level, ci=None, estimate=None) -> TestReport:
    p = float(2.0 * normal_cdf(-abs(stat)))
    return TestReport(name, float(stat), "normal", p, level, p < level, ci, estimate)


def _interval(name, centre, se, level) -> TestReport:
    half = _z(level) * se
    return TestReport(name, math.nan, "normal", math.nan, level, False,
                      (centre - half, centre + half), centre)


@dataclass
class Fit:
    """Estimates and their plug-in asymptotic table for one graph."""

    report: EstimateReport
    table: AsymptoticTable


def fit(g, method: str = "auto") -> Fit:
    """Estimate ``g`` (a Digraph or DyadTally) and evaluate the plug-in table."""
    t = tally(g) if isinstance(g, Digraph) else g
    report = estimate_all(t, method)
    return Fit(report, plug_in(report))


def _fitted(g, fitted: Fit | None) -> Fit:
    return fitted if fitted is not None else fit(g)


def test_reciprocity(g, level: float = 0.05, fitted: Fit | None = None) -> TestReport:
    """Test ``rho = 0`` with ``|rho_hat - rho_hat*| / sigma_hat_rho``.

    The attached interval is the bias-corrected interval for ``rho``.
    """
    f = _fitted(g, fitted)
    centre = f.report.rho - f.table.rho_star
    se = f.table.sigma_rho
    half = _z(level) * se
    return _normal_test("reciprocity", abs(centre) / se, level, (centre - half, centre + half), centre)


def ci_rho(g, level: float = 0.05, fitted: Fit | None = None) -> TestReport:
    f = _fitted(g, fitted)
    return _interval("ci_rho", f.report.rho - f.table.rho_star, f.table.sigma_rho, level)


def ci_theta(g, level: float = 0.05, fitted: Fit | None = None) -> TestReport:
    """Bias-corrected interval ``theta_hat - theta_hat* +/- z sigma_hat_theta``."""
    f = _fitted(g, fitted)
    return _interval("ci_theta", f.report.theta - f.table.theta_star, f.table.sigma_theta, level)


def _param(f: Fit, kind: str, i: int):
    """Point estimate and plug-in variance of ``alpha_i`` or ``beta_i``."""
    kept = f.report.kept_nodes()
    pos = np.searchsorted(kept, i)
    if not 0 <= i < f.report.n or pos >= kept.size or kept[pos] != i:
        raise InvalidIndices(f"node {i} has no estimate")
    if kind == "alpha":
        return float(f.report.alpha[i]), float(f.table.sigma_alpha2[pos]), int(pos)
    if kind == "beta":
        return float(f.report.beta[i]), float(f.table.sigma_beta2[pos]), int(pos)
    raise ValueError(f"unknown parameter kind {kind!r}")


def ci_param_diff(g, first, second, level: float = 0.05, fitted: Fit | None = None) -> TestReport:
    """Interval and z-test for the difference of two degree parameters.

    ``first`` and ``second`` are ``(kind, index)`` with kind ``"alpha"`` or
    ``"beta"``.  An ``alpha_i`` and ``beta_i`` pair is correlated through
    ``sigma_ii``; every other pair is asymptotically independent.
    """
    if tuple(first) == tuple(second):
        raise InvalidIndices("the two parameters must differ")
    f = _fitted(g, fitted)
    est1, var1, pos1 = _param(f, *first)
    est2, var2, pos2 = _param(f, *second)
    var = var1 + var2
    if first[1] == second[1]:
        var -= 2.0 * float(f.table.sigma_cross[pos1])
    se = math.sqrt(var)
    diff = est1 - est2
    half = _z(level) * se
    name = f"{first[0]}[{first[1]}]-{second[0]}[{second[1]}]"
    return _normal_test(name, diff / se, level, (diff - half, diff + half), diff)


def ci_alpha_diff(g, i: int, j: int, level: float = 0.05, fitted: Fit | None = None) -> TestReport:
    """``alpha_i - alpha_j +/- z (sigma_alpha_i^2 + sigma_alpha_j^2)^{1/2}``."""
    if i == j:
        raise InvalidIndices("i and j must differ")
    return ci_param_diff(g, ("alpha", i), ("alpha", j), level, fitted)


def ci_beta_diff(g, i: int, j: int, level: float = 0.05, fitted: Fit | None = None) -> TestReport:
    if i == j:
        raise InvalidIndices("i and j must differ")
    return ci_param_diff(g, ("beta", i), ("beta", j), level, fitted)


def difference_covariance(variances, form: str = "derived") -> np.ndarray:
    """Covariance of successive differences of independent estimates.

    Entry ``(r, r)`` is ``v_r + v_{r+1}`` and the off-diagonals are
    ``-v_{r+1}``.  ``form="printed"`` flips the sign of every off-diagonal
    after the first one, so for four parameters the ``(2, 3)`` entry
    becomes ``+v_3``.  That variant is not a valid covariance of the
    differences and exists only for comparison.
    """
    v = np.asarray(variances, dtype=float)
    k = v.size - 1
    cov = np.diag(v[:-1] + v[1:])
    off = -v[1:-1].copy()
    if form == "printed":
        off[1:] *= -1.0
    idx = np.arange(k - 1)
    cov[idx, idx + 1] = off
    cov[idx + 1, idx] = off
    return cov


def wald_statistic(estimates, variances, form: str = "derived") -> float:
    """``d' C^{-1} d`` with ``d`` the successive differences of ``estimates``.

    Raises
    ------
    SingularCovariance
        When ``C`` has condition number above ``1e12``.
    """
    est = np.asarray(estimates, dtype=float)
    cov = difference_covariance(variances, form)
    if not np.all(np.isfinite(cov)) or np.linalg.cond(cov) > COND_LIMIT:
        raise SingularCovariance("difference covariance is numerically singular")
    d = -np.diff(est)
    return float(d @ np.linalg.solve(cov, d))


def _equality(g, kind, indices, level, fitted, form) -> TestReport:
    indices = [int(i) for i in indices]
    if len(indices) < 2:
        raise InvalidIndices("need at least two indices")
    if len(set(indices)) != len(indices):
        raise InvalidIndices("indices must be distinct")
    f = _fitted(g, fitted)
    pairs = [_param(f, kind, i) for i in indices]
    est = [p[0] for p in pairs]
    var = [p[1] for p in pairs]
    name = f"{kind}_equality"
    if len(indices) == 2:
        diff = est[0] - est[1]
        se = math.sqrt(var[0] + var[1])
        half = _z(level) * se
        return _normal_test(name, abs(diff) / se, level, (diff - half, diff + half), diff)
    stat = wald_statistic(est, var, form)
    df = len(indices) - 1
    p = chi2_sf(stat, df)
    return TestReport(name, stat, f"chi2({df})", p, level, p < level)


def test_alpha_equality(g, indices, level: float = 0.05, fitted: Fit | None = None,
                        form: str = "derived") -> TestReport:
    """Test ``alpha_i`` equal across ``indices``.

    Two indices give a z-test.  More give a Wald statistic on successive
    differences, referred to chi-square with ``k - 1`` degrees of freedom.
    """
    return _equality(g, "alpha", indices, level, fitted, form)


def test_beta_equality(g, indices, level: float = 0.05, fitted: Fit | None = None,
                       form: str = "derived") -> TestReport:
    return _equality(g, "beta", indices, level, fitted, form)


def compare_graphs(g1, g2, level: float = 0.05, fitted1: Fit | None = None,
                   fitted2: Fit | None = None) -> TestReport:
    """Test equal reciprocity in two independent graphs.

    ``T = ((rho1 - rho1*) - (rho2 - rho2*)) / (s1^2 + s2^2)^{1/2}``; the
    sign of ``T`` follows the argument order.
    """
    f1 = _fitted(g1, fitted1)
    f2 = f1 if g2 is g1 and fitted2 is None else _fitted(g2, fitted2)
    c1 = f1.report.rho - f1.table.rho_star
    c2 = f2.report.rho - f2.table.rho_star
    se = math.sqrt(f1.table.sigma_rho2 + f2.table.sigma_rho2)
    diff = c1 - c2
    half = _z(level) * se
    return _normal_test("compare_reciprocity", diff / se, level, (diff - half, diff + half), diff)
