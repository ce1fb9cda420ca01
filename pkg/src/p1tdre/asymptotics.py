"""Asymptotic variances and bias terms of the triple-dyad ratio estimators.

Every quantity is a function of a :class:`~p1tdre.model.DyadProbTable`
and can be evaluated at true probabilities or at plug-in estimates.

For a configuration triple ``abc`` write ``P = p^{ca}`` and ``Q = p^{cb}``
(so ``abc = 100`` pairs ``P = p01`` with ``Q = p00``).  Then

    mu_t       = n^-2 sum_{i,j}  P[i,t] Q[i,j] P[t,j]          (i, j, t distinct)
    mu_it      = n^-2 sum_{k,l}  P[k,i] Q[k,l] P[t,l]          (k, l, i, t distinct)
    eta_it     = n^-1 sum_j ( P[t,j] Q[i,j] / mu_t + P[j,i] Q[j,t] / mu_i
                              - Q[i,j] Q[j,t] / mu'_j )

with ``mu'`` the triple with ``a`` and ``b`` swapped.  ``eta_it`` is the
first-order coefficient of the indicator ``I_it^{ca}`` in the estimator,
scaled by ``n^2``.  Probability tables have zero diagonals, so most
distinctness constraints hold automatically; the ones that do not are
removed explicitly.  The sums defining ``zeta`` therefore give the same
value whether or not ``j = i`` is excluded.

Only the triples ``100, 010, 011, 101`` enter the variance and bias
formulas, and that set is closed under the ``a <-> b`` swap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArity, ZeroMu
from .model import DyadProbTable, center, dyad_probs

__all__ = [
    "COMBOS",
    "AsymptoticTable",
    "g_m",
    "mu_values",
    "eta_zeta",
    "kappa_xi",
    "variance_table",
    "bias_terms",
    "plug_in",
    "naive_table",
]

COMBOS = ("100", "010", "011", "101")
_SWAP = {"100": "010", "010": "100", "011": "101", "101": "011"}
ALL_COMBOS = tuple(f"{a}{b}{c}" for a in "01" for b in "01" for c in "01")


def _swap(abc: str) -> str:
    return abc[1] + abc[0] + abc[2]


def g_m(x, y) -> float:
    """``sum(x**2 * y) - sum(x * y)**2``: variance of a discrete variable.

    With ``y`` the probabilities of the values ``x`` (and the leftover
    mass on 0) this is the variance of the variable.  Broadcasts over
    leading axes when given arrays of shape ``(..., m)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim == 0 or x.shape[-1] < 1:
        raise InvalidArity(f"g_m needs two length-m inputs, got {x.shape} and {y.shape}")
    out = np.sum(x * x * y, axis=-1) - np.sum(x * y, axis=-1) ** 2
    return float(out) if out.ndim == 0 else out


def _pq(p: DyadProbTable, abc: str):
    a, b, c = abc
    return p[c + a], p[c + b]


def _with_nan_diagonal(m: np.ndarray) -> np.ndarray:
    np.fill_diagonal(m, np.nan)
    return m


def mu_values(p: DyadProbTable, combos=COMBOS):
    """Expected normalised triple counts.

    Returns
    -------
    mu_t : dict[str, ndarray]
        Anchor means, shape ``(n,)``.
    mu_it : dict[str, ndarray]
        Pair means, shape ``(n, n)``, NaN on the undefined diagonal.
    """
    n = p.n
    mu_t, mu_it = {}, {}
    for abc in combos:
        P, Q = _pq(p, abc)
        qpt = Q @ P.T
        mu_t[abc] = np.sum(P * qpt, axis=0) / n**2
        full = P.T @ qpt
        pt = P.T  # pt[i, t] = P[t, i]
        drop_k = pt * np.sum(Q * P, axis=1)[None, :]  # k = t
        drop_l = pt * np.sum(P * Q, axis=0)[:, None]  # l = i
        both = pt * Q.T * pt  # k = t and l = i
        mu_it[abc] = _with_nan_diagonal((full - drop_k - drop_l + both) / n**2)
    return mu_t, mu_it


def _check_positive(values: np.ndarray, abc: str):
    bad = ~(values > 0)
    if values.ndim == 2:
        bad &= ~np.eye(values.shape[0], dtype=bool)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise ZeroMu(abc, tuple(int(v) for v in idx) if idx.size > 1 else int(idx[0]))


def eta_zeta(p: DyadProbTable, mu_t: dict, combos=COMBOS):
    """First-order coefficients ``eta`` and second-order pieces ``zeta``.

    Returns three dicts keyed by ``abc``: ``eta[abc][i, t]``,
    ``zeta1[abc][i, t]`` and ``zeta2[abc][i, t]`` (diagonals NaN).

    Raises
    ------
    ZeroMu
        If a needed ``mu_t`` is not strictly positive.
    """
    n = p.n
    eta, zeta1, zeta2 = {}, {}, {}
    for abc in combos:
        for key in (abc, _swap(abc)):
            _check_positive(mu_t[key], key)
        P, Q = _pq(p, abc)
        inv_t = 1.0 / mu_t[abc]
        inv_swap = 1.0 / mu_t[_swap(abc)]
        # f1[i, t] = sum_j P[t, j] Q[i, j] / mu_t ; f2[i, t] = sum_j P[j, i] Q[j, t] / mu_i
        qpt = Q @ P.T
        ptq = P.T @ Q
        f1 = qpt * inv_t[None, :]
        f2 = ptq * inv_t[:, None]
        # g[i, t] = sum_j P[j, t] Q[j, i] / mu_t
        g = ptq.T * inv_t[None, :]
        third = (Q * inv_swap[None, :]) @ Q
        eta[abc] = _with_nan_diagonal((f1 + f2 - third) / n)
        zeta1[abc] = _with_nan_diagonal((f1**2 + f2**2) / (2.0 * n**3))
        zeta2[abc] = _with_nan_diagonal(f1 * g / n**3)
    return eta, zeta1, zeta2


def kappa_xi(p: DyadProbTable, mu_it: dict):
    """Coefficients of the dyads incident to a node in its degree estimates.

    ``kappa1[i, k]`` and ``kappa2[i, k]`` weight the indicators
    ``I_ki^{01}`` and ``I_ki^{00}`` in ``alpha_hat_i``; ``xi1[j, l]`` and
    ``xi2[j, l]`` weight ``I_jl^{01}`` and ``I_jl^{00}`` in ``beta_hat_j``.
    All are ``O(n^3)`` through matrix products; diagonals are NaN.

    Raises
    ------
    ZeroMu
        If ``mu_it^{(100)}`` or ``mu_it^{(010)}`` vanishes off the diagonal.
    """
    n = p.n
    for key in ("100", "010"):
        _check_positive(mu_it[key], key)
    p00, p01 = p.p00, p.p01

    def inverse(m):
        w = 1.0 / np.where(np.eye(n, dtype=bool), 1.0, m)
        np.fill_diagonal(w, 0.0)
        return w

    w1 = inverse(mu_it["100"])  # w1[i, t] = 1 / mu_it^(100)
    w2 = inverse(mu_it["010"])

    def kappa(w, first, second):
        # n^-2 sum_{t != i,k} w[i,t] sum_{l != i} first[t,l] second[k,l]
        m = first @ second.T
        h = np.sum(w * first.T, axis=1)  # sum_t w[i,t] first[t,i]
        out = w @ m - w * np.diag(m)[None, :] - second.T * (h[:, None] - w * first.T)
        return _with_nan_diagonal(out / n**2)

    def xi(v, first, second):
        # n^-2 sum_{t != j,l} v[j,t] sum_{k != j} first[k,t] second[k,l]
        m = first.T @ second
        h = np.sum(v * first, axis=1)  # sum_t v[j,t] first[j,t]
        out = v @ m - v * np.diag(m)[None, :] - second * (h[:, None] - v * first)
        return _with_nan_diagonal(out / n**2)

    kappa1 = kappa(w1, p01, p00)
    kappa2 = kappa(w2, p00, p01)
    xi1 = xi(w1.T, p01, p00)  # v[j, t] = 1 / mu_tj
    xi2 = xi(w2.T, p00, p01)
    return kappa1, kappa2, xi1, xi2


@dataclass
class AsymptoticTable:
    """Everything needed for inference, at true or plug-in probabilities."""

    source: str
    n: int
    mu_t: dict
    mu_it: dict
    eta: dict
    zeta1: dict
    zeta2: dict
    kappa1: np.ndarray
    kappa2: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray
    sigma_theta2: float
    sigma_rho2: float
    sigma_alpha2: np.ndarray
    sigma_beta2: np.ndarray
    sigma_cross: np.ndarray
    theta_star: float
    rho_star: float
    sparsity: tuple = field(default=(np.nan, np.nan))

    @property
    def sigma_theta(self) -> float:
        return math.sqrt(self.sigma_theta2)

    @property
    def sigma_rho(self) -> float:
        return math.sqrt(self.sigma_rho2)

    def to_dict(self, detail: bool = False) -> dict:
        out = {
            "source": self.source,
            "n": self.n,
            "sigma_theta2": self.sigma_theta2,
            "sigma_rho2": self.sigma_rho2,
            "sigma_alpha2": self.sigma_alpha2.tolist(),
            "sigma_beta2": self.sigma_beta2.tolist(),
            "sigma_cross": self.sigma_cross.tolist(),
            "theta_star": self.theta_star,
            "rho_star": self.rho_star,
            "C_n": self.sparsity[0],
            "c_n": self.sparsity[1],
        }
        if detail:
            out["mu_t"] = {k: v.tolist() for k, v in self.mu_t.items()}
        return out


def _pairs(n):
    return np.triu_indices(n, 1)


def _fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def _variances(p: DyadProbTable, eta, kappa1, kappa2, xi1, xi2, form="derived"):
    n = p.n
    t, i = _pairs(n)  # the pair (i, t) with t < i

    def e(abc, a, b):
        return eta[abc][a, b]

    p00, p01, p10, p11 = (p[k][i, t] for k in ("00", "01", "10", "11"))
    x_theta = np.stack(
        [e("100", i, t), e("100", t, i), -(e("010", i, t) + e("010", t, i))], axis=-1
    )
    y_theta = np.stack([p01, p10, p00], axis=-1)
    sigma_theta2 = _fsum(g_m(x_theta, y_theta)) / n**4
    x_rho = np.stack(
        [
            -(e("100", i, t) + e("011", t, i)),
            e("010", i, t) + e("010", t, i),
            e("101", i, t) + e("101", t, i),
            -(e("011", i, t) + e("100", t, i)),
        ],
        axis=-1,
    )
    y_rho = np.stack([p01, p00, p11, p10], axis=-1)
    sigma_rho2 = _fsum(g_m(x_rho, y_rho)) / n**4

    off = ~np.eye(n, dtype=bool)

    def row_sum(m):
        return np.where(off, m, 0.0).sum(axis=1)

    # alpha_i: dyads (k, i); beta_j: dyads (j, l)
    ga = g_m(
        np.stack([kappa1, -kappa2], axis=-1),
        np.stack([p.p01.T, p.p00.T], axis=-1),
    )
    gb = g_m(
        np.stack([xi1, -xi2], axis=-1),
        np.stack([p.p01, p.p00], axis=-1),
    )
    sigma_alpha2 = row_sum(ga) / n**2
    sigma_beta2 = row_sum(gb) / n**2
    cross = _cross_terms(kappa1, kappa2, xi1, xi2, p.p00, p.p01, p.p10, form)
    sigma_cross = row_sum(cross) / n**2
    return sigma_theta2, sigma_rho2, sigma_alpha2, sigma_beta2, sigma_cross


def _cross_terms(k1, k2, x1, x2, p00, p01, p10, form):
    """Summands of ``sigma_ii`` over the dyads ``(i, l)``.

    ``sigma_ii`` is the covariance of the dyad-(i, l) parts of
    ``alpha_hat_i`` and ``beta_hat_i``, i.e. of ``k1 I^10 - k2 I^00`` and
    ``x1 I^01 - x2 I^00``.  ``form="printed"`` keeps the alternative
    last two products ``p01 * p01`` and ``p00 * (1 - p01)``.
    """
    if form == "derived":
        third, fourth = p00 * p01, p00 * (1.0 - p00)
    else:
        third, fourth = p01 * p01, p00 * (1.0 - p01)
    return -k1 * x1 * p10 * p01 + k1 * x2 * p10 * p00 + k2 * x1 * third + k2 * x2 * fourth


def _bias(p: DyadProbTable, zeta1, zeta2, form: str = "derived"):
    n = p.n
    t, i = _pairs(n)

    def z1(abc):
        return zeta1[abc][i, t], zeta1[abc][t, i]

    def z2(abc):
        return zeta2[abc][i, t], zeta2[abc][t, i]

    p00, p01, p10, p11 = (p[k][i, t] for k in ("00", "01", "10", "11"))
    z1_100, z1_100r = z1("100")
    z2_100, z2_100r = z2("100")
    z1_010, z1_010r = z1("010")
    z2_010, z2_010r = z2("010")
    z1_011, z1_011r = z1("011")
    z2_011, z2_011r = z2("011")
    z1_101, z1_101r = z1("101")
    z2_101, z2_101r = z2("101")
    null_block = (z1_010 + z1_010r + z2_010 + z2_010r) * p00 * (1 - p00)
    theta_terms = (
        -z1_100 * p01 * (1 - p01)
        - z1_100r * p10 * (1 - p10)
        + (z2_100 + z2_100r) * p10 * p01
        + null_block
    )
    # Second-order term of -log(denominator) for rho carries the covariance
    # of the two asymmetric configurations with a minus sign.
    cross_sign = 1.0 if form == "derived" else -1.0
    rho_terms = (
        (z1_100 + z1_011r) * p01 * (1 - p01)
        + (z1_100r + z1_011) * p10 * (1 - p10)
        - (z1_101 + z1_101r + z2_101 + z2_101r) * p11 * (1 - p11)
        - null_block
        - (z2_100 + z2_100r + cross_sign * (z2_011 + z2_011r)) * p01 * p10
    )
    return _fsum(theta_terms) / n**2, _fsum(rho_terms) / n**2


def _all_quantities(p: DyadProbTable):
    mu_t, mu_it = mu_values(p)
    eta, zeta1, zeta2 = eta_zeta(p, mu_t)
    kappa1, kappa2, xi1, xi2 = kappa_xi(p, mu_it)
    return mu_t, mu_it, eta, zeta1, zeta2, kappa1, kappa2, xi1, xi2


def bias_terms(p: DyadProbTable, form: str = "derived") -> tuple[float, float]:
    """Bias terms ``(theta_star, rho_star)``, both ``O(1/n)``.

    ``form="printed"`` flips the sign of the asymmetric-configuration
    covariance term in ``rho_star``.  The default keeps the sign that the
    linearisation of the estimator produces, which is also the one that
    matches simulated bias.
    """
    mu_t, _ = mu_values(p)
    _, zeta1, zeta2 = eta_zeta(p, mu_t)
    return _bias(p, zeta1, zeta2, form)


def variance_table(
    p: DyadProbTable, source: str = "true", form: str = "derived", method: str = "fast"
) -> AsymptoticTable:
    """Evaluate every asymptotic quantity on a probability table.

    ``method="naive"`` runs the literal loops of :func:`naive_table`
    (small ``n`` only).  ``form`` selects between the covariance-consistent
    ``"derived"`` expressions for ``sigma_ii`` and ``rho_star`` and the
    ``"printed"`` alternatives kept for comparison.

    Raises
    ------
    ZeroMu
        When a required expected triple count is zero, e.g. a plug-in
        table from degenerate estimates.
    """
    if form not in ("derived", "printed"):
        raise ValueError(f"unknown form {form!r}")
    if method == "naive":
        table = naive_table(p, form)
        table.source = source
        return table
    mu_t, mu_it, eta, zeta1, zeta2, k1, k2, x1, x2 = _all_quantities(p)
    s_th, s_rho, s_a, s_b, s_x = _variances(p, eta, k1, k2, x1, x2, form)
    th_star, rho_star = _bias(p, zeta1, zeta2, form)
    return AsymptoticTable(
        source, p.n, mu_t, mu_it, eta, zeta1, zeta2, k1, k2, x1, x2,
        s_th, s_rho, s_a, s_b, s_x, th_star, rho_star, p.sparsity_constants(),
    )


def plug_in(est, form: str = "derived") -> AsymptoticTable:
    """Asymptotic table at the probabilities implied by an estimate.

    ``est`` is an :class:`~p1tdre.estimator.EstimateReport` or a
    :class:`~p1tdre.model.ParamVector`.  Reports with skipped nodes are
    evaluated on the model restricted to the estimated nodes.
    """
    params = est if not hasattr(est, "restricted_params") else est.restricted_params()
    return variance_table(dyad_probs(center(params)), source="plugin", form=form)


# ---------------------------------------------------------------------------
# Direct transcription with explicit loops, for small n and cross-checking.

NAIVE_MAX_N = 64


def naive_table(p: DyadProbTable, form: str = "derived") -> AsymptoticTable:
    """Same quantities as :func:`variance_table` via the literal index sums.

    Costs ``O(n^4)`` Python operations, so it refuses ``n > NAIVE_MAX_N``.
    """
    n = p.n
    if n > NAIVE_MAX_N:
        raise ValueError(f"naive path is limited to n <= {NAIVE_MAX_N}")
    pr = {k: p[k].tolist() for k in ("00", "01", "10", "11")}
    fs = math.fsum
    nan = float("nan")

    def mats():
        return [[nan] * n for _ in range(n)]

    mu_t, mu_it = {}, {}
    for abc in COMBOS:
        a, b, c = abc
        P, Q = pr[c + a], pr[c + b]
        mu_t[abc] = np.array(
            [
                fs(P[i][t] * Q[i][j] * P[t][j] for i in range(n) for j in range(n)
                   if len({i, j, t}) == 3) / n**2
                for t in range(n)
            ]
        )
        m = mats()
        for i in range(n):
            for t in range(n):
                if i != t:
                    m[i][t] = fs(
                        P[k][i] * Q[k][l] * P[t][l]
                        for k in range(n) for l in range(n)
                        if len({k, l, i, t}) == 4
                    ) / n**2
        mu_it[abc] = np.array(m)
    eta, zeta1, zeta2 = {}, {}, {}
    for abc in COMBOS:
        a, b, c = abc
        P, Q = pr[c + a], pr[c + b]
        mt, ms = mu_t[abc], mu_t[_swap(abc)]
        e, z1, z2 = mats(), mats(), mats()
        for i in range(n):
            for t in range(n):
                if i == t:
                    continue
                e[i][t] = fs(
                    P[t][j] * Q[i][j] / mt[t] + P[j][i] * Q[j][t] / mt[i] - Q[i][j] * Q[j][t] / ms[j]
                    for j in range(n) if j not in (i, t)
                ) / n
                f1 = fs(P[t][j] * Q[i][j] for j in range(n) if j != t) / mt[t]
                f2 = fs(P[j][i] * Q[j][t] for j in range(n) if j != t) / mt[i]
                g = fs(P[j][t] * Q[j][i] for j in range(n) if j != t) / mt[t]
                z1[i][t] = (f1 * f1 + f2 * f2) / (2 * n**3)
                z2[i][t] = f1 * g / n**3
        eta[abc], zeta1[abc], zeta2[abc] = np.array(e), np.array(z1), np.array(z2)

    def double(w, first, second, transpose):
        out = mats()
        for x in range(n):
            for y in range(n):
                if x == y:
                    continue
                terms = []
                for t in range(n):
                    if t in (x, y):
                        continue
                    inv = 1.0 / (w[t][x] if transpose else w[x][t])
                    for r in range(n):
                        if r in (x, y, t):
                            continue
                        if transpose:  # xi: sum over k = r
                            terms.append(inv * first[r][t] * second[r][y])
                        else:  # kappa: sum over l = r
                            terms.append(inv * first[t][r] * second[y][r])
                out[x][y] = fs(terms) / n**2
        return np.array(out)

    m100, m010 = mu_it["100"].tolist(), mu_it["010"].tolist()
    k1 = double(m100, pr["01"], pr["00"], False)
    k2 = double(m010, pr["00"], pr["01"], False)
    x1 = double(m100, pr["01"], pr["00"], True)
    x2 = double(m010, pr["00"], pr["01"], True)

    def g(xs, ys):
        return fs(x * x * y for x, y in zip(xs, ys)) - fs(x * y for x, y in zip(xs, ys)) ** 2

    E = {k: v.tolist() for k, v in eta.items()}
    th_terms, rho_terms = [], []
    for i in range(n):
        for t in range(i):
            p00, p01, p10, p11 = (pr[k][i][t] for k in ("00", "01", "10", "11"))
            th_terms.append(g(
                [E["100"][i][t], E["100"][t][i], -(E["010"][i][t] + E["010"][t][i])],
                [p01, p10, p00],
            ))
            rho_terms.append(g(
                [-(E["100"][i][t] + E["011"][t][i]), E["010"][i][t] + E["010"][t][i],
                 E["101"][i][t] + E["101"][t][i], -(E["011"][i][t] + E["100"][t][i])],
                [p01, p00, p11, p10],
            ))
    s_a = np.array([fs(g([k1[i, k], -k2[i, k]], [pr["01"][k][i], pr["00"][k][i]])
                       for k in range(n) if k != i) / n**2 for i in range(n)])
    s_b = np.array([fs(g([x1[j, l], -x2[j, l]], [pr["01"][j][l], pr["00"][j][l]])
                       for l in range(n) if l != j) / n**2 for j in range(n)])
    s_x = np.array([
        fs(_cross_terms(k1[i, l], k2[i, l], x1[i, l], x2[i, l],
                        pr["00"][i][l], pr["01"][i][l], pr["10"][i][l], form)
           for l in range(n) if l != i) / n**2
        for i in range(n)
    ])
    th_star, rho_star = _bias(p, zeta1, zeta2, form)
    return AsymptoticTable(
        "true", n, mu_t, mu_it, eta, zeta1, zeta2, k1, k2, x1, x2,
        fs(th_terms) / n**4, fs(rho_terms) / n**4, s_a, s_b, s_x,
        th_star, rho_star, p.sparsity_constants(),
    )
