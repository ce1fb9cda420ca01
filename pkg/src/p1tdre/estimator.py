"""Triple-dyad ratio estimators.

Every parameter estimate is an average over anchor nodes of a log ratio of
two triple-dyad counts.  With the configuration matrices of a
:class:`~p1tdre.model.DyadTally` the counts are entries of

    B1 = A01 A00 A01,   B2 = A00 A01 A00,
    diag(A11 A10 A11),  diag(A01 A11 A01),

and the estimators read

    theta_hat  = mean_t log(B1[t, t] / B2[t, t])
    rho_hat    = mean_t log(B3[t, t] / B4[t, t]) - theta_hat
    alpha_hat_i = mean_t log(B1[t, i] / B2[i, t]) - theta_hat
    beta_hat_j  = mean_t log(B1[j, t] / B2[t, j]) - theta_hat

The average over ``t`` includes ``t = i`` (resp. ``t = j``), where the
ratio is the anchor ratio of node ``i`` itself.

Three count paths are available: ``"dense"`` (BLAS products on exactly
representable integers), ``"sparse"`` (complement decomposition of
``A00``, for large sparse graphs) and ``"bruteforce"`` (the definitional
double sums, for tiny graphs).  All three produce identical integers, and
all averages are taken in ascending node order, so reports agree bit for
bit across paths.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _sparse
from .errors import DataError, DegenerateCounts, EmptyFilter
from .model import Digraph, DyadTally, ParamVector, tally

__all__ = [
    "TripleCounts",
    "EstimateReport",
    "triple_counts",
    "estimate_theta",
    "estimate_rho",
    "estimate_alpha",
    "estimate_beta",
    "estimate_all",
    "estimate_filtered",
    "estimate_theta_filtered",
    "gamma_filter",
    "SPARSE_DENSITY",
]

# below this edge density "auto" selects the sparse path
SPARSE_DENSITY = 0.05
# float32 holds every partial sum exactly while (n-1)(n-2) < 2**24
_FLOAT32_MAX_N = 4096
_FLOAT64_MAX_N = 90_000_000
# the sparse path materialises full B1/B2 only up to this n
_FULL_MATRIX_MAX_N = 12_000
_BLOCK = 256


def _as_tally(g) -> DyadTally:
    if isinstance(g, DyadTally):
        return g
    if isinstance(g, Digraph):
        return tally(g)
    raise TypeError(f"expected a DyadTally or Digraph, got {type(g).__name__}")


def _ordered_sum(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Sum along ``axis`` strictly in ascending index order."""
    x = np.asarray(x, dtype=float)
    if x.shape[axis] == 0:
        return np.zeros(np.delete(x.shape, axis))
    return np.take(np.cumsum(x, axis=axis), -1, axis=axis)


class TripleCounts:
    """Triple-dyad counts of one tally.

    Attributes
    ----------
    d1, d2, d3, d4 : ndarray of int64
        Diagonals of ``B1 = A01 A00 A01``, ``B2 = A00 A01 A00``,
        ``B3 = A11 A10 A11`` and ``B4 = A01 A11 A01``.
    B1, B2 : ndarray of int64 or None
        Full matrices; ``None`` on the sparse path for very large ``n``,
        in which case rows and columns are produced on demand.
    B3, B4 : ndarray of int64 or None
        Full matrices, only when requested with ``full=True``.
    """

    def __init__(self, tally_, method, d1, d2, d3, d4, B1=None, B2=None, B3=None, B4=None):
        self.tally = tally_
        self.n = tally_.n
        self.method = method
        self.d1, self.d2, self.d3, self.d4 = d1, d2, d3, d4
        self.B1, self.B2, self.B3, self.B4 = B1, B2, B3, B4
        self._csc = None

    def _sparse_parts(self):
        if self._csc is None:
            t = self.tally
            self._csc = {
                "01": t.sparse01.tocsc(),
                "10": t.sparse10.tocsc(),
                "S": t.nonnull.tocsc(),
            }
        return self._csc

    def _chain(self, cols, kind):
        """Columns of ``B1``, ``B1.T``, ``B2`` or ``B2.T`` through sparse algebra."""
        t = self.tally
        c = self._sparse_parts()
        s = t.nonnull
        if kind == "B1":  # A01 A00 A01
            return t.sparse01 @ _sparse.apply_a00(s, _sparse.dense_columns(c["01"], cols))
        if kind == "B1T":  # A10 A00 A10
            return t.sparse10 @ _sparse.apply_a00(s, _sparse.dense_columns(c["10"], cols))
        if kind == "B2":  # A00 A01 A00
            return _sparse.apply_a00(s, t.sparse01 @ _sparse.a00_columns(c["S"], cols))
        if kind == "B2T":  # A00 A10 A00
            return _sparse.apply_a00(s, t.sparse10 @ _sparse.a00_columns(c["S"], cols))
        raise ValueError(kind)

    def columns(self, kind: str, idx) -> np.ndarray:
        """Return an ``(n, len(idx))`` int64 block of the named matrix's columns.

        ``kind`` is one of ``"B1"``, ``"B1T"``, ``"B2"``, ``"B2T"``; the
        transposed kinds give rows of the untransposed matrix.
        """
        idx = np.asarray(idx, dtype=np.int64)
        full = {"B1": self.B1, "B2": self.B2}[kind.rstrip("T")]
        if full is not None:
            block = full[:, idx] if not kind.endswith("T") else full[idx, :].T
            return np.ascontiguousarray(block, dtype=np.int64)
        out = np.empty((self.n, idx.size), dtype=np.int64)
        for lo in range(0, idx.size, _BLOCK):
            out[:, lo : lo + _BLOCK] = self._chain(idx[lo : lo + _BLOCK], kind)
        return out


def _dense_counts(t: DyadTally, full: bool) -> TripleCounts:
    n = t.n
    if n > _FLOAT64_MAX_N:
        raise DataError(f"n = {n} too large for exact dense counting")
    dtype = np.float32 if n <= _FLOAT32_MAX_N else np.float64
    a00 = t.A00.astype(dtype)
    a01 = t.A01.astype(dtype)
    a10 = np.ascontiguousarray(a01.T)
    a11 = t.A11.astype(dtype)
    m = a01 @ a00
    b1 = m @ a01
    b2 = a00 @ m
    del m
    p3 = a11 @ a10
    p4 = a01 @ a11

    def exact(x):
        return np.rint(x).astype(np.int64)

    # diag(P Z) = sum_j P[t, j] Z[j, t]
    d3 = exact(np.einsum("ij,ji->i", p3, a11))
    d4 = exact(np.einsum("ij,ji->i", p4, a01))
    b3 = exact(p3 @ a11) if full else None
    b4 = exact(p4 @ a01) if full else None
    b1, b2 = exact(b1), exact(b2)
    return TripleCounts(
        t, "dense", np.diagonal(b1).copy(), np.diagonal(b2).copy(), d3, d4, b1, b2, b3, b4
    )


def _sparse_counts(t: DyadTally, full: bool) -> TripleCounts:
    s = t.nonnull
    a01, a10, a11 = t.sparse01, t.sparse10, t.sparse11
    d1 = _sparse.diag_x_a00_y(a01, a01, s)
    d2 = _sparse.diag_a00_y_a00(a01, s)
    d3 = _sparse.tri_diag(a11, a10, a11)
    d4 = _sparse.tri_diag(a01, a11, a01)
    counts = TripleCounts(t, "sparse", d1, d2, d3, d4)
    if t.n <= _FULL_MATRIX_MAX_N:
        everything = np.arange(t.n)
        counts.B1 = counts.columns("B1", everything)
        counts.B2 = counts.columns("B2", everything)
    if full:
        counts.B3 = np.asarray((a11 @ a10 @ a11).toarray(), dtype=np.int64)
        counts.B4 = np.asarray((a01 @ a11 @ a01).toarray(), dtype=np.int64)
    return counts


def _bruteforce_counts(t: DyadTally, full: bool) -> TripleCounts:
    n = t.n
    if n > 40:
        raise DataError("the brute-force path is meant for n <= 40")
    A = {k: v.tolist() for k, v in t.matrices().items()}
    I00, I01, I10, I11 = A["00"], A["01"], A["10"], A["11"]
    b1 = np.zeros((n, n), dtype=np.int64)
    b2 = np.zeros((n, n), dtype=np.int64)
    for i, tt in itertools.product(range(n), repeat=2):
        num = den = 0
        for k, l in itertools.product(range(n), repeat=2):
            if k == l or k in (i, tt) or l in (i, tt):
                continue
            num += I01[k][i] * I00[k][l] * I01[tt][l]
            den += I00[k][i] * I01[k][l] * I00[tt][l]
        b1[tt, i] = num
        b2[i, tt] = den
    d3 = np.zeros(n, dtype=np.int64)
    d4 = np.zeros(n, dtype=np.int64)
    for tt in range(n):
        for i, j in itertools.product(range(n), repeat=2):
            if i == j or tt in (i, j):
                continue
            d3[tt] += I11[i][tt] * I10[i][j] * I11[tt][j]
            d4[tt] += I10[i][tt] * I11[i][j] * I10[tt][j]
    b3 = b4 = None
    if full:
        m = {k: np.array(v, dtype=np.int64) for k, v in A.items()}
        b3 = m["11"] @ m["10"] @ m["11"]
        b4 = m["01"] @ m["11"] @ m["01"]
    return TripleCounts(
        t, "bruteforce", np.diagonal(b1).copy(), np.diagonal(b2).copy(), d3, d4, b1, b2, b3, b4
    )


def _resolve_method(t: DyadTally, method: str) -> str:
    if method == "auto":
        return "sparse" if t.density() < SPARSE_DENSITY else "dense"
    if method not in ("dense", "sparse", "bruteforce"):
        raise DataError(f"unknown method {method!r}")
    return method


def triple_counts(t, method: str = "auto", full: bool = False) -> TripleCounts:
    """Compute the triple-dyad counts of a tally (or graph).

    Parameters
    ----------
    t : DyadTally or Digraph
    method : {"auto", "dense", "sparse", "bruteforce"}
        ``"auto"`` picks the sparse path when the edge density is below
        ``SPARSE_DENSITY``.
    full : bool
        Also build the full ``B3`` and ``B4`` matrices.
    """
    t = _as_tally(t)
    method = _resolve_method(t, method)
    builder = {"dense": _dense_counts, "sparse": _sparse_counts, "bruteforce": _bruteforce_counts}
    return builder[method](t, full)


def _counts(t, method="auto") -> TripleCounts:
    if isinstance(t, TripleCounts):
        return t
    return triple_counts(t, method)


def _log_ratio(num: np.ndarray, den: np.ndarray, what: str, labels=None) -> np.ndarray:
    bad = (num <= 0) | (den <= 0)
    if bad.any():
        where = np.argwhere(bad)
        if labels is not None:
            nodes = [labels(*w) for w in where]
        else:
            nodes = [int(w[0]) if w.size == 1 else tuple(int(v) for v in w) for w in where]
        raise DegenerateCounts(nodes, what)
    return np.log(num.astype(float)) - np.log(den.astype(float))


def theta_terms(c: TripleCounts) -> np.ndarray:
    """Per-anchor log ratios ``log(B1[t, t] / B2[t, t])``."""
    return _log_ratio(c.d1, c.d2, "theta count")


def rho_terms(c: TripleCounts) -> np.ndarray:
    """Per-anchor log ratios ``log(B3[t, t] / B4[t, t])``."""
    return _log_ratio(c.d3, c.d4, "rho count")


def estimate_theta(t, method: str = "auto") -> tuple[float, np.ndarray]:
    """Density estimate and its per-anchor log-ratio terms.

    Raises
    ------
    DegenerateCounts
        If ``B1[t, t]`` or ``B2[t, t]`` is zero for some anchor ``t``.
    """
    c = _counts(t, method)
    terms = theta_terms(c)
    return float(_ordered_sum(terms) / c.n), terms


def estimate_rho(t, theta_hat: float, method: str = "auto") -> float:
    c = _counts(t, method)
    return float(_ordered_sum(rho_terms(c)) / c.n) - theta_hat


def _degree_terms(c: TripleCounts, nodes, anchors, kind: str) -> np.ndarray:
    """Mean over ``anchors`` of the log ratios feeding alpha (or beta).

    For ``alpha_i`` the ratio at anchor ``t`` is ``B1[t, i] / B2[i, t]``;
    for ``beta_j`` it is ``B1[j, t] / B2[t, j]``.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    anchors = np.asarray(anchors, dtype=np.int64)
    out = np.empty(nodes.size)
    for lo in range(0, nodes.size, _BLOCK):
        idx = nodes[lo : lo + _BLOCK]
        if kind == "alpha":
            num = c.columns("B1", idx)[anchors]
            den = c.columns("B2T", idx)[anchors]
        else:
            num = c.columns("B1T", idx)[anchors]
            den = c.columns("B2", idx)[anchors]

        def label(r, k, idx=idx):
            return (int(idx[k]), int(anchors[r]))

        ratio = _log_ratio(num, den, f"{kind} count", labels=label)
        out[lo : lo + _BLOCK] = _ordered_sum(ratio, axis=0) / anchors.size
    return out


def estimate_alpha(t, theta_hat: float, nodes=None, method: str = "auto") -> np.ndarray:
    """Expansiveness estimates for ``nodes`` (all nodes by default).

    Raises
    ------
    DegenerateCounts
        Carrying ``(i, t)`` pairs where ``B1[t, i]`` or ``B2[i, t]`` is zero.
    """
    c = _counts(t, method)
    nodes = np.arange(c.n) if nodes is None else nodes
    return _degree_terms(c, nodes, np.arange(c.n), "alpha") - theta_hat


def estimate_beta(t, theta_hat: float, nodes=None, method: str = "auto") -> np.ndarray:
    """Popularity estimates; mirror image of :func:`estimate_alpha`."""
    c = _counts(t, method)
    nodes = np.arange(c.n) if nodes is None else nodes
    return _degree_terms(c, nodes, np.arange(c.n), "beta") - theta_hat


@dataclass
class EstimateReport:
    """Estimated parameters with an audit trail.

    ``alpha_terms[i]`` is the anchor-averaged log ratio for ``alpha_i``,
    so ``alpha[i] + theta == alpha_terms[i]``; likewise for beta.  Nodes
    outside the averaging set carry NaN estimates and are listed in
    ``skipped``.
    """

    n: int
    theta: float
    rho: float
    alpha: np.ndarray
    beta: np.ndarray
    theta_terms: np.ndarray
    rho_terms: np.ndarray
    alpha_terms: np.ndarray
    beta_terms: np.ndarray
    method: str
    skipped: list = field(default_factory=list)
    gamma: np.ndarray | None = None

    @property
    def params(self) -> ParamVector:
        """Estimates as a :class:`ParamVector` (only when nothing was skipped)."""
        if self.skipped:
            raise DataError("estimates are incomplete; use the restricted node set")
        return ParamVector(self.rho, self.theta, self.alpha, self.beta)

    def restricted_params(self) -> ParamVector:
        """Parameters of the nodes that were estimated, in ascending order."""
        keep = self.kept_nodes()
        return ParamVector(self.rho, self.theta, self.alpha[keep], self.beta[keep])

    def kept_nodes(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n), np.asarray(self.skipped, dtype=np.int64))

    def to_dict(self) -> dict:
        def clean(v):
            return [None if not np.isfinite(x) else float(x) for x in v]

        return {
            "n": self.n,
            "theta": self.theta,
            "rho": self.rho,
            "alpha": clean(self.alpha),
            "beta": clean(self.beta),
            "skipped": [int(s) for s in self.skipped],
            "method": self.method,
        }


def estimate_all(t, method: str = "auto") -> EstimateReport:
    """Run every estimator on one set of counts.

    Raises
    ------
    DegenerateCounts
        With the offending nodes, if any log ratio is undefined.
    """
    c = _counts(t, method)
    n = c.n
    theta, th_terms = estimate_theta(c)
    r_terms = rho_terms(c)
    rho = float(_ordered_sum(r_terms) / n) - theta
    everything = np.arange(n)
    a_terms = _degree_terms(c, everything, everything, "alpha")
    b_terms = _degree_terms(c, everything, everything, "beta")
    return EstimateReport(
        n, theta, rho, a_terms - theta, b_terms - theta,
        th_terms, r_terms, a_terms, b_terms, c.method,
    )


def gamma_filter(t, min_out: int = 5, min_in: int = 5, method: str = "auto") -> np.ndarray:
    """Nodes with enough degree and positive anchor counts.

    Keeps ``t`` with out-degree ``>= min_out``, in-degree ``>= min_in`` and
    all four anchor counts ``B1[t, t], B2[t, t], B3[t, t], B4[t, t] > 0``.
    """
    c = _counts(t, method)
    tl = c.tally
    keep = (
        (tl.out_degree() >= min_out)
        & (tl.in_degree() >= min_in)
        & (c.d1 > 0)
        & (c.d2 > 0)
        & (c.d3 > 0)
        & (c.d4 > 0)
    )
    return np.flatnonzero(keep)


def estimate_theta_filtered(t, gamma, method: str = "auto") -> float:
    """Density estimate averaged over anchors in ``gamma`` only."""
    c = _counts(t, method)
    gamma = _check_gamma(gamma, c.n)
    terms = _log_ratio(c.d1[gamma], c.d2[gamma], "theta count", labels=lambda k: int(gamma[k]))
    return float(_ordered_sum(terms) / gamma.size)


def _check_gamma(gamma, n) -> np.ndarray:
    gamma = np.unique(np.asarray(gamma, dtype=np.int64))
    if gamma.size == 0:
        raise EmptyFilter("the node filter is empty")
    if gamma[0] < 0 or gamma[-1] >= n:
        raise DataError("filter node out of range")
    return gamma


def estimate_filtered(t, gamma, method: str = "auto") -> EstimateReport:
    """All estimators with anchors and estimated nodes restricted to ``gamma``.

    Every average runs over ``t in gamma`` and divides by ``|gamma|``; nodes
    outside ``gamma`` get NaN and are reported as skipped.
    """
    c = _counts(t, method)
    n = c.n
    gamma = _check_gamma(gamma, n)
    m = gamma.size
    th = _log_ratio(c.d1[gamma], c.d2[gamma], "theta count", labels=lambda k: int(gamma[k]))
    rh = _log_ratio(c.d3[gamma], c.d4[gamma], "rho count", labels=lambda k: int(gamma[k]))
    theta = float(_ordered_sum(th) / m)
    rho = float(_ordered_sum(rh) / m) - theta
    th_terms = np.full(n, np.nan)
    rh_terms = np.full(n, np.nan)
    a_terms = np.full(n, np.nan)
    b_terms = np.full(n, np.nan)
    th_terms[gamma], rh_terms[gamma] = th, rh
    a_terms[gamma] = _degree_terms(c, gamma, gamma, "alpha")
    b_terms[gamma] = _degree_terms(c, gamma, gamma, "beta")
    skipped = np.setdiff1d(np.arange(n), gamma).tolist()
    return EstimateReport(
        n, theta, rho, a_terms - theta, b_terms - theta,
        th_terms, rh_terms, a_terms, b_terms, c.method, skipped, gamma,
    )
