"""Maximum-likelihood baseline for the p1 model.

The likelihood is fitted in a full-rank reference parameterisation
(``theta = 0`` and ``beta_{n-1} = 0``) with the sufficient statistics
``(m, out-degrees, in-degrees 0..n-2)``.  Their covariance is the
negative Hessian, assembled dyad by dyad, so each iteration is a damped
Newton step; step halving keeps the log-likelihood nondecreasing.  The
result is returned in the centred identification.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.special import logsumexp

from .errors import DegeneracyError, Diverged, NotConverged
from .estimator import estimate_all
from .model import Digraph, ParamVector, center, dyad_log_weights, dyad_probs, tally

__all__ = ["MleResult", "log_likelihood", "fit_mle", "score_residuals"]

log = logging.getLogger(__name__)


@dataclass
class MleResult:
    theta_tilde: ParamVector
    log_lik: float
    iterations: int
    converged: bool
    grad_norm: float

    def to_dict(self) -> dict:
        p = self.theta_tilde
        return {
            "n": p.n,
            "theta": p.theta,
            "rho": p.rho,
            "alpha": p.alpha.tolist(),
            "beta": p.beta.tolist(),
            "skipped": [],
            "method": "mle",
            "log_lik": self.log_lik,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
        }


def _observed(g: Digraph):
    t = tally(g)
    return t.mutual_count(), g.out_degree().astype(float), g.in_degree().astype(float)


def log_likelihood(g: Digraph, theta_vec: ParamVector) -> float:
    """Log-probability of ``g``, summed over dyads ``i < j``."""
    if theta_vec.n != g.n:
        raise ValueError("parameter length does not match the graph")
    w10, w01, w11 = dyad_log_weights(theta_vec)
    iu = np.triu_indices(g.n, 1)
    stacked = np.stack([np.zeros(iu[0].size), w10[iu], w01[iu], w11[iu]])
    log_k = logsumexp(stacked, axis=0)
    x = g.adjacency()
    fwd = x[iu].astype(bool)
    back = x.T[iu].astype(bool)
    config = fwd.astype(np.int64) * 1 + back.astype(np.int64) * 2
    # config 0: 00, 1: i->j only (w10), 2: j->i only (w01), 3: mutual
    picked = stacked[config, np.arange(config.size)]
    return float(np.sum(picked - log_k))


def score_residuals(g: Digraph, theta_vec: ParamVector) -> np.ndarray:
    """Expected minus observed sufficient statistics.

    Ordered as ``(m, x_++, out-degrees, in-degrees)``, length ``2n + 2``.
    """
    m, d_out, d_in = _observed(g)
    p = dyad_probs(theta_vec)
    q = p.edge_prob()
    e_out = q.sum(axis=1)
    e_in = q.sum(axis=0)
    e_m = np.triu(p.p11, 1).sum()
    return np.concatenate([[e_m - m, e_out.sum() - d_out.sum()], e_out - d_out, e_in - d_in])


def _to_reference(p: ParamVector):
    a = p.theta + p.alpha + p.beta[-1]
    b = p.beta[:-1] - p.beta[-1]
    return np.concatenate([[p.rho], a, b])


def _from_reference(phi: np.ndarray, n: int) -> ParamVector:
    return center(ParamVector(phi[0], 0.0, phi[1 : n + 1], np.append(phi[n + 1 :], 0.0)))


def _moments(phi, n):
    """Expected statistics and their covariance at reference parameters."""
    p = dyad_probs(_from_reference(phi, n))
    q = p.edge_prob()
    e_out = q.sum(axis=1)
    e_in = q.sum(axis=0)
    e_m = np.triu(p.p11, 1).sum()
    v = q * (1.0 - q)  # Var(X_ij)
    c = p.p11 - q * q.T  # Cov(X_ij, X_ji)
    w = p.p11 * (1.0 - q)  # Cov(M_ij, X_ij)
    dim = 2 * n
    h = np.empty((dim, dim))
    h[0, 0] = np.triu(p.p11 * (1.0 - p.p11), 1).sum()
    h[0, 1 : n + 1] = w.sum(axis=1)
    h[0, n + 1 :] = w.sum(axis=0)[:-1]
    h[1 : n + 1, 0] = h[0, 1 : n + 1]
    h[n + 1 :, 0] = h[0, n + 1 :]
    aa = c.copy()
    np.fill_diagonal(aa, v.sum(axis=1))
    h[1 : n + 1, 1 : n + 1] = aa
    bb = c[:-1, :-1].copy()
    np.fill_diagonal(bb, v.sum(axis=0)[:-1])
    h[n + 1 :, n + 1 :] = bb
    ab = v.copy()
    np.fill_diagonal(ab, c.sum(axis=1))
    h[1 : n + 1, n + 1 :] = ab[:, :-1]
    h[n + 1 :, 1 : n + 1] = ab[:, :-1].T
    return (e_m, e_out, e_in), h


def _initial(g: Digraph, n: int, start: ParamVector | None) -> np.ndarray:
    if start is not None:
        return _to_reference(start)
    try:
        rep = estimate_all(tally(g))
        init = rep.params
        if np.isfinite(init.to_vector()).all():
            return _to_reference(init)
    except DegeneracyError:
        pass
    dens = min(max(g.density(), 1e-6), 1 - 1e-6)
    phi = np.zeros(2 * n)
    phi[1 : n + 1] = np.log(dens / (1 - dens))
    return phi


def _boundary_reason(n: int, m: int, d_out: np.ndarray, d_in: np.ndarray) -> str | None:
    """Why the MLE cannot exist, if a sufficient statistic sits on its boundary.

    Each of these makes some parameter run off to infinity: a node that
    sends (or receives) no edges or all of them, no mutual dyads, or no
    asymmetric dyads.
    """
    for name, deg in (("out", d_out), ("in", d_in)):
        extreme = np.flatnonzero((deg == 0) | (deg == n - 1))
        if extreme.size:
            return f"MLE does not exist: node {int(extreme[0])} has {name}-degree {int(deg[extreme[0]])}"
    if m == 0:
        return "MLE does not exist: no mutual dyads"
    if 2 * m == d_out.sum():
        return "MLE does not exist: every edge is reciprocated"
    return None


def fit_mle(
    g: Digraph,
    tol: float = 1e-8,
    max_iter: int = 100,
    start: ParamVector | None = None,
) -> MleResult:
    """Maximise the p1 likelihood of ``g``.

    Parameters
    ----------
    tol : float
        Convergence once every expected sufficient statistic is within
        ``tol`` of its observed value.
    max_iter : int
        Newton iterations before giving up.
    start : ParamVector, optional
        Starting point; defaults to the triple-dyad ratio estimate, or a
        constant-density guess when that is undefined.

    Raises
    ------
    NotConverged
        After ``max_iter`` iterations, when no step improves the
        likelihood, or up front when a sufficient statistic lies on the
        boundary so that no finite maximiser exists.
    Diverged
        If the likelihood decreases, which signals numerical trouble.
    """
    n = g.n
    m, d_out, d_in = _observed(g)
    reason = _boundary_reason(n, m, d_out, d_in)
    if reason is not None:
        raise NotConverged(float("inf"), 0, reason)
    observed = np.concatenate([[m], d_out, d_in[:-1]])
    phi = _initial(g, n, start)
    ll = log_likelihood(g, _from_reference(phi, n))
    resid = np.inf
    for it in range(1, max_iter + 1):
        (e_m, e_out, e_in), h = _moments(phi, n)
        score = observed - np.concatenate([[e_m], e_out, e_in[:-1]])
        full = np.concatenate(
            [[e_m - m, e_out.sum() - d_out.sum()], e_out - d_out, e_in - d_in]
        )
        resid = float(np.max(np.abs(full)))
        if resid <= tol:
            return MleResult(_from_reference(phi, n), ll, it - 1, True, resid)
        try:
            step = la.cho_solve(la.cho_factor(h, check_finite=False), score, check_finite=False)
        except la.LinAlgError:
            step = la.lstsq(h, score)[0]
        scale = 1.0
        while True:
            trial = phi + scale * step
            ll_new = log_likelihood(g, _from_reference(trial, n))
            if ll_new >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            scale *= 0.5
            if scale < 1e-10:
                raise NotConverged(resid, it)
        if ll_new < ll - 1e-8 * max(1.0, abs(ll)):
            raise Diverged(f"log-likelihood fell from {ll} to {ll_new}")
        phi, ll = trial, ll_new
        log.debug("iter %d: residual %.3g, step scale %g", it, resid, scale)
    raise NotConverged(resid, max_iter)
