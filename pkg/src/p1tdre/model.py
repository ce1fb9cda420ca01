"""The p1 model for directed graphs.

Dyads ``(X_ij, X_ji)`` are independent across unordered pairs.  Writing
``u_ij = theta + alpha_i + beta_j`` for the log-odds of the edge ``i -> j``,
the four configurations of dyad ``(i, j)`` carry the unnormalised weights

    (0, 0): 1
    (1, 0): exp(u_ij)
    (0, 1): exp(u_ji)
    (1, 1): exp(u_ij + u_ji + rho)

Matrices are indexed so that ``p10[i, j] = P(X_ij = 1, X_ji = 0)``; hence
``p10 = p01.T`` while ``p00`` and ``p11`` are symmetric.  All nodes are
0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DataError, InvalidDesign

__all__ = [
    "ParamVector",
    "Digraph",
    "DyadTally",
    "DyadProbTable",
    "dyad_probs",
    "dyad_log_weights",
    "make_rng",
    "sample_graph",
    "tally",
    "linear_design",
    "center",
]


@dataclass(frozen=True)
class ParamVector:
    """Parameters ``(rho, theta, alpha, beta)`` of the p1 model."""

    rho: float
    theta: float
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).copy()
        beta = np.asarray(self.beta, dtype=float).copy()
        if alpha.ndim != 1 or alpha.shape != beta.shape:
            raise DataError("alpha and beta must be 1-d arrays of equal length")
        if alpha.size < 1:
            raise DataError("need at least one node")
        alpha.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def n(self) -> int:
        return self.alpha.size

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.rho)
            and np.isfinite(self.theta)
            and np.isfinite(self.alpha).all()
            and np.isfinite(self.beta).all()
        )

    def is_centered(self) -> bool:
        tol = 1e-9 * self.n
        return abs(self.alpha.sum()) <= tol and abs(self.beta.sum()) <= tol

    def to_vector(self) -> np.ndarray:
        """Stack as ``(rho, theta, alpha_1..alpha_n, beta_1..beta_n)``."""
        return np.concatenate([[self.rho, self.theta], self.alpha, self.beta])

    @classmethod
    def from_vector(cls, vec) -> "ParamVector":
        vec = np.asarray(vec, dtype=float)
        if vec.size < 4 or vec.size % 2:
            raise DataError("parameter vector must have length 2n + 2")
        n = (vec.size - 2) // 2
        return cls(vec[0], vec[1], vec[2 : 2 + n], vec[2 + n :])

    @classmethod
    def zeros(cls, n: int) -> "ParamVector":
        return cls(0.0, 0.0, np.zeros(n), np.zeros(n))

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "theta": self.theta,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamVector":
        try:
            return cls(d["rho"], d["theta"], d["alpha"], d["beta"])
        except KeyError as exc:
            raise DataError(f"parameter object lacks {exc.args[0]!r}") from None

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return (
            self.rho == other.rho
            and self.theta == other.theta
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.beta, other.beta)
        )

    __hash__ = None


class Digraph:
    """Simple directed graph on nodes ``0..n-1``.

    Edges are kept as two index arrays sorted by ``(src, dst)``, which makes
    equality and serialisation canonical.
    """

    __slots__ = ("n", "src", "dst")

    def __init__(self, n: int, src, dst=None):
        n = int(n)
        if n < 1:
            raise DataError("a graph needs at least one node")
        if dst is None:
            pairs = np.asarray(list(src), dtype=np.int64).reshape(-1, 2)
            src, dst = pairs[:, 0], pairs[:, 1]
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise DataError("src and dst differ in length")
        if src.size:
            if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
                raise DataError("edge endpoint out of range")
            if np.any(src == dst):
                raise DataError("self-loops are not allowed")
        key = src * n + dst
        order = np.argsort(key, kind="stable")
        key = key[order]
        if key.size > 1 and np.any(key[1:] == key[:-1]):
            raise DataError("duplicate edges are not allowed")
        self.n = n
        self.src = src[order]
        self.dst = dst[order]
        self.src.flags.writeable = False
        self.dst.flags.writeable = False

    @classmethod
    def from_adjacency(cls, x) -> "Digraph":
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise DataError("adjacency must be square")
        if np.any(np.diag(x)):
            raise DataError("self-loops are not allowed")
        src, dst = np.nonzero(x)
        return cls(x.shape[0], src, dst)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @property
    def edges(self) -> set:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def adjacency(self, sparse: bool = False):
        data = np.ones(self.src.size, dtype=np.int8)
        a = sp.csr_array((data, (self.src, self.dst)), shape=(self.n, self.n))
        return a if sparse else a.toarray()

    def density(self) -> float:
        return self.num_edges / (self.n * (self.n - 1)) if self.n > 1 else 0.0

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n)

    def relabel(self, perm) -> "Digraph":
        """Return the graph with node ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return Digraph(self.n, perm[self.src], perm[self.dst])

    def subgraph(self, nodes) -> "Digraph":
        """Induced subgraph, nodes renumbered in ascending order."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        index = np.full(self.n, -1, dtype=np.int64)
        index[nodes] = np.arange(nodes.size)
        keep = (index[self.src] >= 0) & (index[self.dst] >= 0)
        return Digraph(nodes.size, index[self.src[keep]], index[self.dst[keep]])

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
        )

    __hash__ = None

    def __repr__(self):
        return f"Digraph(n={self.n}, edges={self.num_edges})"


class DyadTally:
    """Dyad configuration indicators ``A^{ab}[i, j] = I(X_ij = a, X_ji = b)``.

    Only the sparse asymmetric (``A01``) and mutual (``A11``) patterns are
    stored; ``A10`` is the transpose of ``A01`` and ``A00`` is the
    complement ``J - I - A01 - A10 - A11``.  The dense attributes are built
    on first access and should only be touched for moderate ``n``.
    """

    def __init__(self, n: int, a01, a11):
        self.n = int(n)
        self.sparse01 = sp.csr_array(a01, dtype=np.int64)
        self.sparse11 = sp.csr_array(a11, dtype=np.int64)
        self.sparse01.sort_indices()
        self.sparse11.sort_indices()

    @cached_property
    def sparse10(self):
        s = self.sparse01.T.tocsr()
        s.sort_indices()
        return s

    @cached_property
    def nonnull(self):
        """Pattern of non-null dyads, ``S = A01 + A10 + A11`` (symmetric)."""
        s = (self.sparse01 + self.sparse10 + self.sparse11).tocsr()
        s.sort_indices()
        return s

    @cached_property
    def A01(self) -> np.ndarray:
        return self.sparse01.toarray().astype(np.int8)

    @cached_property
    def A10(self) -> np.ndarray:
        return np.ascontiguousarray(self.A01.T)

    @cached_property
    def A11(self) -> np.ndarray:
        return self.sparse11.toarray().astype(np.int8)

    @cached_property
    def A00(self) -> np.ndarray:
        a = np.ones((self.n, self.n), dtype=np.int8)
        np.fill_diagonal(a, 0)
        a -= self.A01 + self.A10 + self.A11
        return a

    def matrices(self) -> dict:
        return {"00": self.A00, "01": self.A01, "10": self.A10, "11": self.A11}

    def density(self) -> float:
        """Fraction of ordered pairs carrying an edge."""
        edges = 2 * self.sparse11.nnz + 2 * self.sparse01.nnz
        return edges / (2 * self.n * (self.n - 1)) if self.n > 1 else 0.0

    def out_degree(self) -> np.ndarray:
        # X_ij = 1 iff A10[i, j] or A11[i, j]
        return np.asarray(self.sparse10.sum(axis=1) + self.sparse11.sum(axis=1)).ravel()

    def in_degree(self) -> np.ndarray:
        return np.asarray(self.sparse01.sum(axis=1) + self.sparse11.sum(axis=1)).ravel()

    def mutual_count(self) -> int:
        return self.sparse11.nnz // 2

    def subset(self, nodes) -> "DyadTally":
        nodes = np.asarray(nodes, dtype=np.int64)
        return DyadTally(
            nodes.size,
            self.sparse01[nodes][:, nodes],
            self.sparse11[nodes][:, nodes],
        )


@dataclass(frozen=True)
class DyadProbTable:
    """Per-pair configuration probabilities, zero on the diagonal."""

    p00: np.ndarray
    p01: np.ndarray
    p10: np.ndarray
    p11: np.ndarray

    @property
    def n(self) -> int:
        return self.p00.shape[0]

    def __getitem__(self, ab: str) -> np.ndarray:
        return {"00": self.p00, "01": self.p01, "10": self.p10, "11": self.p11}[ab]

    def edge_prob(self) -> np.ndarray:
        """``P(X_ij = 1) = p10 + p11``."""
        return self.p10 + self.p11

    def sparsity_constants(self) -> tuple[float, float]:
        """Largest and smallest off-diagonal asymmetric-dyad probability."""
        off = ~np.eye(self.n, dtype=bool)
        vals = self.p01[off]
        return float(vals.max()), float(vals.min())


def dyad_log_weights(theta_vec: ParamVector):
    """Log-weights ``(w10, w01, w11)`` of the three non-null configurations."""
    u = theta_vec.theta + theta_vec.alpha[:, None] + theta_vec.beta[None, :]
    return u, u.T, u + u.T + theta_vec.rho


def dyad_probs(theta_vec: ParamVector) -> DyadProbTable:
    """Configuration probabilities of every dyad.

    Each dyad is normalised after subtracting its largest log-weight, so
    large parameters do not overflow.
    """
    w10, w01, w11 = dyad_log_weights(theta_vec)
    top = np.maximum(np.maximum(w10, w01), np.maximum(w11, 0.0))
    e00 = np.exp(-top)
    e10 = np.exp(w10 - top)
    e01 = np.exp(w01 - top)
    e11 = np.exp(w11 - top)
    k = e00 + e10 + e01 + e11
    probs = [e00 / k, e01 / k, e10 / k, e11 / k]
    for p in probs:
        np.fill_diagonal(p, 0.0)
    # exact transpose symmetry, independent of rounding in u + u.T
    p00, p01, _, p11 = probs
    p00 = np.triu(p00) + np.triu(p00, 1).T
    p11 = np.triu(p11) + np.triu(p11, 1).T
    return DyadProbTable(p00, p01, np.ascontiguousarray(p01.T), p11)


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox) seeded from ``seed``.

    ``seed`` may be an int or a :class:`numpy.random.SeedSequence`; the
    latter is how replication substreams are handed out.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def sample_graph(theta_vec: ParamVector, seed, chunk: int = 1 << 22) -> Digraph:
    """Draw a graph from the p1 model.

    One uniform is consumed per unordered pair, pairs visited in row-major
    order of the strict upper triangle, so the result depends only on
    ``(theta_vec, seed)``.
    """
    n = theta_vec.n
    if n < 2:
        raise DataError("need n >= 2 to sample")
    rng = make_rng(seed)
    a, b = theta_vec.alpha, theta_vec.beta
    srcs, dsts = [], []
    rows_per_chunk = max(1, chunk // n)
    for lo in range(0, n - 1, rows_per_chunk):
        hi = min(n - 1, lo + rows_per_chunk)
        i, j = _upper_pairs(n, lo, hi)
        u_ij = theta_vec.theta + a[i] + b[j]
        u_ji = theta_vec.theta + a[j] + b[i]
        w = np.stack([np.zeros_like(u_ij), u_ji, u_ij, u_ij + u_ji + theta_vec.rho])
        w -= w.max(axis=0)
        np.exp(w, out=w)
        cum = np.cumsum(w, axis=0)
        draw = rng.random(i.size) * cum[3]
        # configuration index: 0 -> 00, 1 -> 01 (j -> i), 2 -> 10 (i -> j), 3 -> 11
        config = (draw >= cum[0]).astype(np.int8)
        config += draw >= cum[1]
        config += draw >= cum[2]
        fwd = (config == 2) | (config == 3)
        back = (config == 1) | (config == 3)
        srcs += [i[fwd], j[back]]
        dsts += [j[fwd], i[back]]
    return Digraph(n, np.concatenate(srcs), np.concatenate(dsts))


def _upper_pairs(n: int, lo: int, hi: int):
    """Pairs ``(i, j)``, ``lo <= i < hi``, ``i < j``, in row-major order."""
    rows = np.arange(lo, hi, dtype=np.int64)
    counts = n - 1 - rows
    i = np.repeat(rows, counts)
    starts = np.cumsum(counts) - counts
    j = np.arange(i.size, dtype=np.int64) - np.repeat(starts, counts) + i + 1
    return i, j


def tally(g: Digraph) -> DyadTally:
    """Classify every dyad of ``g`` into its configuration."""
    x = g.adjacency(sparse=True).astype(np.int64)
    xt = x.T.tocsr()
    a11 = x.multiply(xt).tocsr()
    a10 = (x - a11).tocsr()
    a10.eliminate_zeros()
    a11.eliminate_zeros()
    return DyadTally(g.n, a10.T.tocsr(), a11)


def linear_design(n: int, rho: float, theta: float) -> ParamVector:
    """The linear degree-parameter design used in the simulations.

    With 1-based ``i`` and ``h = n/2``: ``alpha_i = beta_i = i/h`` for
    ``i <= h`` and ``-(i - h)/h`` otherwise.
    """
    if n <= 0 or n % 2:
        raise InvalidDesign(f"linear design needs an even positive n, got {n}")
    h = n // 2
    i = np.arange(1, n + 1, dtype=float)
    alpha = np.where(i <= h, i / h, -(i - h) / h)
    return center(ParamVector(rho, theta, alpha, alpha.copy()))


def center(theta_vec: ParamVector) -> ParamVector:
    """Shift to the identified form ``sum(alpha) = sum(beta) = 0``.

    ``theta + alpha_i + beta_j`` is unchanged, hence so is every dyad
    probability.  Means at rounding level count as zero, which makes the
    operation idempotent.
    """
    abar = theta_vec.alpha.mean()
    bbar = theta_vec.beta.mean()
    if abs(abar) <= _rounding(theta_vec.alpha) and abs(bbar) <= _rounding(theta_vec.beta):
        return theta_vec
    return ParamVector(
        theta_vec.rho,
        theta_vec.theta + abar + bbar,
        theta_vec.alpha - abar,
        theta_vec.beta - bbar,
    )


def _rounding(x: np.ndarray) -> float:
    return 4.0 * np.finfo(float).eps * float(np.max(np.abs(x), initial=1.0))
