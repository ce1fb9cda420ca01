"""Exact triple-product counts on sparse dyad patterns.

``A00`` is dense for sparse graphs, so every product involving it is
rewritten through ``A00 = (J - I) - S`` where ``S`` marks non-null dyads.
What remains are sparse products, row/column sums, and the closed-walk
counts ``diag(X Y Z)`` handled by :func:`tri_diag`.
"""

from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp


@numba.njit(cache=True)
def _tri_diag_kernel(n, xp, xi, xv, yp, yi, yv, zp, zi, zv):
    out = np.zeros(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    for t in range(n):
        for q in range(zp[t], zp[t + 1]):
            mark[zi[q]] = zv[q]
        acc = 0
        for p in range(xp[t], xp[t + 1]):
            j = xi[p]
            s = 0
            for r in range(yp[j], yp[j + 1]):
                s += yv[r] * mark[yi[r]]
            acc += xv[p] * s
        out[t] = acc
        for q in range(zp[t], zp[t + 1]):
            mark[zi[q]] = 0
    return out


def _csr_parts(m):
    m = sp.csr_array(m)
    return (
        m.indptr.astype(np.int64),
        m.indices.astype(np.int64),
        m.data.astype(np.int64),
    )


def tri_diag(x, y, z) -> np.ndarray:
    """``diag(x @ y @ z)`` for sparse integer matrices, in exact int64."""
    n = x.shape[0]
    zt = sp.csr_array(z.T)
    return _tri_diag_kernel(n, *_csr_parts(x), *_csr_parts(y), *_csr_parts(zt))


def _rowsum(m) -> np.ndarray:
    return np.asarray(m.sum(axis=1), dtype=np.int64).ravel()


def _colsum(m) -> np.ndarray:
    return np.asarray(m.sum(axis=0), dtype=np.int64).ravel()


def _hadamard_rowsum(x, y_t) -> np.ndarray:
    """Row sums of ``x * y_t`` (elementwise)."""
    return _rowsum(sp.csr_array(x).multiply(y_t))


def diag_x_a00_y(x, y, s) -> np.ndarray:
    """``diag(X A00 Y)`` with ``A00 = J - I - S``."""
    xy_t = _hadamard_rowsum(x, y.T)
    return _rowsum(x) * _colsum(y) - xy_t - tri_diag(x, s, y)


def diag_a00_y_a00(y, s) -> np.ndarray:
    """``diag(A00 Y A00)`` with ``A00 = J - I - S``."""
    r, c = _rowsum(y), _colsum(y)
    total = int(r.sum())
    uyu = total - r - c + y.diagonal().astype(np.int64)
    uys = (c @ s) - _hadamard_rowsum(y, s.T)
    syu = (s @ r) - _hadamard_rowsum(s, y.T)
    sys_ = tri_diag(s, y, s)
    return uyu - np.asarray(uys, dtype=np.int64) - np.asarray(syu, dtype=np.int64) + sys_


def apply_a00(s, x: np.ndarray) -> np.ndarray:
    """``A00 @ x`` for a dense int64 block ``x`` (shape ``(n, w)``)."""
    return x.sum(axis=0, keepdims=True) - x - s @ x


def a00_columns(s_csc, cols) -> np.ndarray:
    """Dense columns of ``A00``; ``s_csc`` is ``S`` in CSC layout."""
    n = s_csc.shape[0]
    cols = np.asarray(cols, dtype=np.int64)
    block = np.ones((n, cols.size), dtype=np.int64)
    block[cols, np.arange(cols.size)] = 0
    block -= s_csc[:, cols].toarray().astype(np.int64)
    return block


def dense_columns(m_csc, cols) -> np.ndarray:
    return m_csc[:, np.asarray(cols, dtype=np.int64)].toarray().astype(np.int64)
