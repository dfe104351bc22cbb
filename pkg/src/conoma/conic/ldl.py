"""Sparse LDL^T factorisation of quasi-definite matrices (numba-compiled).

Follows the classic up-looking scheme: an elimination tree and column
counts form the symbolic phase, which depends on the sparsity pattern only,
and a numeric phase fills ``L`` and ``D``.  Inputs are the upper triangle of
a symmetric matrix in CSC form.  A fill-reducing permutation
(reverse Cuthill-McKee) is applied before factorisation.
"""

from __future__ import annotations

import hashlib

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.csgraph import reverse_cuthill_mckee


@njit(cache=True)
def etree(n, Ap, Ai):
    work = np.zeros(n, dtype=np.int64)
    Lnz = np.zeros(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    for j in range(n):
        work[j] = j
        for p in range(Ap[j], Ap[j + 1]):
            i = Ai[p]
            if i > j:
                raise ValueError("matrix is not upper triangular")
            while work[i] != j:
                if parent[i] == -1:
                    parent[i] = j
                Lnz[i] += 1
                work[i] = j
                i = parent[i]
    return parent, Lnz


@njit(cache=True)
def factor_numeric(n, Ap, Ai, Ax, parent, Lnz, Lp, Li, Lx, D, Dinv):
    """Numeric LDL^T; returns the number of positive pivots (or -1 on a zero pivot)."""
    y_markers = np.zeros(n, dtype=np.bool_)
    y_idx = np.zeros(n, dtype=np.int64)
    elim_buffer = np.zeros(n, dtype=np.int64)
    L_next = np.zeros(n, dtype=np.int64)
    y_vals = np.zeros(n)
    for i in range(n):
        L_next[i] = Lp[i]
    num_pos = 0
    # first column
    D[0] = 0.0
    for p in range(Ap[0], Ap[1]):
        D[0] = Ax[p]
    if D[0] == 0.0:
        return -1
    if D[0] > 0:
        num_pos += 1
    Dinv[0] = 1.0 / D[0]
    for k in range(1, n):
        nnz_y = 0
        for p in range(Ap[k], Ap[k + 1]):
            bidx = Ai[p]
            if bidx == k:
                D[k] = Ax[p]
                continue
            y_vals[bidx] = Ax[p]
            nextidx = bidx
            if not y_markers[nextidx]:
                y_markers[nextidx] = True
                elim_buffer[0] = nextidx
                nnz_e = 1
                nextidx = parent[bidx]
                while nextidx != -1 and nextidx < k:
                    if y_markers[nextidx]:
                        break
                    y_markers[nextidx] = True
                    elim_buffer[nnz_e] = nextidx
                    nnz_e += 1
                    nextidx = parent[nextidx]
                while nnz_e:
                    nnz_e -= 1
                    y_idx[nnz_y] = elim_buffer[nnz_e]
                    nnz_y += 1
        for i in range(nnz_y - 1, -1, -1):
            cidx = y_idx[i]
            tmp = L_next[cidx]
            yv = y_vals[cidx]
            for j in range(Lp[cidx], tmp):
                y_vals[Li[j]] -= Lx[j] * yv
            Li[tmp] = k
            Lx[tmp] = yv * Dinv[cidx]
            D[k] -= yv * Lx[tmp]
            L_next[cidx] += 1
            y_vals[cidx] = 0.0
            y_markers[cidx] = False
        if D[k] == 0.0:
            return -1
        if D[k] > 0:
            num_pos += 1
        Dinv[k] = 1.0 / D[k]
    return num_pos


@njit(cache=True)
def ldl_solve(n, Lp, Li, Lx, Dinv, x):
    """In-place solve of ``L D L^T x = b`` (``x`` holds ``b`` on entry)."""
    for i in range(n):
        xi = x[i]
        for j in range(Lp[i], Lp[i + 1]):
            x[Li[j]] -= Lx[j] * xi
    for i in range(n):
        x[i] *= Dinv[i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(Lp[i], Lp[i + 1]):
            s -= Lx[j] * x[Li[j]]
        x[i] = s


class Symbolic:
    """Pattern-only part of the factorisation: permutation and elimination tree."""

    def __init__(self, K_upper_perm: sp.csc_matrix, perm: np.ndarray):
        n = K_upper_perm.shape[0]
        self.n = n
        self.perm = perm
        self.parent, self.Lnz = etree(n, K_upper_perm.indptr.astype(np.int64),
                                      K_upper_perm.indices.astype(np.int64))
        self.Lp = np.zeros(n + 1, dtype=np.int64)
        self.Lp[1:] = np.cumsum(self.Lnz)


_SYMBOLIC_CACHE: dict[str, Symbolic] = {}
_CACHE_LIMIT = 64


def pattern_key(K: sp.csc_matrix) -> str:
    h = hashlib.sha1()
    h.update(np.asarray(K.shape, dtype=np.int64).tobytes())
    h.update(K.indptr.astype(np.int64).tobytes())
    h.update(K.indices.astype(np.int64).tobytes())
    return h.hexdigest()


class LDLFactor:
    """Factor of a symmetric quasi-definite matrix ``K`` (full CSC input)."""

    def __init__(self, K: sp.spmatrix, signs: np.ndarray, reg: float = 1e-8):
        K = sp.csc_matrix(K)
        K.sort_indices()
        self.n = K.shape[0]
        key = pattern_key(K)
        sym = _SYMBOLIC_CACHE.get(key)
        Kreg = K + sp.diags(reg * signs)
        if sym is None:
            perm = reverse_cuthill_mckee(sp.csr_matrix(abs(K) + sp.eye(self.n)), symmetric_mode=True)
            perm = np.asarray(perm, dtype=np.int64)
            Up = sp.triu(Kreg[perm][:, perm], format="csc")
            Up.sort_indices()
            sym = Symbolic(Up, perm)
            if len(_SYMBOLIC_CACHE) >= _CACHE_LIMIT:
                _SYMBOLIC_CACHE.pop(next(iter(_SYMBOLIC_CACHE)))
            _SYMBOLIC_CACHE[key] = sym
            self.symbolic_reused = False
        else:
            Up = sp.triu(Kreg[sym.perm][:, sym.perm], format="csc")
            Up.sort_indices()
            self.symbolic_reused = True
        self.sym = sym
        self.K = K
        nnzL = int(sym.Lp[-1])
        self.Li = np.zeros(nnzL, dtype=np.int64)
        self.Lx = np.zeros(nnzL)
        self.D = np.zeros(self.n)
        self.Dinv = np.zeros(self.n)
        npos = factor_numeric(self.n, Up.indptr.astype(np.int64), Up.indices.astype(np.int64),
                              Up.data.astype(float), sym.parent, sym.Lnz, sym.Lp, self.Li, self.Lx,
                              self.D, self.Dinv)
        if npos < 0:
            raise np.linalg.LinAlgError("zero pivot in LDL factorisation")
        self.num_positive = npos
        self.inv_perm = np.empty_like(sym.perm)
        self.inv_perm[sym.perm] = np.arange(self.n)

    def solve(self, b: np.ndarray, refine: int = 2) -> np.ndarray:
        x = self._solve_reg(b)
        for _ in range(refine):
            r = b - self.K @ x
            x = x + self._solve_reg(r)
        return x

    def _solve_reg(self, b: np.ndarray) -> np.ndarray:
        y = np.ascontiguousarray(b[self.sym.perm], dtype=float)
        ldl_solve(self.n, self.sym.Lp, self.Li, self.Lx, self.Dinv, y)
        return y[self.inv_perm]


def clear_cache() -> None:
    _SYMBOLIC_CACHE.clear()
