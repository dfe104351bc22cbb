"""In-repo conic solver: operator splitting on the homogeneous self-dual embedding.

Solves ``min c'x  s.t.  A x + s = b, s in K`` for products of zero,
nonnegative, second-order, exponential and power cones.  Each iteration
solves one linear system with the fixed quasi-definite matrix
``[[I, A'], [A, -I]]`` (factored once with a sparse LDL^T) and projects onto
the cone product.  The iterate stream is over-relaxed and optionally
accelerated with type-II Anderson mixing; all loops are compiled with numba.

Data are equilibrated (Ruiz scaling, uniform inside each non-separable cone)
before solving; termination is checked on the unscaled residuals.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from .ldl import LDLFactor, ldl_solve
from .projections import CODE, project_dual, project_primal

STATUS = {0: "optimal", 1: "max_iters", 2: "primal_infeasible", 3: "dual_infeasible"}


@dataclass
class SolverOptions:
    tol: float = 1e-6
    abs_tol: float = 1e-9
    max_iters: int = 100_000
    alpha: float = 1.5  # over-relaxation
    scale: float = 1.0
    primal_weight: float = 1.0
    anderson: int = 8  # memory, 0 disables acceleration
    check_every: int = 10
    time_limit: float = 300.0
    equilibrate_iters: int = 15
    refine: int = 1


@dataclass
class SolveResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float  # standard-form objective c'x
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    solve_time: float = 0.0
    certificate: np.ndarray | None = None
    raw_status: str = ""


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _csc_matvec(n_rows, Ap, Ai, Ax, x, out):
    for i in range(n_rows):
        out[i] = 0.0
    for j in range(Ap.shape[0] - 1):
        xj = x[j]
        if xj != 0.0:
            for p in range(Ap[j], Ap[j + 1]):
                out[Ai[p]] += Ax[p] * xj


@njit(cache=True)
def _csc_rmatvec(Ap, Ai, Ax, y, out):
    for j in range(Ap.shape[0] - 1):
        s = 0.0
        for p in range(Ap[j], Ap[j + 1]):
            s += Ax[p] * y[Ai[p]]
        out[j] = s


@njit(cache=True)
def _kkt_solve(rhs, perm, inv_perm, Lp, Li, Lx, Dinv, Kp, Ki, Kx, refine, work, out):
    nk = rhs.shape[0]
    for i in range(nk):
        work[i] = rhs[perm[i]]
    ldl_solve(nk, Lp, Li, Lx, Dinv, work)
    for i in range(nk):
        out[i] = work[inv_perm[i]]
    res = np.empty(nk)
    for _ in range(refine):
        _csc_matvec(nk, Kp, Ki, Kx, out, res)
        for i in range(nk):
            work[i] = rhs[perm[i]] - res[perm[i]]
        ldl_solve(nk, Lp, Li, Lx, Dinv, work)
        for i in range(nk):
            out[i] += work[inv_perm[i]]


@njit(cache=True)
def _lin(w, n, m, b, c, g, gdot, perm, inv_perm, Lp, Li, Lx, Dinv, Kp, Ki, Kx, refine, rho_x,
         work, rhs, sol, out):
    # solve (I + Q) u = w via the KKT system
    for i in range(n):
        rhs[i] = w[i]
    for i in range(m):
        rhs[n + i] = -w[n + i]
    _kkt_solve(rhs, perm, inv_perm, Lp, Li, Lx, Dinv, Kp, Ki, Kx, refine, work, sol)
    hp = 0.0
    for i in range(n):
        hp += c[i] * sol[i]
    for i in range(m):
        hp += b[i] * sol[n + i]
    tau = (w[n + m] + hp) / (1.0 + gdot)
    for i in range(n + m):
        out[i] = sol[i] - g[i] * tau
    out[n + m] = tau


@njit(cache=True)
def _project_C(v, n, m, kinds, dims, alphas, out):
    for i in range(n):
        out[i] = v[i]
    project_dual(v[n:n + m], kinds, dims, alphas, out[n:n + m])
    out[n + m] = max(v[n + m], 0.0)


@njit(cache=True)
def _fixed_point_step(u, v, n, m, b, c, g, gdot, perm, inv_perm, Lp, Li, Lx, Dinv, Kp, Ki, Kx,
                      refine, rho_x, kinds, dims, alphas, alpha, work, rhs, sol, ut, tmp, u_new, v_new):
    l = n + m + 1
    for i in range(l):
        tmp[i] = u[i] + v[i]
    _lin(tmp, n, m, b, c, g, gdot, perm, inv_perm, Lp, Li, Lx, Dinv, Kp, Ki, Kx, refine, rho_x,
         work, rhs, sol, ut)
    for i in range(l):
        ut[i] = alpha * ut[i] + (1.0 - alpha) * u[i]
        tmp[i] = ut[i] - v[i]
    _project_C(tmp, n, m, kinds, dims, alphas, u_new)
    for i in range(l):
        v_new[i] = v[i] - ut[i] + u_new[i]


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _cone_arrays(cones):
    kinds = np.array([CODE[k] for k, _, _ in cones], dtype=np.int64)
    dims = np.array([d for _, d, _ in cones], dtype=np.int64)
    alphas = np.array([a for _, _, a in cones], dtype=float)
    return kinds, dims, alphas


def _equilibrate(A: sp.csc_matrix, cones, iters: int):
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    M = A.copy().tocsc()
    groups = []
    pos = 0
    for kind, dim, _ in cones:
        if kind in ("soc", "exp", "pow"):
            groups.append((pos, pos + dim))
        pos += dim
    for _ in range(iters):
        absM = abs(M)
        row = np.sqrt(np.asarray(absM.max(axis=1).todense()).ravel())
        col = np.sqrt(np.asarray(absM.max(axis=0).todense()).ravel())
        absrow_nz = row >= 1e-8
        row[~absrow_nz] = 1.0
        col[col < 1e-8] = 1.0
        dr = 1.0 / row
        for lo, hi in groups:
            # one factor per cone block, from its non-empty rows
            blk = row[lo:hi][absrow_nz[lo:hi]] if absrow_nz[lo:hi].any() else row[lo:hi]
            dr[lo:hi] = 1.0 / np.mean(blk)
        dc = 1.0 / col
        # keep the cumulative scaling bounded so that the balanced matrix is
        # exactly the one handed to the solver
        D = np.clip(D * dr, 1e-4, 1e4)
        E = np.clip(E * dc, 1e-4, 1e4)
        M = sp.csc_matrix(sp.diags(D) @ A @ sp.diags(E))
    return M, D, E


class _Workspace:
    """Equilibrated data and KKT factor; reused when only b/c change."""

    def __init__(self, A: sp.csc_matrix, cones, opts: SolverOptions):
        self.m, self.n = A.shape
        self.As, self.D, self.E = _equilibrate(A, cones, opts.equilibrate_iters)
        n, m = self.n, self.m
        K = sp.bmat([[sp.eye(n), self.As.T], [self.As, -sp.eye(m)]], format="csc")
        signs = np.concatenate([np.ones(n), -np.ones(m)])
        self.factor = LDLFactor(K, signs)
        self.K = sp.csc_matrix(K)
        self.kinds, self.dims, self.alphas = _cone_arrays(cones)


def solve_standard(c: np.ndarray, A: sp.spmatrix, b: np.ndarray, cones, opts: SolverOptions | None = None,
                   warm: dict | None = None) -> SolveResult:
    """Solve a standard-form cone program with the embedded operator-splitting method."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    A = sp.csc_matrix(A, dtype=float)
    A.sort_indices()
    m, n = A.shape
    if sum(d for _, d, _ in cones) != m:
        raise ValueError("cone dimensions do not match the number of rows")
    ws = _Workspace(A, cones, opts)
    D, E = ws.D, ws.E
    bs = D * b
    cs = E * c
    nb, nc = np.linalg.norm(bs), np.linalg.norm(cs)
    mean_col = float(np.mean(sp.linalg.norm(ws.As, axis=0))) if n else 1.0
    mean_row = float(np.mean(sp.linalg.norm(ws.As, axis=1))) if m else 1.0
    sb = opts.scale * mean_col / max(nb, 1e-4) * opts.primal_weight
    sc = opts.scale * mean_row / max(nc, 1e-4)
    bs = bs * sb
    cs = cs * sc

    fac = ws.factor
    Kp, Ki, Kx = ws.K.indptr.astype(np.int64), ws.K.indices.astype(np.int64), ws.K.data
    perm, inv_perm = fac.sym.perm, fac.inv_perm
    Lp, Li, Lx, Dinv = fac.sym.Lp, fac.Li, fac.Lx, fac.Dinv
    l = n + m + 1
    work = np.empty(n + m)
    rhs = np.empty(n + m)
    sol = np.empty(n + m)
    # g = M^{-1} h with h = (c, b)
    g = np.empty(n + m)
    rhs[:n], rhs[n:] = cs, -bs
    _kkt_solve(rhs.copy(), perm, inv_perm, Lp, Li, Lx, Dinv, Kp, Ki, Kx, 2, work, g)
    gdot = float(cs @ g[:n] + bs @ g[n:])

    u = np.zeros(l)
    v = np.zeros(l)
    u[-1] = 1.0
    v[-1] = 1.0
    if warm is not None and warm.get("x") is not None:
        u[:n] = warm["x"] / E * sb
        u[n:n + m] = warm["y"] / D * sc
        v[n:n + m] = warm["s"] * D * sb
        u[-1], v[-1] = 1.0, 0.0

    Ap, Ai, Axv = A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data
    ut = np.empty(l)
    tmp = np.empty(l)
    u_new = np.empty(l)
    v_new = np.empty(l)
    Ax_buf = np.empty(m)
    ATy_buf = np.empty(n)

    mem = opts.anderson
    if mem:
        Xh = np.zeros((2 * l, mem))  # iterate differences
        Fh = np.zeros((2 * l, mem))  # residual differences
        prev_z = None
        prev_f = None
        hist = 0
    status = 1
    it = 0
    res = {}
    cert = None
    bnorm = np.max(np.abs(b)) if m else 0.0
    cnorm = np.max(np.abs(c)) if n else 0.0
    for it in range(1, opts.max_iters + 1):
        _fixed_point_step(u, v, n, m, bs, cs, g, gdot, perm, inv_perm, Lp, Li, Lx, Dinv, Kp, Ki, Kx,
                          opts.refine, 0.0, ws.kinds, ws.dims, ws.alphas, opts.alpha, work, rhs, sol,
                          ut, tmp, u_new, v_new)
        if mem:
            z = np.concatenate([u, v])
            fz = np.concatenate([u_new, v_new])
            f = fz - z
            if prev_z is not None:
                col = (it - 1) % mem
                Xh[:, col] = z - prev_z
                Fh[:, col] = f - prev_f
                hist = min(hist + 1, mem)
            prev_z, prev_f = z, f
            nxt = fz
            if hist >= 2:
                Fk = Fh[:, :hist]
                try:
                    gam, *_ = np.linalg.lstsq(Fk, f, rcond=None)
                    cand = fz - (Xh[:, :hist] + Fk) @ gam
                    if np.all(np.isfinite(cand)):
                        nxt = cand
                except np.linalg.LinAlgError:
                    pass
            # safeguard: accept the mixed point only if it keeps tau/kappa sensible
            if nxt is not fz and (nxt[l - 1] < 0 or nxt[2 * l - 1] < 0):
                nxt = fz
            u[:] = nxt[:l]
            v[:] = nxt[l:]
        else:
            u[:] = u_new
            v[:] = v_new
        if it % opts.check_every and it != opts.max_iters:
            continue
        # exact (unaccelerated) point for termination tests
        uc, vc = u_new, v_new
        tau, kappa = uc[-1], vc[-1]
        xs, ys, ss = uc[:n], uc[n:n + m], vc[n:n + m]
        if tau > 1e-12:
            x = E * xs / (tau * sb)
            y = D * ys / (tau * sc)
            s = ss / (D * tau * sb)
            _csc_matvec(m, Ap, Ai, Axv, x, Ax_buf)
            _csc_rmatvec(Ap, Ai, Axv, y, ATy_buf)
            pres = float(np.max(np.abs(Ax_buf + s - b))) if m else 0.0
            dres = float(np.max(np.abs(ATy_buf + c))) if n else 0.0
            pobj, dobj = float(c @ x), float(-b @ y)
            gap = abs(pobj - dobj)
            p_scale = max(np.max(np.abs(Ax_buf)) if m else 0.0, np.max(np.abs(s)) if m else 0.0, bnorm)
            d_scale = max(np.max(np.abs(ATy_buf)) if n else 0.0, cnorm)
            g_scale = max(abs(pobj), abs(dobj))
            res = dict(pres=pres, dres=dres, gap=gap, pres_rel=pres / max(p_scale, 1e-300),
                       dres_rel=dres / max(d_scale, 1e-300), gap_rel=gap / max(g_scale, 1e-300))
            if (pres <= opts.abs_tol + opts.tol * p_scale and dres <= opts.abs_tol + opts.tol * d_scale
                    and gap <= opts.abs_tol + opts.tol * g_scale):
                status = 0
                break
        # infeasibility certificates
        yc = D * ys / sc
        _csc_rmatvec(Ap, Ai, Axv, yc, ATy_buf)
        by = float(b @ yc)
        if by < 0 and np.max(np.abs(ATy_buf)) <= opts.tol * (-by) and tau < kappa:
            status = 2
            cert = yc / (-by)
            res = dict(certificate_residual=float(np.max(np.abs(ATy_buf)) / (-by)))
            break
        xc = E * xs / sb
        sc_vec = ss / (D * sb)
        _csc_matvec(m, Ap, Ai, Axv, xc, Ax_buf)
        cx = float(c @ xc)
        if cx < 0 and np.max(np.abs(Ax_buf + sc_vec)) <= opts.tol * (-cx) and tau < kappa:
            status = 3
            cert = xc / (-cx)
            res = dict(certificate_residual=float(np.max(np.abs(Ax_buf + sc_vec)) / (-cx)))
            break
        if time.perf_counter() - t0 > opts.time_limit:
            status = 1
            break
    tau = max(u_new[-1], 1e-300)
    x = E * u_new[:n] / (tau * sb)
    y = D * u_new[n:n + m] / (tau * sc)
    s = v_new[n:n + m] / (D * tau * sb)
    return SolveResult(STATUS[status], x, y, s, float(c @ x), res, it, time.perf_counter() - t0, cert)
