"""Euclidean projections onto the supported cones (numba-compiled).

Cone codes used by the compiled solver:

==== ========== ===============================================
code name       set
==== ========== ===============================================
0    zero       {0}
1    nonneg     x >= 0
2    soc        t >= ||x||
3    exp        cl{(x, y, z): y > 0, y exp(x / y) <= z}
4    pow        {(x, y, z): x^a y^(1-a) >= |z|, x, y >= 0}
==== ========== ===============================================

The exponential-cone projection solves the scalar root problem in the
direction parameter ``rho`` of the boundary ray ``(rho, 1, exp(rho))``; the
power-cone projection uses a Newton iteration on the radius of ``|z|``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

ZERO, NONNEG, SOC, EXP, POW = 0, 1, 2, 3, 4
CODE = {"zero": ZERO, "nonneg": NONNEG, "soc": SOC, "exp": EXP, "pow": POW}
EXP_TOL = 1e-13
EXP_RHO_MAX = 700.0


@njit(cache=True)
def _proj_soc(v, out):
    t = v[0]
    nx = 0.0
    for i in range(1, v.shape[0]):
        nx += v[i] * v[i]
    nx = math.sqrt(nx)
    if nx <= t:
        for i in range(v.shape[0]):
            out[i] = v[i]
    elif nx <= -t:
        for i in range(v.shape[0]):
            out[i] = 0.0
    else:
        a = 0.5 * (t + nx)
        out[0] = a
        for i in range(1, v.shape[0]):
            out[i] = a * v[i] / nx


@njit(cache=True)
def _in_exp(r, s, t):
    if s > 0 and t > 0:
        return s * (math.log(t) - math.log(s)) >= r - 1e-15 * max(1.0, abs(r))
    return s == 0.0 and r <= 0.0 and t >= 0.0


@njit(cache=True)
def _in_exp_polar(r, s, t):
    # polar cone = -dual: {(r, s, t): r > 0, r exp(s / r) <= -e t} or r == 0, s, t <= 0
    if r > 0 and t < 0:
        # compared in log space so a tiny r with a large s / r cannot underflow into a false pass
        return math.log(r) + s / r <= 1.0 + math.log(-t) + 1e-15
    return r == 0.0 and s <= 0.0 and t <= 0.0


@njit(cache=True)
def _exp_hd(rho, r0, s0, t0):
    """Root function of the boundary parameter and its derivative, both
    scaled by ``exp(-|rho|)`` so that neither overflows."""
    m = abs(rho)
    ep = math.exp(rho - m)
    em = math.exp(-rho - m)
    et = math.exp(-m)
    h = ((rho - 1.0) * r0 + s0) * ep - (r0 - rho * s0) * em - (rho * rho - rho + 1.0) * t0 * et
    dh = (rho * r0 + s0) * ep + (r0 - (rho - 1.0) * s0) * em - (2.0 * rho - 1.0) * t0 * et
    return h, dh


@njit(cache=True)
def _exp_root(r0, s0, t0):
    # interval on which both ray coefficients are nonnegative
    lo, hi = -EXP_RHO_MAX, EXP_RHO_MAX
    if r0 > 0:
        lo = max(lo, 1.0 - s0 / r0)
    elif r0 < 0:
        hi = min(hi, 1.0 - s0 / r0)
    if s0 > 0:
        hi = min(hi, r0 / s0)
    elif s0 < 0:
        lo = max(lo, r0 / s0)
    if lo > hi:
        lo, hi = hi, lo
    lo = max(lo, -EXP_RHO_MAX)
    hi = min(hi, EXP_RHO_MAX)
    hlo = _exp_hd(lo, r0, s0, t0)[0]
    hhi = _exp_hd(hi, r0, s0, t0)[0]
    if hlo > 0 and hhi > 0:
        return lo
    if hlo < 0 and hhi < 0:
        return hi
    rho = 0.5 * (lo + hi)
    width = hi - lo
    for _ in range(200):
        h, dh = _exp_hd(rho, r0, s0, t0)
        if h < 0:
            lo = rho
        elif h > 0:
            hi = rho
        else:
            return rho
        nxt = rho - h / dh if dh > 0 else 0.5 * (lo + hi)
        # bisect when Newton leaves the bracket or fails to halve it
        if not (lo < nxt < hi) or hi - lo > 0.5 * width:
            nxt = 0.5 * (lo + hi)
        width = hi - lo
        if abs(nxt - rho) <= EXP_TOL * max(1.0, abs(rho)) or hi - lo <= EXP_TOL * max(1.0, abs(rho)):
            return nxt
        rho = nxt
    return rho


@njit(cache=True)
def _exp_try(r, s, t, r0, s0, t0, best, out):
    """Keep ``(r, s, t)`` in ``out`` when it lies in the cone and is closer to
    the input than the current best; returns the updated best distance."""
    if not (math.isfinite(r) and math.isfinite(s) and math.isfinite(t)):
        return best
    d = (r - r0) ** 2 + (s - s0) ** 2 + (t - t0) ** 2
    if d < best:
        out[0], out[1], out[2] = r, s, t
        return d
    return best


@njit(cache=True)
def _proj_exp(v, out):
    r0, s0, t0 = v[0], v[1], v[2]
    if _in_exp(r0, s0, t0):
        out[0], out[1], out[2] = r0, s0, t0
        return
    if _in_exp_polar(r0, s0, t0):
        out[0] = out[1] = out[2] = 0.0
        return
    if r0 <= 0.0 and s0 <= 0.0:
        out[0], out[1], out[2] = r0, 0.0, max(t0, 0.0)
        return
    # face candidate and origin
    out[0], out[1], out[2] = min(r0, 0.0), 0.0, max(t0, 0.0)
    best = (out[0] - r0) ** 2 + s0 ** 2 + (out[2] - t0) ** 2
    best = _exp_try(0.0, 0.0, 0.0, r0, s0, t0, best, out)
    rho = _exp_root(r0, s0, t0)
    # best point on the primal boundary ray (rho, 1, e^rho), normalised
    if rho > 0:
        ur, us, ut = rho * math.exp(-rho), math.exp(-rho), 1.0
    else:
        ur, us, ut = rho, 1.0, math.exp(rho)
    a = max(ur * r0 + us * s0 + ut * t0, 0.0) / (ur * ur + us * us + ut * ut)
    best = _exp_try(a * ur, a * us, a * ut, r0, s0, t0, best, out)
    # complementary dual ray (-1, rho - 1, e^-rho); p = v + b * dual, made feasible
    if rho < 0:
        dr, ds, dt = -math.exp(rho), (rho - 1.0) * math.exp(rho), 1.0
    else:
        dr, ds, dt = -1.0, rho - 1.0, math.exp(-rho)
    b = max(-(dr * r0 + ds * s0 + dt * t0), 0.0) / (dr * dr + ds * ds + dt * dt)
    pr, ps, pt = r0 + b * dr, s0 + b * ds, t0 + b * dt
    if ps > 0 and pr / ps < EXP_RHO_MAX:
        pt = max(pt, ps * math.exp(pr / ps))
        best = _exp_try(pr, ps, pt, r0, s0, t0, best, out)
    elif ps <= 0 and pr <= 0:
        best = _exp_try(pr, 0.0, max(pt, 0.0), r0, s0, t0, best, out)


@njit(cache=True)
def _pow_calc_x(r, d, xh, a):
    # positive root of x^2 - xh x - a r d = 0 with d = |z| - r, in the cancellation-free form
    c = 4.0 * a * r * d
    root = math.sqrt(max(xh * xh + c, 0.0))
    if xh >= 0:
        return 0.5 * (xh + root)
    den = root - xh
    return 0.5 * c / den if den > 0 else 0.0


@njit(cache=True)
def _pow_point(u, flip, xh, yh, rh, a):
    # u is r itself, or |z| - r when flip is set; the smaller of the two is carried exactly
    if flip:
        d, r = u, rh - u
    else:
        r, d = u, rh - u
    x = _pow_calc_x(r, d, xh, a)
    y = _pow_calc_x(r, d, yh, 1.0 - a)
    return x, y, r, d


@njit(cache=True)
def _pow_gap(u, flip, xh, yh, rh, a):
    x, y, r, d = _pow_point(u, flip, xh, yh, rh, a)
    return x ** a * y ** (1.0 - a) - r, x, y, r, d


@njit(cache=True)
def _proj_pow(v, a, out):
    xh, yh, zh = v[0], v[1], v[2]
    rh = abs(zh)
    if xh >= 0 and yh >= 0 and xh ** a * yh ** (1 - a) >= rh:
        out[0], out[1], out[2] = xh, yh, zh
        return
    if xh <= 0 and yh <= 0 and (-xh) ** a * (-yh) ** (1 - a) >= rh * a ** a * (1 - a) ** (1 - a):
        out[0] = out[1] = out[2] = 0.0
        return
    if rh == 0.0:
        out[0], out[1], out[2] = max(xh, 0.0), max(yh, 0.0), 0.0
        return
    # the radius gap is positive at r = 0 and negative at r = |z|; decide which half holds the
    # root, then run a bracketed Newton iteration on the distance to the nearer endpoint
    half = 0.5 * rh
    fm = _pow_gap(half, False, xh, yh, rh, a)[0]
    flip = fm > 0
    # along u the gap goes from sgn0 at u = 0 to -sgn0 at u = half
    sgn0 = 1.0 if not flip else -1.0
    lo, hi = 0.0, half
    u = 0.5 * half
    for _ in range(200):
        f, x, y, r, d = _pow_gap(u, flip, xh, yh, rh, a)
        if f * sgn0 > 0:
            lo = u
        elif f * sgn0 < 0:
            hi = u
        else:
            break
        nxt = 0.5 * (lo + hi)
        sx = 2.0 * x - xh
        sy = 2.0 * y - yh
        if x > 0 and y > 0 and sx > 0 and sy > 0:
            dxdr = a * (d - r) / sx
            dydr = (1.0 - a) * (d - r) / sy
            fp = (f + r) * (a * dxdr / x + (1.0 - a) * dydr / y) - 1.0
            if flip:
                fp = -fp
            if fp != 0:
                cand = u - f / fp
                if lo < cand < hi:
                    nxt = cand
        if hi - lo <= 1e-16 * max(hi, 1e-300) or abs(nxt - u) <= 1e-17 * max(u, 1e-300):
            u = nxt
            break
        u = nxt
    x, y, r, d = _pow_point(u, flip, xh, yh, rh, a)
    r = min(r, x ** a * y ** (1.0 - a))
    out[0], out[1] = x, y
    out[2] = -r if zh < 0 else r
    # the face candidate (x, y, 0) can only win through round-off
    dist = (x - xh) ** 2 + (y - yh) ** 2 + (r - rh) ** 2
    fx, fy = max(xh, 0.0), max(yh, 0.0)
    if (fx - xh) ** 2 + (fy - yh) ** 2 + rh * rh < dist:
        out[0], out[1], out[2] = fx, fy, 0.0


@njit(cache=True)
def project_primal(v, kinds, dims, alphas, out):
    """Project ``v`` onto the product of primal cones."""
    pos = 0
    for c in range(kinds.shape[0]):
        k, d = kinds[c], dims[c]
        seg = v[pos:pos + d]
        dst = out[pos:pos + d]
        if k == ZERO:
            for i in range(d):
                dst[i] = 0.0
        elif k == NONNEG:
            for i in range(d):
                dst[i] = max(seg[i], 0.0)
        elif k == SOC:
            _proj_soc(seg, dst)
        elif k == EXP:
            _proj_exp(seg, dst)
        else:
            _proj_pow(seg, alphas[c], dst)
        pos += d


@njit(cache=True)
def project_dual(v, kinds, dims, alphas, out):
    """Project ``v`` onto the product of dual cones (Moreau: v + P_K(-v))."""
    pos = 0
    tmp = np.empty(3)
    neg = np.empty(3)
    for c in range(kinds.shape[0]):
        k, d = kinds[c], dims[c]
        seg = v[pos:pos + d]
        dst = out[pos:pos + d]
        if k == ZERO:
            for i in range(d):
                dst[i] = seg[i]
        elif k == NONNEG:
            for i in range(d):
                dst[i] = max(seg[i], 0.0)
        elif k == SOC:
            _proj_soc(seg, dst)
        else:
            for i in range(3):
                neg[i] = -seg[i]
            if k == EXP:
                _proj_exp(neg, tmp)
            else:
                _proj_pow(neg, alphas[c], tmp)
            for i in range(3):
                dst[i] = seg[i] + tmp[i]
        pos += d


def project_cone(block: np.ndarray, cone: str, alpha: float = 0.0) -> np.ndarray:
    """Project one block onto a named cone (``rsoc`` handled by conversion)."""
    v = np.asarray(block, dtype=float).copy()
    out = np.empty_like(v)
    if cone == "rsoc":
        s2 = math.sqrt(2.0)
        u, w, rest = v[0], v[1], v[2:]
        sv = np.concatenate([[(u + w) / s2, (u - w) / s2], rest])
        ps = np.empty_like(sv)
        _proj_soc(sv, ps)
        return np.concatenate([[(ps[0] + ps[1]) / s2, (ps[0] - ps[1]) / s2], ps[2:]])
    if cone not in CODE:
        raise ValueError(f"unknown cone {cone}")
    if cone in ("exp", "pow") and len(v) != 3:
        raise ValueError("three-dimensional cone expected")
    project_primal(v, np.array([CODE[cone]], dtype=np.int64), np.array([len(v)], dtype=np.int64),
                   np.array([alpha]), out)
    return out


def project_dual_cone(block: np.ndarray, cone: str, alpha: float = 0.0) -> np.ndarray:
    v = np.asarray(block, dtype=float).copy()
    out = np.empty_like(v)
    project_dual(v, np.array([CODE[cone]], dtype=np.int64), np.array([len(v)], dtype=np.int64),
                 np.array([alpha]), out)
    return out
