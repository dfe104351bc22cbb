"""External reference solver (Clarabel interior point) behind the same interface."""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from .hsde import SolveResult

try:  # pragma: no cover - import guard
    import clarabel
except ImportError:  # pragma: no cover
    clarabel = None

_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "primal_infeasible",
    "AlmostPrimalInfeasible": "primal_infeasible",
    "DualInfeasible": "dual_infeasible",
    "AlmostDualInfeasible": "dual_infeasible",
    "MaxIterations": "max_iters",
    "MaxTime": "max_iters",
    "InsufficientProgress": "insufficient_progress",
    "NumericalError": "numerical_error",
}

# Settings of the retries after the default profile stalled at every
# tolerance: shorter steps, more refinement and another factorization trade
# speed for progress on badly scaled programs (strong interference next to
# tiny coupling terms).
CAREFUL = (
    dict(max_step_fraction=0.9, static_regularization_constant=1e-7,
         iterative_refinement_max_iter=40, iterative_refinement_reltol=1e-14),
    dict(max_step_fraction=0.8, direct_solve_method="faer"),
)


def available() -> bool:
    return clarabel is not None


def _cones(cones):
    out = []
    for kind, dim, alpha in cones:
        if kind == "zero":
            out.append(clarabel.ZeroConeT(dim))
        elif kind == "nonneg":
            out.append(clarabel.NonnegativeConeT(dim))
        elif kind == "soc":
            out.append(clarabel.SecondOrderConeT(dim))
        elif kind == "exp":
            out.append(clarabel.ExponentialConeT())
        elif kind == "pow":
            out.append(clarabel.PowerConeT(alpha))
        else:
            raise ValueError(kind)
    return out


def solve_standard(c, A, b, cones, tol: float = 1e-8, max_iters: int = 200, verbose: bool = False,
                   extra_settings: dict | None = None) -> SolveResult:
    if clarabel is None:
        raise RuntimeError("clarabel is not installed")
    t0 = time.perf_counter()
    A = sp.csc_matrix(A, dtype=float)
    n = A.shape[1]
    P = sp.csc_matrix((n, n))
    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_infeas_abs = tol
    settings.tol_infeas_rel = tol
    settings.max_iter = max_iters
    for key, value in (extra_settings or {}).items():
        setattr(settings, key, value)
    solver = clarabel.DefaultSolver(P, np.asarray(c, float), A, np.asarray(b, float), _cones(cones), settings)
    sol = solver.solve()
    status = _STATUS.get(str(sol.status), "max_iters")
    x = np.asarray(sol.x)
    y = np.asarray(sol.z)
    s = np.asarray(sol.s)
    res = {}
    if status == "optimal":
        Ax = A @ x
        res = dict(pres=float(np.max(np.abs(Ax + s - b))) if len(b) else 0.0,
                   dres=float(np.max(np.abs(A.T @ y + c))) if n else 0.0,
                   gap=float(abs(c @ x + b @ y)))
    out = SolveResult(status, x, y, s, float(c @ x), res, int(sol.iterations),
                      time.perf_counter() - t0)
    out.raw_status = str(sol.status)
    return out


def solve_with_fallback(c, A, b, cones, tols=(1e-8, 1e-7, 1e-6), max_iters: int = 200) -> SolveResult:
    """Retry at looser tolerances, then with careful settings, when the
    interior-point method stalls.

    Infeasibility verdicts are final; only stalls are retried.  The
    tolerance that succeeded is stored in ``residuals["tol"]`` and
    ``residuals["careful"]`` counts the careful profiles that were needed.
    """
    res = None
    total = 0.0
    attempts = [(tol, None) for tol in tols] + [(tols[-1], extra) for extra in CAREFUL]
    for tol, extra in attempts:
        res = solve_standard(c, A, b, cones, tol=tol, max_iters=max_iters, extra_settings=extra)
        total += res.solve_time
        if res.status in ("optimal", "primal_infeasible", "dual_infeasible"):
            break
    res.solve_time = total
    if res.status == "optimal":
        res.residuals["tol"] = tol
        res.residuals["careful"] = 0.0 if extra is None else float(CAREFUL.index(extra) + 1)
    return res
