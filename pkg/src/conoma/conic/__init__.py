"""Cone programs and the solvers that accept them.

``solve(prog)`` lowers a :class:`ConeProgram` to standard form and dispatches
to the in-repo operator-splitting solver (``backend="native"``) or to the
external interior-point reference (``backend="clarabel"``).  Results are
mapped back to the program's variables; ``objective`` is reported in the
program's maximisation sense.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hsde, reference
from .hsde import SolverOptions, SolveResult
from .program import ConeProgram, LinExpr, ProgramBuilder, StandardForm, dumps, lin_sum, loads
from .projections import project_cone, project_dual_cone

BACKENDS = ("native", "clarabel")


@dataclass
class ProgramSolution:
    status: str
    x: np.ndarray  # program variables
    objective: float  # program objective (maximisation sense)
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    solve_time: float = 0.0
    y: np.ndarray | None = None  # standard-form dual
    s: np.ndarray | None = None
    x_std: np.ndarray | None = None
    backend: str = "native"

    def warm(self) -> dict:
        return {"x": self.x_std, "y": self.y, "s": self.s}


def solve(prog: ConeProgram, opts: SolverOptions | None = None, backend: str = "native",
          warm_start: dict | None = None, std: StandardForm | None = None) -> ProgramSolution:
    """Solve a program; ``warm_start`` is the ``warm()`` of an earlier solution
    with the same standard-form dimensions (ignored otherwise)."""
    opts = opts or SolverOptions()
    std = std or prog.to_standard()
    m, n = std.A.shape
    if warm_start is not None:
        wx = warm_start.get("x")
        if wx is None or len(wx) != n or len(warm_start.get("y", ())) != m:
            warm_start = None
    if backend == "native":
        res = hsde.solve_standard(std.c, std.A, std.b, std.cones, opts, warm_start)
    elif backend == "clarabel":
        first = min(opts.tol, 1e-8)
        tols = tuple(t for t in (first, 1e-7, 1e-6) if t >= first)
        res = reference.solve_with_fallback(std.c, std.A, std.b, std.cones, tols)
    else:
        raise ValueError(f"unknown backend {backend}; choose from {BACKENDS}")
    x = res.x[: prog.n]
    obj = -res.objective + prog.obj_const if res.status == "optimal" else float("nan")
    return ProgramSolution(res.status, x, obj, res.residuals, res.iterations, res.solve_time,
                           res.y, res.s, res.x, backend)


__all__ = [
    "BACKENDS", "ConeProgram", "LinExpr", "ProgramBuilder", "ProgramSolution", "SolveResult",
    "SolverOptions", "StandardForm", "dumps", "lin_sum", "loads", "project_cone",
    "project_dual_cone", "solve",
]
