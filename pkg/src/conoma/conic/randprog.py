"""Random mixed-cone programs with a known strictly feasible point.

Used for solver certification and benchmarking: every generated program is
bounded (box constraints) and strictly feasible at a random interior point.
"""

from __future__ import annotations

import math

import numpy as np

from .program import ConeProgram, LinExpr, ProgramBuilder


def _rand_expr(rng, n, density=0.5, scale=1.0) -> LinExpr:
    cols = np.flatnonzero(rng.uniform(size=n) < density)
    if not len(cols):
        cols = np.array([rng.integers(n)])
    return LinExpr(cols, rng.standard_normal(len(cols)) * scale)


def random_program(rng: np.random.Generator, n: int | None = None) -> ConeProgram:
    n = int(n or rng.integers(3, 9))
    x0 = rng.uniform(0.2, 1.5, size=n)
    bld = ProgramBuilder()
    x = bld.add_vars("x", n)
    box = 3.0
    bld.add_block("nonneg", [LinExpr.var(i) + box for i in x] + [-LinExpr.var(i) + box for i in x], tag="box")

    def shift(expr: LinExpr, target: float) -> LinExpr:
        return expr + (target - expr.value(x0))

    for _ in range(int(rng.integers(1, 3))):  # second-order cones
        d = int(rng.integers(2, 5))
        rest = [_rand_expr(rng, n) + rng.standard_normal() for _ in range(d - 1)]
        norm = math.sqrt(sum(e.value(x0) ** 2 for e in rest))
        head = shift(_rand_expr(rng, n, 0.3), norm + rng.uniform(0.5, 2.0))
        bld.add_block("soc", [head] + rest, tag="soc")
    for _ in range(int(rng.integers(0, 2))):  # rotated second-order cones
        d = int(rng.integers(3, 5))
        w = [_rand_expr(rng, n) for _ in range(d - 2)]
        wn = sum(e.value(x0) ** 2 for e in w)
        u = shift(_rand_expr(rng, n, 0.3), rng.uniform(0.5, 1.5))
        v = shift(_rand_expr(rng, n, 0.3), (wn + 1.0) / (2 * u.value(x0)) + rng.uniform(0.1, 1.0))
        bld.add_block("rsoc", [u, v] + w, tag="rsoc")
    for _ in range(int(rng.integers(1, 3))):  # exponential cones
        ex = _rand_expr(rng, n, 0.4)
        ey = shift(_rand_expr(rng, n, 0.3, 0.3), rng.uniform(0.5, 1.5))
        val = ey.value(x0) * math.exp(ex.value(x0) / ey.value(x0))
        ez = shift(_rand_expr(rng, n, 0.3), val + rng.uniform(0.2, 2.0))
        bld.add_block("exp", [ex, ey, ez], tag="exp")
    for _ in range(int(rng.integers(1, 3))):  # power cones
        alpha = float(rng.choice([1 / 3, 0.25, 0.5, 0.7]))
        px = shift(_rand_expr(rng, n, 0.3, 0.5), rng.uniform(0.5, 2.0))
        py = shift(_rand_expr(rng, n, 0.3, 0.5), rng.uniform(0.5, 2.0))
        lim = px.value(x0) ** alpha * py.value(x0) ** (1 - alpha)
        pz = shift(_rand_expr(rng, n), rng.uniform(-0.8, 0.8) * lim)
        bld.add_block("pow", [px, py, pz], alpha=alpha, tag="pow")
    if rng.uniform() < 0.5:
        bld.add_block("zero", [shift(_rand_expr(rng, n), 0.0)], tag="eq")
    for i in rng.choice(n, size=int(rng.integers(1, min(3, n) + 1)), replace=False):
        bld.maximize_log(int(x[i]))
    bld.maximize_linear(LinExpr(x, rng.standard_normal(n) * 0.5))
    return bld.build()
