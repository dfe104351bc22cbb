"""Conic programs: container, builder and text serialisation.

A :class:`ConeProgram` maximises

    sum_i log(x[log_terms[i]]) + c @ x + const

subject to blocks ``A_j x + o_j in K_j``.  Supported cones (values listed as
block rows):

* ``zero``    every row equals zero,
* ``nonneg``  every row is nonnegative,
* ``soc``     ``(t, x)`` with ``t >= ||x||``,
* ``rsoc``    ``(u, v, w)`` with ``2 u v >= ||w||^2`` and ``u, v >= 0``,
* ``exp``     ``(x, y, z)`` with ``y exp(x / y) <= z`` and ``y > 0`` (closure),
* ``pow``     ``(x, y, z)`` with ``x^alpha y^(1 - alpha) >= |z|`` and ``x, y >= 0``.

:meth:`ConeProgram.to_standard` lowers the program to the form
``min c'x  s.t.  A x + s = b, s in K`` with only zero, nonnegative,
second-order, exponential and power cones; rotated cones become ordinary
second-order cones and log terms become exponential-cone epigraphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

CONES = ("zero", "nonneg", "soc", "rsoc", "exp", "pow")
SQRT2 = math.sqrt(2.0)


class LinExpr:
    """Sparse affine expression ``sum vals * x[cols] + const``."""

    __slots__ = ("cols", "vals", "const")

    def __init__(self, cols=(), vals=(), const: float = 0.0):
        self.cols = np.asarray(cols, dtype=np.int64).ravel()
        self.vals = np.asarray(vals, dtype=float).ravel()
        self.const = float(const)

    @classmethod
    def var(cls, col: int, coef: float = 1.0) -> "LinExpr":
        return cls([col], [coef])

    @classmethod
    def constant(cls, value: float) -> "LinExpr":
        return cls((), (), value)

    def __add__(self, other):
        if isinstance(other, LinExpr):
            return LinExpr(np.concatenate([self.cols, other.cols]),
                           np.concatenate([self.vals, other.vals]), self.const + other.const)
        return LinExpr(self.cols, self.vals, self.const + float(other))

    __radd__ = __add__

    def __neg__(self):
        return LinExpr(self.cols, -self.vals, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        s = float(scalar)
        return LinExpr(self.cols, self.vals * s, self.const * s)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return float(self.vals @ x[self.cols]) + self.const if len(self.cols) else self.const


def lin_sum(exprs) -> LinExpr:
    exprs = list(exprs)
    if not exprs:
        return LinExpr()
    return LinExpr(np.concatenate([e.cols for e in exprs]), np.concatenate([e.vals for e in exprs]),
                   sum(e.const for e in exprs))


@dataclass
class ConeBlock:
    cone: str
    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    offset: np.ndarray
    alpha: float = 0.0
    tag: str = ""

    def matrix(self, n: int) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.dim, n))

    def value(self, x: np.ndarray) -> np.ndarray:
        out = self.offset.copy()
        np.add.at(out, self.rows, self.vals * x[self.cols])
        return out


@dataclass
class StandardForm:
    """``min c'x  s.t.  A x + s = b,  s in K`` with cones listed in order."""

    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: list  # [(kind, dim, alpha)] with kind in zero/nonneg/soc/exp/pow
    n_orig: int
    obj_const: float = 0.0


@dataclass
class ConeProgram:
    n: int
    c: np.ndarray
    log_terms: np.ndarray
    blocks: list = field(default_factory=list)
    names: dict = field(default_factory=dict)
    obj_const: float = 0.0

    # -- inspection -----------------------------------------------------------
    def cone_counts(self) -> dict:
        out: dict[str, int] = {}
        for blk in self.blocks:
            out[blk.cone] = out.get(blk.cone, 0) + 1
        return out

    def objective_value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        logs = np.log(x[self.log_terms]) if len(self.log_terms) else np.zeros(0)
        return float(np.sum(logs) + self.c @ x + self.obj_const)

    def violations(self, x: np.ndarray) -> list:
        """Per-block absolute cone violation of ``x`` (0 means feasible)."""
        return [cone_violation(blk.cone, blk.value(x), blk.alpha) for blk in self.blocks]

    def check(self) -> None:
        for blk in self.blocks:
            if blk.cone not in CONES:
                raise ValueError(f"unknown cone {blk.cone}")
            if len(blk.cols) and (blk.cols.max() >= self.n or blk.cols.min() < 0):
                raise ValueError(f"block {blk.tag}: column index out of range")
            if len(blk.rows) and blk.rows.max() >= blk.dim:
                raise ValueError(f"block {blk.tag}: row index out of range")
            if len(blk.offset) != blk.dim:
                raise ValueError(f"block {blk.tag}: offset length mismatch")
            if blk.cone in ("exp", "pow") and blk.dim != 3:
                raise ValueError(f"block {blk.tag}: {blk.cone} cone needs dimension 3")
            if blk.cone == "rsoc" and blk.dim < 2:
                raise ValueError(f"block {blk.tag}: rotated cone needs dimension >= 2")
            if blk.cone == "soc" and blk.dim < 1:
                raise ValueError(f"block {blk.tag}: empty second-order cone")

    # -- lowering -------------------------------------------------------------
    def to_standard(self) -> StandardForm:
        n_log = len(self.log_terms)
        n = self.n + n_log
        c = np.zeros(n)
        c[: self.n] = -self.c
        c[self.n:] = -1.0
        rows, cols, vals, b, cones = [], [], [], [], []
        r0 = 0

        def emit(blk_rows, blk_cols, blk_vals, offset):
            nonlocal r0
            rows.append(blk_rows + r0)
            cols.append(blk_cols)
            vals.append(-blk_vals)
            b.append(offset)
            r0 += len(offset)

        for blk in self.blocks:
            if blk.cone == "rsoc":
                # (u, v, w) -> (u + v, u - v, sqrt2 w)
                M = blk.matrix(n).tocoo()
                T = rsoc_to_soc_matrix(blk.dim)
                Ms = (T @ M).tocoo()
                emit(Ms.row, Ms.col, Ms.data, T @ blk.offset)
                cones.append(("soc", blk.dim, 0.0))
            else:
                emit(blk.rows, blk.cols, blk.vals, blk.offset)
                cones.append((blk.cone, blk.dim, blk.alpha))
        for i, col in enumerate(self.log_terms):
            # exp(l) <= x  <=>  (l, 1, x) in K_exp
            emit(np.array([0, 2]), np.array([self.n + i, col]), np.array([1.0, 1.0]),
                 np.array([0.0, 1.0, 0.0]))
            cones.append(("exp", 3, 0.0))
        A = sp.csc_matrix((np.concatenate(vals) if vals else np.zeros(0),
                           (np.concatenate(rows) if rows else np.zeros(0, int),
                            np.concatenate(cols) if cols else np.zeros(0, int))), shape=(r0, n))
        A.sum_duplicates()
        return StandardForm(c, A, np.concatenate(b) if b else np.zeros(0), merge_cones(cones),
                            self.n, -self.obj_const)


def rsoc_to_soc_matrix(dim: int) -> sp.csr_matrix:
    T = sp.lil_matrix((dim, dim))
    T[0, 0] = T[0, 1] = 1.0
    T[1, 0] = 1.0
    T[1, 1] = -1.0
    for i in range(2, dim):
        T[i, i] = SQRT2
    return T.tocsr()


def merge_cones(cones: list) -> list:
    """Merge consecutive zero / nonnegative cones into single blocks."""
    out: list = []
    for kind, dim, alpha in cones:
        if out and kind in ("zero", "nonneg") and out[-1][0] == kind:
            out[-1] = (kind, out[-1][1] + dim, 0.0)
        else:
            out.append((kind, dim, alpha))
    return out


def cone_violation(cone: str, v: np.ndarray, alpha: float = 0.0) -> float:
    """Absolute violation of cone membership for a block value ``v``."""
    if cone == "zero":
        return float(np.max(np.abs(v))) if len(v) else 0.0
    if cone == "nonneg":
        return float(max(0.0, -np.min(v))) if len(v) else 0.0
    if cone == "soc":
        return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))
    if cone == "rsoc":
        u, w0, w = v[0], v[1], v[2:]
        t = u + w0
        return float(max(0.0, np.linalg.norm(np.concatenate([[u - w0], SQRT2 * w])) - t) / SQRT2)
    if cone == "exp":
        x, y, z = v
        # measured along x, which stays finite even where y exp(x / y) overflows
        if y > 0 and z > 0:
            return float(max(0.0, x - y * (math.log(z) - math.log(y))))
        return float(max(0.0, -y, -z) + max(0.0, x))
    if cone == "pow":
        x, y, z = v
        if x < 0 or y < 0:
            return float(max(-x, -y, 0.0) + abs(z))
        return float(max(0.0, abs(z) - x ** alpha * y ** (1 - alpha)))
    raise ValueError(cone)


class ProgramBuilder:
    """Incremental construction of a :class:`ConeProgram`."""

    def __init__(self) -> None:
        self.n = 0
        self.blocks: list[ConeBlock] = []
        self.names: dict[str, np.ndarray] = {}
        self.lin_obj: list[LinExpr] = []
        self.log_cols: list[int] = []

    def add_vars(self, name: str, count: int) -> np.ndarray:
        idx = np.arange(self.n, self.n + count)
        self.n += count
        if name in self.names:
            self.names[name] = np.concatenate([self.names[name], idx])
        else:
            self.names[name] = idx
        return idx

    def set_name(self, name: str, index_array: np.ndarray) -> None:
        self.names[name] = np.asarray(index_array, dtype=np.int64)

    def add_block(self, cone: str, exprs, alpha: float = 0.0, tag: str = "") -> None:
        exprs = list(exprs)
        rows = np.concatenate([np.full(len(e.cols), i, dtype=np.int64) for i, e in enumerate(exprs)]) \
            if exprs else np.zeros(0, np.int64)
        cols = np.concatenate([e.cols for e in exprs]) if exprs else np.zeros(0, np.int64)
        vals = np.concatenate([e.vals for e in exprs]) if exprs else np.zeros(0)
        offset = np.array([e.const for e in exprs], dtype=float)
        self.blocks.append(ConeBlock(cone, len(exprs), rows, cols, vals, offset, alpha, tag))

    def add_raw_block(self, cone: str, rows, cols, vals, offset, alpha: float = 0.0, tag: str = "") -> None:
        self.blocks.append(ConeBlock(cone, len(offset), np.asarray(rows, np.int64),
                                     np.asarray(cols, np.int64), np.asarray(vals, float),
                                     np.asarray(offset, float), alpha, tag))

    def maximize_log(self, col: int) -> None:
        self.log_cols.append(int(col))

    def maximize_linear(self, expr: LinExpr) -> None:
        self.lin_obj.append(expr)

    def build(self) -> ConeProgram:
        c = np.zeros(self.n)
        const = 0.0
        for e in self.lin_obj:
            np.add.at(c, e.cols, e.vals)
            const += e.const
        prog = ConeProgram(self.n, c, np.asarray(self.log_cols, dtype=np.int64), self.blocks,
                           dict(self.names), const)
        prog.check()
        return prog


# ---------------------------------------------------------------------------
# Text debug format
# ---------------------------------------------------------------------------

HEADER = "conoma-cone-program 1"


def dumps(prog: ConeProgram) -> str:
    """Serialise to a line-oriented text format (exact float round trip)."""
    out = [HEADER, f"vars {prog.n}", f"const {float(prog.obj_const)!r}"]
    nz = np.flatnonzero(prog.c)
    out.append(f"linear {len(nz)}")
    out.extend(f"{i} {float(prog.c[i])!r}" for i in nz)
    out.append(f"log {len(prog.log_terms)}")
    out.extend(str(int(i)) for i in prog.log_terms)
    out.append(f"blocks {len(prog.blocks)}")
    for blk in prog.blocks:
        tag = blk.tag.replace(" ", "_") or "-"
        out.append(f"block {blk.cone} {blk.dim} {float(blk.alpha)!r} {len(blk.vals)} {tag}")
        out.extend(f"{int(r)} {int(c)} {float(v)!r}" for r, c, v in zip(blk.rows, blk.cols, blk.vals))
        out.append("offset " + " ".join(repr(float(o)) for o in blk.offset))
    out.append(f"names {len(prog.names)}")
    for name, idx in prog.names.items():
        flat = np.asarray(idx).ravel()
        shape = "x".join(str(s) for s in np.asarray(idx).shape) or "0"
        out.append(f"name {name} {shape} " + " ".join(str(int(i)) for i in flat))
    out.append("end")
    return "\n".join(out) + "\n"


def loads(text: str) -> ConeProgram:
    lines = iter(text.splitlines())

    def expect(prefix: str) -> list:
        parts = next(lines).split(" ")
        if parts[0] != prefix:
            raise ValueError(f"expected '{prefix}', got '{parts[0]}'")
        return parts[1:]

    if next(lines).strip() != HEADER:
        raise ValueError("not a cone program document")
    n = int(expect("vars")[0])
    const = float(expect("const")[0])
    c = np.zeros(n)
    for _ in range(int(expect("linear")[0])):
        i, v = next(lines).split()
        c[int(i)] = float(v)
    logs = np.array([int(next(lines)) for _ in range(int(expect("log")[0]))], dtype=np.int64)
    blocks = []
    for _ in range(int(expect("blocks")[0])):
        cone, dim, alpha, nnz, tag = expect("block")
        trip = [next(lines).split() for _ in range(int(nnz))]
        rows = np.array([int(t[0]) for t in trip], dtype=np.int64)
        cols = np.array([int(t[1]) for t in trip], dtype=np.int64)
        vals = np.array([float(t[2]) for t in trip])
        offset = np.array([float(v) for v in expect("offset") if v], dtype=float)
        blocks.append(ConeBlock(cone, int(dim), rows, cols, vals, offset, float(alpha),
                                "" if tag == "-" else tag))
    names = {}
    for _ in range(int(expect("names")[0])):
        parts = expect("name")
        name, shape = parts[0], tuple(int(s) for s in parts[1].split("x"))
        idx = np.array([int(i) for i in parts[2:] if i], dtype=np.int64)
        names[name] = idx.reshape(shape) if idx.size else np.zeros(shape, dtype=np.int64)
    expect("end")
    prog = ConeProgram(n, c, logs, blocks, names, const)
    prog.check()
    return prog
