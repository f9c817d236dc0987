"""Solver-agnostic mixed-integer linear program representation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "=", ">="


class BuildError(ValueError):
    """A formulation could not be built from the given data."""


@dataclass(eq=False)
class ModelIR:
    """Minimization MILP ``min c.x + const  s.t.  A x (<=,=,>=) b,  lb <= x <= ub``.

    ``blocks`` maps a decision-symbol name to an integer array whose entries
    are column indices, shaped by the symbol's semantic index (for example
    ``blocks["s"][w, i, j, t]``). ``row_blocks`` does the same for constraint
    families. ``expected_rows``/``expected_vars`` hold the cardinalities the
    builder promised, checked by :meth:`audit`.
    """

    name: str
    var_names: list
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    obj: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    row_names: list
    blocks: dict
    row_blocks: dict
    obj_const: float = 0.0
    expected_vars: dict = field(default_factory=dict)
    expected_rows: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def free_binaries(self) -> np.ndarray:
        return np.flatnonzero(self.integer & (self.lb < self.ub))

    def value(self, x: np.ndarray, block: str) -> np.ndarray:
        """Values of a decision block, shaped by its semantic index."""
        return np.asarray(x)[self.blocks[block]]

    def objective_value(self, x) -> float:
        return float(self.obj @ np.asarray(x) + self.obj_const)

    def row_activity(self, x) -> np.ndarray:
        return self.A @ np.asarray(x)

    def residuals(self, x) -> np.ndarray:
        """Per-row constraint violation (0 when satisfied)."""
        ax = self.row_activity(x)
        r = np.zeros(self.n_rows)
        le = self.senses == LE
        ge = self.senses == GE
        eq = self.senses == EQ
        r[le] = np.maximum(ax[le] - self.rhs[le], 0.0)
        r[ge] = np.maximum(self.rhs[ge] - ax[ge], 0.0)
        r[eq] = np.abs(ax[eq] - self.rhs[eq])
        return r

    def bound_residual(self, x) -> float:
        x = np.asarray(x)
        lo = np.where(np.isfinite(self.lb), self.lb - x, 0.0)
        hi = np.where(np.isfinite(self.ub), x - self.ub, 0.0)
        return float(max(lo.max(initial=0.0), hi.max(initial=0.0)))

    def audit(self) -> list:
        """Structural self-check; returns a list of problems (empty if sound)."""
        problems = []
        n = self.n_vars
        if len(self.lb) != n or len(self.ub) != n or len(self.obj) != n or len(self.integer) != n:
            problems.append("variable arrays have inconsistent lengths")
        if self.A.shape != (self.n_rows, n):
            problems.append(f"matrix shape {self.A.shape} != ({self.n_rows}, {n})")
        if len(self.senses) != self.n_rows or len(self.rhs) != self.n_rows:
            problems.append("row arrays have inconsistent lengths")
        if self.A.nnz and (self.A.indices.min() < 0 or self.A.indices.max() >= n):
            problems.append("constraint references an undeclared variable")
        if not np.all(np.isfinite(self.obj)) or not np.isfinite(self.obj_const):
            problems.append("objective is not finite")
        if len(set(self.var_names)) != n:
            problems.append("variable names are not unique")
        covered = np.concatenate([np.ravel(b) for b in self.blocks.values()]) if self.blocks else np.array([], int)
        if covered.size != n or not np.array_equal(np.sort(covered), np.arange(n)):
            problems.append("blocks do not map bijectively onto the variables")
        rows = np.concatenate([np.ravel(b) for b in self.row_blocks.values()]) if self.row_blocks else np.array([], int)
        if rows.size != self.n_rows or not np.array_equal(np.sort(rows), np.arange(self.n_rows)):
            problems.append("row families do not partition the constraints")
        for fam, want in self.expected_rows.items():
            got = np.size(self.row_blocks.get(fam, []))
            if got != want:
                problems.append(f"row family {fam}: {got} rows, expected {want}")
        for blk, want in self.expected_vars.items():
            got = np.size(self.blocks.get(blk, []))
            if got != want:
                problems.append(f"variable block {blk}: {got} columns, expected {want}")
        return problems

    def with_bounds(self, lb=None, ub=None) -> "ModelIR":
        import copy
        m = copy.copy(self)
        if lb is not None:
            m.lb = np.asarray(lb, dtype=float)
        if ub is not None:
            m.ub = np.asarray(ub, dtype=float)
        return m

    def to_lp(self) -> str:
        return write_lp(self)


def _fmt_index(idx) -> str:
    return "_".join(str(int(k)) for k in idx)


class ModelBuilder:
    """Incremental construction of a :class:`ModelIR`."""

    def __init__(self, name: str):
        self.name = name
        self._names = []
        self._lb = []
        self._ub = []
        self._int = []
        self._obj = []
        self.blocks = {}
        self._rows = []
        self._cols = []
        self._vals = []
        self._senses = []
        self._rhs = []
        self._row_names = []
        self._row_fams = {}
        self.obj_const = 0.0
        self.expected_vars = {}
        self.expected_rows = {}

    @property
    def n_vars(self):
        return len(self._names)

    def add_vars(self, block: Optional[str], shape, lb=0.0, ub=np.inf, cost=0.0,
                 integer=False, name: Optional[str] = None, index_prefix=()) -> np.ndarray:
        """Declare a block of variables; ``block=None`` leaves it unregistered.

        Unregistered pieces are stitched into a block later with
        :meth:`register` (scenario-major recourse blocks are built that way).
        """
        shape = tuple(int(s) for s in shape)
        n = int(np.prod(shape)) if shape else 1
        start = len(self._names)
        idx = np.arange(start, start + n).reshape(shape)
        prefix = name or block
        for multi in np.ndindex(*shape):
            full = tuple(index_prefix) + multi
            self._names.append(f"{prefix}_{_fmt_index(full)}" if full else prefix)
        self._lb.extend(np.broadcast_to(np.asarray(lb, float), shape).ravel().tolist())
        self._ub.extend(np.broadcast_to(np.asarray(ub, float), shape).ravel().tolist())
        self._obj.extend(np.broadcast_to(np.asarray(cost, float), shape).ravel().tolist())
        self._int.extend([bool(integer)] * n)
        if block is not None:
            self.register(block, idx)
        return idx

    def register(self, block: str, idx) -> None:
        if block in self.blocks:
            raise BuildError(f"duplicate variable block {block}")
        self.blocks[block] = np.asarray(idx, dtype=np.int64)

    def add_cost(self, cols, coefs):
        shape = np.shape(cols)
        cols = np.ravel(cols)
        coefs = np.broadcast_to(np.asarray(coefs, float), shape).ravel()
        for c, v in zip(cols, coefs):
            self._obj[int(c)] += float(v)

    def add_row(self, family: str, index, cols, coefs, sense: str, rhs: float) -> int:
        r = len(self._senses)
        cols = np.ravel(np.asarray(cols, dtype=np.int64))
        coefs = np.broadcast_to(np.asarray(coefs, float), cols.shape).ravel()
        self._rows.append(np.full(cols.size, r, dtype=np.int64))
        self._cols.append(cols)
        self._vals.append(coefs)
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(f"{family}_{_fmt_index(index)}" if len(index) else family)
        self._row_fams.setdefault(family, []).append(r)
        return r

    def expect(self, rows: Optional[dict] = None, vars: Optional[dict] = None):
        if rows:
            self.expected_rows.update(rows)
        if vars:
            self.expected_vars.update(vars)

    def build(self) -> ModelIR:
        n = len(self._names)
        m = len(self._senses)
        if m:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        # zero coefficients are kept out of the matrix; duplicates are summed
        A = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        model = ModelIR(
            name=self.name,
            var_names=list(self._names),
            lb=np.array(self._lb, dtype=float),
            ub=np.array(self._ub, dtype=float),
            integer=np.array(self._int, dtype=bool),
            obj=np.array(self._obj, dtype=float),
            A=A,
            senses=np.array(self._senses, dtype=object),
            rhs=np.array(self._rhs, dtype=float),
            row_names=list(self._row_names),
            blocks=dict(self.blocks),
            row_blocks={k: np.array(v, dtype=np.int64) for k, v in self._row_fams.items()},
            obj_const=float(self.obj_const),
            expected_vars=dict(self.expected_vars),
            expected_rows=dict(self.expected_rows),
        )
        problems = model.audit()
        if problems:
            raise BuildError("; ".join(problems))
        return model


def _num(v: float) -> str:
    return repr(float(v))


def _terms(cols, vals, names) -> str:
    parts = []
    for c, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {names[c]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def write_lp(model: ModelIR) -> str:
    """Render ``model`` in CPLEX LP text format (canonical field order)."""
    names = model.var_names
    out = [f"\\ {model.name}", "Minimize"]
    nz = np.flatnonzero(model.obj)
    obj = _terms(nz, model.obj[nz], names) if nz.size else f"0 {names[0]}"
    if model.obj_const:
        obj += f" + {_num(model.obj_const)} __const" if model.obj_const > 0 else f" - {_num(-model.obj_const)} __const"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    A = model.A.tocsr()
    for r in range(model.n_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        expr = _terms(A.indices[lo:hi], A.data[lo:hi], names)
        out.append(f" {model.row_names[r]}: {expr} {model.senses[r]} {_num(model.rhs[r])}")
    if model.obj_const:
        out.append(" __const_fix: __const = 1")
    out.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            out.append(f" {nm} = {_num(lo)}")
        elif np.isinf(lo) and np.isinf(hi):
            out.append(f" {nm} free")
        else:
            los = "-inf" if np.isinf(lo) else _num(lo)
            his = "+inf" if np.isinf(hi) else _num(hi)
            out.append(f" {los} <= {nm} <= {his}")
    ints = [names[j] for j in np.flatnonzero(model.integer)]
    if ints:
        out.append("Binaries")
        for k in range(0, len(ints), 8):
            out.append(" " + " ".join(ints[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"
