"""Activity-based bound propagation over ``sum(a * x) <= rhs`` rows.

A row may carry an indicator guard: it is enforced only once the guard
variable is fixed to the guard value, and a row that cannot hold turns its
guard off.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from mipnn.mip.model import MipModel

FEAS_TOL = 1e-9
INT_TOL = 1e-9

INFEASIBLE = 1
FEASIBLE = 0


class CompiledModel:
    """Array form of a :class:`MipModel` for the propagation kernel."""

    def __init__(self, model: MipModel):
        self.model = model
        n = model.n_vars
        self.n_vars = n
        self.lb = np.array([v.lb for v in model.variables], dtype=np.float64)
        self.ub = np.array([v.ub for v in model.variables], dtype=np.float64)
        self.is_int = np.array([v.is_integral for v in model.variables], dtype=np.bool_)

        rows: list[tuple[list, float, int, int]] = []

        def add(terms, sense, rhs, guard=-1, gval=0):
            if sense in ("<=", "="):
                rows.append((list(terms), rhs, guard, gval))
            if sense in (">=", "="):
                rows.append(([(v, -c) for v, c in terms], -rhs, guard, gval))

        for c in model.constraints:
            add(c.terms, c.sense, c.rhs)
        for ind in model.indicators:
            add(ind.constraint.terms, ind.constraint.sense, ind.constraint.rhs, ind.guard, ind.value)

        nnz = sum(len(r[0]) for r in rows)
        self.n_rows = len(rows)
        self.row_ptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        self.cols = np.zeros(nnz, dtype=np.int64)
        self.vals = np.zeros(nnz, dtype=np.float64)
        self.rhs = np.zeros(self.n_rows, dtype=np.float64)
        self.guard = np.full(self.n_rows, -1, dtype=np.int64)
        self.gval = np.zeros(self.n_rows, dtype=np.float64)
        pos = 0
        for r, (terms, rhs, guard, gval) in enumerate(rows):
            for v, c in terms:
                self.cols[pos] = v
                self.vals[pos] = c
                pos += 1
            self.row_ptr[r + 1] = pos
            self.rhs[r] = rhs
            self.guard[r] = guard
            self.gval[r] = gval

        # column -> rows it appears in, as a term or as a guard
        incidence: list[list[int]] = [[] for _ in range(n)]
        for r in range(self.n_rows):
            for p in range(self.row_ptr[r], self.row_ptr[r + 1]):
                incidence[self.cols[p]].append(r)
            if self.guard[r] >= 0:
                incidence[self.guard[r]].append(r)
        self.col_ptr = np.zeros(n + 1, dtype=np.int64)
        for v in range(n):
            self.col_ptr[v + 1] = self.col_ptr[v] + len(incidence[v])
        self.col_rows = np.array([r for rs in incidence for r in rs], dtype=np.int64)

        self._queue = np.zeros(max(1, self.n_rows), dtype=np.int64)
        self._queued = np.zeros(max(1, self.n_rows), dtype=np.bool_)

    def propagate(self, lb, ub, changed=None) -> bool:
        """Tighten ``lb``/``ub`` in place.  Returns False on infeasibility.

        ``changed`` lists the variables whose bounds moved since the last
        fixpoint; None re-examines every row.
        """
        if changed is None:
            seeds = np.arange(self.n_vars, dtype=np.int64)
        else:
            seeds = np.asarray(changed, dtype=np.int64)
        status = _propagate(
            lb, ub, self.is_int, self.row_ptr, self.cols, self.vals, self.rhs, self.guard, self.gval,
            self.col_ptr, self.col_rows, seeds, self._queue, self._queued,
        )
        return status == FEASIBLE

    def row_violation(self, x) -> float:
        """Largest violation among rows enforced at the integral point ``x``."""
        act = np.zeros(self.n_rows)
        np.add.at(act, np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr)), self.vals * x[self.cols])
        viol = act - self.rhs
        guarded = self.guard >= 0
        off = guarded & (np.round(x[np.maximum(self.guard, 0)]) != self.gval)
        viol[off] = 0.0
        return float(max(0.0, viol.max())) if self.n_rows else 0.0


@njit(cache=True)
def _set_bound(v, new, is_upper, lb, ub, is_int):
    """Apply a candidate bound; returns -1 infeasible, 1 changed, 0 unchanged."""
    if is_upper:
        if is_int[v]:
            new = math.floor(new + INT_TOL)
        if new < lb[v] - FEAS_TOL:
            return -1
        if new < lb[v]:
            new = lb[v]
        if new < ub[v] - 1e-9 * max(1.0, abs(new)) or (is_int[v] and new < ub[v]):
            ub[v] = new
            return 1
    else:
        if is_int[v]:
            new = math.ceil(new - INT_TOL)
        if new > ub[v] + FEAS_TOL:
            return -1
        if new > ub[v]:
            new = ub[v]
        if new > lb[v] + 1e-9 * max(1.0, abs(new)) or (is_int[v] and new > lb[v]):
            lb[v] = new
            return 1
    return 0


@njit(cache=True)
def _propagate(lb, ub, is_int, row_ptr, cols, vals, rhs, guard, gval, col_ptr, col_rows, seeds, queue, queued):
    n_rows = len(rhs)
    if n_rows == 0:
        return FEASIBLE
    head = 0
    size = 0
    queued[:] = False
    for s in range(len(seeds)):
        v = seeds[s]
        for q in range(col_ptr[v], col_ptr[v + 1]):
            r = col_rows[q]
            if not queued[r]:
                queued[r] = True
                queue[(head + size) % n_rows] = r
                size += 1
    budget = 200 * n_rows + 10000
    while size > 0:
        budget -= 1
        if budget < 0:
            break
        r = queue[head]
        head = (head + 1) % n_rows
        size -= 1
        queued[r] = False

        g = guard[r]
        enforced = True
        if g >= 0:
            if lb[g] == ub[g]:
                if lb[g] != gval[r]:
                    continue
            else:
                enforced = False

        min_act = 0.0
        n_inf = 0
        inf_pos = -1
        for p in range(row_ptr[r], row_ptr[r + 1]):
            a = vals[p]
            v = cols[p]
            bound = lb[v] if a > 0 else ub[v]
            if math.isinf(bound):
                n_inf += 1
                inf_pos = p
            else:
                min_act += a * bound
        if n_inf == 0 and min_act > rhs[r] + FEAS_TOL * max(1.0, abs(rhs[r])):
            if enforced:
                return INFEASIBLE
            # the guarded row cannot hold, so the guard takes the other value
            other = 1.0 - gval[r]
            if other < lb[g] or other > ub[g]:
                return INFEASIBLE
            lb[g] = other
            ub[g] = other
            for q in range(col_ptr[g], col_ptr[g + 1]):
                r2 = col_rows[q]
                if not queued[r2]:
                    queued[r2] = True
                    queue[(head + size) % n_rows] = r2
                    size += 1
            continue
        if not enforced or n_inf > 1:
            continue

        for p in range(row_ptr[r], row_ptr[r + 1]):
            a = vals[p]
            v = cols[p]
            if lb[v] == ub[v]:
                continue
            if n_inf == 1:
                if p != inf_pos:
                    continue
                residual = min_act
            else:
                residual = min_act - a * (lb[v] if a > 0 else ub[v])
            new = (rhs[r] - residual) / a
            res = _set_bound(v, new, a > 0, lb, ub, is_int)
            if res < 0:
                return INFEASIBLE
            if res > 0:
                for q in range(col_ptr[v], col_ptr[v + 1]):
                    r2 = col_rows[q]
                    if not queued[r2]:
                        queued[r2] = True
                        queue[(head + size) % n_rows] = r2
                        size += 1
    return FEASIBLE
