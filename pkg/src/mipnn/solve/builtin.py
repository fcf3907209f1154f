"""Exact depth-first branch-and-bound for desk-scale training models.

The search branches on network parameters (weights, then the bias, neuron by
neuron and layer by layer).  Activations, connection values, objective
indicators and hinge epigraphs follow from the parameters through bound
propagation, so they are branched on only when propagation leaves them open.

When a layer's parameters are all fixed, the rest of the problem depends on
the earlier layers only through the propagated bounds of the variables it
shares constraints with (the activations of that layer).  Such residual
problems are solved once and cached, which collapses the search over the
first layer to one subtree per distinct activation pattern.
"""

from __future__ import annotations

import logging
import sys
import time

import numpy as np
from scipy import sparse

from mipnn.errors import UnsupportedModelError
from mipnn.mip.model import CONTINUOUS, MipModel
from mipnn.solve.propagate import CompiledModel
from mipnn.solve.types import SolveOutcome, SolveParams, Status

log = logging.getLogger(__name__)

BRANCH_ROLES = ("weight", "bias")
IMPLIED_CONTINUOUS = ("connection", "epigraph")
LEAF_TOL = 1e-6


class _Stop(Exception):
    def __init__(self, status):
        self.status = status


class BranchAndBound:
    def __init__(self, model: MipModel, params: SolveParams):
        self._check_supported(model)
        self.model = model
        self.params = params
        self.cm = CompiledModel(model)
        n = model.n_vars

        self.sense = 1.0 if model.objective.sense == "max" else -1.0
        c = np.zeros(n)
        for v, coef in model.objective.expr.terms.items():
            c[v] = self.sense * coef
        self.c = c
        self.c_pos = np.maximum(c, 0.0)
        self.c_neg = np.minimum(c, 0.0)
        self.const = self.sense * model.objective.expr.constant
        self.target = None if params.objective_target is None else self.sense * params.objective_target

        branch = [v.index for v in model.variables if v.role in BRANCH_ROLES and v.is_integral]
        rest = [v.index for v in model.variables if v.is_integral and v.role not in BRANCH_ROLES]
        self.order = np.array(branch + rest, dtype=np.int64)
        stages = [model.variables[v].stage for v in branch] + [-1] * len(rest)
        # cache at the first position of every later parameter stage
        self.cache_points = {
            p for p in range(1, len(branch)) if stages[p] != stages[p - 1] and stages[p] > 0
        }
        rng = np.random.default_rng(params.seed)
        hint = params.hint or {}
        self.values = {}
        for v in self.order:
            var = model.variables[v]
            domain = np.arange(int(np.ceil(var.lb)), int(np.floor(var.ub)) + 1)
            values = [int(x) for x in rng.permutation(domain)]
            preferred = hint.get(int(v))
            if preferred is not None and int(preferred) in values:
                values.remove(int(preferred))
                values.insert(0, int(preferred))
            self.values[int(v)] = values

        rows = np.repeat(np.arange(self.cm.n_rows), np.diff(self.cm.row_ptr))
        guard_rows = np.flatnonzero(self.cm.guard >= 0)
        incidence = sparse.csr_matrix(
            (
                np.ones(len(rows) + len(guard_rows), dtype=np.int32),
                (np.concatenate([rows, guard_rows]), np.concatenate([self.cm.cols, self.cm.guard[guard_rows]])),
            ),
            shape=(self.cm.n_rows, n),
        )
        self.incidence = incidence
        self.incidence_t = incidence.T.tocsr()

        self.best = -np.inf
        self.best_x = None
        self.nodes = 0
        self.cache: dict = {}
        self.cache_hits = 0
        self.deadline = None
        self.root_bound = np.inf

    @staticmethod
    def _check_supported(model: MipModel):
        for v in model.variables:
            if v.kind == CONTINUOUS and v.role not in IMPLIED_CONTINUOUS:
                raise UnsupportedModelError(
                    f"continuous variable {v.name!r} is not implied by the integer variables"
                )
            if v.is_integral and not (np.isfinite(v.lb) and np.isfinite(v.ub)):
                raise UnsupportedModelError(f"integer variable {v.name!r} is unbounded")

    # -- search ---------------------------------------------------------------

    def solve(self) -> SolveOutcome:
        start = time.perf_counter()
        self.deadline = start + self.params.time_limit
        lb, ub = self.cm.lb.copy(), self.cm.ub.copy()
        status = Status.OPTIMAL
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 2 * len(self.order) + 1000))
        try:
            if self.cm.propagate(lb, ub):
                self.root_bound = self._bound(lb, ub)
                self._dfs(lb, ub, 0)
        except _Stop as stop:
            status = stop.status
        finally:
            sys.setrecursionlimit(limit)
        wall = time.perf_counter() - start
        if self.best_x is None:
            if status == Status.OPTIMAL:
                status = Status.INFEASIBLE
            return SolveOutcome(status, None, None, wall, self.nodes)
        if status == Status.FEASIBLE_STOPPED and self.best >= self.root_bound - self._tol(self.best):
            status = Status.OPTIMAL
        objective = float(self.sense * self.best) + 0.0
        log.debug("builtin solve: %s objective=%s nodes=%d cache hits=%d", status, objective, self.nodes, self.cache_hits)
        return SolveOutcome(status, objective, self.best_x.copy(), wall, self.nodes)

    @staticmethod
    def _tol(value):
        return 1e-9 * max(1.0, abs(value)) if np.isfinite(value) else 0.0

    def _bound(self, lb, ub) -> float:
        return float(self.c_pos @ ub + self.c_neg @ lb + self.const)

    def _dfs(self, lb, ub, pos, use_cache=True):
        self.nodes += 1
        if (self.nodes & 63) == 0 and time.perf_counter() > self.deadline:
            raise _Stop(Status.TIME_LIMIT)
        if self._bound(lb, ub) <= self.best + self._tol(self.best):
            return
        if use_cache and pos in self.cache_points and self.params.cache_subproblems:
            self._residual(lb, ub, pos)
            return
        order = self.order
        n = len(order)
        while pos < n and lb[order[pos]] == ub[order[pos]]:
            pos += 1
        if pos == n:
            self._leaf(lb, ub)
            return
        var = int(order[pos])
        lo, hi = lb[var], ub[var]
        for value in self.values[var]:
            if value < lo or value > hi:
                continue
            lb2, ub2 = lb.copy(), ub.copy()
            lb2[var] = ub2[var] = value
            if self.cm.propagate(lb2, ub2, (var,)):
                self._dfs(lb2, ub2, pos + 1)

    def _leaf(self, lb, ub):
        c = self.c
        x = np.where(c > 0, ub, np.where(c < 0, lb, 0.5 * (lb + ub)))
        if self.cm.row_violation(x) > LEAF_TOL:
            raise UnsupportedModelError(
                "continuous variables are not determined by the integer assignment; "
                "the built-in solver does not solve linear relaxations"
            )
        self._accept(x, float(c @ x + self.const))

    def _accept(self, x, value):
        if value <= self.best + self._tol(self.best):
            return
        self.best = value
        self.best_x = x.copy()
        if self.target is not None and value >= self.target - self._tol(self.target):
            raise _Stop(Status.FEASIBLE_STOPPED)
        callback = self.params.stop_callback
        if callback is not None and callback(self.best_x, self.sense * value):
            raise _Stop(Status.FEASIBLE_STOPPED)

    def _residual(self, lb, ub, pos):
        open_ = lb < ub
        touched_rows = (self.incidence @ open_.astype(np.int32)) > 0
        related = ((self.incidence_t @ touched_rows.astype(np.int32)) > 0) | open_
        key = (pos, related.tobytes(), lb[related].tobytes(), ub[related].tobytes())
        fixed = ~open_
        fixed_part = float(self.c[fixed] @ lb[fixed] + self.const)

        entry = self.cache.get(key)
        if entry is not None:
            self.cache_hits += 1
            kind, value, values = entry
            if kind == "exact":
                x = lb.copy()
                x[open_] = values
                self._accept(x, fixed_part + value)
                return
            if fixed_part + value <= self.best + self._tol(self.best):
                return

        before = self.best
        self._dfs(lb, ub, pos, use_cache=False)
        if self.best > before + self._tol(before):
            self.cache[key] = ("exact", self.best - fixed_part, self.best_x[open_].copy())
        else:
            # nothing here beats the incumbent the subtree was searched against
            self.cache[key] = ("bound", before - fixed_part, None)


def solve_builtin(model: MipModel, params: SolveParams | None = None) -> SolveOutcome:
    """Solve ``model`` exactly (or until a stop rule or the time limit fires)."""
    return BranchAndBound(model, params or SolveParams()).solve()
