"""Cross-check of the built-in solver against exhaustive enumeration."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import numpy as np

from mipnn.mip import DEFAULT_EPS, DEFAULT_MARGIN, PwlSpec, build_training_model, linearize_indicators
from mipnn.oracle import enumerate_optima, random_instance
from mipnn.solve import SolveParams, Status, solve_builtin

HINGE_TOL = 1e-6


@dataclass
class Check:
    seed: int
    objective: str
    form: str
    oracle: float | None
    solver: float | None
    status: str
    passed: bool


def solver_optimum(data, arch, p_bound, objective, form, *, big_m_scale=1.0, time_limit=600.0, eps=DEFAULT_EPS,
                   margin=DEFAULT_MARGIN, pwl=None, seed=0):
    model, _ = build_training_model(data, arch, p_bound, objective, eps=eps, margin=margin, pwl=pwl)
    if form == "linearized":
        model = linearize_indicators(model, big_m_scale=big_m_scale)
    return solve_builtin(model, SolveParams(time_limit=time_limit, seed=seed))


def optima_agree(objective: str, oracle, solver) -> bool:
    if oracle is None or solver is None:
        return oracle is None and solver is None
    tol = HINGE_TOL if objective == "min-hinge" else 0.0
    return abs(oracle - solver) <= tol


def check_instance(data, arch, p_bound, objectives, forms, *, big_m_scale=1.0, time_limit=600.0, seed=0,
                   eps=DEFAULT_EPS, margin=DEFAULT_MARGIN) -> list[Check]:
    pwl = PwlSpec.uniform(margin=margin)
    optima = enumerate_optima(data.features, data.labels, arch, p_bound, eps=eps, margin=margin, pwl=pwl)
    checks = []
    for objective in objectives:
        expected = optima[objective].optimum if objective in optima else None
        for form in forms:
            out = solver_optimum(data, arch, p_bound, objective, form, big_m_scale=big_m_scale,
                                 time_limit=time_limit, eps=eps, margin=margin, pwl=pwl, seed=seed)
            got = out.objective if out.status in (Status.OPTIMAL, Status.INFEASIBLE) else None
            passed = out.status in (Status.OPTIMAL, Status.INFEASIBLE) and optima_agree(objective, expected, got)
            checks.append(Check(seed, objective, form, expected, got, str(out.status), passed))
    return checks


def counterexample(data, arch, p_bound, check: Check, big_m_scale: float) -> dict:
    return {
        "arch": list(arch),
        "p_bound": p_bound,
        "seed": check.seed,
        "objective": check.objective,
        "form": check.form,
        "bigm_scale": big_m_scale,
        "features": np.asarray(data.features).tolist(),
        "labels": np.asarray(data.labels).tolist(),
        "oracle_optimum": check.oracle,
        "solver_objective": check.solver,
        "solver_status": check.status,
    }


def run_verification(arch=(2, 2, 2), p_bound=1, n_samples=3, seeds=range(5), objectives=None, forms=("indicator",),
                     big_m_scale=1.0, time_limit=600.0, counterexample_path=None, out=None) -> int:
    """Print a pass/fail table; return 0 when every check passes, else 1."""
    out = out or sys.stdout
    objectives = list(objectives or ("max-correct", "min-hinge", "sat-margin"))
    arch = [int(n) for n in arch]
    print(f"{'seed':>4}  {'objective':11}  {'form':10}  {'oracle':>10}  {'solver':>10}  {'status':16}  result", file=out)
    failure = None
    fmt = lambda v: "-" if v is None else f"{v:.6g}"
    for seed in seeds:
        data = random_instance(arch[0], n_samples, arch[-1], seed)
        for check in check_instance(data, arch, p_bound, objectives, forms, big_m_scale=big_m_scale,
                                    time_limit=time_limit, seed=seed):
            print(f"{check.seed:>4}  {check.objective:11}  {check.form:10}  {fmt(check.oracle):>10}  "
                  f"{fmt(check.solver):>10}  {check.status:16}  {'pass' if check.passed else 'FAIL'}", file=out)
            if not check.passed and failure is None:
                failure = counterexample(data, arch, p_bound, check, big_m_scale)
    if failure is None:
        print("all checks passed", file=out)
        return 0
    text = json.dumps(failure, indent=1)
    print("counterexample:", file=out)
    print(text, file=out)
    if counterexample_path:
        with open(counterexample_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 1
