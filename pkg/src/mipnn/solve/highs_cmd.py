"""``mipnn-highs``: adapts the HiGHS solver to the external-solver protocol.

Usage::

    mipnn-highs MODEL.mps SOLUTION.sol [--time-limit S] [--target VALUE|none]

Requires the optional ``highspy`` package.
"""

from __future__ import annotations

import argparse
import math
import sys

from mipnn.solve.external import EXIT_ERROR, EXIT_INFEASIBLE, EXIT_NO_INCUMBENT, EXIT_OK


def _target(text):
    return None if text in (None, "none", "") else float(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mipnn-highs", description=__doc__.splitlines()[0])
    parser.add_argument("mps")
    parser.add_argument("sol")
    parser.add_argument("--time-limit", type=float, default=math.inf)
    parser.add_argument("--target", type=_target, default=None, help="stop once the objective is <= VALUE")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    try:
        import highspy
    except ImportError:
        print("mipnn-highs: the highspy package is not installed", file=sys.stderr)
        return EXIT_ERROR

    h = highspy.Highs()
    h.setOptionValue("output_flag", bool(args.verbose))
    h.setOptionValue("threads", args.threads)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    if math.isfinite(args.time_limit):
        h.setOptionValue("time_limit", float(args.time_limit))
    if h.readModel(args.mps) == highspy.HighsStatus.kError:
        print(f"mipnn-highs: cannot read {args.mps}", file=sys.stderr)
        return EXIT_ERROR

    reached = [False]
    if args.target is not None:
        def on_improving(event):
            if event.data_out.objective_function_value <= args.target + 1e-9:
                reached[0] = True

        def on_interrupt(event):
            if reached[0]:
                event.data_in.user_interrupt = True

        h.cbMipImprovingSolution.subscribe(on_improving)
        h.cbMipInterrupt.subscribe(on_interrupt)

    h.run()
    model_status = h.getModelStatus()
    info = h.getInfo()
    ms = highspy.HighsModelStatus
    if model_status == ms.kInfeasible:
        return EXIT_INFEASIBLE
    if info.primal_solution_status != 2:  # no feasible point
        if model_status in (ms.kTimeLimit, ms.kInterrupt, ms.kIterationLimit, ms.kSolutionLimit):
            return EXIT_NO_INCUMBENT
        print(f"mipnn-highs: {h.modelStatusToString(model_status)}", file=sys.stderr)
        return EXIT_ERROR

    if model_status == ms.kOptimal:
        status = "optimal"
    elif reached[0]:
        status = "feasible-stopped"
    else:
        status = "time-limit"
    values = h.getSolution().col_value
    lp = h.getLp()
    with open(args.sol, "w", encoding="utf-8") as fh:
        fh.write(f"# status: {status}\n")
        fh.write(f"# objective: {info.objective_function_value!r}\n")
        for name, value in zip(lp.col_names_, values):
            fh.write(f"{name} {value!r}\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
