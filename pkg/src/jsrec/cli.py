"""Command line interface: ``jsrec {generate,solve,diagnose,ensemble,rate-study}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure
(non-convergence under ``--strict``, or an unavailable estimate), 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import diagnostics as dg
from ._core import ConfigurationError, row_support
from .io import load_problem, save_problem, write_csv, write_json
from .operators import OperatorContext, forward_step, project_tau_ball
from .problems import ProblemSpec, generate, per_column_baseline, support_recovered
from .solver import SolverConfig, objective, optimality_residual, solve_context

TRACE_HEADER = ["iter", "objective", "step_norm", "fejer", "cbar"]


class NumericalFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _tau(text):
    return text if text == "auto" else _positive_float(text)


def _record(text):
    if text in ("none", "norms"):
        return text, None
    kind, _, cap = text.partition(":")
    if kind == "full":
        try:
            n = int(cap) if cap else 200
        except ValueError:
            n = 0
        if n >= 1:
            return "full", n
    raise argparse.ArgumentTypeError(f"expected none, norms or full:CAP with CAP >= 1, got {text!r}")


def _signal(text):
    if text == "gaussian":
        return "gaussian", 1.0
    kind, _, rate = text.partition(":")
    if kind == "decaying":
        try:
            return "decaying", float(rate) if rate else 1.0
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"expected gaussian or decaying:RATE, got {text!r}")


def _add_problem_flags(p):
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--omega", type=int, required=True)
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sensing", choices=["gaussian", "identity", "orthonormal"], default="gaussian")
    p.add_argument("--signal", type=_signal, default=("gaussian", 1.0),
                   help="gaussian | decaying:RATE")
    p.add_argument("--declared-omega", type=int, default=None,
                   help="width of the expansion before truncation to --omega")


def _add_solver_flags(p):
    p.add_argument("--tau", type=_tau, default="auto")
    p.add_argument("--mu", type=_positive_float, default=1.0)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--record", type=_record, default=("norms", None),
                   help="none | norms | full:CAP")
    p.add_argument("--strict", action="store_true",
                   help="exit with status 2 if max-iters is reached")


def _spec(args, seed=None):
    signal, rate = args.signal
    return ProblemSpec(
        m=args.m, N=args.N, omega=args.omega, sparsity=args.sparsity,
        sensing=args.sensing, signal=signal, decay_rate=rate,
        declared_omega=args.declared_omega, noise_sigma=args.noise,
        seed=args.seed if seed is None else seed,
    )


def _config(args):
    record, cap = args.record
    kw = {"history_cap": cap} if cap else {}
    return SolverConfig(tau=args.tau, mu=args.mu, max_iters=args.max_iters, tol=args.tol,
                        record=record, **kw)


def _context(inst, config):
    return OperatorContext(inst.A, inst.u, config.tau, config.mu,
                           rel_tol=config.spectral_rel_tol, seed=config.seed)


def _check_strict(args, termination):
    if args.strict and termination == "max_iters":
        raise NumericalFailure(f"no convergence within {args.max_iters} iterations")


def _trace_rows(ctx, x0, n, x_star):
    P_star = project_tau_ball(ctx.tau, forward_step(ctx, x_star))
    rows, prev = [], None
    for k, x in enumerate(dg.replay(ctx, x0, n)):
        if prev is not None:
            rows[-1][2] = float(np.linalg.norm(x - prev))
        dp = project_tau_ball(ctx.tau, forward_step(ctx, x)) - P_star
        rows.append([k, objective(ctx, x), float("nan"),
                     float(np.linalg.norm(x - x_star)), float(np.sum(dp * dp))])
        prev = x
    return rows


def cmd_generate(args):
    inst = generate(_spec(args))
    save_problem(args.out, inst)
    print(f"wrote {args.out}: m={inst.A.shape[0]} N={inst.A.shape[1]} "
          f"omega={inst.u.shape[1]} tail_energy={inst.tail_energy!r}")


def cmd_solve(args):
    inst = load_problem(args.inp)
    config = _config(args)
    ctx = _context(inst, config)
    res = solve_context(ctx, config)
    report = {
        "iterations": res.iterations,
        "termination": res.termination,
        "tau": res.tau,
        "mu": res.mu,
        "spectral_bound": res.spectral_bound,
        "objective": objective(ctx, res.x),
        "optimality_residual": optimality_residual(ctx, res.x),
        "support": row_support(res.x),
    }
    if res.history is not None:
        report["history_iterations"] = [k for k, _ in res.history]
    if args.out:
        write_json(args.out, {"x": res.x})
    if args.report:
        write_json(args.report, report)
    if args.trace:
        write_csv(args.trace, TRACE_HEADER, _trace_rows(ctx, res.x0, res.iterations, res.x))
    print(f"{res.termination} after {res.iterations} iterations, "
          f"objective={report['objective']!r}")
    _check_strict(args, res.termination)


def diagnostics_dict(rep):
    p, c = rep.partition, rep.convergence
    return {
        "tau": rep.tau,
        "mu": rep.mu,
        "solve": {"iterations": rep.solve_iterations, "termination": rep.solve_termination,
                  "optimality_residual": rep.optimality_residual,
                  "distance_to_reference": rep.distance_to_reference},
        "reference": {"iterations": rep.reference_iterations,
                      "termination": rep.reference_termination},
        "partition": {"L": p.L, "E": p.E, "support": p.support, "ambiguous": p.ambiguous,
                      "omega": p.omega, "omega_alt": p.omega_alt,
                      "grad_row_norms": p.grad_row_norms,
                      "optimality_residual": p.optimality_residual},
        "finite_convergence": {"bound": c.finite_conv_bound,
                               "L_nonzero_count": c.L_nonzero_count,
                               "L_zero_iteration": c.L_zero_iteration},
        "angular": {"rows": c.angular.rows, "max_tail": c.angular.max_tail(),
                    "cbar_sum": c.cbar_sum, "x0_distance_sq": c.x0_distance_sq},
        "q1_measured": c.q1_measured,
        "checks": rep.checks(),
    }


def cmd_diagnose(args):
    inst = load_problem(args.inp)
    config = _config(args)
    ctx = _context(inst, config)
    ref_cfg = dg.REFERENCE_CONFIG.replace(tol=args.ref_tol, max_iters=args.ref_max_iters)
    rep = dg.diagnose(ctx, config, reference_config=ref_cfg, class_tol=args.class_tol)
    if args.report:
        write_json(args.report, diagnostics_dict(rep))
    if args.trace:
        write_csv(args.trace, TRACE_HEADER,
                  _trace_rows(ctx, None, rep.reference_iterations, rep.x_ref))
    if args.angles:
        ang = rep.convergence.angular
        order = np.argsort(ang.rows, kind="stable")
        header = ["iter"] + [f"theta_{j}" for j in ang.rows[order]]
        write_csv(args.angles, header,
                  ([k] + list(row[order]) for k, row in enumerate(ang.theta)))
    failed = [k for k, ok in rep.checks().items() if not ok]
    print(f"{rep.solve_termination} after {rep.solve_iterations} iterations; "
          f"|L|={rep.partition.L.size} |E|={rep.partition.E.size}; "
          f"failed checks: {', '.join(failed) if failed else 'none'}")
    _check_strict(args, rep.solve_termination)


def cmd_ensemble(args):
    config = _config(args).replace(record="none")
    trials = []
    for t in range(args.trials):
        inst = generate(_spec(args, seed=args.seed + t))
        ctx = _context(inst, config)
        res = solve_context(ctx, config)
        xb = per_column_baseline(inst.A, inst.u, config, spectral_bound=ctx.spectral_bound)
        trials.append({"seed": args.seed + t,
                       "joint": support_recovered(res.x, inst.support),
                       "baseline": support_recovered(xb, inst.support),
                       "termination": res.termination})
        _check_strict(args, res.termination)
    n = max(len(trials), 1)
    report = {"trials": trials,
              "joint_rate": sum(t["joint"] for t in trials) / n,
              "baseline_rate": sum(t["baseline"] for t in trials) / n}
    if args.report:
        write_json(args.report, report)
    print(f"exact support recovery: joint {report['joint_rate']!r}, "
          f"per-column {report['baseline_rate']!r}")


def rate_study_dict(rs):
    return {"E": rs.E, "lambda_min_E": rs.lambda_min_E, "lambda_max": rs.lambda_max,
            "gamma": rs.gamma, "tau": rs.tau, "q1_bound": rs.q1_bound,
            "q1_measured": rs.q1_measured, "slack": rs.slack, "holds": rs.holds,
            "iterations": rs.iterations}


def cmd_rate_study(args):
    inst = load_problem(args.inp)
    lam = args.lambda_min_E if args.lambda_min_E == "auto" else _positive_float(args.lambda_min_E)
    rs = dg.rate_study(inst.A, inst.u, mu=args.mu, lambda_min_E=lam, slack=args.slack)
    report = rate_study_dict(rs)
    if args.report:
        write_json(args.report, report)
    print(f"q1_measured={rs.q1_measured!r} q1_bound={rs.q1_bound!r} holds={rs.holds}")
    if rs.q1_measured is None:
        raise dg.EstimateUnavailable("q1 could not be measured")


def build_parser():
    parser = _Parser(prog="jsrec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic problem file")
    _add_problem_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("--in", dest="inp", required=True)
    _add_solver_flags(p)
    p.add_argument("--out", help="write the solution matrix as JSON")
    p.add_argument("--report")
    p.add_argument("--trace", help=f"CSV with columns {','.join(TRACE_HEADER)}")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diagnose", help="solve and check the convergence properties")
    p.add_argument("--in", dest="inp", required=True)
    _add_solver_flags(p)
    p.add_argument("--ref-tol", type=float, default=dg.REFERENCE_CONFIG.tol)
    p.add_argument("--ref-max-iters", type=int, default=dg.REFERENCE_CONFIG.max_iters)
    p.add_argument("--class-tol", type=float, default=1e-7)
    p.add_argument("--report")
    p.add_argument("--trace")
    p.add_argument("--angles", help="wide CSV of angle traces for the rows in E")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("ensemble", help="joint vs per-column support recovery rates")
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--report")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("rate-study", help="measured vs predicted q-linear factor")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--mu", type=_positive_float, default=1.0)
    p.add_argument("--lambda-min-E", default="auto")
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--report")
    p.set_defaults(func=cmd_rate_study)
    return parser


def run(argv=None):
    """Execute one command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except json.JSONDecodeError as exc:
        print(f"jsrec: cannot parse input: {exc}", file=sys.stderr)
        return 3
    except ConfigurationError as exc:
        print(f"jsrec: configuration error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, dg.EstimateUnavailable) as exc:
        print(f"jsrec: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"jsrec: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
