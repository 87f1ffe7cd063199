"""Command line front end.

Four subcommands share one binary: `solve` runs an algorithm on an
instance and writes the trace CSV plus its summary sidecar, `analyze`
replays a trace and reports the active-set partition, identification
iteration, stability radius and fitted rates, `moduli` samples the
sharpness constants around the solution set, and `builtin-list` prints
the packaged instances.

Exit codes: 0 success (for solve: converged), 2 iteration limit hit,
1 everything else (bad flags, unreadable files, incompatible
algorithm/instance pairs).  All numeric output is written at 17
significant digits so identical invocations produce identical bytes;
the one exception is the wall_time_s line of the solve summary.
"""

import argparse
import logging
import os
import sys

from .fileio import FileFormatError, read_point, render_value
from .identification import (
    IdentificationError,
    PointOracle,
    classify,
    estimate_moduli,
    fit_two_stage,
    identification_iteration,
    partition_report_pairs,
    predicted_counts,
    stability_radius,
    write_analysis_report,
)
from .instances import BUILTIN_NAMES, InstanceError, builtin, load
from .linalg import PSeminorm
from .problem import PrimalDualPoint, ProblemError
from .solvers import (
    SolverConfig,
    SolverError,
    format_rows,
    read_summary,
    replay_config,
    run,
    seminorm_for,
    summary_path_for,
    write_trace,
)

log = logging.getLogger("saddlekit.cli")

# Partition tolerance applied to solver output.  Finals at the default
# kkt_tol carry constraint residuals around 1e-9, so the classification
# eps must sit above that or weakly active rows read as inactive.
_FINAL_EPS = 1e-8

# Auxiliary solves run this much tighter than the default solve tolerance.
_AUX_TIGHTEN = 10.0
_DEFAULT_KKT_TOL = 1e-10


def _instance(text, c1):
    """Resolve `builtin:name` or a problem file path.

    Returns (spec, name, known_solution).  File instances carry no
    exact solution description.
    """
    if text.startswith("builtin:"):
        desc = builtin(text[len("builtin:"):], c1=c1)
        return desc.spec, desc.name, desc.known_solution
    spec = load(text)
    return spec, spec.name or os.path.basename(text), None


def _compatible(spec, algorithm):
    if spec.problem_class == "QCQP":
        return algorithm == "egm"
    return True


def _stepsize(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real number or 'auto', got {text!r}")


def _init_spec(text):
    """Turn the --init flag into what SolverConfig accepts.

    zero and sphere:R pass through; file:path is read here so the
    solver only ever sees explicit points.
    """
    if text.startswith("file:"):
        return read_point(text[len("file:"):])
    return text


def cmd_solve(args):
    spec, name, _ = _instance(args.instance, args.c1)
    if not _compatible(spec, args.algo):
        print(
            f"saddlekit: error: {args.algo} requires affine constraints; "
            f"{name} is {spec.problem_class} (use egm)",
            file=sys.stderr,
        )
        return 1
    cfg = SolverConfig(
        algorithm=args.algo,
        stepsize=args.stepsize,
        max_iters=args.max_iters,
        kkt_tol=args.kkt_tol,
        seed=args.seed,
        init=_init_spec(args.init),
    )
    trace = run(spec, cfg, instance_label=name)
    log.info("%s on %s: %s after %d iterations", args.algo, name, trace.status, trace.iterations)
    if args.out is not None:
        write_trace(trace, args.out)
    if trace.status == "converged":
        return 0
    if trace.status == "iteration-limit":
        return 2
    print(f"saddlekit: error: {args.algo} diverged on {name}", file=sys.stderr)
    return 1


def _replay(args):
    """Re-run the solve recorded in the trace's summary sidecar.

    The CSV keeps scalar diagnostics only, so the iterates needed for
    identification come from a deterministic replay.  Comparing the
    replayed rows against the file detects a trace/instance mismatch.
    """
    with open(args.trace) as fh:
        file_rows = fh.read().splitlines()[1:]
    summary = read_summary(summary_path_for(args.trace))
    spec, name, _ = _instance(args.instance, args.c1)
    dims = (len(summary["initial.x"].split()), len(summary["initial.y"].split()))
    if dims != (spec.n, spec.m):
        raise IdentificationError(
            f"trace {args.trace} was recorded on a {dims[0]}x{dims[1]} problem "
            f"but {name} is {spec.n}x{spec.m}"
        )
    trace = run(spec, replay_config(summary, spec), instance_label=name)
    if format_rows(trace) != file_rows:
        raise IdentificationError(
            f"replaying {summary['algorithm']} on {name} does not reproduce "
            f"{args.trace}; the trace belongs to a different instance or build"
        )
    return trace, summary, spec, name


def cmd_analyze(args):
    trace, summary, spec, name = _replay(args)
    partition = classify(spec, trace.final, eps=args.eps)
    k_star = identification_iteration(trace, spec, partition)
    P = seminorm_for(spec, trace.algorithm, trace.stepsize)

    delta = binding_index = branch = None
    try:
        radius = stability_radius(spec, trace.final, partition, P)
        delta, binding_index, branch = radius.delta, radius.binding_index, radius.branch
    except IdentificationError as exc:
        log.info("stability radius unavailable: %s", exc)

    pre_rate = post_rate = post_halflife = None
    if k_star is not None:
        try:
            fit = fit_two_stage(trace, k_star)
            pre_rate, post_rate, post_halflife = fit.pre_rate, fit.post_rate, fit.post_halflife
        except IdentificationError as exc:
            log.info("rate fit unavailable: %s", exc)

    pairs = [("instance", name), ("algorithm", trace.algorithm), ("iterations", trace.iterations)]
    pairs += partition_report_pairs(partition)
    pairs += [
        ("k_star", k_star),
        ("delta", delta),
        ("binding_index", binding_index),
        ("branch", branch),
        ("pre_rate", pre_rate),
        ("post_rate", post_rate),
        ("post_halflife", post_halflife),
    ]
    write_analysis_report(args.out, [f"analyze {args.trace}"], pairs)
    return 0


def _solution_oracle(spec, name, known, args):
    """Exact solution set when the instance ships one, otherwise a
    point oracle from an authorized auxiliary solve."""
    if known is not None:
        return known
    if args.aux_iters <= 0:
        raise IdentificationError(
            f"{name} has no exact solution set; alpha_L needs one, and the "
            "reference point needs an auxiliary solve: authorize it with "
            "--aux-iters N (alpha_L stays disabled)"
        )
    cfg = SolverConfig(
        algorithm="egm" if spec.problem_class == "QCQP" else "admm",
        kkt_tol=_DEFAULT_KKT_TOL / _AUX_TIGHTEN,
        max_iters=args.aux_iters,
        seed=args.seed,
    )
    aux = run(spec, cfg, instance_label=name)
    if aux.status != "converged":
        raise IdentificationError(
            f"auxiliary solve stopped with status {aux.status}; raise --aux-iters"
        )
    log.info("auxiliary %s solve: %d iterations", cfg.algorithm, aux.iterations)
    return PointOracle(aux.final)


def cmd_moduli(args):
    if args.samples <= 0:
        print("saddlekit: error: --samples must be a positive count", file=sys.stderr)
        return 1
    spec, name, known = _instance(args.instance, args.c1)
    oracle = _solution_oracle(spec, name, known, args)
    z_star = oracle.representative()
    # Exact solution sets classify at the default tolerance; aux-solve
    # points carry residuals near the solver tolerance and need slack.
    partition = classify(spec, z_star) if known is not None else classify(
        spec, z_star, eps=_FINAL_EPS
    )
    P = PSeminorm.identity(spec.n, spec.m)
    est = estimate_moduli(
        spec, oracle, partition, P, tau=args.tau, num_samples=args.samples, seed=args.seed
    )
    radius = stability_radius(spec, z_star, partition, P)

    pairs = [("instance", name), ("tau", est.tau), ("seed", est.seed)]
    for sample in (est.alpha_G, est.alpha_L, est.alpha_M):
        if sample is None:
            pairs.append(("alpha_L", None))
            continue
        pairs += [
            (sample.name, sample.estimate),
            (f"{sample.name}.samples", sample.num_samples),
            (f"{sample.name}.region", sample.region),
        ]
    pairs += [
        ("ordering_consistent", est.ordering_consistent),
        ("delta", est.delta),
        ("binding_index", radius.binding_index),
        ("branch", radius.branch),
    ]
    # Iteration-count predictions at unit scaling; reported, never asserted.
    zero = PrimalDualPoint(0.0 * z_star.x, 0.0 * z_star.y)
    pairs += [
        (f"predicted.{key}", value)
        for key, value in predicted_counts(
            1.0, P, est, radius=radius, dist0=oracle.dist2(zero)
        )
    ]
    write_analysis_report(args.out, [f"moduli {name}"], pairs)
    return 0


def cmd_builtin_list(args):
    for name in BUILTIN_NAMES:
        desc = builtin(name)
        print(f"{name}: {desc.spec.problem_class}, n={desc.spec.n}, m={desc.spec.m}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="saddlekit",
        description="first-order saddle point solvers with identification diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one algorithm on one instance")
    solve.add_argument("--instance", required=True, help="problem file path or builtin:name")
    solve.add_argument("--algo", required=True, choices=("pdhg", "admm", "egm"))
    solve.add_argument("--stepsize", type=_stepsize, default="auto")
    solve.add_argument("--max-iters", type=int, default=1_000_000)
    solve.add_argument("--kkt-tol", type=float, default=_DEFAULT_KKT_TOL)
    solve.add_argument("--init", default="zero", help="zero, sphere:R, or file:path")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--out", default=None, help="trace CSV path (summary goes beside it)")
    solve.add_argument("--c1", type=float, default=0.6, help="rotated-house corner parameter")
    solve.set_defaults(func=cmd_solve)

    analyze = sub.add_parser("analyze", help="identification report for a recorded trace")
    analyze.add_argument("--trace", required=True, help="trace CSV written by solve")
    analyze.add_argument("--instance", required=True)
    analyze.add_argument(
        "--eps",
        type=float,
        default=_FINAL_EPS,
        help="activity tolerance for classifying the final iterate",
    )
    analyze.add_argument("--out", required=True, help="report path")
    analyze.add_argument("--c1", type=float, default=0.6)
    analyze.set_defaults(func=cmd_analyze)

    moduli = sub.add_parser("moduli", help="sample sharpness constants near the solution")
    moduli.add_argument("--instance", required=True)
    moduli.add_argument("--c1", type=float, default=0.6)
    moduli.add_argument("--tau", type=float, default=2.0, help="sampling shell width")
    moduli.add_argument("--samples", type=lambda s: int(float(s)), default=10_000)
    moduli.add_argument("--seed", type=int, default=0)
    moduli.add_argument("--out", required=True, help="report path")
    moduli.add_argument(
        "--aux-iters",
        type=int,
        default=0,
        help="iteration budget for the reference solve when the instance "
        "has no exact solution (0 refuses)",
    )
    moduli.set_defaults(func=cmd_moduli)

    listing = sub.add_parser("builtin-list", help="print the packaged instances")
    listing.set_defaults(func=cmd_builtin_list)
    return parser


def main(argv=None):
    level = os.environ.get("SADDLEKIT_LOG", "").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is taken by iteration-limit.
        return 0 if not exc.code else 1
    try:
        return args.func(args)
    except (
        ProblemError,
        SolverError,
        InstanceError,
        IdentificationError,
        FileFormatError,
        OSError,
    ) as exc:
        print(f"saddlekit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
