"""Command line entry point: ``accelnmf {run,bench,calibrate,nnls-check}``."""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..accel import AccelConfig, calibrate_rho, cost_model, run_nmf
from ..linalg import nnz
from ..updates import Safeguards
from . import io
from .experiment import (
    ExperimentSpec, FileSource, parse_spec_file, parse_synth, run_experiment,
)
from .synth import init_factors


def _add_data_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", metavar="PATH", help="data matrix file")
    src.add_argument("--synth", metavar="KIND,M,N,R,DENSITY,NOISE",
                     help="synthetic data, e.g. planted-lowrank,200,200,10,1,0.05")
    p.add_argument("--format", default="mm", choices=sorted(io.FORMAT_ALIASES),
                   help="format of --input (default: mm)")
    p.add_argument("--data-seed", type=int, default=0, help="seed for --synth")
    p.add_argument("--rank", type=int, default=10)


def _add_algo_args(p):
    p.add_argument("--algo", choices=("mu", "hals", "pg"), default="mu")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=1e-16, help="MU lower bound")
    p.add_argument("--max-outer", type=int, default=None)
    p.add_argument("--time-budget", type=float, default=None, metavar="SECONDS")
    p.add_argument("--rho", choices=("model", "measured"), default="model",
                   help="source of the inner iteration budgets")


def _source(args):
    if args.input:
        return FileSource(args.input, args.format)
    if args.synth:
        return parse_synth(args.synth, args.data_seed)
    raise SystemExit("error: one of --input or --synth is required")


def _config(args, label=""):
    max_outer = args.max_outer
    if max_outer is None and args.time_budget is None:
        max_outer = 100
    return AccelConfig(algo=args.algo, alpha=args.alpha, epsilon=args.epsilon,
                       safeguards=Safeguards(delta=args.delta), max_outer=max_outer,
                       time_budget=args.time_budget, seed=args.seed,
                       rho_source=args.rho, label=label)


def cmd_run(args):
    M = _source(args).load()
    m, n = M.shape
    cfg = _config(args)
    init = init_factors(m, n, args.rank, args.seed, M)
    rho = calibrate_rho(M, init.W, init.H, cfg.algo) if cfg.rho_source == "measured" else None
    trace = run_nmf(M, init.W, init.H, cfg, rho=rho)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trace.csv"
    io.write_trace_csv(path, trace)
    if args.plot:
        from .plotting import plot_trace
        plot_trace(trace, out / "trace.png")
    print(f"{cfg.label}: {trace.outer_iterations} outer iterations, "
          f"error {trace.errors[0]:.6g} -> {trace.errors[-1]:.6g}, "
          f"budgets {trace.budgets}, trace written to {path}")
    return 0


def cmd_bench(args):
    if args.spec:
        spec = parse_spec_file(args.spec)
        spec.output = args.out or spec.output
        spec.plot = spec.plot or args.plot
    else:
        configs = [_config(args)]
        if args.alpha > 0 or args.epsilon > 0:
            # compare against the unaccelerated algorithm from the same starts
            plain = replace(configs[0], alpha=0.0, epsilon=0.0, label=args.algo.upper())
            configs.insert(0, plain)
        spec = ExperimentSpec(
            dataset=_source(args), rank=args.rank, configs=configs,
            seeds=list(range(args.seed, args.seed + args.seeds)),
            time_budget=args.time_budget, max_outer=configs[0].max_outer,
            output=args.out, plot=args.plot)
    spec.output = spec.output or "bench-out"
    result = run_experiment(spec)
    for key, value in result.summary:
        print(f"{key}={value}")
    print(f"# outputs in {spec.output}", file=sys.stderr)
    return 1 if not result.traces else 0


def cmd_calibrate(args):
    M = _source(args).load()
    m, n = M.shape
    init = init_factors(m, n, args.rank, args.seed, M)
    model = cost_model(m, n, args.rank, nnz(M))
    rho_w, rho_h = calibrate_rho(M, init.W, init.H, args.algo, args.repetitions)
    print(f"algo={args.algo}")
    print(f"m={m}\nn={n}\nr={args.rank}\nK={nnz(M)}")
    print(f"model_rho_w={model.rho_w!r}\nmodel_rho_h={model.rho_h!r}")
    print(f"measured_rho_w={rho_w!r}\nmeasured_rho_h={rho_h!r}")
    return 0


def cmd_nnls_check(args):
    from ..nnls import nnls_check_suite
    ok = True
    for name, passed, detail in nnls_check_suite(args.problems, args.seed):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="accelnmf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single configuration, writes trace.csv")
    _add_data_args(p)
    _add_algo_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run-out", metavar="DIR")
    p.add_argument("--plot", action="store_true", help="also write trace.png")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="multi-seed experiment, writes curves and summary")
    p.add_argument("spec", nargs="?", help="experiment spec file")
    _add_data_args(p)
    _add_algo_args(p)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, default=10, metavar="N", help="number of seeds")
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--plot", action="store_true", help="also write curves.png")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="measured vs flop-model rho")
    _add_data_args(p)
    p.add_argument("--algo", choices=("mu", "hals", "pg"), default="hals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=7)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("nnls-check", help="validate the NNLS oracle against brute force")
    p.add_argument("--problems", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_nnls_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
