"""Command-line entry point: gen, analyze, solve, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Floats in emitted files use shortest round-trip formatting so outputs are
byte-stable across runs and platforms.
"""

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import report as report_mod
from . import simnet, solvers, spectral
from .errors import (
    ApcError,
    Diverged,
    IndexOutOfBounds,
    IndivisibleRows,
    InvalidDimensions,
    MalformedEntry,
    RankDeficientBlock,
    UnsupportedFormat,
)
from .ingest import (
    parse_matrix_market,
    partition_rows,
    permute_rows,
    synth_gaussian,
    write_matrix_market,
)
from .trace import fit_rate

USAGE_EXIT = 1
DATA_EXIT = 2
NUMERIC_EXIT = 3

DATA_ERRORS = (UnsupportedFormat, MalformedEntry, IndexOutOfBounds,
               InvalidDimensions, IndivisibleRows, RankDeficientBlock,
               FileNotFoundError, IsADirectoryError, PermissionError)

ALL_METHODS = ["dgd", "dnag", "dhbm", "admm", "cimmino", "consensus", "apc", "pdhbm"]
PARAM_FLAGS = ("gamma", "eta", "alpha", "beta", "xi", "nu")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(_sys.stderr)
        print(f"error: {message}", file=_sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser():
    parser = _Parser(prog="apc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic Gaussian system")
    gen.add_argument("n", type=int)
    gen.add_argument("N", type=int)
    gen.add_argument("mean", type=float)
    gen.add_argument("seed", type=int)
    gen.add_argument("--out", default=".", help="output directory")

    for name in ("analyze", "solve", "bench"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--input", help="Matrix Market file for A")
        p.add_argument("--rhs", help="right-hand-side vector file (one value per line)")
        p.add_argument("--rhs-seed", type=int, default=0,
                       help="seed for the planted x* when --rhs is absent")
        p.add_argument("--synthetic", help="n,N,mean,seed inline Gaussian system")
        p.add_argument("--m", type=int, default=2, help="number of workers")
        p.add_argument("--permute-seed", type=int, default=None,
                       help="seeded row permutation before partitioning")
        p.add_argument("--out", default=".", help="output directory")
        if name != "analyze":
            p.add_argument("--tol", type=float, default=solvers.DEFAULT_TOL)
            p.add_argument("--max-iters", type=int, default=None)
            p.add_argument("--simulate", action="store_true",
                           help="run through the message-passing harness")
            p.add_argument("--log-messages", action="store_true",
                           help="write a JSON-lines message log (with --simulate)")

    solve = sub.choices["solve"]
    solve.add_argument("--method", choices=ALL_METHODS,
                       help="required, on the command line or via --config")
    solve.add_argument("--optimal", action="store_true",
                       help="tune parameters from the spectrum")
    for flag in PARAM_FLAGS:
        solve.add_argument(f"--{flag}", type=float, default=None)
    solve.add_argument("--plot", action="store_true", help="render a decay figure")

    bench = sub.choices["bench"]
    bench.add_argument("--methods", default="all",
                       help="comma list of methods, or 'all'")
    bench.add_argument("--m-sweep", default=None,
                       help="comma list of worker counts to sweep")
    bench.add_argument("--no-plot", action="store_true",
                       help="skip figure rendering")
    return parser


def _apply_config(parser, args, argv):
    """Seed subcommand defaults from the JSON config, then re-parse so
    explicit flags keep precedence."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
    return parser.parse_args(argv)


def _read_vector(path):
    vals = []
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if ln and not ln.startswith("%"):
                vals.append(float(ln))
    return np.array(vals)


def _load_system(args):
    """Resolve (A, b, x_star) from --input/--rhs or --synthetic."""
    if args.synthetic:
        try:
            n, N, mean, seed = args.synthetic.split(",")
            n, N, seed = int(n), int(N), int(seed)
            mean = float(mean)
        except ValueError:
            raise InvalidDimensions(f"bad --synthetic spec: {args.synthetic!r}")
        A, b, x_star = synth_gaussian(n, N, mean, seed)
    elif args.input:
        with open(args.input) as fh:
            A = parse_matrix_market(fh)
        if args.rhs:
            b = _read_vector(args.rhs)
            if b.shape[0] != A.shape[0]:
                raise InvalidDimensions(
                    f"rhs length {b.shape[0]} != {A.shape[0]} rows")
            x_star = None
        else:
            # no real-world b: plant a consistent solution
            from .ingest import _box_muller
            rng = np.random.Generator(np.random.PCG64(args.rhs_seed))
            x_star = _box_muller(rng, A.shape[1])
            b = A @ x_star
    else:
        raise InvalidDimensions("one of --input or --synthetic is required")
    if args.permute_seed is not None:
        A, b = permute_rows(A, b, args.permute_seed)
    return A, b, x_star


def _partitioned(args, m=None):
    A, b, x_star = _load_system(args)
    return partition_rows(A, b, m if m is not None else args.m, x_star)


def _manifest(args, extra=None):
    cfg = {k: v for k, v in vars(args).items()
           if k not in ("command",) and v is not None}
    out = {"command": args.command, "config": cfg}
    if extra:
        out.update(extra)
    return out


def _write_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=report_mod._json_default)
        fh.write("\n")


def cmd_gen(args):
    if args.N < args.n:
        raise InvalidDimensions(f"N={args.N} < n={args.n}")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    A, b, x_star = synth_gaussian(args.n, args.N, args.mean, args.seed)
    stem = f"gauss_n{args.n}_N{args.N}_mean{args.mean:g}_seed{args.seed}"
    write_matrix_market(A, outdir / f"{stem}.mtx")
    with open(outdir / f"{stem}.x.txt", "w") as fh:
        for v in x_star:
            fh.write(f"{float(v)!r}\n")
    _write_json(_manifest(args, {
        "matrix": f"{stem}.mtx", "solution": f"{stem}.x.txt",
        "rows": args.N, "cols": args.n,
    }), outdir / f"{stem}.manifest.json")
    print(f"wrote {stem}.mtx, {stem}.x.txt, {stem}.manifest.json in {outdir}")
    return 0


def _tuned_methods(sys_, summary, methods):
    out = []
    for method in methods:
        try:
            out.append(report_mod.tune_method(sys_, method, summary))
        except ApcError as exc:
            out.append(spectral.MethodParams(method=method,
                                             params={"error": str(exc)}))
    return out


def cmd_analyze(args):
    sys_ = _partitioned(args)
    summary = spectral.compute_X(sys_)
    tuned = _tuned_methods(sys_, summary, ALL_METHODS)
    payload = spectral.summary_report(summary, tuned)
    payload["manifest"] = _manifest(args)
    text = json.dumps(payload, indent=2, default=report_mod._json_default)
    outdir = Path(args.out)
    if args.out != ".":
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "analysis.json", "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _explicit_params(args):
    given = {flag: getattr(args, flag) for flag in PARAM_FLAGS
             if getattr(args, flag) is not None}
    if args.optimal and given:
        raise SystemExit(_usage("--optimal and explicit parameters are mutually exclusive"))
    return given


def _usage(msg):
    print(f"error: {msg}", file=_sys.stderr)
    return USAGE_EXIT


def cmd_solve(args):
    if not args.method:
        raise SystemExit(_usage("--method is required"))
    if args.method not in ALL_METHODS:
        raise SystemExit(_usage(f"unknown method '{args.method}'"))
    sys_ = _partitioned(args)
    explicit = _explicit_params(args)
    method = args.method
    if args.optimal or not explicit:
        mp = report_mod.tune_method(sys_, method)
        params = dict(mp.params)
        params["T_predicted"] = mp.T_predicted
    else:
        params = dict(explicit)
        params["T_predicted"] = None
    budget = solvers.Budget(max_iters=args.max_iters, tol=args.tol)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    log_path = str(outdir / f"messages_{method}.jsonl") if (
        args.simulate and args.log_messages) else None
    try:
        if method == "pdhbm" and not args.simulate:
            trace = solvers.run_precond_dhbm(
                sys_, budget, params if explicit else None)
        elif args.simulate:
            trace = simnet.run_simulated(sys_, method, params, budget,
                                         log_messages=log_path)
        else:
            trace = solvers.run_engine(solvers.make_engine(sys_, method, params),
                                       budget, T_predicted=params.get("T_predicted"))
    except Diverged as exc:
        if exc.trace is not None:
            exc.trace.to_csv(outdir / f"trace_{method}.csv")
        print(f"diverged: {exc}", file=_sys.stderr)
        raise
    trace.to_csv(outdir / f"trace_{method}.csv")
    _write_json(_manifest(args, {"trace": f"trace_{method}.csv",
                                 "params": {k: v for k, v in params.items()
                                            if v is not None}}),
                outdir / f"solve_{method}.manifest.json")
    try:
        rate = fit_rate(trace)
        rate_str = f"{rate:.6f}"
    except ApcError:
        rate_str = "n/a (too few iterations)"
    print(f"method={method} iterations={trace.iterations} "
          f"final_error={trace.errors[-1]:.3e} fitted_rate={rate_str}")
    if getattr(args, "plot", False):
        from .plotting import render_decay
        render_decay([trace], outdir / f"decay_{method}.png")
    return 0


def _bench_one(args, m, outdir, methods):
    sys_ = _partitioned(args, m=m)
    budget = solvers.Budget(max_iters=args.max_iters, tol=args.tol)
    table = report_mod.build_comparison(sys_, methods, budget,
                                        simulate=args.simulate)
    suffix = f"_m{m}"
    table.to_csv(outdir / f"comparison{suffix}.csv")
    table.to_json(outdir / f"comparison{suffix}.json")
    traces = []
    for method in methods:
        try:
            mp = report_mod.tune_method(sys_, method)
            params = dict(mp.params)
            params["T_predicted"] = mp.T_predicted
            if method == "pdhbm":
                trace = solvers.run_precond_dhbm(sys_, budget)
            else:
                trace = solvers.run_engine(solvers.make_engine(sys_, method, params),
                                           budget, T_predicted=mp.T_predicted)
            trace.to_csv(outdir / f"decay_{method}{suffix}.csv")
            traces.append(trace)
        except ApcError:
            continue
    if not args.no_plot:
        from .plotting import render_decay, render_times
        if traces:
            render_decay(traces, outdir / f"decay{suffix}.png", title=f"m={m}")
        render_times(table, outdir / f"times{suffix}.png", title=f"m={m}")
    return table


def cmd_bench(args):
    if args.methods == "all":
        methods = list(ALL_METHODS)
    else:
        methods = [tok.strip() for tok in args.methods.split(",") if tok.strip()]
    if not methods:
        raise SystemExit(_usage("empty method set"))
    unknown = [mth for mth in methods if mth not in ALL_METHODS]
    if unknown:
        raise SystemExit(_usage(f"unknown methods: {', '.join(unknown)}"))
    ms = [args.m]
    if args.m_sweep:
        ms = [int(tok) for tok in args.m_sweep.split(",") if tok.strip()]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for m in ms:
        table = _bench_one(args, m, outdir, methods)
        print(f"m={m}")
        print(table.to_csv(), end="")
    _write_json(_manifest(args, {"m_values": ms, "methods": methods}),
                outdir / "bench.manifest.json")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, args, argv)
        handler = {"gen": cmd_gen, "analyze": cmd_analyze,
                   "solve": cmd_solve, "bench": cmd_bench}[args.command]
        return handler(args)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=_sys.stderr)
        return DATA_EXIT
    except ApcError as exc:
        print(f"numerical error: {exc}", file=_sys.stderr)
        return NUMERIC_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
