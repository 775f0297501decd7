"""Command-line front end: ``argen {solve,fit,tune,simulate,track,gen}``.

Every command writes its primary output into ``--out`` (default
``$ARGEN_OUTPUT_DIR`` or the working directory) together with a run
manifest, and is a pure function of its inputs, flags and seed.

Exit codes: 0 success, 1 usage or invalid input, 2 solver did not
converge (``solve`` only), 3 data errors, 4 infeasible bounds.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .model import (
    PRESETS,
    config_to_dict,
    fit,
    make_preset,
    read_dataset_csv,
    write_dataset_csv,
)
from .qp import SolverOptions, problem_from_dict, solution_to_dict, solve_qp
from .serialize import RunManifest, output_dir, write_json
from .simulate import (
    DEFAULT_N_CALLS,
    gen_example,
    gen_signal_recovery,
    run_benchmark,
    run_signal_recovery,
)
from .tracking import (
    InfeasibleBoundsError,
    read_prices_csv,
    run_tracking,
    synthetic_index,
    tracking_space,
    write_prices_csv,
)
from .tuning import SearchSpace, random_search, search_report

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3, 4

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "bounds": None,
    "tol": 1e-10,
    "max_iter": 200_000,
    "lambda1": 0.0,
    "lambda2": 0.0,
    "ncalls": None,
    "lambda1_up": 100,
    "lambda2_up": 100,
    "w_up": 2,
    "d_up": 2,
    "replicates": 50,
    "methods": "ARLS,ARGEN",
    "no_refit": False,
    "reduced": False,
    "assets": 20,
    "true_k": 5,
    "noise": 0.0,
    "dates": 400,
    "drift": False,
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


def _preset(name):
    key = name.upper()
    if key not in PRESETS:
        raise argparse.ArgumentTypeError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return key


def _common(p):
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", help=f"output directory (default ${'ARGEN_OUTPUT_DIR'} or .)")
    p.add_argument("--config", help="JSON file of flag values; explicit flags win")
    p.add_argument("--jobs", type=int, help="parallel workers; does not change results")


def build_parser():
    parser = _Parser(prog="argen", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"argen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve a QP given as JSON {A, b, d, v0, l}")
    p.add_argument("problem")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    _common(p)

    for name, text in (("fit", "fit one configuration"), ("tune", "random-search a preset")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--data", required=True, help="CSV with columns y,x1..xp[,split]")
        p.add_argument("--preset", required=True, type=_preset)
        p.add_argument("--bounds", help="'s,t' scalars or a JSON file {\"s\": [...], \"t\": [...]}")
        _common(p)
        if name == "fit":
            p.add_argument("--lambda1", type=float)
            p.add_argument("--lambda2", type=float)
        else:
            p.add_argument("--ncalls", type=int)
            p.add_argument("--lambda1-up", type=int)
            p.add_argument("--lambda2-up", type=int)
            p.add_argument("--w-up", type=int)
            p.add_argument("--d-up", type=int)

    p = sub.add_parser("simulate", help="replicate benchmark or signal recovery")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--example", type=int, choices=range(1, 9))
    g.add_argument("--signal", choices=("constant", "uniform"))
    p.add_argument("--methods", help="comma-separated presets (default ARLS,ARGEN)")
    p.add_argument("--replicates", type=int)
    p.add_argument("--ncalls", help="'default', an integer, or NAME=N,... per method")
    p.add_argument("--no-refit", action="store_true", default=None,
                   help="score the train-only fit instead of refitting on train+validation")
    p.add_argument("--reduced", action="store_true", default=None, help="smaller signal problem")
    _common(p)

    p = sub.add_parser("track", help="sparse index tracking")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--prices", help="CSV with columns date,ticker,adj_close")
    g.add_argument("--synthetic", action="store_true")
    p.add_argument("--n-stocks", type=int, required=True)
    p.add_argument("--bounds", help="'s,t' for every selected asset")
    p.add_argument("--ncalls", type=int)
    p.add_argument("--assets", type=int)
    p.add_argument("--true-k", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--dates", type=int)
    p.add_argument("--drift", action="store_true", default=None)
    _common(p)

    p = sub.add_parser("gen", help="write a generated dataset")
    p.add_argument("kind", choices=("example", "signal", "prices"))
    p.add_argument("--example", type=int, choices=range(1, 9))
    p.add_argument("--variant", choices=("constant", "uniform"), default="constant")
    p.add_argument("--reduced", action="store_true", default=None)
    p.add_argument("--assets", type=int)
    p.add_argument("--true-k", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--dates", type=int)
    _common(p)
    return parser


def _resolve(args):
    """Fill unset flags from ``--config`` and then from ``DEFAULTS``."""
    values = vars(args)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_DATA, f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise CliError(EXIT_USAGE, "config file must hold a JSON object")
        for key, val in cfg.items():
            key = key.replace("-", "_")
            if key in values and values[key] is None:
                values[key] = val
    for key, val in DEFAULTS.items():
        if key in values and values[key] is None:
            values[key] = val
    return args


def _settings(args, drop=("config", "out", "jobs", "command")):
    return {k: v for k, v in sorted(vars(args).items()) if k not in drop}


def _manifest(args, inputs=()):
    m = RunManifest(args.command, _settings(args), int(args.seed), version=__version__)
    for path in inputs:
        m.add_input(path)
    return m.to_dict()


def _read_data(path):
    try:
        return read_dataset_csv(path)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"cannot read data: {exc}") from None


def _bounds(spec, p):
    if spec is None:
        return None
    if isinstance(spec, str) and os.path.exists(spec):
        try:
            with open(spec) as fh:
                obj = json.load(fh)
            s, t = obj["s"], obj["t"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(EXIT_DATA, f"cannot read bounds file {spec}: {exc}") from None
    elif isinstance(spec, (list, tuple)) and len(spec) == 2:
        s, t = spec
    else:
        parts = str(spec).split(",")
        if len(parts) != 2:
            raise CliError(EXIT_USAGE, f"--bounds expects 's,t', got {spec!r}")
        s, t = parts
    try:
        s = np.broadcast_to(np.asarray(s, dtype=np.float64), (p,)).copy()
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (p,)).copy()
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"bad bounds: {exc}") from None
    if not np.all(np.isfinite(s)):
        raise CliError(EXIT_INFEASIBLE, "lower bounds must be finite")
    if np.any(s >= t):
        bad = [int(i) for i in np.flatnonzero(s >= t)]
        raise CliError(EXIT_INFEASIBLE, f"empty box: s >= t at {bad}")
    return s, t


def _out(args, name):
    return os.path.join(output_dir(args.out), name)


def cmd_solve(args):
    try:
        with open(args.problem) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read {args.problem}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_USAGE, f"{args.problem}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        problem = problem_from_dict(obj)
        options = SolverOptions(tol=float(args.tol), max_iter=int(args.max_iter))
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_USAGE, f"{args.problem}: {exc}") from None
    sol = solve_qp(problem, options)
    write_json(_out(args, "solution.json"),
               {"solution": solution_to_dict(sol), "manifest": _manifest(args, [args.problem])})
    print(f"objective {sol.objective:.6g}  iterations {sol.iterations}  converged {sol.converged}")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def _template(args, data):
    try:
        return make_preset(args.preset, data.p, _bounds(args.bounds, data.p))
    except CliError:
        raise
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None


def cmd_fit(args):
    data = _read_data(args.data)
    template = _template(args, data)
    values = {k: float(getattr(args, k)) for k in ("lambda1", "lambda2") if k in template.tunable}
    try:
        config = template.instantiate(**values)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    model = fit(data, config)
    report = {
        "preset": template.name,
        "beta": model.beta,
        "n_nonzero": model.n_nonzero,
        "converged": model.converged,
        "kkt_residual": model.kkt_residual,
        "iterations": model.iterations,
        "config": config_to_dict(config),
        "manifest": _manifest(args, [args.data]),
    }
    write_json(_out(args, "fit.json"), report)
    print("beta " + " ".join(f"{b:.6g}" for b in model.beta))
    return EXIT_OK


def cmd_tune(args):
    data = _read_data(args.data)
    template = _template(args, data)
    space = SearchSpace(lambda1_up=args.lambda1_up, lambda2_up=args.lambda2_up, w_up=args.w_up,
                        d_up=args.d_up, n_calls=args.ncalls or DEFAULT_N_CALLS[template.name],
                        seed=args.seed)
    try:
        best, records = random_search(data, space, template, jobs=int(args.jobs))
    except ValueError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    report = search_report(best, records)
    report["manifest"] = _manifest(args, [args.data])
    write_json(_out(args, "tune.json"), report)
    print(f"best validation MSE {best.validation_mse:.6g} over {len(records)} trials")
    return EXIT_OK


def _ncalls(spec, methods):
    if spec in (None, "default"):
        return {m: DEFAULT_N_CALLS[m] for m in methods}
    spec = str(spec)
    if "=" not in spec:
        try:
            return {m: int(spec) for m in methods}
        except ValueError:
            raise CliError(EXIT_USAGE, f"bad --ncalls {spec!r}") from None
    out = {m: DEFAULT_N_CALLS[m] for m in methods}
    for item in spec.split(","):
        name, _, val = item.partition("=")
        try:
            out[_preset(name.strip())] = int(val)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise CliError(EXIT_USAGE, f"bad --ncalls entry {item!r}: {exc}") from None
    return out


def cmd_simulate(args):
    if args.signal:
        res = run_signal_recovery(args.signal, args.seed, reduced=bool(args.reduced))
        path = _out(args, f"signal_{args.signal}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "beta_true", "beta_hat"])
            for i, (bt, bh) in enumerate(zip(res["beta_true"], res["beta_hat"])):
                writer.writerow([i, format(bt, ".17g"), format(bh, ".17g")])
        summary = {k: v for k, v in res.items() if k not in ("beta_true", "beta_hat")}
        summary["manifest"] = _manifest(args)
        write_json(_out(args, f"signal_{args.signal}.json"), summary)
        print(f"signal {args.signal}: MSE {res['mse']:.6g}")
        return EXIT_OK
    try:
        methods = [_preset(m.strip()) for m in str(args.methods).split(",") if m.strip()]
    except argparse.ArgumentTypeError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    if int(args.replicates) < 1:
        raise CliError(EXIT_USAGE, "--replicates must be >= 1")
    n_calls = _ncalls(args.ncalls, methods)
    result = run_benchmark(args.example, methods, int(args.replicates), n_calls, seed=args.seed,
                           refit=not args.no_refit, jobs=int(args.jobs))
    with open(_out(args, f"benchmark_ex{args.example}.csv"), "w", newline="") as fh:
        fh.write(result.rows_csv())
    summary = result.summary()
    summary["manifest"] = _manifest(args)
    write_json(_out(args, f"benchmark_ex{args.example}.json"), summary)
    for m, r in result.reports.items():
        print(f"{m:6s} median MSE {r.median:.6g} (SE {r.se:.6g}), failed {r.n_failed}")
    return EXIT_OK


def cmd_track(args):
    inputs = []
    if args.synthetic:
        frame, members, _ = synthetic_index(args.assets, args.true_k, args.noise, args.dates, args.seed)
    else:
        try:
            frame = read_prices_csv(args.prices)
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_DATA, f"cannot read prices: {exc}") from None
        inputs.append(args.prices)
        members = None
    N = int(args.n_stocks)
    if not 1 <= N <= frame.n_assets:
        raise CliError(EXIT_USAGE, f"--n-stocks must be in [1, {frame.n_assets}]")
    bounds = _bounds(args.bounds, N)
    space = tracking_space(args.ncalls or 200, args.seed)
    try:
        report = run_tracking(frame, N, bounds, space, drift=bool(args.drift))
    except InfeasibleBoundsError as exc:
        raise CliError(EXIT_INFEASIBLE, str(exc)) from None
    except ValueError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    if members is not None:
        report["true_constituents"] = members
    report["manifest"] = _manifest(args, inputs)
    write_json(_out(args, "tracking.json"), report)
    print(f"universe {len(report['universe'])}: TE {report['TE']:.6g} "
          f"(ARLS {report['baseline']['TE']:.6g}), ARV {report['ARV']:.6g}, CR {report['CR']:.6g}")
    return EXIT_OK


def cmd_gen(args):
    rng = np.random.default_rng(args.seed)
    if args.kind == "example":
        if args.example is None:
            raise CliError(EXIT_USAGE, "gen example needs --example")
        data, scen = gen_example(args.example, rng)
        name = f"example{args.example}"
    elif args.kind == "signal":
        data, scen = gen_signal_recovery(args.variant, args.seed, reduced=bool(args.reduced))
        name = f"signal_{args.variant}"
    else:
        frame, members, weights = synthetic_index(args.assets, args.true_k, args.noise,
                                                  args.dates, args.seed)
        write_prices_csv(frame, _out(args, "prices.csv"))
        write_json(_out(args, "prices.json"), {
            "constituents": members, "weights": weights, "manifest": _manifest(args)})
        print(f"wrote {len(frame.dates)} dates x {frame.n_assets} assets")
        return EXIT_OK
    write_dataset_csv(_out(args, f"{name}.csv"), data)
    s, t = scen.bounds
    write_json(_out(args, f"{name}.json"), {
        "beta_star": scen.beta_star, "noise_std": scen.noise_std, "q": scen.q,
        "s": [float(x) for x in s], "t": [float(x) for x in t], "manifest": _manifest(args)})
    print(f"wrote {data.n} rows x {data.p} predictors")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "fit": cmd_fit, "tune": cmd_tune, "simulate": cmd_simulate,
            "track": cmd_track, "gen": cmd_gen}


def main(argv=None):
    try:
        args = _resolve(build_parser().parse_args(argv))
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
