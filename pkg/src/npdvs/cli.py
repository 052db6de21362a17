"""``npdvs`` command line: simulate, check, analyze, sweep, compare.

Exit status: 0 success (no violations), 1 violations found, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments as ex
from .dvs_policies import EdvsPolicy, TdvsPolicy
from .loc import FormulaError, LocEvalError, analyze_distribution, check, parse_formula
from .npu_sim.config import ConfigError
from .trace_model import TraceParseError, read_trace, write_trace
from .traffic_gen import TrafficError

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _kcycle_list(text: str) -> tuple[int, ...]:
    return tuple(int(round(x * 1000)) for x in _floats(text))


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


def _names(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.replace(",", " ").split() if x)


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def _progress(args):
    if getattr(args, "quiet", False):
        return None
    return lambda msg: print(msg, file=sys.stderr)


def _run_spec(args) -> ex.RunSpec:
    base = ex.RunSpec()
    spec = ex.load_run_spec(args.config, base=base) if args.config else base
    if getattr(args, "seed", None) is not None:
        spec = spec.with_(npu=spec.npu.with_(seed=args.seed))
    if getattr(args, "policy", None) is not None:
        spec = spec.with_(policy=args.policy)
        spec.make_policy()
    return spec


def _read_trace(path):
    if not path:
        raise UsageError("--trace is required")
    return read_trace(path)


def cmd_simulate(args) -> int:
    spec = _run_spec(args)
    result = ex.simulate(spec)
    if args.out:
        write_trace(result.trace, args.out)
    else:
        write_trace(result.trace, sys.stdout)
    if args.stats:
        s = result.stats
        _write(args.stats, ",".join(s.CSV_FIELDS) + "\n" + ",".join(s.csv_row()) + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    if not args.formula:
        raise UsageError("--formula is required")
    formula = parse_formula(ex.resolve_formula(args.formula))
    if formula.kind != "assertion":
        raise UsageError("check needs an assertion (a relation such as <= or >=)")
    report = check(formula, _read_trace(args.trace))
    _write(args.out, report.format())
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def cmd_analyze(args) -> int:
    if not args.formula:
        raise UsageError("--formula is required")
    formula = parse_formula(ex.resolve_formula(args.formula))
    if formula.kind != "distribution":
        raise UsageError("analyze needs a distribution formula (><, <| or |>)")
    result = analyze_distribution(formula, _read_trace(args.trace))
    _write(args.out, result.to_csv())
    if args.gnuplot:
        _write(args.gnuplot, result.to_gnuplot())
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec_kw = {}
    policy = args.policy or "tdvs"
    if policy not in ("tdvs", "edvs"):
        raise UsageError("sweep --policy must be tdvs or edvs")
    if args.thresholds:
        spec_kw["thresholds"] = args.thresholds
    elif policy == "edvs":
        spec_kw["thresholds"] = (0.10,)
    if args.windows:
        spec_kw["windows"] = args.windows
    elif policy == "edvs":
        spec_kw["windows"] = ex.EDVS_WINDOWS
    args.policy = None
    base = _run_spec(args)
    seeds = args.seeds or (base.npu.seed,)
    spec = ex.SweepSpec(policy=policy, seeds=seeds, p=args.p, base=base, **spec_kw)
    result = ex.run_sweep(spec, _progress(args))
    _write(args.out, result.to_csv(averaged=args.averaged))
    if args.gnuplot:
        _write(args.gnuplot, result.to_gnuplot(args.surface))
    return EXIT_OK


def cmd_compare(args) -> int:
    args.policy = None
    base = _run_spec(args)
    table = base.npu.vf_table
    spec = ex.CompareSpec(
        benchmarks=args.benchmarks or ex.CompareSpec.benchmarks,
        levels=args.levels or ex.CompareSpec.levels,
        tdvs=TdvsPolicy(args.tdvs_threshold, int(round(args.tdvs_window * 1000)), table),
        edvs=EdvsPolicy(args.edvs_threshold, int(round(args.edvs_window * 1000)), table),
        seeds=args.seeds or (base.npu.seed,),
        base=base,
    )
    rows = ex.run_compare(spec, _progress(args))
    _write(args.out, ex.compare_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="npdvs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, trace=False, formula=False):
        if config:
            p.add_argument("--config", help="flat key = value config file")
            p.add_argument("--seed", type=int, help="override the config seed")
        if trace:
            p.add_argument("--trace", help="trace file to read")
        if formula:
            p.add_argument("--formula", help="LOC formula, or power100 / tput100")
        p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("simulate", help="run the NPU simulator and write a trace")
    common(p)
    p.add_argument("--policy", choices=ex.POLICIES, help="override dvs.policy")
    p.add_argument("--stats", help="write one-row summary CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="check an assertion against a trace")
    common(p, config=False, trace=True, formula=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("analyze", help="distribution of a formula over a trace")
    common(p, config=False, trace=True, formula=True)
    p.add_argument("--gnuplot", help="also write a two-column data file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="DVS parameter grid with percentile readouts")
    common(p)
    p.add_argument("--policy", choices=("tdvs", "edvs"))
    p.add_argument("--thresholds", type=_floats, help="Mbps for tdvs, idle fraction for edvs")
    p.add_argument("--windows", type=_kcycle_list, help="window sizes in kcycles")
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--p", type=float, default=0.8, help="percentile (default 0.8)")
    p.add_argument("--averaged", action="store_true", help="one seed-averaged row per point")
    p.add_argument("--gnuplot", help="write a threshold/window surface here")
    p.add_argument("--surface", default="p_power",
                   choices=("p_power", "p_throughput", "mean_power", "mean_throughput",
                            "transitions", "drops"))
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="baseline vs TDVS vs EDVS per benchmark and traffic level")
    common(p)
    p.add_argument("--benchmarks", type=_names)
    p.add_argument("--levels", type=_names)
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--tdvs-threshold", type=float, default=1000.0)
    p.add_argument("--tdvs-window", type=float, default=80.0, help="kcycles")
    p.add_argument("--edvs-threshold", type=float, default=0.10)
    p.add_argument("--edvs-window", type=float, default=40.0, help="kcycles")
    p.add_argument("--policy", help=argparse.SUPPRESS)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError, FormulaError, LocEvalError, TraceParseError,
            TrafficError, ValueError, OSError) as e:
        print(f"npdvs {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
