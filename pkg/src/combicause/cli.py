"""Command-line front end: ``combicause {discover,synth,eval,bench}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .baseline import DEFAULT_CANDIDATE_BUDGET, naive_h
from .candidates import write_dropped_csv
from .citest import BudgetExceeded, CITester, TestConfig
from .dataset import DataError, load_binarization, load_csv
from .mhpc import MhpcConfig, mh_pc, report, state_from_tpc, write_report

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_BUDGET = 3


class CliError(Exception):
    """Bad flags or input; reported with exit code 2."""


def _probability(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _count(low: int):
    def parse(text: str) -> int:
        value = int(text)
        if value < low:
            raise argparse.ArgumentTypeError(f"must be >= {low}, got {text}")
        return value
    return parse


def resolve_threads(flag: int | None) -> int:
    """``COMBICAUSE_THREADS`` beats ``--threads``; the default is every core."""
    env = os.environ.get("COMBICAUSE_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise CliError(f"COMBICAUSE_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise CliError("COMBICAUSE_THREADS must be >= 1")
        return value
    return flag if flag is not None else (os.cpu_count() or 1)


def _add_test_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("CI test")
    g.add_argument("--alpha-causal", type=_probability, default=0.05,
                   help="significance level of causal CI tests (default 0.05)")
    g.add_argument("--alpha-redundancy", type=_probability, default=0.01,
                   help="significance level of redundancy pruning (default 0.01)")
    g.add_argument("--max-k", type=_count(0), default=3,
                   help="largest conditioning set size (default 3)")
    g.add_argument("--statistic", choices=("g2", "x2"), default="g2")
    g.add_argument("--min-samples-per-dof", type=_count(0), default=5)


def _test_config(args) -> TestConfig:
    return TestConfig(alpha_causal=args.alpha_causal, alpha_redundancy=args.alpha_redundancy,
                      max_k=args.max_k, statistic=args.statistic,
                      min_samples_per_dof=args.min_samples_per_dof)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combicause", description="Discover single and combined causes of a binary target.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("discover", help="run MH-PC (or the naive baseline) on a CSV")
    d.add_argument("--input", required=True, help="CSV with a header row and 0/1 cells")
    d.add_argument("--target", required=True, help="name of the target column")
    d.add_argument("--k-max", type=_count(1), default=2, help="largest combination size (default 2)")
    d.add_argument("--variant", type=str.upper, choices=("F", "B"), default="F",
                   help="f: full forward conditioning; b: lower levels only")
    d.add_argument("--baseline", choices=("naive-h",), default=None,
                   help="run the naive expansion baseline instead of MH-PC")
    d.add_argument("--binarization", help="JSON map column -> category list")
    d.add_argument("--output", "-o", help="result JSON path (default: stdout)")
    d.add_argument("--dump-dropped", metavar="CSV", help="write redundancy-pruned members here")
    d.add_argument("--candidate-budget", type=_count(1), default=DEFAULT_CANDIDATE_BUDGET,
                   help="naive baseline: cap on expanded candidates")
    d.add_argument("--max-ci-tests", type=_count(1), default=None,
                   help="abort (exit 3) after this many CI tests")
    d.add_argument("--threads", type=_count(1), default=None)
    _add_test_flags(d)

    s = sub.add_parser("synth", help="generate a dataset with planted causes")
    s.add_argument("--preset", help="syn7, syn10, syn12, syn16, syn20, syn50 ... syn120")
    s.add_argument("--mode", choices=("bn_random", "logistic"))
    s.add_argument("--n-predictors", type=_count(1))
    s.add_argument("--n-rows", type=_count(1))
    s.add_argument("--n-single", type=_count(0))
    s.add_argument("--n-combined", type=_count(0))
    s.add_argument("--edge-density", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--stem", help="file stem (default: preset name or 'synthetic')")

    e = sub.add_parser("eval", help="score a result JSON against a ground-truth sidecar")
    e.add_argument("--found", required=True, help="result JSON from 'discover'")
    e.add_argument("--truth", required=True, help="ground-truth JSON from 'synth'")
    e.add_argument("--scope", choices=("combined_only", "all", "both"), default="both")
    e.add_argument("--output", "-o", help="report JSON path (default: stdout)")

    b = sub.add_parser("bench", help="timing sweeps over variables and rows")
    b.add_argument("--preset", default="quick", help="figures or quick (default quick)")
    b.add_argument("--input", action="append", default=[],
                   help="time existing CSVs instead of a generated sweep (repeatable)")
    b.add_argument("--target", default="T", help="target column of --input files")
    b.add_argument("--out", required=True, help="output directory for CSV, JSON and SVG")
    b.add_argument("--repeats", type=_count(1), help="best-of-N timing")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--no-naive", action="store_true", help="skip the naive baseline")
    b.add_argument("--naive-ci-budget", type=_count(1), help="CI-test cap for the naive baseline")
    _add_test_flags(b)
    return parser


def _emit(payload: dict, path: str | None) -> None:
    if path:
        write_report(path, payload)
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")


def cmd_discover(args) -> int:
    threads = resolve_threads(args.threads)
    cfg = _test_config(args)
    binarization = load_binarization(args.binarization) if args.binarization else None
    dataset = load_csv(args.input, args.target, binarization)
    echo = {"command": "discover", "input": args.input, "target": args.target,
            "k_max": args.k_max, "variant": args.variant, "baseline": args.baseline,
            "max_ci_tests": args.max_ci_tests, "threads": threads}
    tester = CITester(dataset, cfg, max_tests=args.max_ci_tests)
    t0 = time.perf_counter()
    if args.baseline == "naive-h":
        tpc = naive_h(dataset, args.k_max, budget=args.candidate_budget, tester=tester)
        state = state_from_tpc(tpc)
        state.n_ci_tests = tester.n_tests
        state.timings["total"] = time.perf_counter() - t0
        echo["candidate_budget"] = args.candidate_budget
    else:
        state = mh_pc(dataset, MhpcConfig(args.variant, args.k_max, cfg), threads=threads,
                      tester=tester)
        state.timings["total"] = time.perf_counter() - t0
    payload = report(state, dataset, cfg, {"config": echo})
    if args.dump_dropped:
        write_dropped_csv(state.pools.values(), dataset.names, args.dump_dropped)
    _emit(payload, args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import GenSpec, generate, preset, write_outputs

    overrides = {k: v for k, v in {
        "mode": args.mode, "n_predictors": args.n_predictors, "n_rows": args.n_rows,
        "n_single_causes": args.n_single, "n_combined_causes": args.n_combined,
        "edge_density": args.edge_density}.items() if v is not None}
    if args.preset:
        spec = preset(args.preset, seed=args.seed, **overrides)
        stem = args.stem or args.preset.lower().replace("-", "")
    else:
        needed = ("n_predictors", "n_rows", "n_single_causes", "n_combined_causes")
        missing = [n for n in needed if n not in overrides]
        if missing:
            raise CliError("without --preset, give --n-predictors, --n-rows, --n-single "
                           "and --n-combined")
        spec = replace(GenSpec(**{k: overrides[k] for k in needed}), seed=args.seed,
                       **{k: v for k, v in overrides.items() if k not in needed})
        stem = args.stem or "synthetic"
    dataset, truth = generate(spec)
    paths = write_outputs(dataset, truth, spec, args.out, stem)
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import load_found, score
    from .synth import GroundTruth

    found = load_found(args.found)
    truth = GroundTruth.load(args.truth)
    scopes = ("combined_only", "all") if args.scope == "both" else (args.scope,)
    payload = {"found": args.found, "truth": args.truth}
    for sc in scopes:
        payload[sc] = score(found, truth, sc).to_json()
    _emit(payload, args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import bench

    overrides = {"seed": args.seed, "test": _test_config(args)}
    if args.repeats:
        overrides["repeats"] = args.repeats
    if args.naive_ci_budget:
        overrides["naive_ci_budget"] = args.naive_ci_budget
    try:
        s = bench.suite(args.preset, **overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.no_naive:
        s = replace(s, algorithms=tuple(a for a in s.algorithms if a != "naive-h"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(r):
        print(f"{r.sweep:9s} {r.algorithm:8s} vars={r.n_variables:<4d} rows={r.n_rows:<7d} "
              f"t={r.wall_time_s:8.3f}s tests={r.n_ci_tests} {r.status}", file=sys.stderr)

    if args.input:
        records = bench.run_files(args.input, args.target, s, progress)
    else:
        records = bench.run_suite(s, progress=progress)
    bench.write_csv(records, out / "bench.csv")
    bench.write_json(records, s, out / "bench.json")
    bench.plot(records, out / "bench.svg")
    print(json.dumps({"csv": str(out / "bench.csv"), "json": str(out / "bench.json"),
                      "svg": str(out / "bench.svg")}))
    return EXIT_OK


COMMANDS = {"discover": cmd_discover, "synth": cmd_synth, "eval": cmd_eval, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    from .synth import SpecError

    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        return COMMANDS[args.command](args)
    except BudgetExceeded as exc:
        print(f"combicause: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (CliError, DataError, SpecError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"combicause: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
