"""Command-line front end.

Verbs: ``solve`` (one or more algorithms), ``sweep`` (grid over r, D,
policy and b), ``synth`` (write a synthetic dataset) and ``presets``.
Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .data import FORMATS, DatasetSpec, synthetic, write_dense_csv, write_matrix_market
from .errors import ConfigError, DataError, NumericalError, ProjSplitError
from .experiment import (
    DATASET_PRESETS,
    PRESETS,
    AlgorithmSpec,
    algorithm_from,
    load_config,
    parse_algorithm,
    resolve_preset,
    run_experiment,
    spec_from_dict,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None

    return parse


def _add_experiment_flags(p: argparse.ArgumentParser, sweep: bool) -> None:
    p.add_argument("--config", help="YAML experiment file; flags override its values")
    p.add_argument("--preset", help="named preset, e.g. random-psfor-10G")
    p.add_argument("--dataset", help="path to a CSV or MatrixMarket data file")
    p.add_argument("--format", choices=FORMATS, help="dataset format (default: synthetic without --dataset)")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None, help="unit-norm columns")
    p.add_argument("--b-column", type=int, help="column of the data file holding b")
    p.add_argument("--b-path", help="separate file holding b")
    p.add_argument("--m", type=int, help="synthetic rows")
    p.add_argument("--d", type=int, help="synthetic columns")
    p.add_argument("--data-seed", type=int, help="synthetic data seed")
    p.add_argument("--lambda", dest="lam", help="l1 weight or 'auto-10pct'")
    if sweep:
        p.add_argument("--algo", type=_csv_list(str), help="comma list of psfor, psback, fista")
        p.add_argument("--blocks", type=_csv_list(int), help="comma list of block counts r")
        p.add_argument("--policy", type=_csv_list(str), help="comma list of rr, random, greedy")
        p.add_argument("--delay", type=_csv_list(int), help="comma list of maximum delays D")
        p.add_argument("--per-iter", type=_csv_list(int), help="comma list of blocks per iteration b")
    else:
        p.add_argument("--algo", action="append", help="algorithm, e.g. 'PSFor(10,G)'; repeatable")
        p.add_argument("--blocks", type=int, help="override r")
        p.add_argument("--policy", choices=("rr", "random", "greedy"), help="override the selection policy")
        p.add_argument("--delay", type=int, help="override the maximum delay D")
        p.add_argument("--per-iter", type=int, help="override blocks per iteration b")
    p.add_argument("--budget-qe", type=float, help="Q-equivalent budget per algorithm")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--seed", type=int, help="solver seed (policy and delays)")
    p.add_argument("--gamma", type=float)
    p.add_argument("--rho", type=float, help="fixed PSBack stepsize")
    p.add_argument("--cg-max-iter", type=int, help="CG iteration cap for PSBack")
    p.add_argument("--metrics-every", type=int)
    p.add_argument("--jobs", type=int, help="algorithms run concurrently")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="projsplit", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    _add_experiment_flags(sub.add_parser("solve", help="run algorithms on one dataset"), sweep=False)
    _add_experiment_flags(sub.add_parser("sweep", help="run a grid of algorithm variants"), sweep=True)
    s = sub.add_parser("synth", help="write a synthetic Gaussian dataset")
    s.add_argument("--m", type=int, default=100)
    s.add_argument("--d", type=int, default=1000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--format", choices=("csv", "mtx"), default="csv")
    s.add_argument("--out", required=True, help="output file; b is the last CSV column or a separate .b.mtx file")
    sub.add_parser("presets", help="list named presets")
    return parser


def _base_config(args) -> dict:
    raw: dict = {}
    if args.config:
        raw.update(load_config(args.config))
    if args.preset:
        preset = resolve_preset(args.preset)
        # a config file wins over preset defaults only where the preset is silent
        raw = {**preset, **{k: v for k, v in raw.items() if k not in preset}}
    ds = dict(raw.get("dataset") or {})
    if args.dataset:
        ds["path"] = args.dataset
        if ds.get("format") in (None, "synthetic"):
            ds["format"] = "mtx" if args.dataset.endswith(".mtx") else "csv"
    for flag, key in (
        ("format", "format"),
        ("normalize", "normalize"),
        ("b_column", "b_column"),
        ("b_path", "b_path"),
        ("m", "m"),
        ("d", "d"),
        ("data_seed", "seed"),
    ):
        val = getattr(args, flag)
        if val is not None:
            ds[key] = val
    raw["dataset"] = ds
    for flag, key in (
        ("lam", "lam"),
        ("budget_qe", "budget_qe"),
        ("max_iterations", "max_iterations"),
        ("seed", "seed"),
        ("gamma", "gamma"),
        ("rho", "rho"),
        ("cg_max_iter", "cg_max_iter"),
        ("metrics_every", "metrics_every"),
        ("jobs", "jobs"),
        ("out", "out"),
    ):
        val = getattr(args, flag)
        if val is not None:
            raw[key] = val
    return raw


def _solve_algorithms(args, raw) -> list:
    algos = [parse_algorithm(a) for a in args.algo] if args.algo else None
    if algos is None:
        entries = raw.get("algorithms") or ["PSFor(10,G)"]
        algos = [a if isinstance(a, AlgorithmSpec) else algorithm_from(a) for a in entries]
    overrides = {
        k: v
        for k, v in (("r", args.blocks), ("policy", args.policy), ("delay", args.delay), ("per_iter", args.per_iter))
        if v is not None
    }
    if overrides:
        algos = [a if a.name == "fista" else AlgorithmSpec(**{**a.__dict__, **overrides}) for a in algos]
    return algos


def _sweep_algorithms(args) -> list:
    names = args.algo or ["psfor"]
    grid = itertools.product(
        args.blocks or [10], args.policy or ["greedy"], args.delay or [0], args.per_iter or [1]
    )
    grid = list(grid)
    algos, seen = [], set()
    for name in names:
        combos = [None] if name.lower() == "fista" else grid
        for combo in combos:
            if combo is None:
                algo = AlgorithmSpec(name="fista")
            else:
                r, policy, delay, b = combo
                if b > r:
                    continue
                algo = AlgorithmSpec(name=name, r=r, policy=policy, delay=delay, per_iter=b)
            if algo.label not in seen:
                seen.add(algo.label)
                algos.append(algo)
    return algos


def _print_summary(results) -> None:
    print(f"{'algorithm':<22} {'status':<20} {'iters':>8} {'Q-eq':>10} {'obj resid':>12} {'subgrad':>12}")
    for label, val in results.items():
        if label == "summary":
            continue
        run, _ = val
        last = run.records[-1]
        obj = next((r.objective_residual for r in reversed(run.records) if r.objective_residual is not None), None)
        sub = next((r.subgrad_residual for r in reversed(run.records) if r.subgrad_residual is not None), None)
        fmt = lambda v: f"{v:12.3e}" if v is not None else f"{'-':>12}"
        print(f"{label:<22} {run.status.value:<20} {last.k:>8} {run.q_equivalents:>10.1f} {fmt(obj)} {fmt(sub)}")
    print(f"summary: {results['summary']}")


def _cmd_experiment(args, sweep: bool) -> int:
    raw = _base_config(args)
    raw["algorithms"] = _sweep_algorithms(args) if sweep else _solve_algorithms(args, raw)
    try:
        spec = spec_from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    results = run_experiment(spec)
    _print_summary(results)
    return EXIT_OK


def _cmd_synth(args) -> int:
    Q, b = synthetic(args.m, args.d, args.seed)
    out = Path(args.out)
    if args.format == "csv":
        write_dense_csv(out, Q, b)
    else:
        write_matrix_market(out, Q)
        write_matrix_market(out.with_suffix(".b.mtx"), b.reshape(-1, 1))
    print(f"wrote {args.m}x{args.d} synthetic data to {out}")
    return EXIT_OK


def _cmd_presets() -> int:
    print(f"{'preset':<24} {'algorithm':<14} {'gamma':>7} {'rho':>7} {'lambda':>7}")
    for name, (ds, algo) in PRESETS.items():
        v = DATASET_PRESETS[ds]
        print(f"{name:<24} {algo:<14} {v['gamma']:>7g} {v['rho']:>7g} {v['lam']:>7g}")
    print("gene, drivFace and hand need --dataset PATH; random is synthetic 1000x10000.")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        if args.verb == "synth":
            return _cmd_synth(args)
        if args.verb == "presets":
            return _cmd_presets()
        return _cmd_experiment(args, sweep=args.verb == "sweep")
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ProjSplitError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
