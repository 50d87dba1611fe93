"""Compare PSFor, PSBack and FISTA on one lasso instance.

Writes per-algorithm CSVs and summary.csv to --out and prints Q-equivalents
needed to reach each objective-residual target.

    python scripts/compare_lasso.py --m 100 --d 1000 --budget 3000
"""

import argparse

from projsplit.data import DatasetSpec
from projsplit.experiment import ExperimentSpec, parse_algorithm, prepare_problem, qe_to_reach, run_experiment

DEFAULT_ALGOS = ["PSFor(10,G)", "PSFor(10,R)", "PSFor(10,2)", "PSBack(10,G)", "FISTA"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--d", type=int, default=1000)
    ap.add_argument("--data-seed", type=int, default=1)
    ap.add_argument("--lambda", dest="lam", default="auto-10pct")
    ap.add_argument("--budget", type=float, default=3000.0)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--rho", type=float, default=0.1)
    ap.add_argument("--algo", action="append", help="algorithm label; repeatable")
    ap.add_argument("--metrics-every", type=int, default=5)
    ap.add_argument("--out", default="results/compare")
    args = ap.parse_args()

    spec = ExperimentSpec(
        dataset=DatasetSpec(m=args.m, d=args.d, seed=args.data_seed),
        lam=args.lam if args.lam == "auto-10pct" else float(args.lam),
        algorithms=[parse_algorithm(a) for a in (args.algo or DEFAULT_ALGOS)],
        budget_qe=args.budget,
        gamma=args.gamma,
        rho=args.rho,
        metrics_every=args.metrics_every,
        out=args.out,
    )
    prep = prepare_problem(spec)
    print(f"lambda = {prep.problem.lam:.6g}, F* = {prep.f_star:.10g}")
    results = run_experiment(spec, prep)
    targets = (1e-2, 1e-4, 1e-6)
    print(f"{'algorithm':<16}" + "".join(f"{'QE to ' + format(t, 'g'):>14}" for t in targets))
    for label, val in results.items():
        if label == "summary":
            continue
        run, _ = val
        cells = [qe_to_reach(run, t) for t in targets]
        print(f"{label:<16}" + "".join(f"{c:>14.0f}" if c is not None else f"{'-':>14}" for c in cells))
    print(f"summary: {results['summary']}")


if __name__ == "__main__":
    main()
