"""PSFor with random selection under increasing maximum delay D.

    python scripts/delay_sweep.py --delays 0,2,5,10 --seeds 0,1,2
"""

import argparse
import statistics

from projsplit.data import DatasetSpec
from projsplit.experiment import AlgorithmSpec, ExperimentSpec, prepare_problem, qe_to_reach, run_algorithm, with_overrides


def ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--d", type=int, default=1000)
    ap.add_argument("--r", type=int, default=10)
    ap.add_argument("--delays", type=ints, default=[0, 2, 10])
    ap.add_argument("--seeds", type=ints, default=[0, 1, 2])
    ap.add_argument("--target", type=float, default=1e-6)
    ap.add_argument("--budget", type=float, default=15000.0)
    args = ap.parse_args()

    spec = ExperimentSpec(dataset=DatasetSpec(m=args.m, d=args.d), budget_qe=args.budget, metrics_every=2)
    prep = prepare_problem(spec)
    print(f"lambda = {prep.problem.lam:.6g}; Q-eq to objective residual {args.target:g}")
    print(f"{'D':>4} " + " ".join(f"{'seed ' + str(s):>9}" for s in args.seeds) + f" {'median':>9}")
    for D in args.delays:
        algo = AlgorithmSpec("psfor", r=args.r, policy="random", delay=D)
        reach = []
        for s in args.seeds:
            q = qe_to_reach(run_algorithm(prep, algo, with_overrides(spec, seed=s)), args.target)
            reach.append(q if q is not None else float("inf"))
        print(f"{D:>4} " + " ".join(f"{q:>9.0f}" for q in reach) + f" {statistics.median(reach):>9.0f}")


if __name__ == "__main__":
    main()
