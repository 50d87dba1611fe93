"""Report the calibrated lambda and solution sparsity for a dataset.

    python scripts/lambda_report.py --m 100 --d 1000 --seed 1
    python scripts/lambda_report.py --dataset data.csv
"""

import argparse

import numpy as np

from projsplit.data import DatasetSpec, load_dataset
from projsplit.lasso import LassoProblem, calibrate_lambda, oracle_solution


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--dataset", help="CSV or MatrixMarket file; synthetic data otherwise")
    ap.add_argument("--b-path")
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--d", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--fraction", type=float, default=0.1, help="target nonzero fraction")
    args = ap.parse_args()

    if args.dataset:
        fmt = "mtx" if args.dataset.endswith(".mtx") else "csv"
        ds = DatasetSpec(format=fmt, path=args.dataset, b_path=args.b_path)
    else:
        ds = DatasetSpec(m=args.m, d=args.d, seed=args.seed)
    Q, b = load_dataset(ds)
    lam_max = float(np.max(np.abs(Q.T @ b)))
    lam = calibrate_lambda(Q, b, args.fraction)
    print(f"Q is {Q.shape[0]}x{Q.shape[1]}, lambda_max = {lam_max:.6g}")
    print(f"{'lambda':>12} {'lambda/max':>11} {'nnz':>6} {'fraction':>9}")
    for scale in (4.0, 2.0, 1.0, 0.5, 0.25):
        lam_s = min(lam * scale, lam_max)
        x = oracle_solution(LassoProblem(Q, b, lam_s))
        nnz = int(np.count_nonzero(x))
        mark = "  <- calibrated" if scale == 1.0 else ""
        print(f"{lam_s:>12.6g} {lam_s / lam_max:>11.4f} {nnz:>6d} {nnz / Q.shape[1]:>9.3f}{mark}")


if __name__ == "__main__":
    main()
