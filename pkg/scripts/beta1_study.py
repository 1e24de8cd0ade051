"""Locate the stability threshold beta1 for 5 <= N < N_alpha and check it against its bounds.

The interval between the Hardy-sufficient value and beta0 must contain beta1.
For each cell the script reports the bracket, both certificates and the
smallest eigenvalue just above and just below the threshold.
"""

import argparse

from henonlab import io
from henonlab.radial import ProblemParams
from henonlab.shooting import find_beta0
from henonlab.stability import find_beta1, n_alpha, stability_certificate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", default="5,6,8,10,12")
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("--tol", type=float, default=1e-4)
    ap.add_argument("--out", default="runs/beta1.json")
    args = ap.parse_args()

    rows = []
    for N in (int(x) for x in args.dims.split(",")):
        if N >= n_alpha(args.alpha):
            print(f"N={N}: at or above N_alpha={n_alpha(args.alpha):.4f}, every global solution is stable")
            continue
        params = ProblemParams(N, args.alpha)
        b0 = find_beta0(params).beta0
        res = find_beta1(params, b0, args.tol)
        lo = stability_certificate(params.with_beta(res.beta1 - 10 * args.tol), b0)
        hi = stability_certificate(params.with_beta(res.beta1 + 10 * args.tol), b0)
        row = {
            "N": N, "alpha": args.alpha, "beta0": b0, "beta1": res.beta1, "bracket": res.bracket,
            "hardy_sufficient": res.beta_hardy, "below": lo.reason, "above": hi.reason,
            "eig_below": lo.eig.value if lo.eig else None, "eig_above": hi.eig.value if hi.eig else None,
        }
        rows.append(row)
        print(f"N={N}: beta1={res.beta1:.6f} in [{res.beta_hardy:.4f}, {b0:.6f}]  "
              f"below: {lo.reason}  above: {hi.reason}")
    io.write_json(args.out, rows)


if __name__ == "__main__":
    main()
