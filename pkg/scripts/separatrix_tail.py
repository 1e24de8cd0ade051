"""Follow the separatrix far out and record how it approaches the singular profile.

For every cell the script writes ``tail_N{N}_a{alpha}.csv`` with columns
``s, w, E`` (log radius, offset from the limit profile, Lyapunov energy) and
prints the sup of |w| per decade. In dimensions 3 and 4 the tail is not a
log profile, so the mass or coefficient report is printed instead.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from henonlab import io
from henonlab.asymptotics import check_limit_n5, coeffs_n3, energy, mass_n4
from henonlab.radial import ProblemParams, to_log
from henonlab.shooting import find_beta0, separatrix


def decade_sups(lp):
    out = []
    for k in range(int(math.floor(lp.s[-1] / math.log(10)))):
        sel = (lp.s >= k * math.log(10)) & (lp.s < (k + 1) * math.log(10))
        if sel.any():
            out.append(float(np.max(np.abs(lp.w[sel]))))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", default="3:0,4:0,4:2,5:0,6:0,6:1,13:0", help="N:alpha pairs")
    ap.add_argument("--r-target", type=float, default=1e6)
    ap.add_argument("--out", default="runs/tail")
    args = ap.parse_args()
    out = Path(args.out)

    for cell in args.cells.split(","):
        N, a = cell.split(":")
        params = ProblemParams(int(N), float(a))
        shot = find_beta0(params)
        r_target = min(args.r_target, 1e3) if params.N <= 4 else args.r_target
        sep = separatrix(shot, r_target)
        prof = sep.profile
        head = f"N={params.N} alpha={params.alpha:g} beta0={sep.beta0:.12f} reliable to r={sep.reliable_to:.3g}"
        if params.N == 3:
            print(head, io.to_jsonable(coeffs_n3(prof).to_dict()))
            continue
        lp = to_log(prof)
        io.write_columns(out / f"tail_N{params.N}_a{params.alpha:g}.csv", {"s": lp.s, "w": lp.w, "E": energy(lp)})
        if params.N == 4:
            print(head, io.to_jsonable(mass_n4(prof).to_dict()))
        else:
            rep = check_limit_n5(prof)
            sups = ", ".join(f"{x:.2e}" for x in decade_sups(lp))
            print(f"{head} tag={rep.tag} sup|w| per decade: {sups}")


if __name__ == "__main__":
    main()
