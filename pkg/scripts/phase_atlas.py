"""Phase atlas over (N, alpha): separatrix value, stability regime and tail behaviour.

    python scripts/phase_atlas.py --dims 3-14 --alphas -1,0,1,2 --out runs/atlas --workers 4

Interrupted runs continue with ``--resume``. The table is written to
``<out>/table.json`` and summarised on stdout.
"""

import argparse
import logging

from henonlab.cli import parse_float_list, parse_int_list
from henonlab.sweep import RunConfig, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", default="3-14")
    ap.add_argument("--alphas", default="-1,0,1,2")
    ap.add_argument("--out", default="runs/atlas")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--beta1", action="store_true", help="bisect for the stability threshold where it exists")
    ap.add_argument("--resume", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    cfg = RunConfig(out=args.out, workers=args.workers, beta1=args.beta1, save_profiles=True, fixture=True)
    rows = run_sweep(parse_int_list(args.dims), parse_float_list(args.alphas), cfg, resume=args.resume)

    print(f"{'N':>3} {'alpha':>6} {'beta0':>14} {'regime':>12} {'beta1':>12}  samples")
    for rec in rows:
        if not rec.ok:
            print(f"{rec.N:>3} {rec.alpha:>6g}  failed: {rec.error}")
            continue
        b1 = f"{rec.beta1:.6f}" if rec.beta1 is not None else "-"
        samples = " ".join(s["classification"] for s in rec.samples)
        print(f"{rec.N:>3} {rec.alpha:>6g} {rec.beta0:>14.10f} {rec.regime:>12} {b1:>12}  {samples}")


if __name__ == "__main__":
    main()
