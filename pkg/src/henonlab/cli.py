"""Command-line front end.

Every subcommand prints a JSON report on stdout and, with ``--out``, writes
its files there. Exit status is 0 on success, 2 when an input violates a
precondition of the problem and 3 when the numerics could not decide.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import io
from .asymptotics import check_limit_n5, coeffs_n3, energy, energy_trace, mass_n4
from .errors import NoEntireSolution, NumericalInconclusive, ParameterError
from .radial import ProblemParams, integrate, to_log
from .second_order import (
    SecondOrderParams,
    integrate2,
    singular_offset_error,
    singular_solution,
    threshold2,
    witness2,
)
from .shooting import find_beta0, separatrix, verify_bounds
from .stability import n_alpha, stability_report
from .sweep import RunConfig, load_config, run_sweep

log = logging.getLogger("henonlab")

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_INCONCLUSIVE = 3


# -- argument helpers ---------------------------------------------------------------


def parse_int_list(text: str) -> list:
    """``"5-14"``, ``"3,4,10"`` or a mix of both; an empty string gives no values."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        a, sep, b = part.partition("-")
        out.extend(range(int(a), int(b) + 1) if sep else [int(a)])
    return out


def parse_float_list(text: str) -> list:
    return [float(p) for p in text.split(",") if p.strip()]


def parse_domain(text: str) -> tuple:
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ParameterError(f"domain must look like r_a:r_b, got {text!r}") from exc
    if not 0 <= a < b:
        raise ParameterError("domain must satisfy 0 <= r_a < r_b")
    return a, b


def _config(args) -> RunConfig:
    overrides = {
        "tol": getattr(args, "tol", None),
        "r_max": getattr(args, "r_max", None),
        "grid": getattr(args, "grid", None),
        "out": getattr(args, "out", None),
        "tol_beta": getattr(args, "tol_beta", None),
        "workers": getattr(args, "workers", None),
    }
    for flag in ("fixture", "beta1", "save_profiles"):
        if getattr(args, flag, False):
            overrides[flag] = True
    cfg = load_config(args.config, **overrides)
    if cfg.r_cap < cfg.r_max:
        cfg = cfg.replace(r_cap=cfg.r_max)
    return cfg


def _emit(report: dict, out: Optional[str], name: str) -> dict:
    sys.stdout.write(io.dumps(report))
    if out:
        io.write_json(Path(out) / name, report)
    return report


def _beta0(params: ProblemParams, cfg: RunConfig):
    return find_beta0(params, cfg.tol_beta, cfg.r_max, r_cap=cfg.r_cap, tol=cfg.tol)


def _shot_from_value(params: ProblemParams, value: str, cfg: RunConfig):
    """Resolve ``auto`` by shooting, or verify a user value by bracketing it."""
    if value == "auto":
        return _beta0(params, cfg)
    b = float(value)
    w = 1e-6 * max(1.0, abs(b))
    return find_beta0(params, cfg.tol_beta, cfg.r_max, r_cap=cfg.r_cap, tol=cfg.tol, bracket=(b - w, b + w))


# -- subcommands --------------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = _config(args)
    params = ProblemParams(args.dim, args.alpha, args.delta, args.beta)
    if params.N <= 2:
        raise NoEntireSolution(
            f"N={params.N}: for N <= 2 the equation admits no entire solution, so there is nothing to solve"
        )
    prof = integrate(params, cfg.r_max, cfg.tol)
    report = io.profile_metadata(prof)
    report["u_end"] = float(prof.u[-1])
    report["lap_end"] = float(prof.v[-1])
    if args.out:
        io.write_profile(Path(args.out) / "profile.csv", prof)
    _emit(report, args.out, "solve.json")
    return EXIT_OK


def cmd_shoot(args) -> int:
    cfg = _config(args)
    params = ProblemParams(args.dim, args.alpha, args.delta)
    res = _beta0(params, cfg)
    report = res.to_dict()
    report["bounds"] = verify_bounds(res.global_profile, res.beta0).to_dict()
    if args.out:
        out = Path(args.out)
        io.write_profile(out / "global.csv", res.global_profile)
        io.write_profile(out / "blowup.csv", res.blowup_profile)
    _emit(report, args.out, "shoot.json")
    return EXIT_OK


def cmd_asym(args) -> int:
    cfg = _config(args)
    params = ProblemParams(args.dim, args.alpha, args.delta)
    if params.N <= 2:
        raise NoEntireSolution(f"N={params.N}: no entire solution exists for N <= 2")
    shot = _shot_from_value(params, args.beta0, cfg)
    r_target = args.r_max if args.r_max is not None else (1e3 if params.N <= 4 else 1e4)
    sep = separatrix(shot, r_target, tol=cfg.tol)
    prof = sep.profile
    report = {
        "params": params.to_dict(),
        "beta0": sep.beta0,
        "bracket": list(sep.bracket),
        "reliable_to": sep.reliable_to,
        "restarts": sep.restarts,
    }
    if params.N == 3:
        report["asymptotics"] = coeffs_n3(prof).to_dict()
        columns = {"r": prof.r, "u": prof.u}
    else:
        lp = to_log(prof)
        trace = energy_trace(lp, (0.0, lp.s[-1]))
        if params.N == 4:
            report["asymptotics"] = mass_n4(prof).to_dict()
        else:
            report["asymptotics"] = check_limit_n5(prof).to_dict()
        report["energy"] = {
            "regime": trace.regime,
            "drift": trace.drift,
            "min_increment": trace.min_increment,
            "final": trace.final,
        }
        columns = {"s": lp.s, "w": lp.w, "E": energy(lp)}
    if args.out:
        io.write_columns(Path(args.out) / "asym.csv", columns)
        io.write_profile(Path(args.out) / "separatrix.csv", prof)
    _emit(report, args.out, "asym.json")
    return EXIT_OK


def cmd_stab(args) -> int:
    cfg = _config(args)
    params = ProblemParams(args.dim, args.alpha, args.delta)
    if params.N <= 2:
        raise NoEntireSolution(f"N={params.N}: no entire solution exists for N <= 2")
    domain = parse_domain(args.domain) if args.domain else None
    shot = _beta0(params, cfg)
    beta0 = shot.beta0
    if args.beta == "separatrix":
        r_target = args.r_max if args.r_max is not None else (1e3 if params.N <= 4 else 1e4)
        prof = separatrix(shot, r_target, tol=cfg.tol).profile
    else:
        beta = float(args.beta)
        if beta > beta0:
            raise ParameterError(
                f"beta={beta!r} lies above the separatrix value {beta0!r}; the solution blows up"
            )
        prof = integrate(params.with_beta(beta), cfg.r_max, cfg.tol)
    rep = stability_report(prof, beta0, domain, cfg.grid)
    report = rep.to_dict()
    report["beta0"] = beta0
    report["n_alpha"] = n_alpha(params.alpha)
    if args.witness_out:
        if rep.witness is None:
            log.info("no negative eigenvalue; witness file not written")
        else:
            r, phi = rep.witness
            io.write_columns(args.witness_out, {"r": r, "phi": phi})
    _emit(report, args.out, "stab.json")
    return EXIT_OK


def cmd_second(args) -> int:
    if args.mode == "witness":
        w = witness2(args.dim, args.alpha, args.annulus)
        report = w.to_dict()
        report["threshold"] = threshold2(args.dim, args.alpha)
        if args.out:
            io.write_columns(Path(args.out) / "witness2.csv", {"r": w.r, "phi": w.phi})
        _emit(report, args.out, "witness2.json")
        return EXIT_OK
    cfg = _config(args)
    params = SecondOrderParams(args.dim, args.alpha, args.u0)
    r_max = args.r_max if args.r_max is not None else 1e4
    prof = integrate2(params, r_max, cfg.tol)
    report = {"params": params.to_dict(), "r_end": prof.r_end, "u_end": float(prof.u[-1]),
              "stats": prof.stats.to_dict()}
    if params.N >= 3:
        off = singular_offset_error(prof)
        report["singular_offset_end"] = float(off[-1])
        report["singular_constant"] = singular_solution(params.N, params.alpha).constant
        report["threshold"] = threshold2(params.N, params.alpha)
    if args.out:
        io.write_columns(Path(args.out) / "second.csv", {"r": prof.r, "u": prof.u, "du": prof.p})
    _emit(report, args.out, "second.json")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    dims = parse_int_list(args.dim)
    alphas = parse_float_list(args.alpha)
    rows = run_sweep(dims, alphas, cfg, resume=args.resume)
    sys.stdout.write(io.dumps([r.to_dict() for r in rows]))
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--log-level", default="WARNING")
    common.add_argument("--tol", type=float, help="integration tolerance")
    common.add_argument("--grid", type=int, help="eigen-solver grid size")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="henonlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def problem(sp, beta=False):
        sp.add_argument("--dim", type=int, required=True)
        sp.add_argument("--alpha", type=float, default=0.0)
        sp.add_argument("--delta", type=float, default=0.0)
        sp.add_argument("--r-max", type=float)
        sp.add_argument("--tol-beta", type=float)
        if beta:
            sp.add_argument("--beta", type=float, required=True)

    s = sub.add_parser("solve", parents=[common], help="integrate one trajectory")
    problem(s, beta=True)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("shoot", parents=[common], help="locate the separatrix value")
    problem(s)
    s.set_defaults(func=cmd_shoot)

    s = sub.add_parser("asym", parents=[common], help="asymptotics of the separatrix")
    problem(s)
    s.add_argument("--beta0", default="auto", help='value or "auto"')
    s.set_defaults(func=cmd_asym)

    s = sub.add_parser("stab", parents=[common], help="stability of one global solution")
    problem(s)
    s.add_argument("--beta", default="separatrix", help='value or "separatrix"')
    s.add_argument("--domain", help="eigen-domain r_a:r_b")
    s.add_argument("--witness-out", help="CSV path for a negative eigenfunction")
    s.set_defaults(func=cmd_stab)

    s = sub.add_parser("second", parents=[common], help="second-order equation")
    s.add_argument("mode", nargs="?", choices=["witness"])
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--u0", type=float, default=0.0)
    s.add_argument("--r-max", type=float)
    s.add_argument("--annulus", type=float, default=1.0, help="inner radius R of (R, 16R)")
    s.set_defaults(func=cmd_second)

    s = sub.add_parser("sweep", parents=[common], help="phase atlas over (N, alpha)")
    s.add_argument("--dim", default="5-14", help='e.g. "5-14" or "3,4"')
    s.add_argument("--alpha", default="0", help="comma-separated values")
    s.add_argument("--r-max", type=float)
    s.add_argument("--tol-beta", type=float)
    s.add_argument("--workers", type=int)
    s.add_argument("--resume", action="store_true")
    s.add_argument("--beta1", action="store_true", help="also bisect for the stability threshold")
    s.add_argument("--save-profiles", action="store_true")
    s.add_argument("--fixture", action="store_true", help="omit timestamps")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalInconclusive as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
