"""Parameter sweeps over ``(N, α)`` with a resumable on-disk store.

A sweep directory holds ``manifest.json`` (settings, their hash and the cell
list), ``records.jsonl`` (one finished cell per line, appended by the parent
process only) and ``table.json`` (all records sorted by cell). Optional
separatrix profiles go to ``profiles/``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import io
from .asymptotics import check_limit_n5, coeffs_n3, energy_trace, mass_n4
from .errors import NumericalInconclusive, ParameterError
from .radial import ProblemParams, integrate, to_log
from .shooting import find_beta0, separatrix, verify_bounds
from .stability import find_beta1, n_alpha, stability_report

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RECORDS = "records.jsonl"
TABLE = "table.json"


@dataclass(frozen=True)
class RunConfig:
    """Solver settings and output policy shared by every command.

    ``tol`` is the integration tolerance and ``tol_beta`` the bisection width
    (``None`` picks the relative default). ``fixture`` drops wall-clock
    timestamps so repeated runs give identical files.
    """

    tol: float = 1e-10
    tol_beta: Optional[float] = None
    r_max: float = 1e3
    r_cap: float = 1e5
    r_sep: float = 1e4
    r_sep_low: float = 1e3
    grid: int = 800
    beta_offsets: tuple = (1e-3, 0.1, 0.5)
    beta1: bool = False
    beta1_tol: float = 1e-4
    save_profiles: bool = False
    out: str = "henonlab_out"
    workers: int = 1
    fixture: bool = False

    def __post_init__(self):
        for name in ("tol", "r_max", "r_cap", "r_sep", "r_sep_low", "beta1_tol"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
        if self.tol_beta is not None and not self.tol_beta > 0:
            raise ParameterError("tol_beta must be positive")
        if self.r_cap < self.r_max:
            raise ParameterError("r_cap must be at least r_max")
        if int(self.grid) != self.grid or self.grid < 64:
            raise ParameterError("grid must be an integer >= 64")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ParameterError("workers must be a positive integer")
        offsets = tuple(float(x) for x in self.beta_offsets)
        if any(not x > 0 for x in offsets):
            raise ParameterError("beta_offsets must be positive (samples lie below the separatrix)")
        object.__setattr__(self, "beta_offsets", offsets)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def solver_settings(self) -> dict:
        """The part of the config that affects numbers (not paths or parallelism)."""
        skip = {"out", "workers", "fixture", "save_profiles"}
        return {k: v for k, v in self.to_dict().items() if k not in skip}

    def settings_hash(self) -> str:
        text = json.dumps(io.to_jsonable(self.solver_settings()), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, text: str, default):
    text = text.strip()
    try:
        if name == "tol_beta":
            return None if text.lower() in ("", "none", "auto") else float(text)
        if isinstance(default, bool):
            return _BOOL[text.lower()]
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(x) for x in text.replace(",", " ").split())
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"config key {name!r}: cannot parse {text!r}") from exc
    return text


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment and dashes in keys become underscores."""
    defaults = RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ParameterError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value, getattr(defaults, key))
    return out


def load_config(path=None, **overrides) -> RunConfig:
    values = parse_config(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


# -- records ------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    """One ``(N, α)`` cell of the phase atlas.

    ``samples`` lists the stability classification at ``β₀ - offset`` for each
    configured offset; ``regime`` is ``"beta1"`` when a finite stability
    threshold exists and ``"all_stable"`` or ``"none_stable"`` otherwise.
    """

    N: int
    alpha: float
    beta0: Optional[float] = None
    bracket: Optional[tuple] = None
    beta1: Optional[float] = None
    n_alpha: Optional[float] = None
    regime: Optional[str] = None
    samples: tuple = ()
    bounds_hold: Optional[bool] = None
    asymptotics: dict = field(default_factory=dict)
    settings_hash: str = ""
    started: Optional[float] = None
    finished: Optional[float] = None
    error: Optional[str] = None

    def __post_init__(self):
        if self.beta1 is not None and self.beta0 is not None and not self.beta1 < self.beta0 < 0:
            raise ValueError("expected beta1 < beta0 < 0")
        if self.n_alpha is not None and not self.n_alpha > 5:
            raise ValueError("n_alpha must exceed 5")

    @property
    def key(self) -> tuple:
        return (self.N, self.alpha)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return io.to_jsonable({f.name: getattr(self, f.name) for f in dataclasses.fields(self)})

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRecord":
        d = dict(d)
        if d.get("bracket") is not None:
            d["bracket"] = tuple(d["bracket"])
        d["samples"] = tuple(d.get("samples", ()))
        return cls(**d)


def regime(N: int, alpha: float) -> str:
    if N <= 4:
        return "none_stable"
    return "all_stable" if N >= n_alpha(alpha) else "beta1"


def _asymptotics(params: ProblemParams, shot, config: RunConfig, profile_dir: Optional[Path]) -> dict:
    N = params.N
    r_target = config.r_sep_low if N <= 4 else config.r_sep
    sep = separatrix(shot, r_target, tol=config.tol)
    prof = sep.profile
    out = {"r_target": r_target, "reliable_to": sep.reliable_to, "restarts": sep.restarts}
    if N == 3:
        out.update(coeffs_n3(prof).to_dict())
    elif N == 4:
        out.update(mass_n4(prof).to_dict())
        out["energy_drift"] = energy_trace(to_log(prof), (0.0, math.log(prof.r_end))).drift
    else:
        out.update(check_limit_n5(prof).to_dict())
        trace = energy_trace(to_log(prof), (0.0, math.log(prof.r_end)))
        out["energy_final"] = trace.final
        out["energy_min_increment"] = trace.min_increment
    if profile_dir is not None:
        name = f"separatrix_N{N}_a{params.alpha:g}.csv"
        io.write_profile(profile_dir / name, prof, {"beta0": sep.beta0, "bracket": list(sep.bracket)})
        out["profile"] = name
    return out


def run_cell(N: int, alpha: float, config: RunConfig, profile_dir: Optional[str] = None) -> SweepRecord:
    """Compute one cell; failures are returned as a record with ``error`` set."""
    started = None if config.fixture else time.time()
    base = {"N": int(N), "alpha": float(alpha), "settings_hash": config.settings_hash(), "started": started}
    try:
        params = ProblemParams(N, alpha)
        na = n_alpha(alpha)
        shot = find_beta0(params, config.tol_beta, config.r_max, r_cap=config.r_cap, tol=config.tol)
        beta0 = shot.beta0
        samples, bounds_ok = [], True
        for off in config.beta_offsets:
            beta = beta0 - off
            prof = integrate(params.with_beta(beta), config.r_max, config.tol)
            bounds_ok &= verify_bounds(prof, beta0).all_hold()
            rep = stability_report(prof, beta0, grid_size=config.grid)
            samples.append({
                "beta": beta,
                "classification": rep.classification,
                "min_eig": rep.min_eig.value,
                "unstable": bool(rep.min_eig.negative),
                "converged": rep.min_eig.converged,
            })
        beta1 = None
        reg = regime(N, alpha)
        if config.beta1 and reg == "beta1":
            beta1 = find_beta1(params, beta0, config.beta1_tol, r_int=config.r_max).beta1
        pdir = Path(profile_dir) if profile_dir else None
        asym = _asymptotics(params, shot, config, pdir)
        return SweepRecord(
            **base, beta0=beta0, bracket=tuple(shot.bracket), beta1=beta1, n_alpha=na, regime=reg,
            samples=tuple(samples), bounds_hold=bool(bounds_ok), asymptotics=io.to_jsonable(asym),
            finished=None if config.fixture else time.time(),
        )
    except (ParameterError, NumericalInconclusive, ArithmeticError, ValueError) as exc:
        log.warning("cell N=%s alpha=%s failed: %s", N, alpha, exc)
        return SweepRecord(
            **base, error=f"{type(exc).__name__}: {exc}",
            finished=None if config.fixture else time.time(),
        )


# -- store ----------------------------------------------------------------------------


def _cells(dims: Iterable[int], alphas: Iterable[float]) -> list:
    cells = sorted({(int(N), float(a)) for N in dims for a in alphas})
    for N, a in cells:
        if N < 2:
            raise ParameterError(f"N={N}: the radial problem needs N >= 2")
        if a <= -2:
            raise ParameterError(f"alpha={a} <= -2: the equation has no solutions near the origin")
    return cells


def load_records(out_dir) -> list:
    return [SweepRecord.from_dict(d) for d in io.jsonl_read(Path(out_dir) / RECORDS)]


def table(records: Iterable[SweepRecord]) -> list:
    """Records sorted by cell, the last record of a cell winning."""
    latest = {}
    for rec in records:
        latest[rec.key] = rec
    return [latest[k] for k in sorted(latest)]


def run_sweep(
    dims: Iterable[int],
    alphas: Iterable[float],
    config: RunConfig,
    resume: bool = False,
    limit: Optional[int] = None,
) -> list:
    """Run every ``(N, α)`` cell and return the sorted table.

    With ``resume`` the cells already in the store (same settings hash) are
    kept and skipped. ``limit`` stops after that many new cells, which is how
    an interruption is simulated in tests.
    """
    out = Path(config.out)
    cells = _cells(dims, alphas)
    h = config.settings_hash()
    manifest_path = out / MANIFEST
    rec_path = out / RECORDS
    done = {}
    if resume and manifest_path.exists():
        old = io.read_json(manifest_path)
        if old.get("settings_hash") != h:
            raise ParameterError(
                f"{out}: stored settings hash {old.get('settings_hash')} differs from {h}; "
                "resume needs identical solver settings"
            )
        if io.jsonl_repair(rec_path):
            log.warning("%s: dropped a partial record left by an interrupted run", rec_path)
        done = {r.key: r for r in load_records(out) if r.settings_hash == h}
        cells = sorted(set(cells) | {tuple(c) for c in old.get("cells", [])})
    else:
        out.mkdir(parents=True, exist_ok=True)
        rec_path.unlink(missing_ok=True)
    io.write_json(manifest_path, {
        "settings": config.solver_settings(),
        "settings_hash": h,
        "cells": [list(c) for c in cells],
    })
    todo = [c for c in cells if c not in done]
    if limit is not None:
        todo = todo[:limit]
    profile_dir = str(out / "profiles") if config.save_profiles else None

    if config.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_cell, N, a, config, profile_dir) for N, a in todo]
            for fut in as_completed(futures):
                rec = fut.result()
                io.jsonl_append(rec_path, [rec])
                done[rec.key] = rec
    else:
        for N, a in todo:
            rec = run_cell(N, a, config, profile_dir)
            io.jsonl_append(rec_path, [rec])
            done[rec.key] = rec

    rows = table(done.values())
    io.write_json(out / TABLE, [r.to_dict() for r in rows])
    return rows
