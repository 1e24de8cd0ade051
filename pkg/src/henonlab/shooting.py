"""Separatrix shooting on ``Δu(0) = β`` and checks of the a-priori bounds.

Trajectories are labelled global or blow-up by rigorous tests evaluated along
the integration (see :func:`henonlab.radial.integrate` with
``stop="decided"``). The separatrix value ``β₀`` is the boundary between the
two labels and is located by bisection.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from .errors import InconclusiveBracket, NoEntireSolution, ParameterError
from .radial import (
    RTOL,
    Classification,
    ProblemParams,
    RadialProfile,
    RadialState,
    integrate,
)

log = logging.getLogger(__name__)

GLOBAL_MARGIN = 1e-4
R_MAX = 1e3
R_CAP = 1e5
BOUND_TOL = 1e-8


class Verdict(str, enum.Enum):
    GLOBAL = "global"
    BLOWUP = "blowup"
    UNDECIDED = "undecided"


def classify(profile: RadialProfile, margin: Optional[float] = GLOBAL_MARGIN) -> Verdict:
    """Global / blow-up / undecided label of a computed trajectory.

    Blow-up and certified-global outcomes are final. A trajectory that simply
    reached ``r_max`` counts as global when ``Δu(r_max) <= -margin·|β|``;
    passing ``margin=None`` disables that fallback.
    """
    c = profile.classification
    if c.is_blowup:
        return Verdict.BLOWUP
    if c.reason == "certificate" or profile.stats.certified_global_at is not None:
        return Verdict.GLOBAL
    if margin is not None and profile.v[-1] <= -margin * abs(profile.params.beta):
        return Verdict.GLOBAL
    return Verdict.UNDECIDED


def decided_by_margin(profile: RadialProfile, margin: float = GLOBAL_MARGIN) -> bool:
    c = profile.classification
    return (
        c.is_global
        and c.reason != "certificate"
        and profile.stats.certified_global_at is None
        and classify(profile, margin) is Verdict.GLOBAL
    )


@dataclass(frozen=True)
class ShootResult:
    params: ProblemParams
    beta0: float
    bracket: tuple
    iterations: int
    r_max_used: float
    global_profile: RadialProfile = field(repr=False)
    blowup_profile: RadialProfile = field(repr=False)
    history: tuple = field(default=(), repr=False)
    margin_decisions: int = 0
    tol_beta: float = 0.0

    @property
    def witness_profiles(self) -> tuple:
        return self.global_profile, self.blowup_profile

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def to_dict(self) -> dict:
        return {
            "params": {"N": self.params.N, "alpha": self.params.alpha, "delta": self.params.delta},
            "beta0": self.beta0,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "r_max_used": self.r_max_used,
            "tol_beta": self.tol_beta,
            "margin_decisions": self.margin_decisions,
            "global_witness": _cls_dict(self.global_profile.classification),
            "blowup_witness": _cls_dict(self.blowup_profile.classification),
            "history": [[b, v] for b, v in self.history],
        }


def _cls_dict(c: Classification) -> dict:
    return {"kind": c.kind, "radius": c.radius, "reason": c.reason}


class _Shooter:
    """Integrates trial values of β, escalating ``r_max`` while undecided."""

    def __init__(self, params, r_max, r_cap, tol, margin):
        self.params = params
        self.r_max = float(r_max)
        self.r_cap = float(max(r_cap, r_max))
        self.tol = tol
        self.margin = margin
        self.history = []
        self.margin_decisions = 0

    def __call__(self, beta, bracket=None):
        while True:
            prof = integrate(self.params.with_beta(beta), self.r_max, self.tol, stop="decided")
            verdict = classify(prof, self.margin)
            if verdict is not Verdict.UNDECIDED:
                if self.margin is not None and decided_by_margin(prof, self.margin):
                    self.margin_decisions += 1
                self.history.append((beta, verdict.value))
                return verdict, prof
            if self.r_max >= self.r_cap:
                raise InconclusiveBracket(
                    f"beta={beta!r} still undecided at r_max={self.r_max:g}",
                    bracket=bracket, beta=beta, r_max=self.r_max,
                )
            self.r_max = min(2 * self.r_max, self.r_cap)
            log.debug("escalating r_max to %g for beta=%r", self.r_max, beta)


def find_beta0(
    params: ProblemParams,
    tol_beta: Optional[float] = None,
    r_max: float = R_MAX,
    *,
    r_cap: float = R_CAP,
    tol: float = RTOL,
    margin: Optional[float] = GLOBAL_MARGIN,
    bracket: Optional[tuple] = None,
    max_iter: int = 200,
) -> ShootResult:
    """Locate ``β₀ = sup{β : the solution with Δu(0)=β is entire}`` by bisection.

    The upper end starts at ``β = 0`` (always blow-up); the lower end doubles
    downward from ``-1`` until a global trajectory is found. ``tol_beta``
    defaults to ``1e-10·max(1, |β_low|)``. The ``beta`` field of ``params`` is
    ignored. A user ``bracket`` is verified before bisection.
    """
    if params.N <= 2:
        raise NoEntireSolution(f"N={params.N}: the radial problem has no entire solution for N <= 2")
    if tol_beta is not None and not tol_beta > 0:
        raise ParameterError("tol_beta must be positive")
    shoot = _Shooter(params, r_max, r_cap, tol, margin)

    if bracket is None:
        hi = 0.0
        v_hi, hi_prof = shoot(hi)
        if v_hi is not Verdict.BLOWUP:
            raise InconclusiveBracket("beta=0 did not blow up", bracket=(None, hi), beta=hi)
        lo = -1.0
        while True:
            v_lo, lo_prof = shoot(lo, (None, hi))
            if v_lo is Verdict.GLOBAL:
                break
            hi, hi_prof = lo, lo_prof
            lo *= 2.0
            if lo < -1e15:
                raise InconclusiveBracket("no global trajectory found", bracket=(lo, hi))
    else:
        lo, hi = map(float, bracket)
        if not lo < hi:
            raise ParameterError("bracket must satisfy lo < hi")
        v_lo, lo_prof = shoot(lo, (lo, hi))
        v_hi, hi_prof = shoot(hi, (lo, hi))
        if v_lo is not Verdict.GLOBAL or v_hi is not Verdict.BLOWUP:
            raise InconclusiveBracket(
                f"bracket ({lo!r}, {hi!r}) does not straddle the separatrix", bracket=(lo, hi)
            )

    if tol_beta is None:
        tol_beta = 1e-10 * max(1.0, abs(lo))
    it = 0
    while hi - lo > tol_beta and it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        mid, verdict, prof = _shoot_near(shoot, lo, hi)
        it += 1
        if verdict is Verdict.GLOBAL:
            lo, lo_prof = mid, prof
        else:
            hi, hi_prof = mid, prof
    return ShootResult(
        params=params.with_beta(0.5 * (lo + hi)),
        beta0=0.5 * (lo + hi),
        bracket=(lo, hi),
        iterations=it,
        r_max_used=shoot.r_max,
        global_profile=lo_prof,
        blowup_profile=hi_prof,
        history=tuple(shoot.history),
        margin_decisions=shoot.margin_decisions,
        tol_beta=tol_beta,
    )


def _shoot_near(shoot, lo, hi):
    """Shoot at the midpoint, falling back to the quarter points.

    A midpoint that stays undecided up to the cap lies extremely close to the
    separatrix, so the quarter points are decidable and still shrink the
    bracket.
    """
    err = None
    for frac in (0.5, 0.25, 0.75):
        trial = lo + frac * (hi - lo)
        try:
            verdict, prof = shoot(trial, (lo, hi))
        except InconclusiveBracket as exc:
            err = exc
            continue
        return trial, verdict, prof
    raise err


def refine_bracket(result: ShootResult, r_cap: float = 1e7) -> ShootResult:
    """Continue bisection until the midpoint is no longer representable.

    Only certified decisions are used; the refinement stops early if a trial
    value stays undecided up to ``r_cap``.
    """
    lo, hi = result.bracket
    lo_prof, hi_prof = result.global_profile, result.blowup_profile
    shoot = _Shooter(result.params, result.r_max_used, r_cap, result.global_profile.stats.rtol, None)
    it = result.iterations
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        try:
            verdict, prof = shoot(mid, (lo, hi))
        except InconclusiveBracket:
            break
        it += 1
        if verdict is Verdict.GLOBAL:
            lo, lo_prof = mid, prof
        else:
            hi, hi_prof = mid, prof
    return replace(
        result,
        params=result.params.with_beta(0.5 * (lo + hi)),
        beta0=0.5 * (lo + hi),
        bracket=(lo, hi),
        iterations=it,
        r_max_used=max(result.r_max_used, shoot.r_max),
        global_profile=lo_prof,
        blowup_profile=hi_prof,
        history=result.history + tuple(shoot.history),
    )


def history_is_monotone(history) -> bool:
    """Every global β lies below every blow-up β."""
    glob = [b for b, v in history if v == Verdict.GLOBAL.value]
    blow = [b for b, v in history if v == Verdict.BLOWUP.value]
    return not glob or not blow or max(glob) < min(blow)


# -- separatrix continuation ------------------------------------------------------


@dataclass(frozen=True)
class Separatrix:
    """Sampled separatrix together with the radius up to which it is trusted.

    ``reliable_to`` is the largest radius where the two bracketing
    trajectories still agree in ``u`` to the requested gap.
    """

    profile: RadialProfile
    beta0: float
    bracket: tuple
    reliable_to: float
    restarts: int


def _blend(a: RadialState, b: RadialState, theta: float) -> RadialState:
    return RadialState(a.r, *(x + theta * (y - x) for x, y in zip(a[1:], b[1:])))


def _common_gap(low: RadialProfile, high: RadialProfile):
    n = min(len(low), len(high))
    same = np.flatnonzero(low.r[:n] != high.r[:n])
    if same.size:
        n = int(same[0])
    return n, np.abs(high.u[:n] - low.u[:n])


def separatrix(
    result: ShootResult,
    r_target: float = 1e4,
    *,
    gap_tol: float = 1e-6,
    restart_gap: float = 1e-10,
    max_restarts: int = 8,
    tol: Optional[float] = None,
) -> Separatrix:
    """Follow the separatrix out to ``r_target``.

    Trajectories just above and below ``β₀`` enclose the separatrix (the
    solution depends monotonically on the data) but separate at a rate set by
    the unstable direction. When they drift apart before ``r_target`` the
    states at a radius where they still agree are blended and the blend
    parameter is bisected again, which restarts the enclosure there.
    """
    if tol is None:
        tol = result.global_profile.stats.rtol
    refined = refine_bracket(result)
    lo, hi = refined.bracket
    params = refined.params
    low = integrate(params.with_beta(lo), r_target, tol)
    high = integrate(params.with_beta(hi), r_target, tol)
    pieces = []
    restarts = 0
    while True:
        n, gap = _common_gap(low, high)
        bad = np.flatnonzero(gap > gap_tol)
        if bad.size == 0 and low.classification.is_global and n == len(low):
            reliable = len(low) - 1
        else:
            reliable = (int(bad[0]) if bad.size else n) - 1
        reliable = max(reliable, 0)
        done = low.r[reliable] >= r_target * (1 - 1e-12)
        ok = np.flatnonzero(gap[: reliable + 1] <= restart_gap)
        i1 = int(ok[-1]) if ok.size else 0
        if done or restarts >= max_restarts or i1 == 0:
            pieces.append(low.truncated(low.r[reliable]))
            break
        s_lo, s_hi = low.state(i1), high.state(i1)
        theta_lo, theta_hi = 0.0, 1.0
        r_cap = max(100 * r_target, 1e3 * s_lo.r)
        r_cap_limit = 1e4 * r_cap
        tracker = None
        while True:
            theta = 0.5 * (theta_lo + theta_hi)
            trial = _blend(s_lo, s_hi, theta)
            if trial == _blend(s_lo, s_hi, theta_lo) or trial == _blend(s_lo, s_hi, theta_hi):
                break
            prof = integrate(low.params, r_cap, tol, start=trial, stop="decided")
            verdict = classify(prof, None)
            while verdict is Verdict.UNDECIDED and r_cap < r_cap_limit:
                r_cap *= 10
                prof = integrate(low.params, r_cap, tol, start=trial, stop="decided")
                verdict = classify(prof, None)
            if verdict is Verdict.UNDECIDED:
                # neither side could be certified even far beyond r_target
                tracker = prof
                break
            if verdict is Verdict.GLOBAL:
                theta_lo = theta
            else:
                theta_hi = theta
        pieces.append(low.truncated(low.r[i1 - 1]))
        restarts += 1
        if tracker is not None:
            pieces.append(integrate(low.params, r_target, tol, start=tracker.state(0)))
            break
        start_lo, start_hi = _blend(s_lo, s_hi, theta_lo), _blend(s_lo, s_hi, theta_hi)
        new_low = integrate(low.params, r_target, tol, start=start_lo)
        new_high = integrate(low.params, r_target, tol, start=start_hi)
        low, high = new_low, new_high
        log.debug("separatrix restart %d at r=%g", restarts, s_lo.r)
    prof = _concat(pieces)
    return Separatrix(prof, refined.beta0, refined.bracket, prof.r_end, restarts)


def _concat(pieces) -> RadialProfile:
    first = pieces[0]
    if len(pieces) == 1:
        return first
    cols = {k: np.concatenate([getattr(p, k) for p in pieces]) for k in ("r", "u", "p", "v", "q")}
    last = pieces[-1]
    return RadialProfile(
        first.params, cols["r"], cols["u"], cols["p"], cols["v"], cols["q"],
        Classification("global", float(cols["r"][-1]), "r_max"), first.stats,
    )


# -- a-priori bounds ----------------------------------------------------------------


@lru_cache(maxsize=64)
def navier_eigenvalue(N: int, alpha: float, n: int = 600) -> float:
    """First eigenvalue of ``Δ²φ = λ|x|^α φ`` in the unit ball with ``φ = Δφ = 0`` on the sphere.

    Mixed discretisation: ``Δ`` is represented weakly through the Dirichlet
    stiffness matrix ``K`` and lumped mass ``M``, so the biharmonic energy is
    ``Kᵀ M⁻¹ K``. Radial test functions suffice because the first
    eigenfunction is radial.
    """
    r = np.linspace(0.0, 1.0, n + 1)
    edge = (r[1:] ** N - r[:-1] ** N) / N
    mid = 0.5 * (r[1:] + r[:-1])
    bounds = np.concatenate(([0.0], mid, [1.0]))
    mass = (bounds[1:] ** N - bounds[:-1] ** N) / N
    mass_a = (bounds[1:] ** (N + alpha) - bounds[:-1] ** (N + alpha)) / (N + alpha)
    h = r[1] - r[0]
    # stiffness over unknowns 0..n-1 (phi_n = 0)
    K = np.zeros((n, n))
    for i in range(n):
        e = edge[i] / h**2
        K[i, i] += e
        if i + 1 < n:
            K[i + 1, i + 1] += e
            K[i, i + 1] -= e
            K[i + 1, i] -= e
    A = K @ (K / mass[:n, None])
    A = 0.5 * (A + A.T)
    # solve for the largest 1/λ: the weighted mass is nearly singular at the
    # origin, while the energy matrix is positive definite and well graded
    vals = eigh(np.diag(mass_a[:n]), A, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(1.0 / vals[0])


@dataclass(frozen=True)
class BoundsReport:
    """Worst normalised margins of the a-priori bounds (negative means violated).

    ``lower``: u >= δ + β r²/(2N). ``upper``: u <= δ - (β₀-β) r²/(2N), only for
    β < β₀. ``growth``: u + (4+α) ln r <= ln λ*, with λ* the Navier
    eigenvalue of the weighted unit ball. ``decay``: r^(2+α) e^u <=
    -β(2+α)(N+α), which at the separatrix is the β₀ estimate.
    """

    lower: float
    upper: Optional[float]
    growth: float
    decay: float
    growth_constant: float

    def all_hold(self, tol: float = BOUND_TOL) -> bool:
        margins = [self.lower, self.growth, self.decay]
        if self.upper is not None:
            margins.append(self.upper)
        return all(m >= -tol for m in margins)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_bounds(
    profile: RadialProfile,
    beta0: float,
    growth_constant: Optional[float] = None,
) -> BoundsReport:
    if not profile.classification.is_global:
        raise ParameterError("bounds are stated for global trajectories only")
    p = profile.params
    N, a, d, b = p.N, p.alpha, p.delta, p.beta
    r, u = profile.r, profile.u
    r2 = r * r / (2 * N)
    lower_rhs = d + b * r2
    lower = float(np.min((u - lower_rhs) / (1 + np.abs(u) + np.abs(lower_rhs))))
    upper = None
    if b < beta0:
        upper_rhs = d - (beta0 - b) * r2
        upper = float(np.min((upper_rhs - u) / (1 + np.abs(u) + np.abs(upper_rhs))))
    if growth_constant is None:
        growth_constant = math.log(navier_eigenvalue(N, float(a)))
    g = u + (4 + a) * np.log(r)
    growth = float(np.min((growth_constant - g) / (1 + abs(growth_constant))))
    # the decay estimate holds for each global trajectory with its own β
    cap = -b * (2 + a) * (N + a)
    decay = float(np.min(1 - r ** (2 + a) * np.exp(u) / cap))
    return BoundsReport(lower, upper, growth, decay, growth_constant)
