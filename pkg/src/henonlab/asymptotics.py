"""Asymptotic data of the separatrix and the log-coordinate energies.

For ``N = 3`` the separatrix is asymptotically affine in ``r`` with a ``1/r``
correction, for ``N = 4`` it is logarithmic with an explicit mass, and for
``N >= 5`` the shifted log profile ``w(s)`` tends to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .errors import NotApplicable, NumericalInconclusive, ParameterError
from .radial import LogProfile, ProblemParams, RadialProfile, log_offset
from .stability import n_alpha

TAIL_TOL = 1e-8
WINDOW = (0.6, 0.95)


def lambda0(params: ProblemParams) -> float:
    """Limit of ``u + (4+α) ln r`` along the separatrix, ``ln[2(4+α)(N-2)(N-4)]``."""
    if params.N <= 4:
        raise NotApplicable(f"the logarithmic limit is stated for N >= 5, got N={params.N}")
    return log_offset(params.N, params.alpha)


# -- weighted moments ---------------------------------------------------------------


@dataclass(frozen=True)
class Moment:
    """``∫₀^∞ r^k (ln r)^j e^u dr`` split into its computed pieces.

    ``refinement`` is the relative change of the grid part when every other
    sample is dropped, i.e. the step-halving check read backwards.
    """

    value: float
    grid: float
    head: float
    tail: float
    refinement: float


def _simpson_every_other(f, r):
    idx = np.arange(0, len(r), 2)
    if idx[-1] != len(r) - 1:
        idx = np.append(idx, len(r) - 1)
    return simpson(f[idx], x=r[idx])


def moment(profile: RadialProfile, k: float, log_weight: bool = False) -> Moment:
    r, u = profile.r, profile.u
    base = r**k * np.exp(u)
    f = base * np.log(r) if log_weight else base
    grid = simpson(f, x=r)
    coarse = _simpson_every_other(f, r)
    refinement = abs(grid - coarse) / max(abs(grid), 1e-300)

    # below the first sample u is constant to the start tolerance
    r0 = r[0]
    head = math.exp(u[0]) * r0 ** (k + 1) / (k + 1)
    if log_weight:
        head *= math.log(r0) - 1.0 / (k + 1)

    # beyond the last sample, extend the integrand with its terminal log-slope
    R = r[-1]
    gamma = k + R * profile.p[-1]
    if gamma >= -1:
        tail = math.inf
    else:
        g = base[-1] * R
        tail = g / (-gamma - 1)
        if log_weight:
            tail = g * (math.log(R) / (-gamma - 1) + 1.0 / (gamma + 1) ** 2)
    return Moment(grid + head + tail, grid, head, tail, refinement)


# -- N = 3 -----------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticsN3:
    """``u ≈ a1 r + a2 + a3/r`` obtained twice: from moments and from a tail fit."""

    a1: float
    a2: float
    a3: float
    a1_fit: float
    a2_fit: float
    a3_fit: float
    fit_window: tuple
    residual: float
    refinement: float
    tail: float

    @property
    def integral(self):
        return np.array([self.a1, self.a2, self.a3])

    @property
    def fitted(self):
        return np.array([self.a1_fit, self.a2_fit, self.a3_fit])

    def agreement(self) -> float:
        """Largest relative discrepancy between the two coefficient sets."""
        return float(np.max(np.abs(self.integral - self.fitted) / np.abs(self.integral)))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["fit_window"] = list(self.fit_window)
        d["agreement"] = self.agreement()
        return d


def coeffs_n3(separatrix: RadialProfile, window: tuple = WINDOW) -> AsymptoticsN3:
    p = separatrix.params
    if p.N != 3:
        raise NotApplicable(f"affine asymptotics are specific to N = 3, got N={p.N}")
    a = p.alpha
    m1, m2, m3 = (moment(separatrix, a + j) for j in (2, 3, 4))
    a1 = -0.5 * m1.value
    tail = max(m1.tail, m2.tail, m3.tail)
    if not tail <= TAIL_TOL * abs(a1):
        raise NumericalInconclusive(
            f"moment tail {tail:.3g} exceeds {TAIL_TOL:g}·|a1|; integrate further out"
        )
    a2 = p.delta + 0.5 * m2.value
    a3 = -m3.value / 6.0

    r_max = separatrix.r_end
    lo, hi = window[0] * r_max, window[1] * r_max
    sel = (separatrix.r >= lo) & (separatrix.r <= hi)
    if sel.sum() < 3:
        raise ParameterError("fit window holds fewer than three samples")
    r = separatrix.r[sel]
    design = np.column_stack([r, np.ones_like(r), 1.0 / r])
    coef, *_ = np.linalg.lstsq(design, separatrix.u[sel], rcond=None)
    resid = float(np.max(np.abs(design @ coef - separatrix.u[sel])))
    return AsymptoticsN3(
        a1, a2, a3, *map(float, coef), (lo, hi), resid,
        max(m1.refinement, m2.refinement, m3.refinement), tail,
    )


# -- N = 4 -----------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticsN4:
    """Mass ``c0`` and constant term ``CT`` of ``u ≈ δ - c0 ln r + CT``.

    ``remainder`` is ``u + c0 ln r - CT - δ`` at ``r_check``; ``identity`` is
    the relative defect of ``(4+α)² = (4+α-c0)²``.
    """

    c0: float
    CT: float
    c0_expected: float
    remainder: float
    r_check: float
    identity: float
    refinement: float

    @property
    def mass_error(self) -> float:
        return abs(self.c0 - self.c0_expected) / self.c0_expected

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["mass_error"] = self.mass_error
        return d


def mass_n4(separatrix: RadialProfile, r_check: Optional[float] = None) -> AsymptoticsN4:
    p = separatrix.params
    if p.N != 4:
        raise NotApplicable(f"the logarithmic mass is specific to N = 4, got N={p.N}")
    a = p.alpha
    m = moment(separatrix, 3 + a)
    ml = moment(separatrix, 3 + a, log_weight=True)
    c0 = 0.25 * m.value
    CT = 0.25 * ml.value
    if r_check is None:
        r_check = separatrix.r_end
    r_check = min(r_check, separatrix.r_end)
    rem = float(separatrix.u_at(r_check)) + c0 * math.log(r_check) - CT - p.delta
    k = 4 + a
    identity = abs(k**2 - (k - c0) ** 2) / k**2
    return AsymptoticsN4(c0, CT, 8 + 2 * a, rem, r_check, identity, max(m.refinement, ml.refinement))


# -- N >= 5 ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LimitReport:
    """Convergence of ``w = u + (4+α) ln r - λ₀`` on the last decade of the profile.

    ``below_limit`` is only evaluated when ``N >= N_α``, where the separatrix
    stays under its limit profile; it is ``None`` otherwise.
    """

    lambda0: float
    sup_last_decade: float
    decade: tuple
    w_end: float
    max_w: float
    sign_changes: int
    tag: str
    below_limit: Optional[bool]

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["decade"] = list(self.decade)
        return d


def _sign_changes(x, floor):
    s = np.sign(x[np.abs(x) > floor])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def check_limit_n5(
    separatrix: RadialProfile,
    r_hi: Optional[float] = None,
    *,
    floor: float = 1e-9,
    tol: float = 1e-8,
) -> LimitReport:
    p = separatrix.params
    lam0 = lambda0(p)
    prof = separatrix if r_hi is None else separatrix.truncated(r_hi)
    r = prof.r
    w = prof.u + (4 + p.alpha) * np.log(r) - lam0
    dw = r * prof.p + (4 + p.alpha)
    r_end = r[-1]
    last = r >= r_end / 10
    # skip the start, where w climbs from -∞
    settled = np.flatnonzero(w >= -1.0)
    start = int(settled[0]) if settled.size else 0
    changes = _sign_changes(dw[start:], floor)
    below = None
    if p.N >= n_alpha(p.alpha):
        below = bool(np.max(w) <= tol)
    return LimitReport(
        lam0,
        float(np.max(np.abs(w[last]))),
        (float(r_end / 10), float(r_end)),
        float(w[-1]),
        float(np.max(w)),
        changes,
        "oscillatory" if changes >= 2 else "monotone",
        below,
    )


# -- energies --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyTrace:
    """Energy along ``s``.

    ``regime`` is ``"conservative"`` for ``N = 4`` and ``"monotone"`` for
    ``N >= 5``. ``drift`` is ``max|E - E(s₀)|/(1+|E(s₀)|)``;
    ``min_increment`` is the most negative step ``E(s_{i+1}) - E(s_i)``.
    """

    s: np.ndarray
    E: np.ndarray
    regime: str
    drift: float
    min_increment: float

    @property
    def final(self) -> float:
        return float(self.E[-1])


def energy(lp: LogProfile) -> np.ndarray:
    N = lp.params.N
    w, w1, w2, w3 = lp.w, lp.dw, lp.d2w, lp.d3w
    if N == 4:
        return w3 * w1 - 0.5 * w2**2 - 2 * w1**2 - np.exp(w)
    if N >= 5:
        # e^w - w - 1 through expm1 keeps precision near the limit w = 0
        pot = np.expm1(w) - w
        return (
            w3 * w1
            - 0.5 * w2**2
            + 2 * (N - 4) * w2 * w1
            + 0.5 * (N * N - 10 * N + 20) * w1**2
            - math.exp(lp.lambda0) * pot
        )
    raise NotApplicable("no log-coordinate energy for N = 3")


def energy_trace(lp: LogProfile, s_range: Optional[tuple] = None) -> EnergyTrace:
    s, E = lp.s, energy(lp)
    if s_range is not None:
        keep = (s >= s_range[0]) & (s <= s_range[1])
        s, E = s[keep], E[keep]
    if s.size < 2:
        raise ParameterError("energy trace needs at least two samples")
    drift = float(np.max(np.abs(E - E[0])) / (1 + abs(E[0])))
    return EnergyTrace(
        np.array(s), np.array(E),
        "conservative" if lp.params.N == 4 else "monotone",
        drift, float(np.min(np.diff(E))),
    )
