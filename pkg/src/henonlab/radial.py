"""Radial initial value problem for the biharmonic Hénon equation.

The radial form of ``Δ²u = r^α e^u`` is integrated as the first-order system

    u' = p,   p' = v - (N-1) p / r,   v' = q,   q' = r^α e^u - (N-1) q / r

with ``v = Δu`` and ``q = (Δu)'``. The origin is a regular singular point, so
integration starts at a small ``r_start`` from a truncated power series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import DOP853
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import BlowUpSignal, IntegrationStall, ParameterError

U_MAX = 50.0
R_START = 1e-6
RTOL = 1e-10
ATOL = 1e-12
CHECKPOINT_RATIO = 1.01


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, weight exponent and initial data ``u(0)=delta, Δu(0)=beta``."""

    N: int
    alpha: float
    delta: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ParameterError(f"dimension must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 2:
            raise ParameterError(f"dimension N={self.N} < 2 is not supported")
        for name in ("alpha", "delta", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.alpha <= -2.0:
            raise ParameterError(
                f"alpha={self.alpha} <= -2: the equation has no solutions near the origin"
            )

    def with_beta(self, beta: float) -> "ProblemParams":
        return replace(self, beta=float(beta))

    def to_dict(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "delta": self.delta, "beta": self.beta}


class RadialState(NamedTuple):
    r: float
    u: float
    p: float
    v: float
    q: float


@dataclass(frozen=True)
class Classification:
    """Outcome of one integration.

    ``kind`` is ``"global"`` (target radius reached) or ``"blowup"``. For a
    blow-up, ``radius`` estimates the blow-up radius; ``reason`` records which
    test fired (``r_max``, ``certificate``, ``overflow``, ``lap_crossing`` or
    ``projected_limit``).
    """

    kind: str
    radius: float
    reason: str

    @property
    def is_global(self) -> bool:
        return self.kind == "global"

    @property
    def is_blowup(self) -> bool:
        return self.kind == "blowup"


@dataclass(frozen=True)
class IntegrationStats:
    n_steps: int
    n_rhs: int
    h_min: float
    h_max: float
    rtol: float
    atol: float
    r_start: float
    ratio: float
    certified_global_at: Optional[float] = None
    lap_zero_at: Optional[float] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RadialProfile:
    """Sampled trajectory ``(r, u, u', Δu, (Δu)')`` with its classification."""

    params: ProblemParams
    r: np.ndarray
    u: np.ndarray
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    classification: Classification
    stats: IntegrationStats
    _spline: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("r", "u", "p", "v", "q"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.r)
        if any(len(getattr(self, k)) != n for k in ("u", "p", "v", "q")):
            raise ValueError("sample arrays differ in length")
        if n > 1 and not np.all(np.diff(self.r) > 0):
            raise ValueError("sample radii must be strictly increasing")

    def __len__(self) -> int:
        return len(self.r)

    def state(self, i: int) -> RadialState:
        return RadialState(self.r[i], self.u[i], self.p[i], self.v[i], self.q[i])

    @property
    def states(self) -> list[RadialState]:
        return [self.state(i) for i in range(len(self))]

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    def u_at(self, r) -> np.ndarray:
        """Interpolate ``u`` (cubic Hermite on ``u, u'``; series below the first sample)."""
        r = np.asarray(r, dtype=float)
        if np.any(r > self.r[-1] * (1 + 1e-12)):
            raise ValueError("radius beyond the end of the profile")
        if "u" not in self._spline:
            self._spline["u"] = CubicHermiteSpline(self.r, self.u, self.p)
        out = np.empty_like(r)
        inside = r >= self.r[0]
        out[inside] = self._spline["u"](np.minimum(r[inside], self.r[-1]))
        below = ~inside
        if np.any(below):
            out[below] = _series_u(self.params, r[below])
        return out

    def truncated(self, r_max: float) -> "RadialProfile":
        keep = self.r <= r_max * (1 + 1e-12)
        return RadialProfile(
            self.params,
            self.r[keep], self.u[keep], self.p[keep], self.v[keep], self.q[keep],
            Classification("global", float(self.r[keep][-1]), "r_max"),
            self.stats,
        )


@dataclass(frozen=True)
class LogProfile:
    """Trajectory in ``s = ln r`` with ``w = u + (4+α)s - λ₀`` and three derivatives."""

    params: ProblemParams
    lambda0: float
    s: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    d2w: np.ndarray
    d3w: np.ndarray

    def __post_init__(self):
        for name in ("s", "w", "dw", "d2w", "d3w"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def rhs(state: RadialState, params: ProblemParams, u_max: float = U_MAX):
    """Derivative of ``(u, p, v, q)`` with respect to ``r``."""
    r, u, p, v, q = state
    if r <= 0:
        raise ParameterError("rhs is only defined for r > 0")
    if u > u_max:
        raise BlowUpSignal(r, u)
    c = (params.N - 1) / r
    return (p, v - c * p, q, r**params.alpha * math.exp(u) - c * q)


def _series_terms(params: ProblemParams):
    """(coefficient, power) pairs of the regular expansion of u at r = 0."""
    N, a, d, b = params.N, params.alpha, params.delta, params.beta
    K4 = (4 + a) * (2 + a) * (N + 2 + a) * (N + a)
    K6 = (6 + a) * (4 + a) * (N + 4 + a) * (N + 2 + a)
    ed = math.exp(d)
    # the r^(6+α) term comes from e^u ≈ e^δ (1 + β r²/2N) in the forcing
    return [(b / (2 * N), 2.0), (ed / K4, 4.0 + a), (ed * b / (2 * N * K6), 6.0 + a)]


def _series_u(params: ProblemParams, r):
    r = np.asarray(r, dtype=float)
    return params.delta + sum(c * r**k for c, k in _series_terms(params))


def series_start(params: ProblemParams, r_start: float = R_START) -> RadialState:
    """State at ``r_start`` from the truncated expansion around the origin.

    ``u = δ + β r²/(2N) + e^δ r^(4+α)/K + e^δ β r^(6+α)/(2N K')`` with
    ``K = (4+α)(2+α)(N+2+α)(N+α)``; ``p, v, q`` are the consistent radial
    derivatives ``u'``, ``Δu`` and ``(Δu)'`` of the same polynomial.
    """
    if not r_start > 0:
        raise ParameterError("r_start must be positive")
    N = params.N
    r = float(r_start)
    u, p, v = params.delta, 0.0, 0.0
    q = 0.0
    for c, k in _series_terms(params):
        u += c * r**k
        p += c * k * r ** (k - 1)
        lap = c * k * (k + N - 2)
        v += lap * r ** (k - 2)
        q += lap * (k - 2) * r ** (k - 3)
    return RadialState(r, u, p, v, q)


# -- certificates used to stop an integration early -----------------------------


def projected_limit(N: int, r: float, v: float, q: float) -> float:
    """``v + r q/(N-2)``: nondecreasing in ``r`` and a lower bound for ``lim Δu``.

    It equals the limit of ``Δu`` if the forcing ``r^α e^u`` vanished beyond
    ``r``. A positive value therefore rules out an entire solution.
    """
    return v + r * q / (N - 2)


def _log_gaussian_moment_bound(R: float, k: float, a: float) -> float:
    """log of an upper bound for ``∫_0^∞ (R+t)^k exp(-a t²) dt``."""
    half_gauss = 0.5 * math.sqrt(math.pi / a)
    if k <= 0:
        return k * math.log(R) + math.log(half_gauss)
    moment = 0.5 * math.exp(math.lgamma((k + 1) / 2) - (k + 1) / 2 * math.log(a))
    total = math.log(R**k * half_gauss + moment)
    if k > 1:
        total += (k - 1) * math.log(2.0)
    return total


def certifies_global(N: int, alpha: float, state: RadialState) -> bool:
    """Sufficient condition for the trajectory through ``state`` to be entire.

    With ``L`` the projected limit and ``p <= 0``, assume ``Δu <= L/2`` on
    ``[R, r]``; then ``u <= u(R) + L (r-R)²/(4N)`` and the total future rise of
    ``Δu`` is at most ``L + J/(N-2)`` where ``J`` bounds ``∫ s^(1+α) e^u``
    under that Gaussian envelope. If this stays below ``L/2`` the assumption
    propagates for all ``r`` and ``u`` stays bounded above.
    """
    if N < 3:
        return False
    r, u, p, v, q = state
    if p > 0:
        return False
    L = projected_limit(N, r, v, q)
    if not L < 0:
        return False
    a = -L / (4 * N)
    log_j = u + _log_gaussian_moment_bound(r, 1.0 + alpha, a)
    return log_j < math.log(-(N - 2) * L / 2)


# -- adaptive integration ---------------------------------------------------------


@dataclass
class _Recorder:
    ratio: float
    next_r: float
    rows: list = field(default_factory=list)

    def take(self, t_old, t_new, dense):
        if self.next_r > t_new:
            return
        pts = []
        while self.next_r <= t_new:
            if self.next_r > t_old:
                pts.append(self.next_r)
            self.next_r *= self.ratio
        if pts:
            vals = dense(np.array(pts))
            for j, rr in enumerate(pts):
                self.rows.append((rr, *vals[:, j]))


def march(
    fun: Callable,
    r0: float,
    y0,
    r_max: float,
    *,
    rtol: float,
    atol: float,
    ratio: float,
    monitor: Optional[Callable] = None,
):
    """Drive a DOP853 stepper from ``r0`` to ``r_max`` recording geometric checkpoints.

    ``monitor(t_old, t_new, y, dense)`` is called after each accepted step and
    may return ``(reason, r_stop)`` to stop early, in which case the state at
    ``r_stop`` is appended as the final sample. Returns ``(rows, info)``.
    """
    solver = DOP853(fun, r0, np.asarray(y0, dtype=float), r_max, rtol=rtol, atol=atol)
    rec = _Recorder(ratio, r0)
    rec.rows.append((r0, *np.asarray(y0, dtype=float)))
    rec.next_r = r0 * ratio
    n_steps, h_min, h_max = 0, math.inf, 0.0
    stop = None
    while solver.status == "running":
        t_old = solver.t
        try:
            msg = solver.step()
        except BlowUpSignal:
            stop = ("overflow", t_old)
            break
        if solver.status == "failed":
            raise IntegrationStall(
                f"step size collapsed at r={solver.t:.6g}: {msg}",
                r=solver.t, state=solver.y.copy(), n_steps=n_steps,
            )
        n_steps += 1
        h = solver.t - t_old
        h_min, h_max = min(h_min, h), max(h_max, h)
        dense = solver.dense_output()
        if monitor is not None:
            stop = monitor(t_old, solver.t, solver.y, dense)
            if stop is not None:
                r_stop = stop[1]
                rec.take(t_old, r_stop, dense)
                if r_stop > rec.rows[-1][0]:
                    rec.rows.append((r_stop, *dense(r_stop)))
                break
        rec.take(t_old, solver.t, dense)
    if stop is None or stop[0] == "overflow":
        if solver.t > rec.rows[-1][0]:
            rec.rows.append((solver.t, *solver.y))
    info = dict(n_steps=n_steps, n_rhs=solver.nfev, h_min=h_min, h_max=h_max, stop=stop,
                t_end=solver.t)
    return rec.rows, info


def integrate(
    params: ProblemParams,
    r_max: float = 1e3,
    tol: float = RTOL,
    *,
    atol: float = ATOL,
    r_start: float = R_START,
    ratio: float = CHECKPOINT_RATIO,
    u_max: float = U_MAX,
    start: Optional[RadialState] = None,
    stop: str = "blowup",
) -> RadialProfile:
    """Integrate the radial IVP up to ``r_max`` or blow-up.

    ``stop="blowup"`` (default) ends only at ``r_max`` or when ``u`` reaches
    ``u_max``; a zero crossing of ``Δu`` is recorded and, since ``Δu`` is
    increasing, already labels the trajectory as blowing up.
    ``stop="decided"`` ends at the first conclusive test: the crossing, a
    positive projected limit of ``Δu`` or the global certificate.
    ``start`` resumes from an arbitrary state instead of the series.
    """
    if stop not in ("blowup", "decided"):
        raise ValueError("stop must be 'blowup' or 'decided'")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    N, alpha = params.N, params.alpha
    if start is None:
        start = series_start(params, r_start)
    r0 = float(start.r)
    if not r_max > r0:
        raise ParameterError(f"r_max={r_max} must exceed the start radius {r0}")
    n1 = N - 1

    def fun(r, y):
        u = y[0]
        if u > u_max:
            raise BlowUpSignal(r, u)
        c = n1 / r
        return np.array((y[1], y[2] - c * y[1], y[3], r**alpha * math.exp(u) - c * y[3]))

    marks = {"lap_zero": None, "certified": None}

    def monitor(t_old, t_new, y, dense):
        if y[2] >= 0 and marks["lap_zero"] is None:
            lo_v = dense(t_old)[2]
            rz = t_new if lo_v >= 0 else brentq(lambda t: dense(t)[2], t_old, t_new, xtol=1e-14 * t_new)
            marks["lap_zero"] = rz
            if stop == "decided":
                return ("lap_crossing", rz)
        if stop == "decided" and N >= 3:
            if projected_limit(N, t_new, y[2], y[3]) > 0:
                return ("projected_limit", t_new)
            if certifies_global(N, alpha, RadialState(t_new, *y)):
                marks["certified"] = t_new
                return ("certificate", t_new)
        elif N >= 3 and marks["certified"] is None and y[2] < 0:
            if certifies_global(N, alpha, RadialState(t_new, *y)):
                marks["certified"] = t_new
        return None

    rows, info = march(fun, r0, start[1:], r_max, rtol=tol, atol=atol, ratio=ratio,
                       monitor=monitor)
    arr = np.array(rows)
    reason = info["stop"][0] if info["stop"] else "r_max"
    r_last = float(arr[-1, 0])
    if reason == "certificate":
        cls = Classification("global", r_last, "certificate")
    elif reason == "r_max":
        if marks["lap_zero"] is not None:
            cls = Classification("blowup", marks["lap_zero"], "lap_crossing")
        else:
            cls = Classification("global", r_last, "r_max")
    else:
        cls = Classification("blowup", r_last, reason)
    stats = IntegrationStats(
        n_steps=info["n_steps"], n_rhs=info["n_rhs"], h_min=info["h_min"], h_max=info["h_max"],
        rtol=tol, atol=atol, r_start=r0, ratio=ratio,
        certified_global_at=marks["certified"], lap_zero_at=marks["lap_zero"],
    )
    return RadialProfile(params, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], cls, stats)


# -- coordinate changes -----------------------------------------------------------


def log_offset(N: int, alpha: float) -> float:
    """Offset λ₀ used in the logarithmic variable: 0 for N=4, ln[2(4+α)(N-2)(N-4)] for N>=5."""
    if N == 4:
        return 0.0
    if N < 4:
        raise ParameterError("logarithmic coordinates are used for N >= 4 only")
    return math.log(2 * (4 + alpha) * (N - 2) * (N - 4))


def to_log(profile: RadialProfile) -> LogProfile:
    """Map a global profile to ``s = ln r`` coordinates.

    Derivatives of ``w`` come from the chain rule applied to ``(u', Δu, (Δu)')``.
    """
    params = profile.params
    N, alpha = params.N, params.alpha
    if N == 3:
        raise ParameterError("N = 3 separatrices are analysed in r, not in ln r")
    if not profile.classification.is_global:
        raise ParameterError("to_log needs a global profile")
    lam0 = log_offset(N, alpha)
    r, u, p, v, q = profile.r, profile.u, profile.p, profile.v, profile.q
    upp = v - (N - 1) * p / r
    uppp = q - (N - 1) * (upp - p / r) / r
    s = np.log(r)
    w = u + (4 + alpha) * s - lam0
    dw = r * p + (4 + alpha)
    d2w = r * r * upp + r * p
    d3w = r**3 * uppp + 3 * r * r * upp + r * p
    return LogProfile(params, lam0, s, w, dw, d2w, d3w)


def scale_solution(profile: RadialProfile, lam: float) -> RadialProfile:
    """Apply ``u_λ(x) = u(λx) + (4+α) ln λ`` to a sampled trajectory."""
    if not lam > 0:
        raise ParameterError("scaling factor must be positive")
    params = profile.params
    shift = (4 + params.alpha) * math.log(lam)
    new_params = replace(params, delta=params.delta + shift, beta=params.beta * lam * lam)
    c = profile.classification
    st = profile.stats
    new_stats = replace(
        st,
        r_start=st.r_start / lam,
        h_min=st.h_min / lam,
        h_max=st.h_max / lam,
        certified_global_at=None if st.certified_global_at is None else st.certified_global_at / lam,
        lap_zero_at=None if st.lap_zero_at is None else st.lap_zero_at / lam,
    )
    return RadialProfile(
        new_params,
        profile.r / lam,
        profile.u + shift,
        profile.p * lam,
        profile.v * lam**2,
        profile.q * lam**3,
        Classification(c.kind, c.radius / lam, c.reason),
        new_stats,
    )
