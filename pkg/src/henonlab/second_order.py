"""The second-order equation ``Δu + r^α e^u = 0``.

Radial solutions never blow up (``Δu < 0`` makes ``u`` decreasing). The
interesting objects are the explicit singular solution, its stability
threshold against the Hardy constant ``(N-2)²/4``, and annular test functions
that witness instability below the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NotApplicable, ParameterError
from .radial import ATOL, CHECKPOINT_RATIO, R_START, RTOL, IntegrationStats, march


@dataclass(frozen=True)
class SecondOrderParams:
    N: int
    alpha: float
    u0: float = 0.0

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ParameterError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 2:
            raise ParameterError(f"N={self.N}: the radial problem needs N >= 2")
        if not self.alpha > -2:
            raise ParameterError(f"alpha={self.alpha}: no weak solution exists for alpha <= -2")
        if not math.isfinite(self.u0):
            raise ParameterError("u0 must be finite")

    def to_dict(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "u0": self.u0}


@dataclass(frozen=True)
class Profile2:
    params: SecondOrderParams
    r: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    stats: IntegrationStats

    def __len__(self):
        return self.r.size

    @property
    def r_end(self) -> float:
        return float(self.r[-1])


def series_start2(params: SecondOrderParams, r_start: float = R_START):
    """``u ≈ u0 - e^{u0} r^(2+α)/((2+α)(N+α))`` and its derivative."""
    if not r_start > 0:
        raise ParameterError("r_start must be positive")
    a, N = params.alpha, params.N
    c = math.exp(params.u0) / ((2 + a) * (N + a))
    return params.u0 - c * r_start ** (2 + a), -(2 + a) * c * r_start ** (1 + a)


def integrate2(
    params: SecondOrderParams,
    r_max: float = 1e4,
    tol: float = RTOL,
    *,
    atol: float = ATOL,
    r_start: float = R_START,
    ratio: float = CHECKPOINT_RATIO,
) -> Profile2:
    if not tol > 0:
        raise ParameterError("tol must be positive")
    if not r_max > r_start:
        raise ParameterError("r_max must exceed the start radius")
    a, n1 = params.alpha, params.N - 1
    u_s, p_s = series_start2(params, r_start)

    def fun(r, y):
        return np.array((y[1], -n1 * y[1] / r - r**a * math.exp(y[0])))

    rows, info = march(fun, r_start, (u_s, p_s), r_max, rtol=tol, atol=atol, ratio=ratio)
    arr = np.array(rows)
    stats = IntegrationStats(
        n_steps=info["n_steps"], n_rhs=info["n_rhs"], h_min=info["h_min"], h_max=info["h_max"],
        rtol=tol, atol=atol, r_start=r_start, ratio=ratio,
        certified_global_at=None, lap_zero_at=None,
    )
    return Profile2(params, arr[:, 0], arr[:, 1], arr[:, 2], stats)


def singular_offset_error(profile: Profile2) -> np.ndarray:
    """``u + (2+α) ln r - ln[(2+α)(N-2)]`` along a regular solution."""
    p = profile.params
    return profile.u + (2 + p.alpha) * np.log(profile.r) - math.log((2 + p.alpha) * (p.N - 2))


# -- exact solutions ----------------------------------------------------------------


@dataclass(frozen=True)
class SingularSolution:
    """``U = -(2+α) ln r + ln[(2+α)(N-2)]``."""

    N: int
    alpha: float

    def __post_init__(self):
        if self.N < 3:
            raise NotApplicable("the singular solution needs N >= 3")
        if not self.alpha > -2:
            raise ParameterError("alpha must exceed -2")

    @property
    def constant(self) -> float:
        return math.log((2 + self.alpha) * (self.N - 2))

    def u(self, r):
        return -(2 + self.alpha) * np.log(r) + self.constant

    def residual(self, r) -> np.ndarray:
        """``r²(ΔU + r^α e^U)/((2+α)(N-2))``, evaluated in floating point."""
        r = np.asarray(r, dtype=float)
        k = (2 + self.alpha) * (self.N - 2)
        lap = -k / r**2
        return (lap + r**self.alpha * np.exp(self.u(r))) * r**2 / k


def singular_solution(N: int, alpha: float) -> SingularSolution:
    return SingularSolution(N, alpha)


@dataclass(frozen=True)
class SphereSolution:
    """``u = ln[32λ²/(4+λ²r²)²]`` solving ``Δu + e^u = 0`` in the plane."""

    lam: float

    @classmethod
    def from_u0(cls, u0: float) -> "SphereSolution":
        # u(0) = ln(2λ²)
        return cls(math.sqrt(math.exp(u0) / 2))

    def u(self, r):
        r = np.asarray(r, dtype=float)
        l2 = self.lam**2
        return np.log(32 * l2) - 2 * np.log(4 + l2 * r * r)

    def du(self, r):
        r = np.asarray(r, dtype=float)
        l2 = self.lam**2
        return -4 * l2 * r / (4 + l2 * r * r)

    def residual(self, r) -> np.ndarray:
        """``u'' + u'/r + e^u`` from the closed-form derivatives, scaled by the size of its terms.

        Far out ``u''`` and ``u'/r`` nearly cancel, so dividing by ``e^u``
        alone would only measure that cancellation.
        """
        r = np.asarray(r, dtype=float)
        l2 = self.lam**2
        d = 4 + l2 * r * r
        upp = -4 * l2 * (4 - l2 * r * r) / d**2
        dur = self.du(r) / r
        eu = np.exp(self.u(r))
        return (upp + dur + eu) / (np.abs(upp) + np.abs(dur) + eu)

    @property
    def mass(self) -> float:
        """``∫_{R²} e^u dx``, which equals ``8π`` for every ``λ``."""
        return 8 * math.pi


def sphere_solution(u0: float = math.log(2)) -> SphereSolution:
    return SphereSolution.from_u0(u0)


# -- stability threshold -----------------------------------------------------------


STABLE_SINGULAR = "stable_singular"
UNSTABLE_SINGULAR = "unstable_at_infinity_singular"


def hardy2(N: int) -> float:
    return (N - 2) ** 2 / 4.0


def threshold2(N: int, alpha: float) -> str:
    """Compare ``(2+α)(N-2)`` with ``(N-2)²/4``; equivalently ``N >= 10+4α``."""
    if N < 3:
        raise NotApplicable("the singular solution needs N >= 3")
    # 4(2+α) <= N-2 is the same comparison divided by (N-2)/4 > 0
    return STABLE_SINGULAR if 4 * (2 + alpha) <= N - 2 else UNSTABLE_SINGULAR


@dataclass(frozen=True)
class Form2:
    """Smallest normalised value of ``∫φ'² r^(N-1) - c∫φ² r^(N-3)`` on an annulus."""

    value: float
    r: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    annulus: tuple = (1.0, 16.0)


def _log_grid_form(N: int, c: float, annulus, n: int):
    """Tridiagonal pieces of the form on a log grid; φ vanishes at both ends."""
    ra, rb = map(float, annulus)
    if not 0 < ra < rb:
        raise ParameterError("annulus must satisfy 0 < R_a < R_b")
    if n < 16:
        raise ParameterError("n must be at least 16")
    t = np.linspace(0.0, math.log(rb / ra), n + 1)
    h = t[1] - t[0]
    r = ra * np.exp(t)
    # with r = R e^t: ∫φ'² r^(N-1) dr = ∫ φ_t² r^(N-2) dt and ∫φ² r^(N-3) dr = ∫ φ² r^(N-2) dt
    rm = ra * np.exp(0.5 * (t[1:] + t[:-1]))
    ew = rm ** (N - 2) / h
    diag = ew[:-1] + ew[1:]
    off = -ew[1:-1]
    mass = r[1:-1] ** (N - 2) * h
    return r, diag, off, mass


def min_form2(N: int, c: float, annulus, n: int = 400) -> Form2:
    r, diag, off, mass = _log_grid_form(N, c, annulus, n)
    s = 1.0 / np.sqrt(mass)
    d = diag * s * s - c
    e = off * s[:-1] * s[1:]
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
    phi = np.zeros_like(r)
    phi[1:-1] = vecs[:, 0] * s
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return Form2(float(vals[0]), r, phi, tuple(map(float, annulus)))


def quotient2(N: int, c: float, r: np.ndarray, phi: np.ndarray) -> float:
    """Discrete quotient of a nodal function on a log grid (same quadrature as above)."""
    t = np.log(r / r[0])
    h = t[1] - t[0]
    rm = r[0] * np.exp(0.5 * (t[1:] + t[:-1]))
    grad = np.sum(rm ** (N - 2) * np.diff(phi) ** 2) / h
    mass = np.sum(r ** (N - 2) * phi**2) * h
    return float(grad / mass - c)


@dataclass(frozen=True)
class Witness2:
    """Annular test function with negative second-order form around the singular solution.

    ``quotient`` is the discrete minimum on ``(R, 16R)``; ``exact`` the
    continuum value ``(π/ln 16)² + (N-2)²/4 - (2+α)(N-2)``; ``scaled`` maps
    each λ to the quotient of the same nodal vector on ``(λR, 16λR)``;
    ``ansatz`` is the value of the log-oscillating seed
    ``r^(-(N-2)/2) sin(π ln(r/R)/ln 16)``.
    """

    N: int
    alpha: float
    R: float
    quotient: float
    exact: float
    ansatz: float
    scaled: dict
    r: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)

    @property
    def scale_defect(self) -> float:
        return max(abs(v - self.quotient) for v in self.scaled.values()) if self.scaled else 0.0

    def to_dict(self) -> dict:
        return {
            "N": self.N, "alpha": self.alpha, "R": self.R,
            "quotient": self.quotient, "exact": self.exact, "ansatz": self.ansatz,
            "scaled": {str(k): v for k, v in self.scaled.items()},
            "scale_defect": self.scale_defect,
        }


def witness2(N: int, alpha: float, R: float = 1.0, n: int = 400, lambdas=(10.0, 100.0)) -> Witness2:
    if not (10 <= N < 10 + 4 * alpha):
        raise NotApplicable(f"the instability witness is for 10 <= N < 10+4α (N={N}, α={alpha})")
    if not R > 0:
        raise ParameterError("R must be positive")
    c = (2 + alpha) * (N - 2)
    best = min_form2(N, c, (R, 16 * R), n)
    exact = (math.pi / math.log(16)) ** 2 + hardy2(N) - c
    r = best.r
    seed = r ** (-(N - 2) / 2) * np.sin(math.pi * np.log(r / R) / math.log(16))
    seed[0] = seed[-1] = 0.0
    ansatz = quotient2(N, c, r, seed)
    scaled = {lam: quotient2(N, c, lam * r, best.phi) for lam in lambdas}
    return Witness2(N, alpha, R, best.value, exact, ansatz, scaled, r, best.phi)
