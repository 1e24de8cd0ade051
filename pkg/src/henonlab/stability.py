"""Stability of radial solutions of the fourth-order problem.

Two kinds of evidence are combined. The pointwise Hardy comparison
``r^α e^u <= w_N(r)`` proves stability (on the whole space or outside a ball).
A negative eigenvalue of the discretised form

    Q(φ) = ∫ (Δφ)² r^(N-1) dr - ∫ r^(N-1+α) e^u φ² dr

over radial test functions clamped on an interval proves instability there.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.linalg import eig_banded
from scipy.optimize import brentq

from .errors import Inconclusive, NotApplicable, ParameterError
from .radial import ProblemParams, RadialProfile, integrate, log_offset

log = logging.getLogger(__name__)

REFINE_TOL = 0.10


# -- dimension threshold ----------------------------------------------------------


def f_threshold(s, alpha):
    """``s²(s-4) - 32(4+α)(s-2)``; its root above 5 is ``N_α``."""
    return s * s * (s - 4) - 32 * (4 + alpha) * (s - 2)


def n_alpha(alpha: float) -> float:
    """Dimension from which every entire radial solution is stable."""
    if not alpha > -2:
        raise ParameterError("alpha must exceed -2")
    hi = 10.0
    while f_threshold(hi, alpha) <= 0:
        hi *= 2
    return brentq(f_threshold, 5.0, hi, args=(alpha,), xtol=1e-14, rtol=1e-15)


def hardy_constant(N) -> float:
    return N * N * (N - 4) ** 2 / 16.0


def hardy_weight(N: int, r):
    """Weight of the Hardy inequality used for dimension ``N``.

    For ``N = 4`` the inequality lives outside the unit ball and the weight is
    ``1/(4 r⁴ ln² r)``; otherwise it is ``N²(N-4)²/(16 r⁴)`` (for ``N = 3``
    again only outside the unit ball).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ParameterError("r must be positive")
    if N == 4:
        if np.any(r <= 1):
            raise ParameterError("the N = 4 weight is defined for r > 1 only")
        out = 1.0 / (4 * r**4 * np.log(r) ** 2)
    else:
        out = hardy_constant(N) / r**4
    return out if out.ndim else float(out)


def _scaled_weight(N, r):
    """``r⁴ w_N(r)``."""
    if N == 4:
        return 1.0 / (4 * np.log(r) ** 2)
    return np.full_like(r, hardy_constant(N))


def hardy_margins(profile: RadialProfile, r_from: Optional[float] = None):
    """Pointwise margins ``r⁴ (w_N - r^α e^u)`` on the samples with ``r >= r_from``.

    Margins are reported in units of ``r⁻⁴``, which leaves the sign unchanged
    and keeps the numbers comparable across radii. For ``N <= 4`` only
    samples outside the unit ball are used.
    """
    p = profile.params
    r, u = profile.r, profile.u
    keep = np.ones_like(r, dtype=bool) if r_from is None else r >= r_from
    if p.N <= 4:
        keep &= r > 1
    r, u = r[keep], u[keep]
    return r, _scaled_weight(p.N, r) - r ** (4 + p.alpha) * np.exp(u)


def hardy_check(profile: RadialProfile, r_from: Optional[float] = None) -> float:
    """Worst margin over the samples beyond ``r_from`` (``-inf`` if none)."""
    _, m = hardy_margins(profile, r_from)
    return float(np.min(m)) if m.size else -math.inf


def gaussian_tail_certified(N: int, alpha: float, beta: float, beta0: float, R: float) -> bool:
    """Whether ``r^α exp(-(β₀-β)r²/(2N)) <= w_N(r)`` for every ``r >= R``.

    The left side bounds ``r^α e^u`` for ``β < β₀``; the log of the ratio is
    increasing once its derivative is, so checking value and slope at ``R``
    suffices.
    """
    d = beta0 - beta
    if not d > 0 or (N <= 4 and R <= 1):
        return False
    g = math.log(float(_scaled_weight(N, np.array([R]))[0])) - (4 + alpha) * math.log(R) + d * R * R / (2 * N)
    slope = -(4 + alpha) / R + d * R / N
    if N == 4:
        slope -= 2 / (R * math.log(R))
    return g >= 0 and slope >= 0


def slope_tail_certified(profile: RadialProfile) -> bool:
    """Extrapolated tail check beyond the last sample.

    Continues ``r^(4+α) e^u`` with its terminal log-slope; used for the
    separatrix, where no Gaussian bound is available.
    """
    p = profile.params
    R = profile.r_end
    if p.N <= 4 and R <= 1:
        return False
    k = 4 + p.alpha + R * profile.p[-1]
    if p.N == 4:
        # the weight r⁴ w_4 decays like 1/ln², far slower than any power
        return k < 0 and hardy_check(profile, R) >= 0
    return k <= 0 and hardy_check(profile, R) >= 0


def hardy_tail_radius(profile: RadialProfile, beta0: Optional[float] = None) -> Optional[float]:
    """Smallest sample radius beyond which the Hardy comparison holds.

    Beyond the profile, the Gaussian bound is tried first (it needs
    ``β < β₀`` with a usable gap) and the terminal-slope extrapolation second. Returns ``None`` when no tail
    certificate exists on the computed range.
    """
    p = profile.params
    r, m = hardy_margins(profile)
    if not m.size:
        return None
    tail_ok = (
        beta0 is not None
        and p.beta < beta0
        and gaussian_tail_certified(p.N, p.alpha, p.beta, beta0, profile.r_end)
    ) or slope_tail_certified(profile)
    if not tail_ok or m[-1] < 0:
        return None
    bad = np.flatnonzero(m < 0)
    if bad.size == 0:
        return float(r[0])
    return float(r[bad[-1] + 1])


def hardy_sufficient_beta(N: int, alpha: float, beta0: float) -> float:
    """Closed-form ``β′ = min_r [(2N/r²) ln(N²(N-4)²/(16 r^(4+α))) + β₀]``.

    For ``β <= β′`` the upper bound ``u <= -(β₀-β) r²/(2N)`` already places
    ``r^α e^u`` under the Hardy weight everywhere.
    """
    if N < 5:
        raise NotApplicable("the whole-space Hardy inequality needs N >= 5")
    C = math.log(hardy_constant(N))
    k = (4 + alpha) / 2
    t_star = math.exp(C / k + 1)
    return beta0 - 2 * N * k / t_star


# -- discretised quadratic form ---------------------------------------------------


@dataclass(frozen=True)
class Discretization:
    """Nodes ``r_i = g(x_i)`` on a uniform ``x`` grid with the maps needed for Δ."""

    r: np.ndarray
    dr: np.ndarray
    d2r: np.ndarray
    h: float
    origin: bool
    kind: str

    @property
    def n(self):
        return self.r.size


def make_grid(domain, n: int, kind: Optional[str] = None, scale: float = 1.0) -> Discretization:
    ra, rb = map(float, domain)
    if not (0 <= ra < rb):
        raise ParameterError("domain must satisfy 0 <= r_a < r_b")
    if n < 64:
        raise ParameterError("grid_size must be at least 64")
    origin = ra == 0.0
    if kind is None:
        if origin:
            kind = "sinh" if rb > 50 * scale else "uniform"
        else:
            kind = "log" if rb / ra > 4 else "uniform"
    if kind == "uniform":
        x = np.linspace(ra, rb, n + 1)
        r, dr, d2r = x, np.ones_like(x), np.zeros_like(x)
    elif kind == "log":
        if origin:
            raise ParameterError("a log grid needs r_a > 0")
        x = np.linspace(math.log(ra), math.log(rb), n + 1)
        r = np.exp(x)
        dr, d2r = r, r
    elif kind == "sinh":
        c = scale
        x = np.linspace(math.asinh(ra / c), math.asinh(rb / c), n + 1)
        r = c * np.sinh(x)
        dr, d2r = c * np.cosh(x), r
    else:
        raise ParameterError(f"unknown grid kind {kind!r}")
    r = r.copy()
    r[0], r[-1] = ra, rb
    return Discretization(r, dr, d2r, float(x[1] - x[0]), origin, kind)


def _cells(g: Discretization, N: int):
    """Dual-cell volumes ``∫ r^(N-1) dr`` around each node."""
    mid = np.concatenate(([g.r[0]], 0.5 * (g.r[1:] + g.r[:-1]), [g.r[-1]]))
    return (mid[1:] ** N - mid[:-1] ** N) / N


def _laplacian(g: Discretization, N: int):
    """Sparse map from free nodal values to ``Δφ`` at every node.

    Conservative form ``Δφ ≈ -M⁻¹Kφ`` with ``K`` the stiffness of
    ``∫ φ' ψ' r^(N-1) dr`` for piecewise linear elements and ``M`` the dual
    cell volumes. The rows at the end nodes carry no outer flux, which is the
    clamped condition ``φ' = 0`` (and the symmetry condition at the origin).
    Clamped ends are removed from the unknowns.
    """
    r = g.r
    n1 = r.size
    e = (r[1:] ** N - r[:-1] ** N) / N / np.diff(r) ** 2
    main = np.zeros(n1)
    main[:-1] += e
    main[1:] += e
    K = sparse.diags([-e, main, -e], [-1, 0, 1], format="csr")
    cell = _cells(g, N)
    D = -(sparse.diags(1.0 / cell) @ K)
    free = np.arange(n1)
    if not g.origin:
        free = free[1:]
    free = free[:-1]
    return D.tocsc()[:, free].tocsr(), free


def _weights(g: Discretization, N: int):
    cell = _cells(g, N)
    return cell, cell


@dataclass(frozen=True)
class FormOperator:
    """Discrete pieces of the quadratic form on a grid."""

    grid: Discretization
    N: int
    D: sparse.csr_matrix
    free: np.ndarray
    tw: np.ndarray
    cell: np.ndarray
    V: np.ndarray

    def form(self, phi_free: np.ndarray) -> float:
        lap = self.D @ phi_free
        return float(lap @ (self.tw * lap) - phi_free @ (self.cell[self.free] * self.V[self.free] * phi_free))

    def mass(self, phi_free: np.ndarray) -> float:
        return float(phi_free @ (self.cell[self.free] * phi_free))

    def banded(self):
        """Symmetrically scaled form matrix ``B^{-1/2}(A - V)B^{-1/2}`` in lower band storage."""
        A = (self.D.T @ sparse.diags(self.tw) @ self.D).tocsr()
        b = self.cell[self.free]
        A = A - sparse.diags(b * self.V[self.free])
        s = 1.0 / np.sqrt(b)
        C = sparse.diags(s) @ A @ sparse.diags(s)
        m = C.shape[0]
        band = np.zeros((3, m))
        for k in range(3):
            band[k, : m - k] = C.diagonal(-k)
        return band, s


def discrete_form(N: int, domain, n: int, potential=None, kind: Optional[str] = None, scale: float = 1.0) -> FormOperator:
    """Assemble the form for radial test functions on ``domain``.

    ``potential`` is a callable ``V(r)`` (default zero) standing for
    ``r^α e^u``.
    """
    g = make_grid(domain, n, kind, scale)
    D, free = _laplacian(g, N)
    tw, cell = _weights(g, N)
    V = np.zeros_like(g.r) if potential is None else np.asarray(potential(g.r), dtype=float)
    return FormOperator(g, N, D, free, tw, cell, V)


def _lowest(op: FormOperator):
    band, s = op.banded()
    vals, vecs = eig_banded(band, lower=True, select="i", select_range=(0, 0))
    phi = vecs[:, 0] * s
    phi /= math.sqrt(op.mass(phi))
    # Rayleigh quotient from the factored form: no large cancelling entries
    lam = op.form(phi)
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return lam, float(vals[0]), phi


def independent_form(N: int, r: np.ndarray, phi: np.ndarray, potential, origin: bool, order: int = 6):
    """Form and mass of a nodal test function, recomputed from a clamped cubic spline
    with composite Gauss-Legendre quadrature."""
    spline = CubicSpline(r, phi, bc_type=((1, 0.0), (1, 0.0)))
    xg, wg = np.polynomial.legendre.leggauss(order)
    a, b = r[:-1, None], r[1:, None]
    x = 0.5 * (b - a) * xg[None, :] + 0.5 * (a + b)
    w = 0.5 * (b - a) * wg[None, :]
    x, w = x.ravel(), w.ravel()
    d1, d2 = spline(x, 1), spline(x, 2)
    lap = d2 + (N - 1) * d1 / x
    val = spline(x)
    rn = x ** (N - 1)
    V = potential(x)
    form = float(np.sum(w * rn * (lap**2 - V * val**2)))
    mass = float(np.sum(w * rn * val**2))
    return form, mass


@dataclass(frozen=True)
class EigResult:
    """Smallest Rayleigh quotient of the form on ``domain``.

    ``value_refined`` comes from the doubled grid; ``converged`` compares the
    two to the 10% rule. ``witness_form`` is the form value of the reported
    eigenfunction recomputed independently (only when ``value < 0``).
    """

    value: float
    value_refined: float
    converged: bool
    domain: tuple
    grid_size: int
    grid_kind: str
    r: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    witness_form: Optional[float] = None

    @property
    def negative(self) -> bool:
        return self.value < 0 and self.value_refined < 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "value_refined": self.value_refined,
            "converged": self.converged,
            "domain": list(self.domain),
            "grid_size": self.grid_size,
            "grid_kind": self.grid_kind,
            "witness_form": self.witness_form,
        }


def profile_potential(profile: RadialProfile):
    a = profile.params.alpha

    def V(r):
        r = np.asarray(r, dtype=float)
        out = np.exp(profile.u_at(r))
        with np.errstate(divide="ignore"):
            return np.where(r > 0, r**a * out, 0.0 if a > 0 else (out if a == 0 else np.inf))

    return V


def min_eig(
    profile: Optional[RadialProfile],
    domain,
    grid_size: int = 800,
    *,
    N: Optional[int] = None,
    potential=None,
    kind: Optional[str] = None,
    scale: float = 1.0,
) -> EigResult:
    """Minimal normalised form value over radial functions clamped on ``domain``.

    A negative value certifies instability on the domain. Without a profile,
    pass ``N`` and a ``potential`` callable directly.
    """
    if profile is not None:
        N = profile.params.N
        ra, rb = domain
        if rb > profile.r_end * (1 + 1e-12):
            raise ParameterError("domain extends beyond the computed profile")
        if potential is None:
            potential = profile_potential(profile)
    if N is None:
        raise ParameterError("dimension required")
    if potential is None:
        potential = lambda r: np.zeros_like(np.asarray(r, dtype=float))
    op = discrete_form(N, domain, grid_size, potential, kind, scale)
    lam, _, phi = _lowest(op)
    op2 = discrete_form(N, domain, 2 * grid_size, potential, op.grid.kind, scale)
    lam2, _, _ = _lowest(op2)
    converged = abs(lam - lam2) <= REFINE_TOL * max(abs(lam2), 1e-300)
    nodal = np.zeros(op.grid.n)
    nodal[op.free] = phi
    wf = None
    if lam < 0:
        form, mass = independent_form(N, op.grid.r, nodal, potential, op.grid.origin)
        wf = form / mass
    return EigResult(lam, lam2, bool(converged), tuple(map(float, domain)), grid_size,
                     op.grid.kind, op.grid.r, nodal, wf)


# -- reports ---------------------------------------------------------------------------


STABLE = "stable"
STABLE_AT_INFINITY = "stable_at_infinity"
UNSTABLE_AT_INFINITY = "unstable_at_infinity"


@dataclass(frozen=True)
class StabilityReport:
    classification: str
    R_compact: Optional[float]
    hardy_margin_global: Optional[float]
    hardy_margin_tail: float
    min_eig: EigResult
    params: ProblemParams

    @property
    def witness(self):
        if self.min_eig.value < 0:
            return self.min_eig.r, self.min_eig.phi
        return None

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "classification": self.classification,
            "R_compact": self.R_compact,
            "hardy_margin_global": self.hardy_margin_global,
            "hardy_margin_tail": self.hardy_margin_tail,
            "min_eig": self.min_eig.to_dict(),
        }


def stability_report(
    profile: RadialProfile,
    beta0: Optional[float] = None,
    domain: Optional[tuple] = None,
    grid_size: int = 800,
) -> StabilityReport:
    """Classify a global profile.

    ``beta0`` enables the Gaussian tail bound for profiles strictly below the
    separatrix; the default eigen-domain is the whole computed ball.
    """
    if not profile.classification.is_global:
        raise ParameterError("stability is assessed for global trajectories")
    p = profile.params
    glob = hardy_check(profile) if p.N >= 5 else None
    R = hardy_tail_radius(profile, beta0)
    if R is not None:
        tail = hardy_check(profile, R)
    else:
        tail = hardy_check(profile, profile.r_end / 10)
    if domain is None:
        domain = (0.0, profile.r_end)
    eig = min_eig(profile, domain, grid_size)
    if glob is not None and glob >= 0 and R is not None:
        cls = STABLE
    elif R is not None:
        cls = STABLE_AT_INFINITY
    else:
        cls = UNSTABLE_AT_INFINITY
    return StabilityReport(cls, R, glob, tail, eig, p)


# -- β₁ ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Beta1Result:
    """Stability threshold ``β₁`` with the certificates behind each end.

    ``beta1`` is the eigenvalue boundary: below it the form is nonnegative on
    a ball ``(0, R)`` beyond which the Hardy comparison holds; above it a
    negative eigenvalue exists. ``beta_hardy`` is the largest β whose profile
    passes the pointwise Hardy comparison everywhere. ``gap = beta1 -
    beta_hardy``.
    """

    beta1: float
    bracket: tuple
    beta_prime: float
    beta_hardy: float
    gap: float
    low_reason: str
    high_reason: str
    iterations: int
    R_used: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["bracket"] = list(self.bracket)
        return d


@dataclass(frozen=True)
class Certificate:
    stable: bool
    reason: str
    eig: Optional[EigResult]
    R: Optional[float]


def stability_certificate(
    params: ProblemParams,
    beta0: float,
    *,
    r_int: float = 1e3,
    R_min: float = 200.0,
    grid_size: int = 1200,
) -> Certificate:
    """Certify one β below the separatrix as stable or unstable.

    Stable: global Hardy comparison, or nonnegative form on a ball whose
    exterior passes the Hardy comparison. Unstable: negative eigenvalue on a
    ball (confirmed on the refined grid).
    """
    prof = integrate(params, r_int)
    if not prof.classification.is_global:
        raise Inconclusive(f"beta={params.beta!r} blew up; not below the separatrix")
    R = hardy_tail_radius(prof, beta0)
    if params.N >= 5 and R is not None and hardy_check(prof) >= 0:
        return Certificate(True, "hardy", None, R)
    R_ball = min(max(2 * (R or R_min), R_min), prof.r_end)
    eig = min_eig(prof, (0.0, R_ball), grid_size)
    if eig.negative:
        return Certificate(False, "negative_eigenvalue", eig, R_ball)
    if R is not None and R <= R_ball and eig.value >= 0 and eig.value_refined >= 0:
        return Certificate(True, "eigen+hardy_tail", eig, R_ball)
    raise Inconclusive(
        f"beta={params.beta!r}: eigenvalues {eig.value:.3g}/{eig.value_refined:.3g} "
        f"and Hardy tail {R} do not agree"
    )


def find_beta1(
    params: ProblemParams,
    beta0: float,
    tol: float = 1e-4,
    *,
    beta_high: Optional[float] = None,
    r_int: float = 1e3,
    R_min: float = 200.0,
    grid_size: int = 1200,
    max_iter: int = 60,
) -> Beta1Result:
    """Bisect for the stability threshold ``β₁`` in ``(β′, β₀)``.

    ``beta_high`` defaults to a point just below ``β₀`` that must carry an
    instability certificate.
    """
    N, a = params.N, params.alpha
    if not (N >= 5 and N < n_alpha(a)):
        raise NotApplicable(f"a finite stability threshold exists for 5 <= N < N_α only (N={N})")
    cert = lambda b: stability_certificate(params.with_beta(b), beta0, r_int=r_int, R_min=R_min, grid_size=grid_size)
    bp = hardy_sufficient_beta(N, a, beta0)
    lo = bp
    c_lo = cert(lo)
    if not c_lo.stable:
        raise Inconclusive(f"the Hardy-sufficient value {bp!r} is not certified stable")
    hi = beta_high if beta_high is not None else beta0 - 1e-6 * max(1.0, abs(beta0))
    c_hi = cert(hi)
    if c_hi.stable:
        raise Inconclusive(f"beta={hi!r} near the separatrix was certified stable")
    it = 0
    R_used = c_hi.R or 0.0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        c = cert(mid)
        it += 1
        R_used = max(R_used, c.R or 0.0)
        if c.stable:
            lo, c_lo = mid, c
        else:
            hi, c_hi = mid, c
    beta1 = 0.5 * (lo + hi)

    # Hardy-only boundary, monotone in β because e^u is
    h_lo, h_hi = bp, lo
    if _hardy_everywhere(params.with_beta(h_hi), beta0, r_int):
        h_lo = h_hi
    else:
        while h_hi - h_lo > tol:
            m = 0.5 * (h_lo + h_hi)
            if _hardy_everywhere(params.with_beta(m), beta0, r_int):
                h_lo = m
            else:
                h_hi = m
    return Beta1Result(beta1, (lo, hi), bp, h_lo, beta1 - h_lo, c_lo.reason, c_hi.reason, it, R_used)


def _hardy_everywhere(params, beta0, r_int):
    prof = integrate(params, r_int)
    return (
        prof.classification.is_global
        and hardy_check(prof) >= 0
        and hardy_tail_radius(prof, beta0) is not None
    )


# -- characteristic roots ---------------------------------------------------------------


def p_poly(N, nu):
    return nu * (nu - 2) * (nu + N - 2) * (nu + N - 4)


@dataclass(frozen=True)
class QnRoots:
    """Roots of ``Q_N(ν) = P_N(ν) - e^{λ₀}``.

    When ``N < N_α`` the inner pair is complex and ``nu2``/``nu3`` are
    ``None``; ``status`` records which case occurred.
    """

    N: float
    alpha: float
    nu1: float
    nu2: Optional[float]
    nu3: Optional[float]
    nu4: float
    nu_star: float
    status: str
    residual: float

    @property
    def roots(self):
        return tuple(x for x in (self.nu1, self.nu2, self.nu3, self.nu4) if x is not None)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def qn_roots(N: float, alpha: float) -> QnRoots:
    """Roots through ``t = (ν-ν*)²``: ``P_N = (t - (N-4)²/4)(t - N²/4)``."""
    if N <= 4:
        raise NotApplicable("Q_N is defined for N > 4")
    e = math.exp(log_offset(N, alpha))
    a, b = (N - 4) ** 2 / 4.0, N * N / 4.0
    nu_star = -(N - 4) / 2.0
    # t² - (a+b) t + (ab - e) = 0 with discriminant (b-a)² + 4e > 0
    disc = math.sqrt((b - a) ** 2 + 4 * e)
    t_plus = 0.5 * (a + b + disc)
    prod = a * b - e
    t_minus = prod / t_plus  # stable form of the smaller root
    Q = lambda nu: p_poly(N, nu) - e
    s_plus = math.sqrt(t_plus)
    nu1, nu4 = nu_star + s_plus, nu_star - s_plus
    if t_minus >= 0:
        s_minus = math.sqrt(t_minus)
        nu2, nu3 = nu_star + s_minus, nu_star - s_minus
        status = "double" if t_minus == 0 else "real"
    else:
        nu2 = nu3 = None
        status = "complex_pair"
    roots = [x for x in (nu1, nu2, nu3, nu4) if x is not None]
    resid = max(abs(Q(x)) for x in roots) / e
    return QnRoots(float(N), float(alpha), nu1, nu2, nu3, nu4, nu_star, status, resid)
