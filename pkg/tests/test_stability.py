import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab.errors import NotApplicable, ParameterError
from henonlab.radial import ProblemParams, integrate
from henonlab.stability import (
    STABLE,
    STABLE_AT_INFINITY,
    UNSTABLE_AT_INFINITY,
    discrete_form,
    f_threshold,
    find_beta1,
    gaussian_tail_certified,
    hardy_check,
    hardy_constant,
    hardy_sufficient_beta,
    hardy_tail_radius,
    hardy_weight,
    independent_form,
    make_grid,
    min_eig,
    n_alpha,
    p_poly,
    qn_roots,
    stability_certificate,
    stability_report,
)


# -- dimension threshold -----------------------------------------------------------


def test_n_alpha_reference_values():
    assert 12.56 <= n_alpha(0.0) <= 12.57
    assert 15.0 <= n_alpha(2.0) <= 15.1


def test_n_alpha_solves_the_defining_balance():
    for a in (-1.5, 0.0, 1.0, 3.0):
        N = n_alpha(a)
        lhs = N * N * (N - 4) ** 2 / 16
        rhs = 2 * (4 + a) * (N - 2) * (N - 4)
        assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("alpha", np.linspace(-1.99, 4.0, 13))
def test_threshold_negative_at_five(alpha):
    assert f_threshold(5.0, alpha) < 0


@settings(max_examples=50)
@given(a=st.floats(-1.99, 10.0), d=st.floats(1e-3, 5.0))
def test_n_alpha_increases_with_alpha(a, d):
    assert n_alpha(a + d) > n_alpha(a)


def test_n_alpha_rejects_bad_alpha():
    with pytest.raises(ParameterError):
        n_alpha(-2.0)


# -- Hardy ---------------------------------------------------------------------------


def test_hardy_weight():
    assert hardy_constant(6) == 9.0
    assert hardy_weight(6, 2.0) == pytest.approx(9 / 16)
    assert hardy_weight(4, math.e) == pytest.approx(1 / (4 * math.e**4))
    with pytest.raises(ParameterError):
        hardy_weight(4, 0.5)


@pytest.mark.parametrize("N,alpha", [(5, 0.0), (7, 1.0), (12, -1.0)])
def test_hardy_sufficient_beta_is_the_minimum(N, alpha):
    beta0 = -1.5
    r = np.geomspace(1e-2, 1e3, 200001)
    phi = 2 * N / r**2 * np.log(hardy_constant(N) / r ** (4 + alpha)) + beta0
    assert hardy_sufficient_beta(N, alpha, beta0) == pytest.approx(phi.min(), rel=1e-8)


def test_hardy_sufficient_beta_needs_five_dimensions():
    with pytest.raises(NotApplicable):
        hardy_sufficient_beta(4, 0.0, -1.6)


def test_gaussian_tail_certificate():
    # a large gap and a radius past the Gaussian take-over certify the tail
    assert gaussian_tail_certified(5, 0.0, -3.0, -1.5, 10.0)
    assert not gaussian_tail_certified(5, 0.0, -1.5, -1.5, 10.0)
    assert not gaussian_tail_certified(4, 0.0, -3.0, -1.5, 0.5)


def test_far_below_separatrix_passes_hardy_everywhere(cached):
    b0 = cached.shoot(5, 0.0).beta0
    beta = hardy_sufficient_beta(5, 0.0, b0) - 0.1
    prof = integrate(ProblemParams(5, 0.0, beta=beta), 200.0)
    assert hardy_check(prof) >= 0
    assert hardy_tail_radius(prof, b0) is not None


# -- discrete form -----------------------------------------------------------------


def _clamped_plate(N):
    """First eigenvalue of Δ² on the unit ball with φ = φ' = 0 on the sphere."""
    nu = mpmath.mpf(N) / 2 - 1
    f = lambda k: mpmath.besselj(nu, k) * mpmath.besseli(nu + 1, k) + mpmath.besseli(nu, k) * mpmath.besselj(nu + 1, k)
    return float(mpmath.findroot(f, 3.2 + 0.6 * (N - 2))) ** 4


@pytest.mark.parametrize("N", [2, 3, 5, 8])
def test_min_eig_matches_clamped_plate(N):
    exact = _clamped_plate(N)
    e = min_eig(None, (0.0, 1.0), 400, N=N)
    assert e.value == pytest.approx(exact, rel=5e-5)
    assert e.converged
    # second-order convergence: the error drops fourfold with the step
    coarse = min_eig(None, (0.0, 1.0), 200, N=N).value
    ratio = (coarse - exact) / (e.value - exact)
    assert 3.5 < ratio < 4.5


@settings(max_examples=20)
@given(c=st.floats(-50.0, 50.0), R=st.floats(0.5, 3.0))
def test_constant_potential_shifts_spectrum(c, R):
    base = min_eig(None, (0.0, R), 200, N=5)
    shifted = min_eig(None, (0.0, R), 200, N=5, potential=lambda r: np.full_like(r, c))
    assert shifted.value == pytest.approx(base.value - c, rel=1e-9, abs=1e-9 * abs(base.value))


@settings(max_examples=10)
@given(lam=st.floats(0.3, 5.0))
def test_clamped_eigenvalue_scales_like_r_minus_four(lam):
    a = min_eig(None, (0.0, 1.0), 300, N=6).value
    b = min_eig(None, (0.0, lam), 300, N=6).value
    assert b * lam**4 == pytest.approx(a, rel=1e-9)


@pytest.mark.parametrize("eps,sign", [(0.5, -1), (-0.2, 1)])
def test_rellich_constant_is_sharp_on_wide_annuli(eps, sign):
    C = hardy_constant(6)
    e = min_eig(None, (1.0, 1e4), 800, N=6, potential=lambda r: (1 + eps) * C / r**4)
    assert np.sign(e.value) == sign


def test_independent_recheck_agrees_with_discrete_value():
    C = hardy_constant(6)
    V = lambda r: 1.5 * C / r**4
    e = min_eig(None, (1.0, 1e4), 800, N=6, potential=V)
    assert e.value < 0 and e.witness_form < 0
    form, mass = independent_form(6, e.r, e.phi, V, origin=False)
    assert form / mass == pytest.approx(e.value, rel=0.05)


def test_grid_kinds():
    assert make_grid((0.0, 1.0), 64).kind == "uniform"
    assert make_grid((0.0, 1e3), 64).kind == "sinh"
    assert make_grid((1.0, 100.0), 64).kind == "log"
    with pytest.raises(ParameterError):
        make_grid((1.0, 0.5), 64)
    with pytest.raises(ParameterError):
        make_grid((0.0, 1.0), 10)
    with pytest.raises(ParameterError):
        make_grid((0.0, 1.0), 64, kind="log")


def test_form_operator_is_symmetric_positive_without_potential():
    op = discrete_form(5, (0.0, 2.0), 100)
    A = (op.D.T @ np.diag(op.tw) @ op.D)
    assert np.allclose(A, A.T)
    assert np.all(np.linalg.eigvalsh(A) > 0)


def test_min_eig_rejects_domain_beyond_profile():
    prof = integrate(ProblemParams(5, 0.0, beta=-3.0), 10.0)
    with pytest.raises(ParameterError):
        min_eig(prof, (0.0, 20.0))


# -- reports --------------------------------------------------------------------------


@pytest.mark.parametrize("N", [3, 4])
def test_low_dimensions_unstable_but_stable_at_infinity(cached, N):
    b0 = cached.shoot(N, 0.0).beta0
    prof = integrate(ProblemParams(N, 0.0, beta=b0 - 0.1), 1e3)
    rep = stability_report(prof, b0)
    assert rep.classification == STABLE_AT_INFINITY
    assert rep.min_eig.negative and rep.min_eig.converged
    assert rep.witness is not None
    d = rep.to_dict()
    assert d["classification"] == STABLE_AT_INFINITY


def test_separatrix_above_threshold_is_stable(cached):
    rep = stability_report(cached.separatrix(13, 0.0, 1e4).profile, cached.shoot(13, 0.0).beta0)
    assert rep.classification == STABLE
    assert rep.hardy_margin_global >= 0


def test_separatrix_below_threshold_is_unstable_at_infinity(cached):
    prof = cached.separatrix(5, 0.0, 1e4).profile
    rep = stability_report(prof, cached.shoot(5, 0.0).beta0, domain=(100.0, 1e4))
    assert rep.classification == UNSTABLE_AT_INFINITY
    assert rep.min_eig.negative


def test_report_needs_global_profile():
    with pytest.raises(ParameterError):
        stability_report(integrate(ProblemParams(5, 0.0, beta=0.0), 10.0))


def test_certificate_far_below_uses_hardy(cached):
    b0 = cached.shoot(5, 0.0).beta0
    cert = stability_certificate(ProblemParams(5, 0.0, beta=hardy_sufficient_beta(5, 0.0, b0) - 0.5), b0)
    assert cert.stable and cert.reason == "hardy"


def test_certificate_near_separatrix_is_unstable(cached):
    b0 = cached.shoot(5, 0.0).beta0
    cert = stability_certificate(ProblemParams(5, 0.0, beta=b0 - 0.01), b0)
    assert not cert.stable and cert.reason == "negative_eigenvalue"


def test_beta1_only_below_threshold(cached):
    with pytest.raises(NotApplicable):
        find_beta1(ProblemParams(13, 0.0), cached.shoot(13, 0.0).beta0)
    with pytest.raises(NotApplicable):
        find_beta1(ProblemParams(4, 0.0), cached.shoot(4, 0.0).beta0)


# -- characteristic roots -------------------------------------------------------------


@settings(max_examples=60)
@given(N=st.floats(4.5, 40.0), alpha=st.floats(-1.9, 6.0))
def test_roots_are_symmetric_and_solve_q(N, alpha):
    q = qn_roots(N, alpha)
    assert q.nu1 + q.nu4 == pytest.approx(2 * q.nu_star, abs=1e-9 * (1 + abs(q.nu1)))
    if q.status != "complex_pair":
        assert q.nu2 + q.nu3 == pytest.approx(2 * q.nu_star, abs=1e-9 * (1 + abs(q.nu2)))
    assert q.residual < 1e-9
    assert (q.status == "complex_pair") == (N < n_alpha(alpha))


def test_roots_for_thirteen_dimensions():
    q = qn_roots(13, 0.0)
    assert q.status == "real"
    assert sorted(q.roots) == pytest.approx(sorted([3.3400, -3.4831, -5.5169, -12.3400]), abs=1e-3)
    e = 2 * 4 * 11 * 9
    for nu in q.roots:
        assert p_poly(13, nu) == pytest.approx(e, rel=1e-12)


def test_roots_double_at_threshold():
    q = qn_roots(n_alpha(0.0), 0.0)
    assert q.nu2 == pytest.approx(q.nu3, abs=1e-6)


def test_roots_complex_below_threshold():
    assert qn_roots(6, 0.0).status == "complex_pair"
    with pytest.raises(NotApplicable):
        qn_roots(4, 0.0)
