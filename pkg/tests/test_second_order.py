import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab.errors import NotApplicable, ParameterError
from henonlab.second_order import (
    STABLE_SINGULAR,
    UNSTABLE_SINGULAR,
    SecondOrderParams,
    hardy2,
    integrate2,
    min_form2,
    quotient2,
    series_start2,
    singular_offset_error,
    singular_solution,
    sphere_solution,
    threshold2,
    witness2,
)


@settings(max_examples=50)
@given(N=st.integers(3, 40), alpha=st.floats(-1.99, 10.0), r=st.floats(1e-3, 1e6))
def test_singular_solution_residual(N, alpha, r):
    assert abs(singular_solution(N, alpha).residual(r)) <= 1e-12


def test_singular_solution_needs_three_dimensions():
    with pytest.raises(NotApplicable):
        singular_solution(2, 0.0)


@pytest.mark.parametrize("u0", [-2.0, 0.0, math.log(2), 3.0])
def test_sphere_solution_residual(u0):
    sol = sphere_solution(u0)
    r = np.geomspace(1e-4, 1e4, 400)
    assert np.max(np.abs(sol.residual(r))) <= 1e-12
    assert float(sol.u(0.0)) == pytest.approx(u0, abs=1e-14)


def test_sphere_solution_mass_by_quadrature():
    from scipy.integrate import quad

    sol = sphere_solution(0.3)
    m, _ = quad(lambda r: 2 * math.pi * r * math.exp(float(sol.u(r))), 0, np.inf)
    assert m == pytest.approx(sol.mass, rel=1e-9)


@pytest.mark.parametrize("u0", [0.0, 1.5])
def test_plane_integration_matches_closed_form(u0):
    prof = integrate2(SecondOrderParams(2, 0.0, u0=u0), 1e3)
    exact = sphere_solution(u0)
    assert np.max(np.abs(prof.u - exact.u(prof.r))) <= 1e-7
    assert np.max(np.abs(prof.p - exact.du(prof.r))) <= 1e-7


def test_series_start_rejects_bad_radius():
    with pytest.raises(ParameterError):
        series_start2(SecondOrderParams(3, 0.0), 0.0)


@pytest.mark.parametrize(
    "kwargs", [dict(N=1, alpha=0.0), dict(N=3, alpha=-2.0), dict(N=3.5, alpha=0.0), dict(N=3, alpha=0.0, u0=math.inf)]
)
def test_parameter_validation(kwargs):
    with pytest.raises(ParameterError):
        SecondOrderParams(**kwargs)


@pytest.mark.parametrize("N,alpha", [(3, 0.0), (5, 1.0), (9, 0.0)])
def test_regular_solutions_approach_the_singular_one(N, alpha):
    prof = integrate2(SecondOrderParams(N, alpha), 1e6)
    err = np.abs(singular_offset_error(prof))
    assert err[-1] < 1e-2
    assert err[-1] < err[prof.r.size // 2]
    assert np.all(np.diff(prof.u) < 0)


@pytest.mark.parametrize(
    "N,alpha,want",
    [(10, 0.0, STABLE_SINGULAR), (9, 0.0, UNSTABLE_SINGULAR), (14, 1.0, STABLE_SINGULAR),
     (13, 1.0, UNSTABLE_SINGULAR), (4, -1.5, STABLE_SINGULAR), (3, -1.5, UNSTABLE_SINGULAR)],
)
def test_threshold_flips_at_ten_plus_four_alpha(N, alpha, want):
    assert threshold2(N, alpha) == want


@settings(max_examples=100)
@given(N=st.integers(3, 60), alpha=st.floats(-1.99, 12.0))
def test_threshold_is_the_hardy_comparison(N, alpha):
    stable = (2 + alpha) * (N - 2) <= hardy2(N) * (1 + 1e-12)
    if abs((2 + alpha) * (N - 2) - hardy2(N)) > 1e-9:
        assert (threshold2(N, alpha) == STABLE_SINGULAR) == stable


def test_witness_for_ten_dimensions():
    w = witness2(10, 1.0)
    assert w.quotient < 0
    assert w.quotient == pytest.approx(w.exact, rel=1e-3)
    assert w.ansatz == pytest.approx(w.exact, rel=1e-3)
    assert w.scale_defect <= 1e-10
    d = w.to_dict()
    assert set(d["scaled"]) == {"10.0", "100.0"}


@pytest.mark.parametrize("N,alpha", [(9, 1.0), (14, 1.0), (10, 0.0)])
def test_witness_outside_its_range(N, alpha):
    with pytest.raises(NotApplicable):
        witness2(N, alpha)


@settings(max_examples=15)
@given(N=st.integers(3, 20), c=st.floats(0.0, 200.0))
def test_min_form_converges_to_the_log_annulus_value(N, c):
    """On (1,16) the form reduces to a constant-coefficient problem in t = ln r."""
    exact = (math.pi / math.log(16)) ** 2 + hardy2(N) - c
    coarse = min_form2(N, c, (1.0, 16.0), 200).value
    fine = min_form2(N, c, (1.0, 16.0), 400).value
    # second order in the step, with an error constant set by the weight exponent N-2
    assert (coarse - exact) / (fine - exact) == pytest.approx(4.0, rel=0.02)
    assert abs(fine - exact) <= 5e-4 * (1 + hardy2(N))


def test_quotient_of_the_minimiser_reproduces_the_value():
    f = min_form2(12, 30.0, (2.0, 32.0), 300)
    assert quotient2(12, 30.0, f.r, f.phi) == pytest.approx(f.value, rel=1e-10)


def test_annulus_validation():
    with pytest.raises(ParameterError):
        min_form2(5, 1.0, (2.0, 1.0))
    with pytest.raises(ParameterError):
        min_form2(5, 1.0, (1.0, 2.0), n=8)
