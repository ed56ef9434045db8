import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dpdwald.errors import DomainError, QuadratureError
from dpdwald.special import (
    QuadratureSpec,
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    integrate,
    log_gamma,
    noncentral_chi2_cdf,
    std_normal_cdf,
    std_normal_quantile,
    student_t_cdf,
)


@pytest.mark.parametrize(
    "x, expected",
    [(1.0, 0.0), (0.5, math.log(math.sqrt(math.pi))), (10.0, math.log(362880.0))],
)
def test_log_gamma_known_values(x, expected):
    assert log_gamma(x) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("x", [1e-6, 3e-3, 0.7, 2.5, 17.3, 1234.5, 1e6])
def test_log_gamma_against_mpmath(x):
    ref = float(mpmath.loggamma(mpmath.mpf(x)))
    assert log_gamma(x) == pytest.approx(ref, rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, -2.5])
def test_log_gamma_domain(x):
    with pytest.raises(DomainError):
        log_gamma(x)


def _bisect_quantile(p, df):
    lo, hi = 0.0, 1.0
    while float(mpmath.gammainc(df / 2, 0, hi / 2, regularized=True)) < p:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(mpmath.gammainc(df / 2, 0, mid / 2, regularized=True)) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_chi2_quantile_matches_bisection_oracle():
    assert chi2_quantile(0.95, 1) == pytest.approx(3.84146, abs=5e-6)
    for p, df in [(0.95, 1), (0.9, 2), (0.99, 5), (0.05, 3)]:
        assert chi2_quantile(p, df) == pytest.approx(_bisect_quantile(p, df), rel=1e-10)


def test_chi2_cdf_at_origin_and_tails():
    assert chi2_cdf(0.0, 3) == 0.0
    assert chi2_sf(0.0, 3) == 1.0
    assert chi2_sf(400.0, 1) < 1e-80
    assert chi2_cdf(400.0, 1) == 1.0


@settings(max_examples=60, deadline=None)
@given(
    p=st.floats(min_value=1e-6, max_value=1 - 1e-6),
    df=st.floats(min_value=0.5, max_value=60.0),
)
def test_chi2_round_trip(p, df):
    x = chi2_quantile(p, df)
    assert chi2_cdf(x, df) == pytest.approx(p, rel=1e-10, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(min_value=0.0, max_value=200.0), df=st.floats(min_value=0.5, max_value=40.0))
def test_chi2_cdf_plus_sf_is_one(x, df):
    assert chi2_cdf(x, df) + chi2_sf(x, df) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_chi2_quantile_domain(p):
    with pytest.raises(DomainError):
        chi2_quantile(p, 2)


def test_noncentral_reduces_to_central():
    for x, df in [(1.0, 1), (3.84146, 1), (10.0, 4)]:
        assert noncentral_chi2_cdf(x, df, 0.0) == chi2_cdf(x, df)


def test_noncentral_is_dominated_by_central():
    v = noncentral_chi2_cdf(3.84146, 1, 4.0)
    assert 0.0 < v < chi2_cdf(3.84146, 1)


@pytest.mark.parametrize("x, df, delta", [(10.0, 2, 5.0), (3.84, 1, 0.3), (50.0, 3, 40.0), (2.0, 5, 120.0)])
def test_noncentral_against_scipy(x, df, delta):
    assert noncentral_chi2_cdf(x, df, delta) == pytest.approx(stats.ncx2.cdf(x, df, delta), abs=1e-12)


def test_noncentral_against_simulation():
    z = np.random.default_rng(11).standard_normal((2, 1_000_000))
    draws = (z[0] + math.sqrt(5.0)) ** 2 + z[1] ** 2
    est = float(np.mean(draws <= 10.0))
    se = math.sqrt(est * (1 - est) / draws.size)
    assert abs(noncentral_chi2_cdf(10.0, 2, 5.0) - est) < 3 * se


def test_noncentral_negative_delta():
    with pytest.raises(DomainError):
        noncentral_chi2_cdf(1.0, 1, -0.1)


@settings(max_examples=40, deadline=None)
@given(
    d1=st.floats(min_value=0.0, max_value=30.0),
    d2=st.floats(min_value=0.0, max_value=30.0),
    x=st.floats(min_value=0.1, max_value=40.0),
)
def test_noncentral_monotone_in_delta(d1, d2, x):
    lo, hi = sorted((d1, d2))
    assert noncentral_chi2_cdf(x, 2, hi) <= noncentral_chi2_cdf(x, 2, lo) + 1e-14


@settings(max_examples=50, deadline=None)
@given(p=st.floats(min_value=1e-10, max_value=1 - 1e-10))
def test_normal_round_trip(p):
    assert std_normal_cdf(std_normal_quantile(p)) == pytest.approx(p, rel=1e-12, abs=1e-15)


def test_normal_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-14)


@pytest.mark.parametrize("x, df", [(2.15, 14), (-1.3, 3), (0.4, 1), (7.0, 30)])
def test_student_t_against_mpmath(x, df):
    # t cdf via the regularized incomplete beta in mpmath
    t = mpmath.mpf(x)
    tail = 0.5 * mpmath.betainc(df / 2, 0.5, 0, df / (df + t * t), regularized=True)
    ref = float(1 - tail if x > 0 else tail)
    assert student_t_cdf(x, df) == pytest.approx(ref, abs=1e-14)
    assert student_t_cdf(0.0, df) == 0.5


def test_integrate_known_integrals():
    assert integrate(lambda x: math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, abs=1e-12)
    assert integrate(lambda x: x * math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, abs=1e-12)
    assert integrate(lambda x: x**4.5 * math.exp(-x), 0.0, math.inf) == pytest.approx(
        math.gamma(5.5), rel=1e-12
    )
    assert integrate(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)
    assert integrate(math.sin, 1.0, 1.0) == 0.0


def test_integrate_reports_failure():
    spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-14, max_subdivisions=2)
    with pytest.raises(QuadratureError) as info:
        integrate(lambda x: math.sin(50 * x) / (x + 1e-3), 0.0, 20.0, spec)
    assert math.isfinite(info.value.estimate)


def test_quadrature_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(max_subdivisions=0)
    with pytest.raises(DomainError):
        integrate(math.sin, 1.0, 0.0)
