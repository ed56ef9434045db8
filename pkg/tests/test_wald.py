import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdwald.errors import ConditioningWarning, InputError, MatrixError, RestrictionError
from dpdwald.estimation import fit_mdpde
from dpdwald.models import EXPONENTIAL, NORMAL, WEIBULL, Weibull, quadrature_r_matrix, sample
from dpdwald.simulation import McScenario, MixtureSpec, TestSpec, run_scenario
from dpdwald.special import chi2_sf
from dpdwald.wald import (
    Restriction,
    composite_wald,
    exp_simple_wald,
    normal_mean_multiplier,
    normal_mean_wald,
    quadratic_form,
    signed_wald,
    simple_wald,
    weibull_scale_wald,
)

MU = Restriction.fix_component(NORMAL, "mu", 0.0)


def test_null_at_estimate_gives_zero(telephone, leukemia):
    fit = fit_mdpde(EXPONENTIAL, leukemia, 0.3)
    res = simple_wald(fit, fit.theta_hat)
    assert res.statistic == 0.0 and res.p_value == 1.0
    nfit = fit_mdpde(NORMAL, telephone, 0.3)
    res = composite_wald(nfit, Restriction.fix_component(NORMAL, "mu", nfit.theta_hat[0]))
    assert res.statistic == 0.0 and res.p_value == 1.0
    assert exp_simple_wald(leukemia, 0.3, fit.theta_hat[0]).statistic == 0.0
    wx = sample(WEIBULL, (1.5, 1.5), 60, seed=2)
    wfit = fit_mdpde(WEIBULL, wx, 0.2)
    assert weibull_scale_wald(wx, 0.2, wfit.theta_hat[0], fit=wfit).statistic == 0.0


def test_signed_at_null_gives_half(telephone):
    fit = fit_mdpde(NORMAL, telephone, 0.2)
    for alt in ("greater", "less"):
        assert signed_wald(fit, fit.theta_hat[0], "mu", alt).p_value == pytest.approx(0.5, abs=1e-15)


def test_leukemia_classical(leukemia):
    res = simple_wald(fit_mdpde(EXPONENTIAL, leukemia, 0.0), [140.0])
    assert res.statistic == pytest.approx(16 * (246.40625 - 140) ** 2 / 140**2, rel=1e-12)
    assert res.p_value == pytest.approx(0.0024, abs=1e-4)
    assert res.df == 1 and res.alternative == "two-sided"
    clean = np.delete(leukemia, [13, 15])
    assert exp_simple_wald(clean, 0.0, 140.0).p_value == pytest.approx(0.9733, abs=1e-4)


def test_classical_reduction_normal(darwin):
    fit = fit_mdpde(NORMAL, darwin, 0.0)
    direct = darwin.size * np.mean(darwin) ** 2 / np.var(darwin)
    assert composite_wald(fit, MU).statistic == pytest.approx(direct, rel=1e-10)
    assert normal_mean_wald(darwin, 0.0, 0.0).statistic == pytest.approx(direct, rel=1e-10)
    # simple null on both parameters: inverse Fisher information at theta0
    th0 = np.array([0.0, 30.0])
    d = fit.theta_hat - th0
    direct2 = darwin.size * (d[0] ** 2 / 30.0**2 + 2 * d[1] ** 2 / 30.0**2)
    assert simple_wald(fit, th0).statistic == pytest.approx(direct2, rel=1e-10)


def test_classical_reduction_weibull_against_quadrature_information():
    x = sample(WEIBULL, (1.5, 1.5), 80, seed=17)
    fit = fit_mdpde(WEIBULL, x, 0.0)
    info = quadrature_r_matrix(WEIBULL, fit.theta_hat, 1.0)
    v11 = np.linalg.inv(info)[0, 0]
    direct = x.size * (fit.theta_hat[0] - 1.4) ** 2 / v11
    assert weibull_scale_wald(x, 0.0, 1.4, fit=fit).statistic == pytest.approx(direct, rel=1e-10)


def test_normal_multiplier():
    assert normal_mean_multiplier(0.5) == pytest.approx(2 * math.sqrt(2) / 3.375, abs=1e-12)
    assert normal_mean_multiplier(0.5) == pytest.approx(0.83805, abs=1e-5)
    assert normal_mean_multiplier(0.0) == 1.0


@pytest.mark.parametrize("beta", [0.0, 0.1, 0.5])
def test_exponential_dual_path(beta):
    for r in range(10):
        x = sample(EXPONENTIAL, (2.0,), 40, seed=[3, r])
        fit = fit_mdpde(EXPONENTIAL, x, beta)
        a = simple_wald(fit, [2.3]).statistic
        b = exp_simple_wald(x, beta, 2.3, fit=fit).statistic
        assert b == pytest.approx(a, rel=1e-10)


@pytest.mark.parametrize("k_form", ["paper", "sandwich"])
@pytest.mark.parametrize("beta", [0.0, 0.2, 0.5])
def test_weibull_dual_path(beta, k_form):
    fam = Weibull(k_form)
    for r in range(5):
        x = sample(fam, (1.5, 1.5), 70, seed=[4, r])
        fit = fit_mdpde(fam, x, beta)
        a = composite_wald(fit, Restriction.fix_component(fam, "sigma", 1.5)).statistic
        b = weibull_scale_wald(x, beta, 1.5, fit=fit).statistic
        c = weibull_scale_wald(x, beta, 1.5, fit=fit, method="exact").statistic
        assert b == pytest.approx(a, rel=1e-8)
        assert c == pytest.approx(a, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(0.0, 1.0), seed=st.integers(0, 5000), mu0=st.floats(-2, 2))
def test_signed_square_equals_two_sided(beta, seed, mu0):
    x = sample(NORMAL, (0.3, 1.0), 30, seed)
    fit = fit_mdpde(NORMAL, x, beta)
    T = signed_wald(fit, mu0, "mu", "greater").statistic
    W = composite_wald(fit, Restriction.fix_component(NORMAL, "mu", mu0)).statistic
    assert T * T == pytest.approx(W, rel=1e-12, abs=1e-14)
    xe = sample(EXPONENTIAL, (2.0,), 30, seed)
    efit = fit_mdpde(EXPONENTIAL, xe, beta)
    T = signed_wald(efit, 1.7, 0, "less").statistic
    assert T * T == pytest.approx(simple_wald(efit, [1.7]).statistic, rel=1e-12)


def test_signed_two_sided_with_normal_reference_matches_chi_square(darwin):
    fit = fit_mdpde(NORMAL, darwin, 0.3)
    s = signed_wald(fit, 0.0, "mu", "two-sided", reference="normal")
    assert s.p_value == pytest.approx(composite_wald(fit, MU).p_value, rel=1e-10)


def test_one_sided_p_values_are_complementary(darwin):
    fit = fit_mdpde(NORMAL, darwin, 0.15)
    g = signed_wald(fit, 10.0, "mu", "greater").p_value
    l = signed_wald(fit, 10.0, "mu", "less").p_value
    assert g + l == pytest.approx(1.0, abs=1e-14)


def test_signed_t_classical_matches_student_t(telephone):
    from scipy import stats

    fit = fit_mdpde(NORMAL, telephone, 0.0)
    ours = signed_wald(fit, 0.0, "mu", "greater", ddof=1)
    ref = stats.ttest_1samp(telephone, 0.0, alternative="greater")
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-10)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2000), beta=st.sampled_from([0.0, 0.3]), a=st.floats(0.01, 3), b=st.floats(0.01, 3))
def test_statistic_monotone_in_distance(seed, beta, a, b):
    x = sample(NORMAL, (0.0, 1.0), 25, seed)
    fit = fit_mdpde(NORMAL, x, beta)
    near, far = sorted((a, b))
    if far - near < 1e-6:
        return
    mu = fit.theta_hat[0]
    for sign in (1.0, -1.0):
        w_near = composite_wald(fit, Restriction.fix_component(NORMAL, 0, mu + sign * near)).statistic
        w_far = composite_wald(fit, Restriction.fix_component(NORMAL, 0, mu + sign * far)).statistic
        assert w_far > w_near


def test_linear_restriction_matches_component(darwin):
    fit = fit_mdpde(NORMAL, darwin, 0.2)
    a = composite_wald(fit, Restriction.linear([[1.0, 0.0]], [5.0])).statistic
    b = composite_wald(fit, Restriction.fix_component(NORMAL, "mu", 5.0)).statistic
    assert a == pytest.approx(b, rel=1e-14)


def test_two_restrictions_give_two_degrees_of_freedom(darwin):
    fit = fit_mdpde(NORMAL, darwin, 0.2)
    res = composite_wald(fit, Restriction.linear(np.eye(2), [0.0, 30.0]))
    assert res.df == 2
    # with M = I the composite statistic uses Sigma at the estimate
    d = fit.theta_hat - [0.0, 30.0]
    assert res.statistic == pytest.approx(fit.n * d @ np.linalg.solve(fit.Sigma, d), rel=1e-12)
    assert res.p_value == pytest.approx(chi2_sf(res.statistic, 2))


def test_restriction_errors(darwin):
    fit = fit_mdpde(NORMAL, darwin, 0.2)
    with pytest.raises(RestrictionError):
        composite_wald(fit, Restriction(lambda t: np.array([t[0]]), lambda t: np.zeros((2, 1)), 1))
    with pytest.raises(RestrictionError):
        composite_wald(fit, Restriction(lambda t: np.array([t[0]]), lambda t: np.ones((3, 1)), 1))
    with pytest.raises(RestrictionError):
        composite_wald(fit, Restriction.linear(np.ones((3, 2))))
    with pytest.raises(RestrictionError):
        Restriction(lambda t: t, lambda t: t, 0)
    with pytest.raises(InputError):
        Restriction.fix_component(NORMAL, "shape", 0.0)
    with pytest.raises(RestrictionError):
        signed_wald(fit, restriction=Restriction.linear(np.eye(2)))
    with pytest.raises(InputError):
        signed_wald(fit, 0.0, "mu", "sideways")


def test_conditioning_guard():
    A = np.diag([1.0, 1e-14])
    with pytest.warns(ConditioningWarning):
        quadratic_form(A, [1.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        quadratic_form(np.eye(2), [1.0, 1.0])
    with pytest.raises(MatrixError):
        quadratic_form(np.array([[1.0, 2.0], [2.0, 1.0]]), [1.0, 0.0])


def test_result_to_dict(leukemia):
    d = exp_simple_wald(leukemia, 0.2, 140.0).to_dict()
    assert d["df"] == 1 and 0.0 <= d["p_value"] <= 1.0 and d["null"] == "theta = 140"


@pytest.mark.parametrize(
    "fam, theta, test",
    [
        (EXPONENTIAL, (2.0,), dict(kind="simple", theta0=(2.0,))),
        (NORMAL, (0.0, 1.0), dict(kind="composite", component="mu", value=0.0)),
    ],
)
def test_chi_square_calibration_under_null(fam, theta, test):
    sc = McScenario(
        MixtureSpec.single(fam, theta),
        TestSpec(fam, **test),
        beta_grid=(0.0, 0.2, 0.5),
        n_grid=(200,),
        replications=2000,
        nominal_alpha=0.05,
        seed=31,
    )
    rep = run_scenario(sc)
    for b in sc.beta_grid:
        assert 0.035 <= rep.rate(b, 200) <= 0.065
