"""Wald-type tests built on the minimum DPD estimator.

Simple nulls ``H0: theta = theta0`` normalise by the sandwich covariance at
``theta0``. Composite nulls ``H0: m(theta) = 0`` evaluate ``m``, its
Jacobian-transpose ``M`` and the covariance at the estimate. Both are
chi-square under the null.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from dpdwald.errors import (
    ConditioningWarning,
    DomainError,
    InputError,
    MatrixError,
    RestrictionError,
)
from dpdwald.estimation import MdpdeFit, fit_mdpde
from dpdwald.models import (
    EXPONENTIAL,
    NORMAL,
    WEIBULL,
    ModelFamily,
    Weibull,
    exp_h_factor,
    sandwich,
    weibull_eta,
)
from dpdwald.special import chi2_sf, std_normal_cdf, student_t_cdf

__all__ = [
    "Restriction",
    "WaldTestResult",
    "simple_wald",
    "composite_wald",
    "exp_simple_wald",
    "normal_mean_wald",
    "weibull_scale_wald",
    "weibull_scale_statistic",
    "signed_wald",
    "quadratic_form",
]

COND_WARN = 1e12
RANK_TOL = 1e-10
ALTERNATIVES = ("two-sided", "greater", "less")
# beyond this many degrees of freedom t and normal agree to ~1e-9
_T_NORMAL_SWITCH = 100_000


@dataclass(frozen=True)
class Restriction:
    """Composite null ``m(theta) = 0``.

    ``m`` maps a parameter vector to an ``r``-vector and ``M`` to the
    ``p x r`` matrix of its derivatives (the transposed Jacobian).
    """

    m: Callable[[np.ndarray], np.ndarray]
    M: Callable[[np.ndarray], np.ndarray]
    r: int
    description: str = ""

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise RestrictionError(f"number of restrictions must be a positive integer, got {self.r!r}")

    @classmethod
    def fix_component(cls, family: ModelFamily, component, value: float) -> "Restriction":
        """``theta[component] = value``; ``component`` is an index or parameter name."""
        j = _component_index(family, component)
        e = np.zeros((family.dim, 1))
        e[j, 0] = 1.0
        value = float(value)
        return cls(
            m=lambda th: np.array([th[j] - value]),
            M=lambda th: e.copy(),
            r=1,
            description=f"{family.param_names[j]} = {value:g}",
        )

    @classmethod
    def linear(cls, L, c=None, description: str = "") -> "Restriction":
        """``L theta = c`` for an ``r x p`` matrix ``L``."""
        L = np.atleast_2d(np.asarray(L, dtype=float))
        c = np.zeros(L.shape[0]) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
        if c.shape != (L.shape[0],):
            raise RestrictionError("right-hand side length must equal the number of rows of L")
        return cls(
            m=lambda th: L @ th - c,
            M=lambda th: L.T.copy(),
            r=L.shape[0],
            description=description or f"linear restriction with {L.shape[0]} row(s)",
        )

    def evaluate(self, theta, dim: int):
        """``(m(theta), M(theta))`` with shape and rank checks."""
        theta = np.asarray(theta, dtype=float)
        m = np.atleast_1d(np.asarray(self.m(theta), dtype=float))
        M = np.asarray(self.M(theta), dtype=float)
        if M.ndim == 1:
            M = M[:, None]
        if self.r > dim:
            raise RestrictionError(f"{self.r} restrictions exceed the {dim} parameters")
        if m.shape != (self.r,) or M.shape != (dim, self.r):
            raise RestrictionError(
                f"restriction shapes m{m.shape}, M{M.shape} do not match r={self.r}, p={dim}"
            )
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(M))):
            raise RestrictionError("restriction produced non-finite values")
        sv = np.linalg.svd(M, compute_uv=False)
        if sv.min() <= RANK_TOL:
            raise RestrictionError(
                f"restriction Jacobian is rank deficient (smallest singular value {sv.min():.3g})"
            )
        return m, M


@dataclass(frozen=True)
class WaldTestResult:
    """Outcome of a Wald-type test.

    For one-sided tests ``statistic`` is the signed root; otherwise it is the
    nonnegative quadratic form.
    """

    statistic: float
    df: int
    alternative: str
    p_value: float
    beta: float
    null_description: str
    n: int = 0
    reference: str = "chi2"
    extra: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            "statistic": self.statistic,
            "df": self.df,
            "alternative": self.alternative,
            "p_value": self.p_value,
            "beta": self.beta,
            "null": self.null_description,
            "n": self.n,
            "reference": self.reference,
        }
        out.update(self.extra)
        return out


def _component_index(family: ModelFamily, component) -> int:
    if isinstance(component, str):
        if component not in family.param_names:
            raise InputError(
                f"{family.name} has no parameter {component!r}; choose from {family.param_names}"
            )
        return family.param_names.index(component)
    j = int(component)
    if not 0 <= j < family.dim:
        raise InputError(f"component index {j} out of range for {family.name}")
    return j


def quadratic_form(A, v) -> float:
    """``v^T A^{-1} v`` for symmetric positive definite ``A``.

    Uses a Cholesky factorisation; warns with :class:`ConditioningWarning`
    when the condition number exceeds 1e12.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(A)):
        raise MatrixError("covariance matrix has non-finite entries")
    try:
        cf = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise MatrixError("covariance matrix is not positive definite") from exc
    d = np.diag(cf[0])
    if d.min() <= 0:
        raise MatrixError("covariance matrix is singular")
    cond = np.linalg.cond(A)
    if not cond <= COND_WARN:
        warnings.warn(
            f"covariance condition number {cond:.3g} exceeds {COND_WARN:g}",
            ConditioningWarning,
            stacklevel=3,
        )
    return float(v @ linalg.cho_solve(cf, v, check_finite=False))


def _result(stat, df, fit_or_beta, desc, n, **extra):
    beta = fit_or_beta.beta if isinstance(fit_or_beta, MdpdeFit) else float(fit_or_beta)
    stat = max(float(stat), 0.0)
    p = min(max(chi2_sf(stat, df), 0.0), 1.0)
    return WaldTestResult(stat, int(df), "two-sided", p, beta, desc, int(n), "chi2", extra)


def _check_fit(fit: MdpdeFit):
    if not fit.converged:
        raise InputError("Wald tests need a converged fit")


def simple_wald(fit: MdpdeFit, theta0) -> WaldTestResult:
    """Test ``H0: theta = theta0`` with the covariance evaluated at ``theta0``.

    ``W = n (theta_hat - theta0)^T Sigma(theta0)^{-1} (theta_hat - theta0)``,
    referred to chi-square with ``p`` degrees of freedom.
    """
    _check_fit(fit)
    fam = fit.family
    theta0 = fam.check_theta(theta0)
    _, _, S0 = sandwich(fam, theta0, fit.beta)
    d = fit.theta_hat - theta0
    W = fit.n * quadratic_form(S0, d) if np.any(d) else 0.0
    desc = ", ".join(f"{k} = {v:g}" for k, v in zip(fam.param_names, theta0))
    return _result(W, fam.dim, fit, desc, fit.n)


def composite_wald(fit: MdpdeFit, restriction: Restriction) -> WaldTestResult:
    """Test ``H0: m(theta) = 0`` with every matrix evaluated at the estimate.

    ``W = n m^T [M^T Sigma M]^{-1} m``, chi-square with ``r`` degrees of freedom.
    """
    _check_fit(fit)
    m, M = restriction.evaluate(fit.theta_hat, fit.family.dim)
    V = M.T @ fit.Sigma @ M
    W = fit.n * quadratic_form(V, m) if np.any(m) else 0.0
    return _result(W, restriction.r, fit, restriction.description, fit.n)


def exp_simple_wald(sample, beta: float, theta0: float, fit: MdpdeFit | None = None) -> WaldTestResult:
    """Exponential mean test ``W = n (theta_hat - theta0)^2 / (h(beta) theta0^2)``."""
    theta0 = float(EXPONENTIAL.check_theta(theta0)[0])
    if fit is None:
        fit = fit_mdpde(EXPONENTIAL, sample, beta)
    elif fit.family.name != "exponential" or fit.beta != beta:
        raise InputError("supplied fit does not match the exponential family and beta")
    d = float(fit.theta_hat[0]) - theta0
    W = fit.n * d * d / (exp_h_factor(beta) * theta0 * theta0)
    return _result(W, 1, fit, f"theta = {theta0:g}", fit.n, theta_hat=float(fit.theta_hat[0]))


def normal_mean_multiplier(beta: float) -> float:
    """``(2 beta + 1)^{3/2} / (beta + 1)^3``; equals 1 at ``beta = 0``."""
    return (2.0 * beta + 1.0) ** 1.5 / (beta + 1.0) ** 3


def normal_mean_wald(sample, beta: float, mu0: float, fit: MdpdeFit | None = None) -> WaldTestResult:
    """Normal mean test with unknown ``sigma``.

    ``W = n (mu_hat - mu0)^2 (2b+1)^{3/2} / (sigma_hat^2 (b+1)^3)``.
    """
    if fit is None:
        fit = fit_mdpde(NORMAL, sample, beta)
    elif fit.family.name != "normal" or fit.beta != beta:
        raise InputError("supplied fit does not match the normal family and beta")
    mu, s = fit.theta_hat
    W = fit.n * (mu - mu0) ** 2 * normal_mean_multiplier(beta) / (s * s)
    return _result(W, 1, fit, f"mu = {float(mu0):g}", fit.n, theta_hat=fit.theta_hat.tolist())


def _eps(alpha, gamma, p):
    s = ((p - 1.0) * gamma + alpha + 1.0) / p
    if not s > 0:
        raise DomainError("Weibull moment diverges at the origin")
    return math.exp(-s * math.log(gamma) + math.lgamma(s))


def _kappa(alpha, delta, gamma, p, method):
    # scale-free moment p * int (log y)^delta y^{(p-1)gamma+alpha} e^{-gamma y^p} dy
    return weibull_eta(alpha, delta, gamma, (1.0, p), method=method) / p ** (gamma - 1.0)


def _weibull_rt(gamma, p, method):
    e0, ep, e2p = _eps(0.0, gamma, p), _eps(p, gamma, p), _eps(2.0 * p, gamma, p)
    k01, kp1, k2p1 = (_kappa(a, 1, gamma, p, method) for a in (0.0, p, 2.0 * p))
    k02, kp2, k2p2 = (_kappa(a, 2, gamma, p, method) for a in (0.0, p, 2.0 * p))
    r11 = e0 - 2.0 * ep + e2p
    r12 = -e0 / p - k01 + 2.0 * kp1 + ep / p - k2p1
    r22 = e0 / p**2 + k02 + k2p2 + 2.0 / p * k01 - 2.0 * kp2 - 2.0 / p * kp1
    et = np.array([ep - e0, e0 / p + k01 - kp1])
    return np.array([[r11, r12], [r12, r22]]), et


def weibull_scale_statistic(
    theta_hat, n: int, beta: float, sigma0: float, k_form: str = "paper", method: str = "quadrature"
) -> float:
    """Closed-form Weibull scale statistic at a given estimate.

    With scale-free matrices ``R~_J`` (density power ``1+b``) and ``R~_K``
    (``1+2b``, less ``e~ e~^T`` for the sandwich K form),
    ``W = n (sigma_hat - sigma0)^2 (p/sigma)^2 det(R~_J)^2 / (v R~_K v^T)``
    with ``v = (r~22, -r~12)`` taken from ``R~_J``.
    """
    s, p = WEIBULL.check_theta(theta_hat)
    RJ, _ = _weibull_rt(1.0 + beta, p, method)
    RK, et = _weibull_rt(1.0 + 2.0 * beta, p, method)
    if k_form == "sandwich":
        _, etJ = _weibull_rt(1.0 + beta, p, method)
        RK = RK - np.outer(etJ, etJ)
    elif k_form != "paper":
        raise DomainError(f"unknown Weibull K form {k_form!r}")
    det = RJ[0, 0] * RJ[1, 1] - RJ[0, 1] ** 2
    v = np.array([RJ[1, 1], -RJ[0, 1]])
    denom = float(v @ RK @ v)
    if not (denom > 0 and det != 0):
        raise MatrixError("Weibull scale variance is not positive")
    return n * (s - sigma0) ** 2 * (p / s) ** 2 * det**2 / denom


def weibull_scale_wald(
    sample,
    beta: float,
    sigma0: float,
    fit: MdpdeFit | None = None,
    family: Weibull = WEIBULL,
    method: str = "quadrature",
) -> WaldTestResult:
    """Weibull test of ``H0: sigma = sigma0`` with the shape as nuisance.

    Log-moment terms are computed by ``method`` (quadrature by default).
    """
    if fit is None:
        fit = fit_mdpde(family, sample, beta)
    elif fit.family.name != "weibull" or fit.beta != beta:
        raise InputError("supplied fit does not match the Weibull family and beta")
    sigma0 = float(sigma0)
    if not sigma0 > 0:
        raise DomainError("null scale must be positive")
    W = weibull_scale_statistic(fit.theta_hat, fit.n, beta, sigma0, fit.family.k_form, method)
    return _result(W, 1, fit, f"sigma = {sigma0:g}", fit.n, theta_hat=fit.theta_hat.tolist())


def _ref_cdf(x, n, reference):
    if reference == "normal" or (reference == "t" and n - 1 > _T_NORMAL_SWITCH):
        return std_normal_cdf(x)
    if reference == "t":
        if n < 2:
            raise DomainError("t reference needs at least two observations")
        return student_t_cdf(x, n - 1)
    raise InputError(f"reference must be 't' or 'normal', got {reference!r}")


def signed_wald(
    fit: MdpdeFit,
    null_value: float = 0.0,
    component=0,
    alternative: str = "greater",
    *,
    restriction: Restriction | None = None,
    reference: str = "t",
    ddof: int = 0,
) -> WaldTestResult:
    """Signed root ``T = sqrt(n) (theta_hat_j - theta0) / sigma_hat_j``.

    ``sigma_hat_j^2`` is the asymptotic variance of the tested component.
    For a one-parameter family the null fixes the whole parameter, so the
    variance is taken at ``theta0`` (matching :func:`simple_wald`);
    otherwise it is taken at the estimate (matching :func:`composite_wald`).
    A scalar ``restriction`` may replace ``component``/``null_value``.

    ``ddof`` rescales the variance by ``n / (n - ddof)``; ``ddof=1`` at
    ``beta = 0`` on the normal family gives the one-sample t statistic.
    The p-value uses t with ``n - 1`` degrees of freedom (or the standard
    normal with ``reference="normal"``).
    """
    _check_fit(fit)
    if alternative not in ALTERNATIVES:
        raise InputError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    if not (0 <= ddof < fit.n):
        raise DomainError("ddof must lie in [0, n)")
    fam = fit.family
    if restriction is None:
        restriction = Restriction.fix_component(fam, component, null_value)
    if restriction.r != 1:
        raise RestrictionError("signed test needs a single restriction")
    m, M = restriction.evaluate(fit.theta_hat, fam.dim)
    if fam.dim == 1:
        # invert the scalar restriction along its (only) coordinate
        theta0 = fit.theta_hat - m / M[:, 0]
        _, _, S = sandwich(fam, fam.check_theta(theta0), fit.beta)
    else:
        S = fit.Sigma
    var = float(M[:, 0] @ S @ M[:, 0]) * fit.n / (fit.n - ddof)
    if not var > 0:
        raise MatrixError("component variance is not positive")
    T = math.sqrt(fit.n) * float(m[0]) / math.sqrt(var)
    if alternative == "greater":
        p = 1.0 - _ref_cdf(T, fit.n, reference) if T < 0 else _ref_cdf(-T, fit.n, reference)
    elif alternative == "less":
        p = _ref_cdf(T, fit.n, reference)
    else:
        p = 2.0 * _ref_cdf(-abs(T), fit.n, reference)
    return WaldTestResult(
        T,
        1,
        alternative,
        min(max(p, 0.0), 1.0),
        fit.beta,
        restriction.description,
        fit.n,
        reference,
        {"sigma_hat": math.sqrt(var), "ddof": ddof},
    )
