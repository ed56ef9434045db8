"""Asymptotic power and sample-size planning for the Wald-type tests.

Two approximations are offered:

* at a fixed alternative ``theta*`` the statistic ``W/n`` is asymptotically
  normal around ``l(theta*)``, giving a normal power approximation;
* along contiguous alternatives ``theta0 + d / sqrt(n)`` the statistic tends
  to a noncentral chi-square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dpdwald.errors import DomainError, InputError
from dpdwald.models import ModelFamily, sandwich
from dpdwald.special import (
    chi2_quantile,
    noncentral_chi2_cdf,
    std_normal_cdf,
    std_normal_quantile,
)
from dpdwald.wald import Restriction, quadratic_form

__all__ = [
    "PowerQuery",
    "PowerResult",
    "l_quadratic",
    "sigma_w_squared",
    "approx_power_simple",
    "required_sample_size",
    "sample_size_terms",
    "contiguous_power_simple",
    "composite_l",
    "composite_power_approx",
    "contiguous_power_composite",
    "evaluate_query",
]

VARIANCE_FORMS = ("delta", "paper")
_FD_REL = 1e-6


@dataclass(frozen=True)
class PowerResult:
    """Approximate power with the quantities that produced it.

    ``sigma_w`` is set in approx mode and ``noncentrality`` in contiguous
    mode; the other is ``nan``.
    """

    power: float
    noncentrality: float = math.nan
    sigma_w: float = math.nan
    l_value: float = math.nan
    n: int | None = None
    alpha: float = 0.05
    df: int = 1

    def to_dict(self) -> dict:
        return {
            "power": self.power,
            "noncentrality": None if math.isnan(self.noncentrality) else self.noncentrality,
            "sigma_w": None if math.isnan(self.sigma_w) else self.sigma_w,
            "l_value": None if math.isnan(self.l_value) else self.l_value,
            "n": self.n,
            "alpha": self.alpha,
            "df": self.df,
        }


@dataclass(frozen=True)
class PowerQuery:
    """A power question for :func:`evaluate_query`.

    ``mode="approx"`` needs ``theta_star`` and ``n``; ``mode="contiguous"``
    needs ``d`` (or ``delta`` for a composite null). With a ``restriction``
    the null is composite and ``theta0`` is a point satisfying it (used only
    in contiguous mode).
    """

    family: ModelFamily
    beta: float
    alpha: float = 0.05
    mode: str = "approx"
    theta0: tuple | None = None
    restriction: Restriction | None = None
    theta_star: tuple | None = None
    n: int | None = None
    d: tuple | None = None
    delta: tuple | None = None
    variance: str = "delta"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.mode not in ("approx", "contiguous"):
            raise InputError(f"mode must be 'approx' or 'contiguous', got {self.mode!r}")
        if self.n is not None and self.n < 1:
            raise DomainError("sample size must be at least 1")
        if self.theta0 is None and self.restriction is None:
            raise InputError("give theta0 (simple null) or a restriction")


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise DomainError(f"level must lie in (0, 1), got {alpha!r}")


def _sigma(family, theta, beta):
    return sandwich(family, family.check_theta(theta), beta)[2]


def l_quadratic(theta, theta0, family: ModelFamily, beta: float) -> float:
    """``l(theta) = (theta - theta0)^T Sigma(theta0)^{-1} (theta - theta0)``."""
    theta = family.check_theta(theta)
    theta0 = family.check_theta(theta0)
    d = theta - theta0
    if not np.any(d):
        return 0.0
    return quadratic_form(_sigma(family, theta0, beta), d)


def sigma_w_squared(theta_star, theta0, family: ModelFamily, beta: float, variance: str = "delta") -> float:
    """Asymptotic variance of ``sqrt(n) (W/n - l(theta*))`` at a fixed alternative.

    ``variance="delta"`` is the delta-method value
    ``4 d^T Sigma0^{-1} Sigma* Sigma0^{-1} d`` (``Sigma0`` at ``theta0``,
    ``Sigma*`` at ``theta*``). ``variance="paper"`` gives the shortcut
    ``4 d^T Sigma*^{-1} d``, which coincides with it only when the
    covariance does not depend on the parameter.
    """
    theta_star = family.check_theta(theta_star)
    theta0 = family.check_theta(theta0)
    d = theta_star - theta0
    S_star = _sigma(family, theta_star, beta)
    if variance == "paper":
        return 4.0 * quadratic_form(S_star, d)
    if variance != "delta":
        raise InputError(f"variance must be one of {VARIANCE_FORMS}, got {variance!r}")
    S0 = _sigma(family, theta0, beta)
    g = np.linalg.solve(S0, d)
    return float(4.0 * g @ S_star @ g)


def _normal_power(n, c, l, sw2):
    if not sw2 > 0:
        raise DomainError("alternative coincides with the null; power approximation is degenerate")
    sw = math.sqrt(sw2)
    return 1.0 - std_normal_cdf(math.sqrt(n) / sw * (c / n - l)), sw


def approx_power_simple(
    family: ModelFamily,
    theta0,
    theta_star,
    beta: float,
    n: int,
    alpha: float = 0.05,
    variance: str = "delta",
) -> PowerResult:
    """Normal approximation ``1 - Phi(sqrt(n)/sigma_W (c/n - l(theta*)))``.

    ``c`` is the upper-``alpha`` chi-square point with ``p`` degrees of freedom.
    """
    _check_alpha(alpha)
    if n < 1:
        raise DomainError("sample size must be at least 1")
    c = chi2_quantile(1.0 - alpha, family.dim)
    l = l_quadratic(theta_star, theta0, family, beta)
    sw2 = sigma_w_squared(theta_star, theta0, family, beta, variance)
    power, sw = _normal_power(n, c, l, sw2)
    return PowerResult(power, sigma_w=sw, l_value=l, n=int(n), alpha=alpha, df=family.dim)


def sample_size_terms(family, theta0, theta_star, beta, alpha, target_power, variance="delta"):
    """``(A, B, l)`` with ``A = sigma_W^2 z^2``, ``B = c l / 2`` and ``z = Phi^{-1}(power)``."""
    _check_alpha(alpha)
    if not 0 < target_power < 1:
        raise DomainError("target power must lie in (0, 1)")
    c = chi2_quantile(1.0 - alpha, family.dim)
    l = l_quadratic(theta_star, theta0, family, beta)
    if not l > 0:
        raise DomainError("alternative coincides with the null")
    sw2 = sigma_w_squared(theta_star, theta0, family, beta, variance)
    z = std_normal_quantile(target_power)
    return sw2 * z * z, 0.5 * c * l, l


def required_sample_size(
    theta_star,
    theta0,
    family: ModelFamily,
    beta: float,
    alpha: float = 0.05,
    target_power: float = 0.8,
    *,
    variance: str = "delta",
    formula: str = "exact",
) -> int:
    """Smallest integer ``n`` above the root of the power approximation.

    ``formula="exact"`` solves ``l n - sigma_W z sqrt(n) - c = 0`` for
    ``sqrt(n)``, i.e. ``n* = (A + 4B + sqrt(A (A + 8B))) / (2 l^2)`` when
    ``z >= 0``. ``formula="printed"`` evaluates
    ``(A + B + sqrt(A (A + 2B))) / (2 l^2)`` instead. Returns
    ``floor(n*) + 1``.
    """
    A, B, l = sample_size_terms(family, theta0, theta_star, beta, alpha, target_power, variance)
    if formula == "exact":
        z_sign = 1.0 if target_power >= 0.5 else -1.0
        n_star = (A + 4.0 * B + z_sign * math.sqrt(A * (A + 8.0 * B))) / (2.0 * l * l)
    elif formula == "printed":
        n_star = (A + B + math.sqrt(A * (A + 2.0 * B))) / (2.0 * l * l)
    else:
        raise InputError(f"formula must be 'exact' or 'printed', got {formula!r}")
    return int(math.floor(n_star)) + 1


def contiguous_power_simple(d, family: ModelFamily, theta0, beta: float, alpha: float = 0.05) -> PowerResult:
    """Power along ``theta0 + d / sqrt(n)``: noncentral chi-square with
    ``delta = d^T Sigma(theta0)^{-1} d``.
    """
    _check_alpha(alpha)
    theta0 = family.check_theta(theta0)
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.shape != (family.dim,):
        raise DomainError(f"direction must have {family.dim} entries")
    delta = quadratic_form(_sigma(family, theta0, beta), d) if np.any(d) else 0.0
    c = chi2_quantile(1.0 - alpha, family.dim)
    power = 1.0 - noncentral_chi2_cdf(c, family.dim, delta)
    return PowerResult(power, noncentrality=delta, alpha=alpha, df=family.dim)


def composite_l(theta, theta_ref, restriction: Restriction, family: ModelFamily, beta: float) -> float:
    """``l*(theta, theta_ref) = m(theta)^T [M^T Sigma M (theta_ref)]^{-1} m(theta)``."""
    theta = family.check_theta(theta)
    theta_ref = family.check_theta(theta_ref)
    m, _ = restriction.evaluate(theta, family.dim)
    _, M = restriction.evaluate(theta_ref, family.dim)
    V = M.T @ _sigma(family, theta_ref, beta) @ M
    return quadratic_form(V, m) if np.any(m) else 0.0


def composite_power_approx(
    theta_star,
    restriction: Restriction,
    family: ModelFamily,
    beta: float,
    n: int,
    alpha: float = 0.05,
) -> PowerResult:
    """Normal power approximation for the composite test at ``theta*``.

    ``sigma_W^2 = g^T Sigma(theta*) g`` with ``g`` the gradient of
    ``l*(., theta*)`` at ``theta*``, by central differences.
    """
    _check_alpha(alpha)
    if n < 1:
        raise DomainError("sample size must be at least 1")
    theta_star = family.check_theta(theta_star)
    l = composite_l(theta_star, theta_star, restriction, family, beta)
    if not l > 0:
        raise DomainError("theta* satisfies the null restriction; power approximation is degenerate")
    g = np.empty(family.dim)
    for j in range(family.dim):
        h = _FD_REL * max(abs(theta_star[j]), 1.0)
        e = np.zeros(family.dim)
        e[j] = h
        g[j] = (
            composite_l(theta_star + e, theta_star, restriction, family, beta)
            - composite_l(theta_star - e, theta_star, restriction, family, beta)
        ) / (2.0 * h)
    sw2 = float(g @ _sigma(family, theta_star, beta) @ g)
    c = chi2_quantile(1.0 - alpha, restriction.r)
    power, sw = _normal_power(n, c, l, sw2)
    return PowerResult(power, sigma_w=sw, l_value=l, n=int(n), alpha=alpha, df=restriction.r)


def contiguous_power_composite(
    restriction: Restriction,
    family: ModelFamily,
    theta0,
    beta: float,
    alpha: float = 0.05,
    *,
    d=None,
    delta=None,
) -> PowerResult:
    """Power along alternatives with ``m(theta_n) = delta / sqrt(n)``.

    The limit is noncentral chi-square with ``r`` degrees of freedom and
    noncentrality ``delta^T [M^T Sigma M (theta0)]^{-1} delta``. A parameter
    direction ``d`` may be given instead; it maps to ``delta = M(theta0)^T d``.
    """
    _check_alpha(alpha)
    theta0 = family.check_theta(theta0)
    if (d is None) == (delta is None):
        raise InputError("give exactly one of d or delta")
    m0, M = restriction.evaluate(theta0, family.dim)
    if np.max(np.abs(m0)) > 1e-8 * max(1.0, float(np.max(np.abs(theta0)))):
        raise DomainError("theta0 does not satisfy the null restriction")
    if d is not None:
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if d.shape != (family.dim,):
            raise DomainError(f"direction must have {family.dim} entries")
        delta = M.T @ d
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if delta.shape != (restriction.r,):
        raise DomainError(f"delta must have {restriction.r} entries")
    V = M.T @ _sigma(family, theta0, beta) @ M
    nc = quadratic_form(V, delta) if np.any(delta) else 0.0
    c = chi2_quantile(1.0 - alpha, restriction.r)
    power = 1.0 - noncentral_chi2_cdf(c, restriction.r, nc)
    return PowerResult(power, noncentrality=nc, alpha=alpha, df=restriction.r)


def evaluate_query(q: PowerQuery) -> PowerResult:
    """Dispatch a :class:`PowerQuery` to the matching approximation."""
    if q.mode == "approx":
        if q.theta_star is None or q.n is None:
            raise InputError("approx mode needs theta_star and n")
        if q.restriction is None:
            return approx_power_simple(
                q.family, q.theta0, q.theta_star, q.beta, q.n, q.alpha, q.variance
            )
        return composite_power_approx(q.theta_star, q.restriction, q.family, q.beta, q.n, q.alpha)
    if q.restriction is None:
        if q.d is None:
            raise InputError("contiguous mode needs d")
        return contiguous_power_simple(q.d, q.family, q.theta0, q.beta, q.alpha)
    if q.theta0 is None:
        raise InputError("composite contiguous mode needs a null point theta0")
    return contiguous_power_composite(
        q.restriction, q.family, q.theta0, q.beta, q.alpha, d=q.d, delta=q.delta
    )
