"""Parametric families and their density power divergence matrices.

Every family exposes three integrals in closed form, all for a density power
``gamma > 0``:

* ``power_integral``        -- ``int f^gamma``
* ``score_power_integral``  -- ``int u f^gamma`` (a p-vector)
* ``r_matrix``              -- ``int u u^T f^gamma`` (p x p)

From these, at the model (``g = f_theta``)::

    J_beta = R_{1+beta}
    K_beta = R_{1+2 beta} - xi xi^T,      xi = int u f^{1+beta}

The generic quadrature route (:func:`quadrature_r_matrix`) integrates the
score outer product numerically and serves as the independent check on the
closed forms.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np
from scipy import optimize
from scipy import special as sp

from dpdwald.errors import DegenerateSampleError, DomainError, NumericError
from dpdwald.special import DEFAULT_QUADRATURE, QuadratureSpec, integrate

__all__ = [
    "ModelFamily",
    "Exponential",
    "Normal",
    "Weibull",
    "EXPONENTIAL",
    "NORMAL",
    "WEIBULL",
    "FAMILIES",
    "get_family",
    "density",
    "log_density",
    "score",
    "j_matrix",
    "k_matrix",
    "xi_vector",
    "sandwich",
    "quadrature_r_matrix",
    "exp_h_factor",
    "weibull_xi",
    "weibull_eta",
    "weibull_r_matrix",
    "sample",
]


class ModelFamily(ABC):
    """A parametric family ``{f_theta}`` with its score and DPD integrals."""

    name: str
    dim: int
    param_names: tuple[str, ...]
    support: tuple[float, float]
    has_closed_form_jk = True
    # K subtracts xi xi^T (the general sandwich); see Weibull for the exception
    k_subtracts_xi = True

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise DomainError(
                f"{self.name} expects {self.dim} parameter(s), got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)) or not self._in_domain(theta):
            raise DomainError(f"{self.name} parameter {theta.tolist()} outside domain")
        return theta

    def check_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        lo, hi = self.support
        if not np.all(np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"observation outside the {self.name} support")
        return x

    def in_domain(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(np.isfinite(theta)) and self._in_domain(theta))

    @abstractmethod
    def _in_domain(self, theta: np.ndarray) -> bool: ...

    @abstractmethod
    def logpdf(self, theta, x): ...

    def pdf(self, theta, x):
        return np.exp(self.logpdf(theta, x))

    @abstractmethod
    def score(self, theta, x) -> np.ndarray:
        """Score vectors as a ``(dim, n)`` array."""

    @abstractmethod
    def power_integral(self, theta, gamma: float) -> float: ...

    @abstractmethod
    def score_power_integral(self, theta, gamma: float) -> np.ndarray: ...

    @abstractmethod
    def r_matrix(self, theta, gamma: float) -> np.ndarray: ...

    @abstractmethod
    def quantile(self, theta, u): ...

    @abstractmethod
    def mle(self, x) -> np.ndarray: ...

    @abstractmethod
    def start_points(self, x) -> list[np.ndarray]:
        """Up to five starting values; the MLE comes first."""

    @abstractmethod
    def scale(self, theta) -> np.ndarray:
        """Natural size of each coordinate, used to make gradients unit-free."""

    def check_sample(self, x: np.ndarray) -> None:
        if x.size < self.dim:
            raise DegenerateSampleError(
                f"{self.name} needs at least {self.dim} observations, got {x.size}"
            )

    def center(self, theta) -> float:
        """A point in the bulk of ``f_theta``, used to split quadrature ranges."""
        return float(self.quantile(theta, 0.5))

    def __repr__(self):
        return f"{type(self).__name__}()"


class Exponential(ModelFamily):
    """Exponential distribution parameterized by its mean ``theta``."""

    name = "exponential"
    dim = 1
    param_names = ("theta",)
    support = (0.0, math.inf)

    def _in_domain(self, theta):
        return theta[0] > 0

    def logpdf(self, theta, x):
        t = theta[0]
        return -math.log(t) - np.asarray(x) / t

    def score(self, theta, x):
        t = theta[0]
        return ((np.asarray(x, dtype=float) - t) / t**2)[None, :]

    def power_integral(self, theta, gamma):
        t = theta[0]
        return t ** (1.0 - gamma) / gamma

    def score_power_integral(self, theta, gamma):
        t = theta[0]
        return np.array([t ** (-gamma) * (1.0 - gamma) / gamma**2])

    def r_matrix(self, theta, gamma):
        t = theta[0]
        c = 2.0 / gamma**3 - 2.0 / gamma**2 + 1.0 / gamma
        return np.array([[t ** (-1.0 - gamma) * c]])

    def quantile(self, theta, u):
        return -theta[0] * np.log1p(-np.asarray(u))

    def mle(self, x):
        return np.array([float(np.mean(x))])

    def check_sample(self, x):
        super().check_sample(x)
        if not np.any(x > 0):
            raise DegenerateSampleError("exponential sample is identically zero")

    def start_points(self, x):
        m = float(np.mean(x))
        med = float(np.median(x)) / math.log(2.0)
        if not med > 0:
            med = m
        cands = [m, med, 0.5 * med, 2.0 * med, 0.5 * (m + med)]
        return [np.array([c]) for c in cands]

    def scale(self, theta):
        return np.array([theta[0]])


class Normal(ModelFamily):
    """Normal distribution with ``theta = (mu, sigma)``."""

    name = "normal"
    dim = 2
    param_names = ("mu", "sigma")
    support = (-math.inf, math.inf)

    def _in_domain(self, theta):
        return theta[1] > 0

    def logpdf(self, theta, x):
        mu, s = theta
        z = (np.asarray(x) - mu) / s
        return -0.5 * z * z - math.log(s) - 0.5 * math.log(2.0 * math.pi)

    def score(self, theta, x):
        mu, s = theta
        z = (np.asarray(x, dtype=float) - mu) / s
        return np.vstack([z / s, (z * z - 1.0) / s])

    def _c(self, s, gamma):
        return (2.0 * math.pi) ** (0.5 * (1.0 - gamma)) * s ** (1.0 - gamma)

    def power_integral(self, theta, gamma):
        return self._c(theta[1], gamma) / math.sqrt(gamma)

    def score_power_integral(self, theta, gamma):
        s = theta[1]
        return np.array([0.0, self._c(s, gamma) / s * gamma**-1.5 * (1.0 - gamma)])

    def r_matrix(self, theta, gamma):
        s = theta[1]
        c = self._c(s, gamma) / s**2
        r11 = c * gamma**-1.5
        r22 = c * gamma**-0.5 * (3.0 / gamma**2 - 2.0 / gamma + 1.0)
        return np.array([[r11, 0.0], [0.0, r22]])

    def quantile(self, theta, u):
        return theta[0] + theta[1] * sp.ndtri(np.asarray(u))

    def mle(self, x):
        return np.array([float(np.mean(x)), float(np.std(x))])

    def check_sample(self, x):
        super().check_sample(x)
        if not np.ptp(x) > 0:
            raise DegenerateSampleError("normal sample has zero spread")

    def start_points(self, x):
        mle = self.mle(x)
        med = float(np.median(x))
        mad = 1.4826 * float(np.median(np.abs(x - med)))
        if not mad > 0:
            mad = mle[1]
        lo, hi = np.quantile(x, [0.2, 0.8])
        inner = x[(x >= lo) & (x <= hi)]
        trimmed = float(np.mean(inner)) if inner.size else med
        return [
            mle,
            np.array([med, mad]),
            np.array([med, 0.5 * mad]),
            np.array([med, 2.0 * mad]),
            np.array([trimmed, mad]),
        ]

    def scale(self, theta):
        return np.array([theta[1], theta[1]])


def _log_moment(a, k, gamma, p):
    """``int_0^inf y^a (log y)^k exp(-gamma y^p) dy`` for ``k`` in 0, 1, 2.

    Differentiating ``G(a) = gamma^{-s} Gamma(s) / p`` with ``s = (a+1)/p``
    in ``a`` brings down powers of ``log y``.
    """
    s = (a + 1.0) / p
    if not s > 0:
        raise DomainError(
            f"Weibull moment integral diverges at the origin (index {s:.4g} <= 0)"
        )
    g = math.exp(-s * math.log(gamma) + sp.gammaln(s)) / p
    if k == 0:
        return g
    d = (sp.digamma(s) - math.log(gamma)) / p
    if k == 1:
        return g * d
    if k == 2:
        return g * (d * d + sp.polygamma(1, s) / p**2)
    raise ValueError("closed form available only for log powers 0, 1, 2")


class Weibull(ModelFamily):
    """Two-parameter Weibull with ``theta = (sigma, p)`` (scale, shape).

    ``k_form`` selects the K matrix: ``"sandwich"`` subtracts ``xi xi^T`` as
    in the general definition; ``"paper"`` uses ``R_{1+2 beta}`` alone.
    """

    name = "weibull"
    dim = 2
    param_names = ("sigma", "p")
    support = (0.0, math.inf)

    def __init__(self, k_form: str = "paper"):
        if k_form not in ("sandwich", "paper"):
            raise DomainError(f"unknown Weibull K form {k_form!r}")
        self.k_form = k_form
        self.k_subtracts_xi = k_form == "sandwich"

    def __repr__(self):
        return f"Weibull(k_form={self.k_form!r})"

    def _in_domain(self, theta):
        return theta[0] > 0 and theta[1] > 0

    def logpdf(self, theta, x):
        s, p = theta
        y = np.asarray(x, dtype=float) / s
        with np.errstate(divide="ignore"):
            ly = np.log(y)
        return math.log(p / s) + (p - 1.0) * ly - y**p

    def score(self, theta, x):
        s, p = theta
        y = np.asarray(x, dtype=float) / s
        with np.errstate(divide="ignore", invalid="ignore"):
            ly = np.log(y)
            yp = y**p
            u2 = 1.0 / p + ly - yp * ly
        return np.vstack([(p / s) * (yp - 1.0), u2])

    # xi_{a,g} and eta_{a,k,g} scaled by (sigma/p)^{g-1}; see weibull_xi
    def _moment(self, a, k, gamma, p):
        return p * _log_moment(a + gamma * (p - 1.0), k, gamma, p)

    def power_integral(self, theta, gamma):
        s, p = theta
        return (p / s) ** (gamma - 1.0) * self._moment(0.0, 0, gamma, p)

    def score_power_integral(self, theta, gamma):
        s, p = theta
        m = self._moment
        c = (p / s) ** (gamma - 1.0)
        e0, ep = m(0.0, 0, gamma, p), m(p, 0, gamma, p)
        first = (p / s) * (ep - e0)
        second = e0 / p + m(0.0, 1, gamma, p) - m(p, 1, gamma, p)
        return c * np.array([first, second])

    def r_matrix(self, theta, gamma):
        s, p = theta
        return weibull_r_matrix(gamma, theta, method="exact")

    def quantile(self, theta, u):
        s, p = theta
        return s * (-np.log1p(-np.asarray(u))) ** (1.0 / p)

    def check_sample(self, x):
        super().check_sample(x)
        if np.any(x <= 0):
            raise DegenerateSampleError("Weibull sample contains non-positive values")
        if not np.ptp(x) > 0:
            raise DegenerateSampleError("Weibull sample has zero spread")

    def mle(self, x):
        # profile likelihood: shape solves a monotone equation, scale follows
        lx = np.log(x)
        mlx = float(np.mean(lx))
        lx0 = lx - lx.max()

        def eq(p):
            w = np.exp(p * lx0)
            return 1.0 / p + mlx - float(np.dot(w, lx) / w.sum())

        lo, hi = 1e-3, 1.0
        while eq(hi) > 0:
            hi *= 2.0
            if hi > 1e6:
                raise DegenerateSampleError("Weibull shape MLE is unbounded")
        while eq(lo) < 0:
            lo /= 2.0
            if lo < 1e-12:
                raise DegenerateSampleError("Weibull shape MLE is at zero")
        p = optimize.brentq(eq, lo, hi, xtol=1e-14, rtol=1e-15)
        s = math.exp(lx.max() + math.log(np.mean(np.exp(p * lx0))) / p)
        return np.array([s, p])

    def start_points(self, x):
        mle = self.mle(x)
        lx = np.log(x)
        q25, med, q75 = np.quantile(lx, [0.25, 0.5, 0.75])
        iqr = q75 - q25
        # log E for E ~ Exp(1): median log(ln 2), IQR log(ln 4) - log(ln 4/3)
        p_r = 1.5725 / iqr if iqr > 0 else mle[1]
        s_r = math.exp(med - math.log(math.log(2.0)) / p_r)
        return [
            mle,
            np.array([s_r, p_r]),
            np.array([s_r, 2.0 * p_r]),
            np.array([s_r, 0.5 * p_r]),
            np.array([0.5 * (s_r + mle[0]), 0.5 * (p_r + mle[1])]),
        ]

    def scale(self, theta):
        return np.array([theta[0], theta[1]])

    def center(self, theta):
        return float(theta[0])


EXPONENTIAL = Exponential()
NORMAL = Normal()
WEIBULL = Weibull()

FAMILIES = {"exponential": EXPONENTIAL, "normal": NORMAL, "weibull": WEIBULL}
_ALIASES = {"exp": "exponential", "norm": "normal", "weib": "weibull"}


def get_family(name: str, **options) -> ModelFamily:
    """Look up a family by name; options (e.g. ``k_form``) build a fresh instance."""
    key = _ALIASES.get(name.lower(), name.lower())
    if key not in FAMILIES:
        raise DomainError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    if options:
        if key != "weibull":
            raise DomainError(f"{key} family takes no options")
        return Weibull(**options)
    return FAMILIES[key]


# -- module-level operations -------------------------------------------------


def density(family: ModelFamily, theta, x):
    theta = family.check_theta(theta)
    return family.pdf(theta, family.check_support(x))


def log_density(family: ModelFamily, theta, x):
    theta = family.check_theta(theta)
    return family.logpdf(theta, family.check_support(x))


def score(family: ModelFamily, theta, x):
    """Score ``d/dtheta log f_theta(x)``; shape ``(dim,)`` for scalar ``x``."""
    theta = family.check_theta(theta)
    xx = family.check_support(x)
    u = family.score(theta, xx)
    return u[:, 0] if np.ndim(x) == 0 else u


def _check_beta(beta):
    if not (beta >= 0 and math.isfinite(beta)):
        raise DomainError(f"tuning parameter must be a finite nonnegative number, got {beta!r}")


def _symmetrize(a: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite entries in DPD matrix")
    return 0.5 * (a + a.T)


def quadrature_r_matrix(
    family: ModelFamily, theta, gamma: float, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> np.ndarray:
    """``int u u^T f^gamma`` by adaptive quadrature over the family support."""
    theta = family.check_theta(theta)
    lo, hi = family.support
    c = family.center(theta)
    out = np.empty((family.dim, family.dim))

    def piece(i, j):
        def g(x):
            xv = np.array([x])
            u = family.score(theta, xv)[:, 0]
            return float(u[i] * u[j] * math.exp(gamma * family.logpdf(theta, xv)[0]))

        return integrate(g, lo, c, spec) + integrate(g, c, hi, spec)

    for i in range(family.dim):
        for j in range(i, family.dim):
            out[i, j] = out[j, i] = piece(i, j)
    return out


def quadrature_xi(
    family: ModelFamily, theta, gamma: float, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> np.ndarray:
    """``int u f^gamma`` by adaptive quadrature."""
    theta = family.check_theta(theta)
    lo, hi = family.support
    c = family.center(theta)
    out = np.empty(family.dim)
    for i in range(family.dim):

        def g(x, i=i):
            xv = np.array([x])
            return float(
                family.score(theta, xv)[i, 0] * math.exp(gamma * family.logpdf(theta, xv)[0])
            )

        out[i] = integrate(g, lo, c, spec) + integrate(g, c, hi, spec)
    return out


def xi_vector(family: ModelFamily, theta, beta: float, method: str = "auto") -> np.ndarray:
    """``xi_beta(theta) = int u f^{1+beta}`` evaluated at the model."""
    theta = family.check_theta(theta)
    _check_beta(beta)
    if method == "quadrature" or not family.has_closed_form_jk:
        return quadrature_xi(family, theta, 1.0 + beta)
    return family.score_power_integral(theta, 1.0 + beta)


def j_matrix(family: ModelFamily, theta, beta: float, method: str = "auto") -> np.ndarray:
    """``J_beta(theta) = int u u^T f^{1+beta}`` (at the model)."""
    theta = family.check_theta(theta)
    _check_beta(beta)
    if method == "quadrature" or not family.has_closed_form_jk:
        r = quadrature_r_matrix(family, theta, 1.0 + beta)
    else:
        r = family.r_matrix(theta, 1.0 + beta)
    return _symmetrize(r)


def k_matrix(family: ModelFamily, theta, beta: float, method: str = "auto") -> np.ndarray:
    """``K_beta(theta) = int u u^T f^{1+2 beta} - xi xi^T`` (at the model).

    The ``xi xi^T`` correction is skipped when ``family.k_subtracts_xi`` is
    false (the Weibull ``k_form="paper"`` variant).
    """
    theta = family.check_theta(theta)
    _check_beta(beta)
    if method == "quadrature" or not family.has_closed_form_jk:
        r = quadrature_r_matrix(family, theta, 1.0 + 2.0 * beta)
    else:
        r = family.r_matrix(theta, 1.0 + 2.0 * beta)
    if family.k_subtracts_xi:
        xi = xi_vector(family, theta, beta, method)
        r = r - np.outer(xi, xi)
    return _symmetrize(r)


def sandwich(family: ModelFamily, theta, beta: float, method: str = "auto"):
    """Return ``(J, K, J^{-1} K J^{-1})`` at ``theta``."""
    J = j_matrix(family, theta, beta, method)
    K = k_matrix(family, theta, beta, method)
    try:
        Jinv = np.linalg.inv(J)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"J matrix is singular at theta={np.asarray(theta).tolist()}") from exc
    S = _symmetrize(Jinv @ K @ Jinv)
    return J, K, S


def exp_h_factor(beta: float) -> float:
    """Asymptotic variance inflation of the exponential MDPDE relative to the MLE.

    ``Var(sqrt(n) theta_hat_beta) -> h(beta) theta^2``.
    """
    _check_beta(beta)
    b = beta
    poly = 1 + 4 * b + 9 * b**2 + 14 * b**3 + 13 * b**4 + 8 * b**5 + 4 * b**6
    return (1 + b) ** 2 * poly / ((1 + b**2) ** 2 * (1 + 2 * b) ** 3)


def _weibull_theta(theta):
    return WEIBULL.check_theta(theta)


def weibull_xi(alpha: float, density_power: float, theta) -> float:
    """``int_0^inf (x/sigma)^alpha f_theta(x)^density_power dx`` in closed form."""
    s, p = _weibull_theta(theta)
    g = density_power
    if not g > 0:
        raise DomainError("density power must be positive")
    idx = (g * p - g + alpha + 1.0) / p
    if not idx > 0:
        raise DomainError(f"Weibull xi integral diverges (gamma argument {idx:.4g} <= 0)")
    return math.exp(
        (g - 1.0) * math.log(p / s) - idx * math.log(g) + sp.gammaln(idx)
    )


def weibull_eta(
    alpha: float,
    log_power: float,
    density_power: float,
    theta,
    method: str = "quadrature",
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """``int_0^inf (x/sigma)^alpha [log(x/sigma)]^log_power f_theta^density_power dx``.

    With ``method="quadrature"`` the integral is taken in ``t = log y`` so the
    logarithmic singularity at the origin becomes a smooth tail:
    ``sigma (p/sigma)^g int exp(t(a+1)) t^k exp(-g e^{pt}) dt``.
    ``method="exact"`` uses digamma/trigamma closed forms (log powers 0-2).
    """
    s, p = _weibull_theta(theta)
    g = density_power
    if not g > 0:
        raise DomainError("density power must be positive")
    a = alpha + g * p - g
    if not (a + 1.0) / p > 0:
        raise DomainError("Weibull eta integral diverges at the origin")
    front = s * (p / s) ** g
    if method == "exact":
        k = int(log_power)
        if k != log_power or k not in (0, 1, 2):
            raise DomainError("exact eta needs log power 0, 1 or 2")
        return front * _log_moment(a, k, g, p)
    if method != "quadrature":
        raise DomainError(f"unknown eta method {method!r}")
    k = log_power
    # peak of the log-transformed integrand, used as the split point
    t0 = math.log((a + 1.0) / (g * p)) / p

    def f(t):
        if p * t > 700.0:
            return 0.0
        e = t * (a + 1.0) - g * math.exp(p * t)
        if e < -745.0:
            return 0.0
        return (t**k if k else 1.0) * math.exp(e)

    val = integrate(f, -math.inf, t0, spec) + integrate(f, t0, math.inf, spec)
    return front * val


def weibull_r_matrix(density_power: float, theta, method: str = "exact") -> np.ndarray:
    """``R_gamma(theta) = int u u^T f^gamma`` assembled from xi and eta terms."""
    s, p = _weibull_theta(theta)
    g = density_power

    def xi(a):
        return weibull_xi(a, g, (s, p))

    def eta(a, k):
        return weibull_eta(a, k, g, (s, p), method=method)

    r11 = (p / s) ** 2 * (xi(0.0) - 2.0 * xi(p) + xi(2.0 * p))
    r12 = (p / s) * (
        -xi(0.0) / p - eta(0.0, 1) + 2.0 * eta(p, 1) + xi(p) / p - eta(2.0 * p, 1)
    )
    r22 = (
        xi(0.0) / p**2
        + eta(0.0, 2)
        + eta(2.0 * p, 2)
        + 2.0 / p * eta(0.0, 1)
        - 2.0 * eta(p, 2)
        - 2.0 / p * eta(p, 1)
    )
    return np.array([[r11, r12], [r12, r22]])


def sample(family: ModelFamily, theta, n: int, seed=None) -> np.ndarray:
    """``n`` i.i.d. draws by inverse-cdf transform of uniforms.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence` or a
    :class:`numpy.random.Generator`.
    """
    theta = family.check_theta(theta)
    if n < 0:
        raise DomainError("sample size must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return family.quantile(theta, rng.random(int(n)))
