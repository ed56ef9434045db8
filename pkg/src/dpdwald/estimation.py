"""Minimum density power divergence estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dpdwald.errors import (
    ConvergenceError,
    DomainError,
    MatrixError,
    NumericError,
    StepFailureError,
)
from dpdwald.models import EXPONENTIAL, ModelFamily, sandwich

__all__ = [
    "MdpdeFit",
    "dpd_objective",
    "estimating_residual",
    "objective_gradient",
    "fit_mdpde",
    "exp_fixed_point_step",
    "exp_fixed_point",
]

GRAD_TOL = 1e-8
STEP_TOL = 1e-10
MAX_ITER = 500
_FD_STEP = 1e-5


@dataclass(frozen=True)
class MdpdeFit:
    """A fitted MDPDE with its sandwich matrices evaluated at ``theta_hat``."""

    family: ModelFamily
    beta: float
    theta_hat: np.ndarray
    J: np.ndarray
    K: np.ndarray
    Sigma: np.ndarray
    objective_value: float
    converged: bool
    iterations: int
    gradient_norm: float
    n: int
    candidates: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "family": self.family.name,
            "beta": self.beta,
            "theta_hat": dict(zip(self.family.param_names, self.theta_hat.tolist())),
            "J": self.J.tolist(),
            "K": self.K.tolist(),
            "Sigma": self.Sigma.tolist(),
            "objective_value": self.objective_value,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "n": self.n,
        }


def _prepare(family, theta, beta, sample):
    theta = family.check_theta(theta)
    if not (beta >= 0 and math.isfinite(beta)):
        raise DomainError(f"tuning parameter must be nonnegative, got {beta!r}")
    x = family.check_support(sample)
    return theta, x


def _shifted_objective(family, theta, beta, x):
    # dpd_objective + (1 + 1/beta); the constant keeps the beta -> 0 limit finite
    lf = family.logpdf(theta, x)
    if beta == 0:
        return 1.0 - float(np.mean(lf))
    return family.power_integral(theta, 1.0 + beta) - (1.0 + beta) * float(
        np.mean(np.expm1(beta * lf))
    ) / beta


def dpd_objective(family: ModelFamily, theta, beta: float, sample) -> float:
    """Empirical DPD objective ``int f^{1+b} - (1 + 1/b) mean f^b(X_i)``.

    At ``beta = 0`` this is the negative mean log-likelihood.
    """
    theta, x = _prepare(family, theta, beta, sample)
    if beta == 0:
        return -float(np.mean(family.logpdf(theta, x)))
    return _shifted_objective(family, theta, beta, x) - (1.0 + 1.0 / beta)


def _residual(family, theta, beta, x):
    u = family.score(theta, x)
    if beta == 0:
        return u.mean(axis=1)
    w = np.exp(beta * family.logpdf(theta, x))
    return (u * w).mean(axis=1) - family.score_power_integral(theta, 1.0 + beta)


def estimating_residual(family: ModelFamily, theta, beta: float, sample) -> np.ndarray:
    """``mean u(X_i) f^beta(X_i) - int u f^{1+beta}``; zero at the MDPDE."""
    theta, x = _prepare(family, theta, beta, sample)
    return _residual(family, theta, beta, x)


def objective_gradient(family: ModelFamily, theta, beta: float, sample) -> np.ndarray:
    """Gradient of :func:`dpd_objective`, equal to ``-(1+beta)`` times the residual."""
    theta, x = _prepare(family, theta, beta, sample)
    return -(1.0 + beta) * _residual(family, theta, beta, x)


def _objective_scale(family, theta, beta):
    return 1.0 if beta == 0 else family.power_integral(theta, 1.0 + beta)


def _gradient_norm(family, theta, beta, grad):
    return float(
        np.linalg.norm(family.scale(theta) * grad) / _objective_scale(family, theta, beta)
    )


def _newton(family, x, beta, theta, tol, max_iter):
    """Damped Newton on the objective in coordinates scaled by the start point.

    Returns ``(theta, objective, gradient_norm, iterations, converged)``.
    """
    s0 = family.scale(theta)
    dim = family.dim

    def fval(th):
        if not family.in_domain(th):
            return math.inf
        try:
            v = _shifted_objective(family, th, beta, x)
        except (DomainError, NumericError, FloatingPointError):
            return math.inf
        return v if math.isfinite(v) else math.inf

    def grad(th):
        return -(1.0 + beta) * _residual(family, th, beta, x)

    f0 = fval(theta)
    if not math.isfinite(f0):
        return theta, f0, math.inf, 0, False
    g = grad(theta)
    gn = _gradient_norm(family, theta, beta, g)
    it = 0
    while it < max_iter:
        if gn < tol:
            return theta, f0, gn, it, True
        it += 1
        gz = s0 * g
        H = np.empty((dim, dim))
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = _FD_STEP * s0[j]
            tp, tm = theta + e, theta - e
            if not (family.in_domain(tp) and family.in_domain(tm)):
                return theta, f0, gn, it, False
            H[:, j] = s0 * (grad(tp) - grad(tm)) / (2.0 * _FD_STEP)
        H = 0.5 * (H + H.T)
        if not np.all(np.isfinite(H)):
            return theta, f0, gn, it, False
        evals, evecs = np.linalg.eigh(H)
        top = max(abs(evals).max(), 1e-300)
        # clip to a positive definite model; curvature floor keeps steps bounded
        clipped = np.maximum(np.abs(evals), 1e-8 * top)
        dz = -evecs @ ((evecs.T @ gz) / clipped)
        slope = float(gz @ dz)
        t = 1.0
        accepted = False
        while t > 1e-12:
            cand = theta + t * s0 * dz
            fc = fval(cand)
            if math.isfinite(fc):
                if fc <= f0 + 1e-4 * t * slope:
                    accepted = True
                    break
                # objective flat to rounding: fall back on the gradient norm
                if abs(fc - f0) <= 1e-13 * max(1.0, abs(f0)):
                    gc = grad(cand)
                    if _gradient_norm(family, cand, beta, gc) < gn:
                        accepted = True
                        break
            t *= 0.5
        if not accepted:
            return theta, f0, gn, it, False
        step = float(np.max(np.abs(t * dz)))
        theta, f0 = cand, fc
        g = grad(theta)
        gn = _gradient_norm(family, theta, beta, g)
        if step < STEP_TOL:
            return theta, f0, gn, it, gn < tol
    return theta, f0, gn, it, gn < tol


def exp_fixed_point_step(sample, beta: float, theta_current: float) -> float:
    """One step of the exponential MDPDE fixed-point map.

    ``theta <- sum x e^{-b x/theta} / (sum e^{-b x/theta} - n b / (1+b)^2)``.
    """
    x = EXPONENTIAL.check_support(sample)
    if not theta_current > 0:
        raise DomainError("exponential mean must be positive")
    if beta == 0:
        return float(np.mean(x))
    w = np.exp(-beta * x / theta_current)
    denom = float(w.sum()) - x.size * beta / (1.0 + beta) ** 2
    if not denom > 0:
        raise StepFailureError(
            f"fixed-point denominator {denom:.3g} is not positive", best=theta_current
        )
    return float(np.dot(x, w)) / denom


def exp_fixed_point(sample, beta: float, start: float, tol: float = 1e-14, max_iter: int = MAX_ITER):
    """Iterate :func:`exp_fixed_point_step` to a fixed point."""
    theta = float(start)
    for it in range(1, max_iter + 1):
        nxt = exp_fixed_point_step(sample, beta, theta)
        if abs(nxt - theta) <= tol * theta:
            return nxt, it
        theta = nxt
    raise ConvergenceError("fixed-point iteration did not settle", best=theta, iterations=max_iter)


def _solve_from(family, x, beta, start, tol, max_iter):
    if family is EXPONENTIAL or family.name == "exponential":
        try:
            th, _ = exp_fixed_point(x, beta, float(start[0]))
            start = np.array([th])
        except (StepFailureError, ConvergenceError):
            pass
    return _newton(family, x, beta, np.asarray(start, dtype=float), tol, max_iter)


def fit_mdpde(
    family: ModelFamily,
    sample,
    beta: float,
    init=None,
    *,
    multistart: bool = True,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> MdpdeFit:
    """Minimum density power divergence estimate for ``family`` at ``beta``.

    The MLE is the first starting value (or ``init`` when given). With
    ``multistart`` the family's robust starting grid is also tried, and the
    converged root with the smallest objective wins.

    Raises
    ------
    DegenerateSampleError
        The sample cannot identify the parameters.
    ConvergenceError
        No start converged; ``best`` carries the lowest-objective iterate.
    """
    if not (beta >= 0 and math.isfinite(beta)):
        raise DomainError(f"tuning parameter must be nonnegative, got {beta!r}")
    x = family.check_support(sample)
    family.check_sample(x)
    starts = family.start_points(x)
    if init is not None:
        starts = [family.check_theta(init)] + starts
    if not multistart:
        starts = starts[:1]
    starts = starts[:5]

    cands = []
    for st in starts:
        if not family.in_domain(st):
            continue
        th, fv, gn, it, ok = _solve_from(family, x, beta, st, tol, max_iter)
        cands.append((th, fv, gn, it, ok))
    good = [c for c in cands if c[4] and math.isfinite(c[1])]
    if not good:
        finite = [c for c in cands if math.isfinite(c[1])]
        best = min(finite, key=lambda c: c[1]) if finite else None
        raise ConvergenceError(
            f"MDPDE solver failed for {family.name} at beta={beta}",
            best=None if best is None else best[0],
            gradient_norm=math.inf if best is None else best[2],
            iterations=sum(c[3] for c in cands),
        )
    th, fv, gn, it, _ = min(good, key=lambda c: c[1])
    J, K, S = sandwich(family, th, beta)
    if not np.all(np.linalg.eigvalsh(S) > 0):
        raise MatrixError(f"asymptotic covariance not positive definite at {th.tolist()}")
    obj = fv - 1.0 if beta == 0 else fv - (1.0 + 1.0 / beta)
    return MdpdeFit(
        family=family,
        beta=float(beta),
        theta_hat=th,
        J=J,
        K=K,
        Sigma=S,
        objective_value=float(obj),
        converged=True,
        iterations=int(it),
        gradient_norm=float(gn),
        n=int(x.size),
        candidates=tuple((c[0].tolist(), c[1], c[4]) for c in cands),
    )
