"""Data-driven choice of the tuning parameter.

The empirical mean square error of the estimator at ``beta`` is approximated
by a squared-bias proxy, the distance to a robust pilot estimate, plus the
model-based variance ``trace(Sigma(theta_hat_beta)) / n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from dpdwald.errors import DomainError, NumericError
from dpdwald.estimation import fit_mdpde
from dpdwald.models import ModelFamily

__all__ = ["TuningResult", "select_beta", "default_grid", "mse_terms"]

PILOT_BETA = 0.5


def default_grid() -> np.ndarray:
    """``0, 0.01, ..., 1``."""
    return np.round(np.linspace(0.0, 1.0, 101), 2)


@dataclass(frozen=True)
class TuningResult:
    """Selected tuning parameter with its MSE curve.

    Grid points where the fit failed carry ``nan`` in ``mse_curve`` and are
    listed in ``invalid``.
    """

    beta_opt: float
    grid: np.ndarray
    mse_curve: np.ndarray
    pilot_beta: float
    theta_pilot: np.ndarray
    invalid: tuple = ()

    def to_dict(self) -> dict:
        return {
            "beta_opt": self.beta_opt,
            "grid": self.grid.tolist(),
            "mse_curve": [None if math.isnan(v) else v for v in self.mse_curve.tolist()],
            "pilot_beta": self.pilot_beta,
            "theta_pilot": self.theta_pilot.tolist(),
            "invalid": list(self.invalid),
        }


def mse_terms(fit, theta_pilot) -> tuple[float, float]:
    """``(squared distance to the pilot, trace(Sigma) / n)`` for one fit."""
    d = fit.theta_hat - np.asarray(theta_pilot, dtype=float)
    return float(d @ d), float(np.trace(fit.Sigma)) / fit.n


def select_beta(
    family: ModelFamily,
    sample,
    grid=None,
    pilot_beta: float = PILOT_BETA,
) -> TuningResult:
    """Minimise the empirical MSE over ``grid``; ties go to the smaller beta.

    Raises whatever :func:`fit_mdpde` raises if the pilot fit fails. Failed
    grid points are excluded with a :class:`RuntimeWarning`.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a nonempty vector")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise DomainError("grid values must be finite and nonnegative")
    x = family.check_support(sample)
    pilot = fit_mdpde(family, x, pilot_beta)
    mse = np.full(grid.size, math.nan)
    invalid = []
    for i, b in enumerate(grid):
        try:
            fit = fit_mdpde(family, x, float(b))
            bias2, var = mse_terms(fit, pilot.theta_hat)
            val = bias2 + var
            if not math.isfinite(val):
                raise NumericError("non-finite MSE")
            mse[i] = val
        except NumericError as exc:
            invalid.append(float(b))
            warnings.warn(f"tuning grid point beta={b:g} excluded: {exc}", RuntimeWarning, stacklevel=2)
    if np.all(np.isnan(mse)):
        raise NumericError("no grid point produced a valid fit")
    # first index of the minimum over the sorted grid keeps ties on the small side
    order = np.argsort(grid, kind="stable")
    vals = mse[order]
    j = order[int(np.nanargmin(vals))]
    return TuningResult(
        beta_opt=float(grid[j]),
        grid=grid,
        mse_curve=mse,
        pilot_beta=float(pilot_beta),
        theta_pilot=pilot.theta_hat,
        invalid=tuple(invalid),
    )
