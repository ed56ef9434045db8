"""Worked analyses of the embedded datasets over a grid of tuning parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dpdwald.datasets import NamedDataset, load_dataset
from dpdwald.errors import InputError, NumericError
from dpdwald.estimation import fit_mdpde
from dpdwald.models import EXPONENTIAL, NORMAL, WEIBULL, ModelFamily
from dpdwald.wald import Restriction, composite_wald, signed_wald, simple_wald

__all__ = ["AnalysisRun", "EXAMPLES", "parse_grid", "run_example", "sweep_first"]

DEFAULT_GRID = "0:0.05:1"


def parse_grid(spec) -> np.ndarray:
    """``"start:step:stop"`` (inclusive), a comma list, or a single number."""
    if isinstance(spec, (list, tuple, np.ndarray)):
        return np.asarray(spec, dtype=float)
    text = str(spec).strip()
    try:
        if ":" in text:
            parts = [float(t) for t in text.split(":")]
            if len(parts) != 3:
                raise InputError(f"grid {text!r} must look like start:step:stop")
            start, step, stop = parts
            if not step > 0 or stop < start:
                raise InputError(f"grid {text!r} needs a positive step and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return np.round(start + step * np.arange(count), 12)
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=float)
    except ValueError:
        raise InputError(f"cannot parse grid {text!r}") from None


@dataclass(frozen=True)
class _Example:
    family: ModelFamily
    kind: str  # "simple" or "composite"
    null: dict
    outliers: tuple
    signed: bool


EXAMPLES = {
    "leukemia": _Example(EXPONENTIAL, "simple", {"theta0": (140.0,)}, (13, 15), False),
    "telephone": _Example(NORMAL, "composite", {"component": "mu", "value": 0.0}, (0,), True),
    "darwin": _Example(NORMAL, "composite", {"component": "mu", "value": 0.0}, (0, 1), True),
    # values are not embedded; the data file must be supplied
    "aircon": _Example(WEIBULL, "composite", {"component": "p", "value": 0.85}, (), False),
}


@dataclass(frozen=True)
class AnalysisRun:
    """Per-beta fits and p-values for the full data and, optionally, a filtered copy."""

    dataset: NamedDataset
    family: str
    null_description: str
    beta_grid: np.ndarray
    outliers: tuple
    full: dict
    filtered: dict | None = None
    classical: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.name,
            "n": len(self.dataset.values),
            "family": self.family,
            "null": self.null_description,
            "beta_grid": self.beta_grid.tolist(),
            "outliers": list(self.outliers),
            "full": self.full,
            "filtered": self.filtered,
            "classical": self.classical,
        }


def _test(ex: _Example, fit):
    if ex.kind == "simple":
        return simple_wald(fit, ex.null["theta0"])
    return composite_wald(fit, Restriction.fix_component(ex.family, ex.null["component"], ex.null["value"]))


def _curves(ex: _Example, x: np.ndarray, grid: np.ndarray) -> dict:
    theta, pv, stat, pg, failed = [], [], [], [], []
    for b in grid:
        try:
            fit = fit_mdpde(ex.family, x, float(b))
            res = _test(ex, fit)
            theta.append(fit.theta_hat.tolist())
            pv.append(res.p_value)
            stat.append(res.statistic)
            if ex.signed:
                pg.append(
                    signed_wald(fit, ex.null["value"], ex.null["component"], "greater").p_value
                )
        except NumericError:
            failed.append(float(b))
            theta.append(None)
            pv.append(None)
            stat.append(None)
            if ex.signed:
                pg.append(None)
    out = {"theta_hat": theta, "statistic": stat, "p_value": pv, "failed_beta": failed}
    if ex.signed:
        out["p_value_greater"] = pg
    return out


def _classical(ex: _Example, x: np.ndarray) -> dict:
    fit = fit_mdpde(ex.family, x, 0.0)
    out = {"wald_p_value": _test(ex, fit).p_value}
    if ex.signed:
        # one-sample t statistic: unbiased variance, t(n-1) reference
        c, v = ex.null["component"], ex.null["value"]
        out["t_two_sided"] = signed_wald(fit, v, c, "two-sided", ddof=1).p_value
        out["t_greater"] = signed_wald(fit, v, c, "greater", ddof=1).p_value
    return out


def _null_text(ex: _Example) -> str:
    if ex.kind == "simple":
        names = ex.family.param_names
        return ", ".join(f"{k} = {v:g}" for k, v in zip(names, ex.null["theta0"]))
    return f"{ex.null['component']} = {ex.null['value']:g}"


def run_example(name: str, beta_grid=DEFAULT_GRID, outliers=None, data=None) -> AnalysisRun:
    """Analyse a named example over ``beta_grid``.

    ``outliers`` is a list of 0-based indices to drop for the filtered
    analysis (default: the example's usual choice; ``[]`` disables it).
    ``data`` overrides the dataset (a name or a file path); it is required
    for ``aircon``.
    """
    key = name.lower()
    if key not in EXAMPLES:
        raise InputError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}")
    ex = EXAMPLES[key]
    if data is None:
        if key == "aircon":
            raise InputError("the aircon example needs a data file (pass data=PATH)")
        data = key
    ds = data if isinstance(data, NamedDataset) else load_dataset(data)
    grid = parse_grid(beta_grid)
    if grid.size == 0 or np.any(grid < 0):
        raise InputError("beta grid must be nonempty and nonnegative")
    x = ds.array
    drop = tuple(ex.outliers if outliers is None else (int(i) for i in outliers))
    if any(not -x.size <= i < x.size for i in drop):
        raise InputError(f"outlier index out of range for {x.size} observations")
    full = _curves(ex, x, grid)
    classical = {"full": _classical(ex, x)}
    filtered = None
    if drop:
        xf = np.delete(x, list(drop))
        filtered = _curves(ex, xf, grid)
        classical["filtered"] = _classical(ex, xf)
    elif outliers is not None:
        filtered = full
    return AnalysisRun(ds, ex.family.name, _null_text(ex), grid, drop, full, filtered, classical)


def sweep_first(values, betas=(0.0, 0.15), name: str = "telephone") -> dict:
    """Replace the first observation by each of ``values`` and record two-sided p-values."""
    ex = EXAMPLES[name]
    base = load_dataset(name).array
    vals = parse_grid(values)
    curves = {}
    for b in betas:
        ps = []
        for v in vals:
            x = base.copy()
            x[0] = v
            try:
                ps.append(_test(ex, fit_mdpde(ex.family, x, float(b))).p_value)
            except NumericError:
                ps.append(None)
        curves[f"{b:g}"] = ps
    return {"first_value": vals.tolist(), "p_value": curves}
