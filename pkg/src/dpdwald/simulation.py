"""Monte Carlo harness for observed levels and powers.

Each replication ``rep`` at sample size ``n`` draws its data from a stream
seeded by ``SeedSequence([seed, n, rep])``, so every cell is reproducible on
its own and results do not depend on execution order or worker count. The
same sample is reused across the beta grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dpdwald.errors import DomainError, InputError, NumericError
from dpdwald.estimation import fit_mdpde
from dpdwald.models import ModelFamily, get_family
from dpdwald.wald import Restriction, composite_wald, signed_wald, simple_wald

__all__ = [
    "MixtureSpec",
    "TestSpec",
    "McScenario",
    "McReport",
    "sample_mixture",
    "run_scenario",
    "load_scenario",
    "scenario_from_dict",
    "CSV_COLUMNS",
    "FAILURE_FLAG_RATE",
]

CSV_COLUMNS = ("beta", "n", "rejection_rate", "mc_se", "failures")
FAILURE_FLAG_RATE = 0.01


@dataclass(frozen=True)
class MixtureSpec:
    """Finite mixture ``sum_k w_k f_{theta_k}``."""

    components: tuple
    weights: tuple

    def __post_init__(self):
        comps = tuple((fam, tuple(float(t) for t in fam.check_theta(th))) for fam, th in self.components)
        w = np.asarray(self.weights, dtype=float)
        if len(comps) == 0 or w.shape != (len(comps),):
            raise InputError("mixture needs one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("mixture weights must be nonnegative and sum to 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(w.tolist()))

    @classmethod
    def single(cls, family: ModelFamily, theta) -> "MixtureSpec":
        return cls(((family, theta),), (1.0,))

    def mean(self) -> float | None:
        """Mixture mean where every component has a closed-form mean."""
        total = 0.0
        for (fam, th), w in zip(self.components, self.weights):
            if fam.name == "exponential":
                m = th[0]
            elif fam.name == "normal":
                m = th[0]
            elif fam.name == "weibull":
                m = th[0] * math.gamma(1.0 + 1.0 / th[1])
            else:
                return None
            total += w * m
        return total

    def to_dict(self) -> dict:
        return {
            "components": [{"family": f.name, "theta": list(t)} for f, t in self.components],
            "weights": list(self.weights),
        }


def sample_mixture(spec: MixtureSpec, n: int, rng) -> np.ndarray:
    """``n`` draws from the mixture.

    Uniforms for the values are drawn first and component labels second, so
    a single-component mixture reproduces :func:`dpdwald.models.sample`
    exactly for the same generator state.
    """
    if n < 0:
        raise DomainError("sample size must be nonnegative")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    u = rng.random(int(n))
    if len(spec.components) == 1:
        fam, th = spec.components[0]
        return fam.quantile(np.asarray(th), u)
    labels = np.searchsorted(np.cumsum(spec.weights), rng.random(int(n)), side="right")
    labels = np.minimum(labels, len(spec.components) - 1)
    out = np.empty(int(n))
    for k, (fam, th) in enumerate(spec.components):
        sel = labels == k
        out[sel] = fam.quantile(np.asarray(th), u[sel])
    return out


@dataclass(frozen=True)
class TestSpec:
    """Which test to run on each simulated sample.

    ``kind`` is ``"simple"`` (``theta0`` for the whole vector),
    ``"composite"`` (``component`` fixed at ``value``) or ``"signed"``
    (one-sided version of the composite/simple component test with a
    standard normal reference).
    """

    __test__ = False  # not a pytest class

    family: ModelFamily
    kind: str = "simple"
    theta0: tuple | None = None
    component: object = 0
    value: float = 0.0
    alternative: str = "two-sided"

    def __post_init__(self):
        if self.kind not in ("simple", "composite", "signed"):
            raise InputError(f"unknown test kind {self.kind!r}")
        if self.kind == "simple":
            if self.theta0 is None:
                raise InputError("simple test needs theta0")
            object.__setattr__(
                self, "theta0", tuple(float(t) for t in self.family.check_theta(self.theta0))
            )
        if self.kind == "signed" and self.alternative not in ("greater", "less", "two-sided"):
            raise InputError(f"unknown alternative {self.alternative!r}")

    def restriction(self) -> Restriction:
        return Restriction.fix_component(self.family, self.component, self.value)

    def p_value(self, x, beta: float) -> float:
        fit = fit_mdpde(self.family, x, beta)
        if self.kind == "simple":
            return simple_wald(fit, self.theta0).p_value
        if self.kind == "composite":
            return composite_wald(fit, self.restriction()).p_value
        return signed_wald(
            fit, self.value, self.component, self.alternative, reference="normal"
        ).p_value

    def to_dict(self) -> dict:
        d = {"family": self.family.name, "kind": self.kind}
        if self.family.name == "weibull":
            d["k_form"] = self.family.k_form
        if self.kind == "simple":
            d["theta0"] = list(self.theta0)
        else:
            d.update(component=self.component, value=self.value)
        if self.kind == "signed":
            d["alternative"] = self.alternative
        return d


@dataclass(frozen=True)
class McScenario:
    """A level or power study over a grid of tuning parameters and sample sizes."""

    data_law: MixtureSpec
    test: TestSpec
    beta_grid: tuple
    n_grid: tuple
    replications: int = 2000
    nominal_alpha: float = 0.05
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        bg = tuple(float(b) for b in self.beta_grid)
        ng = tuple(int(n) for n in self.n_grid)
        if not bg or any(not (b >= 0 and math.isfinite(b)) for b in bg):
            raise DomainError("beta grid must be nonempty and nonnegative")
        if not ng or any(n < 1 for n in ng):
            raise DomainError("sample sizes must be positive")
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        if not 0 < self.nominal_alpha < 1:
            raise DomainError("nominal level must lie in (0, 1)")
        if int(self.seed) != self.seed or self.seed < 0:
            raise DomainError("seed must be a nonnegative integer")
        object.__setattr__(self, "beta_grid", bg)
        object.__setattr__(self, "n_grid", ng)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "data_law": self.data_law.to_dict(),
            "test": self.test.to_dict(),
            "beta_grid": list(self.beta_grid),
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "nominal_alpha": self.nominal_alpha,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class McReport:
    """Rejection rates indexed ``[beta, n]``.

    Failed fits are excluded from the denominator; ``mc_se`` is
    ``sqrt(r (1 - r) / valid)``. Cells whose failure share exceeds 1% are
    listed in ``flagged`` as ``(beta, n)`` pairs.
    """

    scenario: McScenario
    rejection_rate: np.ndarray
    mc_se: np.ndarray
    failures: np.ndarray
    valid: np.ndarray
    flagged: tuple = field(default=())

    def rate(self, beta: float, n: int) -> float:
        return float(self.rejection_rate[self._i(beta), self.scenario.n_grid.index(int(n))])

    def se(self, beta: float, n: int) -> float:
        return float(self.mc_se[self._i(beta), self.scenario.n_grid.index(int(n))])

    def _i(self, beta):
        for i, b in enumerate(self.scenario.beta_grid):
            if abs(b - beta) < 1e-12:
                return i
        raise KeyError(beta)

    def rows(self):
        for i, b in enumerate(self.scenario.beta_grid):
            for j, n in enumerate(self.scenario.n_grid):
                r = self.rejection_rate[i, j]
                yield {
                    "beta": b,
                    "n": n,
                    "rejection_rate": None if math.isnan(r) else float(r),
                    "mc_se": None if math.isnan(r) else float(self.mc_se[i, j]),
                    "failures": int(self.failures[i, j]),
                }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "cells": list(self.rows()),
            "flagged": [list(c) for c in self.flagged],
        }


def _replicate(scenario: McScenario, n: int, rep: int):
    """Outcome per beta for one replication: 1 reject, 0 accept, -1 failure."""
    rng = np.random.default_rng(np.random.SeedSequence([int(scenario.seed), int(n), int(rep)]))
    x = sample_mixture(scenario.data_law, n, rng)
    out = np.empty(len(scenario.beta_grid), dtype=np.int8)
    for i, b in enumerate(scenario.beta_grid):
        try:
            p = scenario.test.p_value(x, b)
        except (NumericError, DomainError):
            out[i] = -1
            continue
        out[i] = 1 if p < scenario.nominal_alpha else 0
    return out


def _cell_block(args):
    scenario, n, reps = args
    return np.stack([_replicate(scenario, n, r) for r in reps])


def run_scenario(scenario: McScenario, workers: int = 1) -> McReport:
    """Run every ``(beta, n)`` cell of ``scenario``.

    With ``workers > 1`` replications are spread over processes; the
    aggregate is identical to the sequential run.
    """
    nb, nn = len(scenario.beta_grid), len(scenario.n_grid)
    rates = np.full((nb, nn), math.nan)
    ses = np.full((nb, nn), math.nan)
    fails = np.zeros((nb, nn), dtype=int)
    valid = np.zeros((nb, nn), dtype=int)
    reps = range(scenario.replications)
    for j, n in enumerate(scenario.n_grid):
        if workers > 1:
            chunks = [list(reps[k::workers]) for k in range(workers)]
            with ProcessPoolExecutor(max_workers=workers) as ex:
                blocks = list(ex.map(_cell_block, [(scenario, n, c) for c in chunks]))
            res = np.concatenate(blocks)
        else:
            res = _cell_block((scenario, n, reps))
        for i in range(nb):
            col = res[:, i]
            ok = col >= 0
            fails[i, j] = int((~ok).sum())
            valid[i, j] = int(ok.sum())
            if valid[i, j]:
                r = float(col[ok].mean())
                rates[i, j] = r
                ses[i, j] = math.sqrt(r * (1.0 - r) / valid[i, j])
    flagged = tuple(
        (scenario.beta_grid[i], scenario.n_grid[j])
        for i in range(nb)
        for j in range(nn)
        if fails[i, j] > FAILURE_FLAG_RATE * scenario.replications
    )
    return McReport(scenario, rates, ses, fails, valid, flagged)


def _family_from(d: dict) -> ModelFamily:
    name = d.get("family")
    if not isinstance(name, str):
        raise InputError("family name missing")
    opts = {"k_form": d["k_form"]} if "k_form" in d else {}
    return get_family(name, **opts)


def scenario_from_dict(doc: dict) -> McScenario:
    """Build a scenario from a JSON-compatible mapping (see ``scenario.schema.json``)."""
    try:
        law = doc["data_law"]
        comps = tuple((_family_from(c), c["theta"]) for c in law["components"])
        weights = law.get("weights", [1.0] * len(comps) if len(comps) == 1 else None)
        if weights is None:
            raise InputError("mixture weights missing")
        t = doc["test"]
        fam = _family_from(t)
        test = TestSpec(
            family=fam,
            kind=t.get("kind", "simple"),
            theta0=t.get("theta0"),
            component=t.get("component", 0),
            value=float(t.get("value", 0.0)),
            alternative=t.get("alternative", "two-sided"),
        )
        return McScenario(
            data_law=MixtureSpec(comps, weights),
            test=test,
            beta_grid=tuple(doc["beta_grid"]),
            n_grid=tuple(doc["n_grid"]),
            replications=int(doc.get("replications", 2000)),
            nominal_alpha=float(doc.get("nominal_alpha", 0.05)),
            seed=int(doc.get("seed", 0)),
            name=str(doc.get("name", "scenario")),
        )
    except KeyError as exc:
        raise InputError(f"scenario is missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed scenario: {exc}") from exc


def load_scenario(path) -> McScenario:
    """Read a scenario JSON file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"scenario {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("scenario document must be a JSON object")
    return scenario_from_dict(doc)
