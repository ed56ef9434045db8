import json
from pathlib import Path

import numpy as np
import pytest

from dpdwald import simulation
from dpdwald.errors import DomainError, InputError, NumericError
from dpdwald.models import EXPONENTIAL, NORMAL, WEIBULL, sample
from dpdwald.simulation import (
    CSV_COLUMNS,
    McScenario,
    MixtureSpec,
    TestSpec,
    load_scenario,
    run_scenario,
    sample_mixture,
    scenario_from_dict,
)

SCENARIOS = sorted((Path(__file__).resolve().parents[1] / "scenarios").glob("*.json"))
SCHEMA = Path(simulation.__file__).with_name("data") / "scenario.schema.json"

CONTAM = MixtureSpec(((EXPONENTIAL, (2.0,)), (EXPONENTIAL, (10.0,))), (0.95, 0.05))


def _small(**kw):
    base = dict(
        data_law=MixtureSpec.single(EXPONENTIAL, (2.0,)),
        test=TestSpec(EXPONENTIAL, "simple", theta0=(2.0,)),
        beta_grid=(0.0, 0.5),
        n_grid=(15, 30),
        replications=60,
        seed=11,
    )
    base.update(kw)
    return McScenario(**base)


def test_mixture_moments():
    assert CONTAM.mean() == pytest.approx(2.4)
    x = sample_mixture(CONTAM, 200_000, 1)
    assert x.mean() == pytest.approx(2.4, rel=0.02)
    m = MixtureSpec(((NORMAL, (0.0, 1.0)), (NORMAL, (10.0, 1.0))), (0.9, 0.1))
    y = sample_mixture(m, 100_000, 2)
    assert np.mean(y > 5) == pytest.approx(0.10, abs=0.005)
    w = MixtureSpec.single(WEIBULL, (1.5, 1.5))
    assert sample_mixture(w, 200_000, 3).mean() == pytest.approx(w.mean(), rel=0.01)


def test_single_component_matches_model_sampler():
    for fam, th in ((EXPONENTIAL, (2.0,)), (NORMAL, (1.0, 2.0)), (WEIBULL, (1.5, 1.5))):
        a = sample_mixture(MixtureSpec.single(fam, th), 50, 9)
        np.testing.assert_array_equal(a, sample(fam, th, 50, seed=9))


def test_mixture_validation():
    with pytest.raises(DomainError):
        MixtureSpec(((EXPONENTIAL, (2.0,)), (EXPONENTIAL, (1.0,))), (0.7, 0.7))
    with pytest.raises(InputError):
        MixtureSpec(((EXPONENTIAL, (2.0,)),), (0.5, 0.5))
    with pytest.raises(DomainError):
        MixtureSpec.single(EXPONENTIAL, (-1.0,))


def test_seed_determinism():
    a = run_scenario(_small())
    b = run_scenario(_small())
    np.testing.assert_array_equal(a.rejection_rate, b.rejection_rate)
    assert a.to_csv() == b.to_csv()
    x1 = simulation.sample_mixture(CONTAM, 10, np.random.default_rng(np.random.SeedSequence([11, 15, 0])))
    x2 = simulation.sample_mixture(CONTAM, 10, np.random.default_rng(np.random.SeedSequence([12, 15, 0])))
    assert not np.array_equal(x1, x2)


def test_cells_are_independent_of_grid():
    # a cell depends only on (seed, n, rep): shrinking the n grid leaves it unchanged
    full = run_scenario(_small())
    part = run_scenario(_small(n_grid=(30,), beta_grid=(0.5,)))
    assert part.rate(0.5, 30) == full.rate(0.5, 30)


def test_workers_match_sequential():
    a = run_scenario(_small(replications=40))
    b = run_scenario(_small(replications=40), workers=2)
    np.testing.assert_array_equal(a.rejection_rate, b.rejection_rate)
    np.testing.assert_array_equal(a.failures, b.failures)


def test_report_outputs():
    rep = run_scenario(_small())
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 4
    d = rep.to_dict()
    assert json.loads(json.dumps(d)) == d
    for row in d["cells"]:
        r = row["rejection_rate"]
        assert 0 <= r <= 1
        assert row["mc_se"] == pytest.approx(np.sqrt(r * (1 - r) / 60))


def test_failures_excluded_and_flagged(monkeypatch):
    real = TestSpec.p_value
    calls = {"k": 0}

    def flaky(self, x, beta):
        if beta == 0.5:
            calls["k"] += 1
            if calls["k"] % 10 == 0:
                raise NumericError("synthetic")
        return real(self, x, beta)

    monkeypatch.setattr(TestSpec, "p_value", flaky)
    rep = run_scenario(_small(n_grid=(20,), replications=100))
    assert rep.failures[1, 0] == 10 and rep.valid[1, 0] == 90
    assert rep.failures[0, 0] == 0
    assert rep.flagged == ((0.5, 20),)
    r = rep.rate(0.5, 20)
    assert rep.se(0.5, 20) == pytest.approx(np.sqrt(r * (1 - r) / 90))


def test_contamination_breaks_classical_level():
    sc = McScenario(
        CONTAM,
        TestSpec(EXPONENTIAL, "simple", theta0=(2.0,)),
        beta_grid=(0.0, 0.5),
        n_grid=(100,),
        replications=300,
        seed=4,
    )
    rep = run_scenario(sc)
    assert rep.rate(0.0, 100) > rep.rate(0.5, 100) + 0.15


def test_signed_kind():
    t = TestSpec(NORMAL, "signed", component="mu", value=0.0, alternative="greater")
    x = sample(NORMAL, (0.5, 1.0), 60, seed=2)
    assert t.p_value(x, 0.2) < 0.05
    assert t.p_value(-x, 0.2) > 0.95


def test_scenario_validation():
    with pytest.raises(DomainError):
        _small(beta_grid=(-0.1,))
    with pytest.raises(DomainError):
        _small(n_grid=(0,))
    with pytest.raises(DomainError):
        _small(replications=0)
    with pytest.raises(InputError):
        TestSpec(EXPONENTIAL, "simple")
    with pytest.raises(InputError):
        TestSpec(EXPONENTIAL, "unknown")
    with pytest.raises(InputError):
        scenario_from_dict({"test": {}})


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios(path):
    jsonschema = pytest.importorskip("jsonschema")
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, json.loads(SCHEMA.read_text()))
    sc = load_scenario(path)
    assert sc.name == path.stem
    assert sc.replications == 2000 and sc.n_grid == (20, 40, 60, 80, 100)
    assert json.loads(json.dumps(sc.to_dict()))["name"] == sc.name
    assert scenario_from_dict(sc.to_dict()).to_dict() == sc.to_dict()


def test_schema_rejects_malformed():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads(SCHEMA.read_text())
    doc = json.loads(SCENARIOS[0].read_text())
    doc["replications"] = -5
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, schema)


def test_load_scenario_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InputError):
        load_scenario(p)
    with pytest.raises(InputError):
        load_scenario(tmp_path / "missing.json")
