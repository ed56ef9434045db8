import numpy as np
import pytest

from dpdwald.datasets import load_dataset

_LINES = []


class Acceptance:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, label, passed, detail):
        _LINES.append((label, bool(passed), detail))
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return Acceptance()


@pytest.fixture(scope="session")
def leukemia():
    return load_dataset("leukemia").array


@pytest.fixture(scope="session")
def telephone():
    return load_dataset("telephone").array


@pytest.fixture(scope="session")
def darwin():
    return load_dataset("darwin").array


@pytest.fixture(scope="session")
def normal_tuning_betas():
    """Selected beta on 200 pure N(0, 1) samples of size 500 (shared: ~2 min)."""
    from dpdwald.models import NORMAL, sample
    from dpdwald.tuning import select_beta

    return np.array(
        [select_beta(NORMAL, sample(NORMAL, (0.0, 1.0), 500, seed=[808, r])).beta_opt for r in range(200)]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
