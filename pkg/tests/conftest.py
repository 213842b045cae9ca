import numpy as np
import pytest

from nnlda.corpus import SyntheticConfig, generate_synthetic

ACCEPTANCE_RESULTS = []


def record(criterion, ok, detail):
    ACCEPTANCE_RESULTS.append((criterion, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    return generate_synthetic(SyntheticConfig(n_docs=300, seed=3))


@pytest.fixture(scope="session")
def synthetic_2000():
    return generate_synthetic(SyntheticConfig(n_docs=2000, seed=0))


@pytest.fixture(scope="session")
def trained_nnlda(synthetic_2000):
    from nnlda.trainer import TrainConfig, fit

    model, report = fit(synthetic_2000, TrainConfig(n_topics=4, prior_kind="nnlda", seed=0))
    return model, report
