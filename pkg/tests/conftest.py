import numpy as np
import pytest

from mrfrf.config import ExperimentConfig
from mrfrf.experiment import synthesize
from mrfrf.signals import dft

_ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def report(number, title, passed, detail=""):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  {detail}".rstrip()
        print(line)
        _ACCEPTANCE.append(line)
        return passed

    return report


def benchmark_config(seed=None, snr_db=45.0):
    cfg = ExperimentConfig()
    cfg.noise.snr_db = snr_db
    return cfg if seed is None else cfg.with_seed(seed)


@pytest.fixture(scope="session")
def noiseless_benchmark():
    data = synthesize(benchmark_config(snr_db=None))
    return data, dft(data.u_h), dft(data.y_l)


@pytest.fixture(scope="session")
def noisy_benchmark():
    data = synthesize(benchmark_config())
    return data, dft(data.u_h), dft(data.y_l)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
