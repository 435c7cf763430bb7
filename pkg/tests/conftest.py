import numpy as np
import pytest

from spectral_flr.operators import SpectralOperator


def random_psd(rng, m, rank=None, cond=None):
    """Random PSD matrix; optional rank deficiency or condition number."""
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    if cond is not None:
        ev = np.logspace(0.0, -np.log10(cond), m)
    else:
        ev = rng.uniform(0.05, 2.0, m)
    if rank is not None:
        ev[rank:] = 0.0
    return (q * ev) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def psd_pair(rng):
    def make(m=8):
        return SpectralOperator(random_psd(rng, m)), SpectralOperator(random_psd(rng, m))
    return make


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the summary prints every recorded line."""
    def record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
