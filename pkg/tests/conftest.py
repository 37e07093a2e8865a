import sys

import numpy as np
import pytest

from cavity_bec.fockspace import TruncationSpec, build_basis


@pytest.fixture(scope="session")
def basis():
    """Cached basis tables keyed by ``(N, max_excited, max_photons)``."""
    cache = {}

    def get(N, max_excited=1, max_photons=1):
        key = (N, max_excited, max_photons)
        if key not in cache:
            cache[key] = build_basis(TruncationSpec(*key))
        return cache[key]

    return get


def random_density(d, rank=None, rng=None):
    rng = rng or np.random.default_rng(0)
    rank = rank or d
    X = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(module.RESULTS, key=str):
        ok, detail = module.RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})")
