import numpy as np
import pytest

from nflab.spectral import SpectralModel, build_harmonic_model

ACCEPTANCE_RESULTS = []


def diagonal_model(k0, shift=None):
    """Single-mode model with prescribed K0 eigenvalues and no operators."""
    k0 = np.asarray(k0, dtype=float)
    integer = shift is not None
    return SpectralModel(kind="harmonic", mode_dims=(len(k0),), k_eigs=k0[:, None], k0_eigs=k0, h0_eigs=k0.copy(),
                         report=np.arange(len(k0)), integer_spectrum=integer, lambda_shift=shift, mu=1.0,
                         k_lattice=np.round(k0 - shift).astype(np.int64)[:, None] if integer else None, nu=(1.0,))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def osc16():
    return build_harmonic_model([1.0], [16], buffer_fraction=0.0)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_RESULTS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for res in sorted(ACCEPTANCE_RESULTS, key=lambda r: r.number):
        terminalreporter.write_line(res.line())
