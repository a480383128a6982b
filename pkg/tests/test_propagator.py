import csv
import math

import numpy as np
import pytest

from nflab.errors import ConfigError, ContaminationError
from nflab.instances import ground_state, standard_harmonic
from nflab.normal_form import DrivenHamiltonian, iterate
from nflab.propagator import (coherent_amplitude, coherent_norms, coherent_state, conjugate_state, dyadic_windows,
                              fit_growth, map_trajectory, maro_check, propagate)
from nflab.quasiperiodic import QuasiPeriodicOperator


@pytest.fixture(scope="module")
def free():
    model, H0, V, freq = standard_harmonic(report=16)
    return model, DrivenHamiltonian(H0, QuasiPeriodicOperator.zero(model, V.omega, 0.5))


@pytest.fixture(scope="module")
def driven():
    model, H0, V, freq = standard_harmonic(report=24)
    return model, H0, V, freq, DrivenHamiltonian(H0, V)


def test_stationary_state(free):
    model, H = free
    psi = np.zeros(model.buffer_dim, complex)
    psi[3] = 1.0
    tr = propagate(H, psi, np.linspace(0, 20, 11))
    for r in (0.0, 0.5, 1.0):
        assert np.ptp(tr.norm(r)) <= 1e-8
    assert tr.status == "ok"


def test_superposition_norms_constant(free, rng):
    model, H = free
    psi = rng.normal(size=model.buffer_dim) * (model.k0_eigs < 20)
    psi = psi / np.linalg.norm(psi)
    tr = propagate(H, psi.astype(complex), np.linspace(0, 20, 11), leak_threshold=1.0)
    for r in (0.0, 1.0, 2.0):
        assert np.ptp(tr.norm(r)) <= 1e-8 * tr.norm(r)[0]


def test_input_validation(free):
    model, H = free
    psi = ground_state(model)
    with pytest.raises(ConfigError):
        propagate(H, psi, [0.0, 1.0, 0.5])
    with pytest.raises(ConfigError):
        propagate(H, 2 * psi, [0.0, 1.0])
    with pytest.raises(ConfigError):
        propagate(H, psi, [0.0, 1.0], integrator="euler")


@pytest.mark.parametrize("integrator", ["magnus2", "magnus4"])
def test_composition(driven, integrator):
    model, H0, V, freq, H = driven
    psi = ground_state(model)
    tol = 1e-8 if integrator == "magnus4" else 1e-6
    whole = propagate(H, psi, [0.0, 4.0], integrator=integrator, tol=tol)
    first = propagate(H, psi, [0.0, 2.0], integrator=integrator, tol=tol)
    second = propagate(H, first.states[-1], [2.0, 4.0], integrator=integrator, tol=tol)
    assert np.linalg.norm(whole.states[-1] - second.states[-1]) <= 2 * tol * 4.0
    assert whole.unitarity_defect.max() <= 1e-12


def test_coherent_oracle_matches_direct():
    model, H0, V, freq = standard_harmonic(report=64, omega="1")
    t = np.linspace(0, 12, 25)
    tr = propagate(DrivenHamiltonian(H0, V), ground_state(model), t, tol=1e-9)
    ref, alpha = coherent_norms(t, 0.5, 1.0, 1.0, r_list=(0.5, 1.0))
    for r in (0.5, 1.0):
        assert np.abs(tr.norm(r) - ref[r]).max() <= 1e-6 * ref[r].max()
    # the state itself is the coherent state
    assert abs(abs(np.vdot(coherent_state(model, alpha[-1]), tr.states[-1])) - 1.0) <= 1e-8


def test_coherent_amplitude_resonant_linear():
    f = 1.0
    t = np.linspace(10, 100, 10)
    a = coherent_amplitude(t, 0.5, f, 1.0)
    slope = np.polyfit(t, np.abs(a), 1)[0]
    assert slope == pytest.approx(f / (2 * math.sqrt(2)), rel=0.1)
    # off resonance the amplitude stays bounded
    assert np.abs(coherent_amplitude(np.linspace(0, 1000, 500), 0.5, f, math.sqrt(2))).max() < 2.0


@pytest.fixture(scope="module")
def transformed():
    model, H0, V, freq = standard_harmonic(report=24)
    res = iterate(H0, V, 2, "order_one", freq)
    return model, V, res, DrivenHamiltonian(H0, V)


def test_conjugate_state_roundtrip(transformed, rng):
    model, V, res, H = transformed
    psi = rng.normal(size=model.buffer_dim) + 1j * rng.normal(size=model.buffer_dim)
    back = conjugate_state(conjugate_state(psi, res.generators, 0.7, "forward"), res.generators, 0.7, "inverse")
    assert np.abs(back - psi).max() <= 1e-10
    assert np.array_equal(conjugate_state(psi, [], 0.0), psi)
    with pytest.raises(ConfigError):
        conjugate_state(psi, res.generators, 0.0, "sideways")


def test_norm_equivalence(transformed):
    model, V, res, H = transformed
    psi = np.zeros(model.buffer_dim, complex)
    psi[model.k0_eigs < 20] = 1.0
    psi /= np.linalg.norm(psi)
    w = model.k0_eigs
    ratios = []
    for t in np.linspace(0, 200, 101):
        phi = conjugate_state(psi, res.generators, V.omega * t)
        ratios.append(np.linalg.norm(w * phi) / np.linalg.norm(w * psi))
    ratios = np.array(ratios)
    assert 0.5 < ratios.min() <= ratios.max() < 2.0
    # bounds over the first and second half of the grid agree
    assert abs(ratios[:50].max() - ratios[50:].max()) < 0.05


def test_conjugation_equivalence(transformed):
    model, V, res, H = transformed
    tol = 1e-8
    psi0 = ground_state(model)
    T = 10.0
    direct = propagate(H, psi0, [0.0, T], tol=tol)
    phi0 = conjugate_state(psi0, res.generators, V.omega * 0.0, "inverse")
    trans = propagate(res.hamiltonian(), phi0, [0.0, T], tol=tol)
    back = map_trajectory(trans, res.generators, V.omega)
    assert np.linalg.norm(direct.states[-1] - back.states[-1]) <= 10 * tol


def test_leak_monitor_and_refusal(free):
    model, H = free
    psi = np.zeros(model.buffer_dim, complex)
    psi[-1] = 1.0
    tr = propagate(H, psi, [0.0, 1.0, 2.0])
    assert tr.status == "contaminated" and tr.trip_time == 1.0
    assert len(tr.t) == 2
    with pytest.raises(ContaminationError):
        fit_growth(tr, r=1.0)


def test_fit_constant_and_linear():
    t = np.linspace(0, 512, 4097)
    fit = fit_growth(t, np.full_like(t, 3.0), r=1.0)
    assert abs(fit.epsilon) <= 0.02
    fit = fit_growth(t, 1.0 + t, r=1.0)
    assert abs(fit.epsilon - 1.0) <= 0.05
    assert len(fit.windows) >= 4
    assert fit.as_dict()["epsilon_hat"] == fit.epsilon


def test_fit_power_law():
    t = np.linspace(0, 2048, 8193)
    fit = fit_growth(t, (1 + t**2) ** 0.15, r=1.0)
    assert fit.epsilon == pytest.approx(0.3, abs=0.02)


def test_fit_needs_windows():
    t = np.linspace(0, 60, 100)
    with pytest.raises(ConfigError):
        fit_growth(t, np.ones_like(t), r=0.0)
    assert dyadic_windows(0.1, 64.0) == [(8.0, 16.0), (16.0, 32.0), (32.0, 64.0)]


def test_trajectory_csv(free, tmp_path):
    model, H = free
    tr = propagate(H, ground_state(model), np.linspace(0, 1, 3))
    path = tmp_path / "run.csv"
    tr.write_csv(path, [0.5, 1.0])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "norm_0.5", "norm_1", "unitarity_defect", "leak"]
    assert len(rows) == 4


def test_maro_trivial_cases(free):
    model, H = free
    rep = maro_check(H, [-1.0, 0.0, 2.0, 3.0], [8, 12, 16])
    assert rep.largest_bounded == 3.0
    Zonly = QuasiPeriodicOperator.from_dict(model, {(0,): np.diag(model.k0_eigs ** 0.5)}, H.omega, 0.5)
    rep = maro_check(DrivenHamiltonian(H.H0, Zonly), [0.0, 3.0], [8, 12, 16])
    assert rep.largest_bounded == 3.0


def test_maro_raw_drive():
    model, H0, V, freq = standard_harmonic(report=96)
    grid = np.arange(-2.0, 1.01, 0.25)
    rep = maro_check(DrivenHamiltonian(H0, V), grid, [24, 48, 96])
    # [x, K0] has order 1/2, so N' + 1/2 <= 0 is the bounded range
    assert rep.largest_bounded == pytest.approx(-0.5)
    assert rep.predicted_exponent == pytest.approx(2.0)
