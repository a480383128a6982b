import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import diagonal_model
from nflab.acceptance import random_quasiperiodic, sol1_quadrature
from nflab.algebra import average, commutator, from_matrix, h0_operator, k0_operator, order_scan
from nflab.arithmetic import frequency_system
from nflab.errors import ConfigError, ResonanceViolation
from nflab.homological import (homological_residual, lift_to_H0, quasiperiodic_divisors, solve_K0_homological,
                               solve_quasiperiodic)
from nflab.instances import standard_harmonic
from nflab.quasiperiodic import QuasiPeriodicOperator, collocation_grid
from nflab.spectral import build_anharmonic_model, build_harmonic_model, build_zoll_model


def rand(rng, n, herm=True):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2 if herm else a


# K0 equation -----------------------------------------------------------------------------

def test_two_level_example():
    m = diagonal_model([0.5, 1.5], shift=0.5)
    A = from_matrix(m, [[0, 1], [1, 0]], 0.0)
    Y, Z = solve_K0_homological(A)
    assert Y.matrix[0, 1] == pytest.approx(1j)
    assert not np.any(Z.matrix)
    quad = sol1_quadrature(A, average(A))
    assert np.abs(quad - Y.matrix).max() <= 1e-10


def test_diagonal_input(osc16, rng):
    A = from_matrix(osc16, np.diag(rng.normal(size=16)), 0.0)
    Y, Z = solve_K0_homological(A)
    assert not np.any(Y.matrix) and np.array_equal(Z.matrix, A.matrix)


def test_identity_and_symmetry(rng):
    m = build_zoll_model(2, 12, "full", buffer_fraction=0.0)
    K = k0_operator(m)
    A = from_matrix(m, rand(rng, m.buffer_dim), 0.5)
    sol = solve_K0_homological(A)
    lhs = 1j * commutator(K, sol.X).matrix
    assert np.abs(lhs - (A.matrix - sol.Z.matrix)).max() <= 1e-12
    assert sol.X.is_symmetric() and sol.X.order == 0.5
    # degenerate levels stay in the resonant part
    assert np.array_equal(sol.Z.matrix, average(A).matrix)


def test_quadrature_oracle(rng):
    m = build_harmonic_model([1.0], [24], buffer_fraction=0.0)
    A = from_matrix(m, rand(rng, 24), 0.0)
    Y = solve_K0_homological(A).X.matrix
    assert np.abs(sol1_quadrature(A, average(A)) - Y).max() <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_solver_linearity(alpha, beta):
    rng = np.random.default_rng(7)
    m = build_harmonic_model([1.0], [10], buffer_fraction=0.0)
    A = from_matrix(m, rand(rng, 10, False), 0.0)
    B = from_matrix(m, rand(rng, 10, False), 0.0)
    lhs = solve_K0_homological(alpha * A + beta * B).X.matrix
    rhs = alpha * solve_K0_homological(A).X.matrix + beta * solve_K0_homological(B).X.matrix
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, abs(alpha) + abs(beta))


def test_entrywise_absorption_noninteger():
    m = diagonal_model([1.0, 1.0 + 1e-8, 2.0])
    A = from_matrix(m, np.ones((3, 3)), 0.0)
    sol = solve_K0_homological(A)
    assert sol.census.absorbed_count == 2
    assert sol.Z.matrix[0, 1] == 1.0 and sol.X.matrix[0, 1] == 0.0
    assert sol.X.matrix[0, 2] == pytest.approx(1.0 / (1j * -1.0))


def test_anharmonic_entrywise_runs(rng):
    m = build_anharmonic_model(2, 1, 1.0, cutoff=10)
    A = from_matrix(m, m.position(0), 0.5)
    sol = solve_K0_homological(A)
    K = k0_operator(m)
    assert np.abs(1j * commutator(K, sol.X).matrix - (A.matrix - sol.Z.matrix)).max() <= 1e-10


# lift ------------------------------------------------------------------------------------

def test_lift_zoll_pointwise(rng):
    m = build_zoll_model(2, 10, buffer_fraction=0.0)
    A = from_matrix(m, rand(rng, 10), 1.0)
    Y = solve_K0_homological(A).X
    X = lift_to_H0(Y, symmetrize=False)
    lam = m.k0_eigs
    assert np.allclose(X.matrix, Y.matrix / (2 * lam[:, None]))
    assert X.order == pytest.approx(0.0)
    Xs = lift_to_H0(Y)
    assert Xs.is_symmetric()
    assert not np.any(lift_to_H0(Y * 0.0).matrix)


def test_lift_requires_superlinear(osc16, rng):
    Y = from_matrix(osc16, rand(rng, 16), 0.0)
    with pytest.raises(ConfigError):
        lift_to_H0(Y)


def test_lift_residual_loses_one_order():
    def residual(n):
        m = build_zoll_model(2, n, buffer_fraction=0.0)
        A = from_matrix(m, m.position(0), 0.0)
        sol = solve_K0_homological(A)
        sol.X = lift_to_H0(sol.X)
        return homological_residual(sol, h0_operator(m), A)["operator"]

    est = order_scan(residual, [32, 64, 128])
    assert est.order is not None and est.order <= -1.0 + 0.125
    r64, r128 = residual(64), residual(128)
    assert r128.model.buffer_dim == 128
    from nflab.algebra import weighted_norm

    for s in (0.0, 1.0):
        assert weighted_norm(r128, -1.0, s) <= 2 * weighted_norm(r64, -1.0, s)


# quasiperiodic equation --------------------------------------------------------------------

@pytest.fixture(scope="module")
def qp_setup():
    freq = frequency_system(["1"], ["sqrt2"])
    model = build_harmonic_model(freq.nu, [8], buffer_fraction=0.0)
    return freq, model


def test_mean_only_input(qp_setup, rng):
    freq, model = qp_setup
    W = QuasiPeriodicOperator.from_dict(model, {(0,): np.diag(rng.normal(size=8))}, freq.omega, 0.0)
    sol = solve_quasiperiodic(W, freq)
    assert not np.any(sol.X.coeffs)
    assert np.allclose(sol.Z.coefficient((0,)), W.coefficient((0,)))


def test_divisor_example(qp_setup):
    freq, model = qp_setup
    x = model.position(0)
    W = QuasiPeriodicOperator.from_dict(model, {(1,): x / 2, (-1,): x / 2}, freq.omega, 0.5)
    delta = quasiperiodic_divisors(W, freq.ktilde(model), freq.nu_tilde)
    i = W.index_of((1,))
    assert delta[i, 0, 1] == pytest.approx(np.sqrt(2) - 2, abs=1e-15)
    sol = solve_quasiperiodic(W, freq)
    assert sol.X.coefficient((1,))[0, 1] == pytest.approx(-1j * x[0, 1] / 2 / (np.sqrt(2) - 2))


def test_symmetric_solution_and_residual(qp_setup, rng):
    freq, model = qp_setup
    W = random_quasiperiodic(model, freq.omega, 2, rng)
    sol = solve_quasiperiodic(W, freq)
    for th in (0.0, 0.9, 2.5):
        M = sol.X.evaluate(th)
        assert np.abs(M - M.conj().T).max() <= 1e-12
    assert homological_residual(sol, W=W)["max_residual"] <= 1e-12


def test_fourier_sampling_oracle(qp_setup, rng):
    freq, model = qp_setup
    W = random_quasiperiodic(model, freq.omega, 2, rng)
    sol = solve_quasiperiodic(W, freq)
    assert sol.census.absorbed_count == 0
    H0 = np.diag(model.h0_eigs)
    mean = sol.Z.coefficient((0,))
    Xd = sol.X.derivative()
    worst = 0.0
    for th in collocation_grid(1, 8).reshape(-1, 1):
        X = sol.X.evaluate(th)
        lhs = Xd.evaluate(th) + 1j * (H0 @ X - X @ H0)
        worst = max(worst, np.abs(lhs - (W.evaluate(th) - mean)).max())
    assert worst <= 1e-9


def test_mean_commutes_with_ktilde(rng):
    freq = frequency_system(["1", "1", "1"], ["sqrt2"])
    model = build_harmonic_model(freq.nu, [3, 3, 3], buffer_fraction=0.0)
    W = random_quasiperiodic(model, freq.omega, 1, rng)
    Z = solve_quasiperiodic(W, freq).Z
    kt = freq.ktilde(model)
    for j in range(kt.shape[1]):
        Kj = np.diag(kt[:, j].astype(float))
        for c in Z.coeffs:
            assert np.abs(Kj @ c - c @ Kj).max() <= 1e-12


def test_absorption_bookkeeping(qp_setup, rng):
    freq, model = qp_setup
    W = random_quasiperiodic(model, freq.omega, 1, rng)
    sol = solve_quasiperiodic(W, freq, divisor_floor=0.6)
    assert sol.census.absorbed_count > 0 and sol.census.absorbed_norm > 0
    assert sol.census.min_divisor == pytest.approx(2 - np.sqrt(2))
    assert homological_residual(sol, W=W)["max_residual"] <= 1e-12
    i = W.index_of((1,))
    a, b = np.argwhere(sol.absorbed[i])[0]
    assert sol.Z.coefficient((1,))[a, b] == W.coeffs[i, a, b]


def test_resonance_violation():
    model, H0, V, freq = standard_harmonic(report=8, omega="1")
    with pytest.raises(ResonanceViolation):
        solve_quasiperiodic(V, freq)


def test_needs_frequency_data(qp_setup, rng):
    freq, model = qp_setup
    W = random_quasiperiodic(model, freq.omega, 1, rng)
    with pytest.raises(ConfigError):
        solve_quasiperiodic(W)
    sol = solve_quasiperiodic(W, ktilde=freq.ktilde(model), nu_tilde=freq.nu_tilde)
    assert np.allclose(sol.X.coeffs, solve_quasiperiodic(W, freq).X.coeffs)
