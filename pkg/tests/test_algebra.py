import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import diagonal_model
from nflab.algebra import (average, commutator, default_m_grid, from_matrix, h0_operator, heisenberg_evolve,
                           identity, k0_operator, lie_conjugate, order_scan, series_remainder_order,
                           unitary_exp, weighted_norm)
from nflab.errors import ConfigError, ModelMismatchError, NumericalError
from nflab.spectral import build_harmonic_model, build_zoll_model


def rand(rng, n, herm=False):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2 if herm else a


def test_symmetric_flag_enforced(osc16, rng):
    with pytest.raises(NumericalError):
        from_matrix(osc16, rand(rng, 16), 0.0, symmetric=True)
    assert from_matrix(osc16, rand(rng, 16, True), 0.0).symmetric


def test_model_mismatch(osc16):
    other = build_harmonic_model([1.0], [16], buffer_fraction=0.0)
    with pytest.raises(ModelMismatchError):
        identity(osc16) + identity(other)


def test_adjoint_keeps_order(osc16, rng):
    A = from_matrix(osc16, rand(rng, 16), 1.5)
    assert A.adjoint().order == 1.5
    assert np.allclose(A.adjoint().matrix, A.matrix.conj().T)


def test_commutator_trivial(osc16, rng):
    K = k0_operator(osc16)
    assert not np.any(commutator(K, k0_operator(osc16, 2)).matrix)
    D1 = from_matrix(osc16, np.diag(rng.normal(size=16)), 0.0)
    assert not np.any(commutator(D1, K).matrix)
    assert commutator(K, k0_operator(osc16, 2)).order == 2.0


def test_commutator_with_position(osc16):
    K = k0_operator(osc16)
    x = from_matrix(osc16, osc16.position(0), 0.5)
    C = commutator(K, x).matrix
    lam = osc16.k0_eigs
    assert np.allclose(C, (lam[:, None] - lam[None, :]) * x.matrix, atol=1e-14)
    assert commutator(K, x).order == 0.5


def test_heisenberg_trivial_and_periodic(osc16, rng):
    A = from_matrix(osc16, rand(rng, 16), 0.0)
    assert np.array_equal(heisenberg_evolve(A, 0.0).matrix, A.matrix)
    assert np.allclose(heisenberg_evolve(A, 2 * np.pi).matrix, A.matrix, atol=1e-10)
    z = build_zoll_model(2, 10, buffer_fraction=0.0)
    B = from_matrix(z, rand(rng, 10), 0.0)
    assert np.allclose(heisenberg_evolve(B, 2 * np.pi).matrix, B.matrix, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_heisenberg_group_law(t1, t2):
    m = build_harmonic_model([1.0], [12], buffer_fraction=0.0)
    A = from_matrix(m, rand(np.random.default_rng(0), 12), 0.0)
    lhs = heisenberg_evolve(heisenberg_evolve(A, t2), t1).matrix
    rhs = heisenberg_evolve(A, t1 + t2).matrix
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, abs(t1) + abs(t2))


def test_heisenberg_matches_expm(osc16, rng):
    A = from_matrix(osc16, rand(rng, 16), 0.0)
    K = np.diag(osc16.k0_eigs)
    U = unitary_exp(K, 0.7)
    assert np.allclose(heisenberg_evolve(A, 0.7).matrix, U @ A.matrix @ U.conj().T)


def test_heisenberg_vector_tau(rng):
    m = build_harmonic_model([1.0, np.sqrt(2)], [3, 3], buffer_fraction=0.0)
    A = from_matrix(m, rand(rng, 9), 0.0)
    tau = np.array([0.3, -1.1])
    ph = m.k_eigs @ tau
    expect = A.matrix * np.exp(1j * (ph[:, None] - ph[None, :]))
    assert np.allclose(heisenberg_evolve(A, tau).matrix, expect)
    with pytest.raises(ConfigError):
        heisenberg_evolve(A, [1.0, 2.0, 3.0])


@settings(max_examples=20, deadline=None)
@given(st.floats(-20, 20))
def test_heisenberg_preserves_weighted_norms(tau):
    m = build_harmonic_model([1.0], [12], buffer_fraction=0.0)
    A = from_matrix(m, rand(np.random.default_rng(1), 12), 0.0)
    for s in (-1.0, 0.0, 2.0):
        assert weighted_norm(heisenberg_evolve(A, tau), 0.5, s) == pytest.approx(weighted_norm(A, 0.5, s), rel=1e-12)


def test_average_basic(osc16, rng):
    D = from_matrix(osc16, np.diag(rng.normal(size=16)), 0.0)
    assert np.array_equal(average(D).matrix, D.matrix)
    x = from_matrix(osc16, osc16.position(0), 0.5)
    assert not np.any(average(x).matrix)


def test_average_position_quadrature(osc16):
    x = from_matrix(osc16, osc16.position(0), 0.5)
    taus = 2 * np.pi * np.arange(256) / 256
    quad = sum(heisenberg_evolve(x, t).matrix for t in taus) / 256
    assert np.abs(quad - average(x).matrix).max() <= 1e-10


def test_average_lattice_nonresonant(rng):
    m = build_harmonic_model([1.0, np.sqrt(2)], [3, 3], buffer_fraction=0.0)
    A = from_matrix(m, rand(rng, 9), 0.0)
    avg = average(A, m.k_lattice)
    assert np.array_equal(avg.matrix, np.diag(np.diag(A.matrix)))


def test_average_rejects_noninteger(rng):
    m = diagonal_model([1.0, 1.3])
    with pytest.raises(ConfigError):
        average(from_matrix(m, rand(rng, 2), 0.0))


def test_average_invariants(rng):
    m = build_zoll_model(2, 20, "full", buffer_fraction=0.0)
    K = k0_operator(m)
    for _ in range(100):
        A = from_matrix(m, rand(rng, m.buffer_dim, True), 0.0)
        avg = average(A)
        assert np.abs(commutator(K, avg).matrix).max() <= 1e-12
        assert np.array_equal(average(avg).matrix, avg.matrix)


def test_weighted_norm_examples(osc16):
    assert weighted_norm(identity(osc16), 0, 0) == pytest.approx(1.0)
    for s in (-2.0, 0.0, 1.5):
        assert weighted_norm(k0_operator(osc16), 1, s) == pytest.approx(1.0)


def test_weighted_norm_scaling(osc16, rng):
    A = from_matrix(osc16, rand(rng, 16), 0.0)
    assert weighted_norm(3.0 * A, 0.5, 1.0) == pytest.approx(3.0 * weighted_norm(A, 0.5, 1.0))
    assert weighted_norm(A, 0.5, 1.0) >= 0


def test_weighted_norm_submultiplicative(rng):
    m = build_harmonic_model([1.0], [20], buffer_fraction=0.0)
    for _ in range(20):
        A = from_matrix(m, rand(rng, 20), 0.3)
        B = from_matrix(m, rand(rng, 20), -0.7)
        mA, mB = rng.uniform(-1, 1, 2)
        s = rng.uniform(-2, 2)
        lhs = weighted_norm(A @ B, mA + mB, s)
        rhs = weighted_norm(A, mA, s - mB) * weighted_norm(B, mB, s)
        assert lhs <= rhs * (1 + 1e-12)


def sizes_family(power):
    def build(n):
        m = build_harmonic_model([1.0], [n], buffer_fraction=0.0)
        return k0_operator(m, power)
    return build


def test_order_scan_powers():
    sizes = [16, 32, 64]
    assert order_scan(sizes_family(1.0), sizes).order == pytest.approx(1.0)
    assert order_scan(sizes_family(-2.0), sizes).order == pytest.approx(-2.0)


def test_order_scan_position():
    def build(n):
        m = build_harmonic_model([1.0], [n], buffer_fraction=0.0)
        return from_matrix(m, m.position(0), 0.5)

    est = order_scan(build, [16, 32, 64, 128])
    assert est.order <= 0.5 + 0.125


def test_order_scan_inconclusive():
    est = order_scan(sizes_family(1.0), [16, 32, 64], m_grid=default_m_grid(-3.0, 0.0))
    assert est.order is None


def test_lie_conjugate_zero_and_diagonal(osc16, rng):
    A = from_matrix(osc16, rand(rng, 16), 0.0)
    zero = from_matrix(osc16, np.zeros((16, 16)), 0.0)
    assert np.allclose(lie_conjugate(A, zero).matrix, A.matrix)
    d = rng.normal(size=16)
    X = from_matrix(osc16, np.diag(d), 0.0)
    expect = A.matrix * np.exp(1j * 0.8 * (d[:, None] - d[None, :]))
    for em in ("eigh", "pade"):
        assert np.abs(lie_conjugate(A, X, 0.8, exp_method=em).matrix - expect).max() <= 1e-10


def test_lie_conjugate_series_vs_exact(osc16, rng):
    A = from_matrix(osc16, rand(rng, 16, True), 0.0)
    Xm = rand(rng, 16, True)
    X = from_matrix(osc16, 0.1 * Xm / np.linalg.norm(Xm, 2), -0.5)
    ex = lie_conjugate(A, X, 1.0).report_block()
    se = lie_conjugate(A, X, 1.0, method="series", M=8).report_block()
    assert np.abs(ex - se).max() <= 1e-8


def test_lie_conjugate_rejections(osc16, rng):
    A = from_matrix(osc16, rand(rng, 16), 0.0)
    with pytest.raises(ConfigError):
        lie_conjugate(A, from_matrix(osc16, rand(rng, 16), 0.0, symmetric=False))
    with pytest.raises(ConfigError):
        lie_conjugate(A, k0_operator(osc16), method="series")
    assert series_remainder_order(1.0, 0.5, 3) == pytest.approx(-1.0)


def test_h0_operator_order():
    z = build_zoll_model(2, 5, buffer_fraction=0.0)
    H0 = h0_operator(z)
    assert H0.order == 2.0 and np.allclose(np.diag(H0.matrix), z.k0_eigs**2)
