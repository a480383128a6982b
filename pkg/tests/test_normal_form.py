import numpy as np
import pytest

from nflab.algebra import from_matrix, order_scan
from nflab.errors import ConfigError
from nflab.instances import standard_harmonic, zoll_instance
from nflab.normal_form import (DrivenHamiltonian, conjugation_chain, gain, iterate, normal_form_step,
                               transform_hamiltonian)
from nflab.quasiperiodic import QuasiPeriodicOperator, collocation_grid


@pytest.fixture(scope="module")
def small():
    return standard_harmonic(report=12, amplitude=0.1)


def test_gains():
    assert gain("superlinear", mu=2.0, rho=1.5) == 0.5
    assert gain("order_one", rho=0.5) == 0.5
    assert gain("superlinear", mu=4 / 3, rho=0.0) == pytest.approx(1 / 3)
    with pytest.raises(ConfigError):
        gain("superlinear", mu=1.0, rho=0.5)
    with pytest.raises(ConfigError):
        gain("order_one", rho=1.0)


def test_transform_zero_generator(small):
    model, H0, V, freq = small
    H = DrivenHamiltonian(H0, V)
    out, tail = transform_hamiltonian(H, QuasiPeriodicOperator.zero(model, V.omega))
    assert tail <= 1e-14
    assert np.abs((out.P - V).coeffs).max() <= 1e-13


def test_transform_commuting_static_generator(small, rng):
    model, H0, V, freq = small
    D = model.buffer_dim
    Vd = QuasiPeriodicOperator.from_dict(model, {(0,): np.diag(rng.normal(size=D))}, V.omega, 0.0)
    X = QuasiPeriodicOperator.from_dict(model, {(0,): np.diag(rng.normal(size=D))}, V.omega, 0.0)
    out, _ = transform_hamiltonian(DrivenHamiltonian(H0, Vd), X)
    assert np.abs((out.P - Vd).coeffs).max() <= 1e-12


def test_transform_methods_agree(small):
    model, H0, V, freq = small
    X, *_ = normal_form_step(H0, QuasiPeriodicOperator.zero(model, V.omega, 0.5), V, "order_one", freq)
    H = DrivenHamiltonian(H0, V)
    ex, _ = transform_hamiltonian(H, X, k_out=6)
    gl, _ = transform_hamiltonian(H, X, k_out=6, method="quadrature", quadrature_order=8)
    se, _ = transform_hamiltonian(H, X, k_out=6, method="series", series_depth=10)
    r = model.report
    diff = lambda a, b: np.abs((a.P - b.P).coeffs[:, r][:, :, r]).max()
    assert diff(gl, se) <= 1e-8
    assert diff(ex, gl) <= 1e-8
    with pytest.raises(ConfigError):
        transform_hamiltonian(H, X, method="rk4")


def test_transform_rejects_nonsymmetric(small, rng):
    model, H0, V, freq = small
    D = model.buffer_dim
    X = QuasiPeriodicOperator.from_dict(model, {(1,): rng.normal(size=(D, D))}, V.omega, 0.0)
    with pytest.raises(ConfigError):
        transform_hamiltonian(DrivenHamiltonian(H0, V), X)


def test_resonant_perturbation_step(small, rng):
    model, H0, V, freq = small
    D = model.buffer_dim
    Vr = QuasiPeriodicOperator.from_dict(model, {(0,): np.diag(rng.normal(size=D))}, V.omega, 0.5)
    Z0 = QuasiPeriodicOperator.zero(model, V.omega, 0.5)
    X, Z, Vn, info = normal_form_step(H0, Z0, Vr, "order_one", freq)
    assert not np.any(X.coeffs) and not np.any(Vn.coeffs)
    assert np.array_equal(Z.coefficient((0,)), Vr.coefficient((0,)))


def test_single_iterate_equals_step(small):
    model, H0, V, freq = small
    res = iterate(H0, V, 1, "order_one", freq)
    X, Z, Vn, _ = normal_form_step(H0, QuasiPeriodicOperator.zero(model, V.omega, 0.5), V, "order_one", freq,
                                   k_out=4 * V.k_max)
    assert np.allclose(res.generators[0].coeffs, X.coeffs)
    assert np.abs((res.V - Vn).coeffs).max() <= 1e-14
    assert res.N == 1 and res.delta == 0.5


@pytest.fixture(scope="module")
def standard_result():
    model, H0, V, freq = standard_harmonic(report=48)
    return model, freq, iterate(H0, V, 2, "order_one", freq, scan_sizes=[12, 24, 48])


def test_standard_contraction(standard_result):
    model, freq, res = standard_result
    o1, o2 = (s["order_estimate"] for s in res.steps)
    assert o2 <= o1 - 0.25
    assert res.status == "complete"
    assert res.remainder_order() == pytest.approx(-0.5)


def test_invariants_at_sampled_angles(standard_result):
    model, freq, res = standard_result
    K0 = np.diag(model.k0_eigs)
    kt = np.diag(freq.ktilde(model)[:, 0].astype(float))
    H = res.hamiltonian()
    for th in collocation_grid(1, 7).reshape(-1):
        Z = res.Z.evaluate(th)
        assert np.abs(Z @ K0 - K0 @ Z).max() <= 1e-10
        assert np.abs(Z @ kt - kt @ Z).max() <= 1e-10
        for X in res.generators:
            M = X.evaluate(th)
            assert np.abs(M - M.conj().T).max() <= 1e-10
        M = H.matrix(th)
        assert np.abs(M - M.conj().T).max() <= 1e-10


def test_conjugation_chain_unitary(standard_result):
    model, freq, res = standard_result
    U = conjugation_chain(res.generators, 0.3)
    Ui = conjugation_chain(res.generators, 0.3, inverse=True)
    assert np.abs(U @ Ui - np.eye(model.buffer_dim)).max() <= 1e-12
    assert conjugation_chain([], 0.0) is None


def test_zoll_gain_and_generator_orders():
    def run(cutoff):
        model, H0, V, freq = zoll_instance(cutoff=cutoff)
        return iterate(H0, V, 2, "superlinear")

    res = {n: run(n) for n in (16, 32, 64)}
    assert res[16].delta == 0.5
    for j, nominal in enumerate([1.5 - 1.0, 1.5 - 1.0 - 0.5]):
        est = order_scan(lambda n: res[n].generators[j], [16, 32, 64])
        assert res[16].generators[j].order == pytest.approx(nominal)
        assert est.order is not None and est.order <= nominal + 0.25


def test_iterate_preconditions(small):
    model, H0, V, freq = small
    with pytest.raises(ConfigError):
        iterate(H0, V, 0, "order_one", freq)
    with pytest.raises(ConfigError):
        iterate(H0, V, 1, "superlinear")
    with pytest.raises(ConfigError):
        iterate(H0, V, 1, "order_one")
    asym = V + QuasiPeriodicOperator.from_dict(model, {(1,): np.eye(model.buffer_dim)}, V.omega, 0.5)
    with pytest.raises(ConfigError):
        iterate(H0, asym, 1, "order_one", freq)


def test_step_diagnostics(standard_result):
    model, freq, res = standard_result
    s = res.steps[0]
    for key in ("step", "delta", "min_divisor", "absorbed_norm", "seminorms", "order_estimate", "contractive"):
        assert key in s
    # nu_tilde = 1/2 and adjacent levels differ by 2 in the lattice: |sqrt2 - 1|
    assert s["min_divisor"] == pytest.approx(np.sqrt(2) - 1)
    assert s["absorbed_count"] == 0
    assert res.summary()["N"] == 2


def test_static_graded_wrapper(small):
    model, H0, V, freq = small
    S = QuasiPeriodicOperator.static(from_matrix(model, np.eye(model.buffer_dim), 0.0), V.omega)
    assert np.allclose(S.evaluate(1.0), np.eye(model.buffer_dim))
