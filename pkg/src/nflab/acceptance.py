"""Acceptance experiments, one function per criterion.

Each returns a :class:`CriterionResult`; :func:`run_all` runs a selection.
The oracles used here (quadrature, convergent enumeration, coherent states)
are independent of the code paths they check.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .algebra import average, commutator, from_matrix, h0_operator, k0_operator, order_scan
from .arithmetic import (PrimitivityError, complete_basis, decompose_frequency, diophantine_scan, frequency_system,
                         integer_determinant, parse_frequency_vector)
from .homological import homological_residual, solve_K0_homological, solve_quasiperiodic
from .instances import ground_state, standard_harmonic, zoll_instance
from .normal_form import DrivenHamiltonian, gain, iterate
from .propagator import (coherent_norms, conjugate_state, fit_growth, map_trajectory, maro_check, propagate)
from .quasiperiodic import QuasiPeriodicOperator
from .spectral import build_harmonic_model, build_zoll_model


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float = math.inf

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"criterion {self.number} [{verdict}] {self.title} ({self.seconds:.1f}s / {self.budget:g}s): {parts}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _timed(number, title, budget):
    def wrap(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            passed, detail = fn(*args, **kwargs)
            sec = time.perf_counter() - t0
            detail["within_budget"] = sec < budget
            return CriterionResult(number, title, bool(passed and sec < budget), detail, sec, budget)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def random_symmetric(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2.0


def random_quasiperiodic(model, omega, k_max, rng, order=0.0):
    """Random symmetric Fourier series with |k| <= k_max on one angle."""
    D = model.buffer_dim
    terms = {(0,): random_symmetric(rng, D)}
    for k in range(1, k_max + 1):
        c = (rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))) / 2.0
        terms[(k,)] = c
        terms[(-k,)] = c.conj().T
    return QuasiPeriodicOperator.from_dict(model, terms, omega, order)


# 1 ---------------------------------------------------------------------------------------

@_timed(1, "averaging commutant", 10.0)
def criterion_1(seed=1, samples=100, dim=64, tol=1e-12):
    model = build_harmonic_model([1.0], [dim], buffer_fraction=0.0)
    K0 = k0_operator(model)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        A = from_matrix(model, random_symmetric(rng, dim), 0.0, symmetric=True)
        C = commutator(K0, average(A))
        worst = max(worst, float(np.abs(C.matrix).max()))
    return worst <= tol, {"max_entry": worst, "tol": tol}


# 2 ---------------------------------------------------------------------------------------

def sol1_quadrature(A, avg, nodes=512):
    """(1/2pi) int_0^2pi tau (A - <A>)(tau) dtau by Gauss-Legendre quadrature."""
    lam = A.model.k0_eigs
    gap = lam[:, None] - lam[None, :]
    x, w = np.polynomial.legendre.leggauss(nodes)
    tau, w = np.pi * (x + 1.0), np.pi * w
    D = A.matrix - avg.matrix
    acc = np.zeros_like(D)
    for t, wt in zip(tau, w):
        acc += wt * t * np.exp(1j * t * gap)
    return acc * D / (2.0 * np.pi)


@_timed(2, "homological identities", 30.0)
def criterion_2(seed=2, samples=10, tol_identity=1e-12, tol_quad=1e-9):
    rng = np.random.default_rng(seed)
    models = [build_harmonic_model([1.0], [64], 0.0), build_zoll_model(2, 40, buffer_fraction=0.0)]
    ident, quad = 0.0, 0.0
    for model in models:
        K0 = k0_operator(model)
        for _ in range(samples):
            A = from_matrix(model, random_symmetric(rng, model.buffer_dim), 0.0, symmetric=True)
            Y, Z = solve_K0_homological(A)
            R = 1j * commutator(K0, Y).matrix - (A.matrix - Z.matrix)
            ident = max(ident, float(np.abs(R).max()))
            quad = max(quad, float(np.abs(sol1_quadrature(A, Z) - Y.matrix).max()))
    return ident <= tol_identity and quad <= tol_quad, {"identity": ident, "quadrature": quad}


# 3 ---------------------------------------------------------------------------------------

@_timed(3, "quasiperiodic solver", 30.0)
def criterion_3(seed=3, dim=64, k_max=3, tol=1e-9, tol_comm=1e-12):
    freq = frequency_system(["1/2"], ["sqrt2"])
    model = build_harmonic_model(freq.nu, [dim], 0.0)
    W = random_quasiperiodic(model, freq.omega, k_max, np.random.default_rng(seed), order=0.5)
    sol = solve_quasiperiodic(W, freq)
    res = homological_residual(sol, W=W)
    Kt = np.diag(freq.ktilde(model)[:, 0].astype(float))
    Z0 = sol.Z.coefficient([0])
    comm = float(np.abs(Kt @ Z0 - Z0 @ Kt).max())
    # Fourier-sampling oracle on an 8-point grid
    H0 = h0_operator(model).matrix
    Xd = sol.X.derivative()
    samp = 0.0
    for th in 2 * np.pi * np.arange(8) / 8:
        X = sol.X.evaluate([th])
        lhs = Xd.evaluate([th]) + 1j * (H0 @ X - X @ H0)
        samp = max(samp, float(np.abs(lhs - (W.evaluate([th]) - Z0)).max()))
    ok = res["max_residual"] <= tol and comm <= tol_comm and sol.census.absorbed_count == 0 and samp <= tol
    return ok, {"mode_residual": res["max_residual"], "sampled_residual": samp, "Ktilde_commutator": comm,
                "absorbed": sol.census.absorbed_count, "min_divisor": sol.census.min_divisor}


# 4 ---------------------------------------------------------------------------------------

LATTICE_SUITE = [[1, 1, 1], [1, 1, 1, 1], [1, "sqrt2"], [1, 2], [1, "sqrt2", "1+sqrt2"],
                 ["sqrt2", "2*sqrt2", "sqrt3"], ["1/2", "3/4"]]


@_timed(4, "lattice arithmetic", 5.0)
def criterion_4():
    dets, recon, dtilde = [], [], {}
    for nu in LATTICE_SUITE:
        gens, rows = parse_frequency_vector(nu)
        f = decompose_frequency(gens, rows)
        dets.append(abs(integer_determinant(f.M)))
        recon.append(f.reconstruction_holds())
        dtilde[str(nu)] = f.d_tilde
    remark_ok = (dtilde[str([1, 1, 1])] == 1 and dtilde[str([1, 1, 1, 1])] == 1
                 and frequency_system([1, "sqrt2"]).M == [[1, 0], [0, 1]])
    try:
        complete_basis([[2, 0]], 2)
        rejected = False
    except PrimitivityError as exc:
        rejected = 2 in exc.invariant_factors
    ok = all(d == 1 for d in dets) and all(recon) and remark_ok and rejected
    return ok, {"all_det_one": all(d == 1 for d in dets), "reconstruction_exact": all(recon),
                "degenerate_cases": remark_ok, "primitivity_rejection": rejected}


# 5 ---------------------------------------------------------------------------------------

def sqrt2_convergents(q_max):
    """Convergents p/q of sqrt2 = [1; 2, 2, ...], starting with p_-1/q_-1 = 1/0."""
    out = [(1, 0)]
    p_prev, q_prev, p, q = 1, 0, 1, 1
    while q <= q_max:
        out.append((p, q))
        p_prev, q_prev, p, q = p, q, 2 * p + p_prev, 2 * q + q_prev
    return out


def is_convergent_relation(k, ell, convergents):
    """True when |sqrt2 k + ell| comes from a convergent: (|ell|, |k|) = (p, q), opposite signs."""
    k, ell = k[0], ell[0]
    if k != 0 and ell != 0 and (k > 0) == (ell > 0):
        return False
    return (abs(ell), abs(k)) in set(convergents)


@_timed(5, "Diophantine scan", 10.0)
def criterion_5(kappa=2.0, K_max=50):
    freq = frequency_system([1], ["sqrt2"])
    rec = diophantine_scan(freq, kappa, K_max)
    conv = sqrt2_convergents(K_max)
    on_conv = is_convergent_relation(rec.offender[0], rec.offender[1], conv)
    rec1 = diophantine_scan(freq, 1.0, K_max)
    return rec.gamma_hat > 0 and on_conv, {
        "gamma_hat": rec.gamma_hat, "offender": rec.offender, "on_convergent": on_conv,
        "kappa1_offender": rec1.offender, "kappa1_on_convergent": is_convergent_relation(*rec1.offender, conv)}


# 6 ---------------------------------------------------------------------------------------

@_timed(6, "conjugation equivalence", 120.0)
def criterion_6(T=10.0, N=2, tol=1e-4):
    model, H0, V, freq = standard_harmonic(48, 0.5, "sqrt2")
    res = iterate(H0, V, N, "order_one", freq=freq)
    psi0 = ground_state(model)
    direct = propagate(DrivenHamiltonian(H0, V), psi0, [0.0, T], tol=1e-10)
    phi0 = conjugate_state(psi0, res.generators, freq.omega * 0.0, "inverse")
    trans = propagate(res.hamiltonian(), phi0, [0.0, T], tol=1e-10)
    back = conjugate_state(trans.states[-1], res.generators, freq.omega * T, "forward")
    err = float(np.linalg.norm(direct.states[-1] - back))
    return err <= tol, {"difference": err, "tol": tol}


# 7 ---------------------------------------------------------------------------------------

def standard_contraction(N=2, report=48, sizes=(12, 24, 48)):
    model, H0, V, freq = standard_harmonic(report, 0.5, "sqrt2")
    res = iterate(H0, V, N, "order_one", freq=freq, scan_sizes=list(sizes), halt_on_regression=False)
    orders = [order_scan(V, list(sizes)).order] + [s["order_estimate"] for s in res.steps]
    return orders, res


@_timed(7, "smoothing contraction", 180.0)
def criterion_7(min_drop=0.25):
    orders, res = standard_contraction()
    drops = [a - b for a, b in zip(orders, orders[1:])]
    zmodel, zH0, zV, zfreq = zoll_instance(rho=1.5)
    zres = iterate(zH0, zV, 1, "superlinear")
    delta_book = gain("superlinear", mu=2.0, rho=1.5)
    ok = all(d >= min_drop for d in drops[:2]) and delta_book == 0.5 and zres.delta == 0.5
    return ok, {"orders": orders, "drops": drops, "delta_star": res.delta, "zoll_delta": zres.delta}


# 8 ---------------------------------------------------------------------------------------

def growth_grid(t_end=512.0, dt=0.25):
    return dt * np.arange(int(round(t_end / dt)) + 1)


def resonant_control(r_list=(0.5, 1.0), t_end=512.0, check_until=12.0):
    """Coherent-state oracle run plus a short direct-propagation cross-check."""
    t = growth_grid(t_end)
    norms, _ = coherent_norms(t, 0.5, 1.0, 1.0, r_list)
    fits = {r: fit_growth(t, norms[r], r=r) for r in r_list}
    model, H0, V, _ = standard_harmonic(48, 0.5, "1")
    short = t[t <= check_until]
    tr = propagate(DrivenHamiltonian(H0, V), ground_state(model), short, tol=1e-9)
    dev = max(float(np.max(np.abs(tr.norm(r) - norms[r][: len(short)]) / norms[r][: len(short)])) for r in r_list)
    return fits, dev


def diophantine_growth(r_list=(0.5, 1.0), t_end=512.0, N=2):
    model, H0, V, freq = standard_harmonic(48, 0.5, "sqrt2")
    res = iterate(H0, V, N, "order_one", freq=freq)
    t = growth_grid(t_end)
    phi0 = conjugate_state(ground_state(model), res.generators, freq.omega * 0.0, "inverse")
    tr = propagate(res.hamiltonian(), phi0, t, r_list=r_list)
    mapped = map_trajectory(tr, res.generators, freq.omega, r_list)
    return {r: fit_growth(mapped, r=r) for r in r_list}, mapped


@_timed(8, "growth contrast", 600.0)
def criterion_8(resonant_range=(0.8, 1.2), diophantine_max=0.15):
    fits_res, dev = resonant_control()
    fits_dio, mapped = diophantine_growth()
    e_res, e_dio = fits_res[1.0].epsilon, fits_dio[1.0].epsilon
    ok_res = resonant_range[0] <= e_res <= resonant_range[1]
    ok_dio = e_dio <= diophantine_max and not mapped.contaminated
    return ok_res and ok_dio, {"resonant_eps_r1": e_res, "resonant_pass": ok_res,
                               "resonant_eps_r0.5": fits_res[0.5].epsilon, "oracle_vs_direct": dev,
                               "diophantine_eps_r1": e_dio, "diophantine_pass": ok_dio}


# 9 ---------------------------------------------------------------------------------------

MARO_GRID = [round(-2.0 + 0.25 * i, 10) for i in range(21)]


def maro_pair(sizes=(48, 64, 96), N=2, r=1.0, grid=MARO_GRID):
    cache = {}

    def build(size):
        if size not in cache:
            model, H0, V, freq = standard_harmonic(size, 0.5, "sqrt2")
            cache[size] = (DrivenHamiltonian(H0, V), iterate(H0, V, N, "order_one", freq=freq).hamiltonian())
        return cache[size]

    raw = maro_check(lambda s: build(s)[0], grid, sizes, r=r)
    trans = maro_check(lambda s: build(s)[1], grid, sizes, r=r)
    return raw, trans


@_timed(9, "maro criterion", 180.0)
def criterion_9():
    raw, trans = maro_pair()
    step = MARO_GRID[1] - MARO_GRID[0]
    ok = (raw.largest_bounded is not None and trans.largest_bounded is not None
          and trans.largest_bounded - raw.largest_bounded >= step - 1e-12)
    return ok, {"raw_N": raw.largest_bounded, "transformed_N": trans.largest_bounded,
                "raw_prediction": raw.predicted_exponent, "transformed_prediction": trans.predicted_exponent}


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}
QUICK = (1, 2, 3, 4, 5)


def run_all(which=None):
    which = sorted(CRITERIA) if which is None else which
    return [CRITERIA[i]() for i in which]
