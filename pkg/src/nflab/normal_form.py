"""Iterative smoothing conjugation H0 + V(t) -> H0 + Z(t) + V_N(t).

A generator X(theta) changes the state by psi = exp(-iX) phi, which turns
H into exp(iX) H exp(-iX) - int_0^1 exp(isX) Xdot exp(-isX) ds. All
time dependence is quasiperiodic with finite Fourier support, so Xdot is
exact and the transformed operator is recovered from samples on a Fourier
collocation grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .algebra import DEFAULT_S_GRID, GradedOperator, ad, order_scan
from .errors import ConfigError
from .homological import DIVISOR_FLOOR, lift_to_H0, solve_K0_homological, solve_quasiperiodic
from .quasiperiodic import QuasiPeriodicOperator

log = logging.getLogger(__name__)

REGIMES = ("superlinear", "order_one")


@dataclass(frozen=True, eq=False)
class DrivenHamiltonian:
    """H(t) = H0 + P(omega t), with P a quasiperiodic operator."""

    H0: GradedOperator
    P: QuasiPeriodicOperator

    def __post_init__(self):
        if self.P.model is not self.H0.model:
            raise ConfigError("H0 and the perturbation belong to different models")

    @property
    def model(self):
        return self.H0.model

    @property
    def omega(self):
        return self.P.omega

    def matrix(self, theta):
        return self.H0.matrix + self.P.evaluate(theta)

    def matrix_at(self, t):
        return self.matrix(self.P.omega * float(t))


def gain(regime, mu=None, rho=None):
    """Per-step order gain: min(1, mu - 1, mu - rho) or 1 - rho."""
    if regime == "superlinear":
        if mu is None or rho is None or mu <= 1 or rho >= mu:
            raise ConfigError("superlinear regime needs mu > 1 and rho < mu")
        return min(1.0, mu - 1.0, mu - rho)
    if regime == "order_one":
        if rho is None or rho >= 1:
            raise ConfigError("order-one regime needs rho < 1")
        return 1.0 - rho
    raise ConfigError(f"unknown regime {regime!r}")


def _phi1(z):
    """(e^z - 1) / z, with the removable singularity filled."""
    out = np.ones_like(z)
    big = np.abs(z) > 1e-8
    out[big] = np.expm1(z[big]) / z[big]
    small = ~big
    out[small] = 1.0 + z[small] / 2.0 + z[small] ** 2 / 6.0
    return out


def _transform_point(H, X, Xd, method, quadrature_order, series_depth):
    """exp(iX) H exp(-iX) - int_0^1 exp(isX) Xd exp(-isX) ds at one angle."""
    if method == "series":
        out = H.copy()
        term = H
        for ell in range(1, series_depth + 1):
            term = ad(X, term) / ell
            out = out + term
        term = Xd
        acc = Xd.copy()
        fact = 1.0
        for ell in range(1, series_depth + 1):
            term = ad(X, term)
            fact *= ell + 1
            acc = acc + term / fact
        return out - acc
    w, Q = np.linalg.eigh(X)
    Qh = Q.conj().T
    diff = 1j * (w[:, None] - w[None, :])
    Ht = Qh @ H @ Q
    Xt = Qh @ Xd @ Q
    conj = Ht * np.exp(diff)
    if method == "exact":
        integral = Xt * _phi1(diff)
    elif method == "quadrature":
        nodes, weights = np.polynomial.legendre.leggauss(quadrature_order)
        s = 0.5 * (nodes + 1.0)
        integral = sum(0.5 * wt * np.exp(si * diff) for si, wt in zip(s, weights)) * Xt
    else:
        raise ConfigError(f"unknown transform method {method!r}")
    out = Q @ (conj - integral) @ Qh
    return 0.5 * (out + out.conj().T)


def transform_hamiltonian(H, X, k_out=None, method="exact", quadrature_order=8, series_depth=10, grid=None):
    """Conjugate a driven Hamiltonian by the quasiperiodic generator X.

    Parameters
    ----------
    H : DrivenHamiltonian
    X : QuasiPeriodicOperator
        Symmetric generator sharing omega with H.
    k_out : int, optional
        Fourier support kept in the result (default: support of P plus twice
        that of X).
    method : {"exact", "quadrature", "series"}
        ``exact`` integrates the s-integral in closed form in the eigenbasis
        of X(theta); ``quadrature`` uses Gauss-Legendre nodes; ``series``
        uses the nested-commutator expansion.
    grid : int, optional
        Collocation points per angle; default 2 * (2 k_out) + 1.

    Returns
    -------
    (DrivenHamiltonian, tail)
        ``tail`` is the summed Frobenius norm of the discarded Fourier modes.
    """
    P = H.P
    P._check(X)
    if not X.is_symmetric(1e-10):
        raise ConfigError("generator must be symmetric")
    if k_out is None:
        k_out = P.k_max + 2 * X.k_max
    L = 2 * (2 * k_out) + 1 if grid is None else int(grid)
    n, D = P.n, P.model.buffer_dim
    Ps = P.sample(L).reshape(-1, D, D)
    Xs = X.sample(L).reshape(-1, D, D)
    Xds = X.derivative().sample(L).reshape(-1, D, D)
    H0 = H.H0.matrix
    out = np.empty_like(Ps)
    for i in range(len(Ps)):
        out[i] = _transform_point(H0 + Ps[i], Xs[i], Xds[i], method, quadrature_order, series_depth) - H0
    newP, tail = QuasiPeriodicOperator.from_samples(out.reshape((L,) * n + (D, D)), P.omega, P.order, P.model, k_out)
    if tail > 1e-8:
        log.warning("Fourier re-truncation discarded a tail of norm %.3e", tail)
    return DrivenHamiltonian(H.H0, newP), tail


@dataclass
class NormalFormResult:
    """Output of :func:`iterate`.

    ``generators`` are in application order: psi = exp(-iX_1) ... exp(-iX_N) phi.
    """

    H0: GradedOperator
    generators: list
    Z: QuasiPeriodicOperator
    V: QuasiPeriodicOperator
    regime: str
    delta: float
    rho: float
    steps: list = field(default_factory=list)
    status: str = "complete"

    @property
    def N(self):
        return len(self.generators)

    def hamiltonian(self):
        return DrivenHamiltonian(self.H0, self.Z + self.V)

    def remainder_order(self):
        return self.rho - self.N * self.delta

    def summary(self):
        return {"regime": self.regime, "delta": self.delta, "rho": self.rho, "N": self.N,
                "status": self.status, "steps": [{k: v for k, v in s.items() if k != "operator"} for s in self.steps]}


def _seminorms(op, m, s_grid):
    return {float(s): op.weighted_norm(m, s) for s in s_grid}


def normal_form_step(H0, Z, V, regime, freq=None, divisor_floor=DIVISOR_FLOOR, k_out=None,
                     method="exact", symmetrize=True, quadrature_order=8, series_depth=10):
    """One conjugation step.

    Returns ``(X, Z', V', info)``. In the superlinear regime X lifts the
    periodic-flow solution for V to H0; in the order-one regime X solves the
    quasiperiodic equation with the drive derivative included. In both cases
    Z' = Z + <V> and V' = transformed perturbation - Z'.
    """
    if regime == "superlinear":
        sol = solve_K0_homological(V, divisor_floor=divisor_floor)
        X = lift_to_H0(sol.X, symmetrize=symmetrize)
    elif regime == "order_one":
        if freq is None:
            raise ConfigError("order-one regime needs a frequency system")
        sol = solve_quasiperiodic(V, freq, divisor_floor=divisor_floor)
        X = sol.X
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    X = X.prune()
    avg = sol.Z.with_order(V.order)
    Znew = (Z + avg).prune().with_order(Z.order)
    if not np.any(X.coeffs):
        info = {"census": sol.census.as_dict(), "tail": 0.0}
        return X, Znew, QuasiPeriodicOperator.zero(V.model, V.omega, V.order), info
    Hnew, tail = transform_hamiltonian(DrivenHamiltonian(H0, Z + V), X, k_out=k_out, method=method,
                                       quadrature_order=quadrature_order, series_depth=series_depth)
    Vnew = (Hnew.P - Znew).prune(1e-15)
    return X, Znew, Vnew, {"census": sol.census.as_dict(), "tail": tail}


def iterate(H0, V, N, regime, freq=None, rho=None, divisor_floor=DIVISOR_FLOOR, k_max_total=None,
            method="exact", scan_sizes=None, m_grid=None, s_grid=DEFAULT_S_GRID, symmetrize=True,
            halt_on_regression=True):
    """Apply ``N`` normal-form steps to H0 + V.

    Parameters
    ----------
    H0 : GradedOperator
    V : QuasiPeriodicOperator
        Symmetric perturbation; its nominal order is rho unless given.
    k_max_total : int, optional
        Cap on the Fourier support of all iterates (default 4x the drive support).
    scan_sizes : list of int, optional
        Nested block sizes for order scans of each remainder. When given, a
        step whose remainder order does not drop is flagged non-contractive
        and, with ``halt_on_regression``, iteration stops there.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    if not V.is_symmetric(1e-10):
        raise ConfigError("perturbation must be symmetric")
    rho = V.order if rho is None else float(rho)
    V = V.with_order(rho)
    delta = gain(regime, mu=H0.model.mu if regime == "superlinear" else None, rho=rho)
    if regime == "superlinear" and H0.model.symbol is None:
        raise ConfigError("superlinear regime needs a model with H0 = f(K0)")
    k_out = 4 * max(V.k_max, 1) if k_max_total is None else int(k_max_total)
    Z = QuasiPeriodicOperator.zero(V.model, V.omega, rho)
    gens, steps = [], []
    prev_order = None
    if scan_sizes is not None:
        prev_order = order_scan(V, scan_sizes, m_grid=m_grid, s_grid=s_grid).order
    status = "complete"
    for j in range(1, N + 1):
        X, Z, Vn, info = normal_form_step(H0, Z, V, regime, freq=freq, divisor_floor=divisor_floor,
                                          k_out=k_out, method=method, symmetrize=symmetrize)
        nominal = rho - j * delta
        gen_order = (rho - (H0.model.mu - 1.0) - (j - 1) * delta) if regime == "superlinear" else rho - (j - 1) * delta
        X = X.with_order(gen_order)
        Vn = Vn.with_order(nominal)
        gens.append(X)
        step = {"step": j, "delta": delta, "nominal_order": nominal, "generator_order": gen_order,
                "min_divisor": info["census"]["min_divisor"], "absorbed_norm": info["census"]["absorbed_norm"],
                "absorbed_count": info["census"]["absorbed_count"], "fourier_tail": info["tail"],
                "remainder_max": Vn.max_abs(), "generator_max": X.max_abs(),
                "seminorms": _seminorms(Vn, nominal, s_grid)}
        if scan_sizes is not None:
            est = order_scan(Vn, scan_sizes, m_grid=m_grid, s_grid=s_grid)
            step["order_estimate"] = est.order
            step["contractive"] = bool(prev_order is None or est.order is None or est.order < prev_order)
            prev_order = est.order
        steps.append(step)
        V = Vn
        if scan_sizes is not None and not step["contractive"]:
            status = f"non-contractive at step {j}"
            log.warning("normal form step %d did not reduce the remainder order", j)
            if halt_on_regression:
                break
    return NormalFormResult(H0=H0, generators=gens, Z=Z, V=V, regime=regime, delta=delta, rho=rho,
                            steps=steps, status=status)


def conjugation_chain(generators, theta, inverse=False):
    """exp(-iX_1) ... exp(-iX_N) at theta, or its inverse."""
    from .algebra import hermitian_exp

    if not generators:
        return None
    D = generators[0].model.buffer_dim
    U = np.eye(D, dtype=complex)
    for X in generators:
        U = U @ hermitian_exp(X.evaluate(theta), 1.0)
    return U.conj().T if inverse else U
