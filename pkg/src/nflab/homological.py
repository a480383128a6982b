"""Homological equations: the periodic-flow equation and its quasiperiodic version.

Both are solved entrywise in the eigenbasis. Near-resonant entries whose
divisor falls below a floor are moved into the resonant part (so the
transformed Hamiltonian stays exactly equivalent) and counted in a census.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import DEFAULT_S_GRID, RESONANCE_TOL, GradedOperator, commutator, h0_operator, weighted_norm
from .errors import ConfigError, ResonanceViolation
from .quasiperiodic import QuasiPeriodicOperator

DIVISOR_FLOOR = 1e-6


@dataclass
class DivisorCensus:
    min_divisor: float = np.inf
    floor: float = DIVISOR_FLOOR
    absorbed_count: int = 0
    absorbed_norm: float = 0.0

    def merge(self, other):
        return DivisorCensus(min(self.min_divisor, other.min_divisor), self.floor,
                             self.absorbed_count + other.absorbed_count,
                             self.absorbed_norm + other.absorbed_norm)

    def as_dict(self):
        md = None if not np.isfinite(self.min_divisor) else float(self.min_divisor)
        return {"min_divisor": md, "floor": self.floor, "absorbed_count": int(self.absorbed_count),
                "absorbed_norm": float(self.absorbed_norm)}


@dataclass
class HomologicalSolution:
    """Generator X, resonant part Z and divisor census.

    Unpacks as ``X, Z = solution``.
    """

    X: object
    Z: object
    census: DivisorCensus = field(default_factory=DivisorCensus)
    absorbed: np.ndarray | None = field(default=None, repr=False)
    divisors: np.ndarray | None = field(default=None, repr=False)

    def __iter__(self):
        yield self.X
        yield self.Z


def _entrywise(model, mat, divisor_floor, integer):
    """Split one matrix into (Y, resonant part, absorbed mask, census)."""
    lam = model.k0_eigs
    gap = lam[:, None] - lam[None, :]
    if integer:
        resonant = np.abs(gap) <= RESONANCE_TOL
        near = np.zeros_like(resonant)
    else:
        resonant = gap == 0.0
        near = (~resonant) & (np.abs(gap) < divisor_floor) & (mat != 0)
    keep = resonant | near
    Y = np.zeros_like(mat)
    solve = ~keep
    Y[solve] = mat[solve] / (1j * gap[solve])
    census = DivisorCensus(floor=divisor_floor)
    active = solve & (mat != 0)
    if active.any():
        census.min_divisor = float(np.abs(gap[active]).min())
    if near.any():
        census.absorbed_count = int(near.sum())
        census.absorbed_norm = float(np.linalg.norm(np.where(near, mat, 0.0), 2))
        census.min_divisor = min(census.min_divisor, float(np.abs(gap[near]).min()))
    return Y, np.where(keep, mat, 0.0), near, census


def solve_K0_homological(A, divisor_floor=DIVISOR_FLOOR, entrywise=None):
    """Solve i[K0, Y] = A - <A> entrywise.

    Y_ab = A_ab / (i (lambda_a - lambda_b)) off the resonant set, with the same
    order as A. On integer-shifted spectra the resonant set is lambda_a ==
    lambda_b; otherwise (or with ``entrywise=True``) entries with
    |lambda_a - lambda_b| < divisor_floor are absorbed into the resonant part.

    Accepts a GradedOperator or a QuasiPeriodicOperator (solved per mode).
    """
    integer = A.model.integer_spectrum if entrywise is None else not entrywise
    if isinstance(A, QuasiPeriodicOperator):
        ys, zs, census = [], [], DivisorCensus(floor=divisor_floor)
        for c in A.coeffs:
            Y, Z, _, cen = _entrywise(A.model, c, divisor_floor, integer)
            ys.append(Y)
            zs.append(Z)
            census = census.merge(cen)
        X = QuasiPeriodicOperator(A.modes, np.stack(ys), A.omega, A.order, A.model)
        Zq = QuasiPeriodicOperator(A.modes, np.stack(zs), A.omega, A.order, A.model)
        return HomologicalSolution(X, Zq, census)
    Y, Z, near, census = _entrywise(A.model, A.matrix, divisor_floor, integer)
    sym = A.symmetric
    return HomologicalSolution(GradedOperator(Y, A.order, A.model, sym),
                               GradedOperator(Z, A.order, A.model, sym), census, absorbed=near)


def lift_to_H0(Y, symbol=None, symmetrize=True):
    """X = (1 - eta(K0)) f'(K0)^(-1) Y, of order m - mu + 1.

    With ``symmetrize=True`` (default) the diagonal factor D is applied as
    (D Y + Y D) / 2, which keeps X symmetric when Y is; the two forms differ
    by an operator of lower order.
    """
    model = Y.model
    symbol = model.symbol if symbol is None else symbol
    if symbol is None:
        raise ConfigError("model has no symbol function f with H0 = f(K0)")
    if symbol.order <= 1.0:
        raise ConfigError("lifting needs a symbol of order mu > 1")
    dfac = symbol.lift_factor(model.k0_eigs)

    def apply(mat):
        if symmetrize:
            return 0.5 * (dfac[:, None] * mat + mat * dfac[None, :])
        return dfac[:, None] * mat

    order = Y.order - symbol.order + 1.0
    if isinstance(Y, QuasiPeriodicOperator):
        return Y.map_coeffs(apply, order=order)
    return GradedOperator(apply(Y.matrix), order, model, Y.symmetric and symmetrize)


def quasiperiodic_divisors(W, ktilde, nu_tilde):
    """delta[k, a, b] = omega.k + nu_tilde.(m_a - m_b) for every stored mode."""
    kt = np.asarray(ktilde, dtype=float)
    if kt.ndim == 1:
        kt = kt[:, None]
    e = kt @ np.atleast_1d(np.asarray(nu_tilde, dtype=float))
    return (W.modes @ W.omega)[:, None, None] + (e[:, None] - e[None, :])[None]


def solve_quasiperiodic(W, freq=None, divisor_floor=DIVISOR_FLOOR, ktilde=None, nu_tilde=None):
    """Solve omega.d_theta X + i[H0, X] = W - <W> mode by mode.

    Parameters
    ----------
    W : QuasiPeriodicOperator
    freq : FrequencySystem, optional
        Supplies the K-tilde tuples, nu_tilde and exact resonance tests.
        Alternatively pass ``ktilde`` and ``nu_tilde`` directly (floating
        comparisons are then used to detect exact zeros).

    Returns
    -------
    HomologicalSolution
        X has entries -i W_k,ab / delta_k,ab; Z holds the k=0 entries with
        equal K-tilde tuples plus any absorbed near-resonances.
    """
    model = W.model
    if freq is not None:
        ktilde = freq.ktilde(model)
        nu_tilde = freq.nu_tilde
        if freq.omega is not None and not np.allclose(freq.omega, W.omega, rtol=1e-14, atol=1e-14):
            raise ConfigError("drive frequency of W differs from the frequency system")
    if ktilde is None or nu_tilde is None:
        raise ConfigError("need a FrequencySystem or explicit ktilde and nu_tilde")
    kt = np.asarray(ktilde, dtype=np.int64)
    if kt.ndim == 1:
        kt = kt[:, None]
    delta = quasiperiodic_divisors(W, kt, nu_tilde)
    same = np.all(kt[:, None, :] == kt[None, :, :], axis=-1)
    is_zero_mode = np.all(W.modes == 0, axis=1)
    resonant = np.zeros(delta.shape, dtype=bool)
    resonant[is_zero_mode] = same[None]
    nonzero = np.abs(W.coeffs) > 0
    scale = max(1.0, float(np.abs(W.omega).sum()), float(np.abs(nu_tilde).sum()))
    tiny = (~resonant) & nonzero & (np.abs(delta) < 1e-9 * scale)
    if tiny.any():
        for i, a, b in zip(*np.nonzero(tiny)):
            ell = kt[a] - kt[b]
            exact = freq.is_exact_zero(W.modes[i], ell) if freq is not None else abs(delta[i, a, b]) < 1e-13 * scale
            if exact:
                raise ResonanceViolation(
                    f"zero divisor at k={W.modes[i].tolist()}, l={ell.tolist()} with nonzero coefficient")
    near = (~resonant) & nonzero & (np.abs(delta) < divisor_floor)
    keep = resonant | near
    X = np.zeros_like(W.coeffs)
    solve = ~keep
    X[solve] = -1j * W.coeffs[solve] / delta[solve]
    census = DivisorCensus(floor=divisor_floor)
    active = (solve | near) & nonzero
    if active.any():
        census.min_divisor = float(np.abs(delta[active]).min())
    if near.any():
        census.absorbed_count = int(near.sum())
        census.absorbed_norm = float(sum(np.linalg.norm(np.where(near[i], W.coeffs[i], 0.0), 2)
                                         for i in range(len(W.modes)) if near[i].any()))
    Xq = QuasiPeriodicOperator(W.modes, X, W.omega, W.order, model)
    Zq = QuasiPeriodicOperator(W.modes, np.where(keep, W.coeffs, 0.0), W.omega, W.order, model).prune()
    return HomologicalSolution(Xq, Zq, census, absorbed=near, divisors=delta)


def homological_residual(solution, H0=None, W=None, m=None, s_grid=DEFAULT_S_GRID):
    """Check the homological identity solved by ``solution``.

    Quasiperiodic case: max over modes and non-absorbed entries of
    |i delta X_k - (W - <W>)_k|. Graded case: weighted norms of
    i[H0, X] - (A - <A>) at order m (default order(A) - 1) for each s.
    """
    X, Z = solution.X, solution.Z
    if isinstance(X, QuasiPeriodicOperator):
        if W is None or solution.divisors is None:
            raise ConfigError("quasiperiodic residual needs W and a divisor table")
        lhs = 1j * solution.divisors * X.coeffs
        rhs = W.coeffs - np.stack([Z.coefficient(k) for k in W.modes])
        diff = np.abs(lhs - rhs)
        if solution.absorbed is not None:
            diff = np.where(solution.absorbed, 0.0, diff)
        return {"max_residual": float(diff.max(initial=0.0)), "census": solution.census.as_dict()}
    A = W
    if A is None:
        raise ConfigError("graded residual needs the right-hand side A")
    H0 = h0_operator(X.model) if H0 is None else H0
    R = 1j * commutator(H0, X).matrix - (A.matrix - Z.matrix)
    Rop = GradedOperator(R, A.order - 1.0, X.model)
    m = A.order - 1.0 if m is None else m
    return {"order": m, "norms": {float(s): weighted_norm(Rop, m, s) for s in s_grid},
            "max_entry": float(np.abs(Rop.report_block()).max(initial=0.0)), "operator": Rop}
