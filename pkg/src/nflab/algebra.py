"""Graded operators as dense matrices in the K0 eigenbasis.

A GradedOperator pairs a matrix with a nominal order m; orders follow the
graded-algebra rules (products add, commutators add and drop one).
Weighted seminorms ||A||_{m,s} are the operator norms
||diag(lambda^(s-m)) A diag(lambda^(-s))|| on the report block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, ModelMismatchError, NumericalError

SYMMETRY_TOL = 1e-12
RESONANCE_TOL = 1e-9

#: Sobolev indices used for the finite seminorm family.
DEFAULT_S_GRID = (-2.0, -1.0, 0.0, 1.0, 2.0)


@dataclass(frozen=True, eq=False)
class GradedOperator:
    matrix: np.ndarray
    order: float
    model: object = field(repr=False)
    symmetric: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        n = self.model.buffer_dim
        if mat.shape != (n, n):
            raise ConfigError(f"matrix shape {mat.shape} does not match buffer dimension {n}")
        object.__setattr__(self, "matrix", mat)
        if self.symmetric and symmetry_defect(mat) > SYMMETRY_TOL * max(1.0, np.abs(mat).max()):
            raise NumericalError("operator flagged symmetric is not")

    # arithmetic -------------------------------------------------------------
    def _check(self, other):
        if other.model is not self.model:
            raise ModelMismatchError("operators belong to different models")

    def __add__(self, other):
        self._check(other)
        return GradedOperator(self.matrix + other.matrix, max(self.order, other.order), self.model,
                              self.symmetric and other.symmetric)

    def __sub__(self, other):
        self._check(other)
        return GradedOperator(self.matrix - other.matrix, max(self.order, other.order), self.model,
                              self.symmetric and other.symmetric)

    def __neg__(self):
        return GradedOperator(-self.matrix, self.order, self.model, self.symmetric)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        return GradedOperator(scalar * self.matrix, self.order, self.model,
                              self.symmetric and scalar.imag == 0)

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        return GradedOperator(self.matrix @ other.matrix, self.order + other.order, self.model)

    def adjoint(self):
        return GradedOperator(self.matrix.conj().T, self.order, self.model, self.symmetric)

    def with_order(self, order):
        return GradedOperator(self.matrix, float(order), self.model, self.symmetric)

    def report_block(self):
        r = self.model.report
        return self.matrix[np.ix_(r, r)]

    def is_symmetric(self, tol=SYMMETRY_TOL):
        return symmetry_defect(self.matrix) <= tol * max(1.0, np.abs(self.matrix).max())


def symmetry_defect(mat):
    return float(np.abs(mat - mat.conj().T).max()) if mat.size else 0.0


def identity(model):
    return GradedOperator(np.eye(model.buffer_dim), 0.0, model, symmetric=True)


def k0_operator(model, power=1.0):
    """K0**power as a diagonal operator of order ``power``."""
    return GradedOperator(np.diag(model.k0_eigs ** float(power)), float(power), model, symmetric=True)


def h0_operator(model):
    return GradedOperator(np.diag(model.h0_eigs), float(model.mu), model, symmetric=True)


def from_matrix(model, matrix, order, symmetric=None):
    mat = np.asarray(matrix, dtype=complex)
    if symmetric is None:
        symmetric = symmetry_defect(mat) <= SYMMETRY_TOL * max(1.0, np.abs(mat).max(initial=0.0))
    return GradedOperator(mat, float(order), model, bool(symmetric))


def commutator(A, B):
    """[A, B] with nominal order m + n - 1."""
    A._check(B)
    return GradedOperator(A.matrix @ B.matrix - B.matrix @ A.matrix, A.order + B.order - 1.0, A.model)


def _phase_differences(model, tau):
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau_arr.size == 1 and np.ndim(tau) == 0:
        lam = model.k0_eigs
        return float(tau) * (lam[:, None] - lam[None, :])
    if tau_arr.size != model.n_modes:
        raise ConfigError(f"tau has {tau_arr.size} components, model has {model.n_modes} modes")
    proj = model.k_eigs @ tau_arr
    return proj[:, None] - proj[None, :]


def heisenberg_evolve(A, tau):
    """e^{i tau K0} A e^{-i tau K0}, or e^{i tau.K} A e^{-i tau.K} for vector tau."""
    phase = np.exp(1j * _phase_differences(A.model, tau))
    return GradedOperator(A.matrix * phase, A.order, A.model, A.symmetric)


def scalar_resonance_mask(model, tol=RESONANCE_TOL):
    """Entries (a, b) with lambda_a == lambda_b, for integer-spectrum models."""
    if not model.integer_spectrum:
        raise ConfigError("scalar averaging needs an integer-shifted spectrum; use the entrywise solver")
    lam = model.k0_eigs
    return np.abs(lam[:, None] - lam[None, :]) <= tol


def lattice_resonance_mask(ktilde):
    """Entries whose K-tilde eigen tuples coincide componentwise."""
    kt = np.asarray(ktilde)
    if kt.ndim == 1:
        kt = kt[:, None]
    return np.all(kt[:, None, :] == kt[None, :, :], axis=-1)


def average(A, resonance="scalar"):
    """Average of A along the periodic flow generated by K0 (or by K-tilde).

    ``resonance`` is ``"scalar"`` for the K0 flow, or an integer array of
    K-tilde eigen tuples (shape (D, d_tilde)) for the lattice flow.
    """
    if isinstance(resonance, str):
        if resonance != "scalar":
            raise ConfigError(f"unknown resonance mode {resonance!r}")
        mask = scalar_resonance_mask(A.model)
    else:
        mask = lattice_resonance_mask(resonance)
    return GradedOperator(np.where(mask, A.matrix, 0.0), A.order, A.model, A.symmetric)


def weighted_matrix(model, matrix, m, s, block=None):
    idx = model.report if block is None else np.asarray(block)
    lam = model.k0_eigs[idx]
    sub = matrix[np.ix_(idx, idx)]
    return (lam ** (s - m))[:, None] * sub * (lam ** (-s))[None, :]


def weighted_norm(A, m, s, block=None):
    """||A||_{m,s}: operator norm from H^s to H^(s-m) on the report block."""
    w = weighted_matrix(A.model, A.matrix, m, s, block)
    return float(np.linalg.norm(w, 2)) if w.size else 0.0


def seminorm_table(A, m=None, s_grid=DEFAULT_S_GRID):
    m = A.order if m is None else m
    return {float(s): weighted_norm(A, m, s) for s in s_grid}


# order scans --------------------------------------------------------------------------

@dataclass
class OrderEstimate:
    """Result of an empirical order scan.

    ``order`` is the smallest grid value at which every probed seminorm stays
    bounded across the truncation sequence (max over s); None when no grid
    value qualifies.
    """

    order: float | None
    per_s: dict
    slopes: dict
    sizes: list
    inconclusive: bool
    m_grid: list

    def as_dict(self):
        return {"order": self.order, "per_s": self.per_s, "sizes": list(self.sizes),
                "inconclusive": self.inconclusive}


def default_m_grid(lo=-3.0, hi=3.0, step=0.125):
    return [round(lo + i * step, 10) for i in range(int(round((hi - lo) / step)) + 1)]


def _norm_sequence(items, m, s, floor):
    """Summed weighted norms of each item's matrices, plus the largest eigenvalue probed."""
    norms, lmax = [], []
    for model, mats, block in items:
        idx = model.report if block is None else block
        lam = model.k0_eigs[idx]
        left, right = lam ** (s - m), lam ** (-s)
        total = 0.0
        for mat in mats:
            sub = mat[np.ix_(idx, idx)]
            if floor:
                sub = np.where(np.abs(sub) > floor, sub, 0.0)
            if np.any(sub):
                total += float(np.linalg.norm(left[:, None] * sub * right[None, :], 2))
        norms.append(total)
        lmax.append(float(lam.max()))
    return np.array(norms), np.array(lmax)


def growth_slope(norms, lmax):
    """Least-squares exponent of norms against the largest eigenvalue probed."""
    norms = np.asarray(norms, dtype=float)
    if np.all(norms == 0.0):
        return -math.inf
    if np.any(norms == 0.0):
        return math.inf if norms[-1] > 0 else -math.inf
    x = np.log(lmax)
    y = np.log(norms)
    return float(np.polyfit(x, y, 1)[0])


def _as_items(A, sizes):
    """Normalize an operator / family into a list of (model, matrices, block)."""
    from .quasiperiodic import QuasiPeriodicOperator

    def mats_of(op):
        if isinstance(op, GradedOperator):
            return op.model, [op.matrix]
        if isinstance(op, QuasiPeriodicOperator):
            return op.model, list(op.coeffs)
        raise ConfigError(f"cannot scan object of type {type(op).__name__}")

    if callable(A) and not isinstance(A, (GradedOperator, QuasiPeriodicOperator)):
        items = []
        for size in sizes:
            model, mats = mats_of(A(size))
            items.append((model, mats, None))
        return items
    model, mats = mats_of(A)
    lam = model.k0_eigs
    report = model.report
    order = report[np.argsort(lam[report], kind="stable")]
    items = []
    for size in sizes:
        if size > len(order):
            raise ConfigError(f"nested block size {size} exceeds report dimension {len(order)}")
        items.append((model, mats, np.sort(order[:size])))
    return items


def order_scan(A, sizes, m_grid=None, s_grid=DEFAULT_S_GRID, tol=0.1, floor=1e-10):
    """Estimate the order of A from the growth of ||A||_{m,s} across truncations.

    Parameters
    ----------
    A : GradedOperator, QuasiPeriodicOperator or callable
        A callable is called with each entry of ``sizes`` and must return the
        operator built at that truncation. An operator is probed on nested
        report sub-blocks of the given sizes (lowest K0 levels first).
    tol : float
        A seminorm counts as bounded when its log-log growth exponent against
        the largest probed eigenvalue is at most ``tol``.
    floor : float
        Matrix entries with modulus below this are treated as exact zeros.

    Notes
    -----
    Boundedness across a finite truncation sequence is a heuristic stand-in
    for membership in A_m.
    """
    m_grid = sorted(default_m_grid() if m_grid is None else m_grid)
    items = _as_items(A, sizes)
    per_s, slopes = {}, {}
    inconclusive = False
    for s in s_grid:
        cache = {}

        def slope_at(i):
            if i not in cache:
                norms, lmax = _norm_sequence(items, m_grid[i], s, floor)
                cache[i] = growth_slope(norms, lmax)
            return cache[i]

        # slopes decrease with m, so bisect for the first bounded grid point
        lo, hi = 0, len(m_grid) - 1
        if slope_at(hi) > tol:
            per_s[float(s)] = None
            inconclusive = True
            slopes[float(s)] = {m_grid[i]: v for i, v in cache.items()}
            continue
        if slope_at(lo) <= tol:
            hi = lo
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if slope_at(mid) <= tol:
                hi = mid
            else:
                lo = mid
        per_s[float(s)] = m_grid[hi]
        slopes[float(s)] = {m_grid[i]: v for i, v in sorted(cache.items())}
    order = None if inconclusive else max(per_s.values())
    return OrderEstimate(order=order, per_s=per_s, slopes=slopes, sizes=list(sizes),
                         inconclusive=inconclusive, m_grid=list(m_grid))


# exponentials and conjugation -------------------------------------------------------

def hermitian_exp(H, t=1.0):
    """exp(-i t H) for Hermitian H via its spectral decomposition."""
    w, q = np.linalg.eigh(H)
    return (q * np.exp(-1j * t * w)) @ q.conj().T


def expm_unitary(M):
    """exp(M) for anti-Hermitian M: Pade scaling-and-squaring plus a polar projection.

    The polar factor of the Pade result is the nearest unitary matrix, which
    removes the norm drift that accumulates along long conjugation chains.
    """
    E = scipy.linalg.expm(M)
    u, _, vh = np.linalg.svd(E)
    return u @ vh


def unitary_exp(X, tau=1.0, method="eigh"):
    """exp(i tau X) for symmetric X."""
    if method == "eigh":
        return hermitian_exp(X, -tau)
    if method == "pade":
        return expm_unitary(1j * tau * np.asarray(X))
    raise ConfigError(f"unknown exponential method {method!r}")


def ad(X, A):
    """ad_X(A) = i [X, A] on raw matrices."""
    return 1j * (X @ A - A @ X)


def lie_conjugate(A, X, tau=1.0, method="exact", M=8, exp_method="eigh"):
    """e^{i tau X} A e^{-i tau X}.

    ``method="exact"`` uses a unitary matrix exponential; ``method="series"``
    returns the truncated Lie series sum_{l<=M} tau^l ad_X^l(A) / l!.
    """
    A._check(X)
    if not X.is_symmetric():
        raise ConfigError("conjugating generator must be symmetric")
    if method == "exact":
        U = unitary_exp(X.matrix, tau, exp_method)
        out = U @ A.matrix @ U.conj().T
    elif method == "series":
        if X.order >= 1.0:
            raise ConfigError("series conjugation needs a generator of order < 1")
        term = A.matrix
        out = term.copy()
        for ell in range(1, M + 1):
            term = tau * ad(X.matrix, term) / ell
            out = out + term
    else:
        raise ConfigError(f"unknown conjugation method {method!r}")
    return GradedOperator(out, A.order, A.model, A.symmetric and method == "exact" and A.is_symmetric())


def series_remainder_order(A_order, X_order, M):
    """Nominal order of the remainder after M terms of the Lie series."""
    return A_order - (M + 1) * (1.0 - X_order)
