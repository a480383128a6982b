"""Finite Fourier series theta -> W(theta) with matrix coefficients."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .algebra import SYMMETRY_TOL, GradedOperator, weighted_norm
from .errors import ConfigError, ModelMismatchError, NumericalError


def fourier_modes(n, k_max):
    """All k in Z^n with |k|_inf <= k_max, lexicographic."""
    rng = range(-int(k_max), int(k_max) + 1)
    return np.array(list(itertools.product(rng, repeat=n)), dtype=np.int64).reshape(-1, n)


def collocation_grid(n, L):
    """Uniform tensor grid of L^n angles, shape (L,)*n + (n,)."""
    axes = [2.0 * np.pi * np.arange(L) / L] * n
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class QuasiPeriodicOperator:
    """W(theta) = sum_k W_k exp(i k.theta) with drive frequency omega.

    Attributes
    ----------
    modes : ndarray of int, shape (M, n)
    coeffs : ndarray of complex, shape (M, D, D)
    omega : ndarray, shape (n,)
    order : float
        Nominal order shared by all coefficients.
    """

    modes: np.ndarray
    coeffs: np.ndarray
    omega: np.ndarray
    order: float
    model: object = field(repr=False)

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.int64)
        if modes.ndim == 1:
            modes = modes[:, None]
        coeffs = np.asarray(self.coeffs, dtype=complex)
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        D = self.model.buffer_dim
        if coeffs.shape != (len(modes), D, D):
            raise ConfigError(f"coefficient array shape {coeffs.shape} does not fit {len(modes)} modes of size {D}")
        if modes.shape[1] != omega.size:
            raise ConfigError("Fourier indices and omega disagree on the number of angles")
        if len({tuple(k) for k in modes}) != len(modes):
            raise ConfigError("duplicate Fourier modes")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "order", float(self.order))

    # construction --------------------------------------------------------------------
    @classmethod
    def zero(cls, model, omega, order=0.0):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        D = model.buffer_dim
        return cls(np.zeros((1, omega.size), dtype=np.int64), np.zeros((1, D, D)), omega, order, model)

    @classmethod
    def static(cls, op, omega):
        """Time-independent operator as a single k=0 mode."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        return cls(np.zeros((1, omega.size), dtype=np.int64), op.matrix[None], omega, op.order, op.model)

    @classmethod
    def from_dict(cls, model, terms, omega, order):
        """Build from {k tuple: matrix}."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        if not terms:
            return cls.zero(model, omega, order)
        keys = sorted(terms)
        return cls(np.array(keys, dtype=np.int64).reshape(len(keys), -1),
                   np.stack([np.asarray(terms[k], dtype=complex) for k in keys]), omega, order, model)

    @classmethod
    def from_samples(cls, samples, omega, order, model, k_out):
        """Fourier coefficients from samples on a collocation grid.

        ``samples`` has shape (L,)*n + (D, D) on :func:`collocation_grid`.
        Modes with |k|_inf <= k_out are kept. Returns ``(op, tail)`` where
        ``tail`` is the summed Frobenius norm (report block) of the dropped modes.
        """
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        n = omega.size
        L = samples.shape[0]
        if 2 * k_out + 1 > L:
            raise ConfigError(f"grid of {L} points cannot resolve |k| <= {k_out}")
        hat = np.fft.fftn(samples, axes=tuple(range(n))) / L**n
        freqs = np.fft.fftfreq(L, 1.0 / L).astype(np.int64)
        grid_k = np.stack(np.meshgrid(*([freqs] * n), indexing="ij"), axis=-1).reshape(-1, n)
        flat = hat.reshape(-1, *samples.shape[n:])
        keep = np.abs(grid_k).max(axis=1) <= k_out
        if L % 2 == 0:
            keep &= np.all(grid_k != -L // 2, axis=1)
        r = model.report
        dropped = flat[~keep][:, r][:, :, r]
        tail = float(np.linalg.norm(dropped, axis=(1, 2)).sum()) if dropped.size else 0.0
        order_idx = np.lexsort(grid_k[keep].T[::-1])
        return cls(grid_k[keep][order_idx], flat[keep][order_idx], omega, order, model), tail

    # basic properties --------------------------------------------------------------
    @property
    def n(self):
        return self.omega.size

    @property
    def k_max(self):
        return int(np.abs(self.modes).max()) if len(self.modes) else 0

    def _check(self, other):
        if other.model is not self.model:
            raise ModelMismatchError("operators belong to different models")
        if not np.allclose(other.omega, self.omega, rtol=0, atol=1e-14):
            raise ConfigError("quasiperiodic operators have different drive frequencies")

    def index_of(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        hit = np.flatnonzero(np.all(self.modes == k, axis=1))
        return int(hit[0]) if hit.size else None

    def coefficient(self, k):
        i = self.index_of(k)
        if i is None:
            return np.zeros((self.model.buffer_dim,) * 2, dtype=complex)
        return self.coeffs[i]

    def graded(self, k):
        return GradedOperator(self.coefficient(k), self.order, self.model)

    def mean(self):
        """The k=0 coefficient as a GradedOperator."""
        return GradedOperator(self.coefficient(np.zeros(self.n, dtype=np.int64)), self.order, self.model)

    # evaluation ------------------------------------------------------------------------
    def phases(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return np.exp(1j * (self.modes @ theta))

    def evaluate(self, theta):
        """W(theta) as a raw matrix."""
        return np.tensordot(self.phases(theta), self.coeffs, axes=1)

    def at(self, theta):
        return GradedOperator(self.evaluate(theta), self.order, self.model)

    def at_time(self, t):
        return self.evaluate(self.omega * float(t))

    def sample(self, L):
        """Values on the L^n collocation grid, shape (L,)*n + (D, D)."""
        grid = collocation_grid(self.n, L).reshape(-1, self.n)
        ph = np.exp(1j * grid @ self.modes.T)  # (G, M)
        D = self.model.buffer_dim
        vals = (ph @ self.coeffs.reshape(len(self.modes), -1)).reshape(-1, D, D)
        return vals.reshape((L,) * self.n + (D, D))

    # algebra ---------------------------------------------------------------------------
    def derivative(self):
        """omega . d/dtheta, computed exactly on the coefficients."""
        fac = 1j * (self.modes @ self.omega)
        return QuasiPeriodicOperator(self.modes, self.coeffs * fac[:, None, None], self.omega, self.order, self.model)

    def adjoint(self):
        """W(theta)^*: the coefficient at -k is the adjoint of W_k."""
        return QuasiPeriodicOperator(-self.modes, np.conj(np.swapaxes(self.coeffs, 1, 2)), self.omega,
                                     self.order, self.model)

    def symmetry_defect(self):
        """max_k |W_{-k} - W_k^*|."""
        worst = 0.0
        for k, c in zip(self.modes, self.coeffs):
            partner = self.coefficient(-k)
            worst = max(worst, float(np.abs(partner - c.conj().T).max()))
        return worst

    def is_symmetric(self, tol=SYMMETRY_TOL):
        scale = max(1.0, float(np.abs(self.coeffs).max(initial=0.0)))
        return self.symmetry_defect() <= tol * scale

    def symmetrized(self):
        return 0.5 * (self + self.adjoint())

    def _combine(self, other, sign):
        self._check(other)
        terms = {tuple(k): c.copy() for k, c in zip(self.modes, self.coeffs)}
        for k, c in zip(other.modes, other.coeffs):
            key = tuple(k)
            terms[key] = terms[key] + sign * c if key in terms else sign * c
        return QuasiPeriodicOperator.from_dict(self.model, terms, self.omega, max(self.order, other.order))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return QuasiPeriodicOperator(self.modes, -self.coeffs, self.omega, self.order, self.model)

    def __mul__(self, scalar):
        return QuasiPeriodicOperator(self.modes, complex(scalar) * self.coeffs, self.omega, self.order, self.model)

    __rmul__ = __mul__

    def with_order(self, order):
        return QuasiPeriodicOperator(self.modes, self.coeffs, self.omega, order, self.model)

    def map_coeffs(self, fn, order=None):
        """Apply ``fn`` to every coefficient matrix."""
        new = np.stack([fn(c) for c in self.coeffs])
        return QuasiPeriodicOperator(self.modes, new, self.omega, self.order if order is None else order, self.model)

    def prune(self, tol=0.0):
        """Drop modes whose coefficients are at most ``tol`` in modulus (k=0 is kept)."""
        big = np.abs(self.coeffs).reshape(len(self.modes), -1).max(axis=1) > tol
        big |= np.all(self.modes == 0, axis=1)
        if not big.any():
            return QuasiPeriodicOperator.zero(self.model, self.omega, self.order)
        return QuasiPeriodicOperator(self.modes[big], self.coeffs[big], self.omega, self.order, self.model)

    def truncate(self, k_max):
        """Keep |k|_inf <= k_max; return ``(op, tail)`` with the dropped Frobenius norm."""
        keep = np.abs(self.modes).max(axis=1) <= k_max
        r = self.model.report
        dropped = self.coeffs[~keep][:, r][:, :, r]
        tail = float(np.linalg.norm(dropped, axis=(1, 2)).sum()) if dropped.size else 0.0
        if not keep.any():
            return QuasiPeriodicOperator.zero(self.model, self.omega, self.order), tail
        return QuasiPeriodicOperator(self.modes[keep], self.coeffs[keep], self.omega, self.order, self.model), tail

    # norms -----------------------------------------------------------------------------
    def max_abs(self, report=True):
        c = self.coeffs
        if report:
            r = self.model.report
            c = c[:, r][:, :, r]
        return float(np.abs(c).max(initial=0.0))

    def weighted_norm(self, m, s):
        """Sum over modes of ||W_k||_{m,s}, an upper bound for sup_theta ||W(theta)||_{m,s}."""
        return float(sum(weighted_norm(GradedOperator(c, self.order, self.model), m, s) for c in self.coeffs))

    def sup_norm(self, m, s, L=16):
        """max over an L^n grid of ||W(theta)||_{m,s}."""
        vals = self.sample(L).reshape(-1, self.model.buffer_dim, self.model.buffer_dim)
        if not np.all(np.isfinite(vals)):
            raise NumericalError("non-finite operator samples")
        return max(weighted_norm(GradedOperator(v, self.order, self.model), m, s) for v in vals)
