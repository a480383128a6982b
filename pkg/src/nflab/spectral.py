"""Finite truncations of the reference operator K0 and of the unperturbed H0.

Every model lives in the eigenbasis of K0 (and of the commuting family
K_1..K_d when there is one), so all functions of K0 are diagonal matrices.
Models carry two index sets: the buffer, on which all algebra is done, and the
report block, on which results are measured.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import CapacityError, ConfigError, NumericalError

#: Default bound on the buffer dimension of any model.
MAX_DIM = 6000

_INT_TOL = 1e-12


def smooth_cutoff(x, R):
    """C-infinity cutoff equal to 1 on [0, R] and 0 on [R + 1, inf).

    The glue on [R, R+1] is built from ``exp(-1/t)``.
    """
    t = np.asarray(x, dtype=float) - R
    out = np.where(t <= 0.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    if np.any(mid):
        tm = t[mid]
        left = np.exp(-1.0 / (1.0 - tm))
        right = np.exp(-1.0 / tm)
        out[mid] = left / (left + right)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SymbolFunction:
    """Elliptic symbol f with H0 = f(K0).

    ``R`` is a threshold beyond which f' >= 1; the lift used by the
    homological solver is (1 - eta(x)) / f'(x) with eta = smooth_cutoff(., R).
    """

    f: Callable
    df: Callable
    d2f: Callable
    order: float
    R: float

    def eta(self, x):
        return smooth_cutoff(x, self.R)

    def lift_factor(self, x):
        """Return (1 - eta(x)) / f'(x), set to 0 wherever eta == 1."""
        x = np.asarray(x, dtype=float)
        keep = 1.0 - self.eta(x)
        out = np.zeros_like(x)
        nz = keep > 0.0
        out[nz] = keep[nz] / self.df(x[nz])
        return out


def power_symbol(mu, scale=1.0):
    """Symbol f(x) = (scale * x)**mu together with its derivatives."""
    c = float(scale) ** mu

    def f(x):
        return c * np.asarray(x, dtype=float) ** mu

    def df(x):
        return c * mu * np.asarray(x, dtype=float) ** (mu - 1.0)

    def d2f(x):
        return c * mu * (mu - 1.0) * np.asarray(x, dtype=float) ** (mu - 2.0)

    # f'(x) >= 1 for x >= R
    R = (1.0 / (c * mu)) ** (1.0 / (mu - 1.0)) if mu > 1.0 else 0.0
    return SymbolFunction(f=f, df=df, d2f=d2f, order=float(mu), R=float(R))


@dataclass(frozen=True)
class SobolevWeights:
    r: float
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Truncated eigen-structure of K0 and of the commuting family K.

    Attributes
    ----------
    kind : str
        ``"harmonic"``, ``"anharmonic"`` or ``"zoll"``.
    mode_dims : tuple of int
        Per-mode buffer sizes (number of levels for 1-D models).
    k_eigs : ndarray, shape (D, d)
        Joint eigenvalues of K_1..K_d at each basis index.
    k0_eigs : ndarray, shape (D,)
        Eigenvalues of K0.
    h0_eigs : ndarray, shape (D,)
        Eigenvalues of the unperturbed Hamiltonian H0.
    report : ndarray of int
        Indices of the report block inside the buffer.
    k_lattice : ndarray of int or None
        ``k_eigs - lambda`` as integers when the joint spectrum is a shifted
        lattice, else None.
    """

    kind: str
    mode_dims: tuple
    k_eigs: np.ndarray
    k0_eigs: np.ndarray
    h0_eigs: np.ndarray
    report: np.ndarray
    integer_spectrum: bool
    lambda_shift: float | None
    mu: float
    symbol: SymbolFunction | None = None
    k_lattice: np.ndarray | None = None
    nu: tuple = ()
    params: dict = field(default_factory=dict)
    _ops: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if np.any(self.k0_eigs <= 0):
            raise NumericalError("K0 must be positive on the truncation")
        if self.integer_spectrum:
            shifted = self.k0_eigs - self.lambda_shift
            if np.max(np.abs(shifted - np.round(shifted))) > _INT_TOL or np.min(shifted) < -_INT_TOL:
                raise NumericalError("k0_eigs - lambda_shift is not a nonnegative integer")
        if len(self.report) > len(self.k0_eigs):
            raise ConfigError("report block larger than buffer")

    @property
    def buffer_dim(self):
        return len(self.k0_eigs)

    @property
    def report_dim(self):
        return len(self.report)

    @property
    def n_modes(self):
        return self.k_eigs.shape[1]

    @property
    def report_mask(self):
        mask = np.zeros(self.buffer_dim, dtype=bool)
        mask[self.report] = True
        return mask

    def top_indices(self, fraction=0.1):
        """Indices of the highest ``fraction`` of the buffer, ranked by K0."""
        n = max(1, int(math.ceil(fraction * self.buffer_dim)))
        return np.argsort(self.k0_eigs, kind="stable")[-n:]

    # raw matrices in the model basis -------------------------------------------------
    def position(self, mode=0):
        """Position-like multiplication operator of the given mode."""
        return self._ops["position"](mode)

    def momentum(self, mode=0):
        try:
            return self._ops["momentum"](mode)
        except KeyError:
            raise ConfigError(f"{self.kind} model has no momentum operator") from None

    def lowering(self, mode=0):
        try:
            return self._ops["lowering"](mode)
        except KeyError:
            raise ConfigError(f"{self.kind} model has no ladder operators") from None


def _check_capacity(dim, max_dim):
    if dim > max_dim:
        raise CapacityError(f"truncation dimension {dim} exceeds bound {max_dim}")


def _buffer_size(cutoff, buffer_fraction):
    return int(math.ceil(cutoff * (1.0 + buffer_fraction) - 1e-12))


# harmonic -------------------------------------------------------------------------------

def build_harmonic_model(nu, per_mode_cutoffs, buffer_fraction=0.5, max_dim=MAX_DIM):
    """Tensor-product oscillator model with H0 = sum_j nu_j K_j.

    Each K_j = -d_j^2 + x_j^2 has eigenvalues 2 a_j + 1 and K0 = sum_j K_j.

    Parameters
    ----------
    nu : sequence of float
        Positive mode frequencies.
    per_mode_cutoffs : sequence of int
        Report sizes per mode; the buffer adds ``buffer_fraction`` on top.
    """
    nu = tuple(float(v) for v in np.atleast_1d(nu))
    cutoffs = tuple(int(c) for c in np.atleast_1d(per_mode_cutoffs))
    if any(v <= 0 for v in nu):
        raise ConfigError("harmonic frequencies must be positive")
    if len(cutoffs) != len(nu):
        raise ConfigError("one cutoff per frequency is required")
    if any(c < 2 for c in cutoffs):
        raise ConfigError("per-mode cutoffs must be >= 2")
    if buffer_fraction < 0:
        raise ConfigError("buffer_fraction must be >= 0")
    dims = tuple(_buffer_size(c, buffer_fraction) for c in cutoffs)
    D = int(np.prod(dims))
    _check_capacity(D, max_dim)

    quanta = np.indices(dims).reshape(len(dims), -1).T  # C order multi-indices
    k_eigs = (2 * quanta + 1).astype(float)
    k0 = k_eigs.sum(axis=1)
    h0 = k_eigs @ np.asarray(nu)
    report = np.flatnonzero(np.all(quanta < np.asarray(cutoffs), axis=1))
    strides = np.array([int(np.prod(dims[j + 1:])) for j in range(len(dims))])

    def lowering(mode):
        a = np.zeros((D, D))
        src = np.flatnonzero(quanta[:, mode] > 0)
        a[src - strides[mode], src] = np.sqrt(quanta[src, mode])
        return a

    def position(mode):
        a = lowering(mode)
        return (a + a.T) / np.sqrt(2.0)

    def momentum(mode):
        a = lowering(mode)
        return 1j * (a.T - a) / np.sqrt(2.0)

    return SpectralModel(
        kind="harmonic",
        mode_dims=dims,
        k_eigs=k_eigs,
        k0_eigs=k0,
        h0_eigs=h0,
        report=report,
        integer_spectrum=True,
        lambda_shift=float(len(dims)),
        mu=1.0,
        k_lattice=(2 * quanta).astype(np.int64),
        nu=nu,
        params={"type": "harmonic", "nu": list(nu), "cutoffs": list(cutoffs),
                "buffer_fraction": buffer_fraction},
        _ops={"lowering": lowering, "position": position, "momentum": momentum},
    )


# anharmonic -----------------------------------------------------------------------------

def bohr_sommerfeld_area(k, l, a):
    """Phase-space area of {xi^(2l) + a x^(2k) <= 1}."""
    return 4.0 * a ** (-1.0 / (2 * k)) * special.beta(1.0 / (2 * k), 1.0 + 1.0 / (2 * l)) / (2 * k)


def _hermite_ladder(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def _anharmonic_matrices(k, l, a, n, scale):
    b = _hermite_ladder(n)
    x = scale * (b + b.T) / np.sqrt(2.0)
    p2 = -((b.T - b) @ (b.T - b)) / (2.0 * scale**2)  # (i(b^+ - b)/(s sqrt 2))^2, real
    h = np.linalg.matrix_power(p2, l) + a * np.linalg.matrix_power(x, 2 * k)
    return x, h


def build_anharmonic_model(k, l, a=1.0, cutoff=40, buffer_fraction=0.5, tol=1e-8,
                           max_dim=MAX_DIM, max_hermite=4000):
    """1-D anharmonic oscillator H = D^(2l) + a x^(2k), diagonalized numerically.

    K0 is the Bohr-Sommerfeld normalized power ``(A/2pi) E^((k+l)/(2kl))`` of
    the eigenvalues E, where A is the area of the unit energy shell; then
    H0 = f(K0) with ``f(x) = (2 pi x / A)**mu`` and ``mu = 2kl/(k+l)``.
    The spectrum of K0 is only asymptotically a shifted lattice, so
    ``integer_spectrum`` is False.
    """
    if k < 1 or l < 1 or k + l < 3:
        raise ConfigError("anharmonic model needs k, l >= 1 and k + l >= 3")
    if a <= 0:
        raise ConfigError("anharmonic coefficient a must be positive")
    keep = _buffer_size(cutoff, buffer_fraction)
    _check_capacity(keep, max_dim)
    mu = 2.0 * k * l / (k + l)
    area = bohr_sommerfeld_area(k, l, a)
    e_top = (2.0 * np.pi * (keep + 0.5) / area) ** mu
    x_max = (e_top / a) ** (1.0 / (2 * k))
    p_max = e_top ** (1.0 / (2 * l))
    scale = math.sqrt(x_max / p_max)

    n = max(4 * keep, 200)
    while True:
        if n > max_hermite:
            raise NumericalError(f"anharmonic diagonalization did not converge below {max_hermite} Hermite states")
        x, h = _anharmonic_matrices(k, l, a, n, scale)
        evals, evecs = np.linalg.eigh(h)
        evals, evecs = evals[:keep], evecs[:, :keep]
        # residual against a larger basis in which the top-row truncation error is absent
        n_big = int(1.5 * n)
        _, h_big = _anharmonic_matrices(k, l, a, n_big, scale)
        v_big = np.zeros((n_big, keep))
        v_big[:n] = evecs
        resid = np.linalg.norm(h_big @ v_big - v_big * evals, axis=0) / np.maximum(1.0, np.abs(evals))
        bad = np.flatnonzero(resid > tol)
        if bad.size == 0:
            break
        if 2 * n > max_hermite:
            lvl = int(bad[0])
            raise NumericalError(f"anharmonic level {lvl} residual {resid[lvl]:.2e} exceeds {tol:.1e}")
        n *= 2

    k0 = (area / (2.0 * np.pi)) * evals ** (1.0 / mu)
    symbol = power_symbol(mu, scale=2.0 * np.pi / area)
    x_model = evecs.T @ x @ evecs
    b = _hermite_ladder(n)
    p = 1j * (b.T - b) / (np.sqrt(2.0) * scale)
    p_model = evecs.T @ p @ evecs

    def position(mode):
        if mode != 0:
            raise ConfigError("anharmonic model has a single mode")
        return x_model.copy()

    def momentum(mode):
        if mode != 0:
            raise ConfigError("anharmonic model has a single mode")
        return p_model.copy()

    return SpectralModel(
        kind="anharmonic",
        mode_dims=(keep,),
        k_eigs=k0[:, None].copy(),
        k0_eigs=k0,
        h0_eigs=evals.copy(),
        report=np.arange(min(int(cutoff), keep)),
        integer_spectrum=False,
        lambda_shift=None,
        mu=mu,
        symbol=symbol,
        params={"type": "anharmonic", "k": k, "l": l, "a": a, "cutoff": cutoff,
                "buffer_fraction": buffer_fraction, "hermite_dim": n},
        _ops={"position": position, "momentum": momentum},
    )


# Zoll -----------------------------------------------------------------------------------

def build_zoll_model(d, cutoff, multiplicity_mode="collapsed", buffer_fraction=0.5,
                     max_dim=MAX_DIM):
    """Zoll-type model with K0 eigenvalues n + (d-1)/2, n = 1..levels, H0 = K0^2.

    ``collapsed`` keeps one state per level; ``full`` (d = 1 or 2) keeps the
    whole degenerate block of spherical harmonics at each level.
    The position-like operator is multiplication by a zonal cosine
    (cos x on the circle, cos(theta) on the 2-sphere).
    """
    if d < 1:
        raise ConfigError("Zoll dimension must be >= 1")
    if multiplicity_mode not in ("collapsed", "full"):
        raise ConfigError(f"unknown multiplicity mode {multiplicity_mode!r}")
    if multiplicity_mode == "full" and d >= 3:
        raise CapacityError("full multiplicity is only available for d = 1 or 2")
    if cutoff < 1:
        raise ConfigError("Zoll cutoff must be >= 1")
    levels = _buffer_size(cutoff, buffer_fraction)
    shift = (d - 1) / 2.0

    if multiplicity_mode == "collapsed":
        labels = [(n, 0) for n in range(1, levels + 1)]
    elif d == 1:
        labels = [(n, s) for n in range(1, levels + 1) for s in (1, -1)]
    else:
        labels = [(n, m) for n in range(1, levels + 1) for m in range(-n, n + 1)]
    D = len(labels)
    _check_capacity(D, max_dim)
    n_arr = np.array([lab[0] for lab in labels])
    k0 = n_arr + shift
    index = {lab: i for i, lab in enumerate(labels)}

    def coupling(n, m):
        # <n+1, m| cos |n, m>
        if d == 2:
            return math.sqrt(((n + 1) ** 2 - m**2) / ((2 * n + 1) * (2 * n + 3)))
        return 0.5

    def position(mode):
        if mode != 0:
            raise ConfigError("Zoll model has a single mode")
        c = np.zeros((D, D))
        for (n, m), i in index.items():
            j = index.get((n + 1, m))
            if j is not None:
                c[i, j] = c[j, i] = coupling(n, m)
        return c

    return SpectralModel(
        kind="zoll",
        mode_dims=(levels,),
        k_eigs=k0[:, None].astype(float),
        k0_eigs=k0.astype(float),
        h0_eigs=(k0.astype(float)) ** 2,
        report=np.flatnonzero(n_arr <= cutoff),
        integer_spectrum=True,
        lambda_shift=shift,
        mu=2.0,
        symbol=power_symbol(2.0),
        k_lattice=(n_arr - 1)[:, None].astype(np.int64),
        nu=(1.0,),
        params={"type": "zoll", "d": d, "cutoff": cutoff, "multiplicity": multiplicity_mode,
                "buffer_fraction": buffer_fraction},
        _ops={"position": position},
    )


def build_model(spec):
    """Build a model from a config ``model`` block (a plain dict)."""
    spec = dict(spec)
    kind = spec.pop("type")
    if kind == "harmonic":
        return build_harmonic_model(spec["nu"], spec["cutoffs"], spec.get("buffer_fraction", 0.5))
    if kind == "anharmonic":
        return build_anharmonic_model(spec["k"], spec["l"], spec.get("a", 1.0), spec["cutoff"],
                                      spec.get("buffer_fraction", 0.5))
    if kind == "zoll":
        return build_zoll_model(spec["d"], spec["cutoff"], spec.get("multiplicity", "collapsed"),
                                spec.get("buffer_fraction", 0.5))
    raise ConfigError(f"unknown model type {kind!r}")


def sobolev_weights(model, r):
    """Weights lambda_a**r defining ||psi||_r = ||K0^r psi||."""
    return SobolevWeights(r=float(r), weights=model.k0_eigs ** float(r))


def sobolev_norm(model, psi, r):
    return float(np.linalg.norm(sobolev_weights(model, r).weights * psi))


def apply_symbol(model, g, order=None):
    """Return g(K0) as a diagonal GradedOperator.

    ``g`` is a SymbolFunction (its ``f`` and ``order`` are used) or a plain
    callable, in which case ``order`` must be given.
    """
    from .algebra import GradedOperator

    if isinstance(g, SymbolFunction):
        fn, order = g.f, g.order if order is None else order
    else:
        fn = g
        if order is None:
            raise ConfigError("order must be declared for a plain callable")
    vals = np.asarray(fn(model.k0_eigs), dtype=complex)
    if vals.shape != model.k0_eigs.shape or not np.all(np.isfinite(vals)):
        raise NumericalError("symbol is not finite on the spectrum of K0")
    return GradedOperator(np.diag(vals), float(order), model, symmetric=bool(np.all(vals.imag == 0)))
