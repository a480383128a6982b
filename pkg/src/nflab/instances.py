"""Reference problem instances used by the CLI, the demos and the test suite."""
from __future__ import annotations

import numpy as np

from .algebra import h0_operator
from .arithmetic import frequency_system
from .quasiperiodic import QuasiPeriodicOperator
from .spectral import build_harmonic_model, build_zoll_model

#: Oscillator frequency of the standard instance; level spacing nu * 2 = 1.
STANDARD_NU = "1/2"
STANDARD_RHO = 0.5


def cosine_drive(model, op, amplitude, omega, order, mode_index=0):
    """amplitude * cos(omega . theta) * op as a quasiperiodic operator (n = len(omega))."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    k = np.zeros(omega.size, dtype=np.int64)
    k[mode_index] = 1
    half = 0.5 * amplitude * np.asarray(op, dtype=complex)
    return QuasiPeriodicOperator.from_dict(model, {tuple(k): half, tuple(-k): half}, omega, order)


def standard_harmonic(report=48, buffer_fraction=0.5, omega="sqrt2", amplitude=1.0):
    """1-D oscillator H0 = K/2 driven by amplitude * cos(omega t) x.

    Returns ``(model, H0, V, freq)``; ``omega="1"`` gives the resonant control.
    """
    freq = frequency_system([STANDARD_NU], [omega])
    model = build_harmonic_model(freq.nu, [report], buffer_fraction)
    V = cosine_drive(model, model.position(0), amplitude, freq.omega, STANDARD_RHO)
    return model, h0_operator(model), V, freq


def zoll_instance(rho=1.5, cutoff=24, buffer_fraction=0.5, omega="sqrt2", amplitude=0.1, d=2):
    """Zoll-type model with H0 = K0^2 and drive K0^(rho/2) cos(x) K0^(rho/2) of order rho."""
    freq = frequency_system([1], [omega])
    model = build_zoll_model(d, cutoff, "collapsed", buffer_fraction)
    w = model.k0_eigs ** (rho / 2.0)
    op = w[:, None] * model.position(0) * w[None, :]
    V = cosine_drive(model, op, amplitude, freq.omega, rho)
    return model, h0_operator(model), V, freq


def ground_state(model):
    psi = np.zeros(model.buffer_dim, dtype=complex)
    psi[int(np.argmin(model.k0_eigs))] = 1.0
    return psi
