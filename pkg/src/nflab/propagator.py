"""Time propagation, Sobolev norm tracking and growth-exponent fits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContaminationError
from .normal_form import conjugation_chain

GAUSS_OFFSET = math.sqrt(3.0) / 6.0
LEAK_FRACTION = 0.1


@dataclass
class Trajectory:
    """States and diagnostics on a time grid.

    ``status`` is ``"ok"`` or ``"contaminated"``; in the latter case the
    arrays stop at the first time the leak monitor tripped.
    """

    t: np.ndarray
    states: np.ndarray
    norms: dict
    unitarity_defect: np.ndarray
    leak: np.ndarray
    status: str = "ok"
    trip_time: float | None = None
    steps: int = 0
    rejected: int = 0
    model: object = field(default=None, repr=False)

    @property
    def contaminated(self):
        return self.status != "ok"

    def norm(self, r):
        r = float(r)
        if r not in self.norms:
            w = self.model.k0_eigs ** r
            self.norms[r] = np.linalg.norm(self.states * w[None, :], axis=1)
        return self.norms[r]

    def write_csv(self, path, r_list=None):
        r_list = sorted(self.norms) if r_list is None else [float(r) for r in r_list]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"norm_{r:g}" for r in r_list] + ["unitarity_defect", "leak"])
            for i, t in enumerate(self.t):
                w.writerow([repr(float(t))] + [repr(float(self.norm(r)[i])) for r in r_list]
                           + [repr(float(self.unitarity_defect[i])), repr(float(self.leak[i]))])


def _magnus_step(H, t, h, psi, integrator):
    if integrator == "magnus2":
        G = h * H.matrix_at(t + 0.5 * h)
    elif integrator == "magnus4":
        H1 = H.matrix_at(t + (0.5 - GAUSS_OFFSET) * h)
        H2 = H.matrix_at(t + (0.5 + GAUSS_OFFSET) * h)
        comm = H2 @ H1 - H1 @ H2
        G = 0.5 * h * (H1 + H2) - 1j * (math.sqrt(3.0) * h * h / 12.0) * comm
        G = 0.5 * (G + G.conj().T)
    else:
        raise ConfigError(f"unknown integrator {integrator!r}")
    w, Q = np.linalg.eigh(G)
    return Q @ (np.exp(-1j * w) * (Q.conj().T @ psi))


def leak_mass(model, psi, fraction=LEAK_FRACTION):
    top = model.top_indices(fraction)
    return float(np.sum(np.abs(psi[top]) ** 2))


def propagate(H, psi0, t_grid, integrator="magnus4", tol=1e-8, r_list=(0.0, 0.5, 1.0), adaptive=True,
              h0=None, leak_threshold=1e-6, max_steps=10_000_000):
    """Integrate i psi' = H(t) psi on the truncation.

    Parameters
    ----------
    H : object with ``matrix_at(t)`` and ``model``
        Usually a :class:`~nflab.normal_form.DrivenHamiltonian`.
    t_grid : array_like
        Increasing output times; the first is the initial time.
    tol : float
        Local error allowed per unit time (adaptive mode, step doubling).
    h0 : float, optional
        Initial (adaptive) or fixed (non-adaptive) step.
    leak_threshold : float
        Mass allowed in the top 10% of the buffer before the run is marked
        contaminated and stopped.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or np.any(np.diff(t_grid) <= 0):
        raise ConfigError("time grid must be strictly increasing")
    model = H.model
    psi = np.asarray(psi0, dtype=complex).copy()
    n0 = np.linalg.norm(psi)
    if abs(n0 - 1.0) > 1e-12:
        raise ConfigError("initial state must be normalized")
    order = 2 if integrator == "magnus2" else 4
    scale = float(np.abs(np.diag(H.matrix_at(t_grid[0]))).max()) + 1.0
    h = (0.5 / scale if h0 is None else float(h0))
    states = [psi.copy()]
    leaks = [leak_mass(model, psi)]
    t = float(t_grid[0])
    steps = rejected = 0
    status, trip = "ok", None
    for t_next in t_grid[1:]:
        while t < t_next - 1e-14 * max(1.0, abs(t_next)):
            step = min(h, t_next - t)
            if adaptive:
                full = _magnus_step(H, t, step, psi, integrator)
                half = _magnus_step(H, t, 0.5 * step, psi, integrator)
                half = _magnus_step(H, t + 0.5 * step, 0.5 * step, half, integrator)
                err = np.linalg.norm(full - half) / (2**order - 1)
                allowed = tol * step
                if err > allowed and step > 1e-12:
                    rejected += 1
                    h = step * max(0.2, 0.9 * (allowed / err) ** (1.0 / order))
                    continue
                psi = half
                growth = 2.0 if err == 0 else min(2.0, 0.9 * (allowed / err) ** (1.0 / order))
                if step == h:
                    h = step * max(0.5, growth)
            else:
                psi = _magnus_step(H, t, step, psi, integrator)
            t += step
            steps += 1
            if steps > max_steps:
                raise ConfigError("step budget exhausted")
        t = float(t_next)
        states.append(psi.copy())
        leaks.append(leak_mass(model, psi))
        if leaks[-1] > leak_threshold:
            status, trip = "contaminated", t
            break
    states = np.array(states)
    times = t_grid[: len(states)]
    traj = Trajectory(t=times, states=states, norms={}, unitarity_defect=np.abs(np.linalg.norm(states, axis=1) - n0),
                      leak=np.array(leaks), status=status, trip_time=trip, steps=steps, rejected=rejected,
                      model=model)
    for r in r_list:
        traj.norm(r)
    return traj


def conjugate_state(psi, generators, theta, direction="forward"):
    """Apply exp(-iX_1(theta)) ... exp(-iX_N(theta)) (forward) or its inverse."""
    if not generators:
        return np.array(psi, dtype=complex, copy=True)
    if direction not in ("forward", "inverse"):
        raise ConfigError(f"unknown direction {direction!r}")
    U = conjugation_chain(generators, theta, inverse=direction == "inverse")
    return U @ psi


def map_trajectory(traj, generators, omega, r_list=None):
    """Pull a transformed-frame trajectory back to the original frame."""
    omega = np.atleast_1d(omega)
    states = np.array([conjugate_state(s, generators, omega * t, "forward") for t, s in zip(traj.t, traj.states)])
    out = Trajectory(t=traj.t, states=states, norms={}, unitarity_defect=traj.unitarity_defect, leak=traj.leak,
                     status=traj.status, trip_time=traj.trip_time, steps=traj.steps, rejected=traj.rejected,
                     model=traj.model)
    for r in (sorted(traj.norms) if r_list is None else r_list):
        out.norm(r)
    return out


# growth fits ---------------------------------------------------------------------------------

@dataclass
class GrowthFit:
    r: float
    epsilon: float
    window_slopes: list
    windows: list
    constants: list
    residual: float
    envelope_slope: float

    def as_dict(self):
        return {"r": self.r, "epsilon_hat": self.epsilon, "window_slopes": self.window_slopes,
                "windows": self.windows, "C_hat": self.constants, "residual": self.residual,
                "envelope_slope": self.envelope_slope}


def dyadic_windows(t_min, t_max, j_min=3):
    j = max(j_min, int(math.floor(math.log2(max(t_min, 2.0**j_min)) + 1e-12)))
    out = []
    while 2.0 ** (j + 1) <= t_max * (1 + 1e-12):
        if 2.0**j >= t_min * (1 - 1e-12):
            out.append((2.0**j, 2.0 ** (j + 1)))
        j += 1
    return out


def fit_growth(traj_or_t, norms=None, r=None, j_min=3, min_windows=4, t0=None):
    """Growth exponent of ||psi(t)||_r from its running supremum.

    The running sup is fitted against log t by least squares on each dyadic
    window [2^j, 2^(j+1)], j >= j_min; the exponent estimate is the largest
    slope over all windows after the first. Accepts a Trajectory plus ``r``,
    or raw arrays ``(t, norms)``.
    """
    if isinstance(traj_or_t, Trajectory):
        if traj_or_t.contaminated:
            raise ContaminationError(f"trajectory leaked into the buffer at t={traj_or_t.trip_time}")
        if r is None:
            raise ConfigError("r is required with a trajectory")
        t = traj_or_t.t
        y = traj_or_t.norm(r)
    else:
        t = np.asarray(traj_or_t, dtype=float)
        y = np.asarray(norms, dtype=float)
    t0 = float(t[0]) if t0 is None else t0
    shifted = t - t0
    env = np.maximum.accumulate(y)
    wins = dyadic_windows(max(shifted[shifted > 0].min(), 1e-300), shifted.max(), j_min)
    if len(wins) < min_windows:
        raise ConfigError(f"only {len(wins)} dyadic windows available, need {min_windows}")
    slopes, consts, resid = [], [], []
    for lo, hi in wins:
        sel = (shifted >= lo * (1 - 1e-12)) & (shifted <= hi * (1 + 1e-12))
        if sel.sum() < 3:
            raise ConfigError(f"window [{lo:g}, {hi:g}] holds fewer than 3 samples")
        x, z = np.log(shifted[sel]), np.log(env[sel])
        coef, res, *_ = np.polyfit(x, z, 1, full=True)
        slopes.append(float(coef[0]))
        resid.append(float(np.sqrt(res[0] / sel.sum())) if len(res) else 0.0)
    eps = max(slopes[1:])
    for lo, hi in wins:
        sel = (shifted >= lo) & (shifted <= hi)
        consts.append(float(np.max(y[sel] / (1.0 + shifted[sel] ** 2) ** (eps / 2)) / max(y[0], 1e-300)))
    sel = shifted >= wins[0][0]
    env_slope = float(np.polyfit(np.log(shifted[sel]), np.log(env[sel]), 1)[0])
    return GrowthFit(r=float(r) if r is not None else float("nan"), epsilon=float(eps), window_slopes=slopes,
                     windows=[list(w) for w in wins], constants=consts, residual=float(np.sqrt(np.mean(np.square(resid)))),
                     envelope_slope=env_slope)


# boundedness criterion ---------------------------------------------------------------------

@dataclass
class MaroReport:
    r: float
    n_grid: list
    table: dict
    slopes: dict
    largest_bounded: float | None
    predicted_exponent: float | None
    sizes: list

    def as_dict(self):
        return {"r": self.r, "largest_bounded": self.largest_bounded,
                "predicted_exponent": self.predicted_exponent, "sizes": self.sizes,
                "table": {str(k): v for k, v in self.table.items()},
                "slopes": {str(k): v for k, v in self.slopes.items()}}


def _commutator_norms(H, n_prime, r, L, floor, block):
    model = H.model
    lam = model.k0_eigs
    idx = model.report if block is None else block
    lam_b = lam[idx]
    gap = lam[:, None] - lam[None, :]
    grid = np.stack(np.meshgrid(*([2 * np.pi * np.arange(L) / L] * H.P.n), indexing="ij"), -1).reshape(-1, H.P.n)
    best = 0.0
    for theta in grid:
        C = H.matrix(theta) * gap  # [H, K0]_ab = H_ab (lambda_b - lambda_a), sign irrelevant for norms
        sub = C[np.ix_(idx, idx)]
        sub = np.where(np.abs(sub) > floor, sub, 0.0)
        if not np.any(sub):
            continue
        W = (lam_b**r)[:, None] * sub * (lam_b ** (n_prime - r))[None, :]
        best = max(best, float(np.linalg.norm(W, 2)))
    return best, float(lam_b.max())


def maro_check(H, n_grid, sizes, r=1.0, L=8, tol=0.1, floor=1e-10):
    """Largest N' with sup_theta ||[H(theta), K0] K0^N'||_{L(H^r)} bounded across truncations.

    ``H`` is a DrivenHamiltonian probed on nested report blocks of the given
    sizes, or a callable size -> DrivenHamiltonian. Boundedness uses the same
    log-log growth criterion as :func:`nflab.algebra.order_scan`. The implied
    growth exponent is r / (1 + N').
    """
    from .algebra import growth_slope

    n_grid = sorted(float(v) for v in n_grid)
    if callable(H) and not hasattr(H, "matrix_at"):
        items = [(H(s), None) for s in sizes]
    else:
        lam = H.model.k0_eigs
        order = H.model.report[np.argsort(lam[H.model.report], kind="stable")]
        items = [(H, np.sort(order[:s])) for s in sizes]
    table, slopes = {}, {}
    largest = None
    for npr in n_grid:
        vals, lmax = zip(*[_commutator_norms(h, npr, r, L, floor, blk) for h, blk in items])
        table[npr] = list(vals)
        slopes[npr] = growth_slope(vals, lmax)
        if slopes[npr] <= tol:
            largest = npr
    pred = None if largest is None else r / (1.0 + largest) if largest > -1 else math.inf
    return MaroReport(r=float(r), n_grid=n_grid, table=table, slopes=slopes, largest_bounded=largest,
                      predicted_exponent=pred, sizes=list(sizes))


# closed-form driven oscillator ---------------------------------------------------------------

def coherent_amplitude(t, nu, f, omega):
    """alpha(t) for i alpha' = 2 nu alpha + (f / sqrt2) cos(omega t), alpha(0) = 0.

    This is the exact coherent-state amplitude for H = nu K + f cos(omega t) x
    with K = 2N + 1 and x = (a + a^+)/sqrt2, started in the ground state.
    """
    t = np.asarray(t, dtype=float)
    w0 = 2.0 * nu
    c = f / math.sqrt(2.0)
    # alpha = -i c int_0^t e^{-i w0 (t-s)} cos(omega s) ds
    def part(w):
        # int_0^t e^{-i w0 (t-s)} e^{i w s} ds
        d = w + w0
        if abs(d) < 1e-14:
            return t * np.exp(-1j * w0 * t)
        return np.exp(-1j * w0 * t) * (np.exp(1j * d * t) - 1.0) / (1j * d)

    return -1j * c * 0.5 * (part(omega) + part(-omega))


def coherent_norms(t, nu, f, omega, r_list=(0.5, 1.0), n_max=None):
    """||K^r psi(t)|| for the driven oscillator, from the Poisson law of N."""
    from scipy import stats

    alpha = coherent_amplitude(t, nu, f, omega)
    nbar = np.abs(alpha) ** 2
    out = {}
    for r in r_list:
        vals = np.empty_like(nbar)
        for i, m in enumerate(nbar):
            hi = int(m + 12.0 * math.sqrt(m + 1.0) + 20) if n_max is None else n_max
            n = np.arange(hi + 1)
            p = stats.poisson.pmf(n, m) if m > 0 else (n == 0).astype(float)
            vals[i] = math.sqrt(float(np.sum(p * (2.0 * n + 1.0) ** (2.0 * r))))
        out[float(r)] = vals
    return out, alpha


def coherent_state(model, alpha, mode=0):
    """Coherent state with amplitude alpha in a 1-D harmonic model."""
    from scipy.special import gammaln

    n = np.rint((model.k_eigs[:, mode] - 1.0) / 2.0).astype(int)
    logamp = n * np.log(abs(alpha) + 1e-300) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    return np.exp(logamp) * np.exp(1j * n * np.angle(alpha)) if alpha != 0 else (n == 0).astype(complex)
