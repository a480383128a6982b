"""Sobolev norm growth: resonant versus Diophantine drive frequency.

The resonant run uses the closed-form coherent state. The Diophantine run is
integrated in the transformed frame and mapped back.
"""
import numpy as np

from nflab.instances import ground_state, standard_harmonic
from nflab.normal_form import iterate
from nflab.propagator import (coherent_norms, conjugate_state, fit_growth, map_trajectory, propagate)

t = np.arange(0.0, 512.0 + 1e-9, 0.25)

norms, _ = coherent_norms(t, 0.5, 1.0, 1.0, r_list=(0.5, 1.0))
for r in (0.5, 1.0):
    print(f"resonant   r={r}: eps_hat = {fit_growth(t, norms[r], r=r).epsilon:.3f}")

model, H0, V, freq = standard_harmonic(report=48)
res = iterate(H0, V, 2, "order_one", freq)
phi0 = conjugate_state(ground_state(model), res.generators, 0.0, "inverse")
tr = map_trajectory(propagate(res.hamiltonian(), phi0, t), res.generators, V.omega)
for r in (0.5, 1.0):
    print(f"Diophantine r={r}: eps_hat = {fit_growth(tr, r=r).epsilon:.2e}, "
          f"max norm {tr.norm(r).max():.3f}")
