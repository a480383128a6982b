"""Walk through two normal-form steps on the driven oscillator.

H(t) = K/2 + cos(sqrt2 t) x. Each step solves the quasiperiodic homological
equation, conjugates, and measures the order of what is left.
"""
import numpy as np

from nflab.algebra import order_scan
from nflab.instances import standard_harmonic
from nflab.normal_form import iterate

model, H0, V, freq = standard_harmonic(report=48)
print(f"buffer {model.buffer_dim} levels, report block {model.report_dim}")
print(f"drive omega = {V.omega[0]:.6f}, reduced frequency nu~ = {freq.nu_tilde[0]}")

before = order_scan(V, [12, 24, 48]).order
print(f"order of the drive: {before}")

res = iterate(H0, V, 2, "order_one", freq, scan_sizes=[12, 24, 48])
print(f"gain per step delta_* = {res.delta}")
for s in res.steps:
    print(f"step {s['step']}: min divisor {s['min_divisor']:.4f}, estimated remainder order "
          f"{s['order_estimate']}, max entry {s['remainder_max']:.2e}")

K0 = np.diag(model.k0_eigs)
Z = res.Z.evaluate(0.7)
print(f"resonant part commutes with K0: {np.abs(Z @ K0 - K0 @ Z).max():.1e}")
print(f"resonant part is time independent: {res.Z.k_max == 0}")
