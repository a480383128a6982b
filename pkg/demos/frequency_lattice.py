"""Exact frequency arithmetic: resonance lattices and Diophantine scans."""
from nflab.arithmetic import diophantine_scan, frequency_system

for nu in ([1, 1, 1], [1, 2], ["1", "sqrt2"], ["1", "sqrt2", "1+sqrt2"]):
    f = frequency_system(nu)
    print(f"nu={nu}: lattice {f.lattice}, nu~={f.nu_tilde.tolist()}, v={f.v}, "
          f"reconstruction exact: {f.reconstruction_holds()}")

f = frequency_system(["1"], ["sqrt2"])
for kappa in (1.0, 2.0, 3.0):
    rec = diophantine_scan(f, kappa, 60)
    print(f"omega=sqrt2, kappa={kappa}: gamma_hat={rec.gamma_hat:.4f}, offender (k, l)={rec.offender}")
