"""Superlinear regime on a Zoll-type model (H0 = K0^2, drive of order 1.5)."""
from nflab.instances import zoll_instance
from nflab.normal_form import iterate

model, H0, V, freq = zoll_instance(rho=1.5, cutoff=32)
res = iterate(H0, V, 3, "superlinear", scan_sizes=[8, 16, 32])
print(f"mu = {model.mu}, rho = {res.rho}, delta = {res.delta}")
for s, X in zip(res.steps, res.generators):
    print(f"step {s['step']}: generator order {X.order}, remainder nominal {s['nominal_order']}, "
          f"estimated {s['order_estimate']}")
print(f"status: {res.status}")
