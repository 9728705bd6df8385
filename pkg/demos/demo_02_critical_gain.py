"""
Feasibility and critical gain
=============================

The liquid weight Q is bounded by a feasibility condition; below it the
critical gain gamma* is finite and the running cost is coercive for every
gain above gamma*.  The coercivity margin A_min is computed for growing
truncation orders.
"""

import numpy as np

from svinvopt import ControllerParams, PhysicalParams, assumption_A_margin, gamma_star
from svinvopt.functionals import coercivity_margin, lemma2_margin

phys = PhysicalParams(sigma=1.0, mu=1.0, kappa=0.3)
r, k = 1.0, 1.0

###############################################################################
# gamma* grows without bound as Q approaches the feasibility limit.

q_max = assumption_A_margin(phys, r, k, 0.0) / k**3
print(f"largest feasible Q: {q_max:.6f}")
for frac in (0.0, 0.25, 0.5, 0.75, 0.95):
    Q = frac * q_max
    print(f"Q = {Q:.4f}  gamma* = {gamma_star(phys, r, k, Q):.6f}")

###############################################################################
# A_min for gamma = 1.5 gamma*: positive and non-increasing in m.

Q = 0.1
ctrl = ControllerParams(1.5 * gamma_star(phys, r, k, Q), r, k, Q)
for m in (0, 1, 2, 4, 8, 16, 32):
    print(f"m = {m:2d}  A_min = {coercivity_margin(phys, ctrl, m).A_min:.6f}")

###############################################################################
# Adding P^2/(2 gamma k^3) to the cost is the same as doubling the gain, so
# the margin stays positive down to gamma*/2.

for f in (0.51, 0.75, 1.0):
    c = ctrl.with_gamma(f * gamma_star(phys, r, k, Q))
    print(f"gamma/gamma* = {f:.2f}  A_min = {coercivity_margin(phys, c, 16).A_min: .5f}  "
          f"with P^2 term = {lemma2_margin(phys, c, 16):.5f}")

print("witness of A_min (m=4):", np.round(coercivity_margin(phys, ctrl, 4).witness, 4))
