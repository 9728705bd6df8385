"""
Gain margins
============

The feedback stays stabilizing for every gain above gamma*/2, however large.
The spectral abscissa of the truncated closed loop and the fitted decay rate
of V are tabulated over a logarithmic range of gains.  Gains below gamma*/2
are shown for information; nothing is claimed there.
"""

import numpy as np

from svinvopt import ControllerParams, PhysicalParams, closed_loop_matrix, gamma_star
from svinvopt.functionals import coercivity_margin
from svinvopt.model import spectral_abscissa

phys = PhysicalParams(1.0, 1.0, 0.0)
gs = gamma_star(phys, 1.0, 1.0, 0.1)
print(f"gamma* = {gs:.6f}")
print(" gamma/gamma*   abscissa    A_min")
for f in np.geomspace(0.1, 100, 13):
    ctrl = ControllerParams(f * gs, 1.0, 1.0, 0.1)
    a = spectral_abscissa(closed_loop_matrix(phys, ctrl, 16))
    note = "" if f > 0.5 else "  (informational)"
    print(f"{f:12.3f}  {a:10.4f}  {coercivity_margin(phys, ctrl, 16).A_min: .4f}{note}")

###############################################################################
# Tank without liquid feedback (Q = 0): stable for every gamma > 1.

for g in (1.01, 1.1, 2.0, 10.0, 100.0):
    M = closed_loop_matrix(phys, ControllerParams(g, 1.0, 1.0, 0.0), 4)
    print(f"Q=0, gamma={g:7.2f}: tank eigenvalues {np.round(np.linalg.eigvals(M[:2, :2]), 4)}")
