"""
Modal representation of the liquid profile
==========================================

The liquid displacement is expanded on the cosine basis sqrt(2) cos(n pi x).
This script projects the preset initial profiles, checks the coefficients of
the ramp x - 1/2 against their closed form, and evaluates the Parseval norms.
"""

import numpy as np

from svinvopt import PhysicalParams, initial_state, parseval_norms
from svinvopt.spectral import ModalState, reconstruct_phi, reconstruct_u

m = 8
phys = PhysicalParams(sigma=1.0, mu=1.0, kappa=0.0)

###############################################################################
# Ramp coefficients: only odd modes are present, a_n = -2 sqrt(2) / (n pi)^2.

ramp = initial_state("ramp", m)
n = np.arange(1, m + 1)
closed_form = np.where(n % 2 == 1, -2 * np.sqrt(2) / (n * np.pi) ** 2, 0.0)
for k, (a, c) in enumerate(zip(ramp.modal.a, closed_form), start=1):
    print(f"a_{k} = {a: .3e}   closed form {c: .3e}")

###############################################################################
# Reconstruction on the default 257-point grid; the truncation error of the
# ramp is largest at the walls where the even extension has a kink.

prof = reconstruct_phi(ramp.modal)
err = np.abs(prof.values - (prof.grid - 0.5))
print(f"max |phi_m - (x - 1/2)| = {err.max():.3e} at x = {prof.grid[err.argmax()]:.3f}")

###############################################################################
# Parseval norms of every preset.  The chain ||phi_x||^2 >= pi^2 ||phi||^2 holds
# for each of them.

for name in ("mode1", "mode3", "ramp", "mixed"):
    nb = parseval_norms(initial_state(name, m).modal, phys)
    print(f"{name:6s} ||phi||^2={nb.phi_L2:.4f}  ||phi_x||^2={nb.phi_x_L2:.4f}  "
          f"||phi_xx||^2={nb.phi_xx_L2:.2f}")

###############################################################################
# The fluid velocity surrogate u = int_0^x phi_t vanishes at both walls.

s = initial_state("mixed", m).modal
moving = ModalState(np.zeros(m), s.a)
u = reconstruct_u(moving)
print(f"u(0) = {u.values[0]:.1e}, u(1) = {u.values[-1]:.1e}")
