"""
Galerkin convergence
====================

Terminal states for truncation orders m and 2m are compared on the common
modes.  For smooth data the difference shrinks quickly as m doubles.  This is
an observation about the truncation, reported and not asserted.
"""

import numpy as np

from svinvopt import ControllerParams, PhysicalParams, gamma_star, initial_state, simulate_closed_loop
from svinvopt.functionals import weak_norm_weights

phys = PhysicalParams(1.0, 1.0, 0.0)
ctrl = ControllerParams(1.5 * gamma_star(phys, 1.0, 1.0, 0.1), 1.0, 1.0, 0.1)
T = 0.5


def terminal(m, preset):
    return simulate_closed_loop(phys, ctrl, initial_state(preset, m, xi0=1.0), T, 1e-3, "expm").states[-1]


def gap(small, large, m):
    # pad the smaller state with zero modes and measure in the weak norm of 2m modes
    pad = np.zeros_like(large)
    pad[:2] = small[:2]
    pad[2 : 2 + m] = small[2 : 2 + m]
    pad[2 + 2 * m : 2 + 3 * m] = small[2 + m :]
    d = large - pad
    return float(np.sqrt(d**2 @ weak_norm_weights(2 * m)))


for preset in ("mode1", "ramp"):
    prev = None
    for m in (4, 8, 16, 32):
        g = gap(terminal(m, preset), terminal(2 * m, preset), m)
        ratio = "" if prev is None else f"  reduction x{prev / g:.1f}"
        print(f"{preset:5s} m={m:2d} vs {2 * m:2d}: {g:.3e}{ratio}")
        prev = g
