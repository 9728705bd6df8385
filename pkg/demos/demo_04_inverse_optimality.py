"""
Inverse optimality
==================

Adding a compactly supported signal d(t) to the feedback raises the total
cost by exactly int d^2 / (2 gamma k^3).  The feedback therefore minimizes
the cost among all such inputs.
"""

import numpy as np

from svinvopt import ControllerParams, InputSignal, PhysicalParams, gamma_star, initial_state
from svinvopt.sim import simulate_closed_loop, total_cost_J

phys = PhysicalParams(1.0, 1.0, 0.0)
ctrl = ControllerParams(1.2 * gamma_star(phys, 1.0, 1.0, 0.1), 1.0, 1.0, 0.1)
init = initial_state("mixed", 16, xi0=1.0)
scale = 2 * ctrl.gamma * ctrl.k**3

opt = simulate_closed_loop(phys, ctrl, init, 20.0, 1e-3, "expm")
J_star = total_cost_J(opt)
print(f"J(f*) = {J_star:.12f}   V(0) = {opt.V_series[0]:.12f}")

rng = np.random.default_rng(0x5A17)
signals = [InputSignal.pulse(0.0, 1.0, 1.0)] + [
    InputSignal.random_piecewise(rng, 4, 5.0, grid=1e-3) for _ in range(5)
]
for d in signals:
    J = total_cost_J(simulate_closed_loop(phys, ctrl, init, 20.0, 1e-3, "expm", perturbation=d))
    print(f"excess {J - J_star:.10f}   int d^2/(2 gamma k^3) = {d.energy() / scale:.10f}")
