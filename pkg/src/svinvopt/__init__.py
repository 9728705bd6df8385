"""Inverse-optimal boundary feedback for a tank carrying a viscous liquid.

Spectral truncation of the linearized viscous Saint-Venant model, the
control Lyapunov functional and running cost of the feedback design, exact
and fourth-order time integrators, and numerical checks of the stability
and optimality statements.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ControllerParams,
    InfeasibleParameters,
    PhysicalParams,
    SystemState,
    TankState,
    assumption_A_margin,
    closed_loop_matrix,
    gamma_star,
)
from .presets import PRESETS, initial_state  # noqa: E402
from .sim import (  # noqa: E402
    DivergenceError,
    HorizonTooShort,
    InputSignal,
    Trajectory,
    simulate_closed_loop,
    simulate_open_loop,
    total_cost_J,
)
from .spectral import ModalState, NormBundle, parseval_norms, project_initial  # noqa: E402

__all__ = [
    "__version__",
    "ControllerParams",
    "InfeasibleParameters",
    "PhysicalParams",
    "SystemState",
    "TankState",
    "assumption_A_margin",
    "closed_loop_matrix",
    "gamma_star",
    "PRESETS",
    "initial_state",
    "DivergenceError",
    "HorizonTooShort",
    "InputSignal",
    "Trajectory",
    "simulate_closed_loop",
    "simulate_open_loop",
    "total_cost_J",
    "ModalState",
    "NormBundle",
    "parseval_norms",
    "project_initial",
]
