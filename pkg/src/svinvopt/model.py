"""Parameters, feasibility tests and the truncated tank-liquid dynamics.

The truncated state vector is ordered ``x = (xi, w, a_1..a_m, adot_1..adot_m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import ModalState, beta, wavenumbers

__all__ = [
    "InfeasibleParameters",
    "PhysicalParams",
    "ControllerParams",
    "TankState",
    "SystemState",
    "feasibility_bracket",
    "assumption_A_margin",
    "gamma_star",
    "closed_loop_matrix",
    "open_loop_matrix",
    "input_vector",
    "mode_step_exact",
    "spectral_abscissa",
]


class InfeasibleParameters(ValueError):
    """Raised when the design constants violate assumption (A)."""


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless fluid constants: surface tension, viscosity, wall friction."""

    sigma: float = 1.0
    mu: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class ControllerParams:
    """Design gains of the feedback law and of the cost.

    ``Q = 0`` is admitted for the tank-only (no liquid) case.
    """

    gamma: float
    r: float = 1.0
    k: float = 1.0
    Q: float = 0.1

    def __post_init__(self):
        for name in ("gamma", "r", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.Q >= 0:
            raise ValueError(f"Q must be >= 0, got {self.Q}")

    def with_gamma(self, gamma: float) -> "ControllerParams":
        return ControllerParams(gamma=gamma, r=self.r, k=self.k, Q=self.Q)


@dataclass(frozen=True)
class TankState:
    xi: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.xi) and math.isfinite(self.w)):
            raise ValueError("tank state must be finite")


@dataclass(frozen=True)
class SystemState:
    tank: TankState = field(default_factory=TankState)
    modal: ModalState = None

    def __post_init__(self):
        if self.modal is None:
            raise ValueError("modal state is required")

    @property
    def m(self) -> int:
        return self.modal.m

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.tank.xi, self.tank.w], self.modal.a, self.modal.adot])

    @classmethod
    def from_vector(cls, x, m: int | None = None) -> "SystemState":
        x = np.asarray(x, dtype=float)
        if m is None:
            m = (x.size - 2) // 2
        if x.size != 2 * m + 2:
            raise ValueError(f"state vector of length {x.size} does not match m={m}")
        return cls(TankState(float(x[0]), float(x[1])), ModalState(x[2 : 2 + m], x[2 + m :]))

    @classmethod
    def zeros(cls, m: int) -> "SystemState":
        return cls(TankState(), ModalState.zeros(m))


def feasibility_bracket(phys: PhysicalParams, r: float) -> float:
    """Bracketed factor shared by assumption (A) and the critical gain."""
    s, mu, kap = phys.sigma, phys.mu, phys.kappa
    pi2 = math.pi**2
    return (1.0 + kap / (math.pi * mu * math.sqrt(3.0))) ** 2 + (r + 1.0) ** 2 * (
        1.0 + s * pi2
    ) / (r * mu * (kap + mu * pi2))


def assumption_A_margin(phys: PhysicalParams, r: float, k: float, Q: float) -> float:
    """Right-hand side of assumption (A) minus ``k**3 Q``; positive iff feasible."""
    if not (r > 0 and k > 0 and Q >= 0):
        raise ValueError("need r > 0, k > 0, Q >= 0")
    rhs = (1.0 + phys.sigma * math.pi**2) / (phys.mu * r * feasibility_bracket(phys, r))
    return rhs - k**3 * Q


def gamma_star(phys: PhysicalParams, r: float, k: float, Q: float) -> float:
    """Critical gain above which the running cost is coercive.

    Raises
    ------
    InfeasibleParameters
        If assumption (A) fails (the denominator is not positive).
    """
    if not (r > 0 and k > 0 and Q >= 0):
        raise ValueError("need r > 0, k > 0, Q >= 0")
    denom = 1.0 - phys.mu * r * k**3 * Q / (1.0 + phys.sigma * math.pi**2) * feasibility_bracket(
        phys, r
    )
    if not denom > 0:
        raise InfeasibleParameters(
            f"assumption (A) violated: margin={assumption_A_margin(phys, r, k, Q):.6g}"
        )
    return 2.0 / denom


def _mode_coefficients(phys, m):
    k2 = wavenumbers(m) ** 2
    damping = phys.mu * k2 + phys.kappa
    stiffness = (phys.sigma * k2 + 1.0) * k2
    return k2, damping, stiffness


def open_loop_matrix(phys: PhysicalParams, m: int) -> np.ndarray:
    """Generator of the unforced truncated dynamics (dimension 2m+2)."""
    _, damping, stiffness = _mode_coefficients(phys, m)
    A = np.zeros((2 * m + 2, 2 * m + 2))
    A[0, 1] = 1.0
    ia = np.arange(2, 2 + m)
    iad = ia + m
    A[ia, iad] = 1.0
    A[iad, ia] = -stiffness
    A[iad, iad] = -damping
    return A


def input_vector(m: int) -> np.ndarray:
    """Column multiplying the tank acceleration ``f`` in ``xdot = A x + b f``."""
    b = np.zeros(2 * m + 2)
    b[1] = -1.0
    b[2 + m :] = beta(np.arange(1, m + 1))
    return b


def _feedback_row(phys, ctrl, m):
    k2, damping, _ = _mode_coefficients(phys, m)
    bn = beta(np.arange(1, m + 1))
    g, k, r, Q = ctrl.gamma, ctrl.k, ctrl.r, ctrl.Q
    row = np.empty(2 * m + 2)
    row[0] = g * k * k
    row[1] = g * k
    row[2 : 2 + m] = -g * k**3 * r * Q * bn * damping / k2
    row[2 + m :] = -g * k**3 * (r + 1.0) * Q * bn / k2
    return row


def closed_loop_matrix(phys: PhysicalParams, ctrl: ControllerParams, m: int) -> np.ndarray:
    """Generator ``M`` of ``xdot = M x`` under the optimal feedback."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return open_loop_matrix(phys, m) + np.outer(input_vector(m), _feedback_row(phys, ctrl, m))


def spectral_abscissa(M: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(M).real))


def _expm_2x2(damping, stiffness, dt):
    """exp(A dt) for A = [[0, 1], [-stiffness, -damping]], closed form."""
    alpha = -0.5 * damping
    disc = 0.25 * damping**2 - stiffness
    scale = 0.25 * damping**2 + stiffness
    if abs(disc) < 1e-12 * scale:
        # critically damped
        e = math.exp(alpha * dt)
        c, s = e, e * dt
    elif disc > 0:
        d = math.sqrt(disc)
        lo = math.exp((alpha - d) * dt)
        hi = math.exp((alpha + d) * dt)
        c = 0.5 * (hi + lo)
        # sinh(d dt)/d without cancellation for small d dt
        s = lo * math.expm1(2.0 * d * dt) / (2.0 * d)
    else:
        nu = math.sqrt(-disc)
        e = math.exp(alpha * dt)
        c = e * math.cos(nu * dt)
        s = e * math.sin(nu * dt) / nu
    # e^{alpha t} [c I + s (A - alpha I)]
    return np.array(
        [
            [c - alpha * s, s],
            [-stiffness * s, c - (damping + alpha) * s],
        ]
    )


def mode_step_exact(n: int, phys: PhysicalParams, f_const: float, dt: float, state):
    """Advance mode ``n`` by ``dt`` under a constant input, exactly.

    Parameters
    ----------
    n : int
        Mode index (>= 1).
    phys : PhysicalParams
    f_const : float
        Value of the tank acceleration held over the step.
    dt : float
        Step length, > 0.
    state : (float, float)
        ``(a_n, adot_n)`` at the start of the step.

    Returns
    -------
    (float, float)
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    k2 = (n * math.pi) ** 2
    damping = phys.mu * k2 + phys.kappa
    stiffness = (phys.sigma * k2 + 1.0) * k2
    E = _expm_2x2(damping, stiffness, dt)
    # equilibrium of the forced mode; stiffness > 0 always
    a_eq = float(beta(n)) * f_const / stiffness
    dev = np.array([state[0] - a_eq, state[1]])
    out = E @ dev
    return float(out[0] + a_eq), float(out[1])
