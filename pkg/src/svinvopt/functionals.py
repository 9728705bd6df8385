"""Lyapunov functional, running cost, feedback law and modal energies.

Each functional has a direct modal evaluation (``*_value``) and, where it is
quadratic or linear in the state, an assembled matrix/vector acting on the
state vector ``x = (xi, w, a, adot)``.  The two routes are kept separate so
that one can check the other.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .linalg import generalized_eigh_diagonal
from .model import ControllerParams, PhysicalParams, SystemState
from .spectral import ModalState, beta, parseval_norms, wavenumbers

__all__ = [
    "CostWeights",
    "CoercivityResult",
    "W_value",
    "V_value",
    "q_value",
    "bracket_integral",
    "feedback_P",
    "mode_energy",
    "mode_energy_constant",
    "W_matrix",
    "V_matrix",
    "q_matrix",
    "feedback_vector",
    "strong_norm_weights",
    "weak_norm_weights",
    "coercivity_margin",
    "lemma2_margin",
    "lyapunov_upper_constant",
]


@dataclass(frozen=True)
class CostWeights:
    ctrl: ControllerParams
    phys: PhysicalParams


CoercivityResult = namedtuple("CoercivityResult", ["A_min", "witness"])


def _split(state):
    if isinstance(state, SystemState):
        return state.tank.xi, state.tank.w, state.modal
    x = np.asarray(state, dtype=float)
    m = (x.size - 2) // 2
    return x[0], x[1], ModalState(x[2 : 2 + m], x[2 + m :])


def W_value(state: ModalState, r: float, phys: PhysicalParams) -> float:
    """Liquid part of the Lyapunov functional for weight ``r``."""
    nb = parseval_norms(state, phys)
    return (
        0.5 * nb.u_L2
        + 0.5 * (1.0 + r) * nb.phi_L2
        + 0.5 * phys.sigma * (1.0 + r) * nb.phi_x_L2
        + 0.5 * r * nb.composite_L2
    )


def V_value(state, ctrl: ControllerParams, phys: PhysicalParams) -> float:
    xi, w, modal = _split(state)
    k = ctrl.k
    return 0.5 * xi**2 + (w + k * xi) ** 2 / (2.0 * k**2) + ctrl.Q * W_value(modal, ctrl.r, phys)


def bracket_integral(state: ModalState, r: float, phys: PhysicalParams) -> float:
    """``int_0^1 (kappa x phi - (r+1)/r u + mu phi_x) dx`` in modal form."""
    k2 = wavenumbers(state.m) ** 2
    bn = beta(np.arange(1, state.m + 1))
    damping = phys.mu * k2 + phys.kappa
    return float(np.sum(bn * (damping * state.a + (r + 1.0) / r * state.adot) / k2))


def q_value(state, ctrl: ControllerParams, phys: PhysicalParams) -> float:
    """Instantaneous running cost of the inverse-optimal problem."""
    xi, w, modal = _split(state)
    g, r, k, Q = ctrl.gamma, ctrl.r, ctrl.k, ctrl.Q
    s, mu, kap = phys.sigma, phys.mu, phys.kappa
    z = w + k * xi
    out = k * xi**2 + (g - 2.0) / (2.0 * k) * z**2
    if Q == 0.0:
        return out
    nb = parseval_norms(modal, phys)
    L = bracket_integral(modal, r, phys)
    out += Q * kap * nb.u_L2 + Q * mu * nb.u_x_L2
    out += Q * kap * r * nb.phi_L2 + Q * r * (s * kap + mu) * nb.phi_x_L2
    out += Q * mu * s * r * nb.phi_xx_L2
    out += 0.5 * g * k**3 * r**2 * Q**2 * L**2
    out -= g * k * Q * r * z * L
    return out


def feedback_P(state, ctrl: ControllerParams, phys: PhysicalParams) -> float:
    """The inverse-optimal boundary feedback (tank acceleration command)."""
    xi, w, modal = _split(state)
    g, r, k, Q = ctrl.gamma, ctrl.r, ctrl.k, ctrl.Q
    k2 = wavenumbers(modal.m) ** 2
    bn = beta(np.arange(1, modal.m + 1))
    damping = phys.mu * k2 + phys.kappa
    return (
        g * k * (w + k * xi)
        - g * k**3 * r * Q * np.sum(bn * damping * modal.a / k2)
        - g * k**3 * (r + 1.0) * Q * np.sum(bn * modal.adot / k2)
    )


def mode_energy_constant(phys: PhysicalParams) -> float:
    return (phys.mu + phys.kappa) ** 2 / phys.sigma + 1.5


def mode_energy(n: int, state, phys: PhysicalParams) -> float:
    """Energy of mode ``n`` used in the strong-norm decay argument."""
    modal = state.modal if isinstance(state, SystemState) else state
    if not 1 <= n <= modal.m:
        raise ValueError(f"mode {n} outside 1..{modal.m}")
    kn = n * np.pi
    b = modal.a[n - 1]
    c = modal.adot[n - 1] / kn
    damping = phys.mu * kn**2 + phys.kappa
    return float(
        0.5 * kn**2 * c**2
        + kn**2 * (1.0 + phys.sigma * kn**2) * b**2
        + 0.5 * kn**2 * (c + damping / kn * b) ** 2
    )


# --- assembled forms -------------------------------------------------------


def W_matrix(phys: PhysicalParams, r: float, m: int) -> np.ndarray:
    """Symmetric matrix of ``W`` on the modal vector ``(a, adot)``."""
    k2 = wavenumbers(m) ** 2
    lam = phys.mu * k2 + phys.kappa
    Wm = np.zeros((2 * m, 2 * m))
    ia = np.arange(m)
    iad = ia + m
    Wm[ia, ia] = 0.5 * (1.0 + r) * (1.0 + phys.sigma * k2) + 0.5 * r * lam**2 / k2
    Wm[iad, iad] = 0.5 * (1.0 + r) / k2
    Wm[ia, iad] = Wm[iad, ia] = 0.5 * r * lam / k2
    return Wm


def V_matrix(phys: PhysicalParams, ctrl: ControllerParams, m: int) -> np.ndarray:
    k = ctrl.k
    e = np.array([k, 1.0])
    QV = np.zeros((2 * m + 2, 2 * m + 2))
    QV[0, 0] = 0.5
    QV[:2, :2] += np.outer(e, e) / (2.0 * k**2)
    QV[2:, 2:] = ctrl.Q * W_matrix(phys, ctrl.r, m)
    return QV


def _bracket_vector(phys, r, m):
    k2 = wavenumbers(m) ** 2
    bn = beta(np.arange(1, m + 1))
    ell = np.zeros(2 * m + 2)
    ell[2 : 2 + m] = bn * (phys.mu * k2 + phys.kappa) / k2
    ell[2 + m :] = (r + 1.0) / r * bn / k2
    return ell


def feedback_vector(phys: PhysicalParams, ctrl: ControllerParams, m: int) -> np.ndarray:
    """Row ``p`` with ``feedback_P(x) = p @ x``."""
    k = ctrl.k
    p = -ctrl.gamma * k**3 * ctrl.r * ctrl.Q * _bracket_vector(phys, ctrl.r, m)
    p[0] += ctrl.gamma * k * k
    p[1] += ctrl.gamma * k
    return p


def q_matrix(phys: PhysicalParams, ctrl: ControllerParams, m: int) -> np.ndarray:
    """Symmetric matrix ``Q_q`` with ``q(x) = x @ Q_q @ x``; ``m = 0`` is tank only."""
    g, r, k, Q = ctrl.gamma, ctrl.r, ctrl.k, ctrl.Q
    s, mu, kap = phys.sigma, phys.mu, phys.kappa
    dim = 2 * m + 2
    e = np.zeros(dim)
    e[0], e[1] = k, 1.0
    Qq = np.zeros((dim, dim))
    Qq[0, 0] = k
    Qq += (g - 2.0) / (2.0 * k) * np.outer(e, e)
    if m == 0:
        return Qq
    k2 = wavenumbers(m) ** 2
    ia = np.arange(2, 2 + m)
    iad = ia + m
    Qq[ia, ia] += Q * r * (kap + (s * kap + mu) * k2 + mu * s * k2**2)
    Qq[iad, iad] += Q * (kap / k2 + mu)
    ell = _bracket_vector(phys, r, m)
    Qq += 0.5 * g * k**3 * r**2 * Q**2 * np.outer(ell, ell)
    Qq -= 0.5 * g * k * Q * r * (np.outer(e, ell) + np.outer(ell, e))
    return Qq


def strong_norm_weights(m: int) -> np.ndarray:
    """Diagonal of ``xi^2 + w^2 + ||u||_{H^1}^2 + ||phi||_{H^2}^2``."""
    k2 = wavenumbers(m) ** 2
    return np.concatenate([[1.0, 1.0], 1.0 + k2 + k2**2, 1.0 / k2 + 1.0])


def weak_norm_weights(m: int) -> np.ndarray:
    """Diagonal of ``xi^2 + w^2 + ||u||_2^2 + ||phi||_{H^1}^2``."""
    k2 = wavenumbers(m) ** 2
    return np.concatenate([[1.0, 1.0], 1.0 + k2, 1.0 / k2])


def _min_pencil(A, d):
    w, U = generalized_eigh_diagonal(A, d)
    return CoercivityResult(float(w[0]), U[:, 0])


def coercivity_margin(phys: PhysicalParams, ctrl: ControllerParams, m: int) -> CoercivityResult:
    """Smallest ``A`` with ``q(x) >= A * strong_norm(x)`` on the truncated space.

    Returns
    -------
    CoercivityResult
        ``A_min`` and a minimizing state vector normalized to unit strong norm.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    return _min_pencil(q_matrix(phys, ctrl, m), strong_norm_weights(m) if m else np.ones(2))


def lemma2_margin(phys: PhysicalParams, ctrl: ControllerParams, m: int) -> float:
    """Smallest generalized eigenvalue of ``q + P^2/(2 gamma k^3)`` over the strong norm."""
    if m < 0:
        raise ValueError("m must be >= 0")
    p = feedback_vector(phys, ctrl, m) if m else feedback_vector(phys, ctrl, 1)[:2]
    A = q_matrix(phys, ctrl, m) + np.outer(p, p) / (2.0 * ctrl.gamma * ctrl.k**3)
    return _min_pencil(A, strong_norm_weights(m) if m else np.ones(2)).A_min


def lyapunov_upper_constant(phys: PhysicalParams, ctrl: ControllerParams, m: int) -> float:
    """Largest ``V(x) / weak_norm(x)`` over the truncated space."""
    w, _ = generalized_eigh_diagonal(V_matrix(phys, ctrl, m), weak_norm_weights(m))
    return float(w[-1])
