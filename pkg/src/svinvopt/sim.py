"""Time integration of the truncated open- and closed-loop systems.

Both integrators work on the augmented linear system ``y = (x, d)`` where
``d`` is the piecewise-constant input (open loop) or the additive
perturbation on top of the feedback (closed loop), held fixed by a zero row
in the generator.  Because every running cost is a quadratic form in ``y``,
one step of either scheme is a pair of matrices: the state map ``E`` and a
symmetric ``G`` with ``cost increment = y @ G @ y``.  For RK4 these are the
exact images of the classical four-stage scheme applied to the cost-augmented
ODE; for ``expm`` they are the matrix exponential and the Van Loan integral
of the quadratic form along the exact flow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import functionals as fn
from .model import (
    ControllerParams,
    PhysicalParams,
    SystemState,
    assumption_A_margin,
    closed_loop_matrix,
    gamma_star,
    input_vector,
    mode_step_exact,
    open_loop_matrix,
)
from .spectral import beta, wavenumbers

__all__ = [
    "DivergenceError",
    "HorizonTooShort",
    "InputSignal",
    "Trajectory",
    "simulate_open_loop",
    "simulate_closed_loop",
    "total_cost_J",
    "step_matrices",
]

DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 20.0
TAIL_TOL = 1e-10
DIVERGENCE_FACTOR = 1e12


class DivergenceError(RuntimeError):
    pass


class HorizonTooShort(ValueError):
    def __init__(self, ratio):
        super().__init__(f"horizon too short: V(T)/V(0) = {ratio:.3e}")
        self.ratio = ratio


@dataclass(frozen=True)
class InputSignal:
    """Piecewise-constant signal, right-continuous.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``.  With one
    value fewer than breakpoints the signal is zero after the last
    breakpoint; with equal lengths the final value extends indefinitely.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        if bp.size == 0 or bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.size not in (bp.size, bp.size - 1):
            raise ValueError("need len(values) == len(breakpoints) or len(breakpoints) - 1")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise ValueError("signal must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float) -> "InputSignal":
        return cls([0.0], [value])

    @classmethod
    def zero(cls) -> "InputSignal":
        return cls.constant(0.0)

    @classmethod
    def pulse(cls, t0: float, t1: float, amplitude: float) -> "InputSignal":
        if t0 == 0.0:
            return cls([0.0, t1], [amplitude])
        return cls([0.0, t0, t1], [0.0, amplitude])

    @classmethod
    def random_piecewise(cls, rng, n_segments, t_end, scale=1.0, compact=True, grid=None):
        """Random segments on ``[0, t_end]``; breakpoints snap to ``grid`` if given."""
        inner = np.sort(rng.uniform(0.0, t_end, size=n_segments - 1))
        if grid is not None:
            inner = np.round(inner / grid) * grid
        bp = np.unique(np.concatenate([[0.0], inner, [t_end]]))
        vals = scale * rng.standard_normal(bp.size - 1)
        if not compact:
            bp = bp[:-1]
        return cls(bp, vals)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        padded = self.values
        if self.values.size == self.breakpoints.size - 1:
            padded = np.append(self.values, 0.0)
        out = padded[np.clip(idx, 0, padded.size - 1)]
        return float(out) if out.ndim == 0 else out

    def energy(self, T: float | None = None) -> float:
        """``int_0^T value(t)^2 dt`` (whole support when ``T`` is None)."""
        bp = self.breakpoints
        if self.values.size == bp.size:
            if T is None:
                raise ValueError("signal is not compactly supported; give T")
            bp = np.append(bp, max(T, bp[-1]))
        ends = bp[1:] if T is None else np.minimum(bp[1:], T)
        lengths = np.clip(ends - bp[:-1], 0.0, None)
        return float(np.sum(self.values**2 * lengths))


@dataclass
class Trajectory:
    """Sampled run of the truncated system.

    ``states`` is an (N, 2m+2) array of state vectors; running integrals are
    sampled at the same times.  Cost fields are ``None`` when no controller
    parameters were supplied.
    """

    times: np.ndarray
    states: np.ndarray
    f_values: np.ndarray
    cost_q_integral: np.ndarray | None
    cost_f_integral: np.ndarray | None
    V_series: np.ndarray | None
    phys: PhysicalParams
    ctrl: ControllerParams | None = None
    cost_dev_integral: np.ndarray | None = None
    energy_integrals: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return (self.states.shape[1] - 2) // 2

    def __len__(self):
        return self.times.size

    def state(self, i: int) -> SystemState:
        return SystemState.from_vector(self.states[i], self.m)


# --- step matrices ---------------------------------------------------------


def _rk4_matrices(A, forms, h):
    n = A.shape[0]
    I = np.eye(n)
    S2 = I + 0.5 * h * A
    S3 = I + 0.5 * h * A @ S2
    S4 = I + h * A @ S3
    E = I + h / 6.0 * A @ (I + 2.0 * S2 + 2.0 * S3 + S4)
    G = [
        h / 6.0 * (F + 2.0 * S2.T @ F @ S2 + 2.0 * S3.T @ F @ S3 + S4.T @ F @ S4) for F in forms
    ]
    return E, G


def _van_loan(A, F, h):
    n = A.shape[0]
    C = np.zeros((2 * n, 2 * n))
    C[:n, :n] = -A.T
    C[:n, n:] = F
    C[n:, n:] = A
    X = expm(C * h)
    G = X[n:, n:].T @ X[:n, n:]
    return 0.5 * (G + G.T)


def _expm_matrices(A, forms, h):
    return expm(A * h), [_van_loan(A, F, h) for F in forms]


def step_matrices(A, forms, h, method):
    """State map and cost matrices for one step of length ``h``."""
    if method == "rk4":
        return _rk4_matrices(A, forms, h)
    if method == "expm":
        return _expm_matrices(A, forms, h)
    raise ValueError(f"unknown method {method!r}; expected 'rk4' or 'expm'")


def _time_grid(T, dt, extra=()):
    n = int(math.ceil(T / dt - 1e-9))
    grid = np.minimum(np.arange(n + 1) * dt, T)
    grid[-1] = T
    pts = [p for p in extra if 0.0 < p < T]
    if pts:
        grid = np.union1d(grid, pts)
        # drop slivers created by floating-point breakpoints
        keep = np.concatenate([[True], np.diff(grid) > 1e-12 * max(1.0, T)])
        grid = grid[keep]
        grid[-1] = T
    return grid


def _run_linear(A, forms, y0, grid, d_of_t, method, x_dim):
    """March ``y' = A y`` over ``grid`` resetting the last entry from ``d_of_t``."""
    cache = {}
    N = grid.size
    Y = np.empty((N, y0.size))
    C = np.zeros((N, len(forms)))
    y = y0.copy()
    y[-1] = d_of_t(grid[0])
    Y[0] = y
    x0norm = np.linalg.norm(y0[:x_dim])
    limit = DIVERGENCE_FACTOR * x0norm
    acc = np.zeros(len(forms))
    for i in range(N - 1):
        h = grid[i + 1] - grid[i]
        key = round(h, 14)
        if key not in cache:
            cache[key] = step_matrices(A, forms, h, method)
        E, G = cache[key]
        for j, Gj in enumerate(G):
            acc[j] += y @ Gj @ y
        y = E @ y
        y[-1] = d_of_t(grid[i + 1])
        if not np.all(np.isfinite(y)) or (x0norm > 0 and np.linalg.norm(y[:x_dim]) > limit):
            raise DivergenceError(f"state blew up at t={grid[i + 1]:.6g}")
        Y[i + 1] = y
        C[i + 1] = acc
    return Y, C


def _augment(A, b):
    n = A.shape[0]
    At = np.zeros((n + 1, n + 1))
    At[:n, :n] = A
    At[:n, n] = b
    return At


def _pad(F):
    n = F.shape[0]
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = F
    return out


def _init_vector(init):
    if isinstance(init, SystemState):
        return init.as_vector()
    return np.asarray(init, dtype=float)


def _V_series(X, phys, ctrl, m):
    QV = fn.V_matrix(phys, ctrl, m)
    return np.einsum("ij,jk,ik->i", X, QV, X)


# --- closed loop -----------------------------------------------------------


def simulate_closed_loop(
    phys: PhysicalParams,
    ctrl: ControllerParams,
    init,
    T: float = DEFAULT_HORIZON,
    dt: float = DEFAULT_DT,
    method: str = "rk4",
    perturbation: InputSignal | None = None,
    feedback_sign: float = 1.0,
) -> Trajectory:
    """Integrate the truncated system under ``f = P(x) + perturbation(t)``.

    Parameters
    ----------
    phys, ctrl : parameter sets
    init : SystemState or array of length 2m+2
    T : float
        Horizon.
    dt : float
        Step size; perturbation breakpoints are added to the grid.
    method : {'rk4', 'expm'}
    perturbation : InputSignal, optional
        Additive signal on top of the feedback.
    feedback_sign : float
        Multiplies the feedback; only used to build negative controls.

    Returns
    -------
    Trajectory
        Every grid point is stored.  ``cost_dev_integral`` holds
        ``int (f - P)^2 / (2 gamma k^3)``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if not T > 0:
        raise ValueError("T must be > 0")
    x0 = _init_vector(init)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    m = (x0.size - 2) // 2
    if ctrl.Q > 0:
        if assumption_A_margin(phys, ctrl.r, ctrl.k, ctrl.Q) <= 0:
            warnings.warn("assumption (A) violated; no stability guarantee", stacklevel=2)
        elif ctrl.gamma <= 0.5 * gamma_star(phys, ctrl.r, ctrl.k, ctrl.Q):
            warnings.warn("gamma <= gamma*/2; no stability guarantee", stacklevel=2)

    b = input_vector(m)
    p = fn.feedback_vector(phys, ctrl, m)
    if feedback_sign == 1.0:
        M = closed_loop_matrix(phys, ctrl, m)
    else:
        M = open_loop_matrix(phys, m) + feedback_sign * np.outer(b, p)
    A = _augment(M, b)
    two_gk3 = 2.0 * ctrl.gamma * ctrl.k**3
    ptil = np.append(feedback_sign * p, 1.0)
    e_d = np.zeros(x0.size + 1)
    e_d[-1] = 1.0
    forms = [
        _pad(fn.q_matrix(phys, ctrl, m)),
        np.outer(ptil, ptil) / two_gk3,
        np.outer(e_d, e_d) / two_gk3,
    ]
    delta = perturbation if perturbation is not None else InputSignal.zero()
    extra = delta.breakpoints if perturbation is not None else ()
    grid = _time_grid(T, dt, extra)
    y0 = np.append(x0, 0.0)
    Y, C = _run_linear(A, forms, y0, grid, delta, method, x0.size)
    X = Y[:, :-1]
    return Trajectory(
        times=grid,
        states=X,
        f_values=Y @ ptil,
        cost_q_integral=C[:, 0],
        cost_f_integral=C[:, 1],
        V_series=_V_series(X, phys, ctrl, m),
        phys=phys,
        ctrl=ctrl,
        cost_dev_integral=C[:, 2],
        info={"method": method, "dt": dt, "T": T, "m": m, "loop": "closed"},
    )


# --- open loop -------------------------------------------------------------


def _energy_forms(phys, m):
    """Quadratic forms on (xi, w, a, adot, f) for the open-loop energy balance."""
    k2 = wavenumbers(m) ** 2
    lam = phys.mu * k2 + phys.kappa
    bn = beta(np.arange(1, m + 1))
    n = 2 * m + 3
    ia = np.arange(2, 2 + m)
    iad = ia + m
    D0 = np.zeros((n, n))
    D0[iad, iad] = lam / k2
    D1 = np.zeros((n, n))
    D1[ia, ia] = (1.0 + phys.sigma * k2) * lam
    F1 = np.zeros((n, n))
    F1[ia, -1] = F1[-1, ia] = 0.5 * bn * lam / k2
    F2 = np.zeros((n, n))
    F2[iad, -1] = F2[-1, iad] = 0.5 * bn / k2
    return {"D0": D0, "D1": D1, "F1": F1, "F2": F2}


def simulate_open_loop(
    phys: PhysicalParams,
    init,
    f: InputSignal,
    T: float,
    dt_out: float,
    ctrl: ControllerParams | None = None,
) -> Trajectory:
    """Drive the truncated system with a piecewise-constant tank acceleration.

    Each mode is advanced with the closed-form exponential and the tank with
    the double-integrator formulas, so sampled states are exact up to
    rounding.  Running integrals are evaluated exactly on every sampling
    interval by Van Loan's block exponential.

    ``energy_integrals`` holds the four running integrals

    * ``D0``: ``kappa ||u||^2 + mu ||u_x||^2``
    * ``D1``: ``(kappa + (sigma kappa + mu) n^2pi^2 + mu sigma n^4pi^4) a_n^2`` summed
    * ``F1``: ``f * sum beta_n (mu n^2pi^2 + kappa) a_n / (n^2pi^2)``
    * ``F2``: ``f * sum beta_n adot_n / (n^2pi^2)``

    from which the energy balance for any weight ``r`` is assembled.
    """
    if not (T > 0 and dt_out > 0):
        raise ValueError("T and dt_out must be > 0")
    x0 = _init_vector(init)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    m = (x0.size - 2) // 2
    grid = _time_grid(T, dt_out, f.breakpoints)
    N = grid.size
    X = np.empty((N, x0.size))
    X[0] = x0
    fv = f(grid)

    for i in range(N - 1):
        h = grid[i + 1] - grid[i]
        fc = fv[i]
        xi, w = X[i, 0], X[i, 1]
        X[i + 1, 0] = xi + w * h - 0.5 * fc * h * h
        X[i + 1, 1] = w - fc * h
        for n in range(1, m + 1):
            X[i + 1, 1 + n], X[i + 1, 1 + m + n] = mode_step_exact(
                n, phys, fc, h, (X[i, 1 + n], X[i, 1 + m + n])
            )
        if not np.all(np.isfinite(X[i + 1])):
            raise DivergenceError(f"non-finite state at t={grid[i + 1]:.6g}")

    A = _augment(open_loop_matrix(phys, m), input_vector(m))
    eforms = _energy_forms(phys, m)
    forms = list(eforms.values())
    names = list(eforms)
    if ctrl is not None:
        two_gk3 = 2.0 * ctrl.gamma * ctrl.k**3
        e_f = np.zeros(x0.size + 1)
        e_f[-1] = 1.0
        forms += [_pad(fn.q_matrix(phys, ctrl, m)), np.outer(e_f, e_f) / two_gk3]
    # segment-held input: the value at the left end of each interval
    Y = np.column_stack([X, fv])
    cache = {}
    C = np.zeros((N, len(forms)))
    for i in range(N - 1):
        h = grid[i + 1] - grid[i]
        key = round(h, 14)
        if key not in cache:
            cache[key] = [_van_loan(A, F, h) for F in forms]
        y = Y[i]
        C[i + 1] = C[i] + [y @ G @ y for G in cache[key]]

    traj = Trajectory(
        times=grid,
        states=X,
        f_values=fv,
        cost_q_integral=C[:, 4] if ctrl is not None else None,
        cost_f_integral=C[:, 5] if ctrl is not None else None,
        V_series=_V_series(X, phys, ctrl, m) if ctrl is not None else None,
        phys=phys,
        ctrl=ctrl,
        energy_integrals={name: C[:, j] for j, name in enumerate(names)},
        info={"dt_out": dt_out, "T": T, "m": m, "loop": "open"},
    )
    return traj


def total_cost_J(traj: Trajectory, tail_tol: float = TAIL_TOL) -> float:
    """Accumulated cost over the horizon, valid once the tail is negligible.

    Raises
    ------
    HorizonTooShort
        If ``V(T) > tail_tol * V(0)``.
    """
    if traj.V_series is None or traj.cost_q_integral is None:
        raise ValueError("trajectory carries no cost accumulators")
    V0, VT = traj.V_series[0], traj.V_series[-1]
    if VT > tail_tol * V0:
        raise HorizonTooShort(VT / V0 if V0 > 0 else math.inf)
    return float(traj.cost_q_integral[-1] + traj.cost_f_integral[-1])
