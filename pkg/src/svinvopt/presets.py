"""Named initial conditions for the liquid profile.

Every preset describes the initial displacement profile ``phi(0, x)``; the
initial rate is zero.  The tank starts from ``(xi0, w0)``.
"""

from __future__ import annotations

import numpy as np

from .model import SystemState, TankState
from .spectral import ModalState, basis_phi, project_initial

__all__ = ["PRESETS", "MIXED_MODES", "MIXED_RATIO", "preset_profile", "initial_state"]

MIXED_MODES = (1, 3, 5, 7)
MIXED_RATIO = 0.5


def _mixed(x):
    return sum(MIXED_RATIO**j * basis_phi(n, x) for j, n in enumerate(MIXED_MODES))


_PROFILES = {
    "zero": lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    "mode1": lambda x: basis_phi(1, x),
    "mode3": lambda x: basis_phi(3, x),
    "ramp": lambda x: np.asarray(x, dtype=float) - 0.5,
    "mixed": _mixed,
}
PRESETS = tuple(_PROFILES)


def preset_profile(name: str):
    """Vectorized ``phi(0, x)`` of a preset."""
    try:
        return _PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; valid: {', '.join(PRESETS)}") from None


def _coefficients(name, m):
    a = np.zeros(m)
    if name in ("mode1", "mode3"):
        n = int(name[-1])
        if n <= m:
            a[n - 1] = 1.0
    elif name == "mixed":
        for j, n in enumerate(MIXED_MODES):
            if n <= m:
                a[n - 1] = MIXED_RATIO**j
    elif name == "ramp":
        a = project_initial(_PROFILES["ramp"], _PROFILES["zero"], m).a.copy()
    return a


def initial_state(
    name: str = "zero",
    m: int = 16,
    amplitude: float = 1.0,
    xi0: float = 0.0,
    w0: float = 0.0,
    coefficients=None,
) -> SystemState:
    """Truncated initial state from a preset or an explicit coefficient list.

    Parameters
    ----------
    name : str
        One of ``PRESETS``; ignored when ``coefficients`` is given.
    m : int
        Truncation order.
    amplitude : float
        Multiplies the liquid profile.
    xi0, w0 : float
        Tank position and velocity.
    coefficients : sequence of float, optional
        Modal displacement coefficients ``a_1, a_2, ...``; padded with zeros
        (or rejected if longer than ``m``).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if coefficients is not None:
        c = np.asarray(coefficients, dtype=float).ravel()
        if c.size > m:
            raise ValueError(f"{c.size} coefficients given for m={m}")
        a = np.zeros(m)
        a[: c.size] = c
    else:
        preset_profile(name)
        a = _coefficients(name, m)
    return SystemState(TankState(xi0, w0), ModalState(amplitude * a, np.zeros(m)))
