"""Cosine/sine modal basis on [0, 1], projections and Parseval norms.

The liquid profile is expanded as ``phi(t, x) = sum_n a_n(t) phi_n(x)`` with
``phi_n(x) = sqrt(2) cos(n pi x)``, n = 1..m.  The constant mode is never
represented, so every profile has zero mean.  The velocity surrogate
``u = int_0^x phi_t`` lives on the sine basis ``g_n(x) = sqrt(2) sin(n pi x)``
with coefficients ``adot_n / (n pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "QUADRATURE_NODES",
    "DEFAULT_GRID_POINTS",
    "ModalState",
    "NormBundle",
    "FieldProfile",
    "basis_phi",
    "basis_g",
    "beta",
    "wavenumbers",
    "gauss_legendre",
    "default_grid",
    "project_initial",
    "reconstruct_phi",
    "reconstruct_phi_t",
    "reconstruct_u",
    "parseval_norms",
]

QUADRATURE_NODES = 128
DEFAULT_GRID_POINTS = 257


@dataclass(frozen=True)
class ModalState:
    """Coefficients of ``phi`` and ``phi_t`` on the cosine basis."""

    a: np.ndarray
    adot: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        adot = np.array(self.adot, dtype=float).ravel()
        if a.shape != adot.shape:
            raise ValueError(f"a and adot lengths differ: {a.size} != {adot.size}")
        if a.size < 1:
            raise ValueError("truncation order m must be >= 1")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(adot))):
            raise ValueError("modal coefficients must be finite")
        a.flags.writeable = False
        adot.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "adot", adot)

    @property
    def m(self) -> int:
        return self.a.size

    @classmethod
    def zeros(cls, m: int) -> "ModalState":
        return cls(np.zeros(m), np.zeros(m))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.adot])


@dataclass(frozen=True)
class NormBundle:
    """Squared L2 norms of the truncated fields (all from Parseval sums)."""

    phi_L2: float
    phi_x_L2: float
    phi_xx_L2: float
    phi_t_L2: float
    u_L2: float
    u_x_L2: float
    composite_L2: float


@dataclass(frozen=True)
class FieldProfile:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape:
            raise ValueError("grid and values must have the same length")
        if grid.size and (grid[0] < 0.0 or grid[-1] > 1.0):
            raise ValueError("grid must lie in [0, 1]")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


def _check_domain(n, x):
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    if np.any(n < 1):
        raise ValueError(f"mode index must be >= 1, got {n}")
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("x must lie in [0, 1]")
    return n, x


def basis_phi(n, x):
    """sqrt(2) cos(n pi x); broadcasts over ``n`` and ``x``."""
    n, x = _check_domain(n, x)
    return np.sqrt(2.0) * np.cos(n * np.pi * x)


def basis_g(n, x):
    """sqrt(2) sin(n pi x); broadcasts over ``n`` and ``x``."""
    n, x = _check_domain(n, x)
    return np.sqrt(2.0) * np.sin(n * np.pi * x)


def beta(n):
    """Input coupling of mode ``n``: -2 sqrt(2) for odd n, 0 for even n."""
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError(f"mode index must be >= 1, got {n}")
    out = np.where(n % 2 == 1, -2.0 * np.sqrt(2.0), 0.0)
    return float(out) if out.ndim == 0 else out


def wavenumbers(m: int) -> np.ndarray:
    """Return ``n pi`` for n = 1..m."""
    return np.pi * np.arange(1, m + 1)


@lru_cache(maxsize=None)
def _gauss_legendre(npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(npts: int = QUADRATURE_NODES):
    """Nodes and weights of the Gauss-Legendre rule mapped to [0, 1]."""
    return _gauss_legendre(int(npts))


def default_grid(npts: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, npts)


def _project(func: Callable, m: int) -> np.ndarray:
    x, w = gauss_legendre()
    vals = np.asarray(func(x), dtype=float)
    if vals.shape == ():
        vals = np.full_like(x, float(vals))
    if not np.all(np.isfinite(vals)):
        raise ValueError("profile is not finite on the quadrature nodes")
    n = np.arange(1, m + 1)
    coeffs = basis_phi(n[:, None], x[None, :]) @ (w * vals)
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("projection produced non-finite coefficients")
    return coeffs


def project_initial(phi0: Callable, phibar0: Callable, m: int) -> ModalState:
    """Project initial profile and initial rate onto the first ``m`` cosine modes.

    Parameters
    ----------
    phi0, phibar0 : callable
        Vectorized functions of ``x`` on [0, 1] giving ``phi(0, x)`` and
        ``phi_t(0, x)``.  Any mean component is discarded by construction.
    m : int
        Truncation order.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    return ModalState(_project(phi0, m), _project(phibar0, m))


def _as_grid(grid):
    if grid is None:
        return default_grid()
    if isinstance(grid, FieldProfile):
        return grid.grid
    return np.asarray(grid, dtype=float)


def reconstruct_phi(state: ModalState, grid=None) -> FieldProfile:
    """Evaluate ``sum_n a_n phi_n(x)`` on ``grid``."""
    x = _as_grid(grid)
    n = np.arange(1, state.m + 1)
    return FieldProfile(x, state.a @ basis_phi(n[:, None], x[None, :]))


def reconstruct_phi_t(state: ModalState, grid=None) -> FieldProfile:
    x = _as_grid(grid)
    n = np.arange(1, state.m + 1)
    return FieldProfile(x, state.adot @ basis_phi(n[:, None], x[None, :]))


def reconstruct_u(state: ModalState, grid=None) -> FieldProfile:
    """Evaluate ``u(x) = int_0^x phi_t`` through its sine expansion."""
    x = _as_grid(grid)
    n = np.arange(1, state.m + 1)
    coeffs = state.adot / wavenumbers(state.m)
    return FieldProfile(x, coeffs @ basis_g(n[:, None], x[None, :]))


def parseval_norms(state: ModalState, phys) -> NormBundle:
    k2 = wavenumbers(state.m) ** 2
    a2 = state.a**2
    ad2 = state.adot**2
    damping = phys.mu * k2 + phys.kappa
    composite = (state.adot + damping * state.a) ** 2 / k2
    return NormBundle(
        phi_L2=float(a2.sum()),
        phi_x_L2=float((k2 * a2).sum()),
        phi_xx_L2=float((k2**2 * a2).sum()),
        phi_t_L2=float(ad2.sum()),
        u_L2=float((ad2 / k2).sum()),
        u_x_L2=float(ad2.sum()),
        composite_L2=float(composite.sum()),
    )
