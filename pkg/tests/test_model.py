import math

import numpy as np
import pytest
from scipy.linalg import expm

from svinvopt import functionals as fn
from svinvopt.model import (
    ControllerParams,
    InfeasibleParameters,
    PhysicalParams,
    SystemState,
    TankState,
    assumption_A_margin,
    closed_loop_matrix,
    gamma_star,
    input_vector,
    mode_step_exact,
    open_loop_matrix,
    spectral_abscissa,
)
from svinvopt.spectral import ModalState

# frozen before the main path was written: 30-digit evaluation of the scalar
# formulas for sigma = mu = 1, kappa = 0, r = k = 1
GAMMA_STAR_ORACLE = 2.104661535503076160
RHS_ORACLE = 2.010921706228184456

NOMINAL = PhysicalParams(1.0, 1.0, 0.0)


def test_param_validation():
    with pytest.raises(ValueError):
        PhysicalParams(sigma=0.0)
    with pytest.raises(ValueError):
        PhysicalParams(mu=-1.0)
    with pytest.raises(ValueError):
        PhysicalParams(kappa=-0.1)
    with pytest.raises(ValueError):
        ControllerParams(gamma=0.0)
    with pytest.raises(ValueError):
        ControllerParams(gamma=1.0, Q=-1.0)
    ControllerParams(gamma=1.0, Q=0.0)
    with pytest.raises(ValueError):
        TankState(math.nan, 0.0)


def test_system_state_vector_round_trip():
    x = np.arange(8, dtype=float)
    s = SystemState.from_vector(x)
    assert s.m == 3
    np.testing.assert_array_equal(s.as_vector(), x)
    with pytest.raises(ValueError):
        SystemState.from_vector(x, m=2)


def test_assumption_margin_oracle():
    assert assumption_A_margin(NOMINAL, 1, 1, 0.1) == pytest.approx(RHS_ORACLE - 0.1, rel=1e-14)
    assert assumption_A_margin(NOMINAL, 1, 1, 0.0) == pytest.approx(RHS_ORACLE, rel=1e-14)
    assert assumption_A_margin(NOMINAL, 1, 1, 3.0) < 0


def test_gamma_star_oracle():
    assert gamma_star(NOMINAL, 1, 1, 0.1) == pytest.approx(GAMMA_STAR_ORACLE, rel=1e-12)
    assert gamma_star(NOMINAL, 1, 1, 0.0) == 2.0
    with pytest.raises(InfeasibleParameters):
        gamma_star(NOMINAL, 1, 1, 3.0)


def test_gamma_star_above_two_and_margin_monotone():
    rng = np.random.default_rng(3)
    for _ in range(50):
        phys = PhysicalParams(*rng.uniform([0.1, 0.1, 0.0], [3.0, 3.0, 2.0]))
        r = rng.uniform(0.2, 3.0)
        Qs = np.sort(rng.uniform(0, 1, 5))
        ks = np.sort(rng.uniform(0.2, 2, 5))
        assert np.all(np.diff([assumption_A_margin(phys, r, 1.0, Q) for Q in Qs]) < 0)
        assert np.all(np.diff([assumption_A_margin(phys, r, k, 0.1) for k in ks]) < 0)
        Q = 0.5 * assumption_A_margin(phys, r, 1.0, 0.0)
        assert gamma_star(phys, r, 1.0, Q) > 2.0


def test_closed_loop_tank_block_q0():
    M = closed_loop_matrix(NOMINAL, ControllerParams(gamma=4.0, k=1.0, Q=0.0), 1)
    np.testing.assert_array_equal(M[:2, :2], [[0, 1], [-4, -4]])
    # liquid does not feed back into the tank
    assert not M[:2, 2:].any()


def test_closed_loop_zero_is_equilibrium():
    M = closed_loop_matrix(NOMINAL, ControllerParams(gamma=3.0), 4)
    assert not (M @ np.zeros(10)).any()


def test_w_row_is_minus_feedback():
    rng = np.random.default_rng(4)
    phys = PhysicalParams(0.7, 1.3, 0.4)
    ctrl = ControllerParams(gamma=3.0, r=0.8, k=1.2, Q=0.05)
    M = closed_loop_matrix(phys, ctrl, 6)
    for _ in range(20):
        x = rng.standard_normal(14)
        P = fn.feedback_P(x, ctrl, phys)
        assert (M @ x)[1] == pytest.approx(-P, rel=1e-12, abs=1e-12)


def test_even_modes_unactuated():
    b = input_vector(4)
    np.testing.assert_array_equal(b[[7, 9]], 0.0)
    M = closed_loop_matrix(NOMINAL, ControllerParams(gamma=3.0), 4)
    even = [3, 5, 7, 9]
    assert not M[np.ix_(even, [0, 1, 2, 4, 6, 8])].any()
    # feedback ignores even modes
    assert not M[1, even].any()


@pytest.mark.parametrize("m", [1, 2, 4, 8, 16])
def test_spectral_stability(m):
    rng = np.random.default_rng(5)
    for _ in range(5):
        phys = PhysicalParams(*rng.uniform([0.2, 0.2, 0.0], [2.0, 2.0, 1.0]))
        r, k = rng.uniform(0.3, 2.0, 2)
        Q = rng.uniform(0.05, 0.95) * assumption_A_margin(phys, r, k, 0.0) / k**3
        gs = gamma_star(phys, r, k, Q)
        for f in (0.51, 1.0, 5.0):
            M = closed_loop_matrix(phys, ControllerParams(f * gs, r, k, Q), m)
            assert spectral_abscissa(M) < 0


def test_open_loop_structure():
    A = open_loop_matrix(NOMINAL, 2)
    assert A[0, 1] == 1.0
    assert A[4, 2] == pytest.approx(-(np.pi**2 + 1) * np.pi**2)
    assert A[4, 4] == pytest.approx(-(np.pi**2))


def test_mode_step_zero():
    assert mode_step_exact(1, NOMINAL, 0.0, 0.1, (0.0, 0.0)) == (0.0, 0.0)


def test_mode_step_against_eigen_solution():
    p2 = np.pi**2
    s = (-p2 + np.sqrt(complex(p2**2 - 4 * p2 * (p2 + 1)))) / 2
    s = np.array([s, np.conj(s)])
    t = 0.37
    # a(t) = c1 e^{s1 t} + c2 e^{s2 t}, a(0) = 1, a'(0) = -0.5
    c = np.linalg.solve(np.array([[1, 1], s]), [1.0, -0.5])
    a = np.real(c @ np.exp(s * t))
    ad = np.real(c @ (s * np.exp(s * t)))
    out = mode_step_exact(1, NOMINAL, 0.0, t, (1.0, -0.5))
    assert out[0] == pytest.approx(a, abs=1e-13)
    assert out[1] == pytest.approx(ad, abs=1e-12)


@pytest.mark.parametrize(
    "phys, n", [(NOMINAL, 1), (NOMINAL, 9), (PhysicalParams(0.01, 3.0, 2.0), 2)]
)
def test_mode_step_against_expm_forced(phys, n):
    k2 = (n * np.pi) ** 2
    lam = phys.mu * k2 + phys.kappa
    A = np.array([[0, 1, 0], [-(phys.sigma * k2 + 1) * k2, -lam, -2 * np.sqrt(2) * (n % 2)], [0, 0, 0]])
    y = expm(A * 0.05) @ np.array([0.3, -1.2, 0.7])
    out = mode_step_exact(n, phys, 0.7, 0.05, (0.3, -1.2))
    scale = 1 + np.abs(y).max()
    np.testing.assert_allclose(out, y[:2], atol=1e-12 * scale)


def test_mode_step_near_critical_damping():
    # mu chosen so that lambda^2 = 4 * stiffness for n = 1
    k2 = np.pi**2
    sigma = 0.5
    mu = 2 * np.sqrt((sigma * k2 + 1) * k2) / k2
    for eps in (0.0, 1e-14, -1e-14, 1e-9):
        phys = PhysicalParams(sigma, mu * (1 + eps), 0.0)
        lam = phys.mu * k2
        A = np.array([[0, 1], [-(sigma * k2 + 1) * k2, -lam]])
        y = expm(A * 0.2) @ [1.0, 0.5]
        np.testing.assert_allclose(mode_step_exact(1, phys, 0.0, 0.2, (1.0, 0.5)), y, atol=1e-12)


def test_mode_step_semigroup():
    st = (0.4, -2.0)
    half = mode_step_exact(3, NOMINAL, 0.3, 0.01, mode_step_exact(3, NOMINAL, 0.3, 0.02, st))
    full = mode_step_exact(3, NOMINAL, 0.3, 0.03, st)
    np.testing.assert_allclose(half, full, atol=1e-13)


def test_mode_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        mode_step_exact(1, NOMINAL, 0.0, 0.0, (1.0, 0.0))
