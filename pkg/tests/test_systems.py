"""Dynamics module: models, gradients, action-angle maps, period oracle."""

import numpy as np
import pytest

from kamtori import (
    DegenerateAngleError,
    DimensionError,
    OutOfRegimeError,
    PENDULUM,
    PhaseState,
    RUESSMANN3,
    RUESSMANN3_X0,
    RUESSMANN3_Y0,
    ConfigError,
    eval_gradients,
    eval_hamiltonian,
    first_integral_values,
    from_action_angle,
    get_system,
    make_expression_system,
    pendulum_frequency,
    pendulum_period,
    to_action_angle,
)
from kamtori.systems import fd_gradient

import oracles

RUESS_STATE = PhaseState(RUESSMANN3_X0, RUESSMANN3_Y0)


def test_pendulum_energy_values():
    assert eval_hamiltonian(PENDULUM, PhaseState([0.7], [0.0])) == pytest.approx(0.245, abs=1e-15)
    assert eval_hamiltonian(PENDULUM, PhaseState([0.0], [0.0])) == 0.0


def test_pendulum_gradients():
    gp, gq = eval_gradients(PENDULUM, PhaseState([0.7], [0.0]))
    assert gp[0] == pytest.approx(0.7) and gq[0] == pytest.approx(0.0, abs=1e-15)
    gp, gq = eval_gradients(PENDULUM, PhaseState([0.0], [np.pi / 2]))
    assert gp[0] == 0.0 and gq[0] == pytest.approx(1.0)


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionError):
        eval_hamiltonian(PENDULUM, PhaseState([0.1, 0.2], [0.0, 0.0]))
    with pytest.raises(DimensionError):
        PhaseState([0.1, np.nan], [0.0, 0.0])


def test_ruessmann_energy_two_ways():
    z = RUESS_STATE.as_z()
    K_cart = float(RUESSMANN3.energy(z))
    actions = 0.5 * (RUESSMANN3_X0 ** 2 + RUESSMANN3_Y0 ** 2)
    H_action = float(RUESSMANN3.action_energy(actions))
    assert abs(K_cart - H_action) <= 1e-14


def test_ruessmann_energy_two_ways_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        z = rng.uniform(-1.0, 1.0, size=6)
        actions = 0.5 * (z[:3] ** 2 + z[3:] ** 2)
        assert abs(RUESSMANN3.energy(z) - RUESSMANN3.action_energy(actions)) <= 1e-13


def test_ruessmann_first_integrals_paper_state():
    vals = first_integral_values(RUESSMANN3, RUESS_STATE)
    # direct arithmetic: (0.2^2+0.37^2)/2, (0.1^2+0.2^2)/2, (0.32+0.2809)/2
    np.testing.assert_allclose(vals, [0.08845, 0.025, 0.30045], rtol=0, atol=1e-15)


def test_first_integrals_trivial():
    assert first_integral_values(RUESSMANN3, PhaseState(np.zeros(3), np.zeros(3))).tolist() == [
        0.0,
        0.0,
        0.0,
    ]
    np.testing.assert_allclose(
        first_integral_values(PENDULUM, PhaseState([0.7], [0.0])), [0.245], atol=1e-15
    )


def test_gradient_consistency_fd():
    rng = np.random.default_rng(11)
    for system, span in ((PENDULUM, 1.5), (RUESSMANN3, 0.9)):
        for _ in range(100):
            z = rng.uniform(-span, span, size=2 * system.dof)
            analytic = system.grad(z)
            fd = np.empty_like(z)
            for i in range(z.size):
                zp, zm = z.copy(), z.copy()
                zp[i] += 1e-6
                zm[i] -= 1e-6
                fd[i] = (system.energy(zp) - system.energy(zm)) / 2e-6
            scale = max(1.0, np.abs(analytic).max())
            assert np.abs(analytic - fd).max() / scale <= 1e-6


def test_hessian_consistency_fd():
    rng = np.random.default_rng(13)
    for system in (PENDULUM, RUESSMANN3):
        for _ in range(25):
            z = rng.uniform(-0.9, 0.9, size=2 * system.dof)
            H = system.hess(z)
            for i in range(z.size):
                zp, zm = z.copy(), z.copy()
                zp[i] += 1e-6
                zm[i] -= 1e-6
                col = (system.grad(zp) - system.grad(zm)) / 2e-6
                assert np.abs(H[:, i] - col).max() <= 1e-6 * max(1.0, np.abs(H).max())


def test_first_integrals_poisson_commute_with_h():
    # {F, H} = dF/dq . dH/dp - dF/dp . dH/dq, computed with FD gradients of F
    rng = np.random.default_rng(17)
    for system in (PENDULUM, RUESSMANN3):
        n = system.dof
        for _ in range(20):
            z = rng.uniform(-0.8, 0.8, size=2 * n)
            gH = system.grad(z)
            for _, fn in system.first_integrals:
                gF = fd_gradient(fn, z)
                bracket = float(gF[n:] @ gH[:n] - gF[:n] @ gH[n:])
                assert abs(bracket) <= 1e-10


def test_action_angle_trivial_cases():
    s = to_action_angle(RUESSMANN3, PhaseState([np.sqrt(2), 1, 1], [0, 0, 0]))
    assert s.p[0] == pytest.approx(1.0) and s.q[0] == pytest.approx(0.0, abs=1e-15)
    s = to_action_angle(RUESSMANN3, PhaseState([0, 1, 1], [np.sqrt(2), 0, 0]))
    assert s.p[0] == pytest.approx(1.0) and s.q[0] == pytest.approx(np.pi / 2)
    back = from_action_angle(RUESSMANN3, PhaseState([1.0, 0.5, 0.5], [0.0, 0.1, 0.2]))
    assert back.p[0] == pytest.approx(np.sqrt(2.0))
    assert back.q[0] == pytest.approx(0.0, abs=1e-15)


def test_action_angle_paper_state_roundtrip():
    aa = to_action_angle(RUESSMANN3, RUESS_STATE)
    np.testing.assert_allclose(aa.p, [0.08845, 0.025, 0.30045], atol=1e-15)
    back = from_action_angle(RUESSMANN3, aa)
    np.testing.assert_allclose(back.p, RUESSMANN3_X0, atol=1e-12)
    np.testing.assert_allclose(back.q, RUESSMANN3_Y0, atol=1e-12)


def test_action_angle_roundtrip_random():
    rng = np.random.default_rng(23)
    for _ in range(100):
        actions = rng.uniform(1e-6, 2.0, size=3)
        angles = rng.uniform(0.0, 2.0 * np.pi, size=3)
        aa = PhaseState(actions, angles)
        cart = from_action_angle(RUESSMANN3, aa)
        again = to_action_angle(RUESSMANN3, cart)
        np.testing.assert_allclose(again.p, actions, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(again.q, angles, rtol=1e-12, atol=1e-12)


def test_action_angle_errors():
    with pytest.raises(DegenerateAngleError):
        to_action_angle(RUESSMANN3, PhaseState([0.0, 1.0, 1.0], [0.0, 1.0, 1.0]))
    with pytest.raises(DimensionError):
        from_action_angle(RUESSMANN3, PhaseState([-0.1, 1.0, 1.0], [0.0, 0.0, 0.0]))
    with pytest.raises(OutOfRegimeError):
        to_action_angle(PENDULUM, PhaseState([0.7], [0.0]))


def test_zero_action_inverse_is_origin():
    s = from_action_angle(RUESSMANN3, PhaseState([0.0, 0.0, 0.0], [0.3, 1.0, 2.0]))
    np.testing.assert_array_equal(s.p, np.zeros(3))
    np.testing.assert_array_equal(s.q, np.zeros(3))


def test_exact_frequency_map_paper_values():
    actions = 0.5 * (RUESSMANN3_X0 ** 2 + RUESSMANN3_Y0 ** 2)
    omega = RUESSMANN3.exact_frequency(actions)
    assert abs(omega[0] - 0.1884) <= 1e-4
    assert abs(omega[1] - 0.0078) <= 1e-4
    assert abs(omega[2] - 6.9198e-4) <= 1e-6


def test_exact_frequency_is_action_gradient():
    rng = np.random.default_rng(29)
    for _ in range(20):
        p = rng.uniform(0.01, 0.5, size=3)
        omega = RUESSMANN3.exact_frequency(p)
        fd = np.empty(3)
        for i in range(3):
            pp, pm = p.copy(), p.copy()
            pp[i] += 1e-6
            pm[i] -= 1e-6
            fd[i] = (RUESSMANN3.action_energy(pp) - RUESSMANN3.action_energy(pm)) / 2e-6
        np.testing.assert_allclose(omega, fd, rtol=1e-8, atol=1e-10)


# -- pendulum period oracle -------------------------------------------------

def test_pendulum_period_paper_values():
    T = pendulum_period(0.245)
    assert abs(T - 6.4901) <= 1e-3
    assert abs(pendulum_frequency(0.245) - 0.9681) <= 1e-3


def test_pendulum_period_vs_scipy():
    for energy in (0.01, 0.245, 0.9, 1.7):
        assert pendulum_period(energy) == pytest.approx(
            oracles.pendulum_period_scipy(energy), abs=1e-12
        )


def test_pendulum_period_vs_quadrature():
    for energy in (0.1, 0.245, 1.2):
        assert pendulum_period(energy) == pytest.approx(
            oracles.pendulum_period_quadrature(energy), abs=1e-9
        )


def test_pendulum_period_harmonic_limit_and_monotone():
    assert abs(pendulum_period(1e-6) - 2.0 * np.pi) <= 1e-4
    energies = np.linspace(1e-4, 1.999, 60)
    periods = [pendulum_period(e) for e in energies]
    assert all(b > a for a, b in zip(periods, periods[1:]))


@pytest.mark.parametrize("energy", [0.0, 2.0, -0.3, 2.5])
def test_pendulum_period_out_of_regime(energy):
    with pytest.raises(OutOfRegimeError):
        pendulum_period(energy)


# -- registry and expression systems -----------------------------------------

def test_registry():
    assert get_system("pendulum") is PENDULUM
    assert get_system("ruessmann3") is RUESSMANN3
    with pytest.raises(ConfigError):
        get_system("nope")


def test_expression_system_matches_builtin_pendulum():
    model = make_expression_system("expr_pend", 1, "p[0]**2/2 + 1 - cos(q[0])")
    rng = np.random.default_rng(31)
    for _ in range(30):
        z = rng.uniform(-1.5, 1.5, size=2)
        assert model.energy(z) == pytest.approx(float(PENDULUM.energy(z)), abs=1e-14)
        np.testing.assert_allclose(model.grad(z), PENDULUM.grad(z), rtol=1e-9, atol=1e-9)


def test_expression_system_rejects_bad_input():
    with pytest.raises(ConfigError):
        make_expression_system("bad", 1, "__import__('os')")
    with pytest.raises(ConfigError):
        make_expression_system("bad", 1, "p[0] +")
    with pytest.raises(ConfigError):
        make_expression_system("bad", 1, "surprise(p[0])")
