"""Resonance module: Diophantine tests, labels, scans, peaks, fits."""

import numpy as np
import pytest

from kamtori import (
    DimensionError,
    DiophantineParams,
    IMPLICIT_MIDPOINT,
    LatticeSizeError,
    PENDULUM,
    PhaseState,
    RUNGE_EXPLICIT_MIDPOINT,
    ScanRow,
    Trajectory,
    default_diophantine_params,
    detect_peaks,
    diophantine_check,
    energy_drift_check,
    fit_convergence_order,
    integrate,
    scan_step_sizes,
    search_resonance,
    verify_resonance,
)

import oracles

PEND_STATE = PhaseState([0.7], [0.0])


# -- diophantine_check --------------------------------------------------------

def test_diophantine_exact_resonance_fails():
    # <k, omega> = 0 for k = (1, -1): left side exactly zero
    ok, (worst_k, margin) = diophantine_check(
        [1.0, 1.0], 0.7, DiophantineParams(gamma=1e-6, tau=4, k_max=3)
    )
    assert not ok
    assert abs(worst_k[0]) == abs(worst_k[1]) == 1 and worst_k[0] * worst_k[1] < 0
    assert margin < 0


def test_diophantine_worst_k_paper_resonance():
    ok, (worst_k, margin) = diophantine_check(
        [0.7627], 2.05, DiophantineParams(gamma=1e-8, tau=3, k_max=6)
    )
    assert worst_k == (4,)


def test_diophantine_pendulum_small_h_passes():
    params = DiophantineParams(gamma=1e-3, tau=3, k_max=50)
    ok, _ = diophantine_check([0.9681], 0.01, params)
    assert ok
    assert oracles.brute_force_diophantine([0.9681], 0.01, 1e-3, 3, 50)


def test_diophantine_agrees_with_full_lattice():
    rng = np.random.default_rng(3)
    params = DiophantineParams(gamma=2e-2, tau=4, k_max=5)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        omega = rng.uniform(0.1, 2.0, size=n)
        h = float(rng.uniform(0.1, 2.0))
        ours, _ = diophantine_check(omega, h, params)
        ref = oracles.brute_force_diophantine(omega, h, params.gamma, params.tau, params.k_max)
        assert ours == ref


def test_diophantine_gamma_monotonicity():
    rng = np.random.default_rng(9)
    for _ in range(10):
        omega = rng.uniform(0.1, 2.0, size=2)
        h = float(rng.uniform(0.05, 2.0))
        big, _ = diophantine_check(omega, h, DiophantineParams(5e-2, 4, 8))
        small, _ = diophantine_check(omega, h, DiophantineParams(1e-5, 4, 8))
        if big:
            assert small  # shrinking gamma can only turn fail into pass


def test_diophantine_lattice_guard():
    with pytest.raises(LatticeSizeError):
        diophantine_check(np.ones(6), 0.1, DiophantineParams(1e-3, 8, 40))


def test_default_params():
    params = default_diophantine_params(3)
    assert params.tau > 4 and params.gamma > 0 and params.k_max >= 1


# -- verify_resonance ---------------------------------------------------------

def test_verify_resonance_paper_fourth_order():
    label = verify_resonance([4], 1, 2.05, [0.7627])
    assert label.order == 4
    assert label.residual == pytest.approx(abs(2.05 * 4 * 0.7627 - 2 * np.pi), abs=1e-15)
    assert label.residual == pytest.approx(0.029045, abs=1e-6)


def test_verify_resonance_paper_third_order():
    label = verify_resonance([3], 1, 3.5, [0.5990])
    assert label.order == 3
    assert label.residual == pytest.approx(abs(3.5 * 3 * 0.5990 - 2 * np.pi), abs=1e-15)
    assert label.residual == pytest.approx(0.006315, abs=1e-6)


def test_verify_resonance_high_order_label():
    label = verify_resonance([231, 64, 12], 1, 0.14, [0.1884, 0.0078, 6.9198e-4])
    assert label.order == 307
    assert label.residual >= 0


def test_verify_resonance_rejects_zero_k():
    with pytest.raises(DimensionError):
        verify_resonance([0, 0], 1, 0.1, [1.0, 2.0])


def test_verify_resonance_exactness_random():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        omega = rng.uniform(0.1, 2.0, size=n)
        k = rng.integers(-5, 6, size=n)
        if not k.any():
            k[0] = 2
        l = int(rng.integers(1, 5))
        denom = float(k @ omega)
        if abs(denom) < 1e-6:
            continue
        h_star = 2 * np.pi * l / denom
        if h_star < 0:
            k, h_star = -k, -h_star  # same resonance, positive step size
        assert verify_resonance(k, l, h_star, omega).residual <= 1e-12


# -- search_resonance ---------------------------------------------------------

def test_search_finds_paper_labels():
    label = search_resonance([0.7627], 2.05, 8, 2, 0.05)
    assert label is not None and label.k == (4,) and label.l == 1
    label = search_resonance([0.5990], 3.5, 8, 2, 0.05)
    assert label is not None and label.k == (3,) and label.l == 1


def test_search_returns_none_off_resonance():
    assert search_resonance([0.9681], 0.01, 8, 2, 0.01) is None


def test_search_subset_of_verify_random():
    rng = np.random.default_rng(77)
    hits = 0
    for _ in range(1000):
        n = int(rng.integers(1, 3))
        omega = rng.uniform(0.3, 1.5, size=n)
        h = float(rng.uniform(0.05, 4.0))
        tol = float(rng.uniform(0.01, 0.2))
        label = search_resonance(omega, h, 6, 3, tol)
        if label is None:
            continue
        hits += 1
        again = verify_resonance(label.k, label.l, h, omega)
        assert again.residual == label.residual < tol
    assert hits > 100  # the random draw must actually exercise the property


def test_search_tie_breaks_toward_low_order():
    # omega = 1: h = 2 pi makes every (k, l=k) combination exact; want k=(1,), l=1
    label = search_resonance([1.0], 2 * np.pi, 5, 5, 1e-6)
    assert label is not None and label.k == (1,) and label.l == 1


# -- scans and peaks ----------------------------------------------------------

def test_scan_empty_grid():
    assert scan_step_sizes(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, [], 100) == []


def test_scan_rejects_bad_grid():
    with pytest.raises(DimensionError):
        scan_step_sizes(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, [0.2, 0.1], 10)
    with pytest.raises(DimensionError):
        scan_step_sizes(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, [-0.1, 0.2], 10)


def test_scan_structure_and_determinism():
    grid = [0.1, 0.2, 0.3]
    rows = scan_step_sizes(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, grid, 2000)
    again = scan_step_sizes(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, grid, 2000)
    assert [r.h for r in rows] == grid
    for r in rows:
        assert len(r.errors) == 2  # one first integral (H) plus total energy
        assert r.converged and all(e >= 0 for e in r.errors)
    assert rows == again


def test_scan_resonant_h_spikes():
    rows = scan_step_sizes(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, [0.1, 2.05], 20000)
    assert rows[1].errors[-1] > 100 * rows[0].errors[-1]


def test_scan_runge_errors_grow_smoothly():
    grid = np.round(np.linspace(0.05, 0.4, 8), 10)
    rows = scan_step_sizes(RUNGE_EXPLICIT_MIDPOINT, PENDULUM, PEND_STATE, grid, 2000)
    errs = [r.errors[-1] for r in rows]
    assert all(b > a for a, b in zip(errs, errs[1:]))
    assert detect_peaks(rows, len(PENDULUM.first_integrals), window=5, factor=3.0) == []


def _rows_from_errors(errors):
    return [
        ScanRow(h=0.01 * (i + 1), errors=(float(e),), converged=True)
        for i, e in enumerate(errors)
    ]


def test_detect_peaks_constant_curve():
    rows = _rows_from_errors(np.full(40, 1e-6))
    assert detect_peaks(rows, 0) == []


def test_detect_peaks_single_spike():
    errors = np.full(101, 1e-6)
    errors[50] = 1e-2
    peaks = detect_peaks(rows := _rows_from_errors(errors), 0)
    assert len(peaks) == 1
    assert peaks[0] == (rows[50].h, 1e-2)


def test_detect_peaks_precision_recall_on_spike_train():
    rng = np.random.default_rng(123)
    baseline = 1e-6 * (1.0 + 0.05 * rng.random(301))
    spikes = [30, 80, 150, 220, 290]
    errors = baseline.copy()
    for idx in spikes:
        errors[idx] = 1e-6 * 9.5  # spike/baseline ratio > factor^2 = 9
    rows = _rows_from_errors(errors)
    found = detect_peaks(rows, 0, window=11, factor=3.0)
    found_idx = sorted(int(round(h / 0.01)) - 1 for h, _ in found)
    assert found_idx == spikes  # precision and recall both 1


def test_detect_peaks_needs_full_window():
    rows = _rows_from_errors([1, 2, 1])
    assert detect_peaks(rows, 0, window=5, factor=2.0) == []
    with pytest.raises(DimensionError):
        detect_peaks(rows, 0, window=4, factor=2.0)
    with pytest.raises(DimensionError):
        detect_peaks(rows, 0, window=5, factor=0.5)


# -- convergence fits ----------------------------------------------------------

def test_fit_convergence_exact_square():
    hs = np.array([0.01, 0.02, 0.05, 0.1])
    slope, intercept, r2 = fit_convergence_order(hs, hs ** 2)
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_convergence_rejects_bad_input():
    with pytest.raises(DimensionError):
        fit_convergence_order([0.1, 0.2], [1.0, 2.0])
    with pytest.raises(DimensionError):
        fit_convergence_order([0.1, 0.2, -0.3], [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        fit_convergence_order([0.1, 0.2, 0.3], [1.0, 0.0, 3.0])


# -- energy drift check ----------------------------------------------------------

def _make_traj(p_series, q_series, h=0.1):
    return Trajectory(
        scheme=IMPLICIT_MIDPOINT,
        h=h,
        system="pendulum",
        p=np.asarray(p_series, dtype=float)[:, None],
        q=np.asarray(q_series, dtype=float)[:, None],
    )


def test_energy_drift_exact_rotation_passes():
    # constant energy by construction
    n = 1000
    traj = _make_traj(np.full(n, 0.7), np.zeros(n))
    passed, c_est = energy_drift_check(traj, PENDULUM, 0.1, 2)
    assert passed and c_est == 0.0


def test_energy_drift_secular_growth_fails():
    n = 1000
    drift = 0.7 + 1e-4 * np.arange(n)
    traj = _make_traj(drift, np.zeros(n))
    passed, _ = energy_drift_check(traj, PENDULUM, 0.1, 2)
    assert not passed


def test_energy_drift_im_two_step_consistency():
    t1 = integrate(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, 0.01, 20000)
    t2 = integrate(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, 0.02, 20000)
    ok1, c1 = energy_drift_check(t1, PENDULUM, 0.01, 2)
    ok2, c2 = energy_drift_check(t2, PENDULUM, 0.02, 2)
    assert ok1 and ok2
    assert 0.5 <= c2 / c1 <= 2.0


def test_energy_drift_resonant_h_saturates_with_huge_constant():
    # the destroyed torus shows up as an enormous c_est, not as a time
    # trend: the error jumps within a few hundred steps and stays flat
    resonant = integrate(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, 2.05, 20000)
    healthy = integrate(IMPLICIT_MIDPOINT, PENDULUM, PEND_STATE, 0.1, 20000)
    passed_res, c_res = energy_drift_check(resonant, PENDULUM, 2.05, 2)
    passed_ok, c_ok = energy_drift_check(healthy, PENDULUM, 0.1, 2)
    assert passed_ok and passed_res  # both flat over time
    assert c_res > 30 * c_ok  # measured ratio ~58
