"""Independent reference computations used by the test suite only.

Everything here deliberately goes through a different route than the
package implementation (scipy special functions, quadrature, brute-force
enumeration), so agreement is meaningful.
"""

import numpy as np
from scipy.integrate import quad
from scipy.special import ellipj, ellipk


def pendulum_period_quadrature(energy: float) -> float:
    """Libration period by direct quadrature of 2 sqrt(2) Int dq / sqrt(cos q - cos q_m).

    The endpoint singularity is removed by substituting q = q_m - v^2.
    """
    q_m = np.arccos(1.0 - energy)

    def integrand(v):
        return 2.0 * v / np.sqrt(np.cos(q_m - v * v) - np.cos(q_m))

    # start a hair above 0: the integrand is a removable 0/0 there and the
    # omitted mass is far below the requested tolerance
    val, err = quad(integrand, 1e-12, np.sqrt(q_m), limit=200, epsabs=1e-13, epsrel=1e-12)
    assert err < 1e-9
    return 2.0 * np.sqrt(2.0) * val


def pendulum_period_scipy(energy: float) -> float:
    """T = 4 K(m) with m = sin^2(q_m / 2), via scipy's ellipk."""
    q_m = np.arccos(1.0 - energy)
    return 4.0 * ellipk(np.sin(0.5 * q_m) ** 2)


def pendulum_exact_flow(p0: float, t):
    """Exact libration solution from (p0, 0): p = 2k cn(t), sin(q/2) = k sn(t).

    Valid for 0 < p0 < 2 (k = p0/2 < 1).
    """
    k = 0.5 * p0
    sn, cn, dn, _ = ellipj(np.asarray(t, dtype=float), k * k)
    p = 2.0 * k * cn
    q = 2.0 * np.arcsin(k * sn)
    return p, q


def hann_leakage_sum(n: int, h: float, delta: float) -> complex:
    """Closed-form (1/W) sum_j chi_j e^{i delta t_j} for the Hann-type window.

    chi_j = 1 + cos(pi (j - c)/c) with c = (n-1)/2; splits into three
    geometric series.
    """
    j = np.arange(n)
    c = 0.5 * (n - 1)

    def geom(alpha):
        # sum over j of e^{i alpha j}
        if abs(np.sin(alpha / 2.0)) < 1e-15:
            return n * np.exp(1j * alpha * (n - 1) / 2.0)
        return np.exp(1j * alpha * (n - 1) / 2.0) * np.sin(n * alpha / 2.0) / np.sin(alpha / 2.0)

    a = delta * h
    w = np.pi / c
    total = geom(a) + 0.5 * np.exp(-1j * w * c) * geom(a + w) + 0.5 * np.exp(1j * w * c) * geom(a - w)
    W = n  # sum of chi = n + sum cos(...) = n (the cosine sums to 0 over the window)
    chi = 1.0 + np.cos(np.pi * (j - c) / c)
    return total / chi.sum()


def brute_force_diophantine(omega, h, gamma, tau, k_max) -> bool:
    """Full-lattice loop over 0 < |k|_1 <= k_max (no half-lattice shortcut)."""
    import itertools

    omega = np.asarray(omega, dtype=float)
    n = omega.size
    ok = True
    for k in itertools.product(range(-k_max, k_max + 1), repeat=n):
        order = sum(abs(v) for v in k)
        if order == 0 or order > k_max:
            continue
        lhs = abs(np.exp(1j * h * np.dot(k, omega)) - 1.0)
        if lhs < h * gamma / order ** tau:
            ok = False
    return ok


def bisection_root(fn, lo: float, hi: float, tol: float = 1e-14) -> float:
    flo = fn(lo)
    assert flo * fn(hi) <= 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if flo * fn(mid) <= 0:
            hi = mid
        else:
            lo = mid
            flo = fn(lo)
    return 0.5 * (lo + hi)
