"""Numerical analysis of fundamental frequencies (Laskar's NAFF).

Frequencies are extracted from a complex signal by maximizing the windowed
correlation with a probe exponential, then projecting the found component
out under the window-weighted inner product and repeating. The Hann-type
window chi(t) = 1 + cos(pi (t - t_mid)/T_half) gives the method its T^-4
frequency accuracy for well-separated lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DimensionError, RefinementError
from .integrators import Trajectory
from .systems import SystemModel

Array = np.ndarray

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

# residual power (relative to the input) below which extraction stops
RESIDUAL_POWER_FLOOR = 1e-14
# relative frequency resolution targeted by refine_peak
REFINE_RTOL = 1e-12
# positive-frequency floor for fundamental_frequencies, in FFT bins
POSITIVE_FLOOR_BINS = 1e-3


@dataclass(frozen=True)
class SignalSeries:
    """Uniformly sampled complex signal."""

    samples: Array
    h: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.size < 16:
            raise DimensionError("signal must be a 1-D series with N >= 16")
        if not np.isfinite(samples).all():
            raise DimensionError("signal samples must be finite")
        if not self.h > 0:
            raise DimensionError("sample spacing h must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.size

    def times(self) -> Array:
        return self.t0 + self.h * np.arange(self.n)

    def window(self) -> Array:
        """Hann-type weights over the centered span; zero at both ends."""
        n = self.n
        t_rel = np.arange(n) - 0.5 * (n - 1)
        return 1.0 + np.cos(np.pi * t_rel / (0.5 * (n - 1)))

    @property
    def nyquist(self) -> float:
        return np.pi / self.h

    @property
    def fft_bin(self) -> float:
        return 2.0 * np.pi / (self.n * self.h)


@dataclass(frozen=True)
class SpectrumLine:
    """One extracted (frequency, complex amplitude) pair."""

    omega: float
    amplitude: complex


def windowed_correlation(signal: SignalSeries, omega: float) -> complex:
    """(1/W) sum_n f(t_n) e^{-i omega t_n} chi(t_n) with W = sum chi."""
    if abs(omega) > signal.nyquist * (1.0 + 1e-12):
        raise DimensionError(f"|omega|={abs(omega)} exceeds Nyquist {signal.nyquist}")
    chi = signal.window()
    t = signal.times()
    return complex(np.sum(signal.samples * chi * np.exp(-1j * omega * t)) / chi.sum())


class _Correlator:
    """Caches the windowed signal so repeated probes cost one exp + dot."""

    def __init__(self, samples: Array, signal: SignalSeries):
        self.t = signal.times()
        chi = signal.window()
        self.W = chi.sum()
        self.g = samples * chi

    def value(self, omega: float) -> complex:
        return np.sum(self.g * np.exp(-1j * omega * self.t)) / self.W

    def mag(self, omega: float) -> float:
        return abs(self.value(omega))


def _golden_max(fun, a: float, b: float, width_tol: float) -> float:
    """Golden-section maximization on [a, b] to the given interval width."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = fun(c)
    fd = fun(d)
    while (b - a) > width_tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def _parabolic_refine(fun, x: float, step: float) -> float:
    """One symmetric parabolic interpolation around x."""
    y0 = fun(x)
    ym = fun(x - step)
    yp = fun(x + step)
    denom = ym - 2.0 * y0 + yp
    if denom >= 0.0 or not np.isfinite(denom):
        return x
    shift = 0.5 * step * (ym - yp) / denom
    if abs(shift) > step:
        return x
    return x + shift


def refine_peak(signal: SignalSeries, omega0: float) -> float:
    """Maximize the windowed-correlation magnitude near omega0.

    omega0 must lie within one FFT bin (2 pi / (N h)) of the true peak.
    Golden section narrows the +-1 bin bracket to 1e-3 bins, then one
    parabolic interpolation at that (still noise-resolved) step locates the
    vertex; near the peak the correlation magnitude is flat to machine
    precision over ~sqrt(eps)/T, so probing finer than that is meaningless
    and the parabola supplies the remaining accuracy.
    """
    bin_w = signal.fft_bin
    corr = _Correlator(signal.samples, signal)
    lo = max(omega0 - bin_w, -signal.nyquist)
    hi = min(omega0 + bin_w, signal.nyquist)
    if not hi > lo:
        raise RefinementError("empty refinement bracket")
    coarse = 1e-3 * bin_w
    peak = _golden_max(corr.mag, lo, hi, max(REFINE_RTOL * abs(omega0), coarse))
    peak = _parabolic_refine(corr.mag, peak, coarse)
    if corr.mag(peak) < corr.mag(omega0) - 1e-12 * max(corr.mag(omega0), 1e-300):
        raise RefinementError("no local maximum found in bracket")
    if abs(peak) < POSITIVE_FLOOR_BINS * bin_w:
        peak = 0.0  # DC line
    return float(peak)


def naff_decompose(signal: SignalSeries, n_lines: int) -> List[SpectrumLine]:
    """Iterative extraction of up to n_lines spectral lines.

    FFT argmax seeds each line; the refined exponential is orthogonalized
    (Gram-Schmidt under the windowed inner product) against the previously
    extracted ones and projected out of the residual. Amplitudes of the raw
    exponentials are recovered by back substitution. Fewer lines are
    returned when the residual power drops below 1e-14 of the input power.
    """
    if n_lines < 1:
        raise DimensionError("n_lines must be >= 1")
    t = signal.times()
    chi = signal.window()
    W = chi.sum()

    def inner(u: Array, v: Array) -> complex:
        return np.sum(u * np.conj(v) * chi) / W

    residual = signal.samples.astype(complex).copy()
    power0 = float(np.sum(np.abs(residual) ** 2 * chi) / W)
    if power0 == 0.0:
        return []
    freqs: List[float] = []
    basis: List[Array] = []
    coeffs: List[complex] = []
    R = np.zeros((n_lines, n_lines), dtype=complex)
    fft_omegas = 2.0 * np.pi * np.fft.fftfreq(signal.n, d=signal.h)
    for j in range(n_lines):
        spectrum = np.fft.fft(residual * chi)
        omega_seed = float(fft_omegas[int(np.argmax(np.abs(spectrum)))])
        sub = SignalSeries(residual, signal.h, signal.t0)
        omega = refine_peak(sub, omega_seed)
        if any(abs(omega - w) < signal.fft_bin * 1e-9 for w in freqs):
            break  # numerically duplicate line; Gram matrix would degenerate
        e = np.exp(1j * omega * t)
        u = e.copy()
        for i, ui in enumerate(basis):
            g = inner(e, ui)
            R[i, j] = g
            u = u - g * ui
        norm = np.sqrt(abs(inner(u, u)))
        if norm < 1e-12:
            break
        u = u / norm
        R[j, j] = norm
        c = inner(residual, u)
        residual = residual - c * u
        freqs.append(omega)
        basis.append(u)
        coeffs.append(c)
        power = float(np.sum(np.abs(residual) ** 2 * chi) / W)
        if power <= RESIDUAL_POWER_FLOOR * power0:
            break
    m = len(freqs)
    if m == 0:
        return []
    amps = np.linalg.solve(R[:m, :m], np.asarray(coeffs))
    lines = [SpectrumLine(freqs[i], complex(amps[i])) for i in range(m)]
    lines.sort(key=lambda line: -abs(line.amplitude))
    return lines


def trajectory_observables(traj: Trajectory, system: SystemModel) -> List[Array]:
    """Complex observable per degree of freedom.

    Cartesian systems use x_i + i y_i; angle systems use exp(i q_i).
    """
    if system.observable == "cartesian":
        return [traj.p[:, i] + 1j * traj.q[:, i] for i in range(system.dof)]
    return [np.exp(1j * traj.q[:, i]) for i in range(system.dof)]


def fundamental_frequencies(
    traj: Trajectory,
    system: SystemModel,
    n_lines: int = 5,
) -> Array:
    """Dominant positive NAFF frequency of each degree of freedom.

    Lines below a small positive floor (10^-3 of an FFT bin) count as DC
    and are skipped; among the rest the largest-amplitude line wins.
    """
    if traj.p.shape[1] != system.dof:
        raise DimensionError("trajectory dimension does not match system")
    out = np.empty(system.dof)
    for i, obs in enumerate(trajectory_observables(traj, system)):
        series = SignalSeries(obs, traj.h)
        lines = naff_decompose(series, n_lines)
        floor = POSITIVE_FLOOR_BINS * series.fft_bin
        positive = [line for line in lines if line.omega > floor]
        if not positive:
            raise RefinementError(
                f"no positive spectral line found for degree of freedom {i}"
            )
        out[i] = positive[0].omega
    return out
