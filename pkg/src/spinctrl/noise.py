"""1/f frequency-noise trajectories, spectral checks, and Ramsey T2.

The qubit frequency offset is a sum of sinusoids,

    delta(t) = gamma * sum_i f_i^(-1/2) sin(2 pi f_i t + phi_i),

with the component frequencies drawn uniformly in [f_min, f_max] and phases
uniform in [0, 2 pi). Uniform frequency density with f^(-1/2) amplitudes
puts power gamma^2 / (2 f) into each component, so the ensemble PSD falls
as 1/f across the band. delta is in rad/ns; config band edges are in kHz
and converted internally (1 kHz = 1e-6 ns^-1).

The default gamma reproduces a 5 us Ramsey T2 on the 1-100 kHz band with
200 components; see calibrate_gamma for the closed-form quasi-static value
the default was tuned from.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from .propagate import TimeGrid
from .seeding import derive_seeds

KHZ_TO_INV_NS = 1e-6

# Amplitude parameter (rad/ns units) reproducing T2 = 5 us on the default
# band; gamma_for_t2(5.0) rounded to four digits.
DEFAULT_GAMMA = 1.385e-7
DEFAULT_BAND_KHZ = (1.0, 100.0)
DEFAULT_N_COMPONENTS = 200


@dataclass(frozen=True)
class OneOverFConfig:
    """Sum-of-sines noise generator settings.

    amplitude_exponent is the power of 1/f applied to component amplitudes:
    0.5 gives the 1/f power spectrum, 0 gives a flat (white) control
    spectrum used to validate the PSD estimator.
    """

    gamma: float = DEFAULT_GAMMA
    f_min: float = DEFAULT_BAND_KHZ[0]
    f_max: float = DEFAULT_BAND_KHZ[1]
    n_components: int = DEFAULT_N_COMPONENTS
    seed: int = 0
    amplitude_exponent: float = 0.5

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ValueError(f"band edges must satisfy 0 < f_min < f_max, got "
                             f"({self.f_min}, {self.f_max}) kHz")
        if self.n_components < 1:
            raise ValueError(f"n_components must be >= 1, got {self.n_components}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")

    @property
    def band_inv_ns(self) -> tuple[float, float]:
        return (self.f_min * KHZ_TO_INV_NS, self.f_max * KHZ_TO_INV_NS)


def draw_components(cfg: OneOverFConfig, seed: int | None = None):
    """Frequencies (ns^-1), amplitudes (rad/ns), and phases for one realization."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    lo, hi = cfg.band_inv_ns
    freqs = rng.uniform(lo, hi, size=cfg.n_components)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=cfg.n_components)
    amps = cfg.gamma * freqs ** (-cfg.amplitude_exponent)
    return freqs, amps, phases


def trajectory_values(cfg: OneOverFConfig, times: np.ndarray, seed: int | None = None) -> np.ndarray:
    """delta(t) in rad/ns at the given times (ns) for one seeded realization."""
    times = np.asarray(times, dtype=float)
    if cfg.gamma == 0.0:
        return np.zeros(times.shape)
    freqs, amps, phases = draw_components(cfg, seed)
    angles = 2.0 * math.pi * freqs[:, None] * times[None, :] + phases[:, None]
    return amps @ np.sin(angles)


def sample_trajectory(cfg: OneOverFConfig, grid: TimeGrid) -> np.ndarray:
    """delta(t_k) on a propagation grid's nodes; deterministic per (seed, grid)."""
    return trajectory_values(cfg, grid.nodes)


def phase_integrals(cfg: OneOverFConfig, delays: np.ndarray, seed: int) -> np.ndarray:
    """Exact accumulated phase int_0^tau delta(t) dt for each delay (rad).

    Each sinusoid integrates in closed form, so free-evolution Ramsey phases
    carry no quadrature error.
    """
    delays = np.asarray(delays, dtype=float)
    if cfg.gamma == 0.0:
        return np.zeros(delays.shape)
    freqs, amps, phases = draw_components(cfg, seed)
    w = 2.0 * math.pi * freqs
    end = np.cos(w[:, None] * delays[None, :] + phases[:, None])
    start = np.cos(phases)[:, None]
    return (amps / w) @ (start - end)


@dataclass(frozen=True)
class PsdEstimate:
    """Ensemble periodogram over the band with its interior log-log slope."""

    freqs_khz: np.ndarray
    psd: np.ndarray
    slope: float
    fit_band_khz: tuple


def psd_estimate(cfg: OneOverFConfig, realizations: int,
                 duration_ns: float = 2.0e6, n_samples: int = 4096) -> PsdEstimate:
    """Average periodogram of delta(t) and its log-log slope.

    Samples each realization on a uniform grid long enough to resolve f_min
    and fits the slope over the band interior [2 f_min, f_max / 2]. The
    periodogram normalization is one-sided, S(f) = 2 |X|^2 dt / N, so the
    integral of S over frequency matches the time-domain variance.
    """
    if realizations < 10:
        raise ValueError(f"need at least 10 realizations, got {realizations}")
    if math.log2(cfg.f_max / cfg.f_min) < 2.0:
        warnings.warn("band narrower than 2 octaves; slope fit is unreliable",
                      stacklevel=2)
    dt = duration_ns / n_samples
    times = np.arange(n_samples) * dt
    seeds = derive_seeds(cfg.seed, realizations)
    power = np.zeros(n_samples // 2 + 1)
    for s in seeds:
        series = trajectory_values(cfg, times, seed=s)
        spec = np.fft.rfft(series)
        power += np.abs(spec) ** 2
    power /= realizations
    psd = 2.0 * power * dt / n_samples
    psd[0] /= 2.0
    if n_samples % 2 == 0:
        psd[-1] /= 2.0
    freqs = np.fft.rfftfreq(n_samples, d=dt)  # ns^-1
    freqs_khz = freqs / KHZ_TO_INV_NS

    lo, hi = 2.0 * cfg.f_min, cfg.f_max / 2.0
    mask = (freqs_khz >= lo) & (freqs_khz <= hi) & (psd > 0)
    if np.count_nonzero(mask) < 4:
        raise ValueError("too few periodogram bins inside the fit band")
    slope = float(np.polyfit(np.log10(freqs_khz[mask]), np.log10(psd[mask]), 1)[0])
    return PsdEstimate(freqs_khz=freqs_khz, psd=psd, slope=slope, fit_band_khz=(lo, hi))


def mean_inverse_frequency(cfg: OneOverFConfig) -> float:
    """E[1/f] in ns over the uniform band (closed form)."""
    lo, hi = cfg.band_inv_ns
    return math.log(hi / lo) / (hi - lo)


def stationary_std(cfg: OneOverFConfig) -> float:
    """Ensemble standard deviation of delta(t) in rad/ns (closed form)."""
    return cfg.gamma * math.sqrt(cfg.n_components * mean_inverse_frequency(cfg) / 2.0)


def calibrate_gamma(t2_us: float, cfg: OneOverFConfig | None = None) -> float:
    """Quasi-static gamma producing a target Ramsey T2.

    Uses the Gaussian free-induction envelope exp(-(tau/T2)^2) with
    T2 = sqrt(2)/sigma, sigma^2 = gamma^2 n E[1/f] / 2. Fast components
    partially average out, so the simulated T2 runs slightly longer than
    this closed form; DEFAULT_GAMMA is the numerically refined value.
    """
    base = cfg if cfg is not None else OneOverFConfig()
    t2_ns = t2_us * 1000.0
    sigma = math.sqrt(2.0) / t2_ns
    return sigma / math.sqrt(base.n_components * mean_inverse_frequency(base) / 2.0)


class RamseyFitError(RuntimeError):
    """Gaussian envelope fit failed; carries the raw decay curve."""

    def __init__(self, message: str, delays: np.ndarray, coherence: np.ndarray):
        super().__init__(message)
        self.delays = delays
        self.coherence = coherence


def ramsey_decay(cfg: OneOverFConfig, delays, realizations: int) -> np.ndarray:
    """|<exp(i int delta dt)>| at each delay, averaged over realizations."""
    delays = np.asarray(delays, dtype=float)
    seeds = derive_seeds(cfg.seed, realizations)
    acc = np.zeros(delays.shape, dtype=complex)
    for s in seeds:
        acc += np.exp(1j * phase_integrals(cfg, delays, s))
    return np.abs(acc / realizations)


def ramsey_t2(cfg: OneOverFConfig, delays, realizations: int) -> float:
    """Fitted Ramsey T2 in microseconds (math.inf when gamma = 0).

    Simulates free-evolution phase accumulation per realization, averages
    the coherence, and fits the Gaussian envelope exp(-(tau/T2)^2) by least
    squares on the magnitude.
    """
    delays = np.asarray(delays, dtype=float)
    if cfg.gamma == 0.0:
        return math.inf
    coherence = ramsey_decay(cfg, delays, realizations)

    below = np.nonzero(coherence < math.exp(-1.0))[0]
    t2_guess = float(delays[below[0]]) if below.size else float(delays[-1])

    def envelope(t, t2):
        return np.exp(-((t / t2) ** 2))

    try:
        popt, _ = curve_fit(envelope, delays, coherence, p0=[t2_guess], maxfev=10000)
    except RuntimeError as exc:
        raise RamseyFitError(f"Gaussian envelope fit failed: {exc}", delays, coherence) from exc
    t2_ns = float(popt[0])
    if not math.isfinite(t2_ns) or t2_ns <= 0:
        raise RamseyFitError(f"fit returned unusable T2 = {t2_ns}", delays, coherence)
    return abs(t2_ns) / 1000.0


def gamma_for_t2(t2_us: float, cfg: OneOverFConfig | None = None,
                 realizations: int = 2000, refine_steps: int = 2) -> float:
    """Numerically refined gamma hitting a target T2 on the configured band.

    Starts from the quasi-static estimate and applies multiplicative
    corrections T2_sim / T2_target (exact for Gaussian dephasing, where
    T2 scales as 1/gamma).
    """
    base = cfg if cfg is not None else OneOverFConfig()
    gamma = calibrate_gamma(t2_us, base)
    delays = np.linspace(0.0, 4.0 * t2_us * 1000.0, 61)
    for _ in range(refine_steps):
        probe = replace(base, gamma=gamma)
        t2_sim = ramsey_t2(probe, delays, realizations)
        gamma *= t2_sim / t2_us
    return gamma
