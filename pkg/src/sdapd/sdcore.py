"""Tunable self-differencing front-end: adjustable split, delayed copy,
subtraction, frequency tuning, and suppression metering.

The circuit output is ``(1 - r) * x(t) - r * x(t - D)`` with ``r`` the split
ratio and ``D`` the effective delay.  A periodic input at period D cancels;
weak isolated pulses survive with an inverted replica one delay later.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .signal import SamplingError, Waveform

# Reports are clamped here instead of returning infinities when the residual
# underflows; far above any physically meaningful suppression.
SUPPRESSION_CEILING_DB = 140.0

DEFAULT_TAPS = 16


class TuningRangeError(ValueError):
    """Requested frequency outside the band reachable with the trim range."""


@dataclass(frozen=True)
class SdConfig:
    """Self-differencing circuit settings.

    ``delay_cycles`` gate periods must equal ``nominal_delay + stretcher_trim``
    for cancellation; the line stretcher provides ``trim_max`` of adjustment.
    """

    delay_cycles: int = 1
    nominal_delay: float = 1e-9
    stretcher_trim: float = 0.0
    split_ratio: float = 0.5
    trim_max: float = 45e-12

    def __post_init__(self):
        if self.delay_cycles < 1:
            raise ValueError("delay_cycles must be a positive integer")
        if self.nominal_delay <= 0:
            raise ValueError("nominal_delay must be > 0")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie in (0, 1)")
        if not 0.0 <= self.stretcher_trim <= self.trim_max:
            raise ValueError(
                f"stretcher_trim must lie in [0, {self.trim_max:g}] s")

    @property
    def effective_delay(self) -> float:
        return self.nominal_delay + self.stretcher_trim

    @property
    def frequency_band(self) -> tuple[float, float]:
        """(lowest, highest) gate frequency this line can match."""
        return (self.delay_cycles / (self.nominal_delay + self.trim_max),
                self.delay_cycles / self.nominal_delay)

    @classmethod
    def spanning(cls, f_low: float, f_high: float, delay_cycles: int = 1,
                 split_ratio: float = 0.5) -> "SdConfig":
        """Configure a line whose reachable band is exactly [f_low, f_high]."""
        if not 0 < f_low < f_high:
            raise ValueError("need 0 < f_low < f_high")
        nominal = delay_cycles / f_high
        trim_max = delay_cycles / f_low - nominal
        return cls(delay_cycles=delay_cycles, nominal_delay=nominal,
                   stretcher_trim=0.0, split_ratio=split_ratio, trim_max=trim_max)


@dataclass(frozen=True)
class SuppressionReport:
    harmonic_suppression_db: float
    harmonic_hz: float
    broadband_cancellation_db: float

    def to_json(self) -> str:
        return json.dumps({
            "harmonic_db": self.harmonic_suppression_db,
            "harmonic_hz": self.harmonic_hz,
            "broadband_db": self.broadband_cancellation_db,
        }, sort_keys=True)


def _fractional_delay_taps(mu: float, taps: int, beta: float = 10.0) -> np.ndarray:
    """Windowed-sinc kernel approximating a delay of (taps/2 - 1 + mu) samples.

    The Kaiser window is evaluated continuously, centered on the fractional
    delay point, so the error stays symmetric in mu.
    """
    center = taps / 2 - 1 + mu
    m = np.arange(taps, dtype=np.float64)
    x = (m - center) / (taps / 2)
    x = np.clip(x, -1.0, 1.0)
    window = np.i0(beta * np.sqrt(1.0 - x * x)) / np.i0(beta)
    return np.sinc(m - center) * window


def delay_waveform(wv: Waveform, delay: float, taps: int = DEFAULT_TAPS) -> np.ndarray:
    """Samples of x(t - delay) on the input grid.

    Integer-sample delays are exact shifts; fractional parts use the
    windowed-sinc interpolator.  The first ``ceil(delay*fs) + taps`` samples
    lean on zero padding and are only meaningful as warm-up.
    """
    d_samples = delay * wv.sample_rate
    n0 = int(math.floor(d_samples))
    mu = d_samples - n0
    x = wv.samples
    if mu < 1e-9 or mu > 1.0 - 1e-9:
        shift = n0 if mu < 0.5 else n0 + 1
        out = np.zeros_like(x)
        if shift < len(x):
            out[shift:] = x[:len(x) - shift]
        return out
    h = _fractional_delay_taps(mu, taps)
    # The kernel delays by (taps/2 - 1 + mu) samples, so y[n] = conv[n - offset]
    # with offset = n0 - (taps/2 - 1) realizes the full n0 + mu delay.
    full = np.convolve(x, h)
    offset = n0 - (taps // 2 - 1)
    out = np.zeros_like(x)
    if offset >= 0:
        out[offset:] = full[:len(x) - offset]
    else:
        out[:] = full[-offset:-offset + len(x)]
    return out


def warmup_samples(cfg: SdConfig, sample_rate: float, taps: int = DEFAULT_TAPS) -> int:
    """Samples at the start of an apply_sd output that are delay-line warm-up."""
    return int(math.ceil(cfg.effective_delay * sample_rate)) + taps


def apply_sd(input: Waveform, cfg: SdConfig, taps: int = DEFAULT_TAPS) -> Waveform:
    """Run the self-differencing circuit over a waveform.

    output(t) = (1 - r) * input(t) - r * input(t - D) with D the effective
    delay.  The first ``warmup_samples`` of the output precede a full delay
    span and must be excluded from metrics.
    """
    d = cfg.effective_delay
    if input.duration < 2.0 * d:
        raise ValueError("input must span at least twice the effective delay")
    if d * input.sample_rate < 32.0:
        raise SamplingError("need >= 32 samples per delay for interpolation accuracy")
    r = cfg.split_ratio
    delayed = delay_waveform(input, d, taps)
    return input.with_samples((1.0 - r) * input.samples - r * delayed)


def tune_to_frequency(target: float, cfg: SdConfig) -> SdConfig:
    """Choose the stretcher trim so the effective delay spans ``delay_cycles``
    periods of ``target``; rejects targets outside the reachable band."""
    if target <= 0:
        raise TuningRangeError("target frequency must be > 0")
    trim = cfg.delay_cycles / target - cfg.nominal_delay
    if not 0.0 <= trim <= cfg.trim_max:
        lo, hi = cfg.frequency_band
        raise TuningRangeError(
            f"target {target:g} Hz outside reachable band [{lo:.9g}, {hi:.9g}] Hz")
    return replace(cfg, stretcher_trim=trim)


def _harmonic_amplitude(samples: np.ndarray, sample_rate: float, freq: float) -> float:
    """Amplitude of the sinusoid at ``freq`` by discrete Fourier projection.

    Projects over the largest integer number of cycles to keep the estimate
    leakage-free for periodic inputs.
    """
    n_cycles = math.floor(samples.size * freq / sample_rate)
    if n_cycles < 1:
        raise ValueError("waveform shorter than one cycle of the probe frequency")
    n = int(round(n_cycles * sample_rate / freq))
    x = samples[:n] - samples[:n].mean()
    t = np.arange(n) / sample_rate
    phasor = np.exp(-2j * np.pi * freq * t)
    return 2.0 * abs(np.dot(x, phasor)) / n


def measure_suppression(input: Waveform, output: Waveform, at: float) -> SuppressionReport:
    """Compare input and output at one harmonic and over the full band.

    Callers must pass aligned waveforms with any warm-up already dropped.
    Ratios are clamped at ``SUPPRESSION_CEILING_DB`` instead of diverging.
    """
    if input.sample_rate != output.sample_rate or len(input) != len(output):
        raise ValueError("input and output must share one sample grid")
    a_in = _harmonic_amplitude(input.samples, input.sample_rate, at)
    a_out = _harmonic_amplitude(output.samples, output.sample_rate, at)
    if a_in == 0.0:
        raise ValueError("input has no power at the probe frequency")
    harm = SUPPRESSION_CEILING_DB if a_out == 0.0 else min(
        SUPPRESSION_CEILING_DB, 20.0 * math.log10(a_in / a_out))
    rms_in = input.rms()
    rms_out = output.rms()
    broad = SUPPRESSION_CEILING_DB if rms_out == 0.0 else min(
        SUPPRESSION_CEILING_DB, 20.0 * math.log10(rms_in / rms_out))
    return SuppressionReport(harm, at, broad)
