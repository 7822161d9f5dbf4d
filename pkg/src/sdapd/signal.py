"""Sampled voltage waveforms: gate trains, capacitive feed-through, avalanche
pulses, and additive noise.

All operations are pure functions on immutable inputs; waveforms are
value-semantic and safe to share read-only across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import raw64_vec, u01_vec

# Fixed conversion between current-like quantities and the voltages carried by
# waveforms.  Arbitrary but documented: only ratios matter for suppression
# metrics, so a 50 ohm-equivalent keeps numbers in a familiar range.
TRANSIMPEDANCE_OHMS = 50.0

# 64 samples per 1 GHz gate period keeps fractional-delay interpolation error
# well below the cancellation floors probed by the suppression tests.
DEFAULT_SAMPLE_RATE = 64e9


class SamplingError(ValueError):
    """Raised when a sample rate or duration violates a sampling guard."""


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled voltage trace.

    Attributes
    ----------
    sample_rate : float
        Samples per second, > 0.
    start_time : float
        Time of the first sample, seconds.
    samples : np.ndarray
        Voltages in volts; non-empty, read-only.
    """

    sample_rate: float
    start_time: float
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(self.sample_rate, self.start_time, samples)

    def drop_front(self, n: int) -> "Waveform":
        """Discard the first n samples (e.g. a warm-up span)."""
        if not 0 <= n < self.samples.size:
            raise ValueError("cannot drop that many samples")
        return Waveform(self.sample_rate, self.start_time + n / self.sample_rate,
                        self.samples[n:])

    def _check_combinable(self, other: "Waveform") -> None:
        if self.sample_rate != other.sample_rate:
            raise ValueError("sample rates differ")
        if self.samples.size != other.samples.size:
            raise ValueError("lengths differ")
        if abs(self.start_time - other.start_time) > self.dt:
            raise ValueError("time grids misaligned by more than one sample")

    def __add__(self, other: "Waveform") -> "Waveform":
        self._check_combinable(other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "Waveform") -> "Waveform":
        self._check_combinable(other)
        return self.with_samples(self.samples - other.samples)

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))


@dataclass(frozen=True)
class GateConfig:
    """Square-wave gating signal on top of a DC bias.

    ``amplitude`` is the peak-to-peak swing of the ideal square wave;
    ``analog_bandwidth`` truncates its odd-harmonic series, modelling the RF
    chain's band limit.
    """

    frequency: float
    amplitude: float = 7.1
    dc_bias: float = 0.0
    analog_bandwidth: float = 5e9

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be > 0")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.analog_bandwidth < self.frequency:
            raise ValueError("analog_bandwidth must pass at least the fundamental")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency


@dataclass(frozen=True)
class PulseShape:
    """Normalized avalanche pulse shape.

    The sampled pulse for a charge Q is ``Q * amplitude_per_charge * s(t)``
    with s(t) of unit area, so its time integral is ``Q * amplitude_per_charge``
    volt-seconds.  With the default 50.0 scaling this is the charge flowing
    through the shared 50 ohm transimpedance.
    """

    kind: str = "raised-cosine"
    width: float = 150e-12
    amplitude_per_charge: float = TRANSIMPEDANCE_OHMS

    _KINDS = ("raised-cosine", "single-sided-exponential")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"kind must be one of {self._KINDS}")
        if self.width <= 0:
            raise ValueError("width must be > 0")

    def unit_area_samples(self, rel_times: np.ndarray) -> np.ndarray:
        """Evaluate the unit-area shape (1/s) at times relative to the pulse."""
        w = self.width
        if self.kind == "raised-cosine":
            out = np.zeros_like(rel_times)
            mask = np.abs(rel_times) <= w / 2
            # Hann pulse of width w has analytic area w/2.
            out[mask] = (1.0 + np.cos(2.0 * np.pi * rel_times[mask] / w)) / w
            return out
        out = np.zeros_like(rel_times)
        mask = rel_times >= 0.0
        out[mask] = np.exp(-rel_times[mask] / w) / w
        return out


DEFAULT_PULSE = PulseShape()


def synth_gate_train(cfg: GateConfig, duration: float, sample_rate: float) -> Waveform:
    """Synthesize a band-limited square gate train.

    The wave is the sum of odd harmonics k*f up to ``analog_bandwidth``, each
    with amplitude 4*(A/2)/(pi*k) so the ideal limit swings +-A/2 around
    ``dc_bias`` (peak-to-peak equals ``amplitude``).  When the duration is an
    integer number of periods the result is exactly periodic on the grid.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    if duration < 2.0 * cfg.period:
        raise ValueError("duration must cover at least two gate periods")
    if sample_rate < 8.0 * cfg.analog_bandwidth:
        raise SamplingError(
            f"sample_rate {sample_rate:g} below guard 8*analog_bandwidth "
            f"= {8.0 * cfg.analog_bandwidth:g}")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    out = np.full(n, cfg.dc_bias)
    half = cfg.amplitude / 2.0
    k = 1
    while k * cfg.frequency <= cfg.analog_bandwidth * (1.0 + 1e-12):
        out += (4.0 * half / (np.pi * k)) * np.sin(2.0 * np.pi * k * cfg.frequency * t)
        k += 2
    return Waveform(sample_rate, 0.0, out)


def capacitive_feedthrough(gate: Waveform, coupling: float) -> Waveform:
    """Deterministic derivative-like response of the diode to the gate edges.

    Returns ``TRANSIMPEDANCE_OHMS * coupling * dV/dt`` using central
    differences (one-sided at the endpoints).
    """
    if coupling <= 0:
        raise ValueError("coupling must be > 0")
    v = gate.samples
    if v.size < 3:
        raise ValueError("need at least 3 samples for a derivative")
    dvdt = np.empty_like(v)
    dvdt[1:-1] = (v[2:] - v[:-2]) * (0.5 * gate.sample_rate)
    dvdt[0] = (v[1] - v[0]) * gate.sample_rate
    dvdt[-1] = (v[-1] - v[-2]) * gate.sample_rate
    return gate.with_samples(TRANSIMPEDANCE_OHMS * coupling * dvdt)


def inject_avalanche(base: Waveform, time: float, charge: float,
                     shape: PulseShape = DEFAULT_PULSE) -> Waveform:
    """Add one avalanche pulse carrying the given charge.

    The pulse integrates to ``charge * shape.amplitude_per_charge``
    volt-seconds (within 0.5% at the default sample rate).  Injection is
    linear: multiple pulses simply add.
    """
    t0 = base.start_time
    t1 = base.start_time + (len(base) - 1) * base.dt
    if not t0 <= time <= t1:
        raise ValueError(f"injection time {time:g} outside waveform span [{t0:g}, {t1:g}]")
    if charge == 0.0:
        return base
    rel = base.times() - time
    kernel = shape.unit_area_samples(rel)
    # Normalize on the grid so the trapezoidal charge integral is exact even
    # for shapes with a step edge that sampling cannot represent analytically.
    area = np.trapezoid(kernel, dx=base.dt)
    if area <= 0.0:
        raise ValueError("pulse does not overlap the waveform span")
    pulse = (charge * shape.amplitude_per_charge / area) * kernel
    return base.with_samples(base.samples + pulse)


def add_noise(base: Waveform, rms: float, seed: int) -> Waveform:
    """Add zero-mean Gaussian noise from a seeded counter-based stream."""
    if rms < 0:
        raise ValueError("rms must be >= 0")
    if rms == 0.0:
        return base
    n = len(base)
    raw = raw64_vec(seed, np.arange(2 * n, dtype=np.uint64))
    u1 = ((raw[:n] >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53  # (0, 1]
    u2 = u01_vec(raw[n:])
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return base.with_samples(base.samples + rms * z)


def write_waveform_csv(wv: Waveform, path) -> None:
    """Export as CSV with header ``t_s,v_volts`` and round-trip-safe decimals."""
    with open(path, "w", newline="") as fh:
        fh.write("t_s,v_volts\n")
        for t, v in zip(wv.times(), wv.samples):
            fh.write(f"{float(t)!r},{float(v)!r}\n")


def read_waveform_csv(path) -> Waveform:
    times = []
    volts = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t_s,v_volts":
            raise ValueError(f"unexpected waveform CSV header: {header!r}")
        for line in fh:
            t, v = line.split(",")
            times.append(float(t))
            volts.append(float(v))
    if len(times) < 2:
        raise ValueError("waveform CSV must hold at least two samples")
    dt = times[1] - times[0]
    return Waveform(1.0 / dt, times[0], np.array(volts))
