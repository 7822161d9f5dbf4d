"""Measurement procedures and estimators: flux arithmetic, the net-efficiency
relation (forward and inverse), histogram-based afterpulse extraction, the
delay-scan experiment, bias sweeps, and the photocurrent charge estimator.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .apdsim import DetectorParams, PhotonSource, RunSummary, simulate_gates
from .rng import derive_seed
from .signal import GateConfig

PLANCK = 6.62607015e-34
LIGHT_SPEED = 2.99792458e8


class NoSignalError(RuntimeError):
    """Histogram peak does not rise above the dark baseline."""


class AmbiguousPeakError(RuntimeError):
    """Two histogram positions tie for the maximum; the run is photon-starved."""


@dataclass(frozen=True)
class CharacterizationResult:
    """One operating point: the (C, P_d, P_a, eta_net, q) tuple plus context."""

    count_rate_hz: float
    p_d_per_gate: float
    p_a: float
    eta_net: float
    q_c: float
    gate_frequency_hz: float
    photon_flux_per_s: float
    bias_v: float


@dataclass(frozen=True)
class PointCharacterization:
    """CharacterizationResult with the raw runs it was derived from."""

    result: CharacterizationResult
    illuminated: RunSummary
    dark: RunSummary
    peak_index: int


@dataclass(frozen=True)
class DelayScanResult:
    delays_s: np.ndarray
    count_rates_hz: np.ndarray
    photocurrents_a: np.ndarray
    peak_delays_s: list
    peak_fwhms_s: list
    dark_count_rate_hz: float


def power_to_flux(power: float, wavelength: float) -> float:
    """Photon flux (photons/s) carried by an optical power at one wavelength."""
    if power < 0:
        raise ValueError("power must be >= 0")
    if wavelength <= 0:
        raise ValueError("wavelength must be > 0")
    return power * wavelength / (PLANCK * LIGHT_SPEED)


def source_from_power(power: float, wavelength: float, pulse_rate: float,
                      **kwargs) -> PhotonSource:
    flux = power_to_flux(power, wavelength)
    return PhotonSource(wavelength=wavelength, pulse_rate=pulse_rate,
                        mean_photons_per_pulse=flux / pulse_rate, **kwargs)


def eta_net(count_rate: float, p_d: float, p_a: float, flux: float,
            frequency: float) -> float:
    """Net detection efficiency: dark counts removed per gate, afterpulses per
    count, the remainder normalized to the photon flux.

    The raw value is returned even when negative (count rate below the dark
    rate); clamping is the caller's decision.
    """
    if flux <= 0:
        raise ValueError("flux must be > 0")
    if frequency <= 0:
        raise ValueError("frequency must be > 0")
    if p_a <= -1:
        raise ValueError("p_a must exceed -1")
    return ((count_rate - p_d * frequency) / flux) / (1.0 + p_a)


def extract_afterpulse(histogram, dark_baseline, *,
                       clamp_bins: bool = False) -> tuple[float, int]:
    """Afterpulse probability per photon count from a gate-position histogram.

    With illumination on one position of the frame, the excess of every other
    position over the dark baseline counts the afterpulses; the peak excess
    counts the photon detections.  Returns ``(p_a, peak_index)``.

    ``clamp_bins`` zeroes negative per-bin excesses before summing; that
    guards against negative estimates at very low statistics but biases the
    estimator high once dark fluctuations are comparable to the per-bin
    afterpulse signal, so it is off by default and the total is clamped
    instead.
    """
    hist = np.asarray(histogram, dtype=np.float64)
    dark = np.asarray(dark_baseline, dtype=np.float64)
    if hist.shape != dark.shape or hist.ndim != 1 or hist.size < 2:
        raise ValueError("histogram and baseline must be equal-length 1-D arrays")
    peak = int(np.argmax(hist))
    if np.count_nonzero(hist == hist[peak]) > 1:
        raise AmbiguousPeakError("two positions tie for the histogram maximum")
    denom = hist[peak] - dark[peak]
    if denom <= 0:
        raise NoSignalError("histogram peak does not exceed the dark baseline")
    excess = np.delete(hist - dark, peak)
    if clamp_bins:
        numerator = float(np.sum(np.maximum(excess, 0.0)))
    else:
        numerator = max(0.0, float(np.sum(excess)))
    return numerator / float(denom), peak


def estimate_charge(photocurrent: float, count_rate: float) -> float:
    """Total charge per detection event: photocurrent over count rate."""
    if count_rate <= 0:
        raise ValueError("count_rate must be > 0")
    return photocurrent / count_rate


def characterize(params: DetectorParams, source: PhotonSource, gate: GateConfig,
                 n_gates: int, seed: int,
                 on_no_signal: str = "raise") -> PointCharacterization:
    """Full characterization at one bias: a laser-off run for the dark
    probability and baseline histogram, an illuminated run for the count rate
    and afterpulse histogram, then the estimator chain.

    ``on_no_signal="nan"`` turns an undefined afterpulse estimate (photon
    signal indistinguishable from dark) into ``p_a = NaN`` with the net
    efficiency computed as if P_a were zero, instead of raising; sweeps use
    this so one starved point cannot abort the rest of the grid.
    """
    divisor = round(gate.frequency / source.pulse_rate)
    dark_ev, dark = simulate_gates(params, None, gate, n_gates,
                                   derive_seed(seed, 0), histogram_bins=divisor)
    ill_ev, ill = simulate_gates(params, source, gate, n_gates,
                                 derive_seed(seed, 1))
    p_d = dark.counts / dark.gates
    c = ill.count_rate_hz
    try:
        p_a, peak = extract_afterpulse(ill.histogram, dark.histogram)
        p_a_for_eta = p_a
    except (NoSignalError, AmbiguousPeakError):
        if on_no_signal != "nan":
            raise
        p_a, peak = float("nan"), -1
        p_a_for_eta = 0.0
    flux = source.flux
    eta = eta_net(c, p_d, p_a_for_eta, flux, gate.frequency)
    q = estimate_charge(ill.photocurrent_a, c) if ill.counts > 0 else 0.0
    result = CharacterizationResult(
        count_rate_hz=c, p_d_per_gate=p_d, p_a=p_a, eta_net=eta, q_c=q,
        gate_frequency_hz=gate.frequency, photon_flux_per_s=flux,
        bias_v=gate.dc_bias)
    return PointCharacterization(result, ill, dark, peak)


def characterization_sigmas(point: PointCharacterization) -> dict:
    """Poisson/binomial 1-sigma errors of the recovered quantities.

    Counts arrive in afterpulse clusters, which inflates the variance of the
    totals by the cluster Fano factor (1 + m)/(1 - m) with m = P_a/(1 + P_a).
    """
    res = point.result
    ill, dark = point.illuminated, point.dark
    m = max(res.p_a, 0.0) / (1.0 + max(res.p_a, 0.0))
    fano = (1.0 + m) / (1.0 - m)
    sig_pd = math.sqrt(max(dark.counts, 1) * fano) / dark.gates
    sig_c = math.sqrt(max(ill.counts, 1) * fano) / ill.wall_time_s
    peak = point.peak_index
    var_num = float(np.sum(np.delete(ill.histogram + dark.histogram, peak))) * fano
    den = float(ill.histogram[peak] - dark.histogram[peak])
    var_den = float(ill.histogram[peak] + dark.histogram[peak]) * fano
    sig_pa = math.sqrt(max(var_num, 1.0) + res.p_a**2 * var_den) / den
    f = res.gate_frequency_hz
    net = res.count_rate_hz - res.p_d_per_gate * f
    rel2 = ((sig_c**2 + (f * sig_pd)**2) / net**2 if net != 0 else 0.0)
    rel2 += sig_pa**2 / (1.0 + res.p_a)**2
    sig_eta = abs(res.eta_net) * math.sqrt(rel2)
    return {"count_rate_hz": sig_c, "p_d_per_gate": sig_pd, "p_a": sig_pa,
            "eta_net": sig_eta}


def bias_sweep(params: DetectorParams, source: PhotonSource, gate: GateConfig,
               biases, gates_per_point: int, seed: int,
               threads: int = 1) -> list[CharacterizationResult]:
    """Characterize every bias on the grid; points run on independent seeded
    substreams so results are identical for any thread count."""
    biases = list(biases)
    if len(biases) < 5:
        raise ValueError("bias sweep needs at least 5 points")

    def one(i: int) -> CharacterizationResult:
        g = replace(gate, dc_bias=float(biases[i]))
        return characterize(params, source, g, gates_per_point,
                            derive_seed(seed, 1000 + i),
                            on_no_signal="nan").result

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(biases))))
    return [one(i) for i in range(len(biases))]


def _half_crossings(x: np.ndarray, y: np.ndarray, i_peak: int, half: float):
    """Linear-interpolated positions where y crosses ``half`` on each flank."""
    left = None
    for j in range(i_peak, 0, -1):
        if y[j - 1] <= half <= y[j]:
            frac = (half - y[j - 1]) / (y[j] - y[j - 1])
            left = x[j - 1] + frac * (x[j] - x[j - 1])
            break
    right = None
    for j in range(i_peak, len(y) - 1):
        if y[j + 1] <= half <= y[j]:
            frac = (y[j] - half) / (y[j] - y[j + 1])
            right = x[j] + frac * (x[j + 1] - x[j])
            break
    return left, right


def run_delay_scan(params: DetectorParams, source: PhotonSource,
                   gate: GateConfig, delays, gates_per_point: int, seed: int,
                   threads: int = 1) -> DelayScanResult:
    """Record count rate and photocurrent against the laser pulse delay and
    locate the response peaks and their widths."""
    delays = np.asarray(list(delays), dtype=np.float64)
    if delays.size < 3:
        raise ValueError("delay grid needs at least 3 points")
    step = float(np.max(np.diff(delays)))
    if step > params.gate_window_fwhm / 4.0 + 1e-15:
        raise ValueError("delay grid step must be <= gate_window_fwhm / 4")

    def one(i: int):
        src = replace(source, delay=float(delays[i]))
        _, summary = simulate_gates(params, src, gate, gates_per_point,
                                    derive_seed(seed, 2000 + i))
        return summary.count_rate_hz, summary.photocurrent_a

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(delays.size)))
    else:
        rows = [one(i) for i in range(delays.size)]
    rates = np.array([r[0] for r in rows])
    currents = np.array([r[1] for r in rows])

    _, dark_summary = simulate_gates(params, None, gate, gates_per_point,
                                     derive_seed(seed, 1))
    baseline = dark_summary.count_rate_hz

    # Peaks: local maxima above the midpoint between baseline and global max.
    level = baseline + 0.5 * (rates.max() - baseline)
    peak_delays = []
    peak_fwhms = []
    for i in range(1, delays.size - 1):
        if rates[i] >= level and rates[i] >= rates[i - 1] and rates[i] > rates[i + 1]:
            half = baseline + 0.5 * (rates[i] - baseline)
            left, right = _half_crossings(delays, rates, i, half)
            if left is not None and right is not None:
                peak_delays.append(0.5 * (left + right))
                peak_fwhms.append(right - left)
    return DelayScanResult(delays, rates, currents, peak_delays, peak_fwhms,
                           baseline)


# --- planting -------------------------------------------------------------

def _clipped_normal_mean(mu: float, sigma: float) -> float:
    """Mean of max(0, Normal(mu, sigma)); the per-avalanche charge model."""
    if sigma == 0.0:
        return max(mu, 0.0)
    z = mu / sigma
    phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    big_phi = 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return mu * big_phi + sigma * phi


def _registered_fraction(mu: float, sigma: float, thresh: float) -> float:
    """P(charge >= thresh) for the clipped-normal charge draw."""
    if sigma == 0.0:
        return 1.0 if mu >= thresh else 0.0
    return 0.5 * (1.0 + math.erf((mu - thresh) / (sigma * math.sqrt(2.0))))


@dataclass(frozen=True)
class PlantedPoint:
    params: DetectorParams
    source: PhotonSource
    gate: GateConfig
    bias_v: float


def plant_operating_point(frequency: float, eta: float, p_a: float, p_d: float,
                          flux: float = 1.0e6, sync_divisor: int = 64,
                          charge_dispersion: float = 0.2,
                          detect_threshold_charge: float = 0.015e-12,
                          detrap_tau: float = 5e-9) -> PlantedPoint:
    """Build a detector whose recovered characterization equals the targets.

    Inverts the full estimator chain: the afterpulse branching factor, the
    registered fraction of the clipped-normal charge draw, and the Poisson
    thinning of the photon click probability, so the estimators are unbiased
    at (eta, p_a, p_d) in expectation.
    """
    from .apdsim import DEFAULT_TRAP_COEFF, default_jitter_fwhm

    bias = 52.0
    t_gate = 1.0 / frequency
    sum_w = math.exp(-t_gate / detrap_tau)
    trap_coeff = DEFAULT_TRAP_COEFF
    m = p_a / (1.0 + p_a)

    # Mean charge solving trap_coeff * sum_w * E[charge] = m.
    target = m / (trap_coeff * sum_w)
    qbar = brentq(
        lambda q: _clipped_normal_mean(q, charge_dispersion * q) - target,
        1e-18, 1e-9, xtol=1e-24)
    p_reg = _registered_fraction(qbar, charge_dispersion * qbar,
                                 detect_threshold_charge)

    mu_pulse = flux / (frequency / sync_divisor)
    p_click_needed = mu_pulse * eta / p_reg
    if p_click_needed >= 1.0:
        raise ValueError("target efficiency unreachable at this flux")
    eta_det = -math.log(1.0 - p_click_needed) / mu_pulse
    if eta_det >= 1.0:
        raise ValueError("required detector efficiency is not a probability")

    dark_raw = p_d * (1.0 - m) / p_reg
    v_half = bias - 6.0  # logistic saturated: eta(bias) == eta_max exactly
    params = DetectorParams(
        eta_max=eta_det, v_half=v_half, v_slope=0.1,
        dark_prob=dark_raw, dark_ref_bias=bias, dark_bias_exponent=3.0,
        charge_slope=qbar / (bias - 51.0), v_breakdown=51.0,
        charge_dispersion=charge_dispersion,
        detect_threshold_charge=detect_threshold_charge,
        trap_coeff=trap_coeff, detrap_tau=detrap_tau,
        jitter_fwhm=default_jitter_fwhm(frequency))
    source = PhotonSource(pulse_rate=frequency / sync_divisor,
                          mean_photons_per_pulse=mu_pulse)
    gate = GateConfig(frequency=frequency, dc_bias=bias)
    return PlantedPoint(params, source, gate, bias)


# --- serialization ---------------------------------------------------------

BIAS_SWEEP_HEADER = "bias_v,count_rate_hz,p_d_per_gate,p_a,eta_net,q_c"
DELAY_SCAN_HEADER = "delay_s,count_rate_hz,photocurrent_a"


def write_bias_sweep_csv(results: list[CharacterizationResult], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(BIAS_SWEEP_HEADER + "\n")
        for r in results:
            fh.write(f"{r.bias_v!r},{r.count_rate_hz!r},{r.p_d_per_gate!r},"
                     f"{r.p_a!r},{r.eta_net!r},{r.q_c!r}\n")


def write_delay_scan_csv(result: DelayScanResult, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(DELAY_SCAN_HEADER + "\n")
        for d, c, i in zip(result.delays_s, result.count_rates_hz,
                           result.photocurrents_a):
            fh.write(f"{float(d)!r},{float(c)!r},{float(i)!r}\n")


def characterization_to_json(result: CharacterizationResult) -> str:
    return json.dumps({
        "count_rate_hz": result.count_rate_hz,
        "p_d_per_gate": result.p_d_per_gate,
        "p_a": result.p_a,
        "eta_net": result.eta_net,
        "q_c": result.q_c,
        "gate_frequency_hz": result.gate_frequency_hz,
        "photon_flux_per_s": result.photon_flux_per_s,
        "bias_v": result.bias_v,
    }, sort_keys=True)


def linear_fit(x, y) -> dict:
    """Ordinary least squares with R^2 and the intercept's standard error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 3:
        raise ValueError("need at least 3 paired points")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = x.size - 2
    sigma2 = ss_res / dof if dof > 0 else 0.0
    se_intercept = math.sqrt(sigma2 * (1.0 / x.size + xm * xm / sxx))
    se_slope = math.sqrt(sigma2 / sxx)
    return {"slope": slope, "intercept": intercept, "r_squared": r2,
            "se_slope": se_slope, "se_intercept": se_intercept}
