"""Command-line entry point exposing every experiment.

Configuration is a flat, diff-friendly ``key = value`` text format with block
prefixes (``detector.eta_max = 0.3``).  Every run writes a ``manifest.json``
recording the fully resolved configuration, the seed, and every emitted file;
re-running with the manifest as the config reproduces the outputs
byte-for-byte.

Exit codes: 0 success, 2 validation failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .apdsim import DetectorParams, PhotonSource, simulate_gates
from .protocol import (bias_sweep, characterize, characterization_sigmas,
                       characterization_to_json, linear_fit,
                       plant_operating_point, run_delay_scan, source_from_power,
                       write_bias_sweep_csv, write_delay_scan_csv)
from .rng import derive_seed
from .sdcore import (SdConfig, apply_sd, measure_suppression, tune_to_frequency,
                     warmup_samples)
from .signal import (DEFAULT_SAMPLE_RATE, GateConfig, add_noise,
                     capacitive_feedthrough, inject_avalanche, synth_gate_train,
                     write_waveform_csv)

EXPERIMENTS = ("waveform-demo", "sd-cancel", "delay-scan", "characterize",
               "bias-sweep", "afterpulse-charge")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def parse_config_text(text: str) -> dict:
    """Parse the flat key = value format; '#' starts a comment."""
    config: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        config[key] = _parse_value(value)
    return config


def _parse_value(value: str):
    if "," in value:
        return [_parse_value(v.strip()) for v in value.split(",")]
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def load_config(path: Path) -> dict:
    text = path.read_text()
    if text.lstrip().startswith("{"):
        manifest = json.loads(text)
        if "config" not in manifest:
            raise ConfigError("JSON config must be a manifest with a 'config' map")
        return dict(manifest["config"])
    return parse_config_text(text)


def _block(config: dict, prefix: str) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in config.items() if k.startswith(prefix + ".")}


def _resolve_plant(config: dict) -> dict:
    """Expand a plant.* block into explicit detector/source/gate keys.

    Explicit keys win over planted ones, and the planted values land in the
    resolved config so a manifest rerun skips the planting step entirely.
    """
    plant = _block(config, "plant")
    if not plant:
        return config
    try:
        point = plant_operating_point(
            frequency=float(plant["frequency"]),
            eta=float(plant["eta_net"]),
            p_a=float(plant["p_a"]),
            p_d=float(plant["p_d"]),
            flux=float(plant.get("flux", 1.0e6)),
            sync_divisor=int(plant.get("divisor", 64)))
    except KeyError as exc:
        raise ConfigError(f"plant block missing key: {exc}") from exc
    resolved = dict(config)
    for field in dataclasses.fields(DetectorParams):
        resolved.setdefault(f"detector.{field.name}",
                            getattr(point.params, field.name))
    for field in dataclasses.fields(PhotonSource):
        resolved.setdefault(f"source.{field.name}",
                            getattr(point.source, field.name))
    for field in dataclasses.fields(GateConfig):
        resolved.setdefault(f"gate.{field.name}", getattr(point.gate, field.name))
    for key in list(resolved):
        if key.startswith("plant."):
            del resolved[key]
    return resolved


def _build_detector(config: dict) -> DetectorParams:
    block = _block(config, "detector")
    try:
        return DetectorParams(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"detector block invalid: {exc}") from exc


def _build_source(config: dict) -> PhotonSource:
    block = _block(config, "source")
    power = block.pop("power_w", None)
    try:
        if power is not None:
            pulse_rate = block.pop("pulse_rate")
            wavelength = block.pop("wavelength", 1550e-9)
            return source_from_power(float(power), float(wavelength),
                                     float(pulse_rate), **block)
        return PhotonSource(**block)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"source block invalid: {exc}") from exc


def _build_gate(config: dict) -> GateConfig:
    block = _block(config, "gate")
    try:
        return GateConfig(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"gate block invalid: {exc}") from exc


def _build_sd(config: dict) -> SdConfig:
    block = _block(config, "sd")
    tune = block.pop("tune_to_hz", None)
    try:
        cfg = SdConfig(**block)
        if tune is not None:
            cfg = tune_to_frequency(float(tune), cfg)
        return cfg
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sd block invalid: {exc}") from exc


def _require_gates(config: dict, key: str = "run.n_gates") -> int:
    n = config.get(key)
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"{key} must be a positive integer, got {n!r}")
    return n


def _json_bytes(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


class _Emitter:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.out_dir / name

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(_json_bytes(obj))


def _exp_waveform_demo(config, emit, seed, threads):
    frequencies = config.get("demo.frequencies", [1e9, 2e9, 3e9])
    if not isinstance(frequencies, list):
        frequencies = [frequencies]
    duration = float(config.get("demo.duration", 20e-9))
    sample_rate = float(config.get("demo.sample_rate", DEFAULT_SAMPLE_RATE))
    coupling = float(config.get("demo.coupling_f", 0.1e-12))
    charge = float(config.get("demo.charge_c", 0.05e-12))
    noise_rms = float(config.get("demo.noise_rms", 0.5e-3))
    amplitude = float(config.get("gate.amplitude", 7.1))
    bandwidth = float(config.get("gate.analog_bandwidth", 5e9))
    inject_at = float(config.get("demo.inject_time", duration / 2))
    for i, freq in enumerate(frequencies):
        freq = float(freq)
        gate = GateConfig(frequency=freq, amplitude=amplitude, dc_bias=0.0,
                          analog_bandwidth=bandwidth)
        cycles = max(1, round(1e-9 * freq))
        sd = SdConfig(delay_cycles=cycles, nominal_delay=cycles / freq)
        train = synth_gate_train(gate, duration, sample_rate)
        feed = capacitive_feedthrough(train, coupling)
        burst = inject_avalanche(feed, inject_at, charge)
        noisy = add_noise(burst, noise_rms, derive_seed(seed, 100 + i))
        out = apply_sd(noisy, sd)
        tag = f"{freq / 1e9:g}ghz"
        write_waveform_csv(noisy, emit.path(f"sd_input_{tag}.csv"))
        write_waveform_csv(out, emit.path(f"sd_output_{tag}.csv"))


def _exp_sd_cancel(config, emit, seed, threads):
    gate = _build_gate(config)
    sd = _build_sd(config)
    duration = float(config.get("demo.duration", 40e-9))
    sample_rate = float(config.get("demo.sample_rate", DEFAULT_SAMPLE_RATE))
    train = synth_gate_train(gate, duration, sample_rate)
    out = apply_sd(train, sd)
    skip = warmup_samples(sd, sample_rate)
    per = max(1, int(round(sample_rate / gate.frequency)))
    skip = ((skip + per - 1) // per) * per
    report = measure_suppression(train.drop_front(skip), out.drop_front(skip),
                                 gate.frequency)
    write_waveform_csv(train, emit.path("sd_input.csv"))
    write_waveform_csv(out, emit.path("sd_output.csv"))
    emit.path("suppression.json").write_text(json.dumps(json.loads(
        report.to_json()), sort_keys=True, indent=2) + "\n")


def _exp_delay_scan(config, emit, seed, threads):
    params = _build_detector(config)
    source = _build_source(config)
    gate = _build_gate(config)
    start = float(config.get("scan.delay_start", -1.2e-9))
    stop = float(config.get("scan.delay_stop", 1.2e-9))
    step = float(config.get("scan.delay_step", 20e-12))
    gates_per_point = _require_gates(config, "scan.gates_per_point")
    n_steps = int(round((stop - start) / step))
    delays = [start + k * step for k in range(n_steps + 1)]
    result = run_delay_scan(params, source, gate, delays, gates_per_point,
                            seed, threads=threads)
    write_delay_scan_csv(result, emit.path("delay_scan.csv"))
    emit.write_json("delay_scan.json", {
        "peak_delays_s": list(result.peak_delays_s),
        "peak_fwhms_s": list(result.peak_fwhms_s),
        "dark_count_rate_hz": result.dark_count_rate_hz,
        "gate_frequency_hz": gate.frequency,
    })


def _exp_characterize(config, emit, seed, threads):
    params = _build_detector(config)
    source = _build_source(config)
    gate = _build_gate(config)
    n_gates = _require_gates(config)
    point = characterize(params, source, gate, n_gates, seed)
    emit.path("characterization.json").write_text(
        json.dumps(json.loads(characterization_to_json(point.result)),
                   sort_keys=True, indent=2) + "\n")
    emit.write_json("characterization_sigma.json", characterization_sigmas(point))
    with open(emit.path("histogram.csv"), "w", newline="") as fh:
        fh.write("position,counts,dark_counts\n")
        for i, (n, d) in enumerate(zip(point.illuminated.histogram,
                                       point.dark.histogram)):
            fh.write(f"{i},{int(n)},{int(d)}\n")
    if config.get("run.export_events"):
        from .apdsim import write_events_csv
        # counter-based draws: replaying the illuminated run's substream
        # reproduces the exact event stream behind the characterization
        events, summary = simulate_gates(params, source, gate, n_gates,
                                         derive_seed(seed, 1))
        write_events_csv(events, emit.path("events.csv"))
        emit.path("run_summary.json").write_text(
            json.dumps(json.loads(summary.to_json()), sort_keys=True,
                       indent=2) + "\n")


def _sweep_results(config, seed, threads):
    params = _build_detector(config)
    source = _build_source(config)
    gate = _build_gate(config)
    biases = config.get("sweep.biases")
    if not isinstance(biases, list) or len(biases) < 5:
        raise ConfigError("sweep.biases must list at least 5 bias voltages")
    gates_per_point = _require_gates(config, "sweep.gates_per_point")
    return bias_sweep(params, source, gate, [float(b) for b in biases],
                      gates_per_point, seed, threads=threads)


def _exp_bias_sweep(config, emit, seed, threads):
    results = _sweep_results(config, seed, threads)
    write_bias_sweep_csv(results, emit.path("bias_sweep.csv"))
    emit.write_json("bias_sweep.json",
                    [json.loads(characterization_to_json(r)) for r in results])


def _exp_afterpulse_charge(config, emit, seed, threads):
    results = _sweep_results(config, seed, threads)
    threshold = config.get("sweep.saturation_bias_v")
    if threshold is None:
        raise ConfigError("afterpulse-charge needs sweep.saturation_bias_v")
    write_bias_sweep_csv(results, emit.path("bias_sweep.csv"))
    saturated = [r for r in results if r.bias_v >= float(threshold)]
    if len(saturated) < 3:
        raise ConfigError("fewer than 3 sweep points above saturation_bias_v")
    fit = linear_fit([r.q_c for r in saturated], [r.p_a for r in saturated])
    emit.write_json("afterpulse_charge.json", {
        "slope_per_c": fit["slope"],
        "intercept": fit["intercept"],
        "r_squared": fit["r_squared"],
        "se_slope": fit["se_slope"],
        "se_intercept": fit["se_intercept"],
        "saturation_bias_v": float(threshold),
        "points_used": len(saturated),
    })


_RUNNERS = {
    "waveform-demo": _exp_waveform_demo,
    "sd-cancel": _exp_sd_cancel,
    "delay-scan": _exp_delay_scan,
    "characterize": _exp_characterize,
    "bias-sweep": _exp_bias_sweep,
    "afterpulse-charge": _exp_afterpulse_charge,
}


def run(config: dict, out_dir: Path, seed: int, threads: int = 1) -> list[str]:
    """Execute the configured experiment; returns the emitted file names."""
    config = _resolve_plant(config)
    experiment = config.get("run.experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"run.experiment must be one of {EXPERIMENTS}, "
                          f"got {experiment!r}")
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    out_dir.mkdir(parents=True, exist_ok=True)
    emit = _Emitter(out_dir)
    _RUNNERS[experiment](config, emit, seed, threads)
    manifest = {
        "experiment": experiment,
        "seed": seed,
        "config": {k: config[k] for k in sorted(config)},
        "outputs": sorted(emit.names),
        "version": __version__,
    }
    (out_dir / "manifest.json").write_text(_json_bytes(manifest))
    return sorted(emit.names)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sdapd",
        description="Gated single-photon APD simulator with a tunable "
                    "self-differencing front-end")
    parser.add_argument("--config", required=True, type=Path,
                        help="flat key=value config file or a manifest.json")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides run.seed)")
    parser.add_argument("--out", required=True, type=Path,
                        help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallelism cap; never changes outputs")
    parser.add_argument("--experiment", choices=EXPERIMENTS, default=None,
                        help="override run.experiment")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.experiment is not None:
            config["run.experiment"] = args.experiment
        seed = args.seed if args.seed is not None else config.get("run.seed")
        if seed is None:
            raise ConfigError("a seed is mandatory: pass --seed or run.seed")
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        config["run.seed"] = seed
        run(config, args.out, seed, threads=args.threads)
    except (ConfigError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
