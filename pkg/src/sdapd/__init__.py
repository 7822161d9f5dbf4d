"""Simulator for a gated single-photon avalanche photodiode read out through a
tunable self-differencing cancellation front-end."""

__version__ = "0.1.0"

from .apdsim import (DetectorParams, GateEvents, GateOutcome, PhotonSource,
                     RunSummary, efficiency_at, expected_afterpulse_per_count,
                     simulate_gates)
from .protocol import (CharacterizationResult, DelayScanResult, bias_sweep,
                       characterize, estimate_charge, eta_net,
                       extract_afterpulse, plant_operating_point, power_to_flux,
                       run_delay_scan)
from .sdcore import (SdConfig, SuppressionReport, apply_sd, measure_suppression,
                     tune_to_frequency)
from .signal import (GateConfig, PulseShape, Waveform, add_noise,
                     capacitive_feedthrough, inject_avalanche, synth_gate_train)

__all__ = [
    "DetectorParams", "GateEvents", "GateOutcome", "PhotonSource", "RunSummary",
    "efficiency_at", "expected_afterpulse_per_count", "simulate_gates",
    "CharacterizationResult", "DelayScanResult", "bias_sweep", "characterize",
    "estimate_charge", "eta_net", "extract_afterpulse", "plant_operating_point",
    "power_to_flux", "run_delay_scan",
    "SdConfig", "SuppressionReport", "apply_sd", "measure_suppression",
    "tune_to_frequency",
    "GateConfig", "PulseShape", "Waveform", "add_noise",
    "capacitive_feedthrough", "inject_avalanche", "synth_gate_train",
]
