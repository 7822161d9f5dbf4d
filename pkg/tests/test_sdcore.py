import math

import numpy as np
import pytest

from sdapd.sdcore import (SdConfig, SUPPRESSION_CEILING_DB, TuningRangeError,
                          apply_sd, measure_suppression, tune_to_frequency,
                          warmup_samples)
from sdapd.signal import (DEFAULT_SAMPLE_RATE, GateConfig, Waveform,
                          inject_avalanche, synth_gate_train)

FS = DEFAULT_SAMPLE_RATE


def square_1ghz(duration=40e-9, dc=0.0):
    cfg = GateConfig(frequency=1e9, amplitude=7.1, dc_bias=dc,
                     analog_bandwidth=5e9)
    return synth_gate_train(cfg, duration, FS)


def trimmed(wv, out, cfg, freq):
    """Drop warm-up rounded to whole periods so projections stay leakage-free."""
    skip = warmup_samples(cfg, FS)
    per = int(round(FS / freq))
    skip = ((skip + per - 1) // per) * per
    return wv.drop_front(skip), out.drop_front(skip)


class TestApplySd:
    def test_perfect_balance_cancels_periodic(self):
        cfg = SdConfig(1, 1e-9, 0.0, 0.5)
        wv = square_1ghz()
        out = apply_sd(wv, cfg)
        a, b = trimmed(wv, out, cfg, 1e9)
        residual = b.rms() / a.rms()
        assert residual < 10 ** (-80 / 20)

    @pytest.mark.parametrize("delta_ps", [0.25, 1.0, 5.0, 20.0])
    def test_sinusoid_residual_closed_form(self, delta_ps):
        # r = 0.5, delay off by delta from the period: residual amplitude is
        # sin(pi f delta) times the input amplitude
        f = 1e9
        t = np.arange(int(40e-9 * FS)) / FS
        wv = Waveform(FS, 0.0, np.sin(2 * np.pi * f * t))
        cfg = SdConfig(1, 1e-9, delta_ps * 1e-12, 0.5)
        out = apply_sd(wv, cfg)
        a, b = trimmed(wv, out, cfg, f)
        rep = measure_suppression(a, b, f)
        expected_db = 20 * math.log10(1.0 / math.sin(math.pi * f * delta_ps * 1e-12))
        assert rep.harmonic_suppression_db == pytest.approx(expected_db, abs=0.2)

    def test_pulse_replica_inverted_and_scaled(self):
        r = 0.3
        cfg = SdConfig(1, 1e-9, 0.0, r)
        base = Waveform(FS, 0.0, np.zeros(4096))
        wv = inject_avalanche(base, 30e-9, 0.05e-12)
        out = apply_sd(wv, cfg)
        d = int(round(cfg.effective_delay * FS))
        peak_idx = int(np.argmax(wv.samples))
        direct = out.samples[peak_idx]
        replica = out.samples[peak_idx + d]
        assert direct == pytest.approx((1 - r) * wv.samples[peak_idx], rel=1e-12)
        assert replica == pytest.approx(-r * wv.samples[peak_idx], rel=1e-12)
        assert replica / direct == pytest.approx(-r / (1 - r), rel=1e-12)

    def test_linearity(self):
        cfg = SdConfig(1, 1e-9, 7e-12, 0.45)
        rng = np.random.default_rng(1)
        x = Waveform(FS, 0.0, rng.normal(size=512))
        y = Waveform(FS, 0.0, rng.normal(size=512))
        a, b = 1.7, -0.4
        combo = x.with_samples(a * x.samples + b * y.samples)
        lhs = apply_sd(combo, cfg).samples
        rhs = a * apply_sd(x, cfg).samples + b * apply_sd(y, cfg).samples
        assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-12)

    def test_harmonic_suppression_monotone_in_delay_error(self):
        f = 1e9
        wv = square_1ghz()
        last = math.inf
        for delta in np.linspace(0.0, 0.5 / f, 9):
            cfg = SdConfig(1, 1e-9, delta, 0.5, trim_max=0.5e-9)
            out = apply_sd(wv, cfg)
            a, b = trimmed(wv, out, cfg, f)
            rep = measure_suppression(a, b, f)
            assert rep.harmonic_suppression_db <= last + 0.1
            last = rep.harmonic_suppression_db

    def test_rejects_short_input(self):
        cfg = SdConfig(1, 1e-9, 0.0, 0.5)
        wv = Waveform(FS, 0.0, np.ones(64))
        with pytest.raises(ValueError):
            apply_sd(wv, cfg)


class TestTuneToFrequency:
    def test_trim_arithmetic(self):
        cfg = SdConfig(1, 0.9875e-9, 0.0, 0.5)
        tuned = tune_to_frequency(1.0e9, cfg)
        assert tuned.stretcher_trim == pytest.approx(12.5e-12, rel=1e-9)
        assert tuned.effective_delay == pytest.approx(1e-9, rel=1e-12)

    def test_out_of_band_names_interval(self):
        cfg = SdConfig(1, 0.9875e-9, 0.0, 0.5)
        lo, hi = cfg.frequency_band
        assert hi == pytest.approx(1.0126582e9, rel=1e-6)
        assert lo == pytest.approx(1.0 / (0.9875e-9 + 45e-12), rel=1e-12)
        with pytest.raises(TuningRangeError) as err:
            tune_to_frequency(0.950e9, cfg)
        assert f"{lo:.9g}" in str(err.value) and f"{hi:.9g}" in str(err.value)

    def test_spanning_band_endpoints(self):
        cfg = SdConfig.spanning(0.987e9, 1.033e9)
        tune_to_frequency(0.987e9, cfg)
        tune_to_frequency(1.033e9, cfg)
        with pytest.raises(TuningRangeError):
            tune_to_frequency(0.987e9 - 1e3, cfg)
        with pytest.raises(TuningRangeError):
            tune_to_frequency(1.033e9 + 1e3, cfg)

    def test_round_trip_cancellation(self):
        cfg = SdConfig.spanning(0.987e9, 1.033e9)
        for target in (0.987e9, 1.001e9, 1.0177e9, 1.033e9):
            tuned = tune_to_frequency(target, cfg)
            gate = GateConfig(frequency=target, amplitude=7.1,
                              analog_bandwidth=5e9)
            wv = synth_gate_train(gate, 40e-9, FS)
            out = apply_sd(wv, tuned)
            a, b = trimmed(wv, out, tuned, target)
            n = int(round(math.floor(len(a) * target / FS) * FS / target))
            rep = measure_suppression(
                Waveform(FS, 0.0, a.samples[:n]),
                Waveform(FS, 0.0, b.samples[:n]), target)
            assert rep.broadband_cancellation_db >= 60.0


class TestMeasureSuppression:
    def test_identity_gives_zero(self):
        wv = square_1ghz(duration=10e-9)
        rep = measure_suppression(wv, wv, 1e9)
        assert rep.harmonic_suppression_db == pytest.approx(0.0, abs=1e-9)
        assert rep.broadband_cancellation_db == pytest.approx(0.0, abs=1e-9)

    def test_zero_output_clamps_at_ceiling(self):
        wv = square_1ghz(duration=10e-9)
        silent = wv.with_samples(np.zeros(len(wv)))
        rep = measure_suppression(wv, silent, 1e9)
        assert rep.harmonic_suppression_db == SUPPRESSION_CEILING_DB
        assert rep.broadband_cancellation_db == SUPPRESSION_CEILING_DB

    def test_split_ratio_broadband_closed_form(self):
        wv = square_1ghz()
        for r in (0.5063, 0.52, 0.48):
            cfg = SdConfig(1, 1e-9, 0.0, r)
            out = apply_sd(wv, cfg)
            a, b = trimmed(wv, out, cfg, 1e9)
            rep = measure_suppression(a, b, 1e9)
            expected = 20 * math.log10(1.0 / abs(1 - 2 * r))
            assert rep.broadband_cancellation_db == pytest.approx(expected, abs=0.05)

    def test_grid_mismatch_rejected(self):
        wv = square_1ghz(duration=10e-9)
        with pytest.raises(ValueError):
            measure_suppression(wv, wv.drop_front(4), 1e9)

    def test_report_json_keys(self):
        import json
        wv = square_1ghz(duration=10e-9)
        rep = measure_suppression(wv, wv, 1e9)
        data = json.loads(rep.to_json())
        assert set(data) == {"harmonic_db", "harmonic_hz", "broadband_db"}


class TestSdConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SdConfig(0, 1e-9, 0.0, 0.5)
        with pytest.raises(ValueError):
            SdConfig(1, 1e-9, 0.0, 1.0)
        with pytest.raises(ValueError):
            SdConfig(1, 1e-9, 50e-12, 0.5)  # trim beyond default 45 ps
        with pytest.raises(ValueError):
            SdConfig(1, -1e-9, 0.0, 0.5)

    def test_effective_delay(self):
        cfg = SdConfig(2, 1e-9, 10e-12, 0.5)
        assert cfg.effective_delay == pytest.approx(1.01e-9)
