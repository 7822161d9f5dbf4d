#!/usr/bin/env python3
"""Benchmark the gate-loop kernel: numba @njit vs the pure-numpy fallback.

Both backends are bit-identical; this script only measures throughput.
Select the default backend elsewhere with SDAPD_BACKEND=numba|numpy.
"""

import time

import numpy as np

from sdapd.apdsim import DetectorParams, PhotonSource, simulate_gates
from sdapd.backend import numba_available
from sdapd.signal import GateConfig

N_GATES = 20_000_000
SEED = 1234

params = DetectorParams.defaults(2e9, dark_prob=1e-5, dark_ref_bias=52.0)
source = PhotonSource(pulse_rate=2e9 / 64, mean_photons_per_pulse=0.2)
gate = GateConfig(frequency=2e9, dc_bias=52.0)

results = {}
for backend in ("numba", "numpy"):
    if backend == "numba":
        if not numba_available():
            print("numba not available, skipping")
            continue
        # warm the JIT so compile time stays out of the measurement
        simulate_gates(params, source, gate, 10_000, SEED, force_backend=backend)
    t0 = time.perf_counter()
    ev, summary = simulate_gates(params, source, gate, N_GATES, SEED,
                                 force_backend=backend)
    dt = time.perf_counter() - t0
    results[backend] = (dt, ev, summary)
    print(f"{backend:>6}: {dt:8.3f} s  ({N_GATES / dt / 1e6:8.1f} Mgates/s, "
          f"{summary.counts} counts, {len(ev)} events)")

if len(results) == 2:
    (dt_nb, ev_nb, s_nb), (dt_np, ev_np, s_np) = results["numba"], results["numpy"]
    same = (np.array_equal(ev_nb.gate_index, ev_np.gate_index)
            and np.array_equal(ev_nb.charge, ev_np.charge)
            and s_nb.total_charge_c == s_np.total_charge_c)
    print(f"speedup: {dt_np / dt_nb:.1f}x, outputs bit-identical: {same}")
