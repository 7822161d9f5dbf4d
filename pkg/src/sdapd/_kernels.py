"""Hot gate-loop kernels: numba-compiled sequential loop and a chunked,
vectorized numpy fallback.

Both backends consume the same counter-based draw schedule (one slot block per
gate) and replicate the reservoir arithmetic operation-for-operation, so a
given seed produces bit-identical event streams regardless of backend, chunk
size, or thread count.

Per gate, in order: photon trial (illuminated gates only), dark trial,
afterpulse trial against the trap reservoir, then on any avalanche a charge
draw, trap top-up proportional to charge, and finally the per-period reservoir
decay.  At most one avalanche fires per gate (discriminator latch).
"""

from __future__ import annotations

import math

import numpy as np

from . import backend
from .rng import (SLOT_AFTERPULSE, SLOT_CHARGE_A, SLOT_CHARGE_B, SLOT_DARK,
                  SLOT_JITTER_A, SLOT_JITTER_B, SLOT_PHOTON, SLOTS, U53_INV,
                  raw64, raw64_vec, u01_vec)

TWO_PI = 6.283185307179586

# Reservoir occupancies below this are treated as empty.  The cut keeps the
# decay chain out of subnormal arithmetic (where rounding pins it above zero
# forever) and makes trigger decisions immune to the 2^-53 chance of a
# uniform draw returning exactly 0.0; the afterpulse mass discarded is below
# 1e-30 per gate.
TRAP_FLOOR = 1e-30

CAUSE_PHOTON = 0
CAUSE_DARK = 1
CAUSE_AFTERPULSE = 2
CAUSE_NAMES = ("photon", "dark", "afterpulse")


def _gate_loop(n_gates, seed, p_click, divisor, phase, p_dark, qbar, q_sigma,
               thresh, trap_coeff, decay, t_gate, jitter_sigma, hist,
               ev_gate, ev_cause, ev_charge, ev_time, ev_detected):
    """Sequential reference loop; numba-compilable as-is."""
    u_seed = np.uint64(seed)
    u_slots = np.uint64(SLOTS)
    g64 = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    one = np.uint64(1)
    s30 = np.uint64(30)
    s27 = np.uint64(27)
    s31 = np.uint64(31)
    s11 = np.uint64(11)

    release = 1.0 - decay
    reservoir = 0.0
    total_charge = 0.0
    registered_charge = 0.0
    n_ev = 0
    counts0 = 0
    counts1 = 0
    counts2 = 0
    capacity = ev_gate.shape[0]
    hist_len = hist.shape[0]

    for i in range(n_gates):
        base = np.uint64(i) * u_slots
        cause = -1
        if divisor > 0 and i % divisor == phase:
            z = u_seed + (base + np.uint64(SLOT_PHOTON) + one) * g64
            z = (z ^ (z >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            if float(z >> s11) * U53_INV < p_click:
                cause = CAUSE_PHOTON
        if cause < 0:
            z = u_seed + (base + np.uint64(SLOT_DARK) + one) * g64
            z = (z ^ (z >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            if float(z >> s11) * U53_INV < p_dark:
                cause = CAUSE_DARK
        if cause < 0 and reservoir > 0.0:
            z = u_seed + (base + np.uint64(SLOT_AFTERPULSE) + one) * g64
            z = (z ^ (z >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            if float(z >> s11) * U53_INV < reservoir * release:
                cause = CAUSE_AFTERPULSE
        if cause >= 0:
            if n_ev >= capacity:
                return (-1, 0, 0, 0, 0.0, 0.0)
            z = u_seed + (base + np.uint64(SLOT_CHARGE_A) + one) * g64
            z = (z ^ (z >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            u1 = (float(z >> s11) + 1.0) * U53_INV
            z = u_seed + (base + np.uint64(SLOT_CHARGE_B) + one) * g64
            z = (z ^ (z >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            u2 = float(z >> s11) * U53_INV
            q = qbar + q_sigma * (math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2))
            if q < 0.0:
                q = 0.0
            z = u_seed + (base + np.uint64(SLOT_JITTER_A) + one) * g64
            z = (z ^ (z >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            u1 = (float(z >> s11) + 1.0) * U53_INV
            z = u_seed + (base + np.uint64(SLOT_JITTER_B) + one) * g64
            z = (z ^ (z >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            u2 = float(z >> s11) * U53_INV
            zj = math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)
            detected = q >= thresh
            total_charge += q
            if detected:
                registered_charge += q
                hist[i % hist_len] += 1
                if cause == CAUSE_PHOTON:
                    counts0 += 1
                elif cause == CAUSE_DARK:
                    counts1 += 1
                else:
                    counts2 += 1
            ev_gate[n_ev] = i
            ev_cause[n_ev] = cause
            ev_charge[n_ev] = q
            ev_time[n_ev] = (i + 0.5) * t_gate + jitter_sigma * zj
            ev_detected[n_ev] = detected
            n_ev += 1
            reservoir += trap_coeff * q
        reservoir *= decay
        if reservoir < TRAP_FLOOR:
            reservoir = 0.0
    return (n_ev, counts0, counts1, counts2, total_charge, registered_charge)


_numba_loop = None


def _get_numba_loop():
    global _numba_loop
    if _numba_loop is None:
        from numba import njit
        _numba_loop = njit(cache=True, nogil=True)(_gate_loop)
    return _numba_loop


def _draw_event(seed: int, gate: int, qbar: float, q_sigma: float,
                t_gate: float, jitter_sigma: float) -> tuple[float, float]:
    """Charge and timestamp draws for one event; matches the loop bit-for-bit."""
    base = gate * SLOTS
    u1 = ((raw64(seed, base + SLOT_CHARGE_A) >> 11) + 1) * U53_INV
    u2 = (raw64(seed, base + SLOT_CHARGE_B) >> 11) * U53_INV
    q = qbar + q_sigma * (math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2))
    if q < 0.0:
        q = 0.0
    u1 = ((raw64(seed, base + SLOT_JITTER_A) >> 11) + 1) * U53_INV
    u2 = (raw64(seed, base + SLOT_JITTER_B) >> 11) * U53_INV
    zj = math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)
    return q, (gate + 0.5) * t_gate + jitter_sigma * zj


def _run_numpy(n_gates, seed, p_click, divisor, phase, p_dark, qbar, q_sigma,
               thresh, trap_coeff, decay, t_gate, jitter_sigma, hist_len,
               chunk: int = 1 << 20):
    """Chunked vectorized fallback.

    Primary (photon/dark) trials vectorize directly; afterpulse trials couple
    gates through the reservoir, so segments between events are resolved with
    a cumulative product that replays the loop's decay multiplications in the
    exact same order.
    """
    release = 1.0 - decay
    reservoir = 0.0
    total_charge = 0.0
    registered_charge = 0.0
    counts = [0, 0, 0]
    hist = np.zeros(hist_len, dtype=np.int64)
    ev_gate: list[int] = []
    ev_cause: list[int] = []
    ev_charge: list[float] = []
    ev_time: list[float] = []
    ev_detected: list[bool] = []

    def fire(gate: int, cause: int, res_at_trial: float) -> float:
        nonlocal total_charge, registered_charge
        q, ts = _draw_event(seed, gate, qbar, q_sigma, t_gate, jitter_sigma)
        detected = q >= thresh
        total_charge += q
        if detected:
            registered_charge += q
            hist[gate % hist_len] += 1
            counts[cause] += 1
        ev_gate.append(gate)
        ev_cause.append(cause)
        ev_charge.append(q)
        ev_time.append(ts)
        ev_detected.append(detected)
        res = (res_at_trial + trap_coeff * q) * decay
        return res if res >= TRAP_FLOOR else 0.0

    for start in range(0, n_gates, chunk):
        stop = min(start + chunk, n_gates)
        idx = np.arange(start, stop, dtype=np.int64)
        base = idx.astype(np.uint64) * np.uint64(SLOTS)
        u_dark = u01_vec(raw64_vec(seed, base + np.uint64(SLOT_DARK)))
        dark_fire = u_dark < p_dark
        if divisor > 0:
            u_ph = u01_vec(raw64_vec(seed, base + np.uint64(SLOT_PHOTON)))
            ph_fire = ((idx % divisor) == phase) & (u_ph < p_click)
        else:
            ph_fire = np.zeros(idx.size, dtype=bool)
        primary = ph_fire | dark_fire
        u_ap = u01_vec(raw64_vec(seed, base + np.uint64(SLOT_AFTERPULSE)))

        prim_pos = np.flatnonzero(primary)
        pos = 0  # chunk-local gate cursor
        n_local = stop - start
        p_i = 0
        while pos < n_local:
            next_prim = int(prim_pos[p_i]) if p_i < prim_pos.size else n_local
            if pos < next_prim:
                seg = next_prim - pos
                # Reservoir at each trial: [R, R*d, (R*d)*d, ...] in loop order.
                # The chain is strictly decreasing, so masking the tail below
                # the floor reproduces the loop's per-gate snap to zero.
                vec = np.full(seg, decay)
                vec[0] = reservoir
                path = np.cumprod(vec)
                path[path < TRAP_FLOOR] = 0.0
                hits = np.flatnonzero(u_ap[pos:next_prim] < path * release)
                if hits.size:
                    k = int(hits[0])
                    gate = start + pos + k
                    reservoir = fire(gate, CAUSE_AFTERPULSE, float(path[k]))
                    pos = pos + k + 1
                    continue
                reservoir = float(path[-1]) * decay
                if reservoir < TRAP_FLOOR:
                    reservoir = 0.0
                pos = next_prim
            if p_i < prim_pos.size and pos == prim_pos[p_i]:
                gate = start + pos
                cause = CAUSE_PHOTON if ph_fire[pos] else CAUSE_DARK
                reservoir = fire(gate, cause, reservoir)
                pos += 1
                p_i += 1

    events = (np.array(ev_gate, dtype=np.int64),
              np.array(ev_cause, dtype=np.int8),
              np.array(ev_charge, dtype=np.float64),
              np.array(ev_time, dtype=np.float64),
              np.array(ev_detected, dtype=bool))
    return events, hist, tuple(counts), total_charge, registered_charge


def _run_numba(n_gates, seed, p_click, divisor, phase, p_dark, qbar, q_sigma,
               thresh, trap_coeff, decay, t_gate, jitter_sigma, hist_len):
    loop = _get_numba_loop()
    expected = n_gates * (p_dark + (p_click / divisor if divisor > 0 else 0.0))
    capacity = int(2.0 * expected + 10.0 * math.sqrt(expected + 1.0)) + 1024
    while True:
        hist = np.zeros(hist_len, dtype=np.int64)
        ev_gate = np.empty(capacity, dtype=np.int64)
        ev_cause = np.empty(capacity, dtype=np.int8)
        ev_charge = np.empty(capacity, dtype=np.float64)
        ev_time = np.empty(capacity, dtype=np.float64)
        ev_detected = np.empty(capacity, dtype=bool)
        n_ev, c0, c1, c2, total, registered = loop(
            n_gates, np.uint64(seed), p_click, divisor, phase, p_dark, qbar,
            q_sigma, thresh, trap_coeff, decay, t_gate, jitter_sigma, hist,
            ev_gate, ev_cause, ev_charge, ev_time, ev_detected)
        if n_ev >= 0:
            events = (ev_gate[:n_ev].copy(), ev_cause[:n_ev].copy(),
                      ev_charge[:n_ev].copy(), ev_time[:n_ev].copy(),
                      ev_detected[:n_ev].copy())
            return events, hist, (c0, c1, c2), total, registered
        capacity *= 4


def run_gates(n_gates, seed, p_click, divisor, phase, p_dark, qbar, q_sigma,
              thresh, trap_coeff, decay, t_gate, jitter_sigma, hist_len,
              force_backend: str | None = None):
    """Dispatch one gate-loop run to the selected backend."""
    choice = force_backend or backend.active_backend()
    if choice == "numba":
        return _run_numba(n_gates, seed, p_click, divisor, phase, p_dark, qbar,
                          q_sigma, thresh, trap_coeff, decay, t_gate,
                          jitter_sigma, hist_len)
    return _run_numpy(n_gates, seed, p_click, divisor, phase, p_dark, qbar,
                      q_sigma, thresh, trap_coeff, decay, t_gate,
                      jitter_sigma, hist_len)
