"""Counter-based random numbers for reproducible, partition-independent simulation.

Every draw is a pure function of (seed, counter), so a run can be split into
arbitrary blocks, chunks, or threads and still produce bit-identical results.
The generator is a splitmix64-style mixer applied to a jumped state; counters
are laid out as ``gate_index * SLOTS + slot`` so each gate owns a fixed set of
draw slots whether or not they end up being consumed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Fixed per-gate draw slots used by the gate kernels.
SLOTS = 8
SLOT_PHOTON = 0
SLOT_DARK = 1
SLOT_AFTERPULSE = 2
SLOT_CHARGE_A = 3
SLOT_CHARGE_B = 4
SLOT_JITTER_A = 5
SLOT_JITTER_B = 6

U53_INV = 2.0**-53

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_U_ONE = np.uint64(1)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)


def raw64(seed: int, counter: int) -> int:
    """Scalar draw as a Python int; reference implementation for all backends."""
    z = (seed + ((counter + 1) * _GOLDEN & _MASK64)) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def raw64_vec(seed: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized draw over a uint64 counter array; bit-identical to raw64."""
    z = np.uint64(seed) + (counters + _U_ONE) * _U_GOLDEN
    z = (z ^ (z >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    return z ^ (z >> _U31)


def u01(seed: int, counter: int) -> float:
    """Uniform draw in [0, 1) with 53 significant bits."""
    return (raw64(seed, counter) >> 11) * U53_INV


def u01_vec(raw: np.ndarray) -> np.ndarray:
    return (raw >> _U11).astype(np.float64) * U53_INV


def derive_seed(seed: int, index: int) -> int:
    """Derive an independent substream seed for a numbered sub-task.

    Used so scan/sweep points and dark/illuminated runs draw from disjoint
    streams regardless of execution order.
    """
    z = (seed & _MASK64) ^ 0x8BB84B93962EEFD9
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = (z + ((index + 1) * _GOLDEN & _MASK64)) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def gaussian_pair(seed: int, counter_a: int, counter_b: int) -> float:
    """One standard-normal draw from two counters (Box-Muller, cosine branch)."""
    import math

    u1 = ((raw64(seed, counter_a) >> 11) + 1) * U53_INV  # (0, 1]
    u2 = (raw64(seed, counter_b) >> 11) * U53_INV        # [0, 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(6.283185307179586 * u2)
