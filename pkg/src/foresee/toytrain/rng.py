"""Explicit-state 64-bit PRNG so scene generation is portable.

SplitMix64: the state advances by the golden-gamma constant and each output
is the finalizer mix of the new state. The algorithm is fixed here (not a
platform default) so that identical seeds give identical scenes on any
implementation. Uniform doubles take the top 53 bits of an output word.

All heavy paths draw arrays: state stepping vectorizes as
state + gamma * (1..n) in wrapping uint64 arithmetic.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Sequential SplitMix64 stream with explicit 64-bit state."""

    def __init__(self, seed: int):
        self._state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)

    def raw(self, n: int) -> np.ndarray:
        """Next n output words as a uint64 array."""
        if n <= 0:
            return np.empty(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = self._state + _GAMMA * steps
        self._state = states[-1]
        return _mix(states)

    def uniforms(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """n doubles uniform in [lo, hi), 53-bit resolution."""
        u01 = (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return lo + (hi - lo) * u01

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return float(self.uniforms(1, lo, hi)[0])

    def log_uniform(self, lo: float, hi: float) -> float:
        """One draw whose logarithm is uniform over [ln lo, ln hi)."""
        return float(np.exp(self.uniform(np.log(lo), np.log(hi))))

    def randint(self, lo: int, hi: int) -> int:
        """One integer uniform over [lo, hi)."""
        if hi <= lo:
            raise ValueError(f"empty integer range [{lo}, {hi})")
        return lo + int(self.uniform() * (hi - lo))

    def spawn(self, key: int) -> "SplitMix64":
        """Independent substream derived from the current state and a key."""
        with np.errstate(over="ignore"):
            seed = _mix(_mix(self._state) + _GAMMA * np.uint64(key + 1))
        return SplitMix64(int(seed))


def substream(seed: int, key: int) -> SplitMix64:
    """Deterministic per-key stream: mix(mix(seed) + gamma * (key + 1))."""
    return SplitMix64(seed).spawn(key)
