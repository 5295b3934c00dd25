"""Deterministic substream seeding for parallel Monte Carlo.

Every trial of a sweep draws from its own ``numpy`` Generator seeded by a
64-bit value derived from ``(master_seed, beta_index, trial_index)`` with the
splitmix64 finalizer.  The derivation is a fixed, published recipe so runs are
portable: results are identical whether trials execute sequentially or in a
parallel map.

Derivation (all arithmetic mod 2**64)::

    mix(x):  x += 0x9E3779B97F4A7C15
             x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
             x = (x ^ (x >> 27)) * 0x94D049BB133111EB
             return x ^ (x >> 31)

    derived = mix(mix(mix(master) ^ mix(beta_index)) ^ mix(trial_index))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden-gamma and finalize."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def substream_seed(master: int, beta_index: int = 0, trial_index: int = 0) -> int:
    """Derive the 64-bit substream seed for one trial of one grid point."""
    h = splitmix64(master & _MASK64)
    h = splitmix64(h ^ splitmix64(beta_index & _MASK64))
    h = splitmix64(h ^ splitmix64(trial_index & _MASK64))
    return h


@dataclass(frozen=True)
class SeedRecord:
    """Provenance of one sampled matrix: master seed plus derivation indices."""

    master: int
    beta_index: int = 0
    trial_index: int = 0

    @property
    def derived(self) -> int:
        return substream_seed(self.master, self.beta_index, self.trial_index)

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.derived)


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Accept a Generator, an int seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
