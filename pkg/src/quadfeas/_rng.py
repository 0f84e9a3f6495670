"""Seed derivation.

Every random stream in the package is a PCG64 generator seeded from
``SeedSequence(seed, spawn_key=keys)``, so a stream depends only on the root
seed and its key path, never on the order in which streams are created.
"""

from __future__ import annotations

import numpy as np

SEED_MAX = 2**64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def derive_rng(seed, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *keys: int) -> int:
    """A child 64-bit seed for sub-task ``keys`` of root `seed`."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian with ``E|w|^2 = var`` (var/2 per component)."""
    s = np.sqrt(var / 2.0)
    return s * rng.standard_normal(size) + 1j * s * rng.standard_normal(size)


def unit_sphere(rng: np.random.Generator, n: int, count: int | None = None) -> np.ndarray:
    """Uniform points on the unit sphere of C^n."""
    shape = (n,) if count is None else (count, n)
    w = complex_normal(rng, shape)
    return w / np.linalg.norm(w, axis=-1, keepdims=True)
