"""Seed derivation for reproducible, worker-count independent Monte Carlo runs."""

from typing import List
import numpy as np


def derive_seed(master_seed: int, *indices: int) -> int:
    """64-bit seed for the stream addressed by (master_seed, *indices)"""
    sequence = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *[int(i) for i in indices]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def replicate_seeds(master_seed: int, grid_index: int, replications: int) -> List[int]:
    """Seeds of the replications at one grid point"""
    return [derive_seed(master_seed, grid_index, rep) for rep in range(replications)]


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for one derived seed"""
    return np.random.default_rng(np.random.SeedSequence(int(seed)))
