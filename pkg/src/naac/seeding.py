"""Stateless derivation of per-component random streams.

``derive_stream_seed`` folds (master seed, component tag, episode, agent)
through the SplitMix64 output function::

    h = master
    for v in (tag_id, episode, agent):
        h = splitmix64_mix((h ^ v) + 0x9E3779B97F4A7C15)

where ``tag_id`` is the first 8 bytes (little-endian) of the BLAKE2b digest
of the UTF-8 tag and all arithmetic is modulo 2**64. Each fold is a
bijection of ``h ^ v``, so seeds that differ only in the agent index never
collide.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64_sequence(seed: int, n: int) -> list[int]:
    """First ``n`` outputs of the SplitMix64 generator seeded with ``seed``."""
    out, x = [], seed & MASK64
    for _ in range(n):
        x = (x + GOLDEN_GAMMA) & MASK64
        out.append(splitmix64_mix(x))
    return out


def tag_id(tag: str | int) -> int:
    if isinstance(tag, int):
        return tag & MASK64
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


def derive_stream_seed(master_seed: int, component_tag: str | int, episode: int = 0, agent: int = 0) -> int:
    h = master_seed & MASK64
    for v in (tag_id(component_tag), episode & MASK64, agent & MASK64):
        h = splitmix64_mix(((h ^ v) + GOLDEN_GAMMA) & MASK64)
    return h


def make_stream(master_seed: int, component_tag: str | int, episode: int = 0, agent: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_stream_seed(master_seed, component_tag, episode, agent)))
