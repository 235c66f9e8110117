"""Deterministic per-file seed derivation.

The augmentation pipeline must produce bit-identical output regardless of
processing order or worker count, so every file gets its own RNG stream
derived purely from the global seed and the file's relative path:

    file_seed = splitmix64(global_seed XOR fnv1a64(relative_path))
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def splitmix64(x: int) -> int:
    """One output of the SplitMix64 generator seeded at ``x``."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def file_seed(global_seed: int, relative_path: str) -> int:
    """Per-file seed; stable across platforms, path order and thread count."""
    return splitmix64((global_seed & _MASK64) ^ fnv1a64(relative_path.encode("utf-8")))
