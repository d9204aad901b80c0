"""
Small numeric helpers shared by the services: log base, RNGs and hashing
"""
import math
from typing import Union

import numpy as np

from app.config import settings

ArrayLike = Union[int, np.ndarray]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def log(x: float) -> float:
    """Logarithm in the configured global base (natural unless set to 2)"""
    if settings.log_base == "2":
        return math.log2(x)
    return math.log(x)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & _MASK64)


def derive_seed(seed: int, index: int) -> int:
    """Per-trial seed: the base seed XOR the trial index"""
    return (int(seed) ^ int(index)) & _MASK64


def mix64(x: ArrayLike) -> ArrayLike:
    """splitmix64 finalizer; works on python ints and uint64 arrays"""
    if isinstance(x, np.ndarray):
        z = x.astype(np.uint64, copy=True)
        with np.errstate(over="ignore"):
            z = z + np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        return z
    z = (int(x) + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def hash_pair(seed: int, a: ArrayLike, b: ArrayLike = 0) -> ArrayLike:
    """Seeded 64-bit hash of one or two keys"""
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a = np.asarray(a).astype(np.uint64)
        b = np.asarray(b).astype(np.uint64)
        with np.errstate(over="ignore"):
            h = mix64(np.uint64(int(seed) & _MASK64) ^ a)
            return mix64(h + np.uint64(_GOLDEN) * (b + np.uint64(1)))
    h = mix64((int(seed) & _MASK64) ^ int(a))
    return mix64((h + _GOLDEN * (int(b) + 1)) & _MASK64)


def to_unit(h: ArrayLike) -> Union[float, np.ndarray]:
    """Map a 64-bit hash to a uniform value in [0, 1)"""
    if isinstance(h, np.ndarray):
        return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return (int(h) >> 11) * (1.0 / (1 << 53))


def hash_array(keys: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Hash items a under per-row uint64 keys; the two arrays broadcast"""
    keys = np.asarray(keys, dtype=np.uint64)
    a = np.asarray(a).astype(np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys ^ mix64(a))


def exponential_clocks(keys: np.ndarray, items: np.ndarray) -> np.ndarray:
    """Seeded Exp(1) variates -ln(1 - U) for (key, item) pairs"""
    return -np.log1p(-to_unit(hash_array(keys, items)))
