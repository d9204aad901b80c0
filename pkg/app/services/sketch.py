"""
Turnstile sketches used by the first streaming pass: CountMin for heavy
vertices and banks of l1 samplers (a linear sketch backend that supports
deletions, and an exact weighted-reservoir backend for insert-only streams)
"""
import json
import logging
import math
import struct
from typing import Dict, Optional, Tuple

import numpy as np

from app.config import settings
from app.errors import DomainError, GraphFormatError, InputValidationError
from app.models import SamplerBackend
from app.services.common import exponential_clocks, hash_array, hash_pair, make_rng, mix64, to_unit

logger = logging.getLogger(__name__)

BLOB_VERSION = 1
CM_MAGIC = b"CMSK"
BANK_MAGIC = b"L1SB"
RESERVOIR_MAGIC = b"L1RS"
BASE_BUCKET_FACTOR = 4
DECODE_TOLERANCE = 1e-6
# each CountSketch row reads 12 bits of one 64-bit hash: 11 for the bucket, 1 for the sign
ROW_BITS = 12
BUCKET_MASK = (1 << (ROW_BITS - 1)) - 1
MAX_ROWS = 64 // ROW_BITS
ROW_SALT = 0x5EED
MIN_CLOCK = 2.0 ** -60
# (sampler, item) pairs hashed at once
PAIR_BLOCK = 1 << 18


def _as_items(items, n: int) -> np.ndarray:
    items = np.asarray(items, dtype=np.int64).reshape(-1)
    if len(items) and (items.min() < 0 or items.max() >= n):
        bad = items[(items < 0) | (items >= n)][0]
        raise InputValidationError(f"index {int(bad)} outside 0..{n - 1}")
    return items


def _aggregate(items: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    unique, inverse = np.unique(items, return_inverse=True)
    return unique, np.bincount(inverse, weights, len(unique))


# CountMin
class CountMinSketch:
    """depth x width counters; row r hashes item i to column hash(seed_r, i) mod width"""

    def __init__(self, n: int, width: int, depth: int, seed: int):
        if width < 1 or depth < 1:
            raise DomainError("CountMin width and depth must be at least 1")
        self.n = int(n)
        self.width = int(width)
        self.depth = int(depth)
        self.seed = int(seed)
        self.row_seeds = np.array([mix64(self.seed ^ (r + 1)) for r in range(depth)], dtype=np.uint64)
        self.counters = np.zeros((depth, width))

    @classmethod
    def for_accuracy(
        cls, n: int, k: float, failure: float, seed: int, max_width: Optional[int] = None
    ) -> "CountMinSketch":
        """Error at most |x|_1 / k with probability 1 - failure: width ceil(e k), depth ceil(ln(1 / failure))"""
        if k <= 0:
            raise DomainError("CountMin accuracy parameter must be positive")
        if not 0 < failure < 1:
            raise DomainError("failure probability must lie in (0, 1)")
        width = math.ceil(math.e * k)
        if max_width is not None:
            width = min(width, max_width)
        return cls(n, max(1, width), max(1, math.ceil(math.log(1 / failure))), seed)

    def _columns(self, items: np.ndarray) -> np.ndarray:
        cols = np.empty((self.depth, len(items)), dtype=np.int64)
        for r in range(self.depth):
            cols[r] = (hash_pair(int(self.row_seeds[r]), items) % np.uint64(self.width)).astype(np.int64)
        return cols

    def update(self, i: int, w: float) -> None:
        self.update_many([i], [w])

    def update_many(self, items, weights) -> None:
        items = _as_items(items, self.n)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(items) == 0:
            return
        cols = self._columns(items)
        for r in range(self.depth):
            np.add.at(self.counters[r], cols[r], weights)

    def query(self, i: int) -> float:
        return float(self.query_many([i])[0])

    def query_many(self, items) -> np.ndarray:
        items = _as_items(items, self.n)
        if len(items) == 0:
            return np.zeros(0)
        cols = self._columns(items)
        return self.counters[np.arange(self.depth)[:, None], cols].min(axis=0)

    def merge(self, other: "CountMinSketch") -> "CountMinSketch":
        """Counterwise sum of two identically seeded sketches"""
        if (self.n, self.width, self.depth, self.seed) != (other.n, other.width, other.depth, other.seed):
            raise InputValidationError("can only merge CountMin sketches with identical shape and seed")
        merged = CountMinSketch(self.n, self.width, self.depth, self.seed)
        merged.counters = self.counters + other.counters
        return merged

    @property
    def counter_count(self) -> int:
        return self.counters.size

    def to_bytes(self) -> bytes:
        header = CM_MAGIC + struct.pack("<HQIIQ", BLOB_VERSION, self.n, self.depth, self.width, self.seed)
        return header + self.row_seeds.astype("<u8").tobytes() + self.counters.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CountMinSketch":
        head = struct.calcsize("<HQIIQ")
        if blob[:4] != CM_MAGIC:
            raise GraphFormatError("not a CountMin blob")
        version, n, depth, width, seed = struct.unpack("<HQIIQ", blob[4:4 + head])
        if version != BLOB_VERSION:
            raise GraphFormatError(f"unsupported CountMin blob version {version}")
        sketch = cls(n, width, depth, seed)
        offset = 4 + head
        seeds = np.frombuffer(blob, dtype="<u8", count=depth, offset=offset)
        if not np.array_equal(seeds, sketch.row_seeds):
            raise GraphFormatError("CountMin row seeds do not match the stored seed")
        offset += 8 * depth
        counters = np.frombuffer(blob, dtype="<f8", count=depth * width, offset=offset)
        sketch.counters = counters.reshape(depth, width).astype(float)
        return sketch


def cm_update(sketch: CountMinSketch, i: int, w: float) -> None:
    sketch.update(i, w)


def cm_query(sketch: CountMinSketch, i: int) -> float:
    return sketch.query(i)


# l1 sampler banks
class SketchSamplerBank:
    """r linear l1 samplers by precision sampling

    Sampler s gives item j the clock E_sj ~ Exp(1) and returns argmin E_sj / |x_j|,
    which is the largest entry of the scaled vector z_sj = x_j / E_sj. Every sampler
    keeps a CountSketch of z (rows x buckets signed counters) and reads the winner off
    the median row estimates, so the state is a fixed linear map of x. A base level of
    (sum x, sum j x, sum x g(j)) buckets over x itself answers small supports exactly.
    """

    backend = SamplerBackend.SKETCH
    accuracy = 0.0

    def __init__(self, n: int, r: int, seed: int, buckets: Optional[int] = None, rows: Optional[int] = None):
        if n < 1 or r < 1:
            raise DomainError("sampler bank needs n >= 1 and r >= 1")
        self.n = int(n)
        self.r = int(r)
        self.seed = int(seed)
        self.buckets = int(buckets or settings.sampler_buckets)
        self.rows = int(rows or settings.sampler_rows)
        if not 1 <= self.buckets <= BUCKET_MASK + 1:
            raise DomainError(f"sampler buckets must lie in 1..{BUCKET_MASK + 1}")
        if not 1 <= self.rows <= MAX_ROWS:
            raise DomainError(f"sampler rows must lie in 1..{MAX_ROWS}")
        self.base_buckets = BASE_BUCKET_FACTOR * self.buckets
        self.keys = np.array([mix64(self.seed ^ (s << 1)) for s in range(self.r)], dtype=np.uint64)
        self.row_keys = mix64(self.keys ^ np.uint64(ROW_SALT))
        items = np.arange(self.n)
        self.fingerprint = to_unit(hash_pair(self.seed + 1, items))
        self.base_column = (hash_pair(self.seed + 2, items) % np.uint64(self.base_buckets)).astype(np.int64)
        self.counters = np.zeros(self.r * self.rows * self.buckets)
        self.base_counters = np.zeros((3, self.base_buckets))
        self.max_abs_weight = 0.0

    @property
    def failure(self) -> float:
        """Rough per-sampler failure bound: a majority of rows is corrupted"""
        return 2.0 ** -self.rows

    @property
    def table_entries(self) -> int:
        # clocks and buckets are rehashed on demand
        return 0

    @property
    def counter_count(self) -> int:
        return self.counters.size + self.base_counters.size + 1

    def _clocks(self, samplers: np.ndarray, items: np.ndarray) -> np.ndarray:
        return np.maximum(exponential_clocks(self.keys[samplers], items), MIN_CLOCK)

    def _cells(self, items: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Flat counter index and sign of (row, sampler, item), shape (rows, r, len(items))"""
        h = hash_array(self.row_keys[:, None], items[None, :])
        first = (np.arange(self.r, dtype=np.int64) * self.rows)[:, None]
        cells = np.empty((self.rows,) + h.shape, dtype=np.int64)
        signs = np.empty((self.rows,) + h.shape)
        for t in range(self.rows):
            field = h >> np.uint64(ROW_BITS * t)
            bucket = ((field & np.uint64(BUCKET_MASK)) % np.uint64(self.buckets)).astype(np.int64)
            cells[t] = (first + t) * self.buckets + bucket
            signs[t] = np.where((field >> np.uint64(ROW_BITS - 1)) & np.uint64(1), -1.0, 1.0)
        return cells, signs

    def _blocks(self, count: int):
        step = max(1, PAIR_BLOCK // self.r)
        for start in range(0, count, step):
            yield slice(start, min(count, start + step))

    def update(self, i: int, w: float) -> None:
        self.update_many([i], [w])

    def update_many(self, items, weights) -> None:
        items = _as_items(items, self.n)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(items) == 0:
            return
        items, weights = _aggregate(items, weights)
        self.max_abs_weight = max(self.max_abs_weight, float(np.max(np.abs(weights))))
        payload = np.stack([weights, weights * items, weights * self.fingerprint[items]])
        for row in range(3):
            np.add.at(self.base_counters[row], self.base_column[items], payload[row])
        samplers = np.arange(self.r)[:, None]
        for block in self._blocks(len(items)):
            j, w = items[block], weights[block]
            scaled = w[None, :] / self._clocks(samplers, j[None, :])
            cells, signs = self._cells(j)
            contribution = (signs * scaled[None]).ravel()
            if 8 * cells.size < self.counters.size:
                np.add.at(self.counters, cells.ravel(), contribution)
            else:
                self.counters += np.bincount(cells.ravel(), weights=contribution, minlength=self.counters.size)

    def _decode(self, counters: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per bucket: (empty, pure, item, value) for counters of shape (3, ...)"""
        tol = DECODE_TOLERANCE * max(self.max_abs_weight, 1e-300)
        s0, s1, s2 = counters
        empty = (np.abs(s0) <= tol) & (np.abs(s1) <= tol * self.n) & (np.abs(s2) <= tol)
        safe = np.where(np.abs(s0) > tol, s0, 1.0)
        ratio = s1 / safe
        item = np.rint(ratio).astype(np.int64)
        in_range = (item >= 0) & (item < self.n)
        item = np.where(in_range, item, 0)
        pure = (
            (np.abs(s0) > tol)
            & in_range
            & (np.abs(ratio - item) <= DECODE_TOLERANCE)
            & (np.abs(s2 / safe - self.fingerprint[item]) <= DECODE_TOLERANCE)
        )
        return empty, pure & ~empty, item, s0

    def base_support(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Exact (items, values) of the whole vector when the base level decodes"""
        empty, pure, item, value = self._decode(self.base_counters)
        if not np.all(empty | pure):
            return None
        return item[pure], value[pure]

    def estimates(self, items) -> np.ndarray:
        """Median CountSketch estimates of z_sj, shape (r, len(items))"""
        items = _as_items(items, self.n)
        cells, signs = self._cells(items)
        return np.median(signs * self.counters[cells], axis=0)

    def sample_all(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(item, value, ok) for every sampler; read-only"""
        items = np.full(self.r, -1, dtype=np.int64)
        values = np.zeros(self.r)
        ok = np.zeros(self.r, dtype=bool)
        support = self.base_support()
        if support is not None:
            sup_items, sup_values = support
            if len(sup_items) == 0:
                return items, values, ok
            clocks = exponential_clocks(self.keys[:, None], sup_items[None, :])
            best = np.argmin(clocks / np.abs(sup_values)[None, :], axis=1)
            return sup_items[best], sup_values[best], np.ones(self.r, dtype=bool)

        rows = np.arange(self.r)
        best_z = np.zeros(self.r)
        everything = np.arange(self.n)
        for block in self._blocks(self.n):
            z = self.estimates(everything[block])
            pick = np.argmax(np.abs(z), axis=1)
            top = z[rows, pick]
            better = np.abs(top) > np.abs(best_z)
            best_z[better] = top[better]
            items[better] = everything[block][pick[better]]
        found = items >= 0
        values[found] = best_z[found] * self._clocks(rows[found], items[found])
        ok = found & (np.abs(values) > DECODE_TOLERANCE * max(self.max_abs_weight, 1e-300))
        items[~ok] = -1
        values[~ok] = 0.0
        return items, values, ok

    def sample(self, index: int = 0) -> Optional[Tuple[int, float]]:
        items, values, ok = self.sample_all()
        if not ok[index]:
            return None
        return int(items[index]), float(values[index])

    def to_bytes(self) -> bytes:
        header = BANK_MAGIC + struct.pack(
            "<HQQIIQd", BLOB_VERSION, self.n, self.r, self.rows, self.buckets, self.seed, self.max_abs_weight
        )
        return header + self.base_counters.astype("<f8").tobytes() + self.counters.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SketchSamplerBank":
        fmt = "<HQQIIQd"
        if blob[:4] != BANK_MAGIC:
            raise GraphFormatError("not a sampler-bank blob")
        version, n, r, rows, buckets, seed, max_abs = struct.unpack(fmt, blob[4:4 + struct.calcsize(fmt)])
        if version != BLOB_VERSION:
            raise GraphFormatError(f"unsupported sampler-bank blob version {version}")
        bank = cls(n, r, seed, buckets=buckets, rows=rows)
        offset = 4 + struct.calcsize(fmt)
        size = bank.base_counters.size
        bank.base_counters = np.frombuffer(blob, "<f8", size, offset).reshape(3, -1).astype(float)
        offset += 8 * size
        size = bank.counters.size
        bank.counters = np.frombuffer(blob, "<f8", size, offset).astype(float)
        bank.max_abs_weight = max_abs
        return bank


class ReservoirSamplerBank:
    """r exact weighted reservoirs for insert-only streams; values come from exact counts"""

    backend = SamplerBackend.RESERVOIR
    accuracy = 0.0
    failure = 0.0

    def __init__(self, n: int, r: int, seed: int):
        if n < 1 or r < 1:
            raise DomainError("sampler bank needs n >= 1 and r >= 1")
        self.n = int(n)
        self.r = int(r)
        self.seed = int(seed)
        self.rng = make_rng(seed)
        self.total = 0.0
        self.current = np.full(self.r, -1, dtype=np.int64)
        self.counts = np.zeros(self.n)

    @property
    def table_entries(self) -> int:
        return 0

    @property
    def counter_count(self) -> int:
        return self.r + self.n + 1

    def update(self, i: int, w: float) -> None:
        self.update_many([i], [w])

    def update_many(self, items, weights) -> None:
        items = _as_items(items, self.n)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if np.any(weights < 0):
            raise InputValidationError("the reservoir backend only accepts insertions")
        keep = weights > 0
        items, weights = items[keep], weights[keep]
        if len(items) == 0:
            return
        np.add.at(self.counts, items, weights)
        batch = float(weights.sum())
        self.total += batch
        replace = self.rng.random(self.r) < batch / self.total
        hits = int(replace.sum())
        if hits:
            cumulative = np.cumsum(weights)
            picks = np.searchsorted(cumulative, self.rng.random(hits) * cumulative[-1], side="right")
            self.current[replace] = items[np.minimum(picks, len(items) - 1)]

    def sample_all(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ok = self.current >= 0
        values = np.where(ok, self.counts[np.maximum(self.current, 0)], 0.0)
        return self.current.copy(), values, ok

    def sample(self, index: int = 0) -> Optional[Tuple[int, float]]:
        if self.current[index] < 0:
            return None
        item = int(self.current[index])
        return item, float(self.counts[item])

    def to_bytes(self) -> bytes:
        state = json.dumps(self.rng.bit_generator.state).encode("utf-8")
        header = RESERVOIR_MAGIC + struct.pack("<HQQQdI", BLOB_VERSION, self.n, self.r, self.seed, self.total, len(state))
        return (
            header
            + state
            + self.current.astype("<i8").tobytes()
            + self.counts.astype("<f8").tobytes()
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ReservoirSamplerBank":
        fmt = "<HQQQdI"
        if blob[:4] != RESERVOIR_MAGIC:
            raise GraphFormatError("not a reservoir blob")
        version, n, r, seed, total, state_len = struct.unpack(fmt, blob[4:4 + struct.calcsize(fmt)])
        if version != BLOB_VERSION:
            raise GraphFormatError(f"unsupported reservoir blob version {version}")
        bank = cls(n, r, seed)
        offset = 4 + struct.calcsize(fmt)
        bank.rng.bit_generator.state = json.loads(blob[offset:offset + state_len].decode("utf-8"))
        offset += state_len
        bank.current = np.frombuffer(blob, "<i8", r, offset).astype(np.int64)
        offset += 8 * r
        bank.counts = np.frombuffer(blob, "<f8", n, offset).astype(float)
        bank.total = total
        return bank


def make_sampler_bank(backend: SamplerBackend, n: int, r: int, seed: int):
    if SamplerBackend(backend) == SamplerBackend.RESERVOIR:
        return ReservoirSamplerBank(n, r, seed)
    return SketchSamplerBank(n, r, seed)


def make_l1_sampler(n: int, seed: int, backend: SamplerBackend = SamplerBackend.SKETCH):
    """A single l1 sampler: a bank with one member"""
    return make_sampler_bank(backend, n, 1, seed)


def l1_update(sampler, i: int, w: float) -> None:
    sampler.update(i, w)


def l1_sample(sampler) -> Optional[Tuple[int, float]]:
    return sampler.sample(0)


def load_sketch(blob: bytes):
    """Rebuild any sketch from its binary blob"""
    magic = blob[:4]
    loaders: Dict[bytes, type] = {
        CM_MAGIC: CountMinSketch,
        BANK_MAGIC: SketchSamplerBank,
        RESERVOIR_MAGIC: ReservoirSamplerBank,
    }
    if magic not in loaders:
        raise GraphFormatError(f"unknown sketch magic {magic!r}")
    return loaders[magic].from_bytes(blob)
