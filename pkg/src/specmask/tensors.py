"""Dense (C, T, F) float tensors, a portable seeded RNG, and the SAPP file format.

Every array passed between modules in this package is a contiguous float32
ndarray of shape (channels, time frames, feature bins); rank-2 inputs are
promoted to a single channel. Serialization uses the little-endian "SAPP"
binary container so files are bit-identical across platforms.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SAPP_MAGIC = b"SAPP"
SAPP_VERSION = 1
SAPP_DTYPE_F32 = 1
_HEADER = struct.Struct("<4sIIIII")  # magic, version, C, T, F, dtype
HEADER_SIZE = _HEADER.size  # 24 bytes


class FormatError(ValueError):
    """Raised when a SAPP file is malformed; the message names the byte offset."""


def as_feature_tensor(data, *, copy: bool = False) -> np.ndarray:
    """Coerce array-like data to a contiguous float32 (C, T, F) tensor.

    Rank-2 input is treated as (T, F) with C=1. Non-finite values are
    rejected: all tensors in this package carry finite values only.
    """
    arr = np.array(data, dtype=np.float32, copy=copy, order="C") if copy else np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[np.newaxis, :, :]
    if arr.ndim != 3:
        raise ValueError(f"expected rank-2 or rank-3 data, got rank {arr.ndim}")
    if min(arr.shape) < 1:
        raise ValueError(f"all dimensions must be >= 1, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("tensor contains non-finite values")
    return np.ascontiguousarray(arr)


def tensor_to_bytes(x: np.ndarray) -> bytes:
    """Serialize a (C, T, F) float32 tensor to SAPP bytes."""
    x = as_feature_tensor(x)
    c, t, f = x.shape
    header = _HEADER.pack(SAPP_MAGIC, SAPP_VERSION, c, t, f, SAPP_DTYPE_F32)
    return header + x.astype("<f4", copy=False).tobytes(order="C")


def write_tensor(path, x: np.ndarray) -> None:
    """Write a (C, T, F) float32 tensor to `path` in SAPP format."""
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(x))


def read_tensor(path) -> np.ndarray:
    """Read a SAPP file back into a (C, T, F) float32 tensor, bit-exactly."""
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


def tensor_from_bytes(raw: bytes) -> np.ndarray:
    """Parse SAPP bytes; raises FormatError naming the offending byte offset."""
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"truncated header at offset {len(raw)}: need {HEADER_SIZE} bytes")
    magic, version, c, t, f, dtype = _HEADER.unpack_from(raw, 0)
    if magic != SAPP_MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if version != SAPP_VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    if min(c, t, f) < 1:
        raise FormatError(f"invalid dimensions ({c}, {t}, {f}) at offset 8")
    if dtype != SAPP_DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype} at offset 20")
    expected = c * t * f * 4
    payload = raw[HEADER_SIZE:]
    if len(payload) != expected:
        raise FormatError(
            f"truncated payload at offset {HEADER_SIZE}: expected {expected} bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(c, t, f)
    return np.ascontiguousarray(data.astype(np.float32, copy=False))


# ---------------------------------------------------------------------------
# Seeded RNG
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream purposes; a stream id packs (purpose, a, b) so each epoch x batch x
# purpose combination draws from its own reproducible sequence.
PURPOSE_INIT = 1
PURPOSE_SHUFFLE = 2
PURPOSE_AUGMENT = 3
PURPOSE_SYNTH = 4
PURPOSE_CHECK = 5


def _mix64(z: int) -> int:
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def stream_id(purpose: int, a: int = 0, b: int = 0) -> int:
    """Pack a (purpose, a, b) triple into a 64-bit stream id."""
    if not 0 <= purpose < 1 << 16:
        raise ValueError(f"purpose out of range: {purpose}")
    if not 0 <= a < 1 << 24 or not 0 <= b < 1 << 24:
        raise ValueError(f"stream components out of range: ({a}, {b})")
    return (purpose << 48) | (a << 24) | b


@dataclass
class SeededRng:
    """Counter-based splitmix64 generator.

    Identical (seed, stream) pairs produce identical draw sequences on every
    platform: all state transitions are exact 64-bit integer arithmetic.
    Instances are single-owner; do not share across threads.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ValueError(f"seed out of 64-bit range: {self.seed}")
        if not 0 <= self.stream <= _MASK64:
            raise ValueError(f"stream out of 64-bit range: {self.stream}")
        self._base = _mix64((_mix64(self.seed) + (self.stream * _GOLDEN)) & _MASK64)
        self._counter = 0

    def next_u64(self) -> int:
        self._counter += 1
        return _mix64((self._base + self._counter * _GOLDEN) & _MASK64)

    def _next_block(self, n: int) -> np.ndarray:
        """Vectorized next_u64: identical to n sequential scalar draws."""
        start = self._counter + 1
        self._counter += n
        idx = np.arange(start, start + n, dtype=np.uint64)
        z = (np.uint64(self._base) + idx * np.uint64(_GOLDEN)) & np.uint64(_MASK64)
        z ^= z >> np.uint64(30)
        z = (z * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(_MASK64)
        z ^= z >> np.uint64(27)
        z = (z * np.uint64(0x94D049BB133111EB)) & np.uint64(_MASK64)
        z ^= z >> np.uint64(31)
        return z

    def integers(self, lo: int, hi: int) -> int:
        """One draw, uniform over the inclusive range [lo, hi].

        Uses masked rejection so the distribution is exactly uniform.
        """
        if lo > hi:
            raise ValueError(f"empty range: lo={lo} > hi={hi}")
        span = hi - lo + 1
        if span == 1:
            return lo
        mask = (1 << (span - 1).bit_length()) - 1
        while True:
            v = self.next_u64() & mask
            if v < span:
                return lo + v

    def uniform01(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1), from the top 53 bits of each draw."""
        return (self._next_block(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)

    def normal(self, n: int, *, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """n standard-normal doubles via Box-Muller (pairs of uniform draws)."""
        m = (n + 1) // 2
        u1 = self.uniform01(m)
        u2 = self.uniform01(m)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1-u1 in (0,1], log is finite
        theta = (2.0 * np.pi) * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return mean + std * z


def uniform_int(rng: SeededRng, lo: int, hi: int) -> int:
    """Uniform integer in the inclusive range [lo, hi]; advances `rng`."""
    return rng.integers(lo, hi)


def rng_for(seed: int, purpose: int, a: int = 0, b: int = 0) -> SeededRng:
    """Fresh generator on the (purpose, a, b) stream of `seed`."""
    return SeededRng(seed, stream_id(purpose, a, b))
