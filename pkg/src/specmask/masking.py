"""Time/frequency band masking with three fill schemes.

A mask event covers `t` consecutive frames starting at `t0` and `f`
consecutive bins starting at `f0`; bands are half-open, so width 0 is a
no-op. All channels of a tensor share the one masked region. The three
schemes differ only in what the masked cells become: zeros, the mean with a
partner tensor, or the partner's cells verbatim. Inputs are never modified;
each application returns a fresh tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import SeededRng, as_feature_tensor


@dataclass(frozen=True)
class MaskSpec:
    """One sampled mask event: bands [t0, t0+t) over frames, [f0, f0+f) over bins."""

    t0: int
    t: int
    f0: int
    f: int

    def validate(self, t_dim: int, f_dim: int) -> None:
        if self.t < 0 or self.f < 0:
            raise ValueError(f"negative band width in {self}")
        if self.t0 < 0 or self.t0 + self.t > t_dim:
            raise ValueError(f"time band [{self.t0}, {self.t0 + self.t}) outside T={t_dim}")
        if self.f0 < 0 or self.f0 + self.f > f_dim:
            raise ValueError(f"frequency band [{self.f0}, {self.f0 + self.f}) outside F={f_dim}")


@dataclass(frozen=True)
class MaskParams:
    """Upper bounds for the sampled band widths (inclusive)."""

    t_max: int
    f_max: int

    def validate(self, t_dim: int, f_dim: int) -> None:
        if not 0 <= self.t_max <= t_dim:
            raise ValueError(f"t_max={self.t_max} outside [0, {t_dim}]")
        if not 0 <= self.f_max <= f_dim:
            raise ValueError(f"f_max={self.f_max} outside [0, {f_dim}]")


def sample_mask(t_dim: int, f_dim: int, params: MaskParams, rng: SeededRng) -> MaskSpec:
    """Draw one mask event for a (T, F) grid.

    Band widths are uniform on [0, max]; start indices are uniform over every
    in-bounds position. Draw order is fixed (t, t0, f, f0) so a given rng
    stream always yields the same event sequence.
    """
    if t_dim < 1 or f_dim < 1:
        raise ValueError(f"grid must be at least 1x1, got {t_dim}x{f_dim}")
    params.validate(t_dim, f_dim)
    t = rng.integers(0, params.t_max)
    t0 = rng.integers(0, t_dim - t)
    f = rng.integers(0, params.f_max)
    f0 = rng.integers(0, f_dim - f)
    return MaskSpec(t0=t0, t=t, f0=f0, f=f)


def _check_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = as_feature_tensor(x)
    y = as_feature_tensor(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def apply_zero_mask(x: np.ndarray, m: MaskSpec) -> np.ndarray:
    """Zero the masked bands of every channel; all other cells are untouched."""
    x = as_feature_tensor(x)
    m.validate(x.shape[1], x.shape[2])
    out = x.copy()
    out[:, m.t0 : m.t0 + m.t, :] = 0.0
    out[:, :, m.f0 : m.f0 + m.f] = 0.0
    return out


def apply_mixture_mask(x: np.ndarray, y: np.ndarray, m: MaskSpec) -> np.ndarray:
    """Replace masked cells by (x + y) / 2.

    Both band writes read the original x, so cells where the time and
    frequency bands intersect are mixed exactly once.
    """
    x, y = _check_pair(x, y)
    m.validate(x.shape[1], x.shape[2])
    out = x.copy()
    ts = slice(m.t0, m.t0 + m.t)
    fs = slice(m.f0, m.f0 + m.f)
    out[:, ts, :] = (x[:, ts, :] + y[:, ts, :]) / np.float32(2.0)
    out[:, :, fs] = (x[:, :, fs] + y[:, :, fs]) / np.float32(2.0)
    return out


def apply_cut_mask(x: np.ndarray, y: np.ndarray, m: MaskSpec) -> np.ndarray:
    """Replace masked cells by the partner's cells verbatim."""
    x, y = _check_pair(x, y)
    m.validate(x.shape[1], x.shape[2])
    out = x.copy()
    out[:, m.t0 : m.t0 + m.t, :] = y[:, m.t0 : m.t0 + m.t, :]
    out[:, :, m.f0 : m.f0 + m.f] = y[:, :, m.f0 : m.f0 + m.f]
    return out


def band_mask(t_dim: int, f_dim: int, m: MaskSpec) -> np.ndarray:
    """Boolean (T, F) map of the union of the two bands."""
    m.validate(t_dim, f_dim)
    mask = np.zeros((t_dim, f_dim), dtype=bool)
    mask[m.t0 : m.t0 + m.t, :] = True
    mask[:, m.f0 : m.f0 + m.f] = True
    return mask
