"""Log-mel spectrogram front end for 22.05 kHz mono audio.

Audio is resampled to 22.05 kHz, framed with centered (reflect-padded)
windows so a clip of n samples yields exactly 1 + n // hop frames, passed
through an optional perceptual weighting of the power spectrum, pooled by a
triangular mel filterbank, and log-compressed. Normalization statistics are
fit per frequency bin over a training set.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .tensors import as_feature_tensor, read_tensor, write_tensor

TARGET_RATE = 22050


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = TARGET_RATE
    window: int = 2048
    hop: int = 512
    mel_bins: int = 256
    fmin: float = 0.0
    fmax: float = 11025.0
    log_floor: float = 1e-10
    perceptual_weighting: bool = True

    def __post_init__(self):
        if self.window < 2 or self.hop < 1:
            raise ValueError(f"bad framing: window={self.window}, hop={self.hop}")
        if self.hop > self.window:
            raise ValueError(f"hop ({self.hop}) must not exceed window ({self.window})")
        if self.mel_bins < 1:
            raise ValueError(f"mel_bins must be >= 1, got {self.mel_bins}")
        if not 0.0 <= self.fmin < self.fmax or self.fmax > self.sample_rate / 2:
            raise ValueError(
                f"need 0 <= fmin < fmax <= sample_rate/2, got fmin={self.fmin}, "
                f"fmax={self.fmax}, sample_rate={self.sample_rate}"
            )
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


def frame_count(n_samples: int, hop: int) -> int:
    """Frames produced for n samples under centered framing: 1 + n // hop."""
    return 1 + n_samples // hop


def resample(audio: np.ndarray, src_rate: int, target_rate: int = TARGET_RATE) -> np.ndarray:
    """Band-limited polyphase resampling down to the target rate."""
    from scipy.signal import resample_poly  # deferred: scipy.signal import is slow

    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1:
        raise ValueError(f"expected mono sample vector, got shape {audio.shape}")
    if audio.size == 0:
        raise ValueError("empty audio")
    if src_rate < target_rate:
        raise ValueError(f"source rate {src_rate} below target {target_rate}")
    if src_rate == target_rate:
        return audio.copy()
    ratio = Fraction(target_rate, src_rate)
    # padtype="line" keeps DC signals flat at the clip edges
    return resample_poly(audio, ratio.numerator, ratio.denominator, padtype="line")


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_power(audio: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Power spectrogram, shape (T, window // 2 + 1), float64.

    Frames start at multiples of hop in the reflect-padded signal (pad of
    window // 2 on each side), so frame t is centered on sample t * hop.
    """
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1:
        raise ValueError(f"expected mono sample vector, got shape {audio.shape}")
    if audio.size < cfg.window:
        raise ValueError(f"audio of {audio.size} samples shorter than window {cfg.window}")
    half = cfg.window // 2
    padded = np.pad(audio, half, mode="reflect")
    n_frames = frame_count(audio.size, cfg.hop)
    starts = np.arange(n_frames) * cfg.hop
    idx = starts[:, None] + np.arange(cfg.window)[None, :]
    frames = padded[idx] * hann_window(cfg.window)[None, :]
    spectrum = np.fft.rfft(frames, axis=1)
    return np.abs(spectrum) ** 2


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Triangular filters on the mel scale, shape (mel_bins, window // 2 + 1).

    Filter k rises from mel point k to k+1 and falls to k+2, with the
    mel_bins + 2 points spaced evenly between fmin and fmax.
    """
    n_bins = cfg.window // 2 + 1
    fft_freqs = np.arange(n_bins) * (cfg.sample_rate / cfg.window)
    mel_points = np.linspace(_hz_to_mel(cfg.fmin), _hz_to_mel(cfg.fmax), cfg.mel_bins + 2)
    hz_points = _mel_to_hz(mel_points)
    fb = np.zeros((cfg.mel_bins, n_bins), dtype=np.float64)
    for k in range(cfg.mel_bins):
        lo, center, hi = hz_points[k], hz_points[k + 1], hz_points[k + 2]
        rising = (fft_freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - fft_freqs) / max(hi - center, 1e-12)
        fb[k] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def perceptual_weight_gain(freqs: np.ndarray) -> np.ndarray:
    """A-weighting-style power-domain gain for each frequency in Hz."""
    f2 = np.asarray(freqs, dtype=np.float64) ** 2
    num = (12194.0**2) * f2**2
    den = (
        (f2 + 20.6**2)
        * np.sqrt((f2 + 107.7**2) * (f2 + 737.9**2))
        * (f2 + 12194.0**2)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = np.where(den > 0, num / den, 0.0)
    db = 20.0 * np.log10(np.clip(ra, 1e-30, None)) + 2.0
    gain = 10.0 ** (db / 10.0)
    return np.where(ra > 0, gain, 0.0)


def logmel(audio: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Log-mel features for one clip, shape (1, T, mel_bins) float32.

    10 s at the default config gives 431 frames x 256 bins.
    """
    power = stft_power(audio, cfg)
    if cfg.perceptual_weighting:
        freqs = np.arange(power.shape[1]) * (cfg.sample_rate / cfg.window)
        power = power * perceptual_weight_gain(freqs)[None, :]
    mel = power @ mel_filterbank(cfg).T
    out = np.log(mel + cfg.log_floor)
    return as_feature_tensor(out.astype(np.float32))


@dataclass(frozen=True)
class NormStats:
    """Per-bin mean and standard deviation fit on a training set."""

    mean: np.ndarray  # (F,) float32
    std: np.ndarray  # (F,) float32, strictly positive

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError(f"mean/std must be matching vectors, got {self.mean.shape} / {self.std.shape}")
        if not (self.std > 0).all():
            raise ValueError("std entries must be strictly positive")


STD_FLOOR = 1e-8


def fit_norm(tensors: list[np.ndarray]) -> NormStats:
    """Per-bin mean/std over every frame of every tensor (population std)."""
    if not tensors:
        raise ValueError("empty training list")
    tensors = [as_feature_tensor(x) for x in tensors]
    f_dim = tensors[0].shape[2]
    for i, x in enumerate(tensors):
        if x.shape[2] != f_dim:
            raise ValueError(f"tensor {i} has {x.shape[2]} bins, expected {f_dim}")
    count = sum(x.shape[0] * x.shape[1] for x in tensors)
    total = np.zeros(f_dim, dtype=np.float64)
    for x in tensors:
        total += x.astype(np.float64).sum(axis=(0, 1))
    mean = total / count
    sq = np.zeros(f_dim, dtype=np.float64)
    for x in tensors:
        sq += ((x.astype(np.float64) - mean) ** 2).sum(axis=(0, 1))
    std = np.maximum(np.sqrt(sq / count), STD_FLOOR)
    return NormStats(mean=mean.astype(np.float32), std=std.astype(np.float32))


def apply_norm(x: np.ndarray, stats: NormStats) -> np.ndarray:
    """Standardize each bin of x with the fitted statistics."""
    x = as_feature_tensor(x)
    if x.shape[2] != stats.mean.shape[0]:
        raise ValueError(f"tensor has {x.shape[2]} bins, stats have {stats.mean.shape[0]}")
    return (x - stats.mean[None, None, :]) / stats.std[None, None, :]


def save_norm_stats(path, stats: NormStats) -> None:
    """Store stats as a 1 x 2 x F tensor: row 0 mean, row 1 std."""
    write_tensor(path, np.stack([stats.mean, stats.std])[np.newaxis, :, :])


def load_norm_stats(path) -> NormStats:
    arr = read_tensor(path)
    if arr.shape[0] != 1 or arr.shape[1] != 2:
        raise ValueError(f"norm stats tensor must be 1x2xF, got {arr.shape}")
    return NormStats(mean=arr[0, 0].copy(), std=arr[0, 1].copy())
