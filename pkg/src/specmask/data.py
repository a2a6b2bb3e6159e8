"""Dataset manifests, a synthetic band-noise dataset, and feature caching.

Manifests use the tab-separated meta-file convention of the DCASE scene
classification sets: one "relative/path.wav<TAB>scene_label" line per clip,
with separate train and test meta files. Real audio is never bundled; the
synthetic generator produces desk-scale datasets whose classes are noise
clips filtered into distinct frequency bands, which a linear classifier on
mean mel energies separates almost perfectly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureConfig, NormStats, TARGET_RATE, apply_norm, fit_norm, logmel, resample
from .tensors import PURPOSE_SYNTH, read_tensor, rng_for, write_tensor


class ParseError(ValueError):
    """Malformed meta or index file; the message carries file and line number."""


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    split: str  # "train" or "test"


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    vocabulary: tuple[str, ...]  # distinct scene names, lexicographic

    def label_id(self, label: str) -> int:
        return self.vocabulary.index(label)

    def split(self, name: str) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.split == name)


def _parse_meta(path) -> list[tuple[str, str]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise ParseError(f"{path}:{lineno}: expected 'path<TAB>label', got {line!r}")
            rows.append((fields[0], fields[1]))
    return rows


def load_manifest(train_meta, test_meta=None) -> DatasetManifest:
    """Parse train (and optionally test) meta files into one manifest.

    The label vocabulary is the lexicographically sorted set of training
    labels; a test label outside it is a validation error, as is any path
    appearing twice.
    """
    entries: list[ManifestEntry] = []
    train_rows = _parse_meta(train_meta)
    vocab = tuple(sorted({label for _, label in train_rows}))
    entries.extend(ManifestEntry(p, l, "train") for p, l in train_rows)
    if test_meta is not None:
        for p, l in _parse_meta(test_meta):
            if l not in vocab:
                raise ValueError(f"test label {l!r} not in training vocabulary {list(vocab)}")
            entries.append(ManifestEntry(p, l, "test"))
    seen = set()
    for e in entries:
        if e.path in seen:
            raise ValueError(f"duplicate path in manifest: {e.path}")
        seen.add(e.path)
    return DatasetManifest(entries=tuple(entries), vocabulary=vocab)


def write_meta(entries, path) -> None:
    """Write entries back out in meta-file format (round-trips with load)."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.path}\t{e.label}\n")


# ---------------------------------------------------------------------------
# Synthetic dataset
# ---------------------------------------------------------------------------

DEFAULT_BANDS = ((600.0, 300.0), (1700.0, 600.0), (3500.0, 1200.0), (7000.0, 2400.0))


@dataclass(frozen=True)
class SyntheticSpec:
    """Band-noise dataset: class k is white noise confined to band k."""

    classes: int = 4
    clips_per_class: int = 20
    clip_seconds: float = 2.0
    bands: tuple[tuple[float, float], ...] = DEFAULT_BANDS  # (center Hz, full width Hz)
    seed: int = 1
    train_fraction: float = 0.75
    sample_rate: int = TARGET_RATE

    def __post_init__(self):
        if self.classes < 1:
            raise ValueError("need at least one class")
        if len(self.bands) < self.classes:
            raise ValueError(f"{self.classes} classes but only {len(self.bands)} bands")
        nyquist = self.sample_rate / 2
        for center, width in self.bands[: self.classes]:
            if center - width / 2 < 0 or center + width / 2 > nyquist:
                raise ValueError(f"band {center}+-{width / 2} Hz outside [0, {nyquist}]")
        if self.clips_per_class < 1 or self.clip_seconds <= 0:
            raise ValueError("need at least one clip of positive duration")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


def band_noise(n: int, sample_rate: int, center: float, width: float, rng) -> np.ndarray:
    """White noise band-passed to [center - width/2, center + width/2] via FFT masking."""
    white = rng.normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    keep = (freqs >= center - width / 2) & (freqs <= center + width / 2)
    spectrum[~keep] = 0.0
    out = np.fft.irfft(spectrum, n=n)
    peak = np.abs(out).max()
    if peak > 0:
        out = out * (0.5 / peak)
    return out


def synth_dataset(spec: SyntheticSpec, out_dir) -> DatasetManifest:
    """Generate WAV clips plus train/test meta files under out_dir.

    Deterministic in spec.seed: clip (k, i) draws from its own rng stream.
    The first round(clips_per_class * train_fraction) clips of each class go
    to the train split.
    """
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    from scipy.io import wavfile  # deferred: scipy.io import is slow

    n = int(round(spec.clip_seconds * spec.sample_rate))
    n_train = min(spec.clips_per_class, max(1, int(round(spec.clips_per_class * spec.train_fraction))))
    train_entries, test_entries = [], []
    for k in range(spec.classes):
        center, width = spec.bands[k]
        label = f"band{k}"
        for i in range(spec.clips_per_class):
            rng = rng_for(spec.seed, PURPOSE_SYNTH, k, i)
            clip = band_noise(n, spec.sample_rate, center, width, rng)
            # +-3 dB gain jitter so clips are not identical in level
            gain = 10.0 ** ((rng.uniform01(1)[0] * 6.0 - 3.0) / 20.0)
            pcm = np.clip(clip * gain, -1.0, 1.0)
            rel = f"audio/{label}_{i:03d}.wav"
            wavfile.write(out_dir / rel, spec.sample_rate, (pcm * 32767.0).astype(np.int16))
            entry = ManifestEntry(rel, label, "train" if i < n_train else "test")
            (train_entries if i < n_train else test_entries).append(entry)
    write_meta(train_entries, out_dir / "meta_train.txt")
    write_meta(test_entries, out_dir / "meta_test.txt")
    return load_manifest(out_dir / "meta_train.txt", out_dir / "meta_test.txt")


def read_audio(path) -> tuple[np.ndarray, int]:
    """Read a mono PCM WAV (16-bit int or 32-bit float) as float64 in [-1, 1]."""
    from scipy.io import wavfile  # deferred: scipy.io import is slow

    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0, rate
    if data.dtype == np.float32:
        return data.astype(np.float64), rate
    raise ValueError(f"{path}: unsupported sample format {data.dtype}")


# ---------------------------------------------------------------------------
# Feature cache
# ---------------------------------------------------------------------------


@dataclass
class CacheIndex:
    """Maps each manifest path to its cached tensor file and label id."""

    entries: dict[str, tuple[str, int]] = field(default_factory=dict)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for clip, (tensor_file, label_id) in sorted(self.entries.items()):
                fh.write(f"{clip}\t{tensor_file}\t{label_id}\n")

    @staticmethod
    def load(path) -> "CacheIndex":
        entries = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise ParseError(f"{path}:{lineno}: expected 3 tab-separated fields")
                entries[fields[0]] = (fields[1], int(fields[2]))
        return CacheIndex(entries=entries)


@dataclass
class CacheReport:
    written: int = 0
    skipped: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)  # (path, reason)


def _content_key(audio_path: Path, cfg: FeatureConfig) -> str:
    h = hashlib.sha256()
    h.update(repr(cfg).encode())
    with open(audio_path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()[:20]


def cache_features(
    manifest: DatasetManifest,
    cfg: FeatureConfig,
    audio_root,
    cache_dir,
) -> tuple[CacheIndex, CacheReport]:
    """Extract one SAPP tensor per clip into cache_dir.

    Tensor filenames are keyed by a hash of the audio bytes and the feature
    config, so reruns skip up-to-date entries and edits force re-extraction.
    Unreadable clips are collected into the report; the run continues.
    """
    audio_root = Path(audio_root)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    index = CacheIndex()
    report = CacheReport()
    for entry in manifest.entries:
        src = audio_root / entry.path
        try:
            key = _content_key(src, cfg)
            tensor_file = f"{key}.sapp"
            dst = cache_dir / tensor_file
            if not dst.exists():
                audio, rate = read_audio(src)
                if rate != cfg.sample_rate:
                    audio = resample(audio, rate, cfg.sample_rate)
                write_tensor(dst, logmel(audio, cfg))
                report.written += 1
            else:
                report.skipped += 1
            index.entries[entry.path] = (tensor_file, manifest.label_id(entry.label))
        except (OSError, ValueError) as exc:
            report.failures.append((entry.path, str(exc)))
    index.save(cache_dir / "cache_index.tsv")
    return index, report


def fit_norm_from_cache(manifest: DatasetManifest, index: CacheIndex, cache_dir) -> NormStats:
    """Fit normalization statistics over the cached train-split tensors."""
    cache_dir = Path(cache_dir)
    train = [read_tensor(cache_dir / index.entries[e.path][0]) for e in manifest.split("train") if e.path in index.entries]
    if not train:
        raise ValueError("no cached train tensors to fit on")
    return fit_norm(train)


@dataclass
class DataSplit:
    """In-memory dataset: stacked normalized features plus integer labels."""

    train_x: np.ndarray  # (N, 1, T, F) float32
    train_y: np.ndarray  # (N,) int64
    test_x: np.ndarray
    test_y: np.ndarray
    num_classes: int


def load_split(manifest: DatasetManifest, index: CacheIndex, cache_dir, stats=None) -> DataSplit:
    """Materialize both splits from the cache, applying normalization if given.

    All clips must share one (T, F) shape; desk-scale sets fit in memory.
    """
    cache_dir = Path(cache_dir)

    def gather(split):
        xs, ys = [], []
        for e in manifest.split(split):
            if e.path not in index.entries:
                raise ValueError(f"clip {e.path} missing from cache index")
            tensor_file, label_id = index.entries[e.path]
            x = read_tensor(cache_dir / tensor_file)
            if stats is not None:
                x = apply_norm(x, stats)
            xs.append(x)
            ys.append(label_id)
        if not xs:
            raise ValueError(f"empty {split} split")
        return np.stack(xs), np.asarray(ys, dtype=np.int64)

    train_x, train_y = gather("train")
    test_x, test_y = gather("test")
    return DataSplit(train_x, train_y, test_x, test_y, num_classes=len(manifest.vocabulary))
