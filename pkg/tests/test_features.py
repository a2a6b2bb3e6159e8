import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specmask.features import (
    FeatureConfig,
    NormStats,
    apply_norm,
    fit_norm,
    frame_count,
    load_norm_stats,
    logmel,
    mel_filterbank,
    resample,
    save_norm_stats,
    stft_power,
)


def tone(freq, seconds, rate, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * np.pi * freq * t)


class TestResample:
    def test_two_to_one_length(self):
        out = resample(np.zeros(441000), 44100)
        assert len(out) == 220500

    def test_duration_within_one_sample(self):
        out = resample(np.zeros(48000), 48000)
        assert abs(len(out) - 22050) <= 1

    def test_dc_preserved(self):
        out = resample(np.full(44100, 0.25), 44100)
        assert np.max(np.abs(out - 0.25)) < 1e-3

    def test_tone_peak_survives(self):
        out = resample(tone(1000.0, 2.0, 44100), 44100)
        spectrum = np.abs(np.fft.rfft(out * np.hanning(len(out))))
        freqs = np.fft.rfftfreq(len(out), d=1 / 22050)
        assert abs(freqs[spectrum.argmax()] - 1000.0) < 5.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            resample(np.array([]), 44100)

    def test_upsampling_rejected(self):
        with pytest.raises(ValueError, match="below target"):
            resample(np.zeros(100), 16000)


class TestLogmel:
    def test_ten_second_default_shape(self):
        x = logmel(np.random.default_rng(0).normal(size=220500) * 0.1, FeatureConfig())
        assert x.shape == (1, 431, 256)

    def test_silence_hits_log_floor(self):
        cfg = FeatureConfig(mel_bins=32)
        x = logmel(np.zeros(22050), cfg)
        assert np.allclose(x, np.log(cfg.log_floor))

    def test_white_noise_reaches_every_bin(self):
        cfg = FeatureConfig()
        floor = np.log(cfg.log_floor)
        means = []
        for trial in range(10):
            clip = np.random.default_rng(trial).normal(size=44100) * 0.3
            means.append(logmel(clip, cfg)[0].mean(axis=0))
        mean_energy = np.mean(means, axis=0)
        assert (mean_energy > floor + 1.0).all()

    def test_deterministic_bits(self):
        clip = np.random.default_rng(5).normal(size=30000)
        cfg = FeatureConfig(mel_bins=48)
        assert logmel(clip, cfg).tobytes() == logmel(clip, cfg).tobytes()

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="shorter than window"):
            logmel(np.zeros(100), FeatureConfig())

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(2048, 80000))
    def test_frame_count_law(self, n):
        cfg = FeatureConfig(mel_bins=8)
        assert stft_power(np.zeros(n), cfg).shape[0] == 1 + n // cfg.hop == frame_count(n, cfg.hop)


class TestFilterbank:
    def test_non_negative_and_interior_coverage(self):
        cfg = FeatureConfig()
        fb = mel_filterbank(cfg)
        assert (fb >= 0).all()
        freqs = np.arange(fb.shape[1]) * (cfg.sample_rate / cfg.window)
        interior = (freqs > cfg.fmin) & (freqs < cfg.fmax)
        assert (fb[:, interior].max(axis=0) > 0).all(), "uncovered interior FFT bin"

    def test_every_filter_nonempty_at_defaults(self):
        fb = mel_filterbank(FeatureConfig())
        assert (fb.sum(axis=1) > 0).all()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FeatureConfig(hop=4096)
        with pytest.raises(ValueError):
            FeatureConfig(fmin=500, fmax=100)
        with pytest.raises(ValueError):
            FeatureConfig(fmax=20000)
        with pytest.raises(ValueError):
            FeatureConfig(mel_bins=0)


class TestNormalization:
    def test_constant_input(self):
        x = np.full((1, 3, 4), 5.0, dtype=np.float32)
        stats = fit_norm([x])
        assert np.allclose(stats.mean, 5.0)
        assert np.allclose(stats.std, 1e-8)
        assert np.allclose(apply_norm(x, stats), 0.0)

    def test_two_tensor_closed_form(self):
        a = np.zeros((1, 2, 3), dtype=np.float32)
        b = np.full((1, 2, 3), 2.0, dtype=np.float32)
        stats = fit_norm([a, b])
        assert np.allclose(stats.mean, 1.0)
        assert np.allclose(stats.std, 1.0)
        assert np.allclose(apply_norm(a, stats), -1.0)
        assert np.allclose(apply_norm(b, stats), 1.0)

    def test_identity_stats(self, rng_np):
        x = rng_np.normal(size=(1, 4, 6)).astype(np.float32)
        stats = NormStats(mean=np.zeros(6, np.float32), std=np.ones(6, np.float32))
        assert np.allclose(apply_norm(x, stats), x)

    def test_training_set_standardized(self, rng_np):
        tensors = [rng_np.normal(loc=3, scale=2, size=(1, 50, 8)).astype(np.float32) for _ in range(6)]
        stats = fit_norm(tensors)
        normed = np.concatenate([apply_norm(x, stats).reshape(-1, 8) for x in tensors])
        assert np.all(np.abs(normed.mean(axis=0)) <= 1e-4)
        assert np.all(np.abs(normed.var(axis=0) - 1.0) <= 1e-3)

    def test_mismatched_bins_rejected(self):
        with pytest.raises(ValueError, match="bins"):
            fit_norm([np.ones((1, 2, 4), np.float32), np.ones((1, 2, 5), np.float32)])
        stats = fit_norm([np.ones((1, 2, 4), np.float32)])
        with pytest.raises(ValueError, match="bins"):
            apply_norm(np.ones((1, 2, 5), np.float32), stats)

    def test_empty_training_list_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            fit_norm([])

    def test_stats_sapp_round_trip(self, tmp_path, rng_np):
        stats = fit_norm([rng_np.normal(size=(1, 9, 7)).astype(np.float32)])
        path = tmp_path / "norm.sapp"
        save_norm_stats(path, stats)
        back = load_norm_stats(path)
        assert np.array_equal(back.mean, stats.mean)
        assert np.array_equal(back.std, stats.std)
