import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from specmask.tensors import (
    HEADER_SIZE,
    FormatError,
    SeededRng,
    as_feature_tensor,
    read_tensor,
    rng_for,
    stream_id,
    tensor_from_bytes,
    tensor_to_bytes,
    uniform_int,
    write_tensor,
)


class TestFeatureTensor:
    def test_rank2_promoted_to_single_channel(self):
        x = as_feature_tensor(np.ones((4, 5)))
        assert x.shape == (1, 4, 5)
        assert x.dtype == np.float32

    def test_rejects_non_finite(self):
        bad = np.ones((1, 2, 2), dtype=np.float32)
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            as_feature_tensor(bad)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError, match="rank"):
            as_feature_tensor(np.ones(7))


class TestSappFormat:
    def test_round_trip_bit_exact(self, tmp_path, rng_np):
        x = rng_np.normal(size=(1, 4, 4)).astype(np.float32)
        path = tmp_path / "t.sapp"
        write_tensor(path, x)
        back = read_tensor(path)
        assert back.tobytes() == x.tobytes()
        assert back.shape == x.shape

    @settings(max_examples=40, deadline=None)
    @given(
        c=st.integers(1, 8),
        t=st.integers(1, 64),
        f=st.integers(1, 64),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip_property(self, c, t, f, seed):
        x = np.random.default_rng(seed).normal(size=(c, t, f)).astype(np.float32)
        assert tensor_from_bytes(tensor_to_bytes(x)).tobytes() == x.tobytes()

    def test_file_size_law(self, tmp_path):
        # 64 x 431 x 256 at 4 bytes per value behind a 24-byte header
        x = np.zeros((64, 431, 256), dtype=np.float32)
        path = tmp_path / "big.sapp"
        write_tensor(path, x)
        assert path.stat().st_size == 24 + 64 * 431 * 256 * 4
        assert HEADER_SIZE == 24

    def test_wrong_magic(self, tmp_path):
        raw = bytearray(tensor_to_bytes(np.ones((1, 2, 2), dtype=np.float32)))
        raw[:4] = b"NOPE"
        with pytest.raises(FormatError, match="offset 0"):
            tensor_from_bytes(bytes(raw))

    def test_truncated_payload(self):
        raw = tensor_to_bytes(np.ones((1, 2, 2), dtype=np.float32))
        with pytest.raises(FormatError, match="offset 24"):
            tensor_from_bytes(raw[:-3])

    def test_bad_dtype_code(self):
        raw = bytearray(tensor_to_bytes(np.ones((1, 2, 2), dtype=np.float32)))
        raw[20] = 9
        with pytest.raises(FormatError, match="offset 20"):
            tensor_from_bytes(bytes(raw))

    def test_bad_version(self):
        raw = bytearray(tensor_to_bytes(np.ones((1, 2, 2), dtype=np.float32)))
        raw[4] = 9
        with pytest.raises(FormatError, match="offset 4"):
            tensor_from_bytes(bytes(raw))


class TestSeededRng:
    def test_single_point_range(self):
        assert uniform_int(SeededRng(0), 5, 5) == 5

    def test_inclusive_bounds(self):
        rng = SeededRng(3)
        draws = [uniform_int(rng, 0, 43) for _ in range(20000)]
        assert min(draws) == 0 and max(draws) == 43

    def test_empty_range_rejected(self):
        with pytest.raises(ValueError, match="lo=2 > hi=1"):
            uniform_int(SeededRng(0), 2, 1)

    def test_determinism_same_seed(self):
        a = SeededRng(7)
        b = SeededRng(7)
        assert [uniform_int(a, 0, 9) for _ in range(50)] == [uniform_int(b, 0, 9) for _ in range(50)]

    def test_streams_differ(self):
        a = SeededRng(7, stream=1)
        b = SeededRng(7, stream=2)
        seq_a = [a.next_u64() for _ in range(16)]
        seq_b = [b.next_u64() for _ in range(16)]
        assert seq_a != seq_b

    def test_chi_square_uniformity(self):
        rng = SeededRng(12345)
        draws = np.array([uniform_int(rng, 0, 43) for _ in range(100_000)])
        counts = np.bincount(draws, minlength=44)
        _, p = chisquare(counts)
        assert p > 0.01, f"chi-square p={p}"

    def test_vectorized_block_matches_scalar(self):
        a = SeededRng(99, stream=5)
        b = SeededRng(99, stream=5)
        block = a._next_block(33)
        scalars = np.array([b.next_u64() for _ in range(33)], dtype=np.uint64)
        assert np.array_equal(block, scalars)

    def test_uniform01_range_and_normal_shape(self):
        rng = SeededRng(1)
        u = rng.uniform01(1000)
        assert u.min() >= 0.0 and u.max() < 1.0
        z = rng.normal(1001)
        assert z.shape == (1001,)
        assert abs(z.mean()) < 0.15

    def test_stream_id_packing(self):
        assert stream_id(1, 0, 0) != stream_id(2, 0, 0)
        assert stream_id(1, 2, 3) != stream_id(1, 3, 2)
        with pytest.raises(ValueError):
            stream_id(1, 1 << 24, 0)

    def test_rng_for_reproducible(self):
        assert rng_for(5, 3, 1, 2).next_u64() == rng_for(5, 3, 1, 2).next_u64()
