import numpy as np
import pytest

from specmask.data import SyntheticSpec, cache_features, fit_norm_from_cache, load_split, synth_dataset
from specmask.features import FeatureConfig


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """The 4-class band-noise dataset used by trainer, CLI and acceptance tests.

    160 clips of 2 s at 64 mel bins: big enough to train to convergence,
    small enough to extract in seconds.
    """
    root = tmp_path_factory.mktemp("desk_dataset")
    spec = SyntheticSpec(classes=4, clips_per_class=40, clip_seconds=2.0, seed=1, train_fraction=0.75)
    manifest = synth_dataset(spec, root)
    cfg = FeatureConfig(mel_bins=64)
    cache_dir = root / "cache"
    index, report = cache_features(manifest, cfg, root, cache_dir)
    assert not report.failures
    stats = fit_norm_from_cache(manifest, index, cache_dir)
    from specmask.features import save_norm_stats

    save_norm_stats(cache_dir / "norm_stats.sapp", stats)
    split = load_split(manifest, index, cache_dir, stats)
    return {
        "root": root,
        "manifest": manifest,
        "feature_config": cfg,
        "cache_dir": cache_dir,
        "index": index,
        "stats": stats,
        "split": split,
    }


@pytest.fixture()
def rng_np():
    return np.random.default_rng(1234)
