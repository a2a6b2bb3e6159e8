"""Per-iteration augmentation policy: which layer, which partner, what widths.

One training iteration augments exactly one layer of the whole mini-batch.
Every sample draws its own mask event and (for the mixture/cut schemes) its
own partner from the batch; partner states are always read from the batch as
it was before any augmentation. A batch of one cannot supply a partner, so
mixture/cut fall back to zero masking for that sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masking import (
    MaskParams,
    MaskSpec,
    apply_cut_mask,
    apply_mixture_mask,
    apply_zero_mask,
    sample_mask,
)
from .tensors import SeededRng, as_feature_tensor

SCHEMES = ("ZM", "MM", "CM", "OFF")

# choose_partner returns this when the batch has no other sample to offer;
# callers must fall back to zero masking.
PARTNER_NONE = -1


@dataclass(frozen=True)
class AugmentPolicy:
    """Configuration of the masking applied during training."""

    scheme: str = "MM"
    layer_set: tuple[int, ...] = (0, 1, 2, 3, 4)
    time_ratio: float = 0.10
    freq_ratio: float = 0.10
    absolute_params: MaskParams | None = None  # overrides ratios at layer 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        layers = tuple(sorted(set(self.layer_set)))
        object.__setattr__(self, "layer_set", layers)
        if any(l not in range(5) for l in layers):
            raise ValueError(f"layer_set must be a subset of 0..4, got {layers}")
        if not layers and self.scheme != "OFF":
            raise ValueError("layer_set must be nonempty unless scheme is OFF")
        for name, r in (("time_ratio", self.time_ratio), ("freq_ratio", self.freq_ratio)):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {r}")

    @staticmethod
    def off() -> "AugmentPolicy":
        return AugmentPolicy(scheme="OFF", layer_set=())


def resolve_params(ratio_t: float, ratio_f: float, t_dim: int, f_dim: int) -> MaskParams:
    """Turn masking ratios into absolute width bounds at a layer's (T, F).

    Rounds half-up so a 0.10 ratio of 431 frames gives 43 and of 256 bins
    gives 26; results are clamped to the dimensions.
    """
    if not 0.0 <= ratio_t <= 1.0 or not 0.0 <= ratio_f <= 1.0:
        raise ValueError(f"ratios must be in [0, 1], got ({ratio_t}, {ratio_f})")
    if t_dim < 1 or f_dim < 1:
        raise ValueError(f"dimensions must be >= 1, got ({t_dim}, {f_dim})")
    t_max = min(t_dim, int(np.floor(ratio_t * t_dim + 0.5)))
    f_max = min(f_dim, int(np.floor(ratio_f * f_dim + 0.5)))
    return MaskParams(t_max=t_max, f_max=f_max)


def params_at_layer(policy: AugmentPolicy, layer: int, t_dim: int, f_dim: int) -> MaskParams:
    """Width bounds the policy prescribes for a layer of the given dims."""
    if layer == 0 and policy.absolute_params is not None:
        p = policy.absolute_params
        p.validate(t_dim, f_dim)
        return p
    return resolve_params(policy.time_ratio, policy.freq_ratio, t_dim, f_dim)


def choose_layer(layer_set, rng: SeededRng) -> int:
    """Pick the one layer this iteration augments, uniform over the set."""
    layers = tuple(sorted(set(layer_set)))
    if not layers:
        raise ValueError("cannot choose from an empty layer set")
    return layers[rng.integers(0, len(layers) - 1)]


def choose_partner(batch_size: int, i: int, rng: SeededRng) -> int:
    """Pick a partner index != i, uniform over the rest of the batch.

    Returns PARTNER_NONE for a single-sample batch.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not 0 <= i < batch_size:
        raise ValueError(f"index {i} outside batch of {batch_size}")
    if batch_size == 1:
        return PARTNER_NONE
    j = rng.integers(0, batch_size - 2)
    return j if j < i else j + 1


@dataclass(frozen=True)
class SamplePlan:
    """Drawn augmentation for one sample: its mask and its partner (or none)."""

    spec: MaskSpec
    partner: int  # PARTNER_NONE when no partner is used


def draw_batch_plan(
    batch_size: int,
    t_dim: int,
    f_dim: int,
    scheme: str,
    params: MaskParams,
    rng: SeededRng,
) -> list[SamplePlan]:
    """Draw all per-sample mask events and partner picks for one iteration.

    The draw sequence (per sample: mask then partner) is fixed so the plan
    depends only on the rng stream, never on tensor contents. Both the
    in-process applier and the training hook consume plans from here.
    """
    if scheme not in SCHEMES or scheme == "OFF":
        raise ValueError(f"cannot draw a plan for scheme {scheme!r}")
    plans = []
    for i in range(batch_size):
        spec = sample_mask(t_dim, f_dim, params, rng)
        partner = choose_partner(batch_size, i, rng) if scheme in ("MM", "CM") else PARTNER_NONE
        plans.append(SamplePlan(spec=spec, partner=partner))
    return plans


def apply_plan(batch: list[np.ndarray], scheme: str, plans: list[SamplePlan]) -> list[np.ndarray]:
    """Apply a drawn plan to a batch; partner reads see pre-augmentation values."""
    if len(plans) != len(batch):
        raise ValueError(f"plan length {len(plans)} != batch size {len(batch)}")
    out = []
    for i, (x, plan) in enumerate(zip(batch, plans)):
        if scheme == "ZM" or plan.partner == PARTNER_NONE:
            out.append(apply_zero_mask(x, plan.spec))
        elif scheme == "MM":
            out.append(apply_mixture_mask(x, batch[plan.partner], plan.spec))
        elif scheme == "CM":
            out.append(apply_cut_mask(x, batch[plan.partner], plan.spec))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    return out


def augment_batch(
    batch: list[np.ndarray],
    policy: AugmentPolicy,
    rng: SeededRng,
    *,
    layer: int = 0,
) -> list[np.ndarray]:
    """Augment every sample of a batch at the already-chosen layer.

    All tensors must share one (C, T, F) shape. OFF returns the batch
    unchanged. Each sample gets fresh draws and its own partner; the scheme
    is applied across all channels with that sample's single mask event.
    """
    if policy.scheme == "OFF":
        return batch
    if not batch:
        raise ValueError("empty batch")
    batch = [as_feature_tensor(x) for x in batch]
    shape = batch[0].shape
    for i, x in enumerate(batch):
        if x.shape != shape:
            raise ValueError(f"inconsistent shapes in batch: sample {i} has {x.shape}, expected {shape}")
    _, t_dim, f_dim = shape
    params = params_at_layer(policy, layer, t_dim, f_dim)
    plans = draw_batch_plan(len(batch), t_dim, f_dim, policy.scheme, params, rng)
    return apply_plan(batch, policy.scheme, plans)
