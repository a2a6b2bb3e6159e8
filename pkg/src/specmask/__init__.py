"""Deterministic time/frequency masking for spectrograms and CNN hidden states."""

from .masking import (
    MaskParams,
    MaskSpec,
    apply_cut_mask,
    apply_mixture_mask,
    apply_zero_mask,
    sample_mask,
)
from .policy import AugmentPolicy, augment_batch, choose_layer, choose_partner, resolve_params
from .tensors import SeededRng, read_tensor, uniform_int, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AugmentPolicy",
    "MaskParams",
    "MaskSpec",
    "SeededRng",
    "apply_cut_mask",
    "apply_mixture_mask",
    "apply_zero_mask",
    "augment_batch",
    "choose_layer",
    "choose_partner",
    "read_tensor",
    "resolve_params",
    "sample_mask",
    "uniform_int",
    "write_tensor",
    "__version__",
]
