"""Receptive-field-restricted residual CNN with five augmentation hook points.

The network is a 12-block ResNet behind a strided 5x5 stem, organized in
three width stages with 2x2 max pooling after specific early blocks. Hook
points sit at the input (layer 0), after the stem (layer 1), at the two
stage transitions (layers 2 and 3), and after the last block (layer 4); a
hook receives the exact intermediate tensor and its return value replaces
it. Initialization draws from the package's own seeded generator so builds
are bit-reproducible.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .tensors import SeededRng, tensor_from_bytes, tensor_to_bytes


class NumericError(RuntimeError):
    """A computation produced non-finite values."""


@dataclass(frozen=True)
class BlockSpec:
    """One residual block: its two kernel sizes, width stage, trailing pool."""

    k1: int
    k2: int
    stage: int
    pool: bool


# 12-block layout: stage 0 blocks carry the 3x3 kernels and the three 2x2
# max pools; later stages taper to 1x1 kernels.
DEFAULT_BLOCKS: tuple[BlockSpec, ...] = (
    BlockSpec(3, 1, 0, True),
    BlockSpec(3, 3, 0, True),
    BlockSpec(3, 3, 0, False),
    BlockSpec(3, 3, 0, True),
    BlockSpec(3, 1, 1, False),
    BlockSpec(1, 1, 1, False),
    BlockSpec(1, 1, 1, False),
    BlockSpec(1, 1, 1, False),
    BlockSpec(1, 1, 2, False),
    BlockSpec(1, 1, 2, False),
    BlockSpec(1, 1, 2, False),
    BlockSpec(1, 1, 2, False),
)

HOOK_LAYERS = (0, 1, 2, 3, 4)
# Hook id -> index of the block it precedes (layer 4 follows the last block).
_HOOK_BEFORE_BLOCK = {2: 4, 3: 8}


class ConfigError(ValueError):
    """Inconsistent model configuration."""


@dataclass(frozen=True)
class ModelConfig:
    stem_channels: int
    stage_channels: tuple[int, int, int]
    num_classes: int = 10
    in_channels: int = 1
    stem_kernel: int = 5
    stem_stride: int = 2
    blocks: tuple[BlockSpec, ...] = DEFAULT_BLOCKS

    def __post_init__(self):
        if min(self.stem_channels, self.num_classes, self.in_channels) < 1:
            raise ConfigError("channel and class counts must be >= 1")
        if len(self.stage_channels) != 3 or min(self.stage_channels) < 1:
            raise ConfigError(f"need three positive stage widths, got {self.stage_channels}")
        stages = [b.stage for b in self.blocks]
        if stages != sorted(stages) or set(stages) - {0, 1, 2}:
            raise ConfigError("block stages must be nondecreasing within 0..2")
        for b in self.blocks:
            if b.k1 % 2 == 0 or b.k2 % 2 == 0 or b.k1 < 1 or b.k2 < 1:
                raise ConfigError(f"kernels must be odd and >= 1, got {b}")

    def block_channels(self) -> list[tuple[int, int]]:
        """(in, out) channels of each block in order."""
        pairs = []
        prev = self.stem_channels
        for b in self.blocks:
            out = self.stage_channels[b.stage]
            pairs.append((prev, out))
            prev = out
        return pairs


def full_preset(num_classes: int = 10) -> ModelConfig:
    """Full-width preset used for architecture verification."""
    return ModelConfig(stem_channels=64, stage_channels=(128, 256, 512), num_classes=num_classes)


def toy_preset(num_classes: int = 10) -> ModelConfig:
    """Desk-scale preset: same topology at 8/16/32 channels."""
    return ModelConfig(stem_channels=8, stage_channels=(8, 16, 32), num_classes=num_classes)


class ResidualBlock(nn.Module):
    def __init__(self, cin: int, cout: int, k1: int, k2: int):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, k1, padding=k1 // 2, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, k2, padding=k2 // 2, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        if cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, bias=False), nn.BatchNorm2d(cout)
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        h = F.relu(self.bn1(self.conv1(x)))
        h = self.bn2(self.conv2(h))
        return F.relu(h + self.shortcut(x))


class HookedResNet(nn.Module):
    """The network; `forward` optionally intercepts tensors at hook layers."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.stem = nn.Sequential(
            nn.Conv2d(
                config.in_channels,
                config.stem_channels,
                config.stem_kernel,
                stride=config.stem_stride,
                padding=config.stem_kernel // 2,
                bias=False,
            ),
            nn.BatchNorm2d(config.stem_channels),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.ModuleList(
            ResidualBlock(cin, cout, b.k1, b.k2)
            for (cin, cout), b in zip(config.block_channels(), config.blocks)
        )
        self.head = nn.Linear(config.stage_channels[2], config.num_classes)

    @staticmethod
    def _apply_hook(x, hooks, layer: int):
        if hooks and layer in hooks:
            out = hooks[layer](x)
            if not torch.is_tensor(out) or out.shape != x.shape:
                got = tuple(out.shape) if torch.is_tensor(out) else type(out).__name__
                raise RuntimeError(
                    f"hook at layer {layer} returned shape {got}, expected {tuple(x.shape)}"
                )
            return out
        return x

    def forward(self, x, hooks: dict | None = None):
        if hooks:
            unknown = set(hooks) - set(HOOK_LAYERS)
            if unknown:
                raise ValueError(f"unknown hook layers {sorted(unknown)}")
        x = self._apply_hook(x, hooks, 0)
        x = self.stem(x)
        x = self._apply_hook(x, hooks, 1)
        for i, (block, spec) in enumerate(zip(self.blocks, self.config.blocks)):
            for layer, before in _HOOK_BEFORE_BLOCK.items():
                if i == before:
                    x = self._apply_hook(x, hooks, layer)
            x = block(x)
            if spec.pool:
                x = F.max_pool2d(x, 2)
        x = self._apply_hook(x, hooks, 4)
        x = x.mean(dim=(2, 3))
        return self.head(x)


def build_model(config: ModelConfig, rng: SeededRng) -> HookedResNet:
    """Construct and He-initialize a network from the seeded generator.

    Draw order follows named_parameters(), so a given (config, rng state)
    always produces bit-identical weights.
    """
    model = HookedResNet(config)
    with torch.no_grad():
        for name, param in model.named_parameters():
            if param.ndim >= 2:  # conv (out, in, kh, kw) or linear (out, in)
                fan_in = int(np.prod(param.shape[1:]))
                values = rng.normal(param.numel(), std=float(np.sqrt(2.0 / fan_in)))
                param.copy_(torch.from_numpy(values.astype(np.float32)).view_as(param))
            elif name.endswith("weight"):  # batch-norm scale
                param.fill_(1.0)
            else:  # all biases
                param.zero_()
    return model


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


# ---------------------------------------------------------------------------
# Analytic geometry
# ---------------------------------------------------------------------------


def _layer_sequence(config: ModelConfig):
    """(kernel, stride) pairs of the longest path, input to last block."""
    seq = [(config.stem_kernel, config.stem_stride)]
    for b in config.blocks:
        seq.append((b.k1, 1))
        seq.append((b.k2, 1))
        if b.pool:
            seq.append((2, 2))
    return seq


def receptive_field(config: ModelConfig) -> int:
    """Receptive field of one pre-pooling output unit, from kernel/stride math."""
    rf, jump = 1, 1
    for k, s in _layer_sequence(config):
        rf += (k - 1) * jump
        jump *= s
    return rf


def _conv_out(n: int, k: int, s: int) -> int:
    return (n + 2 * (k // 2) - k) // s + 1


def hook_shapes(config: ModelConfig, t_dim: int, f_dim: int) -> dict[int, tuple[int, int, int]]:
    """(C, T, F) seen by each hook layer for a given input size."""
    shapes = {0: (config.in_channels, t_dim, f_dim)}
    t = _conv_out(t_dim, config.stem_kernel, config.stem_stride)
    f = _conv_out(f_dim, config.stem_kernel, config.stem_stride)
    c = config.stem_channels
    shapes[1] = (c, t, f)
    for i, b in enumerate(config.blocks):
        for layer, before in _HOOK_BEFORE_BLOCK.items():
            if i == before:
                shapes[layer] = (c, t, f)
        c = config.stage_channels[b.stage]
        if b.pool:
            t, f = t // 2, f // 2
        if min(t, f) < 1:
            raise ConfigError(f"input {t_dim}x{f_dim} collapses to nothing at block {i + 1}")
    shapes[4] = (c, t, f)
    return shapes


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1

# Hook layer that opens the segment each module group belongs to.
_SEGMENT_OF_PREFIX = (("stem", 1), ("blocks.0.", 1), ("blocks.1.", 1), ("blocks.2.", 1), ("blocks.3.", 1),
                      ("blocks.4.", 2), ("blocks.5.", 2), ("blocks.6.", 2), ("blocks.7.", 2),
                      ("blocks.8.", 3), ("blocks.9.", 3), ("blocks.10.", 3), ("blocks.11.", 3),
                      ("head", 4))


def _segment(name: str) -> int:
    for prefix, seg in _SEGMENT_OF_PREFIX:
        if name.startswith(prefix):
            return seg
    return 4


def save_checkpoint(model: HookedResNet, path) -> None:
    """Write parameters and batch-norm statistics as SAPP tensors in a zip.

    The manifest records (name, shape, layer segment, kind). Integer
    bookkeeping buffers are not stored.
    """
    entries = []
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        state = model.state_dict()
        for name, value in state.items():
            if value.dtype not in (torch.float32, torch.float64):
                continue  # num_batches_tracked etc.
            arr = value.detach().cpu().numpy().astype(np.float32)
            flat = arr.reshape(1, 1, -1)
            file_name = f"tensors/{name}.sapp"
            zf.writestr(file_name, tensor_to_bytes(flat))
            entries.append(
                {
                    "name": name,
                    "shape": list(arr.shape),
                    "layer": _segment(name),
                    "kind": "buffer" if name.endswith(("running_mean", "running_var")) else "parameter",
                    "file": file_name,
                }
            )
        manifest = {"format_version": CHECKPOINT_VERSION, "tensors": entries}
        zf.writestr("manifest.json", json.dumps(manifest, indent=2))


def load_checkpoint(path, model: HookedResNet) -> None:
    """Load a checkpoint written by save_checkpoint into `model`."""
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('format_version')}")
        state = model.state_dict()
        loaded = {}
        for entry in manifest["tensors"]:
            name, shape = entry["name"], tuple(entry["shape"])
            if name not in state:
                raise ValueError(f"checkpoint tensor {name!r} not in model")
            if tuple(state[name].shape) != shape:
                raise ValueError(f"{name}: checkpoint shape {shape} != model {tuple(state[name].shape)}")
            flat = tensor_from_bytes(zf.read(entry["file"]))
            loaded[name] = torch.from_numpy(flat.reshape(shape).copy()).to(state[name].dtype)
        missing = [n for n, v in state.items() if n not in loaded and v.dtype in (torch.float32, torch.float64)]
        if missing:
            raise ValueError(f"checkpoint missing tensors: {missing[:4]}")
        state.update(loaded)
        model.load_state_dict(state)


def capture_hidden_state(model: HookedResNet, inputs: torch.Tensor, layer: int) -> torch.Tensor:
    """The exact tensor a hook at `layer` would receive for these inputs."""
    captured = {}

    def grab(t):
        captured["value"] = t.detach().clone()
        return t

    with torch.no_grad():
        model(inputs, {layer: grab})
    return captured["value"]


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def grad_check(
    model: HookedResNet,
    inputs: torch.Tensor,
    labels: torch.Tensor,
    hooks: dict | None = None,
    *,
    eps: float = 1e-7,
    num_samples: int = 200,
    rng: SeededRng | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in float64 on `num_samples` randomly chosen parameter coordinates.
    The relative error uses a unit floor in the denominator so near-zero
    gradient pairs compare absolutely. The step is small enough that a ReLU
    kink near (but not at) the evaluation point stays outside the stencil,
    while float64 keeps the difference two decades above roundoff.
    """
    rng = rng or SeededRng(0)
    model = model.double()
    inputs = inputs.double()
    state_backup = {k: v.clone() for k, v in model.state_dict().items()}
    model.train()

    def loss_value() -> torch.Tensor:
        return F.cross_entropy(model(inputs, hooks), labels)

    model.zero_grad()
    loss = loss_value()
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite loss {loss.item()} in gradient check")
    loss.backward()

    params = [p for p in model.parameters() if p.requires_grad]
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    count = min(num_samples, total)
    chosen: set[int] = set()
    while len(chosen) < count:
        chosen.add(rng.integers(0, total - 1))

    max_err = 0.0
    with torch.no_grad():
        for flat_index in sorted(chosen):
            pi, offset = 0, flat_index
            while offset >= sizes[pi]:
                offset -= sizes[pi]
                pi += 1
            param = params[pi]
            flat = param.view(-1)
            original = flat[offset].item()
            h = eps * max(1.0, abs(original))
            flat[offset] = original + h
            up = loss_value().item()
            flat[offset] = original - h
            down = loss_value().item()
            flat[offset] = original
            numeric = (up - down) / (2.0 * h)
            analytic = param.grad.view(-1)[offset].item()
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1.0)
            max_err = max(max_err, err)

    model.load_state_dict(state_backup)
    return max_err
