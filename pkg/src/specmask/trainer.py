"""Training loop: Adam, linear-decay learning rate, hook-based augmentation.

Each configured seed trains its own model; augmentation runs only on
training batches, through a forward hook at the one layer chosen for that
iteration. Evaluation never applies hooks. The report aggregates final test
accuracy over all seeds and keeps per-epoch curves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .masking import band_mask
from .model import (
    HookedResNet,
    ModelConfig,
    NumericError,
    build_model,
    hook_shapes,
    save_checkpoint,
)
from .policy import (
    PARTNER_NONE,
    AugmentPolicy,
    SamplePlan,
    choose_layer,
    draw_batch_plan,
    params_at_layer,
)
from .tensors import (
    PURPOSE_AUGMENT,
    PURPOSE_INIT,
    PURPOSE_SHUFFLE,
    SeededRng,
    rng_for,
)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr_init: float = 1e-4
    lr_floor: float = 5e-6
    decay_start: int = 4
    decay_end: int = 21
    batch_size: int = 32
    seeds: tuple[int, ...] = (0, 1, 2)
    policy: AugmentPolicy = AugmentPolicy.off()
    weight_decay: float = 0.0
    grad_clip: float | None = None

    def __post_init__(self):
        if not 0 <= self.decay_start < self.decay_end <= self.epochs:
            raise ValueError(
                f"need 0 <= decay_start < decay_end <= epochs, got "
                f"{self.decay_start}, {self.decay_end}, {self.epochs}"
            )
        if not 0 < self.lr_floor < self.lr_init:
            raise ValueError(f"need 0 < lr_floor < lr_init, got {self.lr_floor}, {self.lr_init}")
        if self.batch_size < 1 or not self.seeds:
            raise ValueError("batch_size must be >= 1 and seeds nonempty")


FULL_EPOCHS = 350
FULL_DECAY_START = 50
FULL_DECAY_END = 250


def full_schedule(**overrides) -> TrainConfig:
    """The full-scale schedule: 350 epochs, linear decay between 50 and 250."""
    args = dict(epochs=FULL_EPOCHS, decay_start=FULL_DECAY_START, decay_end=FULL_DECAY_END)
    args.update(overrides)
    return TrainConfig(**args)


def toy_schedule(epochs: int = 30, **overrides) -> TrainConfig:
    """Scale the full schedule's breakpoints proportionally to a smaller epoch budget."""
    start = max(0, int(round(FULL_DECAY_START * epochs / FULL_EPOCHS)))
    end = min(epochs, max(start + 1, int(round(FULL_DECAY_END * epochs / FULL_EPOCHS))))
    args = dict(epochs=epochs, decay_start=start, decay_end=end)
    args.update(overrides)
    return TrainConfig(**args)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for an epoch: flat, then linear decay, then floor."""
    if not 0 <= epoch < cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if epoch < cfg.decay_start:
        return cfg.lr_init
    if epoch >= cfg.decay_end:
        return cfg.lr_floor
    frac = (epoch - cfg.decay_start) / (cfg.decay_end - cfg.decay_start)
    return cfg.lr_init + (cfg.lr_floor - cfg.lr_init) * frac


def masking_hook(plans: list[SamplePlan], scheme: str, frozen_partners: torch.Tensor | None = None):
    """Forward hook applying a drawn plan to a (B, C, T, F) batch tensor.

    By default partner states are read from the hook's original input, so
    every partner sees pre-augmentation values; partners are detached, so no
    gradient flows into the partner sample. For gradient verification pass
    `frozen_partners`, a constant tensor standing in for the partner states:
    finite differences cannot represent the detach, so the checked function
    must hold partners fixed.
    """

    def hook(x: torch.Tensor) -> torch.Tensor:
        b, _, t, f = x.shape
        if len(plans) != b:
            raise ValueError(f"plan for {len(plans)} samples applied to batch of {b}")
        source = x if frozen_partners is None else frozen_partners.to(x.dtype)
        outs = []
        zero = torch.zeros((), dtype=x.dtype, device=x.device)
        for i, plan in enumerate(plans):
            xi = x[i : i + 1]
            mask = torch.from_numpy(band_mask(t, f, plan.spec)).view(1, 1, t, f)
            if scheme == "ZM" or plan.partner == PARTNER_NONE:
                outs.append(torch.where(mask, zero, xi))
                continue
            y = source[plan.partner : plan.partner + 1].detach()
            if scheme == "MM":
                outs.append(torch.where(mask, (xi + y) / 2, xi))
            elif scheme == "CM":
                outs.append(torch.where(mask, y, xi))
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
        return torch.cat(outs, dim=0)

    return hook


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    train_accuracy: float
    test_accuracy: float


@dataclass
class RunReport:
    """Per-seed outcomes of one training configuration."""

    seed_accuracies: dict[int, float]
    curves: dict[int, list[EpochStats]] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.seed_accuracies.values())))

    @property
    def std(self) -> float:
        return float(np.std(list(self.seed_accuracies.values())))

    def to_csv(self, path) -> None:
        """Per-epoch rows for every seed, then a 'mean,std' summary line."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "epoch", "lr", "train_loss", "train_accuracy", "test_accuracy"])
            for seed in sorted(self.curves):
                for s in self.curves[seed]:
                    writer.writerow(
                        [seed, s.epoch, f"{s.lr:.10g}", f"{s.train_loss:.8f}",
                         f"{s.train_accuracy:.6f}", f"{s.test_accuracy:.6f}"]
                    )
            writer.writerow(["mean", "std"])
            writer.writerow([f"{self.mean:.6f}", f"{self.std:.6f}"])


def permutation(n: int, rng: SeededRng) -> list[int]:
    """Fisher-Yates shuffle driven by the package RNG (platform-stable)."""
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.integers(0, i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def evaluate(model, test_x: np.ndarray, test_y: np.ndarray, *, batch_size: int = 64) -> float:
    """Argmax accuracy on the test set; no augmentation hooks are active."""
    if len(test_x) == 0:
        raise ValueError("empty test set")
    if hasattr(model, "eval"):
        model.eval()
    xs = torch.from_numpy(np.ascontiguousarray(test_x))
    ys = torch.from_numpy(np.ascontiguousarray(test_y))
    correct = 0
    with torch.no_grad():
        for start in range(0, len(xs), batch_size):
            logits = model(xs[start : start + batch_size])
            correct += int((logits.argmax(dim=1) == ys[start : start + batch_size]).sum())
    return correct / len(xs)


def _train_one_seed(
    model_config: ModelConfig,
    data,
    cfg: TrainConfig,
    seed: int,
) -> tuple[HookedResNet, list[EpochStats]]:
    model = build_model(model_config, rng_for(seed, PURPOSE_INIT))
    opt = torch.optim.Adam(
        model.parameters(),
        lr=cfg.lr_init,
        betas=ADAM_BETAS,
        eps=ADAM_EPS,
        weight_decay=cfg.weight_decay,
    )
    xs = torch.from_numpy(np.ascontiguousarray(data.train_x))
    ys = torch.from_numpy(np.ascontiguousarray(data.train_y))
    n = len(xs)
    _, _, t_in, f_in = xs.shape
    layer_dims = hook_shapes(model_config, t_in, f_in)
    curves: list[EpochStats] = []
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        order = permutation(n, rng_for(seed, PURPOSE_SHUFFLE, epoch))
        model.train()
        loss_sum, correct = 0.0, 0
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            xb, yb = xs[idx], ys[idx]
            hooks = None
            if cfg.policy.scheme != "OFF":
                rng_aug = rng_for(seed, PURPOSE_AUGMENT, epoch, batch_idx)
                layer = choose_layer(cfg.policy.layer_set, rng_aug)
                _, t_l, f_l = layer_dims[layer]
                params = params_at_layer(cfg.policy, layer, t_l, f_l)
                plans = draw_batch_plan(len(idx), t_l, f_l, cfg.policy.scheme, params, rng_aug)
                hooks = {layer: masking_hook(plans, cfg.policy.scheme)}
            logits = model(xb, hooks)
            loss = F.cross_entropy(logits, yb)
            if not torch.isfinite(loss):
                raise NumericError(
                    f"non-finite loss {loss.item()} at epoch {epoch}, batch {batch_idx}, lr {lr:g}"
                )
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            loss_sum += loss.item() * len(idx)
            correct += int((logits.argmax(dim=1) == yb).sum())
        test_acc = evaluate(model, data.test_x, data.test_y)
        curves.append(
            EpochStats(
                epoch=epoch,
                lr=lr,
                train_loss=loss_sum / n,
                train_accuracy=correct / n,
                test_accuracy=test_acc,
            )
        )
    return model, curves


def train(model_config: ModelConfig, data, cfg: TrainConfig, out_dir=None) -> RunReport:
    """Train one model per configured seed and aggregate their test accuracy.

    When out_dir is given, each seed's final checkpoint is saved there.
    Single-threaded so repeated runs are bit-identical.
    """
    torch.set_num_threads(1)
    report = RunReport(seed_accuracies={}, curves={})
    for seed in cfg.seeds:
        model, curves = _train_one_seed(model_config, data, cfg, seed)
        report.curves[seed] = curves
        report.seed_accuracies[seed] = curves[-1].test_accuracy
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(model, out_dir / f"checkpoint_seed{seed}.ckpt")
    return report
