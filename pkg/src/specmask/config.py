"""Run configuration: an INI file with strict keys plus command-line overrides.

Sections cover the feature front end, the augmentation policy, the model
preset, the trainer, and file paths. Unknown sections or keys are rejected
so typos fail loudly; every run writes its fully resolved configuration next
to its outputs.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .features import FeatureConfig
from .masking import MaskParams
from .policy import AugmentPolicy


class ConfigError(ValueError):
    """Bad run configuration (unknown key, unparsable value, bad combination)."""


_SCHEMA: dict[str, dict[str, str]] = {
    "run": {"seed": "int", "out_dir": "str"},
    "features": {
        "sample_rate": "int",
        "window": "int",
        "hop": "int",
        "mel_bins": "int",
        "fmin": "float",
        "fmax": "float",
        "log_floor": "float",
        "perceptual_weighting": "bool",
    },
    "policy": {
        "scheme": "str",
        "layers": "str",
        "time_ratio": "float",
        "freq_ratio": "float",
        "t_max": "int",
        "f_max": "int",
    },
    "model": {"preset": "str", "num_classes": "int"},
    "trainer": {
        "epochs": "int",
        "lr_init": "float",
        "lr_floor": "float",
        "decay_start": "int",
        "decay_end": "int",
        "batch_size": "int",
        "seeds": "str",
        "weight_decay": "float",
        "grad_clip": "float",
    },
    "paths": {"audio_root": "str", "cache_dir": "str", "train_meta": "str", "test_meta": "str"},
}

_DEFAULTS = {
    "run": {"seed": "7", "out_dir": "runs/latest"},
    "features": {},
    "policy": {"scheme": "OFF", "layers": "0,1,2,3,4", "time_ratio": "0.10", "freq_ratio": "0.10"},
    "model": {"preset": "toy", "num_classes": "0"},
    "trainer": {
        "epochs": "30",
        "lr_init": "1e-4",
        "lr_floor": "5e-6",
        "batch_size": "32",
        "seeds": "0,1,2",
        "weight_decay": "0.0",
    },
    "paths": {},
}


def parse_layers(text: str) -> tuple[int, ...]:
    """Parse a layer set like '0,1,4'; '-' or '' is the empty set."""
    text = text.strip()
    if text in ("-", ""):
        return ()
    try:
        return tuple(sorted({int(tok) for tok in text.split(",")}))
    except ValueError as exc:
        raise ConfigError(f"bad layer set {text!r}: {exc}") from None


@dataclass
class RunConfig:
    """Everything one command needs, resolved from file + overrides."""

    seed: int
    out_dir: str
    features: FeatureConfig
    policy: AugmentPolicy
    model_preset: str
    num_classes: int  # 0 = infer from the manifest
    trainer_fields: dict
    paths: dict[str, str] = field(default_factory=dict)
    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def model_config(self, num_classes: int | None = None):
        from .model import full_preset, toy_preset  # torch import deferred to train paths

        classes = num_classes or self.num_classes
        if classes < 1:
            raise ConfigError("number of classes unknown; set model.num_classes or pass a manifest")
        if self.model_preset == "toy":
            return toy_preset(num_classes=classes)
        if self.model_preset == "full":
            return full_preset(num_classes=classes)
        raise ConfigError(f"unknown model preset {self.model_preset!r}")

    def train_config(self, policy: AugmentPolicy | None = None):
        from .trainer import TrainConfig, toy_schedule

        fields = dict(self.trainer_fields)
        fields["policy"] = policy if policy is not None else self.policy
        epochs = fields.pop("epochs")
        if "decay_start" in fields and "decay_end" in fields:
            return TrainConfig(epochs=epochs, **fields)
        fields.pop("decay_start", None)
        fields.pop("decay_end", None)
        return toy_schedule(epochs=epochs, **fields)

    def path(self, key: str) -> Path:
        if key not in self.paths:
            raise ConfigError(f"paths.{key} is not configured")
        return Path(self.paths[key])

    def write_resolved(self, path) -> None:
        parser = configparser.ConfigParser()
        for section, pairs in self.raw.items():
            parser[section] = dict(sorted(pairs.items()))
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)


def _convert(section: str, key: str, value: str):
    kind = _SCHEMA[section][key]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            lowered = value.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return value
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def load_run_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """Read the INI file (optional), apply 'section.key=value' overrides, validate."""
    merged: dict[str, dict[str, str]] = {s: dict(v) for s, v in _DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser[section].items():
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                merged[section][key] = value
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown config entry {dotted!r}")
        merged[section][key] = value

    values = {
        section: {key: _convert(section, key, raw) for key, raw in pairs.items()}
        for section, pairs in merged.items()
    }

    feat = FeatureConfig(**values["features"])

    pol = values["policy"]
    absolute = None
    if ("t_max" in pol) != ("f_max" in pol):
        raise ConfigError("policy.t_max and policy.f_max must be set together")
    if "t_max" in pol:
        absolute = MaskParams(t_max=pol.pop("t_max"), f_max=pol.pop("f_max"))
    try:
        policy = AugmentPolicy(
            scheme=pol["scheme"].upper(),
            layer_set=parse_layers(pol["layers"]),
            time_ratio=pol["time_ratio"],
            freq_ratio=pol["freq_ratio"],
            absolute_params=absolute,
        )
    except ValueError as exc:
        raise ConfigError(f"[policy] {exc}") from None

    trainer_fields = dict(values["trainer"])
    trainer_fields["seeds"] = tuple(int(tok) for tok in str(trainer_fields["seeds"]).split(","))

    return RunConfig(
        seed=values["run"]["seed"],
        out_dir=values["run"]["out_dir"],
        features=feat,
        policy=policy,
        model_preset=values["model"]["preset"],
        num_classes=values["model"]["num_classes"],
        trainer_fields=trainer_fields,
        paths=values["paths"],
        raw=merged,
    )
