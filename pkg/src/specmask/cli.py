"""Command-line interface: extract, augment, visualize, train, ablate.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Training commands
import torch lazily so the file-level tools start fast. Report-producing
commands write CSVs plus rendered PNG figures, and every configured run
echoes its fully resolved configuration into its output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_run_config, parse_layers
from .data import (
    CacheIndex,
    ParseError,
    SyntheticSpec,
    cache_features,
    fit_norm_from_cache,
    load_manifest,
    load_split,
    synth_dataset,
)
from .features import load_norm_stats, save_norm_stats
from .masking import MaskParams, MaskSpec, apply_cut_mask, apply_mixture_mask, apply_zero_mask, sample_mask
from .policy import AugmentPolicy, resolve_params
from .tensors import FormatError, SeededRng, read_tensor, write_tensor

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    """Bad command usage; main() maps this to exit code 2."""


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


def cmd_extract(args) -> int:
    cfg = load_run_config(args.config, args.set)
    train_meta = Path(args.train_meta) if args.train_meta else cfg.path("train_meta")
    test_meta = Path(args.test_meta) if args.test_meta else (
        cfg.path("test_meta") if "test_meta" in cfg.paths else None
    )
    audio_root = Path(args.audio_root) if args.audio_root else cfg.path("audio_root")
    cache_dir = Path(args.cache_dir) if args.cache_dir else cfg.path("cache_dir")
    if not train_meta.exists():
        raise UsageError(f"train meta file not found: {train_meta}")
    if test_meta is not None and not test_meta.exists():
        raise UsageError(f"test meta file not found: {test_meta}")
    manifest = load_manifest(train_meta, test_meta)
    index, report = cache_features(manifest, cfg.features, audio_root, cache_dir)
    cfg.write_resolved(cache_dir / "resolved.ini")
    if any(e.split == "train" and e.path in index.entries for e in manifest.entries):
        stats = fit_norm_from_cache(manifest, index, cache_dir)
        save_norm_stats(cache_dir / "norm_stats.sapp", stats)
    print(f"{report.written} written, {report.skipped} skipped, {len(report.failures)} failed")
    for path, reason in report.failures:
        print(f"  failed {path}: {reason}", file=sys.stderr)
    return EXIT_RUNTIME if report.failures else EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        classes=args.classes,
        clips_per_class=args.clips_per_class,
        clip_seconds=args.seconds,
        seed=args.seed,
        train_fraction=args.train_fraction,
    )
    manifest = synth_dataset(spec, args.out_dir)
    train_n = len(manifest.split("train"))
    test_n = len(manifest.split("test"))
    print(f"wrote {train_n + test_n} clips ({train_n} train, {test_n} test) under {args.out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# augment / visualize
# ---------------------------------------------------------------------------


def _parse_spec(text: str) -> MaskSpec:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--spec expects 't0,t,f0,f', got {text!r}")
    try:
        t0, t, f0, f = (int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--spec fields must be integers, got {text!r}") from None
    return MaskSpec(t0=t0, t=t, f0=f0, f=f)


def cmd_augment(args) -> int:
    try:
        x = read_tensor(args.input)
    except FileNotFoundError:
        raise UsageError(f"input tensor not found: {args.input}") from None
    scheme = args.scheme.upper()
    partner = None
    if scheme in ("MM", "CM"):
        if not args.partner:
            raise UsageError(f"scheme {scheme} needs --partner")
        try:
            partner = read_tensor(args.partner)
        except FileNotFoundError:
            raise UsageError(f"partner tensor not found: {args.partner}") from None
        if partner.shape != x.shape:
            raise UsageError(f"shape mismatch: input {x.shape} vs partner {partner.shape}")
    elif args.partner:
        raise UsageError("--partner only applies to MM/CM")

    _, t_dim, f_dim = x.shape
    if args.spec is not None:
        spec = _parse_spec(args.spec)
    else:
        if args.t_max is not None or args.f_max is not None:
            if args.t_max is None or args.f_max is None:
                raise UsageError("--t-max and --f-max must be given together")
            params = MaskParams(t_max=args.t_max, f_max=args.f_max)
        else:
            params = resolve_params(args.time_ratio, args.freq_ratio, t_dim, f_dim)
        try:
            spec = sample_mask(t_dim, f_dim, params, SeededRng(args.seed))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        if scheme == "ZM":
            out = apply_zero_mask(x, spec)
        elif scheme == "MM":
            out = apply_mixture_mask(x, partner, spec)
        elif scheme == "CM":
            out = apply_cut_mask(x, partner, spec)
        else:
            raise UsageError(f"unknown scheme {args.scheme!r}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_tensor(args.output, out)
    print(f"spec t0={spec.t0} t={spec.t} f0={spec.f0} f={spec.f}")
    return EXIT_OK


def write_pgm(path, plane: np.ndarray) -> None:
    """Binary PGM of a (T, F) map: one image row per frame, min-max scaled."""
    lo, hi = float(plane.min()), float(plane.max())
    if hi > lo:
        img = np.floor((plane.astype(np.float64) - lo) / (hi - lo) * 255.0 + 0.5)
    else:
        img = np.full(plane.shape, 128.0)
    img = np.clip(img, 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def cmd_visualize(args) -> int:
    try:
        x = read_tensor(args.input)
    except FileNotFoundError:
        raise UsageError(f"input tensor not found: {args.input}") from None
    if x.shape[0] > 1 and args.channel is None:
        raise UsageError(f"tensor has {x.shape[0]} channels; pass --channel to pick one")
    channel = args.channel or 0
    if not 0 <= channel < x.shape[0]:
        raise UsageError(f"--channel {channel} outside 0..{x.shape[0] - 1}")
    write_pgm(args.output, x[channel])
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / ablate
# ---------------------------------------------------------------------------


def _load_training_inputs(cfg: RunConfig):
    cache_dir = cfg.path("cache_dir")
    index_path = cache_dir / "cache_index.tsv"
    stats_path = cache_dir / "norm_stats.sapp"
    if not index_path.exists() or not stats_path.exists():
        raise RuntimeError(
            f"feature cache incomplete under {cache_dir}; run `specmask extract` first"
        )
    manifest = load_manifest(cfg.path("train_meta"), cfg.path("test_meta"))
    index = CacheIndex.load(index_path)
    stats = load_norm_stats(stats_path)
    split = load_split(manifest, index, cache_dir, stats)
    return manifest, split


def _prepare_out_dir(cfg: RunConfig) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.write_resolved(out_dir / "resolved.ini")
    return out_dir


def cmd_train(args) -> int:
    from .plots import save_training_curves
    from .trainer import train

    cfg = load_run_config(args.config, args.set)
    manifest, split = _load_training_inputs(cfg)
    out_dir = _prepare_out_dir(cfg)
    model_cfg = cfg.model_config(num_classes=split.num_classes)
    report = train(model_cfg, split, cfg.train_config(), out_dir=out_dir)
    report.to_csv(out_dir / "report.csv")
    save_training_curves(report, out_dir / "curves.png")
    print(f"mean test accuracy {report.mean:.4f} +- {report.std:.4f} over seeds "
          f"{sorted(report.seed_accuracies)}")
    print(f"outputs in {out_dir}")
    return EXIT_OK


def _grid_policies(base: AugmentPolicy, grid: str, cell: str, scheme: str) -> AugmentPolicy:
    """Policy for one ablation cell; empty layer sets mean no augmentation."""
    if grid in ("time-ratio", "freq-ratio"):
        ratio = float(cell)
        fields = {"time_ratio": ratio} if grid == "time-ratio" else {"freq_ratio": ratio}
        return dataclasses.replace(base, scheme=scheme, **fields)
    if grid == "layers":
        layers = parse_layers(cell)
        if not layers:
            return AugmentPolicy.off()
        return dataclasses.replace(base, scheme=scheme, layer_set=layers)
    raise UsageError(f"unknown grid {grid!r}")


def cmd_ablate(args) -> int:
    import csv

    from .plots import save_ablation_figure
    from .trainer import train

    cfg = load_run_config(args.config, args.set)
    manifest, split = _load_training_inputs(cfg)
    out_dir = _prepare_out_dir(cfg)
    model_cfg = cfg.model_config(num_classes=split.num_classes)
    cells = [tok.strip() for tok in args.values.split(";") if tok.strip() or tok == "-"]
    schemes = [tok.strip().upper() for tok in args.schemes.split(",") if tok.strip()]
    if not cells or not schemes:
        raise UsageError("--values and --schemes must be nonempty")
    rows = []
    for cell in cells:
        for scheme in schemes:
            try:
                policy = _grid_policies(cfg.policy, args.grid, cell, scheme)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            report = train(model_cfg, split, cfg.train_config(policy))
            rows.append(
                {
                    "grid": args.grid,
                    "cell": cell,
                    "scheme": scheme,
                    "mean_accuracy": report.mean,
                    "std_accuracy": report.std,
                }
            )
            print(f"{args.grid}={cell} scheme={scheme}: {report.mean:.4f} +- {report.std:.4f}")
    csv_path = out_dir / "ablate.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["grid", "cell", "scheme", "mean_accuracy", "std_accuracy"])
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "mean_accuracy": f"{row['mean_accuracy']:.6f}",
                             "std_accuracy": f"{row['std_accuracy']:.6f}"})
    save_ablation_figure(rows, out_dir / "ablate.png")
    print(f"wrote {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specmask",
        description="Deterministic time/frequency masking toolkit with a toy training harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", default=None, help="INI run configuration")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config entry (repeatable)")

    p = sub.add_parser("extract", help="cache log-mel features for a manifest")
    add_config_args(p)
    p.add_argument("--train-meta", default=None)
    p.add_argument("--test-meta", default=None)
    p.add_argument("--audio-root", default=None)
    p.add_argument("--cache-dir", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="generate the synthetic band-noise dataset")
    p.add_argument("out_dir")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--clips-per-class", type=int, default=40)
    p.add_argument("--seconds", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="apply one masking event to a tensor file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--scheme", required=True, choices=["zm", "mm", "cm", "ZM", "MM", "CM"])
    p.add_argument("--partner", default=None, help="partner tensor for MM/CM")
    p.add_argument("--spec", default=None, help="explicit mask 't0,t,f0,f'")
    p.add_argument("--seed", type=int, default=0, help="sampling seed when --spec is absent")
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--f-max", type=int, default=None)
    p.add_argument("--time-ratio", type=float, default=0.10)
    p.add_argument("--freq-ratio", type=float, default=0.10)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("visualize", help="render a tensor as a PGM image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--channel", type=int, default=None)
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("train", help="train per the run configuration")
    add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="grid of training runs over ratios or layer sets")
    add_config_args(p)
    p.add_argument("--grid", required=True, choices=["time-ratio", "freq-ratio", "layers"])
    p.add_argument("--values", required=True,
                   help="semicolon-separated cells, e.g. '0;0.05;0.1'; use the "
                        "--values=-;0;0,1,2,3,4 form when a cell starts with '-'")
    p.add_argument("--schemes", default="ZM,MM,CM", help="comma-separated schemes")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ParseError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
