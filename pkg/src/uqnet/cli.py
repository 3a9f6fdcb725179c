"""Command-line entry point.

Configuration layers, weakest first: the --scale preset, then the
--config file, then individual flags.  Every command exits 0 on
success and nonzero after printing ``error: <reason>`` on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import pipeline
from .config import PRESETS, RunConfig, parse_config

_COMMANDS = (
    ("synth", "write a synthetic PGM dataset plus manifest to --out"),
    ("train", "train the full ensemble bank and write checkpoints to --out"),
    ("evaluate", "run stratified cross-validation and write report CSVs to --out"),
    ("predict", "route images through a trained ensemble in --out"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqnet",
        description=(
            "Uncertainty-weighted ensemble of Bayesian convolutional "
            "classifiers arranged in a hierarchical decision tree."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMANDS:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="path to a key = value config file")
        cmd.add_argument(
            "--seed", type=int, help="master seed (required here or in the config file)"
        )
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument(
            "--members",
            help="comma-separated odd kernel sizes for the ensemble bank, e.g. 3,5,7",
        )
        cmd.add_argument(
            "--scale",
            choices=sorted(PRESETS),
            default="desk",
            help="base preset to start from (default: desk)",
        )
        if name == "predict":
            cmd.add_argument("images", nargs="*", help="PGM image paths to classify")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = PRESETS[args.scale]()
    if args.config:
        cfg = parse_config(args.config, cfg)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.members is not None:
        try:
            overrides["kernel_sizes"] = tuple(
                int(tok) for tok in args.members.split(",")
            )
        except ValueError:
            raise ValueError(
                f"--members must be comma-separated integers, got {args.members!r}"
            ) from None
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg.validated()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "synth":
            result = pipeline.cmd_synth(cfg)
            print(f"wrote {result['n_images']} images; manifest at {result['manifest']}")
        elif args.command == "train":
            result = pipeline.cmd_train(cfg)
            print(
                f"wrote {result['n_checkpoints']} checkpoints; "
                f"ensemble manifest at {result['manifest']}"
            )
        elif args.command == "evaluate":
            result = pipeline.cmd_evaluate(cfg)
            print(f"multiclass accuracy {result['multiclass_acc_mean']:.4f}")
            for name, value in result["level_balanced_acc_mean"].items():
                print(f"{name} balanced accuracy {value:.4f}")
            print(f"reports written to {cfg.out_dir}")
        else:
            result = pipeline.cmd_predict(cfg, args.images)
            print(f"wrote {result['n_rows']} rows to {result['predictions']}")
        return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
