"""Run configuration: presets, config-file parsing and validation.

Config files are INI-style sections of ``key = value`` lines.  Every
key belongs to a fixed schema; unknown sections or keys are errors, so
a typo cannot silently fall back to a default.  Values layer as
preset < config file < command-line flags.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from typing import Optional

from .ensemble import DESK_BANK, PAPER_BANK
from .nn import AdamConfig, NetworkConfig
from .train import TrainSettings


@dataclass(frozen=True)
class RunConfig:
    """Everything one train/evaluate/predict run needs."""

    # data: either a manifest of PGM files or a synthetic spec
    manifest: Optional[str] = None
    synth_n_per_class: int = 200
    synth_side: int = 32
    # model
    input_side: int = 32
    kernel_sizes: tuple = DESK_BANK
    dropout_rate: float = 0.2
    mc_samples_t: int = 30
    heteroscedastic: bool = True
    # training (epochs: one entry per tree level)
    epochs: tuple = (15, 20, 25)
    batch_size: int = 32
    val_fraction: float = 0.1
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.001
    n_noise_samples: int = 20
    # evaluation
    n_folds: int = 5
    # run identity: both mandatory before any command executes
    seed: Optional[int] = None
    out_dir: Optional[str] = None

    def validated(self) -> "RunConfig":
        if self.seed is None:
            raise ValueError("a master seed is required (no wall-clock default)")
        if self.out_dir is None:
            raise ValueError("an output directory is required")
        if len(self.epochs) != 3:
            raise ValueError(
                f"epochs needs one entry per tree level (3), got {self.epochs}"
            )
        return self


def desk_preset() -> RunConfig:
    return RunConfig()


def paper_preset() -> RunConfig:
    return RunConfig(
        synth_side=224,
        input_side=224,
        kernel_sizes=PAPER_BANK,
    )


PRESETS = {"desk": desk_preset, "paper": paper_preset}


def base_network_config(cfg: RunConfig) -> NetworkConfig:
    """Shared member architecture (kernel size filled in per member)."""
    return NetworkConfig(
        input_side=cfg.input_side,
        kernel_size=cfg.kernel_sizes[0],
        dropout_rate=cfg.dropout_rate,
        mc_samples_T=cfg.mc_samples_t,
        heteroscedastic=cfg.heteroscedastic,
        n_outputs=2,
    )


def adam_config(cfg: RunConfig) -> AdamConfig:
    return AdamConfig(
        learning_rate=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        epsilon=cfg.epsilon,
        weight_decay=cfg.weight_decay,
    )


def train_settings(cfg: RunConfig, level: int) -> TrainSettings:
    return TrainSettings(
        epochs=cfg.epochs[level],
        batch_size=cfg.batch_size,
        val_fraction=cfg.val_fraction,
        n_noise_samples=cfg.n_noise_samples,
    )


def _parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(part.strip()) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"expected a comma-separated integer list, got {text!r}") from None


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# section -> key -> (RunConfig field, parser)
_SCHEMA = {
    "data": {
        "manifest": ("manifest", str),
        "synth_n_per_class": ("synth_n_per_class", int),
        "synth_side": ("synth_side", int),
    },
    "model": {
        "input_side": ("input_side", int),
        "kernel_sizes": ("kernel_sizes", _parse_int_list),
        "dropout_rate": ("dropout_rate", float),
        "mc_samples_t": ("mc_samples_t", int),
        "heteroscedastic": ("heteroscedastic", _parse_bool),
    },
    "train": {
        "epochs": ("epochs", _parse_int_list),
        "batch_size": ("batch_size", int),
        "val_fraction": ("val_fraction", float),
        "learning_rate": ("learning_rate", float),
        "beta1": ("beta1", float),
        "beta2": ("beta2", float),
        "epsilon": ("epsilon", float),
        "weight_decay": ("weight_decay", float),
        "n_noise_samples": ("n_noise_samples", int),
    },
    "eval": {
        "n_folds": ("n_folds", int),
    },
    "run": {
        "seed": ("seed", int),
        "out_dir": ("out_dir", str),
    },
}


def parse_config(path, base: Optional[RunConfig] = None) -> RunConfig:
    """Load a config file on top of ``base`` (default: desk preset)."""
    cfg = base if base is not None else desk_preset()
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise ValueError(f"config file not found: {path}")
    overrides = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError(f"{path}: unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ValueError(f"{path}: unknown key '{key}' in section [{section}]")
            field, convert = _SCHEMA[section][key]
            try:
                overrides[field] = convert(raw)
            except ValueError as exc:
                raise ValueError(f"{path}: bad value for {section}.{key}: {exc}") from None
    return dataclasses.replace(cfg, **overrides)


def config_to_text(cfg: RunConfig) -> str:
    """Render a RunConfig as a parseable config file (for run records)."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (field, _) in keys.items():
            value = getattr(cfg, field)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
