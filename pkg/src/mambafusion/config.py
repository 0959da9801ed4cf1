"""Flat key=value run configuration files.

One file carries model geometry, training hyperparameters and loss
weights; '#' starts a comment, keys are ``snake_case``, unknown keys are
rejected (typo guard). Serialization is canonical (fixed key order), so
parse -> serialize is a fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .losses import LossWeights
from .model import ModelConfig
from .trainer import TrainConfig


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        # one authoritative copy of the shared keys
        self.train.input_size = self.model.input_size
        self.train.seed = self.model.seed


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str):
    return None if text.lower() == "none" else int(text)


def _opt_float(text: str):
    return None if text.lower() == "none" else float(text)


# key -> (section, attribute, parser, serializer)
_KEYS: dict[str, tuple[str, str, object]] = {
    "groups": ("model", "groups", int),
    "blocks_per_group": ("model", "blocks_per_group", int),
    "channels": ("model", "channels", int),
    "nstate": ("model", "nstate", int),
    "mmb_expansion": ("model", "mmb_expansion", int),
    "scales": ("model", "scales", int),
    "input_size": ("model", "input_size", int),
    "seed": ("model", "seed", int),
    "use_channel_block": ("model", "use_channel_block", _bool),
    "use_frequency_block": ("model", "use_frequency_block", _bool),
    "use_ir_heads": ("model", "use_ir_heads", _bool),
    "fusion_mode": ("model", "fusion_mode", str),
    "lr": ("train", "lr", float),
    "weight_decay": ("train", "weight_decay", float),
    "warmup_iters": ("train", "warmup_iters", int),
    "warmup_start_lr": ("train", "warmup_start_lr", float),
    "epochs": ("train", "epochs", int),
    "batch": ("train", "batch", int),
    "decay": ("train", "decay", float),
    "max_iters": ("train", "max_iters", _opt_int),
    "grad_clip": ("train", "grad_clip", _opt_float),
    "alpha1": ("loss", "a1", float),
    "alpha2": ("loss", "a2", float),
    "alpha3": ("loss", "a3", float),
    "alpha4": ("loss", "a4", float),
}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse key = value lines into a RunConfig; unknown keys are errors."""
    cfg = base or RunConfig()
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = val
    return apply_overrides(cfg, values)


def apply_overrides(cfg: RunConfig, values: dict[str, str]) -> RunConfig:
    """Apply string key/value overrides (CLI --set) onto a config."""
    for key, val in values.items():
        if key not in _KEYS:
            raise ValueError(f"unknown config key {key!r}")
        section, attr, conv = _KEYS[key]
        try:
            parsed = conv(val)
        except ValueError as exc:
            raise ValueError(f"config key {key}: {exc}") from None
        setattr(getattr(cfg, section), attr, parsed)
    # keep the shared keys mirrored
    cfg.train.input_size = cfg.model.input_size
    cfg.train.seed = cfg.model.seed
    # re-validate
    type(cfg.model).__post_init__(cfg.model)
    type(cfg.train).__post_init__(cfg.train)
    type(cfg.loss).__post_init__(cfg.loss)
    return cfg


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    lines = ["# mambafusion run configuration"]
    for key, (section, attr, _) in _KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(getattr(cfg, section), attr))}")
    return "\n".join(lines) + "\n"


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(), base=base)
