"""Run configuration: dataclass, YAML loading, overrides and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

import yaml


@dataclass
class TrainConfig:
    data_root: str = ""
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 16
    epochs: int = 100  # desk-scale runs override this; full-scale value is a knob
    base_size: int = 352
    scales: tuple = (0.75, 1.0, 1.25)
    seed: int = 0
    grad_clip_norm: float = 0.5
    use_se: bool = True
    use_eg: bool = True
    use_cfm: bool = True
    backbone: str = "toy"
    decoder_width: int = 32
    sam_groups: int = 4
    cfp_dilations: tuple = (1, 2, 4)
    edge_high_width: int = 256
    threshold: float = 0.5

    def validate(self):
        for name in ("learning_rate", "weight_decay", "grad_clip_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("batch_size", "epochs", "base_size", "decoder_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.base_size % 32:
            raise ValueError("base_size must be a multiple of 32")
        if not self.scales:
            raise ValueError("scales must be non-empty")
        if self.backbone not in ("toy", "plugged"):
            raise ValueError(f"unknown backbone '{self.backbone}'")
        return self

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["scales"] = list(self.scales)
        out["cfp_dilations"] = list(self.cfp_dilations)
        return out


# Ablation rows a-g: which blocks are wired in.
ABLATION_PRESETS = {
    "a": dict(use_se=False, use_eg=False, use_cfm=False),  # baseline
    "b": dict(use_se=True, use_eg=False, use_cfm=False),
    "c": dict(use_se=True, use_eg=True, use_cfm=False),
    "d": dict(use_se=False, use_eg=False, use_cfm=True),
    "e": dict(use_se=False, use_eg=True, use_cfm=True),
    "f": dict(use_se=True, use_eg=False, use_cfm=True),
    "g": dict(use_se=True, use_eg=True, use_cfm=True),  # full model
}


def apply_ablation(config, variant):
    if variant not in ABLATION_PRESETS:
        raise ValueError(f"unknown ablation variant '{variant}' (expected a-g)")
    return dataclasses.replace(config, **ABLATION_PRESETS[variant])


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def config_from_dict(values):
    unknown = set(values) - set(_FIELDS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    coerced = {}
    for key, value in values.items():
        if key in ("scales", "cfp_dilations") and value is not None:
            value = tuple(value)
        coerced[key] = value
    return TrainConfig(**coerced)


def load_config(path=None, overrides=None):
    """Build a config from an optional YAML file plus explicit overrides."""
    values = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        values.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return config_from_dict(values)


def dump_config(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=True)


def config_hash(config):
    return hashlib.sha256(dump_config(config).encode()).hexdigest()[:16]
