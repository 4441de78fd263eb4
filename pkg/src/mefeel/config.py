"""Simulation configuration and its flat ``key = value`` file format.

One key per line, ``#`` starts a comment, list values are comma separated.
Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

STRATEGY_NAMES = ("me-feel", "me-feel-nokd", "feel", "feel-ub", "feel-ideal")


@dataclass(frozen=True)
class SimConfig:
    strategy: str = "me-feel"
    rounds: int = 200
    devices: int = 100
    subset_size: int = 10
    local_steps: int = 5
    batch_size: int = 10
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    temperature: float = 3.0
    widths: tuple[int, ...] = (64, 64, 64, 64)
    attach_points: tuple[int, ...] | None = None  # default: exits on the last `exits` layers
    exits: int | None = None  # default: one exit per trunk layer
    bandwidth_hz: float = 4e7
    gamma_th: float = 15.0
    tx_power: float = 1.0
    noise_var: float = 1e-3
    alpha_min: float = 0.001
    alpha_max: float = 0.05
    channel_seed: int = 0
    data_seed: int = 0
    model_seed: int = 0
    dataset: str = "synthetic"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    num_classes: int = 10
    synth_dim: int = 20
    synth_train_per_class: int = 600
    synth_test_per_class: int = 100
    synth_spread: float = 1.0
    synth_clusters: int = 1
    num_shards: int = 200
    shards_per_device: int = 2
    g1: tuple[float, ...] | None = None
    g2: tuple[float, ...] | None = None
    aggregation: str = "auto"

    def __post_init__(self):
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.dataset not in ("synthetic", "idx"):
            raise ConfigurationError(f"unknown dataset source {self.dataset!r}")
        if self.aggregation not in ("auto", "uniform", "by-samples"):
            raise ConfigurationError(f"unknown aggregation weighting {self.aggregation!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        for name in ("rounds", "devices", "subset_size", "batch_size", "num_classes",
                     "synth_dim", "synth_clusters", "synth_train_per_class", "synth_test_per_class",
                     "num_shards", "shards_per_device"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.local_steps < 0:
            raise ConfigurationError("local_steps must be >= 0")
        for name in ("learning_rate", "temperature", "bandwidth_hz", "gamma_th", "tx_power",
                     "noise_var", "alpha_min", "alpha_max", "synth_spread"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.subset_size > self.devices:
            raise ConfigurationError("subset_size exceeds the number of devices")
        if self.dataset == "idx" and not all(
                (self.train_images, self.train_labels, self.test_images, self.test_labels)):
            raise ConfigurationError("idx dataset needs train/test image and label paths")
        self.resolved_attach_points()

    def resolved_attach_points(self) -> tuple[int, ...]:
        depth = len(self.widths)
        if self.attach_points is not None:
            ap = tuple(self.attach_points)
            if self.exits is not None and self.exits != len(ap):
                raise ConfigurationError("exits disagrees with the number of attach points")
            return ap
        m = depth if self.exits is None else self.exits
        if not 1 <= m <= depth:
            raise ConfigurationError(f"exits must be in [1, {depth}]")
        return tuple(range(depth - m + 1, depth + 1))

    @property
    def num_exits(self) -> int:
        return len(self.resolved_attach_points())

    def with_overrides(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})


def _int_list(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _float_list(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _opt_int(s):
    return None if s.lower() in ("", "none") else int(s)


_PARSERS = {
    "widths": _int_list,
    "attach_points": lambda s: None if s.lower() in ("", "none") else _int_list(s),
    "exits": _opt_int,
    "g1": lambda s: None if s.lower() in ("", "none") else _float_list(s),
    "g2": lambda s: None if s.lower() in ("", "none") else _float_list(s),
}


def _parser_for(f: dataclasses.Field):
    if f.name in _PARSERS:
        return _PARSERS[f.name]
    return type(f.default)


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    fields = {f.name: f for f in dataclasses.fields(SimConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parser_for(fields[key])(value)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return dataclasses.replace(base or SimConfig(), **values)


def load_config(path) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(cfg: SimConfig) -> str:
    """Inverse of :func:`parse_config`."""
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            v = "none"
        elif isinstance(v, tuple):
            v = ",".join(repr(x) for x in v)
        else:
            v = repr(v) if isinstance(v, float) else str(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
