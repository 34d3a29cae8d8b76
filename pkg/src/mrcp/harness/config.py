"""Training configuration and its ``key = value`` text format."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from ..losses import LossConfig
from ..model import ModelConfig


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    dataset: str = ""
    out_dir: str = "runs/default"
    # model
    variant: str = "mp-pose"
    task: str = "depth"
    levels: int = 1
    channels: int = 32
    heads: int = 4
    share_levels: bool = True
    depth_scale: float = 0.0  # 0 = derive from training targets
    # loss
    alpha_smooth: float = 1e-3
    beta: float = 1.0
    # optimizer
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # schedule
    epochs: int = 10
    batch_size: int = 1
    max_steps: int = 0  # 0 = no cap
    seed: int = 0
    split: float = 0.8
    # noise protocol
    noise: str = "severe"
    train_noisy: int = 2  # each step corrupts the first n ~ U{0..train_noisy} cameras
    eval_noisy: str = "0,1,2"
    eval_seed: int = 9001
    graph_threshold: float = 0.0  # 0 = complete graph

    def validate(self, n_agents: int | None = None) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0 < self.split < 1:
            raise ConfigError("split must lie in (0, 1)")
        if self.lr < 0:
            raise ConfigError("lr must be non-negative")
        settings = self.eval_settings()
        if n_agents is not None:
            if not 0 <= self.train_noisy <= n_agents:
                raise ConfigError(f"train_noisy={self.train_noisy} outside [0, {n_agents}]")
            bad = [s for s in settings if not 0 <= s <= n_agents]
            if bad:
                raise ConfigError(f"eval_noisy settings {bad} outside [0, {n_agents}]")

    def eval_settings(self) -> list:
        try:
            return [int(v) for v in str(self.eval_noisy).split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad eval_noisy list {self.eval_noisy!r}") from exc

    def model_config(self, height: int, width: int, num_classes: int, n_agents: int,
                     depth_scale: float = 1.0) -> ModelConfig:
        return ModelConfig(
            variant=self.variant, levels=self.levels, channels=self.channels, heads=self.heads,
            height=height, width=width, task=self.task, num_classes=num_classes, n_agents=n_agents,
            share_levels=self.share_levels, depth_scale=depth_scale,
        )

    def loss_config(self) -> LossConfig:
        return LossConfig(self.alpha_smooth, self.beta)

    # --- text format ------------------------------------------------------
    def set(self, key: str, value: str) -> None:
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(self, key, _coerce(key, types[key], value))

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key: str, typ, value: str):
    value = value.strip()
    typ = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    try:
        if typ == "bool":
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ}") from exc
    return value


def parse_config_text(text: str, cfg: TrainConfig | None = None) -> TrainConfig:
    cfg = cfg or TrainConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        cfg.set(key.strip(), value)
    return cfg


def load_config(path, overrides: dict | None = None) -> TrainConfig:
    cfg = parse_config_text(Path(path).read_text())
    for k, v in (overrides or {}).items():
        cfg.set(k, str(v))
    return cfg
