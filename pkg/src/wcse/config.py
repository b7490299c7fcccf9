"""Training configuration with a flat key=value file format.

One canonical key per field, ``#`` comments allowed, values are plain
literals (``true``/``false`` for flags, ``auto`` for the derived positive
weight). Serialization uses ``repr`` for floats so parse -> serialize ->
parse is the identity.
"""

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError

LOSS_KINDS = ("sum_out", "sum_in")
AUG_KINDS = ("dropout_only", "sgw")


@dataclass
class TrainConfig:
    temperature: float = 0.05
    lambda_m: float | None = None  # None = auto = 1 / (num_positives - 1)
    num_positives: int = 3  # views per sample; anchor + (m-1) positives
    group_size: int = 8
    shuffled: bool = True
    momentum: float = 0.95
    ridge: float = 1e-5  # relative ridge epsilon for rank-deficient groups
    learning_rate: float = 0.03
    batch_size: int = 64
    steps: int = 2000
    eval_every: int = 125
    seed: int = 0
    data_seed: int = 0
    loss_kind: str = "sum_out"
    aug_kind: str = "sgw"
    dropout_rate: float = 0.1
    encoder_dim_in: int = 32
    encoder_dim_hidden: int = 64
    encoder_dim_out: int = 16
    data_clusters: int = 8
    data_per_cluster: int = 32
    dev_per_cluster: int = 32
    data_noise: float = 0.3
    num_eval_pairs: int = 256

    def validate(self) -> "TrainConfig":
        if not self.temperature > 0.0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.lambda_m is not None and not self.lambda_m > 0.0:
            raise ConfigError(f"lambda_m must be > 0 or auto, got {self.lambda_m}")
        if self.num_positives < 2:
            raise ConfigError(f"num_positives must be >= 2, got {self.num_positives}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.ridge < 0.0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.seed < 0 or self.data_seed < 0:
            raise ConfigError("seeds must be non-negative")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.aug_kind not in AUG_KINDS:
            raise ConfigError(f"aug_kind must be one of {AUG_KINDS}, got {self.aug_kind!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        for name in ("encoder_dim_in", "encoder_dim_hidden", "encoder_dim_out"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.group_size < 1 or self.encoder_dim_out % self.group_size != 0:
            raise ConfigError(
                f"group_size {self.group_size} must divide encoder_dim_out "
                f"{self.encoder_dim_out}"
            )
        if self.data_clusters < 2:
            raise ConfigError(f"data_clusters must be >= 2, got {self.data_clusters}")
        for name in ("data_per_cluster", "dev_per_cluster"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.data_noise < 0.0:
            raise ConfigError(f"data_noise must be >= 0, got {self.data_noise}")
        if self.num_eval_pairs < 2:
            raise ConfigError(f"num_eval_pairs must be >= 2, got {self.num_eval_pairs}")
        if self.data_clusters * self.data_per_cluster < self.batch_size:
            raise ConfigError(
                f"training set ({self.data_clusters}x{self.data_per_cluster}) is "
                f"smaller than batch_size {self.batch_size}"
            )
        return self

    @property
    def positive_weight(self) -> float:
        if self.lambda_m is not None:
            return self.lambda_m
        return 1.0 / (self.num_positives - 1)


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(field: dataclasses.Field, raw: str):
    raw = raw.strip()
    if field.name == "lambda_m":
        return None if raw == "auto" else float(raw)
    if field.type is bool:
        if raw not in ("true", "false"):
            raise ConfigError(f"{field.name} must be true or false, got {raw!r}")
        return raw == "true"
    if field.type is int:
        return int(raw)
    if field.type is float:
        return float(raw)
    return raw


def config_to_text(cfg: TrainConfig) -> str:
    lines = ["# wcse training configuration"]
    for f in dataclasses.fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> TrainConfig:
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        try:
            values[key] = _parse_value(fields[key], raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return TrainConfig(**values).validate()


def save_config(cfg: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))


def load_config(path) -> TrainConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return config_from_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
