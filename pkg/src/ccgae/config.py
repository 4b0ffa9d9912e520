"""Run configuration: flat `key = value` lines with # comments.

`parse_config` and `format_config` are inverses: the echoed effective config
reparses to an identical RunConfig.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .core import Activation, LossKind
from .corruption import CorruptionKind, CorruptionSpec
from .errors import ConfigError
from .training import Hyperparams

_MODELS = ("gae", "dae")


@dataclass
class RunConfig:
    model: str
    n_x: int
    n_y: int
    n_f: int
    n_h: int
    hidden_activation: Activation
    output_activation: Activation
    hp: Hyperparams
    tied: bool
    train_images: str | None
    train_labels: str | None
    train_raw: str | None
    binarize_threshold: float | None
    image_rows: int | None
    image_cols: int | None
    checkpoint_out: str
    log_out: str | None


class _Entries:
    """key -> (value, line) map with typed, line-naming extraction."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.entries: dict[str, tuple[str, int]] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not key or not value:
                raise ConfigError(f"{source}:{lineno}: empty key or value")
            if key in self.entries:
                raise ConfigError(
                    f"{source}:{lineno}: duplicate key {key!r} (first set on line "
                    f"{self.entries[key][1]})"
                )
            self.entries[key] = (value, lineno)

    def take(self, key: str, convert, default=None, required: bool = False):
        if key not in self.entries:
            if required:
                raise ConfigError(f"{self.source}: missing required key {key!r}")
            return default
        value, lineno = self.entries.pop(key)
        try:
            return convert(value)
        except (ValueError, KeyError) as err:
            raise ConfigError(f"{self.source}:{lineno}: bad value for {key!r}: {err}") from err

    def reject_leftovers(self):
        if self.entries:
            key, (_, lineno) = next(iter(self.entries.items()))
            raise ConfigError(f"{self.source}:{lineno}: unknown key {key!r}")


def _to_bool(value: str) -> bool:
    if value == "true":
        return True
    if value == "false":
        return False
    raise ValueError(f"expected 'true' or 'false', got {value!r}")


def _to_enum(enum_cls):
    def convert(value: str):
        try:
            return enum_cls(value)
        except ValueError:
            options = ", ".join(e.value for e in enum_cls)
            raise ValueError(f"{value!r} is not one of: {options}") from None

    return convert


def _positive_int(value: str) -> int:
    out = int(value)
    if out < 1:
        raise ValueError(f"must be >= 1, got {out}")
    return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    e = _Entries(text, source)

    model = e.take("model", str, required=True)
    if model not in _MODELS:
        raise ConfigError(f"{source}: model must be one of {_MODELS}, got {model!r}")
    is_gae = model == "gae"

    n_x = e.take("n_x", _positive_int, required=True)
    n_h = e.take("n_h", _positive_int, required=True)
    n_y = e.take("n_y", _positive_int, required=is_gae, default=0)
    n_f = e.take("n_f", _positive_int, required=is_gae, default=0)
    if not is_gae and (n_y or n_f):
        raise ConfigError(f"{source}: n_y/n_f only apply to model = gae")
    tied = e.take("tied", _to_bool, default=True)
    if is_gae and not tied:
        raise ConfigError(f"{source}: tied = false only applies to model = dae")

    hidden_activation = e.take("hidden_activation", _to_enum(Activation), required=True)
    output_activation = e.take("output_activation", _to_enum(Activation), required=True)
    loss = e.take("loss", _to_enum(LossKind), required=True)

    corruption_kind = e.take("corruption", _to_enum(CorruptionKind), required=True)
    corruption_level = e.take("corruption_level", float, required=True)
    try:
        spec = CorruptionSpec(corruption_kind, corruption_level)
        hp = Hyperparams(
            corruption=spec,
            walkback_k=e.take("walkback", _positive_int, required=True),
            lr0=e.take("lr", float, required=True),
            anneal=e.take("anneal", float, required=True),
            momentum=e.take("momentum", float, required=True),
            batch_size=e.take("batch_size", _positive_int, required=True),
            epochs=e.take("epochs", int, required=True),
            loss=loss,
            seed=e.take("seed", int, required=True),
            resample_reconstructions=e.take(
                "resample_walkback", _to_bool, default=(loss is LossKind.CROSS_ENTROPY)
            ),
        )
    except ValueError as err:
        raise ConfigError(f"{source}: {err}") from err

    train_images = e.take("train_images", str)
    train_labels = e.take("train_labels", str)
    train_raw = e.take("train_raw", str)
    if train_raw is not None and (train_images or train_labels):
        raise ConfigError(f"{source}: give either train_raw or train_images/train_labels, not both")
    if train_raw is None:
        if train_images is None or train_labels is None:
            raise ConfigError(
                f"{source}: a data source is required (train_raw, or train_images + train_labels)"
            )

    binarize_threshold = e.take("binarize_threshold", float)
    image_rows = e.take("image_rows", _positive_int)
    image_cols = e.take("image_cols", _positive_int)
    if (image_rows is None) != (image_cols is None):
        raise ConfigError(f"{source}: image_rows and image_cols must be given together")
    if image_rows is not None and image_rows * image_cols != n_x:
        raise ConfigError(
            f"{source}: image geometry {image_rows}x{image_cols} != n_x={n_x}"
        )

    checkpoint_out = e.take("checkpoint_out", str, required=True)
    log_out = e.take("log_out", str)
    e.reject_leftovers()

    return RunConfig(
        model=model,
        n_x=n_x,
        n_y=n_y,
        n_f=n_f,
        n_h=n_h,
        hidden_activation=hidden_activation,
        output_activation=output_activation,
        hp=hp,
        tied=tied,
        train_images=train_images,
        train_labels=train_labels,
        train_raw=train_raw,
        binarize_threshold=binarize_threshold,
        image_rows=image_rows,
        image_cols=image_cols,
        checkpoint_out=checkpoint_out,
        log_out=log_out,
    )


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(), source=str(path))


def format_config(cfg: RunConfig) -> str:
    """Canonical text for a RunConfig; parse_config(format_config(c)) == c."""
    lines = [f"model = {cfg.model}", f"n_x = {cfg.n_x}"]
    if cfg.model == "gae":
        lines += [f"n_y = {cfg.n_y}", f"n_f = {cfg.n_f}"]
    lines.append(f"n_h = {cfg.n_h}")
    if cfg.model == "dae":
        lines.append(f"tied = {'true' if cfg.tied else 'false'}")
    lines += [
        f"hidden_activation = {cfg.hidden_activation.value}",
        f"output_activation = {cfg.output_activation.value}",
        f"loss = {cfg.hp.loss.value}",
        f"corruption = {cfg.hp.corruption.kind.value}",
        f"corruption_level = {cfg.hp.corruption.level!r}",
        f"walkback = {cfg.hp.walkback_k}",
        f"resample_walkback = {'true' if cfg.hp.resample_reconstructions else 'false'}",
        f"lr = {cfg.hp.lr0!r}",
        f"anneal = {cfg.hp.anneal!r}",
        f"momentum = {cfg.hp.momentum!r}",
        f"batch_size = {cfg.hp.batch_size}",
        f"epochs = {cfg.hp.epochs}",
        f"seed = {cfg.hp.seed}",
    ]
    if cfg.train_raw is not None:
        lines.append(f"train_raw = {cfg.train_raw}")
    else:
        lines += [f"train_images = {cfg.train_images}", f"train_labels = {cfg.train_labels}"]
    if cfg.binarize_threshold is not None:
        lines.append(f"binarize_threshold = {cfg.binarize_threshold!r}")
    if cfg.image_rows is not None:
        lines += [f"image_rows = {cfg.image_rows}", f"image_cols = {cfg.image_cols}"]
    lines.append(f"checkpoint_out = {cfg.checkpoint_out}")
    if cfg.log_out is not None:
        lines.append(f"log_out = {cfg.log_out}")
    return "\n".join(lines) + "\n"
