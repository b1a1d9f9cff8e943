"""Run configuration: a sectioned key-value text document.

Every hyperparameter has a named key; values shipped as defaults follow
the two-layer face experiment (8 atoms of 8x8 and 16 of 16x16 on 64x64
inputs, 20-image batches, 1000 epochs) where published, and documented
defaults elsewhere. Parsing round-trips: serialize(parse(text)) is
semantically identical to the input.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .fista import FistaParams
from .training import TrainingConfig

Architecture = tuple[tuple[int, tuple[int, int]], ...]

DEFAULT_ARCHITECTURE: Architecture = ((8, (8, 8)), (16, (16, 16)))


def _default_training() -> TrainingConfig:
    return TrainingConfig(dict_thresholds=(1e-4,), epochs=1000)


@dataclass(frozen=True)
class RunConfig:
    """Everything a training run needs, aggregated from one config file."""

    architecture: Architecture = DEFAULT_ARCHITECTURE
    data_source: str | None = None
    image_size: tuple[int, int] = (64, 64)
    lcn_window: int = 9
    lcn_epsilon: float = 1e-8
    training: TrainingConfig = field(default_factory=_default_training)
    output_dir: str = "runs/out"
    checkpoint_every: int = 25

    def __post_init__(self):
        if self.checkpoint_every < 1:
            raise ConfigError("output.checkpoint_every must be >= 1")
        if len(self.training.dict_thresholds) != len(self.architecture) - 1:
            raise ConfigError(
                "training.dict_thresholds must list one value per layer from 2 on "
                f"({len(self.architecture) - 1} values for this architecture, "
                f"got {len(self.training.dict_thresholds)})"
            )


def parse_architecture(text: str) -> Architecture:
    """Parse ``"8@8x8, 16@16x16"`` into ((8, (8, 8)), (16, (16, 16)))."""
    layers = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            count_part, size_part = item.split("@")
            count = int(count_part)
            if "x" in size_part:
                h_part, w_part = size_part.split("x")
                size = (int(h_part), int(w_part))
            else:
                size = (int(size_part), int(size_part))
        except ValueError:
            raise ConfigError(
                f"model.architecture: cannot parse layer {item!r} "
                "(expected count@HxW)"
            ) from None
        layers.append((count, size))
    if not layers:
        raise ConfigError("model.architecture: no layers given")
    return tuple(layers)


def format_architecture(arch: Architecture) -> str:
    return ", ".join(f"{n}@{h}x{w}" for n, (h, w) in arch)


def _get(parser, section, option, convert, default):
    if not parser.has_option(section, option):
        return default
    raw = parser.get(section, option)
    try:
        return convert(raw)
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{section}.{option}: cannot parse {raw!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    items = [part.strip() for part in text.split(",")]
    return tuple(float(part) for part in items if part)


def parse_config(text: str) -> RunConfig:
    """Parse the sectioned key-value document into a :class:`RunConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    known = {
        "model": {"architecture"},
        "data": {"source", "image_size", "lcn_window", "lcn_epsilon"},
        "training": {
            "learning_rate",
            "dict_thresholds",
            "epochs",
            "batch_size",
            "seed",
        },
        "fista": {"penalty", "max_iters", "rel_tol", "lipschitz_iters", "seed"},
        "output": {"directory", "checkpoint_every"},
    }
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        for option in parser.options(section):
            if option not in known[section]:
                raise ConfigError(f"unknown option {section}.{option}")

    defaults = RunConfig()
    arch = _get(
        parser, "model", "architecture", parse_architecture, defaults.architecture
    )

    def int_pair(raw: str) -> tuple[int, int]:
        if "x" in raw:
            h, w = raw.split("x")
            return int(h), int(w)
        return int(raw), int(raw)

    source = _get(parser, "data", "source", str, None)
    image_size = _get(parser, "data", "image_size", int_pair, defaults.image_size)
    lcn_window = _get(parser, "data", "lcn_window", int, defaults.lcn_window)
    lcn_epsilon = _get(parser, "data", "lcn_epsilon", float, defaults.lcn_epsilon)

    base_training = TrainingConfig(
        dict_thresholds=(0.0,) * (len(arch) - 1) if len(arch) > 1 else ()
    )
    try:
        fista = FistaParams(
            penalty=_get(parser, "fista", "penalty", float, FistaParams().penalty),
            max_iters=_get(parser, "fista", "max_iters", int, FistaParams().max_iters),
            rel_tol=_get(parser, "fista", "rel_tol", float, FistaParams().rel_tol),
            lipschitz_iters=_get(
                parser, "fista", "lipschitz_iters", int, FistaParams().lipschitz_iters
            ),
            seed=_get(parser, "fista", "seed", int, FistaParams().seed),
        )
        training = TrainingConfig(
            learning_rate=_get(
                parser, "training", "learning_rate", float,
                base_training.learning_rate,
            ),
            dict_thresholds=_get(
                parser, "training", "dict_thresholds", _floats,
                base_training.dict_thresholds,
            ),
            epochs=_get(parser, "training", "epochs", int, 1000),
            batch_size=_get(
                parser, "training", "batch_size", int, base_training.batch_size
            ),
            seed=_get(parser, "training", "seed", int, base_training.seed),
            fista=fista,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    return RunConfig(
        architecture=arch,
        data_source=source,
        image_size=image_size,
        lcn_window=lcn_window,
        lcn_epsilon=lcn_epsilon,
        training=training,
        output_dir=_get(parser, "output", "directory", str, defaults.output_dir),
        checkpoint_every=_get(
            parser, "output", "checkpoint_every", int, defaults.checkpoint_every
        ),
    )


def read_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    """Render a :class:`RunConfig` back to the text format."""
    parser = configparser.ConfigParser()
    parser["model"] = {"architecture": format_architecture(cfg.architecture)}
    data = {
        "image_size": f"{cfg.image_size[0]}x{cfg.image_size[1]}",
        "lcn_window": str(cfg.lcn_window),
        "lcn_epsilon": repr(cfg.lcn_epsilon),
    }
    if cfg.data_source is not None:
        data["source"] = cfg.data_source
    parser["data"] = data
    parser["training"] = {
        "learning_rate": repr(cfg.training.learning_rate),
        "dict_thresholds": ", ".join(repr(z) for z in cfg.training.dict_thresholds),
        "epochs": str(cfg.training.epochs),
        "batch_size": str(cfg.training.batch_size),
        "seed": str(cfg.training.seed),
    }
    parser["fista"] = {
        "penalty": repr(cfg.training.fista.penalty),
        "max_iters": str(cfg.training.fista.max_iters),
        "rel_tol": repr(cfg.training.fista.rel_tol),
        "lipschitz_iters": str(cfg.training.fista.lipschitz_iters),
        "seed": str(cfg.training.fista.seed),
    }
    parser["output"] = {
        "directory": cfg.output_dir,
        "checkpoint_every": str(cfg.checkpoint_every),
    }
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """Override both training and solver seeds (the --seed flag)."""
    from dataclasses import replace

    training = replace(
        cfg.training, seed=seed, fista=replace(cfg.training.fista, seed=seed)
    )
    return replace(cfg, training=training)
