# -*- coding: utf-8 -*-
"""Training configuration: typed dataclasses read from TOML and overridden from the command line."""
import dataclasses
from dataclasses import dataclass, field
import math
import sys
import popnet.settings as settings
from popnet.exceptions import ValidationError
from popnet.losses import SSIMConfig, WTVConfig, PopLossWeights, SeparationConfig, TotalLossWeights
from popnet.utils import json_hash, resolve_seed

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _check_non_negative(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
            raise ValidationError("%s must be finite and non-negative, got %s" % (name, str(value)))


@dataclass(frozen=True)
class HyperParams:
    """Every free scalar of the training objective."""
    lambda1: float = settings.DEFAULT_LAMBDA1
    lambda2: float = settings.DEFAULT_LAMBDA2
    alpha1: float = settings.DEFAULT_ALPHA1
    alpha2: float = settings.DEFAULT_ALPHA2
    sigma: float = settings.SEPARATION_SIGMA
    gamma: float = settings.WTV_GAMMA
    wtv_power: int = settings.WTV_POWER
    ssim_window: int = settings.SSIM_WINDOW
    ssim_c1: float = settings.SSIM_C1
    ssim_c2: float = settings.SSIM_C2
    bce_eps: float = settings.BCE_EPS

    def __post_init__(self):
        _check_non_negative(self, ("lambda1", "lambda2", "alpha1", "alpha2", "gamma"))
        # Building the loss configurations runs their own checks.
        self.ssim_config()
        self.wtv_config()
        self.separation_config()

    def ssim_config(self) -> SSIMConfig:
        return SSIMConfig(window=self.ssim_window, c1=self.ssim_c1, c2=self.ssim_c2)

    def wtv_config(self) -> WTVConfig:
        return WTVConfig(gamma=self.gamma, power=self.wtv_power)

    def pop_weights(self) -> PopLossWeights:
        return PopLossWeights(lambda1=self.lambda1, lambda2=self.lambda2)

    def separation_config(self) -> SeparationConfig:
        return SeparationConfig(sigma=self.sigma, eps=self.bce_eps)

    def total_weights(self) -> TotalLossWeights:
        return TotalLossWeights(alpha1=self.alpha1, alpha2=self.alpha2)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of both networks: encoder family, channel plan over the five scales and a width multiplier
    applied to it."""
    encoder: str = "plain"
    channels: tuple = settings.TOY_CHANNELS
    width: float = 1.0

    def __post_init__(self):
        if self.encoder not in settings.ENCODER_FAMILIES:
            raise ValidationError("Unknown encoder '%s', expected one of %s"
                                  % (str(self.encoder), str(settings.ENCODER_FAMILIES)))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) != 5 or min(self.channels) < 1:
            raise ValidationError("The channel plan must give 5 positive channel counts")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValidationError("Width multiplier must be positive")

    @property
    def scaled_channels(self) -> tuple:
        return tuple(max(1, int(round(c * self.width))) for c in self.channels)

    @classmethod
    def full_scale(cls):
        """Residual encoder with the 64/64/128/256/512 channel plan (about 12.7M parameters for the popping
        network)."""
        return cls(encoder="residual", channels=settings.FULL_CHANNELS, width=1.0)

    def to_dict(self) -> dict:
        return {"encoder": self.encoder, "channels": list(self.channels), "width": float(self.width)}


def config_hash(model_config: ModelConfig) -> str:
    """SHA-256 of the canonical JSON form of an architecture configuration."""
    return json_hash(model_config.to_dict())


@dataclass(frozen=True)
class AugmentationPolicy:
    """Random joint geometric transforms applied to training samples.

    Each transform is applied with its own probability: horizontal flip, rotation by an angle drawn uniformly in
    ``[-rotation_degrees, rotation_degrees]`` and border clipping, which crops each side by a fraction drawn in
    ``[0, clip_fraction]`` and resizes back.
    """
    flip_probability: float = 0.5
    rotation_probability: float = 0.5
    rotation_degrees: float = 15.0
    clip_probability: float = 0.5
    clip_fraction: float = 0.1

    def __post_init__(self):
        for name in ("flip_probability", "rotation_probability", "clip_probability"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValidationError("%s must lie in [0, 1], got %s" % (name, str(value)))
        _check_non_negative(self, ("rotation_degrees", "clip_fraction"))
        if not self.clip_fraction < 0.3:
            raise ValidationError("clip_fraction must be < 0.3, got %s" % str(self.clip_fraction))

    @classmethod
    def disabled(cls):
        return cls(flip_probability=0.0, rotation_probability=0.0, rotation_degrees=0.0, clip_probability=0.0,
                   clip_fraction=0.0)


@dataclass(frozen=True)
class LossSwitches:
    """Enable flags of the ablatable losses. The semantic loss is always on."""
    dep: bool = True
    loc: bool = True
    wtv: bool = True
    sep: bool = True

    def without(self, names) -> "LossSwitches":
        """Return a copy with the given losses disabled.

        Raises
        ------
        ValidationError
            If a name is not one of ``settings.LOSS_NAMES``.
        """
        names = list(names)
        unknown = [n for n in names if n not in settings.LOSS_NAMES]
        if unknown:
            raise ValidationError("Unknown loss names %s, expected a subset of %s"
                                  % (str(unknown), str(settings.LOSS_NAMES)))
        return dataclasses.replace(self, **{n: False for n in names})

    def enabled(self) -> list:
        return [n for n in settings.LOSS_NAMES if getattr(self, n)]


@dataclass(frozen=True)
class TrainConfig:
    """Full training configuration.

    ``max_steps`` (when set) stops the run before the epoch budget is spent. ``checkpoint_every`` writes an extra
    checkpoint every that many steps (0 only writes the final one). ``depth_subdir`` selects the depth fed to the
    popping network (``"depths"`` for source-free depth, ``"gt_depths"`` for ideal depth) and ``train_fraction``
    trains on a seeded subset of the samples.
    """
    resolution: int = settings.DEFAULT_RESOLUTION
    learning_rate: float = settings.DEFAULT_LEARNING_RATE
    lr_step_epochs: int = settings.DEFAULT_LR_STEP_EPOCHS
    lr_gamma: float = settings.DEFAULT_LR_GAMMA
    epochs: int = settings.DEFAULT_EPOCHS
    max_steps: int = None
    batch_size: int = settings.DEFAULT_BATCH_SIZE
    weight_decay: float = settings.DEFAULT_WEIGHT_DECAY
    seed: int = settings.DEFAULT_SEED
    workers: int = 0
    device: str = "auto"
    depth_subdir: str = settings.DEPTHS_DIR
    train_fraction: float = 1.0
    checkpoint_every: int = 0
    hyper: HyperParams = field(default_factory=HyperParams)
    model: ModelConfig = field(default_factory=ModelConfig)
    augment: AugmentationPolicy = field(default_factory=AugmentationPolicy)
    losses: LossSwitches = field(default_factory=LossSwitches)

    def __post_init__(self):
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValidationError("Learning rate must be positive, got %s" % str(self.learning_rate))
        if self.resolution <= 0 or self.resolution % settings.DOWNSAMPLING_FACTOR != 0:
            raise ValidationError("Resolution must be a positive multiple of %d, got %s"
                                  % (settings.DOWNSAMPLING_FACTOR, str(self.resolution)))
        if self.batch_size < 1 or self.epochs < 1 or self.lr_step_epochs < 1:
            raise ValidationError("batch_size, epochs and lr_step_epochs must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValidationError("max_steps must be >= 1 when given")
        if not 0 < self.lr_gamma <= 1:
            raise ValidationError("lr_gamma must lie in (0, 1]")
        if self.workers < 0 or self.checkpoint_every < 0:
            raise ValidationError("workers and checkpoint_every must be >= 0")
        _check_non_negative(self, ("weight_decay",))
        if self.depth_subdir not in (settings.DEPTHS_DIR, settings.GT_DEPTHS_DIR):
            raise ValidationError("depth_subdir must be '%s' or '%s'" % (settings.DEPTHS_DIR, settings.GT_DEPTHS_DIR))
        if not 0 < self.train_fraction <= 1:
            raise ValidationError("train_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["model"] = self.model.to_dict()
        return data


_SECTIONS = {"hyper": HyperParams, "model": ModelConfig, "augment": AugmentationPolicy, "losses": LossSwitches}


def _build_section(cls, values: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ValidationError("Unknown keys %s in [%s]" % (str(unknown), section))
    return cls(**values)


def config_from_dict(data: dict) -> TrainConfig:
    """Build a ``TrainConfig`` from a nested mapping with the tables ``train``, ``hyper``, ``model``, ``augment``
    and ``losses`` (all optional). Unknown tables or keys raise ``ValidationError``."""
    unknown = sorted(set(data) - set(_SECTIONS) - {"train"})
    if unknown:
        raise ValidationError("Unknown configuration tables %s" % str(unknown))
    kwargs = {name: _build_section(cls, dict(data.get(name, {})), name) for name, cls in _SECTIONS.items()}
    train_values = dict(data.get("train", {}))
    train_names = {f.name for f in dataclasses.fields(TrainConfig)} - set(_SECTIONS)
    unknown = sorted(set(train_values) - train_names)
    if unknown:
        raise ValidationError("Unknown keys %s in [train]" % str(unknown))
    kwargs.update(train_values)
    return TrainConfig(**kwargs)


def load_config(path=None) -> TrainConfig:
    """Read a TOML training configuration (defaults when ``path`` is None) and apply the ``POPNET_SEED``
    environment override.

    Examples
    --------
    >>> import popnet as pn
    >>> pn.load_config().resolution
    352
    """
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except OSError as e:
            raise ValidationError("Cannot read configuration file %s: %s" % (str(path), str(e)))
        except tomllib.TOMLDecodeError as e:
            raise ValidationError("Cannot parse configuration file %s: %s" % (str(path), str(e)))
    config = config_from_dict(data)
    return dataclasses.replace(config, seed=resolve_seed(config.seed))


def apply_overrides(config: TrainConfig, overrides: dict) -> TrainConfig:
    """Return a copy of ``config`` where the given values replace the configured ones.

    Keys are field names of ``TrainConfig`` or dotted names ``"<table>.<field>"`` for the nested tables; ``None``
    values are ignored.
    """
    top, nested = {}, {}
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ValidationError("Unknown configuration table '%s'" % section)
            nested.setdefault(section, {})[name] = value
        else:
            top[key] = value
    for section, values in nested.items():
        current = getattr(config, section)
        names = {f.name for f in dataclasses.fields(current)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise ValidationError("Unknown keys %s in [%s]" % (str(unknown), section))
        top[section] = dataclasses.replace(current, **values)
    return dataclasses.replace(config, **top)
