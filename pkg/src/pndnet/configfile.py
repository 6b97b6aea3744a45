"""UTF-8 key=value configuration files ('#' comments, blank lines allowed).

The same flat key set configures the CLI and is embedded verbatim in
checkpoints; unknown keys are rejected so typos fail loudly. The full key
list is documented in the README.
"""

from __future__ import annotations

from dataclasses import replace

from .backbone import BackboneConfig
from .data import AugmentConfig
from .errors import ConfigurationError
from .model import ModelConfig
from .train import TrainConfig


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def format_config(values: dict[str, str]) -> str:
    return "".join(f"{k}={values[k]}\n" for k in sorted(values))


def _bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _int_list(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(",") if v.strip())


# key -> (section, field, parser); sections are applied onto the dataclasses
_MODEL_KEYS = {
    "image_size": ("model", "image_size", int),
    "resize_size": ("model", "resize_size", int),
    "upsample": ("model", "upsample_factor", int),
    "g": ("model", "region_grid", int),
    "spp_levels": ("model", "spp_levels", _int_list),
    "use_regions": ("model", "use_regions", _bool),
    "use_spp": ("model", "use_spp", _bool),
    "gcn_layers": ("model", "gcn_layers", int),
    "gcn_width": ("model", "gcn_width", lambda v: None if int(v) == 0 else int(v)),
    "dropout": ("model", "dropout", float),
    "head_norm": ("model", "head_norm", str),
    "use_rank1": ("model", "use_rank1", _bool),
    "backbone_channels": ("backbone", "channels", _int_list),
    "kernel": ("backbone", "kernel_size", int),
    "pool_stride": ("backbone", "pool_stride", int),
    "out_channels": ("backbone", "out_channels", int),
}

_TRAIN_KEYS = {
    "lr": ("train", "lr", float),
    "batch": ("train", "batch_size", int),
    "epochs": ("train", "epochs", int),
    "seed": ("train", "seed", int),
    "lr_decay_epoch": ("train", "lr_decay_epoch", int),
    "lr_decay_factor": ("train", "lr_decay_factor", float),
    "rotation": ("augment", "rotation_deg", float),
    "scale": ("augment", "scale_delta", float),
    "flip_p": ("augment", "flip_p", float),
    "blur_p": ("augment", "blur_p", float),
    "blur_sigma_lo": ("augment", "blur_sigma_lo", float),
    "blur_sigma_hi": ("augment", "blur_sigma_hi", float),
}

ALL_KEYS = {**_MODEL_KEYS, **_TRAIN_KEYS}

# checkpoint metadata written next to the config keys
METADATA_KEYS = {"n_classes", "class_names", "channel_means", "rng_algorithm"}


def configs_from_dict(values: dict[str, str],
                      base_model: ModelConfig | None = None,
                      base_train: TrainConfig | None = None,
                      allow_metadata: bool = False) -> tuple[ModelConfig, TrainConfig]:
    """Apply flat key=value settings onto default (or given) configs."""
    model = base_model if base_model is not None else ModelConfig()
    train = base_train if base_train is not None else TrainConfig()
    backbone = model.backbone
    augment_cfg = train.augment
    blur_lo, blur_hi = augment_cfg.blur_sigma

    model_updates: dict = {}
    backbone_updates: dict = {}
    train_updates: dict = {}
    augment_updates: dict = {}
    for key, value in values.items():
        if key not in ALL_KEYS:
            if allow_metadata and key in METADATA_KEYS:
                continue
            raise ConfigurationError(f"unknown config key {key!r}")
        section, field_name, parser = ALL_KEYS[key]
        try:
            parsed = parser(value)
        except ValueError as err:
            raise ConfigurationError(f"bad value for {key!r}: {value!r} ({err})") from err
        if section == "model":
            model_updates[field_name] = parsed
        elif section == "backbone":
            backbone_updates[field_name] = parsed
        elif section == "train":
            train_updates[field_name] = parsed
        elif field_name == "blur_sigma_lo":
            blur_lo = parsed
        elif field_name == "blur_sigma_hi":
            blur_hi = parsed
        else:
            augment_updates[field_name] = parsed

    backbone = replace(backbone, **backbone_updates) if backbone_updates else backbone
    model = replace(model, backbone=backbone, **model_updates)
    augment_cfg = replace(augment_cfg, blur_sigma=(blur_lo, blur_hi), **augment_updates)
    train = replace(train, augment=augment_cfg, **train_updates)
    model.validate()
    train.validate()
    return model, train


def configs_to_dict(model: ModelConfig, train: TrainConfig) -> dict[str, str]:
    b: BackboneConfig = model.backbone
    a: AugmentConfig = train.augment
    return {
        "image_size": str(model.image_size),
        "resize_size": str(model.resize_size),
        "upsample": str(model.upsample_factor),
        "g": str(model.region_grid),
        "spp_levels": ",".join(str(n) for n in model.spp_levels),
        "use_regions": str(model.use_regions).lower(),
        "use_spp": str(model.use_spp).lower(),
        "gcn_layers": str(model.gcn_layers),
        "gcn_width": "0" if model.gcn_width is None else str(model.gcn_width),
        "dropout": repr(model.dropout),
        "head_norm": model.head_norm,
        "use_rank1": str(model.use_rank1).lower(),
        "backbone_channels": ",".join(str(c) for c in b.channels),
        "kernel": str(b.kernel_size),
        "pool_stride": str(b.pool_stride),
        "out_channels": str(b.out_channels),
        "lr": repr(train.lr),
        "batch": str(train.batch_size),
        "epochs": str(train.epochs),
        "seed": str(train.seed),
        "lr_decay_epoch": str(train.lr_decay_epoch),
        "lr_decay_factor": repr(train.lr_decay_factor),
        "rotation": repr(a.rotation_deg),
        "scale": repr(a.scale_delta),
        "flip_p": repr(a.flip_p),
        "blur_p": repr(a.blur_p),
        "blur_sigma_lo": repr(a.blur_sigma[0]),
        "blur_sigma_hi": repr(a.blur_sigma[1]),
    }


def load_config_file(path) -> tuple[ModelConfig, TrainConfig]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigurationError(f"cannot read config {path}: {err}") from err
    return configs_from_dict(parse_config_text(text))
