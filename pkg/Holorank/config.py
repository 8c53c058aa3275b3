"""Run configuration: settings defaults, dotted-key config files and CLI overrides.

Precedence is settings < config file < command-line flags. A config file is
either flat text::

    # comments and blank lines are ignored
    model.architecture = ntnlstm
    train.learning_rate = 1e-4
    data.train = data/train.tsv

(``[section]`` headers may prefix the keys below them) or a JSON run manifest
as written next to every training run.
"""

import dataclasses
import json
from pathlib import Path

from django.conf import settings

from .architectures import Architecture, ModelConfig
from .exceptions import ConfigError
from .trainer import TrainConfig

MANIFEST_NAME = "manifest.json"
DEFAULT_OUTPUT_DIR = "runs"

_NULLS = {"", "none", "null"}


def _to_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {"1", "true", "yes", "on"}:
        return True
    if text in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"{value!r} is not a boolean")


def _to_int(value):
    if isinstance(value, bool):
        raise ValueError(f"{value!r} is not an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"{value!r} is not an integer")
        return int(value)
    return int(str(value).strip())


def _to_float(value):
    return float(str(value).strip())


def _to_str(value):
    return str(value).strip()


def _optional(convert):
    def wrapped(value):
        if value is None or str(value).strip().lower() in _NULLS:
            return None
        return convert(value)

    return wrapped


MODEL_KEYS = {
    "architecture": lambda value: Architecture.parse(value).value,
    "embed_dim": _to_int,
    "lstm_dim": _to_int,
    "lstm_layers": _to_int,
    "hidden_dim": _optional(_to_int),
    "ntn_slices": _optional(_to_int),
    "use_bilinear_sim": _to_bool,
    "use_overlap_feats": _to_bool,
    "max_len_q": _to_int,
    "max_len_a": _to_int,
    "dropout_rate": _to_float,
    "activation": lambda value: _to_str(value).lower(),
}

TRAIN_KEYS = {
    "learning_rate": _to_float,
    "l2_lambda": _to_float,
    "clip_norm": _to_float,
    "batch_size": _to_int,
    "max_epochs": _to_int,
    "patience": _to_int,
    "keep_top_k": _to_int,
    "beta1": _to_float,
    "beta2": _to_float,
    "epsilon": _to_float,
}

DATA_KEYS = {
    "train": _optional(_to_str),
    "dev": _optional(_to_str),
    "test": _optional(_to_str),
    "embeddings": _optional(_to_str),
    "stopwords": _optional(_to_str),
    "format": _optional(lambda value: _to_str(value).lower()),
}

RUN_KEYS = {
    "out": _optional(_to_str),
    "seed": _to_int,
    "workers": _to_int,
    "precision": lambda value: _to_str(value).lower(),
    "tag": _optional(_to_str),
}

SCHEMA = {"model": MODEL_KEYS, "train": TRAIN_KEYS, "data": DATA_KEYS, "run": RUN_KEYS}

# Keys a manifest repeats inside model/train although the run section owns them.
_RUN_OWNED = {"model": {"seed", "precision"}, "train": {"seed", "workers"}}


def get_setting(name, default, convert=None):
    value = getattr(settings, name, default)
    try:
        return convert(value) if convert else value
    except (TypeError, ValueError):
        raise ConfigError(f"setting {name}={value!r} is invalid") from None


def get_default_values():
    """Flat dotted-key defaults from the HOLORANK_* settings."""
    return {
        "model.architecture": get_setting("HOLORANK_ARCHITECTURE", "hdlstm"),
        "model.embed_dim": get_setting("HOLORANK_EMBED_DIM", 50, int),
        "model.lstm_dim": get_setting("HOLORANK_LSTM_DIM", 640, int),
        "model.lstm_layers": get_setting("HOLORANK_LSTM_LAYERS", 2, int),
        "model.use_bilinear_sim": False,
        "model.use_overlap_feats": False,
        "model.max_len_q": get_setting("HOLORANK_MAX_LEN_Q", 11, int),
        "model.max_len_a": get_setting("HOLORANK_MAX_LEN_A", 38, int),
        "model.dropout_rate": get_setting("HOLORANK_DROPOUT", 0.5, float),
        "model.activation": get_setting("HOLORANK_ACTIVATION", "tanh"),
        "train.learning_rate": get_setting("HOLORANK_LEARNING_RATE", 1e-5, float),
        "train.l2_lambda": get_setting("HOLORANK_L2_LAMBDA", 1e-5, float),
        "train.clip_norm": get_setting("HOLORANK_CLIP_NORM", 1.0, float),
        "train.batch_size": get_setting("HOLORANK_BATCH_SIZE", 256, int),
        "train.max_epochs": get_setting("HOLORANK_MAX_EPOCHS", 30, int),
        "train.patience": get_setting("HOLORANK_PATIENCE", 5, int),
        "train.keep_top_k": get_setting("HOLORANK_KEEP_TOP_K", 3, int),
        "run.out": get_setting("HOLORANK_OUTPUT_DIR", DEFAULT_OUTPUT_DIR, str),
        "run.seed": get_setting("HOLORANK_SEED", 1, int),
        "run.workers": get_setting("HOLORANK_WORKERS", 1, int),
        "run.precision": get_setting("HOLORANK_PRECISION", "f32"),
    }


def get_bm25_parameters():
    return get_setting("HOLORANK_BM25_K1", 1.2, float), get_setting("HOLORANK_BM25_B", 0.75, float)


def parse_config_text(text, path="<config>"):
    values = {}
    section = ""
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_number}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if section and "." not in key:
            key = f"{section}.{key}"
        if value and len(value) >= 2 and value[0] == value[-1] and value[0] in {"'", '"'}:
            value = value[1:-1]
        values[key] = value
    return values


def flatten_manifest(payload):
    values = {}
    for section, entries in payload.items():
        if section not in SCHEMA or not isinstance(entries, dict):
            raise ConfigError(f"unknown manifest section {section!r}")
        for key, value in entries.items():
            if key in _RUN_OWNED.get(section, ()):
                continue
            values[f"{section}.{key}"] = value
    return values


def load_config_file(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: a manifest must be a JSON object")
        return flatten_manifest(payload)
    return parse_config_text(text, path)


def parse_override(text):
    """``section.key=value`` from a ``--set`` flag."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def convert_values(values):
    converted = {}
    for dotted, raw in values.items():
        section, _, key = dotted.partition(".")
        keys = SCHEMA.get(section)
        if keys is None or key not in keys:
            raise ConfigError(f"unknown config key {dotted!r}")
        try:
            converted[dotted] = keys[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {dotted!r}: {exc}") from None
    return converted


def apply_overrides(*layers):
    """Merge flat dotted-key layers left to right, later layers winning."""
    merged = {}
    for layer in layers:
        merged.update({key: value for key, value in layer.items() if value is not None})
    return merged


@dataclasses.dataclass(frozen=True)
class DataPaths:
    train: object = None
    dev: object = None
    test: object = None
    embeddings: object = None
    stopwords: object = None
    format: object = None


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a training run."""

    model: ModelConfig
    train: TrainConfig
    data: DataPaths
    out_dir: str
    seed: int
    workers: int
    precision: str
    tag: object = None

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "data": dataclasses.asdict(self.data),
            "run": {
                "out": self.out_dir,
                "seed": self.seed,
                "workers": self.workers,
                "precision": self.precision,
                "tag": self.tag,
            },
        }

    def write(self, directory=None):
        directory = Path(directory or self.out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _section(values, name):
    prefix = name + "."
    return {key[len(prefix):]: value for key, value in values.items() if key.startswith(prefix)}


def build_manifest(*layers):
    """Resolve settings defaults plus ``layers`` (flat dotted keys) into a validated manifest."""
    values = convert_values(apply_overrides(get_default_values(), *layers))
    model_values = _section(values, "model")
    train_values = _section(values, "train")
    run_values = _section(values, "run")

    architecture = Architecture.parse(model_values["architecture"])
    if architecture is Architecture.NTNLSTM:
        model_values.setdefault("ntn_slices", get_setting("HOLORANK_NTN_SLICES", 5, int))
    else:
        model_values.setdefault("hidden_dim", get_setting("HOLORANK_HIDDEN_DIM", 64, int))

    model = ModelConfig(seed=run_values["seed"], precision=run_values["precision"], **model_values)
    model = model.resolved().validate()
    train = TrainConfig(seed=run_values["seed"], workers=run_values["workers"], **train_values).validate()
    return RunManifest(
        model=model,
        train=train,
        data=DataPaths(**_section(values, "data")),
        out_dir=run_values.get("out") or DEFAULT_OUTPUT_DIR,
        seed=run_values["seed"],
        workers=run_values["workers"],
        precision=run_values["precision"],
        tag=run_values.get("tag"),
    )


def load_manifest(path):
    return build_manifest(load_config_file(path))
