# guided_gan/helpers/config_loader.py
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from guided_gan.exceptions import ConfigError
from guided_gan.helpers.logger import setup_logger

logger = setup_logger("config_loader")

FRAMEWORK_IDS = ("rgan", "rfaae", "rbigan", "guided_gan", "rae_l1", "rae_l2", "m2v", "sup", "rand")
DATASET_IDS = ("synth_har", "ucihar", "mnist")
GENERATOR_LOSSES = ("non_saturating", "minimax")
REDUCTIONS = ("sum", "mean")
POOLINGS = ("last", "mean")

DEFAULT_FRACTIONS = (0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0)


@dataclass(frozen=True)
class DataConfig:
    dataset: str = "synth_har"
    root: Optional[str] = None
    window: int = 30
    stride: int = 15
    resample_hz: Optional[float] = None
    synth_classes: int = 6
    synth_channels: int = 3
    synth_per_class: int = 100
    synth_noise: float = 0.1
    mnist_train_limit: int = 10000
    mnist_download: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.dataset not in DATASET_IDS:
            raise ConfigError(f"Unknown dataset {self.dataset!r}; expected one of {DATASET_IDS}")
        if self.window < 1 or self.stride < 1:
            raise ConfigError("window and stride must be >= 1")
        if self.synth_classes < 2 or self.synth_channels < 1 or self.synth_per_class < 1:
            raise ConfigError("synth_classes >= 2, synth_channels >= 1 and synth_per_class >= 1 are required")
        if self.resample_hz is not None and self.resample_hz <= 0:
            raise ConfigError("resample_hz must be positive")


@dataclass(frozen=True)
class FrameworkConfig:
    framework: str = "guided_gan"
    lambda_x: float = 0.01
    lambda_z: float = 1.0
    epochs: int = 500
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    latent_dim: int = 100
    hidden_dim: int = 100
    seed: int = 0
    generator_loss: str = "non_saturating"
    recon_reduction: str = "sum"
    disc_time_reduction: str = "mean"
    faae_encoder_adversarial: bool = False
    d_steps: int = 1
    g_steps: int = 1
    checkpoint_every: int = 10
    device: str = "cpu"
    dtype: str = "float32"

    def __post_init__(self):
        if self.framework not in FRAMEWORK_IDS:
            raise ConfigError(f"Unknown framework {self.framework!r}; expected one of {FRAMEWORK_IDS}")
        if self.lambda_x < 0:
            raise ConfigError(f"lambda_x must be >= 0 (got {self.lambda_x})")
        if self.lambda_z < 0:
            raise ConfigError(f"lambda_z must be >= 0 (got {self.lambda_z})")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.latent_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("latent_dim and hidden_dim must be >= 1")
        if self.generator_loss not in GENERATOR_LOSSES:
            raise ConfigError(f"generator_loss must be one of {GENERATOR_LOSSES}")
        if self.recon_reduction not in REDUCTIONS or self.disc_time_reduction not in REDUCTIONS:
            raise ConfigError(f"recon_reduction / disc_time_reduction must be one of {REDUCTIONS}")
        if self.d_steps < 1 or self.g_steps < 1:
            raise ConfigError("d_steps and g_steps must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    @property
    def adversarial(self) -> bool:
        return self.framework in ("rgan", "rfaae", "rbigan", "guided_gan")


@dataclass(frozen=True)
class ProbeConfig:
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    feature_pooling: str = "last"
    fractions: Tuple[float, ...] = DEFAULT_FRACTIONS
    runs: int = 5

    def __post_init__(self):
        if self.feature_pooling not in POOLINGS:
            raise ConfigError(f"probe_feature_pooling must be one of {POOLINGS}")
        if any(not (0.0 < f <= 1.0) for f in self.fractions):
            raise ConfigError(f"probe_fractions must lie in (0, 1]; got {self.fractions}")
        if self.runs < 1 or self.epochs < 1:
            raise ConfigError("probe_runs and probe_epochs must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    out: Optional[str] = None
    force: bool = False
    probe_every: int = 0
    verbose: bool = False


@dataclass(frozen=True)
class AppConfig:
    base_dir: Path
    data: DataConfig
    framework: FrameworkConfig
    probe: ProbeConfig
    run: RunConfig
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.snapshot())

    def snapshot(self) -> Dict[str, Any]:
        """Flat key/value view, the same schema the YAML file uses."""
        out: Dict[str, Any] = {}
        for section, prefix in _SECTIONS:
            for k, v in asdict(getattr(self, section)).items():
                out[prefix + k] = list(v) if isinstance(v, tuple) else v
        return dict(sorted(out.items()))


# (attribute on AppConfig, flat key prefix)
_SECTIONS = (("data", ""), ("framework", ""), ("probe", "probe_"), ("run", ""))
_SECTION_TYPES = {"data": DataConfig, "framework": FrameworkConfig, "probe": ProbeConfig, "run": RunConfig}
REQUIRED_KEYS = ("framework", "dataset")


def known_keys() -> Dict[str, list]:
    """Flat key -> list of (section, field name) it feeds. ``seed`` feeds data and framework."""
    out: Dict[str, list] = {}
    for section, prefix in _SECTIONS:
        for f in fields(_SECTION_TYPES[section]):
            out.setdefault(prefix + f.name, []).append((section, f.name))
    return out


def config_hash(snapshot: Dict[str, Any]) -> str:
    blob = json.dumps(snapshot, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _require(d: Dict[str, Any], key: str) -> Any:
    if key not in d or d[key] is None:
        raise ConfigError(f"Missing required config key: '{key}'")
    return d[key]


def _as_fractions(value: Any) -> Tuple[float, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if isinstance(value, (int, float)):
        value = [value]
    return tuple(float(v) for v in value)


def build_config(data: Dict[str, Any], base_dir: Optional[Path] = None) -> AppConfig:
    """Validate a flat mapping and split it into the per-concern dataclasses."""
    keys = known_keys()
    unknown = sorted(k for k in data if k not in keys)
    if unknown:
        raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")

    for key in REQUIRED_KEYS:
        _require(data, key)

    kwargs: Dict[str, Dict[str, Any]] = {s: {} for s, _ in _SECTIONS}
    for key, value in data.items():
        if value is None and key not in ("root", "resample_hz", "out"):
            continue
        for section, name in keys[key]:
            kwargs[section][name] = _as_fractions(value) if name == "fractions" else value

    try:
        return AppConfig(
            base_dir=base_dir or project_root(),
            data=DataConfig(**kwargs["data"]),
            framework=FrameworkConfig(**kwargs["framework"]),
            probe=ProbeConfig(**kwargs["probe"]),
            run=RunConfig(**kwargs["run"]),
            raw=dict(data),
        )
    except TypeError as e:
        raise ConfigError(f"Invalid config value: {e}") from e


def project_root() -> Path:
    # Go up from helpers/ -> guided_gan/ -> src/ -> project root
    return Path(__file__).resolve().parents[3]


def load_config(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> AppConfig:
    """
    Loads config.yaml from the project config/ directory by default and applies
    ``overrides`` (CLI flags) on top. ``None`` override values are ignored.
    """
    base_dir = project_root()
    default_path = base_dir / "config" / "config.yaml"
    cfg_path = Path(config_path) if config_path else default_path

    data: Dict[str, Any] = {}
    if cfg_path.exists():
        data = yaml.safe_load(cfg_path.read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{cfg_path} must contain a flat key/value mapping")
        logger.info(f"Loaded config from {cfg_path}")
    elif config_path:
        raise FileNotFoundError(f"config file not found at: {cfg_path}")
    else:
        logger.debug(f"No config at {cfg_path}; using defaults and flags only")

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    return build_config(data, base_dir=base_dir)


def dump_config(cfg: AppConfig, path: Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.snapshot(), sort_keys=True), encoding="utf-8")
