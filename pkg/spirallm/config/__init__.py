import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

import toml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from ..errors import ConfigError

logger = logging.getLogger(__name__)

STRATEGIES = ("l2r", "r2l", "slm-random", "slm-twostage")
TASK_KINDS = ("copy", "reverse", "lexicon")
SEED_ENV = "SLM_SEED"


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    src_vocab_size: int
    tgt_vocab_size: int
    max_steps: int = 64
    dropout: float = 0.3
    tie_embeddings: bool = True

    @model_validator(mode="after")
    def check_shapes(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} must be divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.max_steps < 3:
            raise ValueError("max_steps must be >= 3 (start token plus both end markers)")
        if min(self.d_model, self.n_heads, self.n_layers, self.d_ff) < 1:
            raise ValueError("layer sizes must be positive")
        if self.tgt_vocab_size < 4 or self.src_vocab_size < 1:
            raise ValueError("vocabularies must hold the reserved ids and at least one token")
        return self


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = 2000
    batch_size: int = 32
    lr: float = 9e-5
    warmup_steps: int = 1000
    lr_schedule: Literal["inverse_sqrt", "constant"] = "inverse_sqrt"
    beta1: float = 0.9
    beta2: float = 0.98
    max_grad_norm: Optional[float] = None
    dropout: float = 0.3
    stage_boundary: float = 0.9
    top_k: int = 3
    strategy: Literal["l2r", "r2l", "slm-random", "slm-twostage"] = "slm-twostage"
    seed: int = 0
    data_fraction: float = 1.0
    eval_interval: int = 200
    eval_sentences: int = 100
    save_interval: Optional[int] = None

    @field_validator("stage_boundary", "data_fraction")
    @classmethod
    def check_fraction(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"must be in (0, 1], got {v}")
        return v

    @field_validator("top_k", "steps", "batch_size", "warmup_steps", "eval_interval")
    @classmethod
    def check_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v


class BeamConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beam: int = 5
    alpha: float = 0.6
    max_steps: int = 64
    forced_start: Optional[List[str]] = None
    forced_start_prob_one: bool = False
    l2r_forced: bool = False
    r2l_forced: bool = False

    @model_validator(mode="after")
    def check_beam(self):
        if self.beam < 1:
            raise ValueError(f"beam must be >= 1, got {self.beam}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.max_steps < 3:
            raise ValueError("max_steps must be >= 3")
        if self.forced_start is not None and not self.forced_start:
            raise ValueError("forced_start must hold at least one token")
        if sum((self.forced_start is not None, self.l2r_forced, self.r2l_forced)) > 1:
            raise ValueError("set at most one of forced_start, l2r_forced, r2l_forced")
        return self


class TaskSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["copy", "reverse", "lexicon"] = "copy"
    vocab_size: int = 20
    min_len: int = 1
    max_len: int = 10
    lexicon: Optional[Dict[str, str]] = None
    seed: int = 0
    n_train: int = 2000
    n_dev: int = 200
    n_test: int = 200
    stopwords: List[str] = []

    @model_validator(mode="after")
    def check_spec(self):
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ValueError(f"bad length range [{self.min_len}, {self.max_len}]")
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        if min(self.n_train, self.n_dev, self.n_test) < 0:
            raise ValueError("split sizes must be >= 0")
        if self.lexicon is not None and len(set(self.lexicon.values())) != len(self.lexicon):
            raise ValueError("lexicon must map distinct source tokens to distinct targets")
        return self


class RunConfig(BaseModel):
    """Every knob of a run in one flat namespace.

    The flat layout is what config files and command-line flags address;
    ``to_*`` methods split it into the per-module configs.
    """

    model_config = ConfigDict(extra="forbid")

    config_name: str = "default"

    # network
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    max_steps: int = 64
    tie_embeddings: bool = True

    # training
    steps: int = 2000
    batch_size: int = 32
    lr: float = 9e-5
    warmup_steps: int = 1000
    lr_schedule: Literal["inverse_sqrt", "constant"] = "inverse_sqrt"
    max_grad_norm: Optional[float] = None
    dropout: float = 0.3
    stage_boundary: float = 0.9
    top_k: int = 3
    strategy: Literal["l2r", "r2l", "slm-random", "slm-twostage"] = "slm-twostage"
    seed: int = 0
    data_fraction: float = 1.0
    eval_interval: int = 200
    eval_sentences: int = 100
    save_interval: Optional[int] = None

    # decoding
    beam: int = 5
    alpha: float = 0.6
    start: Optional[str] = None
    start_prob_one: bool = False
    l2r_forced: bool = False
    r2l_forced: bool = False
    threads: int = 1

    # synthetic task
    task: Literal["copy", "reverse", "lexicon"] = "copy"
    vocab_size: int = 20
    min_len: int = 1
    max_len: int = 10
    n_train: int = 2000
    n_dev: int = 200
    n_test: int = 200
    task_stopwords: List[str] = []

    # paths
    corpus: Optional[str] = None
    checkpoint: str = "spirallm.slmc"
    metrics_out: str = "metrics.csv"
    stopwords: Optional[str] = None

    @model_validator(mode="after")
    def check_sections(self):
        self.to_model_config(1, 4)
        self.to_train_config()
        self.to_beam_config()
        self.to_task_spec()
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        return self

    def to_model_config(self, src_vocab_size: int, tgt_vocab_size: int) -> ModelConfig:
        return ModelConfig(
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            d_ff=self.d_ff,
            src_vocab_size=src_vocab_size,
            tgt_vocab_size=tgt_vocab_size,
            max_steps=self.max_steps,
            dropout=self.dropout,
            tie_embeddings=self.tie_embeddings,
        )

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            **self.model_dump(include=set(TrainConfig.model_fields) & set(RunConfig.model_fields))
        )

    def to_beam_config(self) -> BeamConfig:
        return BeamConfig(
            beam=self.beam,
            alpha=self.alpha,
            max_steps=self.max_steps,
            forced_start=self.start.split() if self.start else None,
            forced_start_prob_one=self.start_prob_one,
            l2r_forced=self.l2r_forced,
            r2l_forced=self.r2l_forced,
        )

    def to_task_spec(self) -> TaskSpec:
        return TaskSpec(
            kind=self.task,
            vocab_size=self.vocab_size,
            min_len=self.min_len,
            max_len=self.max_len,
            seed=self.seed,
            n_train=self.n_train,
            n_dev=self.n_dev,
            n_test=self.n_test,
            stopwords=self.task_stopwords,
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        return build_run_config(file_values=read_config_file(path))


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a flat ``key = value`` file; nested tables are rejected."""
    path = Path(path)
    try:
        data = toml.load(path)
    except (OSError, toml.TomlDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config {path} must be flat, found tables {nested}")
    data.setdefault("config_name", path.stem)
    logger.debug("Loaded config file %s", path)
    return data


def build_run_config(
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge defaults, ``SLM_SEED``, file values and overrides, in that order."""
    environ = os.environ if environ is None else environ
    values: Dict[str, Any] = {}
    if environ.get(SEED_ENV):
        try:
            values["seed"] = int(environ[SEED_ENV])
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}") from e
    values.update(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


class Config:
    """Registry of the bundled presets, exposed as class attributes."""

    _configurations: Dict[str, Dict[str, Any]] = {}

    @classmethod
    def setup(cls):
        """Load presets from TOML files and set them as class attributes."""
        cls._configurations = cls.load_configurations()
        for config_name, values in cls._configurations.items():
            setattr(cls, config_name, build_run_config(file_values=values, environ={}))

    @staticmethod
    def load_configurations() -> Dict[str, Dict[str, Any]]:
        """Load raw preset values from TOML files next to this module."""
        config_dir = Path(__file__).parent
        return {f.stem: read_config_file(f) for f in sorted(config_dir.glob("*.toml"))}

    @classmethod
    def names(cls) -> List[str]:
        return sorted(cls._configurations)

    @classmethod
    def resolve(
        cls,
        name_or_path: Optional[str] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> RunConfig:
        """Build a run config from a preset name or a file path plus overrides."""
        file_values: Dict[str, Any] = {}
        if name_or_path:
            if name_or_path in cls._configurations:
                file_values = dict(cls._configurations[name_or_path])
            elif Path(name_or_path).is_file():
                file_values = read_config_file(name_or_path)
            else:
                raise ConfigError(
                    f"unknown config {name_or_path!r}; presets are {cls.names()}"
                )
        return build_run_config(file_values, overrides, environ)


Config.setup()

__all__ = [
    "BeamConfig",
    "Config",
    "ModelConfig",
    "RunConfig",
    "STRATEGIES",
    "TASK_KINDS",
    "TaskSpec",
    "TrainConfig",
    "build_run_config",
    "read_config_file",
]
