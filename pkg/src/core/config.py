import logging
from pathlib import Path
from typing import Literal, Optional

from dotenv import dotenv_values
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from src.core import constants
from src.core.errors import ConfigError
from src.norms.kinds import NormKind
from src.utils.math_utils import linear_scaled_lr

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """One training run of the MNIST harness"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    norm: Literal["bn", "ebn", "ln", "in", "gn"] = "ebn"
    groups: PositiveInt = constants.DEFAULT_GROUPS
    std_center: Literal["per-channel", "global"] = "per-channel"
    batch_size: PositiveInt = constants.BATCH_SIZE
    lr: NonNegativeFloat = constants.BASE_LR
    reference_batch: PositiveInt = constants.REFERENCE_BATCH
    epochs: PositiveInt = constants.EPOCHS
    momentum: float = Field(default=constants.SGD_MOMENTUM, ge=0.0, lt=1.0)
    weight_decay: NonNegativeFloat = constants.WEIGHT_DECAY
    rho: float = Field(default=constants.DEFAULT_RHO, gt=0.0, le=1.0)
    eps: PositiveFloat = constants.DEFAULT_EPS
    seed: NonNegativeInt = constants.SEED
    hidden_layers: NonNegativeInt = constants.HIDDEN_LAYERS
    hidden_units: PositiveInt = constants.HIDDEN_UNITS
    test_batch_size: PositiveInt = constants.TEST_BATCH_SIZE
    data_dir: Optional[Path] = None
    out: Optional[Path] = None
    fuse: bool = False

    @field_validator("norm", "std_center", mode="before")
    @classmethod
    def _normalize_choice(cls, value):
        if isinstance(value, str):
            return value.strip().lower().replace("_", "-")
        return value

    @model_validator(mode="after")
    def _check_combination(self):
        if self.norm == "gn" and self.hidden_layers and self.hidden_units % self.groups:
            raise ValueError(
                f"group norm needs groups ({self.groups}) to divide "
                f"hidden_units ({self.hidden_units})"
            )
        if self.fuse and self.norm not in constants.RUNNING_STAT_KINDS:
            raise ValueError(f"--fuse needs a running-statistics norm (bn or ebn), got {self.norm}")
        return self

    @property
    def kind(self):
        return NormKind(self.norm, groups=self.groups, std_center=self.std_center)

    @property
    def effective_lr(self):
        """base_lr * batch_size / reference_batch (linear scaling rule)"""
        return linear_scaled_lr(self.lr, self.batch_size, self.reference_batch)

    def run_name(self):
        return f"{self.norm}_bs{self.batch_size}_seed{self.seed}"


def _normalize_key(key):
    return key.strip().lower().lstrip("-").replace("-", "_")


def read_key_values(path):
    """Flat key=value file (dotenv syntax) with keys normalized to field names"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {_normalize_key(k): v for k, v in values.items() if v not in (None, "")}


def make_config(config_file=None, **overrides):
    """Defaults < config file < explicit overrides (None means not given)"""
    values = read_key_values(config_file) if config_file else {}
    values.update({_normalize_key(k): v for k, v in overrides.items() if v is not None})
    try:
        config = TrainConfig(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from e

    logger.debug("config: %s", config.model_dump())
    return config
