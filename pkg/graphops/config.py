# config.py
"""
Domyślne stałe pakietu oraz wczytywanie konfiguracji eksperymentu z pliku TOML.
"""

from __future__ import annotations

import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

logger = logging.getLogger(__name__)

# ---------- Stałe numeryczne ----------

QUADRATURE_POINTS = 4096
PROFILE_ATOMS = 512
NUM_TUPLES = 64
K_MAX = 4
FD_STEP = 1e-4
FD_TOLERANCE = 1.01
TIE_TOLERANCE = 1e-12
PROBES_PER_CELL = 8
SPREAD_TOLERANCE = 1e-9
BUMP_TABLE_POINTS = 20001
NOISE_CELLS = 64
PL_NODES_PER_UNIT = 16
DEFAULT_SHIFT = 1.0 / math.sqrt(2.0)
MAX_HYPERCUBE_DIM = 40
BRUTEFORCE_MAX_ATOMS = 15
DEFAULT_SEED = 0

THEOREMS = (
    "approximation",
    "transferability",
    "gnn-approximation",
    "gnn-transferability",
    "general-approximation",
    "gnn-signal-gap",
)

OPERATOR_KINDS = (
    "graphon",
    "shift-graphing",
    "whp-shift-graphing",
    "copies-graphing",
    "hypercube",
    "finite-matrix",
    "identity",
    "constant",
)


class ConfigError(ValueError):
    """Błąd wczytywania konfiguracji (mapowany na kod wyjścia 2)."""


# ---------- Modele konfiguracji ----------

class OperatorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal[
        "graphon",
        "shift-graphing",
        "whp-shift-graphing",
        "copies-graphing",
        "hypercube",
        "finite-matrix",
        "identity",
        "constant",
    ]
    N: Optional[int] = Field(default=None, ge=1)
    a: Optional[float] = Field(default=None, gt=0, lt=1)
    kernel: Optional[str] = None
    kernel_params: Dict[str, float] = Field(default_factory=dict)
    matrix_file: Optional[Path] = None
    normalize: bool = False
    variant: Literal["constant", "lipschitz"] = "lipschitz"
    value: float = 0.0
    C_v: float = Field(default=1.0, gt=0)
    discretize: Optional[int] = Field(default=None, ge=1)

    @field_validator("matrix_file")
    @classmethod
    def _matrix_file_exists(cls, v: Optional[Path]) -> Optional[Path]:
        if v is not None and not v.is_file():
            raise ValueError(f"matrix file does not exist: {v}")
        return v

    @model_validator(mode="after")
    def _required_params(self) -> "OperatorSpec":
        if self.kind in ("copies-graphing", "hypercube", "whp-shift-graphing") and self.N is None:
            raise ValueError(f"operator kind {self.kind!r} requires N")
        if self.kind == "graphon" and self.kernel is None:
            raise ValueError("graphon operator requires kernel")
        if self.kind == "finite-matrix" and self.matrix_file is None:
            raise ValueError("finite-matrix operator requires matrix_file")
        return self

    def base(self) -> "OperatorSpec":
        """Specyfikacja operatora ciągłego, bez dyskretyzacji."""
        return self.model_copy(update={"discretize": None})


class ProfileSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(default=1, ge=1)
    C_v: float = Field(default=1.0, gt=0)
    num_tuples: int = Field(default=NUM_TUPLES, ge=1)
    Q: int = Field(default=PROFILE_ATOMS, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)
    estimator: Literal["paired", "cross"] = "paired"
    family: Literal["piecewise-linear", "mollified-noise"] = "piecewise-linear"
    lipschitz_schedule: Literal["fixed", "sqrt", "log"] = "fixed"


class RandomGnnSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L: int = Field(ge=1)
    widths: List[int]
    K: int = Field(ge=1)
    activation: Literal["clip", "tanh", "leaky-abs"] = "clip"
    seed: int = Field(default=0, ge=0)


class GnnSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params_file: Optional[Path] = None
    random: Optional[RandomGnnSection] = None

    @field_validator("params_file")
    @classmethod
    def _params_file_exists(cls, v: Optional[Path]) -> Optional[Path]:
        if v is not None and not v.is_file():
            raise ValueError(f"params file does not exist: {v}")
        return v

    @model_validator(mode="after")
    def _one_source(self) -> "GnnSection":
        if (self.params_file is None) == (self.random is None):
            raise ValueError("gnn section needs exactly one of params_file, random")
        return self


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[Path] = None
    format: Optional[Literal["csv", "json"]] = None


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    operator: OperatorSpec
    other: Optional[OperatorSpec] = None
    resolutions: List[int] = Field(default_factory=list)
    theorem: Literal[
        "approximation",
        "transferability",
        "gnn-approximation",
        "gnn-transferability",
        "general-approximation",
        "gnn-signal-gap",
    ] = "approximation"
    k_max: int = Field(default=K_MAX, ge=1)
    strict: bool = False
    profile: ProfileSection = Field(default_factory=ProfileSection)
    gnn: Optional[GnnSection] = None
    output: OutputSection = Field(default_factory=OutputSection)
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    threads: Optional[int] = Field(default=None, ge=1)

    @field_validator("resolutions")
    @classmethod
    def _positive_resolutions(cls, v: List[int]) -> List[int]:
        bad = [n for n in v if n < 1]
        if bad:
            raise ValueError(f"resolutions must be positive, got {bad}")
        return v

    @property
    def profile_seed(self) -> int:
        return self.seed if self.profile.seed is None else self.profile.seed


def _first_error_location(exc) -> str:
    errors = exc.errors()
    if not errors:
        return "<config>"
    loc = ".".join(str(part) for part in errors[0].get("loc", ()))
    return f"{loc or '<config>'}: {errors[0].get('msg', '')}"


def load_experiment_config(path: Path) -> ExperimentConfig:
    """
    Wczytuje i waliduje konfigurację eksperymentu.

    Ścieżki plików (matrix_file, params_file) są rozwiązywane względem katalogu pliku.

    :param path: ścieżka do pliku TOML
    :return: zwalidowany ExperimentConfig
    :raises ConfigError: brak pliku, błąd składni albo błąd walidacji (z nazwą klucza)
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")

    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e

    _resolve_relative_paths(raw, path.parent)
    logger.debug("Loaded config keys: %s", sorted(raw))

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}: {_first_error_location(e)}") from e


def _resolve_relative_paths(raw: dict, base_dir: Path) -> None:
    for section, key in (("operator", "matrix_file"), ("other", "matrix_file"), ("gnn", "params_file")):
        block = raw.get(section)
        if isinstance(block, dict) and isinstance(block.get(key), str):
            p = Path(block[key])
            if not p.is_absolute():
                block[key] = str(base_dir / p)
