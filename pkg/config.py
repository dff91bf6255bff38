"""
Configuration management for the JOFC manifold-matching toolkit.

This module handles environment variable loading and provides centralized
configuration for the solvers, plus the declarative run configuration read
by the ``embed`` subcommand.
"""

import os
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional

from dotenv import load_dotenv, dotenv_values
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from errors import InputValidationError

# Load environment variables from .env file
load_dotenv()


class Config:
    """
    Configuration class that manages all environment variables and settings.

    This class provides a centralized way to access configuration values
    with proper validation and default values.
    """

    # Logging Configuration
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    @property
    def MAX_DENSE_SIZE(self) -> int:
        """Largest mn for which dense mn x mn oracles may be materialized."""
        try:
            return int(os.getenv("JOFC_MAX_DENSE_SIZE", "4000"))
        except (ValueError, TypeError):
            return 4000

    @property
    def N_JOBS(self) -> int:
        """Threads for parallel block products; 0 means one per modality."""
        try:
            return int(os.getenv("JOFC_N_JOBS", "0"))
        except (ValueError, TypeError):
            return 0

    @property
    def DEFAULT_SEED(self) -> int:
        """Seed used when neither the run config nor the CLI provides one."""
        try:
            return int(os.getenv("JOFC_DEFAULT_SEED", "0"))
        except (ValueError, TypeError):
            return 0

    @classmethod
    def validate(cls) -> bool:
        """
        Validate the environment-level settings.

        Returns:
            bool: True if the settings are usable

        Raises:
            ValueError: If a setting is out of range
        """
        instance = cls()
        if instance.MAX_DENSE_SIZE < 1:
            raise ValueError(
                f"JOFC_MAX_DENSE_SIZE must be positive, got {instance.MAX_DENSE_SIZE}. "
                f"Please check your .env file or environment variables."
            )
        if instance.N_JOBS < 0:
            raise ValueError(f"JOFC_N_JOBS must be >= 0, got {instance.N_JOBS}")
        if getattr(logging, cls.LOG_LEVEL.upper(), None) is None:
            raise ValueError(f"Unknown LOG_LEVEL: {cls.LOG_LEVEL}")
        return True

    @classmethod
    def setup_logging(cls) -> None:
        """
        Configure logging based on the LOG_LEVEL environment variable.

        Sets up structured logging with appropriate formatting and level.
        """
        log_level = getattr(logging, cls.LOG_LEVEL.upper(), logging.INFO)

        logging.basicConfig(
            level=log_level,
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )

        # Reduce noise from external libraries
        logging.getLogger("joblib").setLevel(logging.WARNING)
        logging.getLogger("sklearn").setLevel(logging.WARNING)


# Global config instance
config = Config()


def split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


CommaList = Annotated[List[Path], BeforeValidator(split_list)]
CommaFloats = Annotated[List[float], BeforeValidator(split_list)]


class WeightSettings(BaseModel):
    """Weight family as written in a run configuration file."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform", "general", "product"] = "uniform"
    w: float = Field(default=1.0, gt=0)
    matrix_path: Optional[Path] = None
    within_weights: Optional[CommaFloats] = None
    fidelity_scale: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_kind(self) -> "WeightSettings":
        if self.kind == "general" and self.matrix_path is None:
            raise ValueError("WEIGHT_KIND=general requires WEIGHT_MATRIX")
        if self.kind == "product" and not self.within_weights:
            raise ValueError("WEIGHT_KIND=product requires WITHIN_WEIGHTS")
        return self


class GeneratorSettings(BaseModel):
    """Synthetic problem generator selected in a run configuration."""

    model_config = ConfigDict(extra="forbid")

    setting: Literal["matched", "anomaly"] = "matched"
    n: int = Field(default=400, ge=2)
    m: int = Field(default=3, ge=1)
    dim: int = Field(default=2, ge=1)
    n_anomalies: int = Field(default=10, ge=0)


class RunConfig(BaseModel):
    """
    Declarative description of one embedding run.

    Exactly one of ``inputs`` and ``generator`` must be present.
    """

    model_config = ConfigDict(extra="forbid")

    inputs: Optional[CommaList] = None
    generator: Optional[GeneratorSettings] = None
    weights: WeightSettings = Field(default_factory=WeightSettings)
    d: int = Field(default=2, ge=1)
    eps: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=1000, ge=1)
    seed: int = Field(default_factory=lambda: config.DEFAULT_SEED)
    algorithm: Literal["fjofc", "jofc"] = "fjofc"
    init: Literal["averaged_procrustes", "imputed_cmds"] = "averaged_procrustes"
    normalize: bool = False
    parallel: bool = False
    keep_trace: bool = False
    output: Optional[Path] = None

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "RunConfig":
        if (self.inputs is None) == (self.generator is None):
            raise ValueError("exactly one of INPUTS and GENERATOR must be given")
        return self

    @classmethod
    def from_file(cls, path: Path, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """
        Read a KEY=VALUE run configuration file and apply flag overrides.

        Args:
            path (Path): Location of the configuration file
            overrides (Dict[str, Any]): Field values taken from the command line;
                ``None`` entries are ignored

        Returns:
            RunConfig: The validated configuration
        """
        if not Path(path).is_file():
            raise InputValidationError(f"Run configuration file not found: {path}")
        raw = {key.upper(): value for key, value in dotenv_values(path).items() if value is not None}
        data: Dict[str, Any] = {}

        if "INPUTS" in raw:
            data["inputs"] = raw.pop("INPUTS")
        if "GENERATOR" in raw:
            generator: Dict[str, Any] = {"setting": raw.pop("GENERATOR")}
            for key, field in (("N", "n"), ("M", "m"), ("DIM", "dim"), ("N_ANOMALIES", "n_anomalies")):
                if key in raw:
                    generator[field] = raw.pop(key)
            data["generator"] = generator

        weights: Dict[str, Any] = {}
        for key, field in (
            ("WEIGHT_KIND", "kind"),
            ("W", "w"),
            ("WEIGHT_MATRIX", "matrix_path"),
            ("WITHIN_WEIGHTS", "within_weights"),
            ("FIDELITY_SCALE", "fidelity_scale"),
        ):
            if key in raw:
                weights[field] = raw.pop(key)
        data["weights"] = weights

        for key in ("D", "EPS", "MAX_ITERATIONS", "SEED", "ALGORITHM", "INIT",
                    "NORMALIZE", "PARALLEL", "KEEP_TRACE", "OUTPUT"):
            if key in raw:
                data[key.lower()] = raw.pop(key)

        if raw:
            raise InputValidationError(f"Unknown keys in {path}: {', '.join(sorted(raw))}")

        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key == "w":
                data["weights"]["w"] = value
            else:
                data[key] = value

        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise InputValidationError(f"Invalid run configuration {path}: {e}") from e
