"""Run configuration: JSON file sections, discovery and environment overrides."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .montecarlo import DESK_POINTS, GRID_SIZE, TABLE_SETTINGS
from .optimize import OptimizerConfig


logger = logging.getLogger(__name__)

CONFIG_FILENAME = ".sslemle.json"
DATASET_ENV = "SSLEMLE_DATASET_PATH"
ESTIMATE_FROM_MATCHED = "estimate-from-matched"


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NoiseSection(Section):
    """Exponential-power noise with the given variance."""
    alpha: float = Field(2.0, ge=1.0, description="Shape exponent; 2 is Gaussian, 1 is Laplace")
    scale: Union[float, Literal["estimate-from-matched"]] = Field(
        ESTIMATE_FROM_MATCHED, description="Noise standard deviation, or estimate it from matched OLS residuals"
    )

    @field_validator("scale")
    @classmethod
    def _positive_scale(cls, value):
        if isinstance(value, float) and not value > 0.0:
            raise ValueError("scale must be positive")
        return value


class OptimizerSection(Section):
    gradient_tolerance: float = Field(1e-8, gt=0.0)
    max_iterations: int = Field(500, ge=1)
    restarts: int = Field(8, ge=0)
    simplex_tolerance: float = Field(1e-8, gt=0.0)

    def build(self, seed: int = 0, n_jobs: int = 1) -> OptimizerConfig:
        return OptimizerConfig(
            gradient_tolerance=self.gradient_tolerance,
            max_iterations=self.max_iterations,
            restarts=self.restarts,
            seed=seed,
            simplex_tolerance=self.simplex_tolerance,
            n_jobs=n_jobs,
        )


class FitSection(Section):
    """Inputs of ``sslemle fit``."""
    matched_path: Optional[Path] = Field(None, description="CSV with linked covariates and responses")
    unmatched_path: Optional[Path] = Field(None, description="CSV with unmatched covariates (and responses)")
    unmatched_response_path: Optional[Path] = Field(
        None, description="Separate CSV of unmatched responses; default reads them from unmatched_path"
    )
    estimator: Literal["sslemle", "mmle", "olse", "dlse", "logistic"] = "sslemle"
    intercept: bool = False
    unknown_sigma: bool = False
    level: float = Field(0.95, gt=0.0, lt=1.0)


class GainSection(Section):
    """Population model for ``sslemle gain``."""
    beta0: List[float] = Field(default_factory=lambda: [1.0])
    mu_x: Optional[List[float]] = Field(None, description="Covariate mean; zero when omitted")
    sigma_x: Optional[List[List[float]]] = Field(None, description="Covariate covariance; identity when omitted")
    sigma_eps: float = Field(1.0, gt=0.0)
    lam: float = Field(0.2, gt=0.0, lt=1.0)
    law: Literal["gaussian", "uniform"] = "gaussian"
    numeric: bool = Field(False, description="Use quadrature even when a closed form exists")

    @model_validator(mode="after")
    def _dimensions(self):
        p = len(self.beta0)
        if p == 0:
            raise ValueError("beta0 must have at least one entry")
        if self.mu_x is not None and len(self.mu_x) != p:
            raise ValueError(f"mu_x must have {p} entries")
        if self.sigma_x is not None and (len(self.sigma_x) != p or any(len(row) != p for row in self.sigma_x)):
            raise ValueError(f"sigma_x must be {p} x {p}")
        return self


class SimulationSection(Section):
    """Settings of ``sslemle simulate``."""
    kind: Literal["table", "coverage", "logistic"] = "table"
    index: int = 1
    lam: float = Field(0.2, gt=0.0, lt=1.0)
    n: int = Field(5000, ge=1)
    replications: int = Field(500, ge=2)
    points: List[int] = Field(default_factory=lambda: list(DESK_POINTS))
    perturbation_sd: float = Field(0.1, ge=0.0)
    restarts: int = Field(0, ge=0)
    coverage_point: int = 0
    level: float = Field(0.95, gt=0.0, lt=1.0)
    logistic_m: int = Field(100, ge=2)
    logistic_n: List[int] = Field(default_factory=lambda: [100, 500, 1000, 5000, 10_000, 50_000, 100_000])

    @model_validator(mode="after")
    def _indices(self):
        if self.index not in TABLE_SETTINGS:
            raise ValueError(f"index must be one of {sorted(TABLE_SETTINGS)}")
        if any(not 0 <= k < GRID_SIZE for k in [*self.points, self.coverage_point]):
            raise ValueError(f"grid points must lie in [0, {GRID_SIZE - 1}]")
        return self


class DataAppSection(Section):
    """Repeated-split protocol of ``sslemle data-app``."""
    matched_count: int = Field(10, ge=1)
    unmatched_counts: List[int] = Field(default_factory=lambda: [50, 100, 200, 400, 800, 1600])
    replications: int = Field(100, ge=1)
    train_fraction: float = Field(0.75, gt=0.0, le=1.0)
    noise_sd: Optional[float] = Field(4.558, gt=0.0, description="None uses the full-data residual sd")
    restarts: int = Field(0, ge=0)

    @field_validator("unmatched_counts")
    @classmethod
    def _counts(cls, value: List[int]) -> List[int]:
        if not value or any(n < 1 for n in value):
            raise ValueError("unmatched_counts must be a non-empty list of positive sizes")
        return value


class OutputSection(Section):
    path: Optional[Path] = None
    coefficients_path: Optional[Path] = None


class RunConfig(Section):
    """Everything a CLI command needs; flags override file keys."""
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)
    dataset_path: Optional[Path] = None
    response_column: str = "PE"
    covariate_columns: List[str] = Field(default_factory=lambda: ["AT", "V", "AP", "RH"])
    noise: NoiseSection = Field(default_factory=NoiseSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    fit: FitSection = Field(default_factory=FitSection)
    gain: GainSection = Field(default_factory=GainSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    data_app: DataAppSection = Field(default_factory=DataAppSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = "config") -> "RunConfig":
        """Validate a raw mapping.

        Raises:
            ConfigError: unknown key or invalid value, naming the first offending field.
        """
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"]) or "<root>"
            raise ConfigError(f"{source}: {location}: {first['msg']}") from e

    @classmethod
    def load(cls, config_path: Optional[Path] = None) -> "RunConfig":
        """Load a JSON config; without a path, look for ``.sslemle.json`` in the working directory and its parents.

        ``dataset_path`` falls back to ``SSLEMLE_DATASET_PATH`` (a local ``.env`` is read first).
        """
        if config_path is None:
            config_path = find_config_file()
        elif not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")

        data: Dict[str, Any] = {}
        if config_path is not None:
            try:
                data = json.loads(config_path.read_text())
            except json.JSONDecodeError as e:
                raise ConfigError(f"{config_path}: invalid JSON at line {e.lineno}: {e.msg}") from e
            if not isinstance(data, dict):
                raise ConfigError(f"{config_path}: top level must be an object")
            logger.debug(f"Loaded config from {config_path}")

        config = cls.from_dict(data, source=str(config_path) if config_path else "defaults")
        if config.dataset_path is None:
            load_dotenv(find_dotenv(usecwd=True))
            env_path = os.environ.get(DATASET_ENV)
            if env_path:
                config = config.merged({"dataset_path": env_path})
        return config

    def merged(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Return a copy with ``overrides`` deep-merged in; ``None`` values are ignored."""
        data = self.model_dump(mode="json")
        _deep_merge(data, overrides)
        return RunConfig.from_dict(data, source="command line")

    def save(self, config_path: Path) -> None:
        config_path.write_text(json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")


def _deep_merge(target: Dict[str, Any], overrides: Dict[str, Any]) -> None:
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _deep_merge(target[key], value)
        else:
            target[key] = value


def find_config_file(start_path: Optional[Path] = None) -> Optional[Path]:
    """Find ``.sslemle.json`` in ``start_path`` or its parents."""
    if start_path is None:
        start_path = Path.cwd()
    for parent in [start_path] + list(start_path.parents):
        config_file = parent / CONFIG_FILENAME
        if config_file.exists():
            return config_file
    return None

