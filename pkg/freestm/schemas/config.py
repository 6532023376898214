"""
Run configuration, schema version 1 (JSON).

Every block forbids unknown keys. Cross-field preconditions (refinement factors
dividing P, step sizes dividing T, the CIR Feller condition, fixed-point
admissibility) are checked here so a bad config fails before any work starts.
"""
import json
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from freestm.exceptions import ConfigError
from freestm.models.base import ModelSpec, StabilityConstants
from freestm.models.builtin import builtin_model
from freestm.schemas.common import ExperimentKind, ModelName, MomentQuantity, OutputFormat, StabilityMode
from freestm.schemas.solver import SolverOptions
from freestm.services.implicit import check_admissible
from freestm.services.linalg import SymMatrix
from freestm.services.noise import MAX_UINT64, RandomStream
from freestm.utils.hashing import compute_config_hash

SCHEMA_VERSION = 1


class Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


class ModelBlock(Block):
    name: ModelName
    params: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_params(self) -> "ModelBlock":
        self.build()
        return self

    def build(self) -> ModelSpec:
        return builtin_model(self.name, self.params)


class IdentityMatrix(Block):
    kind: Literal["identity"] = "identity"

    def build(self, dim: int) -> SymMatrix:
        return SymMatrix.identity(dim)


class DiagonalMatrix(Block):
    kind: Literal["diagonal"] = "diagonal"
    values: List[float] = Field(min_length=1)

    def build(self, dim: int) -> SymMatrix:
        if len(self.values) != dim:
            raise ConfigError(f"diagonal matrix has {len(self.values)} values but N={dim}")
        return SymMatrix.diag(self.values)


class RandomMatrix(Block):
    """Symmetric Gaussian matrix (G + G^T)/2 drawn from its own seed."""

    kind: Literal["random"] = "random"
    seed: int = Field(default=0, ge=0, le=MAX_UINT64)
    traceless: bool = False

    def build(self, dim: int) -> SymMatrix:
        g = RandomStream(self.seed).standard_normal((dim, dim))
        a = 0.5 * (g + g.T)
        if self.traceless:
            a = a - np.trace(a) / dim * np.eye(dim)
        return SymMatrix(a)


MatrixSpec = Annotated[Union[IdentityMatrix, DiagonalMatrix, RandomMatrix], Field(discriminator="kind")]


class SpectrumExperiment(Block):
    kind: Literal["spectrum"] = "spectrum"
    bins: int = Field(default=50, ge=1)


class ConvergeExperiment(Block):
    kind: Literal["converge"] = "converge"
    R_list: List[int] = Field(min_length=1)

    @field_validator("R_list")
    @classmethod
    def positive_factors(cls, value: List[int]) -> List[int]:
        if any(r < 1 for r in value):
            raise ValueError("refinement factors must be >= 1")
        return value


class StabilityExperiment(Block):
    kind: Literal["stability"] = "stability"
    mode: StabilityMode = StabilityMode.perturbation
    h_list: List[float] = Field(min_length=1)
    initials: Optional[List[float]] = None
    compare_theta: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    compare_h_list: Optional[List[float]] = Field(default=None, min_length=1)

    @field_validator("h_list", "compare_h_list")
    @classmethod
    def positive_steps(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(h <= 0 for h in value):
            raise ValueError("step sizes must be positive")
        return value

    @model_validator(mode="after")
    def check_initials(self) -> "StabilityExperiment":
        expected = 2 if self.mode is StabilityMode.perturbation else 1
        if self.initials is not None and len(self.initials) != expected:
            raise ValueError(f"mode {self.mode.value} needs {expected} initial value(s), got {len(self.initials)}")
        return self

    def initial_scales(self) -> List[float]:
        if self.initials is not None:
            return list(self.initials)
        return [1.0, 2.0] if self.mode is StabilityMode.perturbation else [1.0]

    def sweeps(self, theta: float) -> List[Tuple[float, List[float]]]:
        """(theta, h_list) of the main sweep, then of the comparison sweep if one is configured."""
        sweeps = [(theta, list(self.h_list))]
        if self.compare_theta is not None:
            sweeps.append((self.compare_theta, list(self.compare_h_list or self.h_list)))
        return sweeps


class MomentsExperiment(Block):
    kind: Literal["moments"] = "moments"
    quantity: MomentQuantity = MomentQuantity.trace
    A: MatrixSpec = Field(default_factory=IdentityMatrix)
    B: MatrixSpec = Field(default_factory=IdentityMatrix)


class BoundConstants(Block):
    L_prime: float
    K_hat: float = Field(ge=0.0)
    K_bar: float = Field(ge=0.0)

    def to_constants(self) -> StabilityConstants:
        return StabilityConstants(l_prime=self.L_prime, k_hat=self.K_hat, k_bar=self.K_bar, derivation="config")


class BoundsExperiment(Block):
    kind: Literal["bounds"] = "bounds"
    constants: Union[Literal["from_model"], BoundConstants] = "from_model"
    h_values: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0], min_length=1)

    @field_validator("h_values")
    @classmethod
    def positive_steps(cls, value: List[float]) -> List[float]:
        if any(h <= 0 for h in value):
            raise ValueError("step sizes must be positive")
        return value


class SimulateExperiment(Block):
    kind: Literal["simulate"] = "simulate"


Experiment = Annotated[
    Union[
        SpectrumExperiment,
        ConvergeExperiment,
        StabilityExperiment,
        MomentsExperiment,
        BoundsExperiment,
        SimulateExperiment,
    ],
    Field(discriminator="kind"),
]


class OutputBlock(Block):
    directory: Optional[Path] = None
    formats: List[OutputFormat] = Field(default_factory=lambda: [OutputFormat.csv, OutputFormat.json])


class RunConfig(Block):
    schema_version: Literal[1] = SCHEMA_VERSION
    model: ModelBlock
    N: int = Field(default=100, ge=1)
    M: int = Field(default=1, ge=1)
    P: int = Field(default=1024, ge=1)
    T: float = Field(default=1.0, gt=0.0)
    theta: float = Field(default=1.0, ge=0.0, le=1.0)
    seed: int = Field(default=0, ge=0, le=MAX_UINT64)
    initial: Optional[float] = None
    solver: SolverOptions = Field(default_factory=SolverOptions)
    experiment: Experiment
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def check_preconditions(self) -> "RunConfig":
        model = self.model.build()
        experiment = self.experiment
        if isinstance(experiment, ConvergeExperiment):
            bad = [r for r in experiment.R_list if self.P % r != 0]
            if bad:
                raise ValueError(f"refinement factor(s) {bad} do not divide P={self.P}")
        if isinstance(experiment, StabilityExperiment):
            if experiment.compare_theta is not None and experiment.compare_theta == self.theta:
                raise ValueError(f"compare_theta must differ from theta={self.theta:g}")
            for theta, h_list in experiment.sweeps(self.theta):
                for h in h_list:
                    steps = round(self.T / h)
                    if steps < 1 or abs(steps * h - self.T) > 1e-9 * max(self.T, 1.0):
                        raise ValueError(f"step size h={h:g} does not divide the horizon T={self.T:g}")
                    if theta > 0:
                        check_admissible(model, self.solver.configure(theta, h, steps))
        elif isinstance(experiment, BoundsExperiment):
            if experiment.constants == "from_model" and model.stability_constants is None:
                raise ValueError(f"model {model.name} has no stability constants; give them explicitly")
        elif isinstance(experiment, MomentsExperiment) and experiment.quantity is MomentQuantity.ito:
            for name, spec in (("A", experiment.A), ("B", experiment.B)):
                if isinstance(spec, DiagonalMatrix) and len(spec.values) != self.N:
                    raise ValueError(f"moments {name}: diagonal has {len(spec.values)} values but N={self.N}")
        elif self.theta > 0:
            # the coarsest grid of a convergence ladder has the largest theta*h
            factor = max(experiment.R_list) if isinstance(experiment, ConvergeExperiment) else 1
            check_admissible(model, self.solver.configure(self.theta, self.h * factor, self.P // factor))
        return self

    @property
    def kind(self) -> ExperimentKind:
        return ExperimentKind(self.experiment.kind)

    @property
    def h(self) -> float:
        return self.T / self.P

    def build_model(self) -> ModelSpec:
        return self.model.build()

    def initial_scale(self) -> float:
        return self.initial if self.initial is not None else self.build_model().default_initial

    def config_hash(self) -> str:
        """Hash of everything that determines the results (the output block does not)."""
        return compute_config_hash(self.model_dump(mode="json", exclude={"output"}))


def _format_error(error: dict) -> str:
    location = ".".join(str(part) for part in error["loc"]) or "<root>"
    message = error["msg"].removeprefix("Value error, ")
    return f"{location}: {message}"


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run config; every violation is reported with its field path."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return RunConfig.model_validate(document)
    except ValidationError as exc:
        lines = [_format_error(e) for e in exc.errors()]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from None


def load_config(path: Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
