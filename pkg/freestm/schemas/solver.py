from pydantic import BaseModel, ConfigDict, Field

from freestm.schemas.common import Strategy


class SolverOptions(BaseModel):
    """Implicit-solve strategy and tolerances, independent of the time grid."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    strategy: Strategy = Strategy.auto
    newton_tol: float = Field(default=1e-12, gt=0.0)
    fp_tol: float = Field(default=1e-12, gt=0.0)
    max_iter: int = Field(default=100, ge=1)
    clamp_tol: float = Field(default=1e-12, ge=0.0)

    def configure(self, theta: float, h: float, P: int) -> "SolverConfig":
        return SolverConfig(theta=theta, h=h, P=P, **self.model_dump())


class SolverConfig(SolverOptions):
    """Parameters of one theta-method run on a uniform grid (h = T/P)."""

    theta: float = Field(ge=0.0, le=1.0)
    h: float = Field(gt=0.0)
    P: int = Field(ge=0)
