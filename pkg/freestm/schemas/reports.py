from typing import List, Optional

from pydantic import BaseModel, ConfigDict

from freestm.schemas.common import Classification, StabilityMode


class Record(BaseModel):
    # inf/nan are written as Infinity/NaN, the same way the json module does
    model_config = ConfigDict(ser_json_inf_nan="constants")


class ReportBase(Record):
    seed: int
    config_hash: Optional[str] = None


class Histogram(Record):
    bin_edges: List[float]
    counts: List[int]
    density: List[float]


class SpectrumReport(ReportBase):
    model: str
    theta: float
    N: int
    M: int
    T: float
    h: float
    histogram: Histogram
    mean: float
    second_moment: float
    variance: float
    lambda_min: float
    lambda_max: float
    max_abs: float
    oracle_mean: Optional[float] = None
    oracle_variance: Optional[float] = None
    oracle_support: Optional[List[float]] = None


class LadderPoint(Record):
    R: int
    h: float
    error: float


class ConvergenceReport(ReportBase):
    model: str
    theta: float
    N: int
    M: int
    P: int
    h_fine: float
    ladder: List[LadderPoint]
    slope: Optional[float] = None
    intercept: Optional[float] = None


class StabilitySeries(Record):
    h: float
    steps: int
    times: List[float]
    mean_square: List[float]
    decay_factors: List[Optional[float]]
    empirical: Classification
    empirical_decay_rate: Optional[float] = None
    theoretical: Optional[Classification] = None
    theoretical_decay_rate: Optional[float] = None


class EfficiencyComparison(Record):
    explicit_theta: float
    implicit_theta: float
    explicit_h: Optional[float] = None
    explicit_steps: Optional[int] = None
    implicit_h: Optional[float] = None
    implicit_steps: Optional[int] = None
    implicit_fewer_steps: Optional[bool] = None


class StabilityReport(ReportBase):
    model: str
    mode: StabilityMode
    theta: float
    N: int
    M: int
    T: float
    h_max: Optional[float] = None
    series: List[StabilitySeries]
    largest_stable_h: Optional[float] = None
    efficiency: Optional[EfficiencyComparison] = None


class MomentRow(Record):
    quantity: str
    empirical: float
    predicted: Optional[float] = None
    std_error: float
    z_score: Optional[float] = None


class MomentReport(ReportBase):
    quantity: str
    N: int
    M: int
    h: float
    rows: List[MomentRow]


class BoundPoint(Record):
    h: float
    decay_rate: float
    theoretically_stable: bool


class BoundReport(ReportBase):
    theta: float
    l_prime: float
    k_hat: float
    k_bar: float
    h_max: float
    points: List[BoundPoint]


class SimulationRow(Record):
    step: int
    time: float
    mean_trace: float
    mean_square_norm: float
    lambda_min: float
    lambda_max: float
    support_lower: Optional[float] = None
    support_upper: Optional[float] = None


class SimulationReport(ReportBase):
    model: str
    theta: float
    N: int
    M: int
    P: int
    T: float
    rows: List[SimulationRow]
    max_residual: float
    max_iterations: int
    total_clamped: int
