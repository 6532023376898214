from enum import Enum


class ModelName(str, Enum):
    free_ou = "free_ou"
    free_gbm1 = "free_gbm1"
    free_gbm2 = "free_gbm2"
    free_cir = "free_cir"


class Strategy(str, Enum):
    auto = "auto"
    closed_form = "closed_form"
    spectral_newton = "spectral_newton"
    fixed_point = "fixed_point"


class StabilityMode(str, Enum):
    norm = "norm"
    perturbation = "perturbation"


class Classification(str, Enum):
    stable = "stable"
    unstable = "unstable"
    inconclusive = "inconclusive"


class OutputFormat(str, Enum):
    csv = "csv"
    json = "json"
    svg = "svg"


class ExperimentKind(str, Enum):
    spectrum = "spectrum"
    converge = "converge"
    stability = "stability"
    moments = "moments"
    bounds = "bounds"
    simulate = "simulate"


class MomentQuantity(str, Enum):
    ito = "ito"
    trace = "trace"
