"""Closed-form reference values for the built-in models."""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from freestm.models.base import ModelSpec
from freestm.schemas.common import ModelName


def semicircle_density(variance: float, x):
    """Semicircle density with variance sigma^2, supported on [-2 sigma, 2 sigma]."""
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    x = np.asarray(x, dtype=np.float64)
    inside = np.clip(4.0 * variance - x * x, 0.0, None)
    density = np.sqrt(inside) / (2.0 * math.pi * variance)
    return float(density) if density.ndim == 0 else density


def ou_oracle(mu: float, sigma: float, t: float) -> Tuple[float, float]:
    """Variance and semicircle radius of the free OU solution started at 0."""
    if not mu < 0:
        raise ValueError(f"ou_oracle needs mu < 0, got {mu}")
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    variance = sigma * sigma * math.expm1(2.0 * mu * t) / (2.0 * mu)
    return variance, 2.0 * math.sqrt(variance)


def gbm1_support(mu: float, t: float) -> Tuple[float, float]:
    """Support [R1, R2] of the spectral distribution of free GBM I at time t (U_0 = 1)."""
    if not t > 0:
        raise ValueError(f"gbm1_support needs t > 0, got {t}")
    root = math.sqrt(1.0 + 4.0 / t)
    ends = []
    for r in ((-1.0 - root) / 2.0, (-1.0 + root) / 2.0):
        ends.append(r / (r + 1.0) * math.exp((mu - 1.0 - r) * t))
    return min(ends), max(ends)


def gbm2_moments(mu: float, t: float) -> Tuple[float, float]:
    """Mean psi(U_T) and spectral variance psi|U_T - psi(U_T)|^2 of free GBM II (U_0 = 1)."""
    return math.exp(mu * t), 2.0 * math.exp(2.0 * mu * t) * math.expm1(2.0 * t)


def cir_mean(alpha: float, beta: float, t: float) -> float:
    """psi(U_T) of the free CIR process with U_0 = 1."""
    if not beta > 0:
        raise ValueError(f"cir_mean needs beta > 0, got {beta}")
    return math.exp(-beta * t) / beta * (beta + alpha * math.expm1(beta * t))


@dataclass(frozen=True)
class PredictedMoments:
    mean: Optional[float] = None
    variance: Optional[float] = None
    support: Optional[Tuple[float, float]] = None


def predicted_moments(model: ModelSpec, initial_scale: float, t: float) -> PredictedMoments:
    """
    Oracle values for a built-in model started at initial_scale * I.
    Fields stay None where no closed form applies to that start value.
    """
    if model.oracle is None:
        return PredictedMoments()
    p = model.oracle.params
    kind = model.oracle.model
    if kind is ModelName.free_ou:
        mean = initial_scale * math.exp(p["mu"] * t)
        if p["mu"] < 0 and t >= 0:
            variance, radius = ou_oracle(p["mu"], p["sigma"], t)
            support = (mean - radius, mean + radius)
        else:
            variance, support = None, None
        return PredictedMoments(mean=mean, variance=variance, support=support)
    if kind is ModelName.free_gbm1:
        support = gbm1_support(p["mu"], t) if initial_scale == 1.0 and t > 0 else None
        return PredictedMoments(mean=initial_scale * math.exp(p["mu"] * t), support=support)
    if kind is ModelName.free_gbm2:
        if initial_scale != 1.0:
            return PredictedMoments(mean=initial_scale * math.exp(p["mu"] * t))
        mean, variance = gbm2_moments(p["mu"], t)
        return PredictedMoments(mean=mean, variance=variance)
    if kind is ModelName.free_cir:
        if initial_scale != 1.0 or not p["beta"] > 0:
            return PredictedMoments()
        return PredictedMoments(mean=cir_mean(p["alpha"], p["beta"], t))
    return PredictedMoments()
