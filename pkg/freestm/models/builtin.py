"""
Built-in free SDEs: free Ornstein-Uhlenbeck, free geometric Brownian motion
(two variants) and the free CIR process.
"""
import math
from typing import Callable, Dict, Mapping

from freestm.exceptions import ConfigError
from freestm.models.base import (
    DiffusionTerm,
    ModelSpec,
    OracleDescriptor,
    ScalarFn,
    StabilityConstants,
)
from freestm.schemas.common import ModelName, StabilityMode

MODEL_PARAMS: Dict[ModelName, tuple] = {
    ModelName.free_ou: ("mu", "sigma"),
    ModelName.free_gbm1: ("mu",),
    ModelName.free_gbm2: ("mu",),
    ModelName.free_cir: ("alpha", "beta", "sigma"),
}


def affine_closed_form(a: float, b: float):
    """
    Inverse of y -> y - theta*h*(a*y + b), i.e. y = (x + theta*h*b) / (1 - theta*h*a).
    A non-positive denominator (only possible for a > 0) is rejected.
    """

    def solve(theta: float, h: float) -> ScalarFn:
        c = theta * h
        denom = 1.0 - c * a
        if denom <= 0.0:
            raise ConfigError(
                f"implicit drift solve is degenerate: 1 - theta*h*{a:g} = {denom:g} <= 0; reduce theta*h"
            )
        return ScalarFn.linear(1.0 / denom, c * b / denom)

    return solve


def _free_ou(p: Mapping[str, float]) -> ModelSpec:
    mu, sigma = p["mu"], p["sigma"]
    return ModelSpec(
        name=ModelName.free_ou.value,
        drift=ScalarFn.linear(mu),
        diffusion=(DiffusionTerm(beta=ScalarFn.constant(sigma), gamma=ScalarFn.constant(1.0)),),
        implicit_closed_form=affine_closed_form(mu, 0.0),
        oracle=OracleDescriptor(ModelName.free_ou, dict(p)),
        # Perturbation system D = U - V: additive noise cancels exactly.
        stability_constants=StabilityConstants(
            l_prime=-mu, k_hat=0.0, k_bar=mu * mu,
            derivation="perturbation system dD = mu D dt; psi(D mu D) = mu|D|^2, |mu D|^2 = mu^2|D|^2",
            systems=(StabilityMode.perturbation,),
        ),
        params=dict(p),
        default_initial=0.0,
    )


def _free_gbm1(p: Mapping[str, float]) -> ModelSpec:
    mu = p["mu"]
    root = ScalarFn.sqrt()
    return ModelSpec(
        name=ModelName.free_gbm1.value,
        drift=ScalarFn.linear(mu),
        diffusion=(DiffusionTerm(beta=root, gamma=root),),
        implicit_closed_form=affine_closed_form(mu, 0.0),
        oracle=OracleDescriptor(ModelName.free_gbm1, dict(p)),
        stability_constants=StabilityConstants(
            l_prime=-mu, k_hat=1.0, k_bar=mu * mu,
            derivation="|sqrt(U)|_4^4 = |U|^2 gives K_hat = 1 (derived)",
            systems=(StabilityMode.norm,),
        ),
        params=dict(p),
    )


def _free_gbm2(p: Mapping[str, float]) -> ModelSpec:
    mu = p["mu"]
    identity = ScalarFn.linear(1.0)
    one = ScalarFn.constant(1.0)
    return ModelSpec(
        name=ModelName.free_gbm2.value,
        drift=ScalarFn.linear(mu),
        diffusion=(
            DiffusionTerm(beta=identity, gamma=one),
            DiffusionTerm(beta=one, gamma=identity),
        ),
        implicit_closed_form=affine_closed_form(mu, 0.0),
        oracle=OracleDescriptor(ModelName.free_gbm2, dict(p)),
        # linear in U: U - V solves the same equation, so one bound covers both systems
        stability_constants=StabilityConstants(
            l_prime=-mu, k_hat=4.0, k_bar=mu * mu,
            derivation="two terms with |beta|^2|gamma|^2 = |U|^2 each, cross terms bounded crudely: K_hat = 4 (derived)",
        ),
        params=dict(p),
    )


def _free_cir(p: Mapping[str, float]) -> ModelSpec:
    alpha, beta, sigma = p["alpha"], p["beta"], p["sigma"]
    if min(alpha, beta, sigma) < 0:
        raise ConfigError(f"free_cir needs alpha, beta, sigma >= 0, got {alpha:g}, {beta:g}, {sigma:g}")
    if 2.0 * alpha < sigma * sigma:
        raise ConfigError(
            f"free_cir violates the Feller condition 2*alpha >= sigma^2 ({2 * alpha:g} < {sigma * sigma:g})"
        )
    half_root = ScalarFn.sqrt(sigma / 2.0)
    one = ScalarFn.constant(1.0)
    return ModelSpec(
        name=ModelName.free_cir.value,
        drift=ScalarFn.linear(-beta, alpha),
        diffusion=(
            DiffusionTerm(beta=half_root, gamma=one),
            DiffusionTerm(beta=one, gamma=half_root),
        ),
        implicit_closed_form=affine_closed_form(-beta, alpha),
        oracle=OracleDescriptor(ModelName.free_cir, dict(p)),
        # sqrt is not operator Lipschitz, so K_hat has no rigorous value; the
        # drift-only perturbation bound is used (derived, heuristic).
        stability_constants=StabilityConstants(
            l_prime=beta, k_hat=0.0, k_bar=beta * beta,
            derivation="perturbation drift -beta D; diffusion ignored (heuristic)",
            systems=(StabilityMode.perturbation,),
        ),
        params=dict(p),
    )


_BUILDERS: Dict[ModelName, Callable[[Mapping[str, float]], ModelSpec]] = {
    ModelName.free_ou: _free_ou,
    ModelName.free_gbm1: _free_gbm1,
    ModelName.free_gbm2: _free_gbm2,
    ModelName.free_cir: _free_cir,
}


def builtin_model(name, params: Mapping[str, float]) -> ModelSpec:
    try:
        model_name = ModelName(name)
    except ValueError:
        raise ConfigError(
            f"unknown model '{name}'; expected one of {', '.join(m.value for m in ModelName)}"
        ) from None
    expected = MODEL_PARAMS[model_name]
    unknown = sorted(set(params) - set(expected))
    missing = [k for k in expected if k not in params]
    if unknown:
        raise ConfigError(f"{model_name.value}: unknown parameter(s) {', '.join(unknown)}")
    if missing:
        raise ConfigError(f"{model_name.value}: missing parameter(s) {', '.join(missing)}")
    values = {k: float(params[k]) for k in expected}
    for key, value in values.items():
        if not math.isfinite(value):
            raise ConfigError(f"{model_name.value}: parameter {key} must be finite, got {value}")
    return _BUILDERS[model_name](values)
