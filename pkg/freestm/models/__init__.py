from freestm.models.base import (
    DiffusionTerm,
    ModelSpec,
    OracleDescriptor,
    ScalarFn,
    StabilityConstants,
    diffusion_eval,
    drift_eval,
    evaluate_diffusion,
    lift,
)
from freestm.models.builtin import MODEL_PARAMS, builtin_model

__all__ = [
    "DiffusionTerm",
    "ModelSpec",
    "OracleDescriptor",
    "ScalarFn",
    "StabilityConstants",
    "diffusion_eval",
    "drift_eval",
    "evaluate_diffusion",
    "lift",
    "MODEL_PARAMS",
    "builtin_model",
]
