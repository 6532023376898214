"""
Free SDE model description.

A model is dU = alpha(U) dt + sum_i beta_i(U) dW gamma_i(U) where alpha, beta_i
and gamma_i are scalar functions lifted to matrices by functional calculus.
Matrix-valued coefficient callbacks are deliberately not supported: with scalar
functions every lifted coefficient is a function of U and commutes with it,
which keeps the self-adjointness of the diffusion sum checkable.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from freestm.schemas.common import ModelName, StabilityMode
from freestm.services.linalg import (
    SpectralDecomposition,
    SymMatrix,
    apply_scalar_function,
    clamp_spectrum,
    eigh,
    symmetrize,
)

ArrayFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScalarFn:
    """
    Scalar coefficient function, vectorized over numpy arrays.

    `affine=(a, b)` marks eval(x) = a*x + b; such functions are lifted as
    a*U + b*I without an eigendecomposition. `domain_floor` marks functions
    that are only defined above a floor (sqrt: 0); the spectrum is clamped to
    the floor before evaluation.
    """

    eval: ArrayFn
    lipschitz_bound: Optional[float] = None
    domain_floor: Optional[float] = None
    derivative: Optional[ArrayFn] = None
    affine: Optional[Tuple[float, float]] = None
    name: str = "f"

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=np.float64))

    def derivative_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.derivative is not None:
            return np.broadcast_to(np.asarray(self.derivative(x), dtype=np.float64), x.shape)
        # central difference
        step = 1e-6 * (1.0 + np.abs(x))
        return (self.eval(x + step) - self.eval(x - step)) / (2.0 * step)

    @classmethod
    def constant(cls, c: float) -> "ScalarFn":
        c = float(c)
        return cls(
            eval=lambda x: np.full(np.shape(x), c),
            lipschitz_bound=0.0,
            derivative=lambda x: np.zeros(np.shape(x)),
            affine=(0.0, c),
            name=f"{c:g}",
        )

    @classmethod
    def linear(cls, a: float, b: float = 0.0) -> "ScalarFn":
        a, b = float(a), float(b)
        return cls(
            eval=lambda x: a * x + b,
            lipschitz_bound=abs(a),
            derivative=lambda x: np.full(np.shape(x), a),
            affine=(a, b),
            name=f"{a:g}*x{b:+g}" if b else f"{a:g}*x",
        )

    @classmethod
    def sqrt(cls, scale: float = 1.0) -> "ScalarFn":
        scale = float(scale)
        return cls(
            eval=lambda x: scale * np.sqrt(x),
            domain_floor=0.0,
            name=f"{scale:g}*sqrt" if scale != 1.0 else "sqrt",
        )


@dataclass(frozen=True)
class DiffusionTerm:
    beta: ScalarFn
    gamma: ScalarFn


@dataclass(frozen=True)
class StabilityConstants:
    """
    Constants of the mean-square stability bound: psi(U alpha(U)) <= -L'|U|^2,
    the diffusion bound K_hat and |alpha(U)|^2 <= K_bar |U|^2. `systems` lists
    what the bound is about: the solution itself (norm) and/or the difference of
    two solutions driven by the same noise (perturbation).
    """

    l_prime: float
    k_hat: float
    k_bar: float
    derivation: str = ""
    systems: Tuple[StabilityMode, ...] = (StabilityMode.norm, StabilityMode.perturbation)

    def describes(self, mode: StabilityMode) -> bool:
        return StabilityMode(mode) in self.systems


@dataclass(frozen=True)
class OracleDescriptor:
    model: ModelName
    params: Dict[str, float] = field(default_factory=dict)


ClosedForm = Callable[[float, float], ScalarFn]


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    drift: ScalarFn
    diffusion: Tuple[DiffusionTerm, ...]
    implicit_closed_form: Optional[ClosedForm] = None
    oracle: Optional[OracleDescriptor] = None
    stability_constants: Optional[StabilityConstants] = None
    params: Dict[str, float] = field(default_factory=dict)
    default_initial: float = 1.0


class _Lifter:
    """
    Lifts scalar functions onto one matrix U, sharing a single eigh() between
    all non-affine functions. Constants come back as plain floats.
    """

    def __init__(self, u: SymMatrix, clamp_tol: float):
        self.u = u
        self.clamp_tol = clamp_tol
        self.clamped = 0
        self._spec: Optional[SpectralDecomposition] = None
        self._cache: Dict[int, Union[float, np.ndarray]] = {}

    def __call__(self, fn: ScalarFn) -> Union[float, np.ndarray]:
        key = id(fn)
        if key not in self._cache:
            self._cache[key] = self._lift(fn)
        return self._cache[key]

    def _lift(self, fn: ScalarFn) -> Union[float, np.ndarray]:
        if fn.affine is not None:
            a, b = fn.affine
            if a == 0.0:
                return b
            out = a * self.u.entries
            if b != 0.0:
                out = out + b * np.eye(self.u.dim)
            return out
        if self._spec is None:
            self._spec = eigh(self.u)
        spec = self._spec
        if fn.domain_floor is not None:
            lam, clamped = clamp_spectrum(spec.eigenvalues, fn.domain_floor, self.clamp_tol)
            self.clamped = max(self.clamped, clamped)
            spec = SpectralDecomposition(eigenvalues=lam, basis=spec.basis)
        return apply_scalar_function(self.u, fn.eval, spec).entries


def lift(fn: ScalarFn, u: SymMatrix, clamp_tol: float = DEFAULT_CLAMP_TOL) -> Tuple[SymMatrix, int]:
    """fn(U) by functional calculus, with the number of meaningfully clamped eigenvalues."""
    lifter = _Lifter(u, clamp_tol)
    value = lifter(fn)
    if isinstance(value, float):
        return SymMatrix.identity(u.dim, value), 0
    return SymMatrix(value), lifter.clamped


def drift_eval(model: ModelSpec, u: SymMatrix) -> SymMatrix:
    return lift(model.drift, u)[0]


def diffusion_sum(
    model: ModelSpec, u: SymMatrix, dw: SymMatrix, clamp_tol: float = DEFAULT_CLAMP_TOL
) -> Tuple[np.ndarray, int]:
    """sum_i beta_i(U) dW gamma_i(U) before symmetrization, plus the clamp count."""
    lifter = _Lifter(u, clamp_tol)
    total = np.zeros((u.dim, u.dim))
    for term in model.diffusion:
        beta = lifter(term.beta)
        gamma = lifter(term.gamma)
        left = beta * dw.entries if isinstance(beta, float) else beta @ dw.entries
        total += left * gamma if isinstance(gamma, float) else left @ gamma
    return total, lifter.clamped


def evaluate_diffusion(
    model: ModelSpec, u: SymMatrix, dw: SymMatrix, clamp_tol: float = DEFAULT_CLAMP_TOL
) -> Tuple[SymMatrix, int]:
    total, clamped = diffusion_sum(model, u, dw, clamp_tol)
    return symmetrize(total), clamped


def diffusion_eval(model: ModelSpec, u: SymMatrix, dw: SymMatrix) -> SymMatrix:
    return evaluate_diffusion(model, u, dw)[0]
