"""
Dense symmetric-matrix arithmetic.

SymMatrix is the finite-N stand-in for a self-adjoint operator, and the
normalized trace tr_N = Tr/N stands in for the trace state. Matrices are real
symmetric (GOE-style); complex Hermitian input is not supported.
"""
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from freestm.exceptions import DomainError, EigensolverError

ScalarCallable = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """N x N real symmetric matrix with read-only float64 entries."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"SymMatrix needs a non-empty square array, got shape {arr.shape}")
        if not np.array_equal(arr, arr.T, equal_nan=True):
            raise ValueError("SymMatrix entries are not exactly symmetric; use symmetrize()")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int, scale: float = 1.0) -> "SymMatrix":
        return cls(scale * np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> "SymMatrix":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def diag(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=np.float64)))

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.entries + other.entries)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.entries - other.entries)

    def __mul__(self, scalar: float) -> "SymMatrix":
        return SymMatrix(float(scalar) * self.entries)

    __rmul__ = __mul__

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(-self.entries)

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    basis: np.ndarray

    def reconstruct(self, values: Union[np.ndarray, None] = None) -> SymMatrix:
        """Q diag(values) Q^T, defaulting to the stored eigenvalues"""
        lam = self.eigenvalues if values is None else values
        return symmetrize((self.basis * lam) @ self.basis.T)


def symmetrize(a: np.ndarray) -> SymMatrix:
    a = np.asarray(a, dtype=np.float64)
    return SymMatrix(0.5 * (a + a.T))


def normalized_trace(a: SymMatrix) -> float:
    return float(np.trace(a.entries)) / a.dim


def l2_norm(a: SymMatrix) -> float:
    """sqrt(tr_N(A^2)), computed entrywise as sqrt(sum A_ij^2 / N)."""
    return float(np.sqrt(np.sum(a.entries * a.entries) / a.dim))


def eigh(a: SymMatrix) -> SpectralDecomposition:
    try:
        eigenvalues, basis = np.linalg.eigh(a.entries)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigendecomposition did not converge for N={a.dim}: {exc}") from exc
    if not np.all(np.isfinite(eigenvalues)):
        raise EigensolverError(f"eigendecomposition produced non-finite eigenvalues for N={a.dim}")
    return SpectralDecomposition(eigenvalues=eigenvalues, basis=basis)


def eigvalsh(a: SymMatrix) -> np.ndarray:
    try:
        eigenvalues = np.linalg.eigvalsh(a.entries)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigenvalue computation did not converge for N={a.dim}: {exc}") from exc
    if not np.all(np.isfinite(eigenvalues)):
        raise EigensolverError(f"eigenvalue computation produced non-finite values for N={a.dim}")
    return eigenvalues


def apply_scalar_function(
    a: SymMatrix,
    f: ScalarCallable,
    decomposition: Union[SpectralDecomposition, None] = None,
) -> SymMatrix:
    """
    Functional calculus: Q diag(f(lambda)) Q^T.

    f must accept an array of eigenvalues. A precomputed decomposition of `a`
    can be passed in to share one eigh() between several functions.
    """
    spec = decomposition if decomposition is not None else eigh(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.asarray(f(spec.eigenvalues), dtype=np.float64)
    if values.shape == ():
        values = np.full_like(spec.eigenvalues, float(values))
    if not np.all(np.isfinite(values)):
        bad = spec.eigenvalues[~np.isfinite(values)]
        raise DomainError(
            f"scalar function undefined at {bad.size} eigenvalue(s), e.g. {bad[0]:.6g}; clamp the spectrum first"
        )
    return spec.reconstruct(values)


def clamp_spectrum(eigenvalues: np.ndarray, floor: float, clamp_tol: float) -> Tuple[np.ndarray, int]:
    """Raise eigenvalues below `floor` to it; count only those below floor - clamp_tol."""
    clamped_count = int(np.count_nonzero(eigenvalues < floor - clamp_tol))
    return np.maximum(eigenvalues, floor), clamped_count


def psd_sqrt(a: SymMatrix, clamp_tol: float = 1e-12) -> Tuple[SymMatrix, int]:
    if clamp_tol < 0:
        raise ValueError("clamp_tol must be non-negative")
    spec = eigh(a)
    lam, clamped_count = clamp_spectrum(spec.eigenvalues, 0.0, clamp_tol)
    return spec.reconstruct(np.sqrt(lam)), clamped_count
