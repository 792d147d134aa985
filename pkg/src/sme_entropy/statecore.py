"""Dense complex-matrix helpers and density-matrix semantics.

All spectral functions (``ln rho``, ``rho^-1``) go through a full Hermitian
eigendecomposition with an eigenvalue floor, so rank-deficient states give
finite answers.  Whether the floor was active is reported by
:func:`is_floored` and propagated into bound reports.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NegativeEigenvalueError,
    NonFiniteError,
    NonHermitianError,
    NonUnitTraceError,
    StateValidationError,
)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
# basis ordering is (e, g): index 0 is the excited state
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a square complex128 array with ``dim >= 2``."""
    m = np.asarray(getattr(a, "mat", a), dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 2:
        raise DimensionMismatchError("matrix dimension must be at least 2")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix has NaN or Inf entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a))))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_defect(np.asarray(a, dtype=complex)) <= tol


def _check_dims(*mats):
    dims = {m.shape for m in mats}
    if len(dims) != 1:
        raise DimensionMismatchError(f"dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True)
class SpectralFloor:
    """Eigenvalue floor used to regularize ``ln rho`` and ``rho^-1``."""

    epsilon: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1e-3):
            raise ValueError(f"floor epsilon must lie in (0, 1e-3), got {self.epsilon}")


DEFAULT_FLOOR = SpectralFloor()


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated quantum state.  Build it with :func:`make_density`."""

    mat: np.ndarray

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def eigh(self):
        return np.linalg.eigh(self.mat)

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def make_density(m, tol: float = HERMITIAN_TOL) -> DensityMatrix:
    """Validate ``m`` as a density matrix.

    The Hermitian part is kept whenever the anti-Hermitian defect is at most
    ``tol``; trace and positivity are checked against the fixed tolerances
    ``TRACE_TOL`` and ``POSITIVITY_TOL``.
    """
    m = as_matrix(m)
    defect = hermiticity_defect(m)
    if defect > tol:
        raise NonHermitianError(f"matrix is not Hermitian (max |m - m^dag| = {defect:.3e})")
    m = 0.5 * (m + dagger(m))
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise NonUnitTraceError(f"trace is {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(m)[0]
    if lam_min < -POSITIVITY_TOL:
        raise NegativeEigenvalueError(f"negative eigenvalue {lam_min:.3e}")
    m.setflags(write=False)
    return DensityMatrix(m)


def maximally_mixed(d: int) -> DensityMatrix:
    return make_density(np.eye(d) / d)


def pure_state(psi) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return make_density(np.outer(psi, psi.conj()))


def _mat(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.mat
    return as_matrix(rho)


def is_floored(rho, floor: SpectralFloor = DEFAULT_FLOOR) -> bool:
    """True when some eigenvalue of ``rho`` lies below the floor."""
    return bool(np.linalg.eigvalsh(_mat(rho))[0] < floor.epsilon)


def floored_spectrum(rho, floor: SpectralFloor = DEFAULT_FLOOR):
    """Eigenpairs of ``rho`` with eigenvalues raised to at least ``floor``."""
    w, v = np.linalg.eigh(_mat(rho))
    return np.maximum(w, floor.epsilon), v


def log_matrix(rho, floor: SpectralFloor = DEFAULT_FLOOR) -> np.ndarray:
    w, v = floored_spectrum(rho, floor)
    return (v * np.log(w)) @ dagger(v)


def inverse_matrix(rho, floor: SpectralFloor = DEFAULT_FLOOR) -> np.ndarray:
    """Floored pseudo-inverse ``V diag(1/max(lambda, eps)) V^dag``."""
    w, v = floored_spectrum(rho, floor)
    return (v / w) @ dagger(v)


def entropy_from_eigenvalues(w, floor: SpectralFloor = DEFAULT_FLOOR):
    """``-sum w ln w`` along the last axis; entries below the floor count as 0."""
    w = np.asarray(w, dtype=float)
    safe = np.where(w > floor.epsilon, w, 1.0)
    return -np.sum(np.where(w > floor.epsilon, w * np.log(safe), 0.0), axis=-1)


def von_neumann_entropy(rho, floor: SpectralFloor = DEFAULT_FLOOR) -> float:
    """Von Neumann entropy ``-Tr[rho ln rho]`` in nats."""
    try:
        w = np.linalg.eigvalsh(_mat(rho))
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigendecomposition failed: {exc}") from exc
    return float(entropy_from_eigenvalues(w, floor))


def expectation(a, rho) -> complex:
    """``Tr[a rho]``; complex so non-Hermitian intermediates share the path."""
    a = as_matrix(a)
    r = _mat(rho)
    _check_dims(a, r)
    return complex(np.einsum("ij,ji->", a, r))


def _require_hermitian(m, name="m"):
    m = as_matrix(m)
    if not is_hermitian(m):
        raise NonHermitianError(f"{name} must be Hermitian (defect {hermiticity_defect(m):.3e})")
    return m


def variance(m, rho) -> float:
    """Standard variance ``Tr[M^2 rho] - Tr[M rho]^2`` of a Hermitian ``M``."""
    m = _require_hermitian(m)
    r = _mat(rho)
    _check_dims(m, r)
    mean = expectation(m, r).real
    return expectation(m @ m, r).real - mean * mean


def generalized_variance(m, rho, floor: SpectralFloor = DEFAULT_FLOOR) -> float:
    """``Tr[rho^-1 M rho^2 M] - Tr[M rho]^2`` with the floored pseudo-inverse.

    Coincides with :func:`variance` when ``[M, rho] = 0`` and grows without
    bound as ``rho`` approaches a pure state in a basis misaligned with ``M``.
    """
    m = _require_hermitian(m)
    r = _mat(rho)
    _check_dims(m, r)
    mean = expectation(m, r).real
    inv = inverse_matrix(r, floor)
    return np.trace(inv @ m @ r @ r @ m).real - mean * mean


def dissipative_commutator(l, rho) -> float:
    """``<[L^dag, L]> = Tr[(L^dag L - L L^dag) rho]``."""
    l = as_matrix(l)
    r = _mat(rho)
    _check_dims(l, r)
    ld = dagger(l)
    return expectation(ld @ l - l @ ld, r).real


def random_density(d: int, rng: np.random.Generator, mix: float = 0.0) -> DensityMatrix:
    """Ginibre-distributed random state, optionally mixed with ``I/d``.

    ``mix > 0`` bounds the smallest eigenvalue below by ``mix/d``.
    """
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r = g @ dagger(g)
    r = (1.0 - mix) * r / np.trace(r).real + mix * np.eye(d) / d
    return make_density(0.5 * (r + dagger(r)))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (g + dagger(g))


def random_operator(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)


__all__ = [
    "DensityMatrix",
    "SpectralFloor",
    "DEFAULT_FLOOR",
    "StateValidationError",
    "make_density",
    "maximally_mixed",
    "pure_state",
    "von_neumann_entropy",
    "expectation",
    "variance",
    "generalized_variance",
    "dissipative_commutator",
    "log_matrix",
    "inverse_matrix",
    "is_floored",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
]
