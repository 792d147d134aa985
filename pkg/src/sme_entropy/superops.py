"""Lindblad dissipator and homodyne innovation superoperators.

Both return raw matrices: increments are traceless and indefinite, so they
are never wrapped as :class:`~sme_entropy.statecore.DensityMatrix`.
"""
import enum

import numpy as np

from .statecore import _check_dims, _mat, as_matrix, dagger


class SuperopTag(enum.Enum):
    DISSIPATOR = "dissipator"
    INNOVATION = "innovation"


def dissipator(a, rho) -> np.ndarray:
    """``D[A]rho = A rho A^dag - (A^dag A rho + rho A^dag A)/2``."""
    a = as_matrix(a)
    r = _mat(rho)
    _check_dims(a, r)
    ad = dagger(a)
    ada = ad @ a
    return a @ r @ ad - 0.5 * (ada @ r + r @ ada)


def innovation(a, rho) -> np.ndarray:
    """``H[A]rho = A rho + rho A^dag - Tr[(A + A^dag) rho] rho``."""
    a = as_matrix(a)
    r = _mat(rho)
    _check_dims(a, r)
    ad = dagger(a)
    mean = np.trace((a + ad) @ r).real
    return a @ r + r @ ad - mean * r


def apply(tag: SuperopTag, a, rho) -> np.ndarray:
    if tag is SuperopTag.DISSIPATOR:
        return dissipator(a, rho)
    return innovation(a, rho)


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a
