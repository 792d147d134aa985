"""Named model configurations.

Qubit basis ordering is ``(e, g)``: ``sigma_z = diag(+1, -1)`` and the
lowering operator ``sigma_minus = |g><e|``.  With this convention
``<[sigma_plus, sigma_minus]>`` is ``+1`` in the excited state, so
amplitude damping from ``|e>`` has a positive commutator term.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from .errors import ConfigError
from .integrators import ControlPolicy, ModelSpec
from .statecore import (
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityMatrix,
    make_density,
    maximally_mixed,
)


@dataclass(frozen=True, eq=False)
class ModelCatalogEntry:
    name: str
    spec: ModelSpec
    default_initial_state: DensityMatrix
    notes: str = ""
    params: Mapping[str, float] = field(default_factory=dict)
    # index of the basis level whose population signals truncation error
    truncation_level: Optional[int] = None


def annihilation(n: int) -> np.ndarray:
    """Truncated ladder operator on Fock levels ``0 .. n-1``."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def thermal_state(n: int, nbar: float) -> DensityMatrix:
    q = nbar / (1.0 + nbar)
    p = q ** np.arange(n)
    return make_density(np.diag(p / p.sum()))


# (default, lower, upper, integer?) per parameter
_RATE = (1.0, 0.0, 1e3, False)
_FREQ = (1.0, -1e3, 1e3, False)


def _qubit_decay(p):
    spec = ModelSpec(
        H=0.5 * p["omega"] * SIGMA_Z,
        M=np.sqrt(p["kappa"]) * SIGMA_Z,
        L=np.sqrt(p["gamma"]) * SIGMA_MINUS,
        control=ControlPolicy.constant(p["u"]),
    )
    return spec, maximally_mixed(2), None, (
        "homodyne sigma_z monitoring with amplitude damping; bound has a nonzero "
        "commutator term"
    )


def _qubit_hermitian_l(p):
    spec = ModelSpec(
        H=0.5 * p["omega"] * SIGMA_X,
        M=np.sqrt(p["kappa"]) * SIGMA_Z,
        L=np.sqrt(p["gamma"]) * SIGMA_Z,
        control=ControlPolicy.constant(p["u"]),
    )
    return spec, maximally_mixed(2), None, (
        "Hermitian dissipation (extra dephasing): <[L^dag, L]> vanishes identically; "
        "sigma_x drive keeps the state off-diagonal in the measurement basis"
    )


def _qubit_feedback(p):
    spec = ModelSpec(
        H=0.5 * p["omega"] * SIGMA_X,
        M=np.sqrt(p["kappa"]) * SIGMA_Z,
        L=np.sqrt(p["gamma"]) * SIGMA_MINUS,
        control=ControlPolicy.proportional(SIGMA_Y, p["gain"]),
    )
    # from I/2 the state stays diagonal and <sigma_y> = 0 switches the controller
    # off, so start with a sigma_y component
    rho0 = make_density(0.5 * (np.eye(2) + 0.6 * SIGMA_Y))
    return spec, rho0, None, (
        "illustrative feedback law u_t = gain * <sigma_y>; not an optimized controller"
    )


def _oscillator(p):
    n = int(p["N_fock"])
    a = annihilation(n)
    ad = a.conj().T
    spec = ModelSpec(
        H=p["omega"] * ad @ a,
        M=np.sqrt(p["kappa"]) * (a + ad) / np.sqrt(2.0),
        L=np.sqrt(p["gamma"]) * a,
        control=ControlPolicy.constant(p["u"]),
    )
    return spec, thermal_state(n, p["nbar0"]), n - 1, (
        "damped oscillator with x-quadrature homodyne monitoring, truncated Fock basis; "
        "starts thermal so the top level is nearly empty"
    )


_CATALOG: Dict[str, tuple] = {
    "qubit_decay_homodyne": (_qubit_decay, {
        "omega": _FREQ, "kappa": _RATE, "gamma": _RATE, "u": _FREQ,
    }),
    "qubit_hermitian_L": (_qubit_hermitian_l, {
        "omega": _FREQ, "kappa": _RATE, "gamma": _RATE, "u": _FREQ,
    }),
    "qubit_feedback": (_qubit_feedback, {
        "omega": _FREQ, "kappa": _RATE, "gamma": _RATE, "gain": _FREQ,
    }),
    "oscillator_truncated": (_oscillator, {
        "N_fock": (10, 2, 60, True), "omega": _FREQ, "kappa": (0.5, 0.0, 1e3, False),
        "gamma": _RATE, "u": _FREQ, "nbar0": (0.5, 0.0, 10.0, False),
    }),
}


def model_names():
    return sorted(_CATALOG)


def default_params(name: str) -> Dict[str, float]:
    if name not in _CATALOG:
        raise ConfigError(f"unknown model {name!r}; available: {', '.join(model_names())}")
    return {k: r[0] for k, r in _CATALOG[name][1].items()}


def build_model(name: str, params: Optional[Mapping[str, float]] = None) -> ModelCatalogEntry:
    """Construct a catalog model, filling unspecified parameters with defaults."""
    p = default_params(name)
    ranges = _CATALOG[name][1]
    for key, value in (params or {}).items():
        if key not in ranges:
            raise ConfigError(f"model {name!r} has no parameter {key!r}; "
                              f"known: {', '.join(sorted(ranges))}")
        _, lo, hi, integral = ranges[key]
        try:
            x = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"parameter {key!r} must be a number, got {value!r}") from None
        if not np.isfinite(x) or not (lo <= x <= hi):
            raise ConfigError(f"parameter {key!r}={value!r} outside [{lo}, {hi}]")
        if integral and x != int(x):
            raise ConfigError(f"parameter {key!r} must be an integer, got {value!r}")
        p[key] = int(x) if integral else x
    builder: Callable = _CATALOG[name][0]
    spec, rho0, level, notes = builder(p)
    return ModelCatalogEntry(name, spec, rho0, notes, dict(p), level)
