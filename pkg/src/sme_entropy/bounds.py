"""Entropy-change decomposition and the three-term lower bound on its rate.

Per state the bound reads ``<[L^dag, L]> - 3 Var[M] - Var_gen[M]``; over an
ensemble it is compared with a finite-difference estimate of
``d E[S_t] / dt``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import NonHermitianError
from .integrators import (
    DEFAULT_SANITIZE,
    ModelSpec,
    SanitizePolicy,
    as_ensemble,
    simulate_ensemble,
    step_sme,
    TimeGrid,
)
from .statecore import (
    DEFAULT_FLOOR,
    SpectralFloor,
    _mat,
    as_matrix,
    dagger,
    dissipative_commutator,
    generalized_variance,
    inverse_matrix,
    is_floored,
    is_hermitian,
    log_matrix,
    variance,
    von_neumann_entropy,
)
from .superops import dissipator, innovation

VIOLATION_SIGMAS = -3.0
# numerical noise floor added in quadrature to the combined standard error so
# that deterministic ensembles (zero spread) do not divide by zero
STDERR_FLOOR = 1e-12


@dataclass(frozen=True)
class BoundReport:
    commutator_term: float
    var_term: float
    genvar_term: float
    rhs: float
    floored: bool


@dataclass(frozen=True)
class DriftTerms:
    meas_lindblad: float
    diss_lindblad: float
    ito_term: float
    noise_coeff: float

    @property
    def drift(self) -> float:
        return self.meas_lindblad + self.diss_lindblad + self.ito_term


@dataclass(frozen=True)
class InequalityVerdict:
    time: float
    lhs_rate: float
    lhs_stderr: float
    rhs_mean: float
    rhs_stderr: float
    margin_sigmas: float

    @property
    def violated(self) -> bool:
        return self.margin_sigmas < VIOLATION_SIGMAS

    def to_dict(self):
        return asdict(self)


def _require_hermitian_m(model: ModelSpec):
    if not model.m_hermitian:
        raise NonHermitianError("bound is derived for a Hermitian measurement operator M")


def bound_terms(rho, model: ModelSpec, floor: SpectralFloor = DEFAULT_FLOOR) -> BoundReport:
    _require_hermitian_m(model)
    comm = dissipative_commutator(model.L, rho)
    var = variance(model.M, rho)
    gvar = generalized_variance(model.M, rho, floor)
    return BoundReport(comm, var, gvar, comm - 3.0 * var - gvar, is_floored(rho, floor))


def bound_terms_batch(states: np.ndarray, model: ModelSpec,
                      floor: SpectralFloor = DEFAULT_FLOOR) -> dict:
    """Vectorized :func:`bound_terms` over a stack ``(..., d, d)``.

    Works in the eigenbasis of each state: with ``Mt = V^dag M V`` one has
    ``Tr[rho^-1 M rho^2 M] = sum_ij |Mt_ij|^2 w_j^2 / w_i``.
    """
    _require_hermitian_m(model)
    states = np.asarray(states, dtype=complex)
    w, v = np.linalg.eigh(states)
    wf = np.maximum(w, floor.epsilon)
    mt = dagger(v) @ model.M @ v
    a2 = np.abs(mt) ** 2
    mean = np.einsum("...i,...ii->...", w, mt).real
    second = np.einsum("...i,...ij->...", w, a2)
    gen = np.einsum("...ij,...j,...i->...", a2, w * w, 1.0 / wf)
    Ld = dagger(model.L)
    comm = np.einsum("ij,...ji->...", Ld @ model.L - model.L @ Ld, states).real
    var = second - mean * mean
    gvar = gen - mean * mean
    return {
        "commutator_term": comm,
        "var_term": var,
        "genvar_term": gvar,
        "rhs": comm - 3.0 * var - gvar,
        "floored": w[..., 0] < floor.epsilon,
    }


def drift_terms(rho, model: ModelSpec, floor: SpectralFloor = DEFAULT_FLOOR) -> DriftTerms:
    """Trace terms of the Ito entropy increment, with floored ``ln rho`` and ``rho^-1``."""
    r = _mat(rho)
    lg = log_matrix(r, floor)
    inv = inverse_matrix(r, floor)
    g = innovation(model.M, r)
    return DriftTerms(
        meas_lindblad=-np.trace(dissipator(model.M, r) @ lg).real,
        diss_lindblad=-np.trace(dissipator(model.L, r) @ lg).real,
        ito_term=-np.trace(inv @ g @ g).real,
        noise_coeff=-np.trace(g @ lg).real,
    )


def ito_identity_check(rho, m, floor: SpectralFloor = DEFAULT_FLOOR) -> float:
    """``|-Tr{rho^-1 (H[M]rho)^2} - (-3Tr[M^2 rho] + 4Tr[M rho]^2 - Tr[rho^-1 M rho^2 M])|``."""
    m = as_matrix(m)
    if not is_hermitian(m):
        raise NonHermitianError("identity holds for Hermitian M only")
    r = _mat(rho)
    inv = inverse_matrix(r, floor)
    g = innovation(m, r)
    lhs = -np.trace(inv @ g @ g).real
    mean = np.trace(m @ r).real
    rhs = (-3.0 * np.trace(m @ m @ r).real + 4.0 * mean * mean
           - np.trace(inv @ m @ r @ r @ m).real)
    return abs(lhs - rhs)


def abe_term_check(rho, a, floor: SpectralFloor = DEFAULT_FLOOR) -> float:
    """Slack ``-Tr{D[A]rho ln rho} - Tr{[A^dag, A] rho}``; nonnegative when the cited inequality holds."""
    a = as_matrix(a)
    r = _mat(rho)
    first = -np.trace(dissipator(a, r) @ log_matrix(r, floor)).real
    return first - dissipative_commutator(a, r)


def _check_window(ens, t_index, window):
    if len(ens) < 2:
        raise ValueError(f"need at least 2 completed trajectories, have {len(ens)}")
    if window < 1:
        raise ValueError("window must be >= 1")
    if t_index - window < 0 or t_index + window > ens.grid.steps:
        raise IndexError(
            f"t_index {t_index} +/- window {window} leaves the grid [0, {ens.grid.steps}]"
        )


def _rate_samples(ens, t_index, window):
    e = ens.entropy
    return (e[:, t_index + window] - e[:, t_index - window]) / (2 * window * ens.grid.dt)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(x.shape[0]))


def ensemble_entropy_rate(records, t_index: int, window: int = 10):
    """Central finite difference of the trajectory-averaged entropy.

    Returns ``(rate, stderr)``; the error uses the spread of per-trajectory
    differences, so correlations between the two endpoints are accounted for.
    Aborted trajectories are dropped.
    """
    ens = as_ensemble(records).completed()
    _check_window(ens, t_index, window)
    return _mean_se(_rate_samples(ens, t_index, window))


def verdict_indices(ens, window: int) -> np.ndarray:
    """Positions in ``state_steps`` where a central difference fits in the grid."""
    steps = np.asarray(ens.state_steps)
    ok = (steps - window >= 0) & (steps + window <= ens.grid.steps)
    return np.flatnonzero(ok)


def inequality_timeseries(records, model: ModelSpec, floor: SpectralFloor = DEFAULT_FLOOR,
                          window: int = 10, exclude_floored: bool = False):
    """Verdicts plus per-time ensemble averages of every bound term.

    Returns ``(verdicts, rows)``; each row is a dict keyed like the
    ``timeseries.csv`` columns.
    """
    ens = as_ensemble(records).completed()
    if len(ens) < 2:
        raise ValueError(f"need at least 2 completed trajectories, have {len(ens)}")
    verdicts: List[InequalityVerdict] = []
    rows = []
    for j in verdict_indices(ens, window):
        t_index = int(ens.state_steps[j])
        rate, rate_se = _mean_se(_rate_samples(ens, t_index, window))
        terms = bound_terms_batch(ens.states[:, j], model, floor)
        use = ~terms["floored"] if exclude_floored else np.ones(len(ens), dtype=bool)
        if np.count_nonzero(use) >= 2:
            rhs, rhs_se = _mean_se(terms["rhs"][use])
        else:
            rhs, rhs_se = float("nan"), float("nan")
        combined = np.sqrt(rate_se ** 2 + rhs_se ** 2 + STDERR_FLOOR ** 2)
        t = float(ens.grid.t0 + t_index * ens.grid.dt)
        v = InequalityVerdict(t, rate, rate_se, rhs, rhs_se, float((rate - rhs) / combined))
        verdicts.append(v)
        s_mean, s_se = _mean_se(ens.entropy[:, t_index])
        rows.append({
            "t": t,
            "mean_entropy": s_mean,
            "entropy_stderr": s_se,
            "lhs_rate": rate,
            "rhs_mean": rhs,
            "rhs_stderr": rhs_se,
            "commutator_term": float(np.mean(terms["commutator_term"][use])),
            "var_term": float(np.mean(terms["var_term"][use])),
            "genvar_term": float(np.mean(terms["genvar_term"][use])),
            "margin_sigmas": v.margin_sigmas,
            "floored_fraction": float(np.mean(terms["floored"])),
        })
    return verdicts, rows


def verify_inequality(records, model: ModelSpec, floor: SpectralFloor = DEFAULT_FLOOR,
                      window: int = 10) -> List[InequalityVerdict]:
    """Check ``d E[S]/dt >= E[rhs]`` at every stored time admitting a central difference."""
    return inequality_timeseries(records, model, floor, window)[0]


@dataclass(frozen=True)
class ConsistencyReport:
    dts: tuple
    rms: tuple
    n_states: int

    @property
    def ratio(self) -> float:
        """RMS residual at the coarser step over RMS at the finer one."""
        return self.rms[0] / self.rms[1]


def entropy_step_residuals(states: Sequence, model: ModelSpec, dt: float, z: np.ndarray,
                           floor: SpectralFloor = DEFAULT_FLOOR,
                           policy: SanitizePolicy = DEFAULT_SANITIZE) -> np.ndarray:
    """``S(rho') - S(rho) - (drift dt + noise_coeff dW)`` for one sanitized SME step.

    Each state is stepped twice, with ``dW = +z sqrt(dt)`` and ``-z sqrt(dt)``.
    """
    out = []
    for rho, zk in zip(states, z):
        terms = drift_terms(rho, model, floor)
        s0 = von_neumann_entropy(rho, floor)
        for sign in (1.0, -1.0):
            dW = sign * zk * np.sqrt(dt)
            s1 = von_neumann_entropy(step_sme(rho, model, dt, dW, policy), floor)
            out.append(s1 - s0 - (terms.drift * dt + terms.noise_coeff * dW))
    return np.asarray(out)


def entropy_consistency(model: ModelSpec, rho0, dts=(2e-3, 1e-3), n_trajectories: int = 10,
                        t_final: float = 1.0, stride: int = 10, seed: int = 0,
                        min_eigenvalue: float = 1e-4,
                        floor: SpectralFloor = DEFAULT_FLOOR,
                        policy: SanitizePolicy = DEFAULT_SANITIZE) -> ConsistencyReport:
    """Per-step RMS residual of the Ito entropy expansion at each ``dt`` in ``dts``.

    States are sampled every ``stride`` steps from trajectories run at the
    finest ``dt``; states with an eigenvalue below ``min_eigenvalue`` are
    skipped.  Every ``dt`` is evaluated on the same states with the same
    antithetic normal draws, so the ratio of RMS values isolates the ``dt``
    dependence from sampling noise.
    """
    dt_fine = min(dts)
    grid = TimeGrid.spanning(t_final, dt_fine)
    ens = simulate_ensemble(model, grid, rho0, n_trajectories, seed, policy, floor, stride)
    ens = ens.completed()
    flat = ens.states.reshape(-1, model.dim, model.dim)
    lam_min = np.linalg.eigvalsh(flat)[:, 0]
    chosen = flat[lam_min >= max(min_eigenvalue, floor.epsilon)]
    if chosen.shape[0] == 0:
        raise ValueError("no full-rank states available for the consistency check")
    z = np.random.default_rng(seed).standard_normal(chosen.shape[0])
    rms = tuple(
        float(np.sqrt(np.mean(entropy_step_residuals(chosen, model, dt, z, floor, policy) ** 2)))
        for dt in dts
    )
    return ConsistencyReport(tuple(dts), rms, int(chosen.shape[0]))
