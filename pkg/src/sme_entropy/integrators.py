"""Euler-Maruyama integration of the homodyne SME and an RK4 master-equation oracle.

A single trajectory follows

    d rho = -i [u H, rho] dt + D[M] rho dt + D[L] rho dt + H[M] rho dW,

with measurement record increments ``dy = Tr[(M + M^dag) rho] dt + dW``.
Every step is followed by a fixed sanitize pass (hermitize, clip negative
eigenvalues, renormalize the trace).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatchError, NonHermitianError, SanitizeAbort
from .statecore import (
    DEFAULT_FLOOR,
    DensityMatrix,
    SpectralFloor,
    _mat,
    as_matrix,
    dagger,
    is_hermitian,
    make_density,
    von_neumann_entropy,
)
from .superops import commutator, dissipator, innovation

STOCHASTIC_DT_LIMIT = 1e-2


@dataclass(frozen=True, eq=False)
class ControlPolicy:
    """Control input ``u_t``: a constant, or ``gain * Tr[observable rho_t]``."""

    kind: str = "constant"
    c: float = 1.0
    observable: Optional[np.ndarray] = None
    gain: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "proportional"):
            raise ValueError(f"unknown control kind {self.kind!r}")
        if not np.isfinite(self.c) or not np.isfinite(self.gain):
            raise ValueError("control parameters must be finite")
        if self.kind == "proportional":
            if self.observable is None:
                raise ValueError("proportional control needs an observable")
            obs = as_matrix(self.observable)
            if not is_hermitian(obs):
                raise NonHermitianError("control observable must be Hermitian")
            object.__setattr__(self, "observable", obs)

    @classmethod
    def constant(cls, c: float = 1.0) -> "ControlPolicy":
        return cls("constant", c=float(c))

    @classmethod
    def proportional(cls, observable, gain: float) -> "ControlPolicy":
        return cls("proportional", c=0.0, observable=observable, gain=float(gain))

    @property
    def state_independent(self) -> bool:
        return self.kind == "constant"

    def value(self, rho) -> float:
        if self.kind == "constant":
            return self.c
        return self.gain * float(np.trace(self.observable @ _mat(rho)).real)

    def as_kernel_args(self, d):
        if self.kind == "constant":
            return 0, self.c, np.zeros((d, d), dtype=complex), 0.0
        return 1, 0.0, self.observable, self.gain


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Hamiltonian, measured channel ``M``, dissipation ``L`` and control."""

    H: np.ndarray
    M: np.ndarray
    L: np.ndarray
    control: ControlPolicy = field(default_factory=ControlPolicy)

    def __post_init__(self):
        H, M, L = (as_matrix(a) for a in (self.H, self.M, self.L))
        if not (H.shape == M.shape == L.shape):
            raise DimensionMismatchError(
                f"operator shapes differ: H{H.shape} M{M.shape} L{L.shape}"
            )
        if not is_hermitian(H):
            raise NonHermitianError("Hamiltonian must be Hermitian")
        if self.control.observable is not None and self.control.observable.shape != H.shape:
            raise DimensionMismatchError("control observable has the wrong dimension")
        for name, a in (("H", H), ("M", M), ("L", L)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def m_hermitian(self) -> bool:
        return is_hermitian(self.M)


@dataclass(frozen=True)
class TimeGrid:
    t0: float = 0.0
    dt: float = 1e-3
    steps: int = 1000
    allow_large_dt: bool = False

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @classmethod
    def spanning(cls, t_final: float, dt: float, t0: float = 0.0, **kw) -> "TimeGrid":
        return cls(t0=t0, dt=dt, steps=int(round((t_final - t0) / dt)), **kw)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    @property
    def t_final(self) -> float:
        return self.t0 + self.dt * self.steps

    def check_stochastic(self):
        if self.dt > STOCHASTIC_DT_LIMIT and not self.allow_large_dt:
            raise ValueError(
                f"dt={self.dt} exceeds {STOCHASTIC_DT_LIMIT} for a stochastic run; "
                "set allow_large_dt=True to override"
            )


@dataclass(frozen=True)
class SanitizePolicy:
    hermitize: bool = True
    clip_negative_eigenvalues: bool = True
    renormalize_trace: bool = True
    max_negativity_before_abort: float = 1e-3

    def __post_init__(self):
        # clipping itself acts at zero; the abort threshold must sit above the
        # positivity tolerance so legitimately clipped steps never abort
        if not self.max_negativity_before_abort > 1e-9:
            raise ValueError("abort threshold must exceed the 1e-9 positivity tolerance")

    def as_kernel_args(self):
        return (self.hermitize, self.clip_negative_eigenvalues, self.renormalize_trace,
                self.max_negativity_before_abort)


DEFAULT_SANITIZE = SanitizePolicy()


def sanitize(mat, policy: SanitizePolicy = DEFAULT_SANITIZE):
    """Restore state invariants after a raw integration step.

    Returns ``(matrix, negativity)`` where negativity is the magnitude of the
    most negative eigenvalue before clipping.  Raises :class:`SanitizeAbort`
    when it exceeds the policy threshold.
    """
    m = np.array(mat, dtype=complex)
    if policy.hermitize:
        m = 0.5 * (m + dagger(m))
    w, v = np.linalg.eigh(m)
    negativity = max(-w[0], 0.0)
    if negativity > policy.max_negativity_before_abort:
        raise SanitizeAbort(negativity, policy.max_negativity_before_abort)
    if policy.clip_negative_eigenvalues and w[0] < 0.0:
        m = (v * np.maximum(w, 0.0)) @ dagger(v)
    if policy.renormalize_trace:
        m = m / np.trace(m).real
    return m, negativity


def sme_increment(rho, model: ModelSpec, dt: float, dW: float) -> np.ndarray:
    """Raw Euler-Maruyama increment of the SME (no sanitizing)."""
    r = _mat(rho)
    u = model.control.value(r)
    return (
        -1j * u * commutator(model.H, r) * dt
        + dissipator(model.M, r) * dt
        + dissipator(model.L, r) * dt
        + innovation(model.M, r) * dW
    )


def step_sme(rho, model: ModelSpec, dt: float, dW: float,
             policy: SanitizePolicy = DEFAULT_SANITIZE, return_negativity: bool = False):
    """One Euler-Maruyama step followed by :func:`sanitize`."""
    r = _mat(rho)
    if r.shape != model.H.shape:
        raise DimensionMismatchError(f"state {r.shape} vs model {model.H.shape}")
    mat, neg = sanitize(r + sme_increment(r, model, dt, dW), policy)
    out = make_density(mat)
    return (out, neg) if return_negativity else out


def sample_wiener(rng: np.random.Generator, dt: float, size=None):
    """Wiener increment(s) ``~ Normal(0, dt)``."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    z = rng.standard_normal(size)
    if size is None:
        return float(z) * np.sqrt(dt)
    return z * np.sqrt(dt)


def wiener_increments(n_traj: int, steps: int, dt: float, base_seed: int) -> np.ndarray:
    """Stacked increments; row ``k`` comes from its own stream seeded ``base_seed + k``."""
    dW = np.empty((n_traj, steps))
    for k in range(n_traj):
        dW[k] = sample_wiener(np.random.default_rng(base_seed + k), dt, steps)
    return dW


@dataclass(eq=False)
class TrajectoryRecord:
    """One simulated trajectory.

    ``states[j]`` is the state after ``state_steps[j]`` steps; ``entropy``
    has one sample per grid point.
    """

    grid: TimeGrid
    states: list
    state_steps: np.ndarray
    dW: np.ndarray
    y: np.ndarray
    entropy: np.ndarray
    seed: int
    negativity: float = 0.0
    abort_step: int = -1

    @property
    def aborted(self) -> bool:
        return self.abort_step >= 0


@dataclass(eq=False)
class TrajectoryEnsemble:
    """Array-backed ensemble of trajectories sharing one grid and model.

    Rows of every array index trajectories; ``seeds[k]`` reproduces row ``k``
    through :func:`simulate_trajectory`.
    """

    grid: TimeGrid
    states: np.ndarray        # (N, S, d, d)
    state_steps: np.ndarray   # (S,)
    dW: np.ndarray            # (N, T)
    y: np.ndarray             # (N, T)
    entropy: np.ndarray       # (N, T + 1)
    seeds: np.ndarray         # (N,)
    negativity: np.ndarray    # (N,)
    abort_step: np.ndarray    # (N,)

    def __len__(self):
        return self.entropy.shape[0]

    @property
    def aborted(self) -> np.ndarray:
        return self.abort_step >= 0

    @property
    def n_aborted(self) -> int:
        return int(np.count_nonzero(self.aborted))

    def completed(self) -> "TrajectoryEnsemble":
        """Sub-ensemble without aborted trajectories."""
        keep = ~self.aborted
        if keep.all():
            return self
        return TrajectoryEnsemble(
            self.grid, self.states[keep], self.state_steps, self.dW[keep], self.y[keep],
            self.entropy[keep], self.seeds[keep], self.negativity[keep], self.abort_step[keep],
        )

    def record(self, k: int) -> TrajectoryRecord:
        n_ok = len(self.state_steps) if self.abort_step[k] < 0 else \
            int(np.searchsorted(self.state_steps, self.abort_step[k], side="right"))
        return TrajectoryRecord(
            grid=self.grid,
            states=[make_density(s) for s in self.states[k, :n_ok]],
            state_steps=self.state_steps[:n_ok].copy(),
            dW=self.dW[k].copy(),
            y=self.y[k].copy(),
            entropy=self.entropy[k].copy(),
            seed=int(self.seeds[k]),
            negativity=float(self.negativity[k]),
            abort_step=int(self.abort_step[k]),
        )

    @classmethod
    def from_records(cls, records: Sequence[TrajectoryRecord]) -> "TrajectoryEnsemble":
        records = list(records)
        if not records:
            raise ValueError("no trajectory records given")
        grid = records[0].grid
        steps = records[0].state_steps
        for rec in records[1:]:
            if rec.grid != grid or not np.array_equal(rec.state_steps, steps):
                raise ValueError("records do not share a time grid and sampling")
        return cls(
            grid=grid,
            states=np.stack([np.stack([s.mat for s in rec.states]) for rec in records]),
            state_steps=np.asarray(steps),
            dW=np.stack([rec.dW for rec in records]),
            y=np.stack([rec.y for rec in records]),
            entropy=np.stack([rec.entropy for rec in records]),
            seeds=np.array([rec.seed for rec in records], dtype=np.int64),
            negativity=np.array([rec.negativity for rec in records]),
            abort_step=np.array([rec.abort_step for rec in records], dtype=np.int64),
        )


def as_ensemble(records) -> TrajectoryEnsemble:
    if isinstance(records, TrajectoryEnsemble):
        return records
    if isinstance(records, TrajectoryRecord):
        return TrajectoryEnsemble.from_records([records])
    return TrajectoryEnsemble.from_records(records)


def _run(model, grid, rho0, dW, policy, floor, stride, backend):
    r0 = _mat(rho0)
    if r0.shape != model.H.shape:
        raise DimensionMismatchError(f"initial state {r0.shape} vs model {model.H.shape}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return kernels.run_batch(
        r0, model.H, model.M, model.L, model.control.as_kernel_args(model.dim),
        grid.dt, dW, policy.as_kernel_args(), floor.epsilon, stride, backend,
    )


def simulate_ensemble(model: ModelSpec, grid: TimeGrid, rho0, n_trajectories: int,
                      base_seed: int = 0, policy: SanitizePolicy = DEFAULT_SANITIZE,
                      floor: SpectralFloor = DEFAULT_FLOOR, stride: int = 1,
                      backend: Optional[str] = None) -> TrajectoryEnsemble:
    """Simulate ``n_trajectories`` independent SME trajectories.

    Trajectory ``k`` draws its noise from a generator seeded
    ``base_seed + k``; states are stored every ``stride`` steps.  Aborted
    trajectories are kept (flagged via ``abort_step``) rather than raised.
    """
    if n_trajectories < 1:
        raise ValueError("need at least one trajectory")
    grid.check_stochastic()
    dW = wiener_increments(n_trajectories, grid.steps, grid.dt, base_seed)
    out = _run(model, grid, rho0, dW, policy, floor, stride, backend)
    return TrajectoryEnsemble(
        grid=grid,
        states=out["states"],
        state_steps=np.arange(0, grid.steps + 1, stride),
        dW=dW,
        y=out["dy"],
        entropy=out["entropy"],
        seeds=base_seed + np.arange(n_trajectories, dtype=np.int64),
        negativity=out["negativity"],
        abort_step=out["abort_step"],
    )


def simulate_trajectory(model: ModelSpec, grid: TimeGrid, rho0, seed: int,
                        policy: SanitizePolicy = DEFAULT_SANITIZE,
                        floor: SpectralFloor = DEFAULT_FLOOR, stride: int = 1,
                        backend: Optional[str] = None) -> TrajectoryRecord:
    """Simulate one trajectory; raises :class:`SanitizeAbort` with the step index."""
    ens = simulate_ensemble(model, grid, rho0, 1, seed, policy, floor, stride, backend)
    if ens.abort_step[0] >= 0:
        raise SanitizeAbort(ens.negativity[0], policy.max_negativity_before_abort,
                            step=int(ens.abort_step[0]))
    return ens.record(0)


def me_rhs(r: np.ndarray, model: ModelSpec, u: float) -> np.ndarray:
    return (-1j * u * commutator(model.H, r) + dissipator(model.M, r)
            + dissipator(model.L, r))


def _require_constant(model):
    if not model.control.state_independent:
        raise ValueError(
            "the deterministic master equation is closed only for state-independent "
            "control; proportional control is not supported"
        )


def step_me(rho, model: ModelSpec, dt: float,
            policy: SanitizePolicy = DEFAULT_SANITIZE) -> DensityMatrix:
    """Classical RK4 step of the ensemble master equation, then sanitize."""
    _require_constant(model)
    return make_density(_rk4(_mat(rho), model, dt, policy))


def _rk4(r, model, dt, policy):
    u = model.control.c
    k1 = me_rhs(r, model, u)
    k2 = me_rhs(r + 0.5 * dt * k1, model, u)
    k3 = me_rhs(r + 0.5 * dt * k2, model, u)
    k4 = me_rhs(r + dt * k3, model, u)
    return sanitize(r + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), policy)[0]


def solve_me(model: ModelSpec, grid: TimeGrid, rho0,
             policy: SanitizePolicy = DEFAULT_SANITIZE, stride: int = 1) -> np.ndarray:
    """RK4 solution on ``grid``; returns states at steps ``0, stride, ...`` as (S, d, d)."""
    _require_constant(model)
    r = np.array(_mat(rho0), dtype=complex)
    out = [r.copy()]
    for k in range(grid.steps):
        r = _rk4(r, model, grid.dt, policy)
        if (k + 1) % stride == 0:
            out.append(r.copy())
    return np.stack(out)


def entropy_series(record: TrajectoryRecord, floor: SpectralFloor = DEFAULT_FLOOR) -> np.ndarray:
    """Recompute entropies of the stored states (cross-check of kernel output)."""
    return np.array([von_neumann_entropy(s, floor) for s in record.states])
