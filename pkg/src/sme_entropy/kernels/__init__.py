"""Hot trajectory kernels.

Two interchangeable implementations advance a whole batch of SME
trajectories: a vectorized numpy path (always available) and a numba
``@njit`` path.  Selection order: explicit ``backend=`` argument, then the
``SME_ENTROPY_BACKEND`` env var (``numpy`` / ``numba``), then ``auto``:
numba for qubits (closed-form 2x2 eigensolver), numpy otherwise, where the
batched LAPACK call beats per-matrix calls from jitted code.
``SME_ENTROPY_NO_NUMBA=1`` forces numpy regardless.
"""
import os

from . import _numpy_impl

try:  # pragma: no cover - exercised only where numba is absent
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

BACKENDS = ("numpy", "numba")
ENV_BACKEND = "SME_ENTROPY_BACKEND"
ENV_NO_NUMBA = "SME_ENTROPY_NO_NUMBA"


def resolve_backend(backend=None, dim=2):
    if os.environ.get(ENV_NO_NUMBA, "").strip() not in ("", "0"):
        return "numpy"
    if backend in (None, "auto"):
        backend = os.environ.get(ENV_BACKEND, "").strip().lower() or "auto"
    if backend == "auto":
        return "numba" if HAVE_NUMBA and dim == 2 else "numpy"
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def run_batch(rho0, H, M, L, control, dt, dW, sanitize, floor_eps, stride, backend=None):
    """Integrate ``dW.shape[0]`` trajectories over ``dW.shape[1]`` steps.

    ``control`` is ``(kind, c, observable, gain)`` with kind 0 for constant
    and 1 for proportional control.  ``sanitize`` is
    ``(hermitize, clip, renormalize, abort_threshold)``.

    Returns a dict of arrays: ``entropy`` (N, T+1), ``dy`` (N, T),
    ``states`` (N, S, d, d) at steps ``0, stride, 2*stride, ...``,
    ``negativity`` (N,) max pre-sanitize negativity, ``abort_step`` (N,)
    with -1 for trajectories that never aborted.
    """
    name = resolve_backend(backend, rho0.shape[0])
    if name == "numba":
        from . import _numba_impl

        return _numba_impl.run_batch(rho0, H, M, L, control, dt, dW, sanitize, floor_eps, stride)
    return _numpy_impl.run_batch(rho0, H, M, L, control, dt, dW, sanitize, floor_eps, stride)
