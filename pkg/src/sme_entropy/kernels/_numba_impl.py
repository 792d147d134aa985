import numpy as np
from numba import njit


@njit(cache=True)
def _mm(a, b, out):
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            s = 0j
            for k in range(d):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@njit(cache=True)
def _dag(a, out):
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            out[i, j] = np.conj(a[j, i])


@njit(cache=True)
def _tr_prod(a, b):
    d = a.shape[0]
    s = 0j
    for i in range(d):
        for j in range(d):
            s += a[i, j] * b[j, i]
    return s


@njit(cache=True)
def _entropy(w, eps):
    s = 0.0
    for x in w:
        if x > eps:
            s -= x * np.log(x)
    return s


@njit(cache=True)
def _eigh2(h):
    # closed-form 2x2 Hermitian eigendecomposition, ascending like np.linalg.eigh
    a = h[0, 0].real
    c = h[1, 1].real
    b = 0.5 * (h[1, 0] + np.conj(h[0, 1]))
    mid = 0.5 * (a + c)
    half = 0.5 * (a - c)
    rad = np.sqrt(half * half + b.real * b.real + b.imag * b.imag)
    w = np.empty(2)
    w[0] = mid - rad
    w[1] = mid + rad
    v = np.zeros((2, 2), dtype=np.complex128)
    if rad == 0.0:
        v[0, 0] = 1.0
        v[1, 1] = 1.0
        return w, v
    # choose the better-conditioned of the two null-vector candidates
    if half <= 0.0:
        x0 = rad - half + 0j
        x1 = -b
    else:
        x0 = np.conj(b)
        x1 = -(half + rad) + 0j
    nrm = np.sqrt(abs(x0) ** 2 + abs(x1) ** 2)
    v[0, 0] = x0 / nrm
    v[1, 0] = x1 / nrm
    v[0, 1] = -np.conj(v[1, 0])
    v[1, 1] = np.conj(v[0, 0])
    return w, v


@njit(cache=True)
def _kernel(rho0, H, M, L, kind, c, obs, gain, dt, dW,
            hermitize, clip, renorm, abort_thr, eps, stride,
            entropy, dy, states, negativity, abort_step):
    n, steps = dW.shape
    d = rho0.shape[0]
    Md = np.empty_like(M)
    Ld = np.empty_like(L)
    _dag(M, Md)
    _dag(L, Ld)
    MdM = np.empty_like(M)
    LdL = np.empty_like(L)
    _mm(Md, M, MdM)
    _mm(Ld, L, LdL)
    Mx = M + Md

    r = np.empty_like(rho0)
    new = np.empty_like(rho0)
    t1 = np.empty_like(rho0)
    t2 = np.empty_like(rho0)
    t3 = np.empty_like(rho0)
    e0 = _entropy(np.linalg.eigvalsh(rho0), eps)

    for j in range(n):
        r[:, :] = rho0
        entropy[j, 0] = e0
        states[j, 0] = rho0
        for k in range(steps):
            dw = dW[j, k]
            if kind == 1:
                u = gain * _tr_prod(obs, r).real
            else:
                u = c
            mean = _tr_prod(Mx, r).real
            dy[j, k] = mean * dt + dw
            # Hamiltonian
            _mm(H, r, t1)
            _mm(r, H, t2)
            for a in range(d):
                for b in range(d):
                    new[a, b] = r[a, b] - 1j * u * dt * (t1[a, b] - t2[a, b])
            # D[M] and H[M]
            _mm(M, r, t1)
            _mm(t1, Md, t2)
            _mm(r, Md, t3)
            for a in range(d):
                for b in range(d):
                    new[a, b] += (t2[a, b] * dt
                                  + (t1[a, b] + t3[a, b] - mean * r[a, b]) * dw)
            _mm(MdM, r, t1)
            _mm(r, MdM, t2)
            for a in range(d):
                for b in range(d):
                    new[a, b] -= 0.5 * dt * (t1[a, b] + t2[a, b])
            # D[L]
            _mm(L, r, t1)
            _mm(t1, Ld, t2)
            _mm(LdL, r, t1)
            _mm(r, LdL, t3)
            for a in range(d):
                for b in range(d):
                    new[a, b] += dt * (t2[a, b] - 0.5 * (t1[a, b] + t3[a, b]))
            if hermitize:
                _dag(new, t1)
                for a in range(d):
                    for b in range(d):
                        new[a, b] = 0.5 * (new[a, b] + t1[a, b])
            if d == 2:
                w, v = _eigh2(new)
            else:
                w, v = np.linalg.eigh(new)
            neg = -w[0] if w[0] < 0.0 else 0.0
            if neg > negativity[j]:
                negativity[j] = neg
            if neg > abort_thr:
                abort_step[j] = k
                break
            if clip and w[0] < 0.0:
                for a in range(d):
                    if w[a] < 0.0:
                        w[a] = 0.0
                for a in range(d):
                    for b in range(d):
                        s = 0j
                        for q in range(d):
                            s += v[a, q] * w[q] * np.conj(v[b, q])
                        new[a, b] = s
            if renorm:
                tr = 0.0
                for a in range(d):
                    tr += new[a, a].real
                for a in range(d):
                    w[a] /= tr
                    for b in range(d):
                        new[a, b] /= tr
            r[:, :] = new
            entropy[j, k + 1] = _entropy(w, eps)
            if (k + 1) % stride == 0:
                states[j, (k + 1) // stride] = r


def run_batch(rho0, H, M, L, control, dt, dW, sanitize, floor_eps, stride):
    kind, c, obs, gain = control
    hermitize, clip, renorm, abort_thr = sanitize
    dW = np.ascontiguousarray(dW, dtype=np.float64)
    n, steps = dW.shape
    d = rho0.shape[0]
    n_store = steps // stride + 1
    cast = lambda a: np.ascontiguousarray(a, dtype=np.complex128)  # noqa: E731
    out = {
        "entropy": np.full((n, steps + 1), np.nan),
        "dy": np.full((n, steps), np.nan),
        "states": np.full((n, n_store, d, d), np.nan, dtype=np.complex128),
        "negativity": np.zeros(n),
        "abort_step": np.full(n, -1, dtype=np.int64),
    }
    _kernel(cast(rho0), cast(H), cast(M), cast(L), int(kind), float(c), cast(obs),
            float(gain), float(dt), dW, bool(hermitize), bool(clip), bool(renorm),
            float(abort_thr), float(floor_eps), int(stride),
            out["entropy"], out["dy"], out["states"], out["negativity"], out["abort_step"])
    return out
