import numpy as np


def _dag(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _tr(a, r):
    # Tr[a r] for fixed a and a stack r
    return np.einsum("ij,nji->n", a, r)


def run_batch(rho0, H, M, L, control, dt, dW, sanitize, floor_eps, stride):
    kind, c, obs, gain = control
    hermitize, clip, renorm, abort_thr = sanitize
    dW = np.ascontiguousarray(dW, dtype=float)
    n, steps = dW.shape
    d = rho0.shape[0]
    n_store = steps // stride + 1

    Md, Ld = _dag(M), _dag(L)
    MdM, LdL = Md @ M, Ld @ L
    Mx = M + Md

    r = np.broadcast_to(np.asarray(rho0, dtype=complex), (n, d, d)).copy()
    entropy = np.full((n, steps + 1), np.nan)
    dy = np.full((n, steps), np.nan)
    states = np.full((n, n_store, d, d), np.nan, dtype=complex)
    negativity = np.zeros(n)
    abort_step = np.full(n, -1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)

    w0 = np.linalg.eigvalsh(rho0)
    entropy[:, 0] = _entropy(w0, floor_eps)
    states[:, 0] = r

    for k in range(steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        rk = r[idx]
        dw = dW[idx, k]
        if kind == 1:
            u = gain * _tr(obs, rk).real
        else:
            u = np.full(idx.size, c)
        mean = _tr(Mx, rk).real
        drift = (
            -1j * u[:, None, None] * (H @ rk - rk @ H)
            + M @ rk @ Md - 0.5 * (MdM @ rk + rk @ MdM)
            + L @ rk @ Ld - 0.5 * (LdL @ rk + rk @ LdL)
        )
        innov = M @ rk + rk @ Md - mean[:, None, None] * rk
        new = rk + drift * dt + innov * dw[:, None, None]
        dy[idx, k] = mean * dt + dw
        if hermitize:
            new = 0.5 * (new + _dag(new))
        w, v = np.linalg.eigh(new)
        neg = np.maximum(-w[:, 0], 0.0)
        negativity[idx] = np.maximum(negativity[idx], neg)
        bad = neg > abort_thr
        if bad.any():
            abort_step[idx[bad]] = k
            alive[idx[bad]] = False
        if clip:
            fix = w[:, 0] < 0.0
            if fix.any():
                w[fix] = np.maximum(w[fix], 0.0)
                vf = v[fix]
                new[fix] = (vf * w[fix][:, None, :]) @ _dag(vf)
        if renorm:
            tr = np.trace(new, axis1=1, axis2=2).real
            new = new / tr[:, None, None]
            w = w / tr[:, None]
        ok = ~bad
        keep = idx[ok]
        r[keep] = new[ok]
        entropy[keep, k + 1] = _entropy(w[ok], floor_eps)
        if (k + 1) % stride == 0:
            states[keep, (k + 1) // stride] = new[ok]
    return {
        "entropy": entropy,
        "dy": dy,
        "states": states,
        "negativity": negativity,
        "abort_step": abort_step,
    }


def _entropy(w, eps):
    w = np.asarray(w, dtype=float)
    big = w > eps
    return -np.sum(np.where(big, w * np.log(np.where(big, w, 1.0)), 0.0), axis=-1)
