"""Acceptance suite, run at full scale.

Each criterion prints one ``PASS``/``FAIL`` line.  Run directly with
``python3 tests/test_acceptance.py`` or through pytest (lines go to the
terminal either way).
"""
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from sme_entropy import cli
from sme_entropy.bounds import abe_term_check, entropy_consistency, ito_identity_check
from sme_entropy.integrators import ControlPolicy, ModelSpec, TimeGrid, simulate_ensemble, solve_me
from sme_entropy.models import build_model
from sme_entropy.statecore import (
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Z,
    generalized_variance,
    make_density,
    pure_state,
    random_density,
    random_hermitian,
    random_operator,
    variance,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SEED = 20251014


def report(label, ok, detail, capsys=None):
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


def _run_config(name, out):
    cfg = cli.load_config(CONFIGS / f"{name}.json")
    start = time.perf_counter()
    summary = cli.run(cfg, out)
    rows = json.loads((out / "verdicts.json").read_text())
    return summary, rows, time.perf_counter() - start


def check_c1(tmp):
    s, _, secs = _run_config("qubit_decay_homodyne", tmp / "c1")
    ok = (s.exit_code == cli.EXIT_OK and s.n_trajectories == 4000 and s.n_aborted == 0
          and s.n_violations == 0 and s.min_margin_sigmas >= -3 and secs < 60)
    return ok, (f"qubit_decay_homodyne N={s.n_trajectories}, {s.n_verdicts} times, "
                f"min margin {s.min_margin_sigmas:.2f} sigma, {s.n_violations} violations, "
                f"{secs:.1f}s")


def check_c2(tmp):
    s, _, _ = _run_config("qubit_hermitian_L", tmp / "c2")
    text = (tmp / "c2" / "timeseries.csv").read_text().splitlines()
    col = text[0].split(",").index("commutator_term")
    worst = max(abs(float(line.split(",")[col])) for line in text[1:])
    ok = worst <= 1e-12 and s.exit_code == cli.EXIT_OK and s.min_margin_sigmas >= -3
    return ok, (f"max |commutator_term| {worst:.1e}, min margin {s.min_margin_sigmas:.2f} "
                f"sigma, {s.n_violations} violations")


def check_c3():
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for d in (2, 3, 4):
        for _ in range(1000):
            worst = max(worst, ito_identity_check(random_density(d, rng, mix=0.05),
                                                  random_hermitian(d, rng)))
    secs = time.perf_counter() - start
    return worst <= 1e-10 and secs < 5, f"max residual {worst:.2e} over 3000 cases, {secs:.2f}s"


def check_c4():
    rng = np.random.default_rng(SEED + 1)
    start = time.perf_counter()
    worst = {True: np.inf, False: np.inf}
    for i in range(10_000):
        d = (2, 3, 4)[i % 3]
        hermitian = i % 2 == 0
        # log-uniform mixing reaches nearly pure states
        rho = random_density(d, rng, mix=10 ** rng.uniform(-6, 0))
        a = random_hermitian(d, rng) if hermitian else random_operator(d, rng)
        worst[hermitian] = min(worst[hermitian], abe_term_check(rho, a))
    secs = time.perf_counter() - start
    lo = min(worst.values())
    return lo >= -1e-9 and secs < 30, (f"min slack {lo:.2e} (Hermitian {worst[True]:.2e}, "
                                       f"general {worst[False]:.2e}) over 10000 draws, "
                                       f"{secs:.1f}s")


def check_c5():
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for i in range(1000):
        d = (2, 3, 4)[i % 3]
        p = rng.dirichlet(np.ones(d)) * (1 - 1e-3) + 1e-3 / d
        u = np.linalg.qr(random_operator(d, rng))[0]
        # rotate both into a shared random basis so the pair commutes but is not diagonal
        rho = make_density(u @ np.diag(p) @ u.conj().T)
        m = u @ np.diag(rng.standard_normal(d)) @ u.conj().T
        worst = max(worst, abs(generalized_variance(m, rho) - variance(m, rho)))
    return worst <= 1e-10, f"max |Var_gen - Var| {worst:.2e} over 1000 pairs"


def check_c6():
    e = build_model("qubit_decay_homodyne")
    grid = TimeGrid(dt=1e-3, steps=1000)
    out = []
    for label, rho0 in (("I/2", e.default_initial_state),
                        ("(I+0.8sigma_x)/2", make_density(0.5 * (np.eye(2) + 0.8 * SIGMA_X)))):
        ens = simulate_ensemble(e.spec, grid, rho0, 4000, base_seed=SEED, stride=10)
        ref = solve_me(e.spec, grid, rho0, stride=10)
        dist = np.abs(ens.states.mean(axis=0) - ref).max(axis=(1, 2))
        out.append((label, float(dist.max()), ens.n_aborted))
    ok = all(dmax <= 0.08 and nab == 0 for _, dmax, nab in out)
    return ok, "; ".join(f"rho0={lab} max-norm {dmax:.4f} over 101 times" for lab, dmax, _ in out)


def check_c7():
    grid = TimeGrid(dt=1e-3, steps=1000)
    zero = np.zeros((2, 2))
    damp = ModelSpec(H=zero, M=zero, L=SIGMA_MINUS, control=ControlPolicy.constant(0.0))
    pop = solve_me(damp, grid, pure_state([1, 0]), stride=1000)[-1][0, 0].real
    deph = ModelSpec(H=zero, M=zero, L=SIGMA_Z, control=ControlPolicy.constant(0.0))
    coh = solve_me(deph, grid, make_density(0.5 * (np.eye(2) + SIGMA_X)))
    t = grid.times
    coh_err = np.abs(2 * coh[:, 0, 1].real - np.exp(-2 * t)).max()
    e1 = abs(pop - np.exp(-1.0))
    return e1 <= 1e-6 and coh_err <= 1e-6, (f"|p_e(1) - e^-1| {e1:.1e}, "
                                            f"max |coh - e^-2t| {coh_err:.1e}")


def check_c8():
    parts, ok = [], True
    for name in ("qubit_decay_homodyne", "qubit_hermitian_L", "qubit_feedback"):
        e = build_model(name)
        r = entropy_consistency(e.spec, e.default_initial_state, dts=(2e-3, 1e-3),
                                n_trajectories=10, seed=SEED)
        ok &= r.ratio >= 2.0
        parts.append(f"{name} ratio {r.ratio:.4f} ({r.n_states} states)")
    return ok, "; ".join(parts)


def check_c9(tmp):
    cfg = cli.load_config(CONFIGS / "qubit_decay_homodyne.json")
    cli.run(cfg, tmp / "c9a")
    cli.run(cfg, tmp / "c9b")
    files = ("timeseries.csv", "verdicts.json", "summary.json")
    same = [(tmp / "c9a" / f).read_bytes() == (tmp / "c9b" / f).read_bytes() for f in files]
    return all(same), ", ".join(f"{f} {'identical' if s else 'DIFFERS'}"
                                for f, s in zip(files, same))


CRITERIA = [
    ("C1 central inequality", check_c1, True),
    ("C2 Hermitian L", check_c2, True),
    ("C3 Ito expansion identity", check_c3, False),
    ("C4 Abe-term inequality", check_c4, False),
    ("C5 commuting reduction", check_c5, False),
    ("C6 ensemble vs master equation", check_c6, False),
    ("C7 master-equation exactness", check_c7, False),
    ("C8 per-step entropy consistency", check_c8, False),
    ("C9 reproducibility", check_c9, True),
]


@pytest.mark.slow
@pytest.mark.parametrize("label,check,needs_tmp", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(label, check, needs_tmp, tmp_path, capsys):
    ok, detail = check(tmp_path) if needs_tmp else check()
    assert report(label, ok, detail, capsys), detail


if __name__ == "__main__":
    import tempfile

    results = []
    with tempfile.TemporaryDirectory() as d:
        for label, check, needs_tmp in CRITERIA:
            ok, detail = check(Path(d)) if needs_tmp else check()
            results.append(report(label, ok, detail))
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
