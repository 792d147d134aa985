"""Command-line driver: ensemble runs and the algebraic property suite.

Exit codes:
    0  success
    2  configuration / usage error
    3  inequality violation (some verdict below -3 combined standard errors)
    4  at least one trajectory aborted by the sanitizer (takes precedence over 3)
    5  property-suite failure
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .bounds import (
    abe_term_check,
    inequality_timeseries,
    ito_identity_check,
)
from .errors import ConfigError
from .integrators import STOCHASTIC_DT_LIMIT, SanitizePolicy, TimeGrid, simulate_ensemble
from .models import build_model, model_names
from .statecore import (
    SpectralFloor,
    generalized_variance,
    make_density,
    maximally_mixed,
    random_density,
    random_hermitian,
    random_operator,
    variance,
)

log = logging.getLogger("sme_entropy")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3
EXIT_ABORT = 4
EXIT_PROPERTY = 5

ENV_OUTPUT_DIR = "SME_ENTROPY_OUTPUT_DIR"
EMIT_CHOICES = ("timeseries", "verdicts", "summary")
TIMESERIES_COLUMNS = (
    "t", "mean_entropy", "entropy_stderr", "lhs_rate", "rhs_mean", "rhs_stderr",
    "commutator_term", "var_term", "genvar_term", "margin_sigmas", "floored_fraction",
)

ITO_RESIDUAL_MAX = 1e-10
ABE_SLACK_MIN = -1e-9
COMMUTING_GAP_MAX = 1e-10


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits; non-finite -> null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


@dataclass
class RunConfig:
    model_name: str = "qubit_decay_homodyne"
    model_params: Dict[str, float] = field(default_factory=dict)
    trajectories: int = 4000
    dt: float = 1e-3
    t_final: float = 1.0
    base_seed: int = 0
    window: int = 10
    floor_epsilon: float = 1e-12
    output_dir: Optional[str] = None
    emit: List[str] = field(default_factory=lambda: list(EMIT_CHOICES))
    initial_state: Optional[object] = None
    allow_large_dt: bool = False
    sanitize: Dict[str, object] = field(default_factory=dict)

    def validate(self):
        if self.model_name not in model_names():
            raise ConfigError(f"model_name: unknown model {self.model_name!r}; "
                              f"available: {', '.join(model_names())}")
        if not isinstance(self.model_params, dict):
            raise ConfigError("model_params: must be an object")
        _check_int("trajectories", self.trajectories, 1)
        _check_int("window", self.window, 1)
        _check_int("base_seed", self.base_seed, 0)
        for name in ("dt", "t_final", "floor_epsilon"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name}: must be a finite number, got {v!r}")
        if not (0.0 < self.dt <= self.t_final):
            raise ConfigError(f"dt: need 0 < dt <= t_final, got dt={self.dt}, "
                              f"t_final={self.t_final}")
        if self.dt > STOCHASTIC_DT_LIMIT and not self.allow_large_dt:
            raise ConfigError(f"dt: {self.dt} exceeds {STOCHASTIC_DT_LIMIT} for a stochastic "
                              "run; set allow_large_dt to override")
        try:
            SpectralFloor(self.floor_epsilon)
        except ValueError as exc:
            raise ConfigError(f"floor_epsilon: {exc}") from None
        bad = [e for e in self.emit if e not in EMIT_CHOICES]
        if bad or not isinstance(self.emit, list):
            raise ConfigError(f"emit: entries must be among {EMIT_CHOICES}, got {self.emit!r}")
        known = {f.name for f in fields(SanitizePolicy)}
        extra = set(self.sanitize) - known
        if extra:
            raise ConfigError(f"sanitize: unknown keys {sorted(extra)}")
        return self

    def to_dict(self):
        return asdict(self)


def _check_int(name, v, lo):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{name}: must be an integer >= {lo}, got {v!r}")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{source}: unknown field(s) {', '.join(unknown)}")
    try:
        return RunConfig(**raw).validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def _initial_state(cfg: RunConfig, entry):
    spec = cfg.initial_state
    d = entry.spec.dim
    if spec in (None, "default"):
        return entry.default_initial_state
    if spec == "maximally_mixed":
        return maximally_mixed(d)
    if isinstance(spec, dict) and "real" in spec:
        re_ = np.asarray(spec["real"], dtype=float)
        im_ = np.asarray(spec.get("imag", np.zeros_like(re_)), dtype=float)
        try:
            rho = make_density(re_ + 1j * im_)
        except ValueError as exc:
            raise ConfigError(f"initial_state: {exc}") from None
        if rho.dim != d:
            raise ConfigError(f"initial_state: dimension {rho.dim}, model needs {d}")
        return rho
    raise ConfigError("initial_state: expected 'default', 'maximally_mixed' or "
                      "{'real': [[...]], 'imag': [[...]]}")


@dataclass
class RunSummary:
    config: dict
    n_trajectories: int
    n_aborted: int
    n_verdicts: int
    n_violations: int
    min_margin_sigmas: float
    floored_fraction: float
    max_negativity: float
    term_averages: Dict[str, float]
    truncation: Optional[dict]
    exit_code: int
    wall_time: float = 0.0
    backend: str = ""

    def to_dict(self, include_timing: bool = True):
        d = asdict(self)
        if not include_timing:
            d.pop("wall_time")
            d.pop("backend")
        return d


def run(config: RunConfig, output_dir=None, backend=None) -> RunSummary:
    """Simulate the ensemble, evaluate the bound and write the requested files.

    ``output_dir`` precedence: argument, ``SME_ENTROPY_OUTPUT_DIR``,
    ``config.output_dir``, then ``runs/<model_name>``.
    """
    config.validate()
    started = time.perf_counter()
    entry = build_model(config.model_name, config.model_params)
    grid = TimeGrid.spanning(config.t_final, config.dt, allow_large_dt=config.allow_large_dt)
    floor = SpectralFloor(config.floor_epsilon)
    policy = SanitizePolicy(**config.sanitize)
    rho0 = _initial_state(config, entry)
    name = kernels.resolve_backend(backend, entry.spec.dim)

    ens = simulate_ensemble(entry.spec, grid, rho0, config.trajectories, config.base_seed,
                            policy, floor, stride=config.window, backend=name)
    completed = ens.completed()
    if len(completed) >= 2:
        verdicts, rows = inequality_timeseries(completed, entry.spec, floor, config.window)
    else:
        verdicts, rows = [], []

    terms = {k: float(np.mean([r[k] for r in rows])) if rows else float("nan")
             for k in ("commutator_term", "var_term", "genvar_term", "rhs_mean")}
    terms["rhs"] = terms.pop("rhs_mean")
    margins = [v.margin_sigmas for v in verdicts]
    n_viol = sum(v.violated for v in verdicts)

    truncation = None
    if entry.truncation_level is not None and len(completed):
        lvl = entry.truncation_level
        pop = completed.states[:, :, lvl, lvl].real.mean(axis=0)
        worst = float(np.max(pop))
        truncation = {"level": lvl, "max_population": worst, "flagged": worst >= 1e-3}

    if ens.n_aborted:
        code = EXIT_ABORT
    elif n_viol:
        code = EXIT_VIOLATION
    else:
        code = EXIT_OK
    summary = RunSummary(
        config=config.to_dict(),
        n_trajectories=len(ens),
        n_aborted=ens.n_aborted,
        n_verdicts=len(verdicts),
        n_violations=int(n_viol),
        min_margin_sigmas=float(min(margins)) if margins else float("nan"),
        floored_fraction=float(np.mean([r["floored_fraction"] for r in rows])) if rows else 0.0,
        max_negativity=float(np.max(ens.negativity)),
        term_averages=terms,
        truncation=truncation,
        exit_code=code,
        backend=name,
    )

    out = Path(output_dir or os.environ.get(ENV_OUTPUT_DIR) or config.output_dir
               or Path("runs") / config.model_name)
    out.mkdir(parents=True, exist_ok=True)
    if "timeseries" in config.emit:
        (out / "timeseries.csv").write_text(timeseries_csv(rows))
    if "verdicts" in config.emit:
        (out / "verdicts.json").write_text(dumps([v.to_dict() for v in verdicts]) + "\n")
    summary.wall_time = time.perf_counter() - started
    log.info("%s: %d trajectories on %s in %.2fs, %d/%d violations, min margin %.2f sigma",
             config.model_name, len(ens), name, summary.wall_time, n_viol, len(verdicts),
             summary.min_margin_sigmas)
    if "summary" in config.emit:
        # wall time and backend are kept out of the file so reruns are byte-identical
        (out / "summary.json").write_text(dumps(summary.to_dict(include_timing=False)) + "\n")
    return summary


def timeseries_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMESERIES_COLUMNS)
    for r in rows:
        w.writerow([fmt_float(r[c]) for c in TIMESERIES_COLUMNS])
    return buf.getvalue()


@dataclass
class PropertySummary:
    dims: List[int]
    samples: int
    seed: int
    max_ito_residual: float
    min_abe_slack: float
    min_abe_slack_hermitian: float
    max_commuting_gap: float
    min_genvar: float
    failures: List[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def run_property_suite(dims: Sequence[int], samples: int, seed: int = 0) -> PropertySummary:
    """Sweep the algebraic identities and inequalities on random inputs.

    For each dimension draws ``samples`` cases of: the Ito expansion identity
    (random full-rank state, random Hermitian M), the Abe-term slack (half
    Hermitian, half general A), and the commuting reduction of the
    generalized variance (simultaneously diagonal state and observable).
    """
    dims = list(dims)
    if not dims or any(d not in (2, 3, 4, 5) for d in dims):
        raise ConfigError(f"dims must be a non-empty subset of {{2,3,4,5}}, got {dims}")
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 100:
        raise ConfigError(f"samples must be an integer >= 100, got {samples!r}")
    rng = np.random.default_rng(seed)
    ito, abe, abe_h, gap, gmin = 0.0, np.inf, np.inf, 0.0, np.inf
    for d in dims:
        for i in range(samples):
            rho = random_density(d, rng, mix=0.05)
            m = random_hermitian(d, rng)
            ito = max(ito, ito_identity_check(rho, m))
            gmin = min(gmin, generalized_variance(m, rho))

            hermitian = i % 2 == 0
            a = random_hermitian(d, rng) if hermitian else random_operator(d, rng)
            s = abe_term_check(random_density(d, rng, mix=1e-3), a)
            abe = min(abe, s)
            if hermitian:
                abe_h = min(abe_h, s)

            p = rng.dirichlet(np.ones(d)) * (1 - 1e-3) + 1e-3 / d
            rho_c = make_density(np.diag(p))
            m_c = np.diag(rng.standard_normal(d)).astype(complex)
            gap = max(gap, abs(generalized_variance(m_c, rho_c) - variance(m_c, rho_c)))
    failures = []
    if ito > ITO_RESIDUAL_MAX:
        failures.append(f"ito identity residual {ito:.3e} > {ITO_RESIDUAL_MAX:g}")
    if abe < ABE_SLACK_MIN:
        failures.append(f"abe slack {abe:.3e} < {ABE_SLACK_MIN:g}")
    if gap > COMMUTING_GAP_MAX:
        failures.append(f"commuting gap {gap:.3e} > {COMMUTING_GAP_MAX:g}")
    return PropertySummary(dims, samples, seed, float(ito), float(abe), float(abe_h),
                           float(gap), float(gmin), failures)


def _parse_dims(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sme-entropy",
        description="Simulate monitored open quantum systems and test the entropy-rate bound",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate an ensemble and verify the bound")
    p_run.add_argument("--config", required=True, help="JSON run configuration")
    p_run.add_argument("--trajectories", type=int, help="override config trajectories")
    p_run.add_argument("--seed", type=int, help="override config base_seed")
    p_run.add_argument("--output", help=f"output directory (beats ${ENV_OUTPUT_DIR})")

    p_props = sub.add_parser("props", help="run the algebraic property suite")
    p_props.add_argument("--dims", type=_parse_dims, default=[2, 3])
    p_props.add_argument("--samples", type=int, default=1000)
    p_props.add_argument("--seed", type=int, default=0)
    p_props.add_argument("--output", help="directory for props_summary.json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.trajectories is not None:
                cfg.trajectories = args.trajectories
            if args.seed is not None:
                cfg.base_seed = args.seed
            cfg.validate()
            summary = run(cfg, output_dir=args.output)
            print(dumps(summary.to_dict()))
            return summary.exit_code
        summary = run_property_suite(args.dims, args.samples, args.seed)
        text = dumps(summary.to_dict()) + "\n"
        if args.output:
            Path(args.output).mkdir(parents=True, exist_ok=True)
            (Path(args.output) / "props_summary.json").write_text(text)
        sys.stdout.write(text)
        return EXIT_OK if summary.passed else EXIT_PROPERTY
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
