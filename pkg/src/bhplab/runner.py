"""Experiment orchestration over refinement levels and deterministic report emission.

Every run writes ``report.json`` and ``results.csv`` (plus ``layers.csv``
for certification runs).  CSV files start with one ``# generated ...``
line; everything below it depends only on the config and seed.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field, is_dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
from scipy.interpolate import NearestNDInterpolator

from . import __version__
from .barriers import (BarrierSpec, annulus_epsilon, choose_q, disk_domain, exponential_rate,
                       verify_sign)
from .certify import (HYPOTHESIS_FAILED, TABLE_HEADER, HypothesisNotMet, TheoremConfig,
                      build_domain, run_theorem_experiment, smooth_random_field)
from .config import ConfigError, ExperimentConfig, config_dict, operator_spec
from .estimates import (check_boundary_harnack_homogeneous, check_interior_harnack,
                        measure_growth_lower)
from .geometry import GRAPH, GridSpec, LipschitzGraphDomain, build_graph_domain
from .operators import OperatorSpec
from .solver import DirichletProblem, SolverConfig, solve

log = logging.getLogger(__name__)

REFINEMENT_DRIFT = 0.25


@dataclass
class RunReport:
    config: dict
    experiment: str
    seed: int
    status: str
    passed: bool
    rows: list
    tables: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0
    versions: dict = field(default_factory=dict)
    timestamp: str = ""


def versions() -> dict:
    return {"bhplab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


# --------------------------------------------------------------------------
# shared helpers


def _rhs_range(cfg: ExperimentConfig) -> tuple[float, float]:
    lo_d, hi_d = (-1.0, 1.0) if cfg.experiment == "theorem_nta" else (-1.0, 0.0)
    lo = cfg.rhs.lo if cfg.rhs.lo is not None else lo_d
    hi = cfg.rhs.hi if cfg.rhs.hi is not None else hi_d
    return lo, hi


def _seed(cfg: ExperimentConfig) -> int:
    return cfg.rhs.seed if cfg.rhs.seed is not None else cfg.seed


def make_rhs(cfg: ExperimentConfig, index: int = 0):
    """Right-hand side as a callable ``f(x, y)`` independent of the grid."""
    r = cfg.rhs
    if r.type == "constant":
        return lambda x, y: np.full(np.broadcast(x, y).shape, float(r.value))
    if r.type == "random":
        lo, hi = _rhs_range(cfg)
        return smooth_random_field(_seed(cfg) * 2 + index, lo, hi)
    data = np.loadtxt(cfg.resolve(r.table), delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 3:
        raise ConfigError(f"rhs table {r.table} must have columns x, y, value")
    interp = NearestNDInterpolator(data[:, :2], data[:, 2])
    return lambda x, y: interp(x, y)


def theorem_config(cfg: ExperimentConfig, h: float) -> TheoremConfig:
    s = cfg.schedule
    domain = cfg.domain.type if cfg.domain.type != "mask" else str(cfg.resolve(cfg.domain.mask))
    return TheoremConfig(h=h, op=operator_spec(cfg), domain=domain, L=cfg.domain.L,
                         period=cfg.domain.period, R=cfg.domain.R, f_range=_rhs_range(cfg),
                         seed=_seed(cfg), beta=s.beta, alpha=s.alpha, zeta=s.zeta,
                         c_star=s.c_star, r0=s.r0, first_ratio=s.first_ratio,
                         floor_factor=s.floor_factor, slack=s.slack, max_samples=s.max_samples,
                         tol=cfg.solver.tol)


def _solver_cfg(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(tol=cfg.solver.tol, max_iter=cfg.solver.max_iter)


def _positive_solution(cfg: ExperimentConfig, h: float, f, index: int = 0):
    """Solve with zero graph data and positive cap data; normalise at ``e_n/2``."""
    tc = theorem_config(cfg, h)
    dg = build_domain(tc, h)
    rng = np.random.default_rng([_seed(cfg), index, 11])
    a, b = rng.uniform(-0.3, 0.3, size=2)
    X, Y = dg.xy
    vals = np.where(dg.node_class == GRAPH, 0.0, 1.0 + a * np.cos(np.pi * X) + b * np.sin(np.pi * Y))
    res = solve(DirichletProblem(dg.with_boundary_values(vals), operator_spec(cfg), f),
                _solver_cfg(cfg))
    if not res.converged:
        raise RuntimeError(f"solve did not converge at h={h}: residual {res.residual_inf:.3e}")
    node = dg.spec.nearest_index((0.0, 0.5))
    return dg, res.u / res.u[node]


def _drift(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(v)) / np.abs(v[:-1])))


# --------------------------------------------------------------------------
# experiments: each returns (rows, tables, passed, details)


def slab_solution(p: float):
    """``Δ_p u = -1`` on ``0 < y < 1`` with zero data: the closed-form profile."""
    e = p / (p - 1)
    return lambda x, y: (p - 1) / p * (0.5 ** e - np.abs(y - 0.5) ** e)


def exp_solver_validate(cfg: ExperimentConfig):
    op = operator_spec(cfg)
    rows = []
    for h in cfg.levels():
        dg = build_graph_domain(LipschitzGraphDomain.flat(), GridSpec.centered(h, 1.0))
        X, Y = dg.xy
        if op.kind == "pucci":
            if op.M != 0:
                raise ConfigError("solver_validate for Pucci needs M = 0 (linear oracle)")
            exact = Y.copy()
            f = 0.0
        else:
            p = op.p if op.kind == "plaplace" else 2.0
            exact = slab_solution(p)(X, Y)
            f = -1.0
        prob = DirichletProblem(dg.with_boundary_values(exact), op, f)
        res = solve(prob, _solver_cfg(cfg))
        err = float(np.max(np.abs(res.u - exact)[dg.interior]))
        rows.append({"h": h, "sup_error": err, "residual": res.residual_inf,
                     "iterations": res.iterations, "converged": res.converged,
                     "passed": bool(res.converged and err <= 5 * h)})
    errs = [r["sup_error"] for r in rows]
    decreasing = all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(errs, errs[1:]))
    return rows, {}, all(r["passed"] for r in rows) and decreasing, {"decreasing": decreasing}


def barrier_suite(op: OperatorSpec, h: float, sample_step: float) -> list[dict]:
    """Quadratic, exponential and annulus barriers verified on one grid."""
    dg = disk_domain(h)
    lam, Lam, M = (1.0, 1.0, 0.0) if op.kind != "pucci" else (op.lam, op.Lam, op.M)
    plus = OperatorSpec("pucci", lam=lam, Lam=Lam, M=M, pucci_sign="plus")
    minus = OperatorSpec("pucci", lam=lam, Lam=Lam, M=M, pucci_sign="minus")
    tiny = 1e-12
    quad = BarrierSpec("quadratic", R=0.5, lam=lam)
    expo = BarrierSpec("exponential", S=exponential_rate(M, lam))
    q = choose_q(minus, h)
    ann = BarrierSpec("annulus", q=q, kappa=1 / 8, center=(0.0, 0.5))
    eps1 = annulus_epsilon(ann)

    def ann_region(x, y):
        r = np.hypot(x, y - 0.5)
        return (r >= 1 / 8 - tiny) & (r <= 3 / 8 + tiny)

    checks = [
        ("quadratic", verify_sign(quad, plus, dg, lambda x, y: x * x + y * y <= 0.25 + tiny,
                                  "<= -1", sample_step=sample_step)),
        ("exponential", verify_sign(expo, plus, dg,
                                    lambda x, y: (np.abs(x) <= 0.5 + tiny) & (np.abs(y) <= 0.5 + tiny),
                                    "<= -1", sample_step=sample_step)),
        ("annulus", verify_sign(ann, minus, dg, ann_region, ">= eps", eps=eps1,
                                sample_step=sample_step)),
    ]
    return [{"barrier": name, "h": h, "passed": rep.passed, "margin": rep.margin,
             "slack": rep.slack, "certified_margin": rep.certified_margin,
             "roundoff": rep.roundoff, "worst_x": rep.worst_point[0],
             "worst_y": rep.worst_point[1], "q": q if name == "annulus" else ""}
            for name, rep in checks]


def margins_nondecreasing(rows: list[dict]) -> bool:
    by = {}
    for r in rows:
        by.setdefault(r["barrier"], []).append(r)
    for seq in by.values():
        seq.sort(key=lambda r: -r["h"])
        for a, b in zip(seq, seq[1:]):
            if b["certified_margin"] < a["certified_margin"] - (a["roundoff"] + b["roundoff"]):
                return False
    return True


def exp_barrier_verify(cfg: ExperimentConfig):
    op = operator_spec(cfg)
    rows = []
    for h in cfg.levels():
        rows.extend(barrier_suite(op, h, cfg.grid.h))
    mono = margins_nondecreasing(rows)
    return rows, {}, all(r["passed"] for r in rows) and mono, {"margins_nondecreasing": mono}


def exp_growth(cfg: ExperimentConfig):
    f = make_rhs(cfg)
    beta = cfg.schedule.beta if cfg.schedule.beta is not None else 1.5
    rows = []
    for h in cfg.levels():
        dg, u = _positive_solution(cfg, h, f)
        window = dg.ball_mask((0.0, 0.0), 0.25)
        fit = measure_growth_lower(u, dg, window, beta_target=beta, d_max=1 / 8)
        fit4 = measure_growth_lower(u, dg, window, beta_target=beta, d_min=4 * h, d_max=1 / 8)
        rows.append({"h": h, "c_fit": fit.c_fit, "beta_fit": fit.beta_fit,
                     "c_fit_4h": fit4.c_fit, "n_nodes": fit.n_nodes,
                     "cutoff_change": abs(fit4.c_fit - fit.c_fit) / fit.c_fit})
    drift = _drift([r["c_fit"] for r in rows])
    ok = all(r["c_fit"] > 0 for r in rows) and drift <= REFINEMENT_DRIFT
    return rows, {}, ok, {"c_fit_drift": drift}


def exp_harnack(cfg: ExperimentConfig):
    f = make_rhs(cfg)
    rows = []
    balls = [((0.0, 0.5), 1 / 8), ((-0.2, 0.55), 1 / 8), ((0.2, 0.55), 1 / 8)]
    for h in cfg.levels():
        dg, u = _positive_solution(cfg, h, f)
        rep = check_interior_harnack(u, dg, balls)
        zero = lambda x, y: np.zeros(np.broadcast(x, y).shape)
        _, v1 = _positive_solution(cfg, h, zero, index=1)
        _, v2 = _positive_solution(cfg, h, zero, index=2)
        bh = check_boundary_harnack_homogeneous(v1, v2, dg, (0.0, 0.0), 0.5)
        rows.append({"h": h, "C2_fit": rep.C2_fit, "C3_fit": bh.C3_fit,
                     "alpha_fit": bh.alpha_fit, "samples": bh.samples})
    drift = _drift([r["C2_fit"] for r in rows])
    ok = drift <= REFINEMENT_DRIFT and all(r["alpha_fit"] > 0 for r in rows)
    return rows, {}, ok, {"C2_drift": drift}


def exp_theorem(cfg: ExperimentConfig, which: str):
    rows, layer_rows = [], []
    status = "pass"
    for h in cfg.levels():
        tc = theorem_config(cfg, h)
        try:
            res = run_theorem_experiment(which, tc)
        except HypothesisNotMet as exc:
            rows.append({"h": h, "status": HYPOTHESIS_FAILED, "detail": exc.detail})
            status = HYPOTHESIS_FAILED
            break
        c = res.certificate
        rows.append({"h": h, "status": res.status, "k_max": c.schedule.k_max,
                     "zeta": c.schedule.zeta, "beta": c.schedule.beta, "M0": c.M0,
                     "C_star_measured": c.C_star_measured, "C_star_bound": c.C_star_bound,
                     "A": c.A, "C3": c.C3, "decay_exponent": c.decay_exponent})
        for row in c.table():
            layer_rows.append((h,) + tuple(row))
        if not res.passed:
            status = "fail"
    tables = {"layers": (("h",) + TABLE_HEADER, layer_rows)}
    details = {}
    if status == "pass":
        drift = _drift([r["C_star_measured"] for r in rows])
        decay_ok = all(np.isfinite(r["decay_exponent"]) and r["decay_exponent"] > 0 for r in rows)
        details = {"C_star_drift": drift, "decay_ok": decay_ok}
        if drift > REFINEMENT_DRIFT or not decay_ok:
            status = "fail"
    return rows, tables, status == "pass", dict(details, status=status)


EXPERIMENT_FUNCS = {
    "solver_validate": exp_solver_validate,
    "barrier_verify": exp_barrier_verify,
    "growth": exp_growth,
    "harnack": exp_harnack,
    "bhp_certify": lambda cfg: exp_theorem(
        cfg, "nta" if cfg.domain.type in ("l_shape", "slit_square", "mask") else "flmain"),
    "theorem_flmain": lambda cfg: exp_theorem(cfg, "flmain"),
    "theorem_flpmain": lambda cfg: exp_theorem(cfg, "flpmain"),
    "theorem_nta": lambda cfg: exp_theorem(cfg, "nta"),
}


# --------------------------------------------------------------------------
# running and writing


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None, levels: int | None = None,
        seed: int | None = None) -> RunReport:
    """Execute the configured experiment and write its report files."""
    if levels is not None:
        cfg = replace(cfg, grid=replace(cfg.grid, levels=int(levels)))
    if seed is not None:
        cfg = replace(cfg, seed=int(seed), rhs=replace(cfg.rhs, seed=int(seed)))
    out = Path(out_dir) if out_dir is not None else cfg.resolve(cfg.output.path)
    t0 = time.perf_counter()
    errors = []
    try:
        rows, tables, passed, details = EXPERIMENT_FUNCS[cfg.experiment](cfg)
        status = details.pop("status", "pass" if passed else "fail")
    except Exception as exc:  # captured into the report; the exit status carries it
        log.exception("experiment failed")
        rows, tables, passed, details = [], {}, False, {}
        status = "error"
        errors.append(f"{type(exc).__name__}: {exc}")
    report = RunReport(config_dict(cfg), cfg.experiment, _seed(cfg), status, bool(passed), rows,
                       tables, errors, details, time.perf_counter() - t0, versions(),
                       datetime.now(timezone.utc).isoformat(timespec="seconds"))
    write_report(report, out)
    return report


def error_report(message: str, out_dir: str | Path, config_path: str = "") -> RunReport:
    report = RunReport({"path": config_path}, "", 0, "error", False,
                       [{"error": message}], errors=[message], versions=versions(),
                       timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    write_report(report, Path(out_dir))
    return report


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows, stamp: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# generated {stamp} by bhp-lab {__version__}\r\n")
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(v):
    if is_dataclass(v):
        return _jsonable(asdict(v))
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if np.isfinite(f) else str(f)
    return v


def write_report(report: RunReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    body = _jsonable(asdict(report))
    (out / "report.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    keys = []
    for r in report.rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    write_csv(out / "results.csv", keys, [[r.get(k, "") for k in keys] for r in report.rows],
              report.timestamp)
    for name, (header, rows) in report.tables.items():
        write_csv(out / f"{name}.csv", header, rows, report.timestamp)


__all__ = ["RunReport", "run", "write_report", "error_report", "barrier_suite",
           "margins_nondecreasing", "slab_solution", "make_rhs", "theorem_config"]
