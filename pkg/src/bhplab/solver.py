"""Discrete Dirichlet problems ``F(D²u, ∇u) = f`` in the interior, ``u = g`` on the boundary.

* Laplace: one sparse direct solve of the five-point system.
* Pucci: policy (Howard) iteration.  Each step freezes the optimal frame,
  active directions and gradient direction, and solves the resulting linear
  monotone system exactly; it stops when the policy repeats or the
  residual reaches the tolerance.
* p-Laplace: damped Picard (Kačanov) iteration on the frozen triangle
  coefficients, with continuation in the regularisation ``δ`` from ``8δ``
  down to the target.  Each step is safeguarded so that the regularised
  energy never increases.

Residuals are sup norms of ``F_h(u) - f`` over interior nodes.  A solve is
declared converged when the residual is below ``tol`` plus the round-off
floor ``100 * eps * max|u| / h²`` of the discrete operator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import spsolve

from .geometry import CLASS_NAMES, DomainGrid, localize
from .operators import (InteriorView, OperatorSpec, apply_operator, assemble,
                        laplace_weights, plaplace_energy, plaplace_weights, pucci_policy,
                        pucci_policy_weights)

log = logging.getLogger(__name__)

DEFAULT_TOL = {"laplace": 1e-10, "pucci": 1e-8, "plaplace": 1e-8}
PLAPLACE_EXTENSION_TOL = 1e-6


@dataclass
class SolverConfig:
    tol: float | None = None
    max_iter: int = 100_000
    relaxation: float | None = None
    continuation_steps: int = 3

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.relaxation is not None and not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")

    def tol_for(self, kind: str) -> float:
        return DEFAULT_TOL[kind] if self.tol is None else self.tol


@dataclass
class DirichletProblem:
    dg: DomainGrid
    spec: OperatorSpec
    f: np.ndarray

    def __post_init__(self):
        f = self.f
        if callable(f):
            f = f(*self.dg.xy)
        self.f = np.broadcast_to(np.asarray(f, dtype=float), self.dg.shape).copy()
        if not np.all(np.isfinite(self.f[self.dg.interior])):
            raise ValueError("right-hand side must be finite on the interior")
        if not np.all(np.isfinite(self.dg.boundary_values[self.dg.boundary])):
            raise ValueError("boundary values missing on some boundary nodes")


@dataclass
class SolveResult:
    u: np.ndarray
    residual_inf: float
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _roundoff_floor(u: np.ndarray, dg: DomainGrid) -> float:
    umax = float(np.nanmax(np.abs(u[dg.interior | dg.boundary])))
    return 100 * np.finfo(float).eps * max(umax, 1.0) / dg.h ** 2


def _initial_field(dg: DomainGrid) -> np.ndarray:
    u = np.full(dg.shape, np.nan)
    b = dg.boundary
    u[b] = dg.boundary_values[b]
    u[dg.interior] = 0.0
    return u


def _linear_solve(W: dict, view: InteriorView, u: np.ndarray, f: np.ndarray) -> np.ndarray:
    A, b = assemble(W, view, u)
    x = spsolve(A.tocsc(), f.ravel()[view.flat] - b)
    out = u.copy()
    out.flat[view.flat] = x
    return out


def residual(spec: OperatorSpec, u: np.ndarray, f: np.ndarray, dg: DomainGrid) -> float:
    r = apply_operator(spec, u, dg) - f
    return float(np.max(np.abs(r[dg.interior]))) if dg.interior.any() else 0.0


def solve(prob: DirichletProblem, cfg: SolverConfig | None = None) -> SolveResult:
    """Solve the discrete Dirichlet problem; never fails silently.

    Non-convergence returns ``converged=False`` with diagnostics.
    """
    cfg = cfg or SolverConfig()
    dg, spec, f = prob.dg, prob.spec, prob.f
    view = InteriorView(dg)
    u = _initial_field(dg)
    if view.n == 0:
        return SolveResult(u, 0.0, 0, True)
    if spec.kind == "laplace":
        return _finish(spec, _linear_solve(laplace_weights(view), view, u, f), prob, cfg, 1, {})
    if spec.kind == "pucci":
        return _solve_pucci(prob, cfg, view, u)
    return _solve_plaplace(prob, cfg, view, u)


def _finish(spec, u, prob, cfg, iterations, diag) -> SolveResult:
    res = residual(spec, u, prob.f, prob.dg)
    floor = _roundoff_floor(u, prob.dg)
    diag = dict(diag, roundoff_floor=floor)
    ok = res <= cfg.tol_for(spec.kind) + floor
    if not ok:
        log.warning("%s solve did not converge: residual %.3e after %d iterations",
                    spec.kind, res, iterations)
    return SolveResult(u, res, iterations, bool(ok), diag)


def _solve_pucci(prob, cfg, view, u) -> SolveResult:
    spec, f = prob.spec, prob.f
    u = _linear_solve(laplace_weights(view, spec.lam), view, u, f)
    policy = None
    max_iter = min(cfg.max_iter, 500)
    tol = cfg.tol_for("pucci")
    for it in range(1, max_iter + 1):
        new = pucci_policy(spec, u, view)
        if new.same_as(policy) or (
                residual(spec, u, f, prob.dg) <= tol + _roundoff_floor(u, prob.dg)):
            return _finish(spec, u, prob, cfg, it, {"policy_iterations": it})
        policy = new
        u = _linear_solve(pucci_policy_weights(spec, policy, view), view, u, f)
    return _finish(spec, u, prob, cfg, max_iter, {"policy_iterations": max_iter,
                                                  "reason": "policy did not settle"})


def _solve_plaplace(prob, cfg, view, u) -> SolveResult:
    spec, f, dg = prob.spec, prob.f, prob.dg
    h, p = dg.h, spec.p
    target = spec.delta(h)
    u = _linear_solve(laplace_weights(view), view, u, f)
    if p == 2:
        return _finish(spec, u, prob, cfg, 1, {"energies": []})
    base = target if target > 0 else h
    deltas = [base * 2.0 ** k for k in range(cfg.continuation_steps, 0, -1)] + [target]
    omega0 = cfg.relaxation if cfg.relaxation is not None else 2.0 / p
    tol = cfg.tol_for("plaplace")
    energies = []
    total = 0
    max_iter = min(cfg.max_iter, 2000)
    res = np.inf
    for stage, delta in enumerate(deltas):
        final = stage == len(deltas) - 1
        stage_spec = spec.with_(reg_delta=delta)
        stage_tol = tol if final else max(tol, 1e-4 / h)
        E = plaplace_energy(u, f, dg, p, delta)
        energies.append(E)
        while total < max_iter:
            res = residual(stage_spec, u, f, dg)
            if res <= stage_tol + _roundoff_floor(u, dg):
                break
            W = plaplace_weights(u, dg, p, delta, view)
            cand = _linear_solve(W, view, u, f)
            omega = omega0
            for _ in range(30):
                trial = u + omega * (cand - u)
                E_trial = plaplace_energy(trial, f, dg, p, delta)
                if E_trial <= E + 1e-13 * abs(E):
                    break
                omega /= 2
            u, E = trial, E_trial
            energies.append(E)
            total += 1
        if total >= max_iter:
            break
    return _finish(spec, u, prob, cfg, total, {"energies": energies, "deltas": deltas})


# --------------------------------------------------------------------------
# property checks


@dataclass
class ComparisonReport:
    max_excess: float
    tolerance: float
    passed: bool


def _first_bad(mask: np.ndarray) -> tuple[int, int]:
    k = int(np.flatnonzero(mask.ravel())[0])
    return divmod(k, mask.shape[1])


def comparison_check(p1: DirichletProblem, p2: DirichletProblem,
                     cfg: SolverConfig | None = None) -> ComparisonReport:
    """``f1 >= f2`` and ``g1 <= g2`` must give ``u1 <= u2``."""
    cfg = cfg or SolverConfig()
    if p1.dg.shape != p2.dg.shape or not np.array_equal(p1.dg.node_class, p2.dg.node_class):
        raise ValueError("comparison requires a shared domain grid")
    if p1.spec != p2.spec:
        raise ValueError("comparison requires a shared operator")
    inter, bnd = p1.dg.interior, p1.dg.boundary
    bad_f = inter & (p1.f < p2.f)
    if bad_f.any():
        raise ValueError(f"precondition f1 >= f2 violated at node {_first_bad(bad_f)}")
    bad_g = bnd & (p1.dg.boundary_values > p2.dg.boundary_values)
    if bad_g.any():
        raise ValueError(f"precondition g1 <= g2 violated at node {_first_bad(bad_g)}")
    r1, r2 = solve(p1, cfg), solve(p2, cfg)
    excess = float(np.max((r1.u - r2.u)[inter]))
    tol = 2 * cfg.tol_for(p1.spec.kind)
    return ComparisonReport(excess, tol, excess <= tol)


@dataclass
class ExtensionReport:
    sup_difference: float
    tolerance: float
    passed: bool


def extension_check(dg: DomainGrid, sub_center, sub_r: float, prob: DirichletProblem,
                    cfg: SolverConfig | None = None) -> ExtensionReport:
    """Solve on ``dg``, re-solve on ``dg ∩ B_r`` with the restricted data, compare."""
    cfg = cfg or SolverConfig()
    sub = localize(dg, sub_center, sub_r)
    big = solve(prob, cfg)
    u_sub = dg.restrict(big.u, sub)
    child = DirichletProblem(sub.with_boundary_values(u_sub), prob.spec, dg.restrict(prob.f, sub))
    small = solve(child, cfg)
    diff = float(np.max(np.abs(small.u - u_sub)[sub.interior]))
    tol = (PLAPLACE_EXTENSION_TOL if prob.spec.kind == "plaplace"
           else 2 * cfg.tol_for(prob.spec.kind))
    return ExtensionReport(diff, tol, diff <= tol)


def dump_csv(u: np.ndarray, dg: DomainGrid, path: str | Path) -> None:
    """Write ``x, y, value, node_class`` rows for every non-exterior node."""
    X, Y = dg.xy
    keep = dg.node_class != 0
    with open(path, "w") as fh:
        fh.write("x,y,value,node_class\n")
        for x, y, v, c in zip(X[keep], Y[keep], u[keep], dg.node_class[keep]):
            fh.write(f"{x:.17g},{y:.17g},{v:.17g},{CLASS_NAMES[int(c)]}\n")
