"""Explicit barrier functions and discrete verification of their sign conditions.

Barriers (two dimensions, ``n = 2``):

* quadratic   ``G(x) = R²/(λn) (1 - |x - c|²/R²)``
* exponential ``G(x) = e^{2S} - e^{S(x₁ + 1)}``
* radial      ``φ(x) = |x - c|^{-q}``
* annulus     ``h(x) = c_level (φ(x - c) - (3/8)^{-q}) / (κ^{-q} - (3/8)^{-q})``

Radial Hessian of ``r^{-q}``: radial eigenvalue ``q(q+1) r^{-q-2}`` and
tangential eigenvalue ``-q r^{-q-2}`` (``n - 1`` times).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import DomainGrid, GridSpec, MaskDomain, _classify, build_mask_domain
from .operators import OperatorSpec, apply_operator

N_DIM = 2
OUTER = 3 / 8
BARRIER_KINDS = ("quadratic", "exponential", "radial", "annulus")
TARGETS = ("<= -1", ">= 1", ">= eps")


@dataclass(frozen=True)
class BarrierSpec:
    kind: str
    q: float = 3.0
    S: float = 1.0
    kappa: float = 0.125
    R: float = 0.5
    center: tuple = (0.0, 0.0)
    c_level: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in BARRIER_KINDS:
            raise ValueError(f"unknown barrier kind {self.kind!r}")
        if self.kind in ("radial", "annulus") and not self.q > 0:
            raise ValueError("q must be positive")
        if self.kind == "exponential" and not self.S >= 0:
            raise ValueError("S must be non-negative")
        if self.kind == "annulus" and not 0 < self.kappa < OUTER:
            raise ValueError("kappa must lie in (0, 3/8)")
        if self.kind == "quadratic" and not (self.R > 0 and self.lam > 0):
            raise ValueError("R and lam must be positive")


def exponential_rate(M: float, lam: float) -> float:
    """``S = max{2M/λ, 1}``."""
    return max(2 * M / lam, 1.0)


def _radius(spec: BarrierSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.hypot(x[..., 0] - spec.center[0], x[..., 1] - spec.center[1])


def eval_quadratic(spec: BarrierSpec, x) -> np.ndarray:
    r = _radius(spec, x)
    return spec.R ** 2 / (spec.lam * N_DIM) * (1 - r ** 2 / spec.R ** 2)


def eval_exponential(spec: BarrierSpec, x) -> np.ndarray:
    x1 = np.asarray(x, dtype=float)[..., 0]
    return np.exp(2 * spec.S) - np.exp(spec.S * (x1 + 1))


def eval_radial(spec: BarrierSpec, x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return _radius(spec, x) ** (-spec.q)


def eval_annulus(spec: BarrierSpec, x) -> np.ndarray:
    q = spec.q
    with np.errstate(divide="ignore"):
        phi = _radius(spec, x) ** (-q)
    return spec.c_level * (phi - OUTER ** (-q)) / (spec.kappa ** (-q) - OUTER ** (-q))


def annulus_epsilon(spec: BarrierSpec) -> float:
    """``ε₁ = c / (κ^{-q} - (3/8)^{-q})``, the sign the annulus barrier must beat."""
    return spec.c_level / (spec.kappa ** (-spec.q) - OUTER ** (-spec.q))


def evaluate(spec: BarrierSpec, x) -> np.ndarray:
    return {"quadratic": eval_quadratic, "exponential": eval_exponential,
            "radial": eval_radial, "annulus": eval_annulus}[spec.kind](spec, x)


# --------------------------------------------------------------------------
# exponent selection


def radial_operator_value(op: OperatorSpec, q: float, r: np.ndarray) -> np.ndarray:
    """Exact ``F(D²φ, ∇φ)`` for ``φ = r^{-q}`` in two dimensions."""
    r = np.asarray(r, dtype=float)
    if op.kind == "plaplace":
        p = op.p
        return q ** (p - 1) * r ** (-(q + 1) * (p - 1) - 1) * ((q + 1) * (p - 1) - (N_DIM - 1))
    radial = q * (q + 1) * r ** (-q - 2)
    tangential = -q * r ** (-q - 2) * (N_DIM - 1)
    grad = q * r ** (-q - 1)
    if op.kind == "laplace":
        return radial + tangential
    if op.pucci_sign == "minus":
        return op.lam * radial + op.Lam * tangential - op.M * grad
    return op.Lam * radial + op.lam * tangential + op.M * grad


def choose_q(op: OperatorSpec, h: float = 1 / 256, q_min: int = 3, q_max: int = 200) -> int:
    """Smallest integer ``q`` in ``[3, 200]`` with ``F(φ) >= 1`` on ``r ∈ (h, 1]``."""
    r = np.concatenate([np.geomspace(h, 1.0, 4000), [1.0]])
    for q in range(q_min, q_max + 1):
        if np.all(radial_operator_value(op, q, r) >= 1.0):
            return q
    raise ValueError(f"no exponent q in [{q_min}, {q_max}] makes the radial barrier a subsolution")


# --------------------------------------------------------------------------
# discrete verification


@dataclass
class BarrierReport:
    passed: bool
    margin: float
    slack: float
    worst_node: tuple
    worst_point: tuple
    worst_value: float
    target: str
    threshold: float
    n_nodes: int
    roundoff: float

    @property
    def certified_margin(self) -> float:
        """Lower bound for the continuous margin: raw margin minus slack."""
        return self.margin - self.slack


def disk_domain(h: float, radius: float = 1.0, reach: int = 1) -> DomainGrid:
    """Grid whose interior is the open disk ``B_radius(0)``; hosts barrier checks."""
    spec = GridSpec.centered(h, radius, pad=reach + 2)
    X, Y = spec.coords()
    occ = X * X + Y * Y < radius * radius
    return build_mask_domain(MaskDomain(occ, spec), R=radius, reach=reach)


def _third_difference_bound(G: np.ndarray, h: float, region: np.ndarray) -> float:
    """``max |third differences| / h³`` over region nodes (all four mixed orders)."""
    P = np.pad(G, 2, mode="edge")

    def s(di, dj):
        return P[2 + di:P.shape[0] - 2 + di, 2 + dj:P.shape[1] - 2 + dj]

    dxxx = (s(2, 0) - 2 * s(1, 0) + 2 * s(-1, 0) - s(-2, 0)) / 2
    dyyy = (s(0, 2) - 2 * s(0, 1) + 2 * s(0, -1) - s(0, -2)) / 2
    dxxy = (s(1, 1) - 2 * s(0, 1) + s(-1, 1) - s(1, -1) + 2 * s(0, -1) - s(-1, -1)) / 2
    dxyy = (s(1, 1) - 2 * s(1, 0) + s(1, -1) - s(-1, 1) + 2 * s(-1, 0) - s(-1, -1)) / 2
    stack = np.abs(np.array([dxxx, dyyy, dxxy, dxyy]))[:, region]
    return float(np.max(stack)) / h ** 3 if stack.size else 0.0


def region_mask(dg: DomainGrid, region, sample_step: float | None = None) -> np.ndarray:
    """Resolve ``region`` (mask or predicate ``f(x, y)``) to interior nodes.

    ``sample_step`` keeps only nodes on the lattice of that spacing, so that
    margins at ``h`` and ``h/2`` are compared on the same points.
    """
    X, Y = dg.xy
    m = np.asarray(region(X, Y) if callable(region) else region, dtype=bool)
    if m.shape != dg.shape:
        raise ValueError("region mask shape does not match the grid")
    if sample_step is not None:
        k = sample_step / dg.h
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise ValueError("sample_step must be a positive multiple of h")
        k = int(round(k))
        ii, jj = np.indices(dg.shape)
        i0, j0 = dg.spec.nearest_index((0.0, 0.0))
        m = m & ((ii - i0) % k == 0) & ((jj - j0) % k == 0)
    if np.any(m & ~dg.interior):
        raise ValueError("region must lie in the grid interior")
    if not m.any():
        raise ValueError("empty region")
    return m


def verify_sign(spec: BarrierSpec, op: OperatorSpec, dg: DomainGrid, region, target: str,
                eps: float | None = None, sample_step: float | None = None) -> BarrierReport:
    """Sample the barrier, apply the discrete operator, check the target inequality.

    ``target`` is ``"<= -1"``, ``">= 1"`` or ``">= eps"``.  The margin is the
    worst signed distance to the threshold; a node passes if its margin is
    at least ``-slack`` with ``slack = 10 · max|D³G| · h²``.  ``roundoff``
    bounds the floating-point error of the discrete operator values.
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    if target == ">= eps" and eps is None:
        raise ValueError("target '>= eps' needs eps")
    m = region_mask(dg, region, sample_step)
    X, Y = dg.xy
    pts = np.stack([X, Y], axis=-1)
    reach = dg.reach
    if spec.kind in ("radial", "annulus"):
        r = _radius(spec, pts)
        if np.min(r[m]) <= (reach + 1) * dg.h * np.sqrt(2):
            raise ValueError("region touches the barrier singularity")
    with np.errstate(divide="ignore", invalid="ignore"):
        G = evaluate(spec, pts)
    G = np.where(np.isfinite(G), G, 0.0)
    val = apply_operator(op, G, _full_interior(dg))
    if target == "<= -1":
        threshold, margins = -1.0, -1.0 - val
    else:
        threshold = 1.0 if target == ">= 1" else float(eps)
        margins = val - threshold
    margins = np.where(m, margins, np.inf)
    k = int(np.argmin(margins))
    node = np.unravel_index(k, dg.shape)
    margin = float(margins[node])
    slack = 10 * _third_difference_bound(G, dg.h, m) * dg.h ** 2
    near = ndimage.binary_dilation(m, iterations=2 * reach)
    roundoff = 16 * np.finfo(float).eps * float(np.max(np.abs(G[near]))) / dg.h ** 2
    return BarrierReport(margin >= -slack, margin, slack, tuple(int(i) for i in node),
                         (float(X[node]), float(Y[node])), float(val[node]), target, threshold,
                         int(m.sum()), roundoff)


def _full_interior(dg: DomainGrid) -> DomainGrid:
    # barriers are defined everywhere; evaluate the stencil wherever it fits
    inside = np.zeros(dg.shape, dtype=bool)
    w = dg.reach
    inside[w:-w, w:-w] = True
    cls = _classify(inside, np.zeros(dg.shape, dtype=bool), w)
    return DomainGrid(dg.spec, cls, dg.dist, np.full(dg.shape, np.nan), dg.boundary_points,
                      None, dg.R, w, dg.offset, dict(dg.meta))


__all__ = [
    "BarrierSpec", "BarrierReport", "eval_quadratic", "eval_exponential", "eval_radial",
    "eval_annulus", "evaluate", "annulus_epsilon", "exponential_rate", "choose_q",
    "radial_operator_value", "verify_sign", "disk_domain", "region_mask",
]
