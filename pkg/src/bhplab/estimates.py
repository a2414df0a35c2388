"""Empirical measurement of the inequalities consumed by the ratio bound.

Every "there exists C" statement becomes a measured constant; whether it is
acceptable is decided by refinement stability in the callers, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .geometry import DomainGrid

DEFAULT_BINS = 12


@dataclass
class GrowthFit:
    c_fit: float
    beta_fit: float
    window: tuple
    residual: float
    n_nodes: int
    beta_target: float


@dataclass
class HarnackReport:
    C2_fit: float = float("nan")
    C3_fit: float = float("nan")
    alpha_fit: float = float("nan")
    samples: int = 0
    scales: tuple = ()
    oscillations: tuple = ()

    @property
    def passed(self) -> bool:
        if not np.isnan(self.alpha_fit):
            return self.alpha_fit > 0
        return bool(np.isfinite(self.C2_fit))


def _region(dg: DomainGrid, region) -> np.ndarray:
    if region is None:
        return dg.interior.copy()
    if callable(region):
        region = region(*dg.xy)
    m = np.asarray(region, dtype=bool)
    if m.shape != dg.shape:
        raise ValueError("region mask shape does not match the grid")
    return m & dg.interior


def _window(dg: DomainGrid, region, d_min, d_max) -> tuple[np.ndarray, float, float]:
    lo = 2 * dg.h if d_min is None else max(d_min, 2 * dg.h)
    hi = np.inf if d_max is None else d_max
    m = _region(dg, region)
    d = dg.dist
    sel = m & (d >= lo) & (d <= hi)
    if not sel.any():
        raise ValueError(f"resolution floor: no region nodes with {lo:.4g} <= d <= {hi:.4g}")
    return sel, lo, float(np.max(d[sel])) if not np.isfinite(hi) else hi


def _envelope_fit(d: np.ndarray, u: np.ndarray, lower: bool, bins: int) -> tuple[float, float, float]:
    """Log-log fit of the lower (or upper) envelope of ``u`` against ``d``.

    Returns ``(slope, intercept, max deviation)``.
    """
    ld, lu = np.log(d), np.log(u)
    edges = np.linspace(ld.min(), ld.max(), bins + 1)
    which = np.clip(np.digitize(ld, edges) - 1, 0, bins - 1)
    xs, ys = [], []
    for b in range(bins):
        k = np.flatnonzero(which == b)
        if k.size:
            j = k[np.argmin(lu[k])] if lower else k[np.argmax(lu[k])]
            xs.append(ld[j])
            ys.append(lu[j])
    xs, ys = np.array(xs), np.array(ys)
    if xs.size < 2 or np.ptp(xs) == 0:
        return float("nan"), float(ys.mean()), 0.0
    slope, icpt = np.polyfit(xs, ys, 1)
    return float(slope), float(icpt), float(np.max(np.abs(ys - (slope * xs + icpt))))


def _growth(u, dg, region, beta_target, d_min, d_max, lower, bins) -> GrowthFit:
    sel, lo, hi = _window(dg, region, d_min, d_max)
    uu, d = u[sel], dg.dist[sel]
    if np.any(~np.isfinite(uu)):
        raise ValueError("u is not finite on the growth window")
    if lower and np.any(uu <= 0):
        raise ValueError("u must be positive on the growth window")
    ratio = uu / d ** beta_target
    c = float(ratio.min() if lower else ratio.max())
    if np.all(uu > 0):
        beta_fit, _, res = _envelope_fit(d, uu, lower, bins)
    else:
        beta_fit, res = float("nan"), float("nan")
    return GrowthFit(c, beta_fit, (lo, hi), res, int(sel.sum()), beta_target)


def measure_growth_lower(u: np.ndarray, dg: DomainGrid, region=None, beta_target: float = 1.0,
                         d_min: float | None = None, d_max: float | None = None,
                         bins: int = DEFAULT_BINS) -> GrowthFit:
    """``c_fit = min u/d^β`` over the window ``max(2h, d_min) <= d <= d_max``.

    ``beta_fit`` is the slope of a log-log fit to the lower envelope.
    """
    return _growth(u, dg, region, beta_target, d_min, d_max, True, bins)


def measure_growth_upper(u: np.ndarray, dg: DomainGrid, region=None, beta_target: float = 0.5,
                         d_min: float | None = None, d_max: float | None = None,
                         bins: int = DEFAULT_BINS) -> GrowthFit:
    """``C_fit = max u/d^β`` with an upper-envelope exponent fit."""
    return _growth(u, dg, region, beta_target, d_min, d_max, False, bins)


def check_interior_harnack(u: np.ndarray, dg: DomainGrid, balls) -> HarnackReport:
    """``C2 = max over balls of sup u / (inf u + 1)`` on closed balls ``B_r(x)``."""
    balls = list(balls)
    if not balls:
        raise ValueError("empty ball list")
    worst = -np.inf
    for center, r in balls:
        node = dg.spec.nearest_index(center)
        if not dg.interior[node] or dg.clearance[node] < 2 * r - dg.h * (1 + 1e-9):
            raise ValueError(f"ball B_{2 * r:g}({tuple(center)}) is not inside the interior")
        m = dg.ball_mask(center, r, closed=True) & dg.interior
        vals = u[m]
        worst = max(worst, float(vals.max() / (vals.min() + 1.0)))
    return HarnackReport(C2_fit=worst, samples=len(balls))


def check_boundary_harnack_homogeneous(u1: np.ndarray, u2: np.ndarray, dg: DomainGrid, a,
                                       r: float, min_scale: float | None = None) -> HarnackReport:
    """Fit ``osc_{B_ρ(a)} (u1/u2) ≈ C3 (ρ/r)^α`` over dyadic ``ρ = r/4, r/8, ...``.

    ``osc`` is ``sup/inf - 1`` of the ratio on interior nodes of ``B_ρ(a)``;
    each scale enters the fit as the largest distance of those nodes from ``a``.
    """
    floor = 4 * dg.h if min_scale is None else min_scale
    scales, oscs = [], []
    rho = r / 4
    n_samples = 0
    while rho >= floor:
        m = dg.ball_mask(a, rho) & dg.interior
        if m.sum() >= 3:
            v2 = u2[m]
            if np.any(v2 <= 0):
                k = np.flatnonzero(m.ravel())[int(np.argmax(v2 <= 0))]
                raise ValueError(f"non-positive u2 at sample node {np.unravel_index(k, dg.shape)}")
            ratio = u1[m] / v2
            if np.any(ratio <= 0):
                raise ValueError("non-positive u1 in the sample set")
            # realised radius of the node sample, not the nominal ρ
            X, Y = dg.xy
            scales.append(float(np.max(np.hypot(X[m] - a[0], Y[m] - a[1]))))
            oscs.append(float(ratio.max() / ratio.min() - 1.0))
            n_samples += int(m.sum())
        rho /= 2
    if len(scales) < 2:
        raise ValueError("fewer than two usable dyadic scales; refine the grid or enlarge r")
    s, o = np.array(scales) / r, np.array(oscs)
    if np.all(o <= 64 * np.finfo(float).eps):
        return HarnackReport(C3_fit=0.0, alpha_fit=float("inf"), samples=n_samples,
                             scales=tuple(scales), oscillations=tuple(oscs))
    pos = o > 0
    alpha, icpt = np.polyfit(np.log(s[pos]), np.log(o[pos]), 1)
    C3 = float(np.max(o / s ** alpha))
    return HarnackReport(C3_fit=C3, alpha_fit=float(alpha), samples=n_samples,
                         scales=tuple(scales), oscillations=tuple(oscs))


@dataclass
class GradientReport:
    min_ratio: float
    max_ratio: float
    n_nodes: int

    @property
    def C(self) -> float:
        return max(self.max_ratio, 1.0 / self.min_ratio)


def node_gradients(u: np.ndarray, dg: DomainGrid, mask: np.ndarray) -> np.ndarray:
    """Centered-difference gradients at ``mask`` nodes, shape ``(N, 2)``.

    One-sided differences are used where a centered neighbour is undefined.
    """
    h = dg.h
    P = np.pad(u, 1, constant_values=np.nan)
    c = P[1:-1, 1:-1]
    out = []
    for axis in (0, 1):
        sl_p = [slice(1, -1), slice(1, -1)]
        sl_m = [slice(1, -1), slice(1, -1)]
        sl_p[axis] = slice(2, None)
        sl_m[axis] = slice(None, -2)
        up, um = P[tuple(sl_p)], P[tuple(sl_m)]
        g = (up - um) / (2 * h)
        g = np.where(np.isfinite(g), g, (up - c) / h)
        g = np.where(np.isfinite(g), g, (c - um) / h)
        out.append(g[mask])
    return np.column_stack(out)


def check_gradient_comparability(u: np.ndarray, dg: DomainGrid, region=None) -> GradientReport:
    """Extremes of ``|∇_h u| d / u`` over region nodes with ``d >= 2h``."""
    m = _region(dg, region) & (dg.dist >= 2 * dg.h)
    if not m.any():
        raise ValueError("empty region after excluding nodes within 2h of the boundary")
    if np.any(u[m] <= 0):
        raise ValueError("u must be positive on the region")
    g = np.hypot(*node_gradients(u, dg, m).T)
    ratio = g * dg.dist[m] / u[m]
    return GradientReport(float(ratio.min()), float(ratio.max()), int(m.sum()))


def check_boundedness(u: np.ndarray, dg: DomainGrid, radius: float = 0.5) -> float:
    """``sup u`` over interior nodes of ``B_radius(0)``."""
    m = dg.ball_mask((0.0, 0.0), radius) & dg.interior
    if not m.any():
        raise ValueError("no interior nodes in the boundedness region")
    return float(np.max(u[m]))


# --------------------------------------------------------------------------
# linearised p-Laplace coefficients


@dataclass
class CoefficientField:
    A: np.ndarray        # (N, 2, 2) symmetric matrices
    a: np.ndarray        # (N,) scalar weights ∫ |z(t)|^{p-2} dt
    flagged: np.ndarray  # (N,) nodes skipped because both gradients vanish (p < 2)
    p: float

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.A)


def _coefficient_integrand(gu, gw, p, m):
    """Integrand in ``s ∈ [0, 1]`` after splitting where ``|z|`` is smallest.

    With ``e = (∇u - ∇w)/|∇u - ∇w|`` the path is ``z = a e + c e⊥`` for arc
    length ``a`` from ``∇w·e`` to ``∇u·e``.  The endpoints are projections,
    so no length is formed by cancellation, and collinear gradients through
    zero vanish exactly at ``a = 0``.  Each half is stretched by
    ``a - a* ∝ s^m``.  Unit vectors keep tiny gradients out of underflow.
    """
    N = gu.shape[0]
    diff = gu - gw
    L = np.hypot(diff[:, 0], diff[:, 1])
    live = L > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(live[:, None], diff / L[:, None], 0.0)
    perp = np.column_stack([-e[:, 1], e[:, 0]])
    # e×∇w = e×∇u; the shorter endpoint avoids cancellation
    g = np.where((np.hypot(gu[:, 0], gu[:, 1]) < np.hypot(gw[:, 0], gw[:, 1]))[:, None], gu, gw)
    c = e[:, 0] * g[:, 1] - e[:, 1] * g[:, 0]
    a0 = np.where(live, np.einsum("ij,ij->i", gw, e), -0.5)
    a1 = np.where(live, np.einsum("ij,ij->i", gu, e), 0.5)
    # a constant path z = ∇w has unit length in a
    base = np.where(live[:, None], c[:, None] * perp, gw)
    scale = np.where(live, L, 1.0)
    astar = np.clip(0.0, a0, a1)
    left_len, right_len = astar - a0, a1 - astar

    def piece(a, jac):
        z = a[:, None] * e + base
        n = np.hypot(z[:, 0], z[:, 1])
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w = np.where(n > 0, n ** (p - 2), 1.0 if p == 2 else 0.0)
            zz = np.where(n[:, None] > 0, z / n[:, None], 0.0)
        out = np.empty((N, 4))
        out[:, 0] = w * (1 + (p - 2) * zz[:, 0] ** 2)
        out[:, 1] = w * (p - 2) * zz[:, 0] * zz[:, 1]
        out[:, 2] = w * (1 + (p - 2) * zz[:, 1] ** 2)
        out[:, 3] = w
        return out * (jac / scale)[:, None]

    def f(s):
        sm = s ** m
        jac_s = m * s ** (m - 1)
        left = piece(astar - left_len * sm, left_len * jac_s)
        right = piece(astar + right_len * sm, right_len * jac_s)
        return (left + right).ravel()

    # where |z| stops being dominated by the offset |c|, in the stretched variable
    with np.errstate(divide="ignore", invalid="ignore"):
        lens = np.maximum(left_len, right_len)
        feature = np.where(live & (lens > 0), (np.abs(c) / lens) ** (1 / m), 1.0)
    return f, feature


def linearized_coefficients(grad_u: np.ndarray, grad_w: np.ndarray, p: float,
                            tol: float = 1e-10) -> CoefficientField:
    """``a_ij = ∫_0^1 |z|^{p-2} (δ_ij + (p-2) z_i z_j/|z|²) dt`` with ``z = t∇u + (1-t)∇w``.

    The path is split where ``|z|`` is smallest and each half is stretched
    by ``s^{1/(p-1)}`` for ``p < 2``, which removes the integrable singularity.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    gu = np.atleast_2d(np.asarray(grad_u, dtype=float))
    gw = np.atleast_2d(np.asarray(grad_w, dtype=float))
    if gu.shape != gw.shape or gu.shape[1] != 2:
        raise ValueError("gradient fields must both have shape (N, 2)")
    both_zero = ~np.any(gu != 0, axis=1) & ~np.any(gw != 0, axis=1)
    flagged = both_zero if p < 2 else np.zeros(len(gu), dtype=bool)
    keep = ~flagged
    A = np.full((len(gu), 2, 2), np.nan)
    a = np.full(len(gu), np.nan)
    if keep.any():
        u_, w_ = gu[keep], gw[keep]
        # homogeneity of degree p - 2: integrate at unit scale, rescale at the end
        G = np.maximum(np.hypot(u_[:, 0], u_[:, 1]), np.hypot(w_[:, 0], w_[:, 1]))
        G = np.where(G > 0, G, 1.0)
        u_, w_ = u_ / G[:, None], w_ / G[:, None]
        m = 1.0 / (p - 1) if p < 2 else 1.0
        f, feature = _coefficient_integrand(u_, w_, p, m)
        points = _grading_points(feature, p, tol)
        try:
            val, err, info = quad_vec(f, 0.0, 1.0, epsabs=tol, epsrel=tol, norm="max",
                                      full_output=True, limit=2000, points=points)
            failed = info.status != 0
        except OverflowError:
            # quad_vec's error estimate overflows on exactly constant integrands
            val, failed = _graded_gauss(f), False
        if failed:
            node = _first_quadrature_failure(u_, w_, p, m, tol)
            idx = np.flatnonzero(keep)[node]
            raise ValueError(f"quadrature did not converge at node {idx}")
        with np.errstate(over="ignore", under="ignore"):
            val = val.reshape(-1, 4) * (G ** (p - 2))[:, None]
        A[keep, 0, 0] = val[:, 0]
        A[keep, 0, 1] = A[keep, 1, 0] = val[:, 1]
        A[keep, 1, 1] = val[:, 2]
        a[keep] = val[:, 3]
    return CoefficientField(A, a, flagged, p)


def _grading_points(feature: np.ndarray, p: float, tol: float):
    """Breakpoints ``2^-k`` down to the smallest feature that still matters.

    For ``p < 2`` a path passing at distance ``|c|`` from zero carries a
    contribution of relative size ``(|c|/|d|)^{p-1}`` inside ``s <= feature``,
    which adaptive quadrature cannot see without a graded start.
    """
    if p >= 2:
        return None
    # feature = (|c|/|d|)^{p-1}, so anything below tol is negligible
    small = feature[(feature < 0.01) & (feature >= 0.01 * tol)]
    if small.size == 0:
        return None
    k = int(np.ceil(np.log2(1 / small.min()))) + 2
    return [2.0 ** -j for j in range(k, 0, -1)]


def _graded_gauss(f, levels: int = 40, order: int = 20) -> np.ndarray:
    """Gauss-Legendre on panels ``[2^-k-1, 2^-k]`` plus ``[0, 2^-levels]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = [0.0] + [2.0 ** -k for k in range(levels, -1, -1)]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        half = (b - a) / 2
        total = total + sum(wi * half * f(a + half * (xi + 1)) for xi, wi in zip(x, w))
    return total


def _first_quadrature_failure(gu, gw, p, m, tol) -> int:
    for k in range(len(gu)):
        f, feature = _coefficient_integrand(gu[k:k + 1], gw[k:k + 1], p, m)
        *_, info = quad_vec(f, 0.0, 1.0, epsabs=tol, epsrel=tol, full_output=True, limit=2000,
                            points=_grading_points(feature, p, tol))
        if info.status != 0:
            return k
    return 0


def flux(z: np.ndarray, p: float) -> np.ndarray:
    """``F(z) = |z|^{p-2} z`` row-wise."""
    z = np.atleast_2d(z)
    n = np.hypot(z[:, 0], z[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(n > 0, n ** (p - 2), 0.0)
    return z * w[:, None]


@dataclass
class EllipticityReport:
    min_ratio: float
    max_ratio: float
    alpha: float
    n_nodes: int
    sandwich_ok: bool


def check_linearized_ellipticity(coeffs: CoefficientField, dist: np.ndarray,
                                 alpha: float) -> EllipticityReport:
    """``min λ_min / d^α`` and ``max λ_max · d^α`` over unflagged nodes.

    Also checks ``Λ_p a <= eig(A) <= a / Λ_p`` with ``Λ_p = min(1, p-1)/max(1, p-1)``.
    """
    keep = ~coeffs.flagged & np.isfinite(coeffs.a)
    d = np.asarray(dist, dtype=float)[keep]
    if not keep.any():
        raise ValueError("no usable nodes")
    ev = coeffs.eigenvalues()[keep]
    a = coeffs.a[keep]
    p = coeffs.p
    lam = min(1.0, p - 1) / max(1.0, p - 1)
    rtol = 1e-8
    sandwich = bool(np.all(ev[:, 0] >= lam * a * (1 - rtol) - 1e-300)
                    and np.all(ev[:, 1] <= a / lam * (1 + rtol) + 1e-300))
    return EllipticityReport(float(np.min(ev[:, 0] / d ** alpha)),
                             float(np.max(ev[:, 1] * d ** alpha)), alpha, int(keep.sum()),
                             sandwich)


__all__ = [
    "GrowthFit", "HarnackReport", "GradientReport", "CoefficientField", "EllipticityReport",
    "measure_growth_lower", "measure_growth_upper", "check_interior_harnack",
    "check_boundary_harnack_homogeneous", "check_gradient_comparability", "check_boundedness",
    "linearized_coefficients", "check_linearized_ellipticity", "node_gradients", "flux",
]
