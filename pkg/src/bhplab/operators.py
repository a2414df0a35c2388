"""Discrete elliptic operators and their frozen-coefficient linearisations.

Three operators act on fields sampled on a :class:`~bhplab.geometry.DomainGrid`:

``laplace``
    five-point Laplacian.
``pucci``
    ``lam * Δ_h u + (Lam - lam) * min_frames Σ min(D_v u, 0) - M |∇u|`` for the
    minus sign, and the mirror image with ``max``/``max(., 0)``/``+ M|∇u|`` for
    the plus sign.  ``D_v`` is the directional second difference along the
    stencil direction ``v``; a frame is a pair of orthogonal stencil
    directions.  Both pieces are monotone, so the scheme is degenerate
    elliptic, and it reduces to ``lam * Δ_h`` when ``lam == Lam`` and
    ``M == 0``.
``plaplace``
    ``Δ_p u = div(|∇u|_δ^{p-2} ∇u)`` in divergence form, with constant
    gradients on the triangles of both diagonal splittings of every grid
    cell (averaged).  At ``p = 2`` this is exactly the five-point Laplacian.

Fields are full-grid ``float`` arrays; values off the interior/boundary are
ignored.  Results are full-grid arrays holding ``nan`` off the interior.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .geometry import DomainGrid, neighbor_slices

KINDS = ("laplace", "pucci", "plaplace")


@dataclass(frozen=True)
class OperatorSpec:
    kind: str = "laplace"
    lam: float = 1.0
    Lam: float = 1.0
    M: float = 0.0
    p: float = 2.0
    pucci_sign: str = "minus"
    reg_delta: float | None = None
    directions: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.Lam < self.lam:
            raise ValueError("Lambda must be >= lambda")
        if self.M < 0:
            raise ValueError("M must be nonnegative")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.pucci_sign not in ("minus", "plus"):
            raise ValueError("pucci_sign must be 'minus' or 'plus'")
        if self.reg_delta is not None and self.reg_delta < 0:
            raise ValueError("reg_delta must be nonnegative")
        if self.directions not in (8, 16):
            raise ValueError("directions must be 8 or 16")

    def delta(self, h: float) -> float:
        return h if self.reg_delta is None else self.reg_delta

    def with_(self, **kw) -> "OperatorSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class StencilSet:
    """One representative per ``±`` direction pair and the orthogonal frames."""

    directions: tuple[tuple[int, int], ...]
    frames: tuple[tuple[int, int], ...]

    @property
    def reach(self) -> int:
        return max(max(abs(a), abs(b)) for a, b in self.directions)


STENCIL_8 = StencilSet(((1, 0), (0, 1), (1, 1), (1, -1)), ((0, 1), (2, 3)))
STENCIL_16 = StencilSet(STENCIL_8.directions + ((2, 1), (1, -2), (1, 2), (2, -1)),
                        STENCIL_8.frames + ((4, 5), (6, 7)))


def stencil_for(spec: OperatorSpec) -> StencilSet:
    return STENCIL_16 if spec.directions == 16 else STENCIL_8


def pucci_minus(eigs, lam: float, Lam: float) -> float:
    e = np.asarray(eigs, dtype=float)
    return float(lam * e[e > 0].sum() + Lam * e[e < 0].sum())


def pucci_plus(eigs, lam: float, Lam: float) -> float:
    e = np.asarray(eigs, dtype=float)
    return float(Lam * e[e > 0].sum() + lam * e[e < 0].sum())


# --------------------------------------------------------------------------
# node access


class InteriorView:
    """Flat-index access to interior nodes and their stencil neighbours."""

    def __init__(self, dg: DomainGrid):
        self.dg = dg
        self.ny = dg.shape[1]
        self.flat = np.flatnonzero(dg.interior.ravel())
        i, j = np.divmod(self.flat, self.ny)
        r = dg.reach
        if self.flat.size and (i.min() < r or j.min() < r or i.max() >= dg.shape[0] - r
                               or j.max() >= dg.shape[1] - r):
            raise ValueError("interior nodes too close to the grid edge for the stencil reach")
        self.index = -np.ones(dg.shape, dtype=np.int64)
        self.index.flat[self.flat] = np.arange(self.flat.size)

    @property
    def n(self) -> int:
        return self.flat.size

    def nb(self, di: int, dj: int) -> np.ndarray:
        return self.flat + di * self.ny + dj


def _check_defined(u: np.ndarray, view: InteriorView, reach: int) -> None:
    if reach > view.dg.reach:
        raise ValueError(f"stencil reach {reach} exceeds grid reach {view.dg.reach}")
    uf = u.ravel()
    for di in range(-reach, reach + 1):
        for dj in range(-reach, reach + 1):
            vals = uf[view.nb(di, dj)]
            bad = ~np.isfinite(vals)
            if bad.any():
                k = view.flat[np.flatnonzero(bad)[0]]
                node = divmod(int(k), view.ny)
                raise ValueError(
                    f"missing value at neighbour {(node[0] + di, node[1] + dj)} "
                    f"of interior node {node}")


def directional_second_differences(u: np.ndarray, view: InteriorView,
                                   directions) -> np.ndarray:
    uf = u.ravel()
    c = uf[view.flat]
    h2 = view.dg.h ** 2
    out = np.empty((len(directions), view.n))
    for k, (a, b) in enumerate(directions):
        out[k] = (uf[view.nb(a, b)] + uf[view.nb(-a, -b)] - 2 * c) / ((a * a + b * b) * h2)
    return out


def centered_gradient(u: np.ndarray, view: InteriorView) -> tuple[np.ndarray, np.ndarray]:
    uf = u.ravel()
    h = view.dg.h
    gx = (uf[view.nb(1, 0)] - uf[view.nb(-1, 0)]) / (2 * h)
    gy = (uf[view.nb(0, 1)] - uf[view.nb(0, -1)]) / (2 * h)
    return gx, gy


def _scatter(view: InteriorView, values: np.ndarray) -> np.ndarray:
    out = np.full(view.dg.shape, np.nan)
    out.flat[view.flat] = values
    return out


# --------------------------------------------------------------------------
# operator evaluation


def _pucci_extremal_part(D: np.ndarray, st: StencilSet, sign: str) -> np.ndarray:
    per_frame = []
    for a, b in st.frames:
        if sign == "minus":
            per_frame.append(np.minimum(D[a], 0) + np.minimum(D[b], 0))
        else:
            per_frame.append(np.maximum(D[a], 0) + np.maximum(D[b], 0))
    per_frame = np.array(per_frame)
    return per_frame.min(axis=0) if sign == "minus" else per_frame.max(axis=0)


def discrete_pucci(u: np.ndarray, dg: DomainGrid, lam: float, Lam: float, sign: str = "minus",
                   directions: int = 8, view: InteriorView | None = None) -> np.ndarray:
    """Discrete ``P^-`` or ``P^+`` of the Hessian, without gradient term (flat vector)."""
    view = view or InteriorView(dg)
    st = STENCIL_16 if directions == 16 else STENCIL_8
    D = directional_second_differences(u, view, st.directions)
    lap = D[0] + D[1]
    return lam * lap + (Lam - lam) * _pucci_extremal_part(D, st, sign)


def apply_operator(spec: OperatorSpec, u: np.ndarray, dg: DomainGrid) -> np.ndarray:
    """Residual field ``F(D²u, ∇u)`` at interior nodes (``nan`` elsewhere)."""
    view = InteriorView(dg)
    u = np.asarray(u, dtype=float)
    if spec.kind == "laplace":
        _check_defined(u, view, 1)
        D = directional_second_differences(u, view, STENCIL_8.directions[:2])
        return _scatter(view, D[0] + D[1])
    if spec.kind == "pucci":
        st = stencil_for(spec)
        _check_defined(u, view, st.reach)
        val = discrete_pucci(u, dg, spec.lam, spec.Lam, spec.pucci_sign, spec.directions, view)
        if spec.M:
            gx, gy = centered_gradient(u, view)
            s = -1.0 if spec.pucci_sign == "minus" else 1.0
            val = val + s * spec.M * np.hypot(gx, gy)
        return _scatter(view, val)
    _check_defined(u, view, 1)
    W = plaplace_weights(u, dg, spec.p, spec.delta(dg.h), view)
    return _scatter(view, apply_weights(W, u, view))


# --------------------------------------------------------------------------
# linearised stencils: dict offset -> weight per interior node


def laplace_weights(view: InteriorView, scale: float = 1.0) -> dict:
    h2 = view.dg.h ** 2
    w = np.full(view.n, scale / h2)
    return {(1, 0): w, (-1, 0): w, (0, 1): w, (0, -1): w, (0, 0): -4 * w}


def _add(W: dict, off, w) -> None:
    if off in W:
        W[off] = W[off] + w
    else:
        W[off] = np.array(w, dtype=float) * np.ones(1)


@dataclass
class PucciPolicy:
    frame: np.ndarray      # chosen frame index per node
    active: np.ndarray     # (2, n) 0/1 weights of the frame's two directions
    wx: np.ndarray         # unit vector realising |∇u|
    wy: np.ndarray

    def same_as(self, other: "PucciPolicy | None") -> bool:
        return (other is not None and np.array_equal(self.frame, other.frame)
                and np.array_equal(self.active, other.active)
                and np.array_equal(self.wx, other.wx) and np.array_equal(self.wy, other.wy))


def pucci_policy(spec: OperatorSpec, u: np.ndarray, view: InteriorView) -> PucciPolicy:
    """Optimal frame, active directions and gradient direction at ``u``."""
    st = stencil_for(spec)
    D = directional_second_differences(u, view, st.directions)
    minus = spec.pucci_sign == "minus"
    vals, acts = [], []
    for a, b in st.frames:
        if minus:
            act = np.array([D[a] < 0, D[b] < 0], dtype=float)
        else:
            act = np.array([D[a] > 0, D[b] > 0], dtype=float)
        vals.append(act[0] * D[a] + act[1] * D[b])
        acts.append(act)
    vals = np.array(vals)
    frame = vals.argmin(axis=0) if minus else vals.argmax(axis=0)
    acts = np.array(acts)
    active = acts[frame, :, np.arange(view.n)].T
    gx, gy = centered_gradient(u, view)
    g = np.hypot(gx, gy)
    safe = np.where(g > 0, g, 1.0)
    wx = np.where(g > 0, gx / safe, 0.0)
    wy = np.where(g > 0, gy / safe, 0.0)
    return PucciPolicy(frame, active, wx, wy)


def pucci_policy_weights(spec: OperatorSpec, pol: PucciPolicy, view: InteriorView) -> dict:
    st = stencil_for(spec)
    h = view.dg.h
    W = laplace_weights(view, spec.lam)
    extra = spec.Lam - spec.lam
    if extra:
        for f, (a, b) in enumerate(st.frames):
            sel = pol.frame == f
            for slot, d in enumerate((a, b)):
                vx, vy = st.directions[d]
                w = np.where(sel, extra * pol.active[slot] / ((vx * vx + vy * vy) * h * h), 0.0)
                _add(W, (vx, vy), w)
                _add(W, (-vx, -vy), w)
                _add(W, (0, 0), -2 * w)
    if spec.M:
        s = -1.0 if spec.pucci_sign == "minus" else 1.0
        cx = s * spec.M * pol.wx / (2 * h)
        cy = s * spec.M * pol.wy / (2 * h)
        _add(W, (1, 0), cx)
        _add(W, (-1, 0), -cx)
        _add(W, (0, 1), cy)
        _add(W, (0, -1), -cy)
    return W


# triangles of the two cell splittings, as vertex offsets from the cell's lower-left node
_TRIANGLES = (
    ((0, 0), (1, 0), (1, 1)),
    ((0, 0), (0, 1), (1, 1)),
    ((0, 0), (1, 0), (0, 1)),
    ((1, 0), (1, 1), (0, 1)),
)


def _triangle_gradient_matrix(tri, h):
    """2x3 matrix G with ∇u = G @ (u_a, u_b, u_c) for a right triangle of the grid."""
    P = np.array(tri, dtype=float) * h
    T = np.array([P[1] - P[0], P[2] - P[0]])
    Tinv = np.linalg.inv(T)
    return Tinv @ np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])


_GRAD_MATS_UNIT = [_triangle_gradient_matrix(t, 1.0) for t in _TRIANGLES]


def _cell_values(u: np.ndarray, off) -> np.ndarray:
    nx, ny = u.shape
    return u[off[0]:nx - 1 + off[0], off[1]:ny - 1 + off[1]]


def triangle_gradients(u: np.ndarray, h: float):
    """Per-cell gradients on the four triangle types: list of (gx, gy)."""
    out = []
    for tri, G in zip(_TRIANGLES, _GRAD_MATS_UNIT):
        vals = [_cell_values(u, off) for off in tri]
        gx = (G[0, 0] * vals[0] + G[0, 1] * vals[1] + G[0, 2] * vals[2]) / h
        gy = (G[1, 0] * vals[0] + G[1, 1] * vals[1] + G[1, 2] * vals[2]) / h
        out.append((gx, gy))
    return out


def plaplace_weights(u: np.ndarray, dg: DomainGrid, p: float, delta: float,
                     view: InteriorView | None = None) -> dict:
    """Stencil of ``v -> div(κ(u) ∇v)`` with ``κ = (|∇u|² + δ²)^{(p-2)/2}`` per triangle.

    Applying it to ``u`` itself gives the discrete ``Δ_p u``.
    """
    view = view or InteriorView(dg)
    h = dg.h
    with np.errstate(invalid="ignore"):
        grads = triangle_gradients(np.where(np.isfinite(u), u, 0.0), h)
    nx, ny = dg.shape
    full = {}
    for tri, G, (gx, gy) in zip(_TRIANGLES, _GRAD_MATS_UNIT, grads):
        if p == 2:
            kappa = np.ones_like(gx)
        else:
            # floor keeps δ = 0, p < 2 finite where a triangle is flat
            kappa = np.maximum(gx * gx + gy * gy + delta * delta, 1e-24) ** ((p - 2) / 2)
        # area h²/2, two splittings averaged, divided by -h² for the residual sign
        coef = -kappa / 4.0 / (h * h)
        for a, va in enumerate(tri):
            for b, vb in enumerate(tri):
                off = (vb[0] - va[0], vb[1] - va[1])
                k = float(G[:, a] @ G[:, b])
                if k == 0.0:
                    continue
                arr = full.setdefault(off, np.zeros((nx, ny)))
                arr[va[0]:nx - 1 + va[0], va[1]:ny - 1 + va[1]] += k * coef
    return {off: arr.ravel()[view.flat] for off, arr in full.items()}


def apply_weights(W: dict, u: np.ndarray, view: InteriorView) -> np.ndarray:
    uf = u.ravel()
    out = np.zeros(view.n)
    for (di, dj), w in W.items():
        out += w * uf[view.nb(di, dj)]
    return out


def assemble(W: dict, view: InteriorView, u_boundary: np.ndarray) -> tuple[csr_matrix, np.ndarray]:
    """Sparse matrix on interior unknowns and the boundary contribution vector.

    ``apply_weights(W, u) == A @ u[interior] + b`` whenever ``u`` carries
    ``u_boundary`` on the boundary nodes.
    """
    rows, cols, data = [], [], []
    b = np.zeros(view.n)
    ub = u_boundary.ravel()
    idx = view.index.ravel()
    ar = np.arange(view.n)
    for (di, dj), w in W.items():
        w = np.broadcast_to(w, (view.n,))
        nb = view.nb(di, dj)
        col = idx[nb]
        inside = col >= 0
        rows.append(ar[inside])
        cols.append(col[inside])
        data.append(w[inside])
        outside = ~inside & (w != 0)
        if outside.any():
            vals = ub[nb[outside]]
            if not np.all(np.isfinite(vals)):
                k = view.flat[np.flatnonzero(outside)[np.flatnonzero(~np.isfinite(vals))[0]]]
                raise ValueError(f"missing boundary value next to interior node "
                                 f"{divmod(int(k), view.ny)}")
            b[outside] += w[outside] * vals
    A = coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(view.n, view.n)).tocsr()
    return A, b


def plaplace_energy(u: np.ndarray, f: np.ndarray, dg: DomainGrid, p: float, delta: float) -> float:
    """Regularised energy whose critical points solve ``Δ_p u = f``."""
    h = dg.h
    uu = np.where(np.isfinite(u), u, np.nan)
    rel = np.zeros((dg.shape[0] - 1, dg.shape[1] - 1), dtype=bool)
    inter = dg.interior
    total = 0.0
    for tri, (gx, gy) in zip(_TRIANGLES, triangle_gradients(uu, h)):
        touch = np.zeros_like(rel)
        for off in tri:
            touch |= _cell_values(inter, off)
        dens = (gx * gx + gy * gy + delta * delta) ** (p / 2) / p
        total += (h * h / 4) * dens[touch].sum()
    total += h * h * float(np.sum(f[inter] * u[inter]))
    return total


__all__ = [
    "OperatorSpec", "StencilSet", "STENCIL_8", "STENCIL_16", "pucci_minus", "pucci_plus",
    "apply_operator", "discrete_pucci", "InteriorView", "laplace_weights", "pucci_policy",
    "pucci_policy_weights", "plaplace_weights", "apply_weights", "assemble",
    "plaplace_energy", "centered_gradient", "directional_second_differences",
    "neighbor_slices",
]
