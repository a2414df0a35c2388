"""Domains on uniform Cartesian grids.

Two families are supported in two dimensions:

* Lipschitz graph domains ``D_{L,R} = {(x, y) in B_R : y > g(x)}``;
* mask domains given by a boolean occupancy raster, intersected with ``B_R``.

Both are turned into a :class:`DomainGrid`, which tags every node as
interior, graph-boundary (the part of the boundary where solutions vanish),
cap-boundary (the artificial sphere ``|x| = R``) or exterior, and carries the
distance from each node to the graph-boundary part.

Grid arrays are indexed ``[i, j]`` with ``x = lo[0] + i*h`` and
``y = lo[1] + j*h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

EXTERIOR = 0
INTERIOR = 1
GRAPH = 2
CAP = 3

CLASS_NAMES = {EXTERIOR: "exterior", INTERIOR: "interior", GRAPH: "graph", CAP: "cap"}


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``lo + h*(i, j)`` with ``shape`` nodes per axis."""

    h: float
    lo: tuple[float, float]
    shape: tuple[int, int]

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got h={self.h}")
        if len(self.lo) != 2 or len(self.shape) != 2:
            raise ValueError("only n = 2 grids are supported")
        if min(self.shape) < 3:
            raise ValueError("grid needs at least 3 nodes per axis")

    @classmethod
    def centered(cls, h: float, half_width: float, pad: int = 2) -> "GridSpec":
        """Grid on ``[-a, a]^2`` with the origin on a node, ``a >= half_width``."""
        if not h > 0:
            raise ValueError(f"grid spacing must be positive, got h={h}")
        m = int(np.ceil(half_width / h - 1e-9)) + pad
        return cls(h=h, lo=(-m * h, -m * h), shape=(2 * m + 1, 2 * m + 1))

    @property
    def hi(self) -> tuple[float, float]:
        return (self.lo[0] + (self.shape[0] - 1) * self.h,
                self.lo[1] + (self.shape[1] - 1) * self.h)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.lo[0] + self.h * np.arange(self.shape[0])
        ys = self.lo[1] + self.h * np.arange(self.shape[1])
        return np.meshgrid(xs, ys, indexing="ij")

    def nearest_index(self, point) -> tuple[int, int]:
        i = int(np.rint((point[0] - self.lo[0]) / self.h))
        j = int(np.rint((point[1] - self.lo[1]) / self.h))
        if not (0 <= i < self.shape[0] and 0 <= j < self.shape[1]):
            raise ValueError(f"point {tuple(point)} lies outside the grid box")
        return i, j

    def contains_box(self, half_width: float) -> bool:
        return (self.lo[0] <= -half_width and self.lo[1] <= -half_width
                and self.hi[0] >= half_width and self.hi[1] >= half_width)


# --------------------------------------------------------------------------
# domain descriptions


@dataclass
class LipschitzGraphDomain:
    """Region above the graph of ``g`` inside ``B_R``.

    ``g`` maps arrays of abscissae to heights and must be vectorised.
    """

    g: Callable[[np.ndarray], np.ndarray]
    L: float
    R: float = 1.0
    n: int = 2
    name: str = "graph"

    def __post_init__(self):
        if self.n != 2:
            raise ValueError("only n = 2 is implemented")
        if self.L < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if abs(float(self.g(np.array([0.0]))[0])) > 1e-12:
            raise ValueError("graph must satisfy g(0) = 0")
        xs = np.linspace(-self.R, self.R, 4001)
        gs = self.g(xs)
        slopes = np.abs(np.diff(gs)) / np.diff(xs)
        if slopes.max() > self.L * (1 + 1e-9) + 1e-12:
            raise ValueError(
                f"sampled slope {slopes.max():.6g} exceeds Lipschitz bound L={self.L}")

    @classmethod
    def flat(cls, R: float = 1.0) -> "LipschitzGraphDomain":
        return cls(lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0, R, name="flat")

    @classmethod
    def cone(cls, L: float, R: float = 1.0) -> "LipschitzGraphDomain":
        return cls(lambda x: L * np.abs(np.asarray(x, dtype=float)), L, R, name="cone")

    @classmethod
    def sawtooth(cls, L: float, period: float = 0.5, R: float = 1.0) -> "LipschitzGraphDomain":
        """Triangle wave of slope ``+-L`` vanishing at multiples of ``period``."""
        if not period > 0:
            raise ValueError("period must be positive")

        def g(x):
            x = np.asarray(x, dtype=float)
            return L * np.abs(x - period * np.round(x / period))

        return cls(g, L, R, name="sawtooth")

    @classmethod
    def piecewise_linear(cls, xs: Sequence[float], ys: Sequence[float],
                         R: float = 1.0) -> "LipschitzGraphDomain":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        L = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
        return cls(lambda x: np.interp(x, xs, ys), L, R, name="piecewise_linear")


@dataclass
class MaskDomain:
    """Boolean occupancy raster on ``spec``; ``True`` marks points of the domain."""

    occupancy: np.ndarray
    spec: GridSpec
    K: float = 4.0
    require_connected: bool = True

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        if self.occupancy.shape != self.spec.shape:
            raise ValueError("occupancy shape does not match grid shape")
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.occupancy.any():
            raise ValueError("empty mask")
        _, ncomp = ndimage.label(self.occupancy)
        self.connected = ncomp == 1
        if self.require_connected and not self.connected:
            raise ValueError(f"mask is not connected ({ncomp} components)")


def polygon_mask(vertices: Sequence[Sequence[float]], spec: GridSpec) -> np.ndarray:
    """Nodes strictly inside a simple polygon (nodes on edges are excluded)."""
    X, Y = spec.coords()
    px, py = X.ravel(), Y.ravel()
    v = np.asarray(vertices, dtype=float)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    eps = 1e-9 * spec.h
    for (x1, y1), (x2, y2) in zip(v, np.roll(v, -1, axis=0)):
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xc)
        ex, ey = x2 - x1, y2 - y1
        t = np.clip(((px - x1) * ex + (py - y1) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
        on_edge |= np.hypot(px - x1 - t * ex, py - y1 - t * ey) <= eps
    return (inside & ~on_edge).reshape(spec.shape)


def l_shape_mask(spec: GridSpec, extent: float = 2.0) -> np.ndarray:
    """Square ``(-extent, extent)^2`` minus the closed quadrant ``x >= 0, y <= 0``.

    The origin is the reentrant corner.
    """
    a = extent
    return polygon_mask([(-a, -a), (0, -a), (0, 0), (a, 0), (a, a), (-a, a)], spec)


def slit_square_mask(spec: GridSpec, width: float = 1 / 16, depth: float = 0.5,
                     extent: float = 2.0) -> np.ndarray:
    """Square ``|x| < extent, depth < y < extent`` reached through a slit.

    The slit is the channel ``|x| < width/2, 0 < y <= depth``; the origin sits
    at its closed end.  Positive harmonic functions decay exponentially along
    the slit, so no power-law lower growth bound holds there.
    """
    X, Y = spec.coords()
    eps = 1e-9 * spec.h
    box = (np.abs(X) < extent - eps) & (Y < extent - eps)
    slit = (np.abs(X) < width / 2 - eps) & (Y > eps)
    return box & (slit | (Y > depth + eps))


def read_mask(path: str | Path, K: float = 4.0) -> MaskDomain:
    """Read a 0/1 raster: header ``rows cols h`` then ``rows`` lines of digits.

    Row 0 is the top of the picture.  The raster is centred on the origin, so
    ``rows`` and ``cols`` must be odd.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"mask file not found: {path}")
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError(f"{path}: header must be 'rows cols h'")
    rows, cols, h = int(head[0]), int(head[1]), float(head[2])
    if rows % 2 == 0 or cols % 2 == 0:
        raise ValueError(f"{path}: rows and cols must be odd")
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"{path}: expected {rows} raster rows, found {len(body)}")
    raster = np.zeros((rows, cols), dtype=bool)
    for r, ln in enumerate(body):
        digits = ln.replace(" ", "").replace(",", "")
        if len(digits) != cols or set(digits) - {"0", "1"}:
            raise ValueError(f"{path}: row {r} must hold {cols} 0/1 digits")
        raster[r] = [c == "1" for c in digits]
    spec = GridSpec(h=h, lo=(-(cols // 2) * h, -(rows // 2) * h), shape=(cols, rows))
    # raster row 0 is the top: transpose to [i, j] with j increasing upward
    return MaskDomain(raster[::-1].T.copy(), spec, K=K)


def write_mask(mask: MaskDomain, path: str | Path) -> None:
    nx, ny = mask.spec.shape
    raster = mask.occupancy.T[::-1]
    lines = [f"{ny} {nx} {mask.spec.h!r}"]
    lines += ["".join("1" if b else "0" for b in row) for row in raster]
    Path(path).write_text("\n".join(lines) + "\n")


def refine_mask(mask: MaskDomain) -> MaskDomain:
    """Halve the spacing; new nodes take the value of the nearest old node (ties toward
    the unoccupied side so thin features keep their width)."""
    occ = mask.occupancy
    nx, ny = occ.shape
    fine = np.zeros((2 * nx - 1, 2 * ny - 1), dtype=bool)
    fine[::2, ::2] = occ
    fine[1::2, ::2] = occ[:-1] & occ[1:]
    fine[::2, 1::2] = occ[:, :-1] & occ[:, 1:]
    fine[1::2, 1::2] = occ[:-1, :-1] & occ[1:, :-1] & occ[:-1, 1:] & occ[1:, 1:]
    spec = GridSpec(mask.spec.h / 2, mask.spec.lo, fine.shape)
    return MaskDomain(fine, spec, K=mask.K, require_connected=mask.require_connected)


# --------------------------------------------------------------------------
# discretised domain


@dataclass
class DomainGrid:
    """Node classification, distance field and boundary data on a grid.

    ``reach`` is the Chebyshev radius of the widest stencil the grid supports:
    every non-interior node within ``reach`` of an interior node is a boundary
    node.  ``offset`` locates this grid inside the root grid it was cut from.
    """

    spec: GridSpec
    node_class: np.ndarray
    dist: np.ndarray
    boundary_values: np.ndarray
    boundary_points: np.ndarray
    graph: Callable | None = None
    R: float = 1.0
    reach: int = 1
    offset: tuple[int, int] = (0, 0)
    meta: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def shape(self) -> tuple[int, int]:
        return self.spec.shape

    @cached_property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        return self.spec.coords()

    @property
    def interior(self) -> np.ndarray:
        return self.node_class == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return (self.node_class == GRAPH) | (self.node_class == CAP)

    @cached_property
    def clearance(self) -> np.ndarray:
        """Distance from each node to the nearest non-interior node."""
        return ndimage.distance_transform_edt(self.interior, sampling=self.h)

    @cached_property
    def chain_distance(self) -> np.ndarray:
        """``min(dist, clearance)``: h-stable near the graph, safe near caps."""
        return np.minimum(self.dist, self.clearance)

    @cached_property
    def boundary_tree(self) -> cKDTree:
        return cKDTree(self.boundary_points)

    def nearest_boundary_point(self, point) -> np.ndarray:
        _, k = self.boundary_tree.query(np.asarray(point, dtype=float))
        return self.boundary_points[k]

    def snapped_boundary_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates where boundary nodes take their Dirichlet data.

        Graph-boundary nodes move vertically onto the graph (graph domains).
        Cap and mask-boundary nodes keep their own coordinates.
        """
        X, Y = self.xy
        X, Y = X.copy(), Y.copy()
        g = self.node_class == GRAPH
        if self.graph is not None:
            Y[g] = self.graph(X[g])
        return X, Y

    def with_boundary_values(self, values) -> "DomainGrid":
        """Copy with Dirichlet data; ``values`` is a scalar, an array or ``f(x, y)``."""
        if callable(values):
            values = values(*self.snapped_boundary_coords())
        values = np.broadcast_to(np.asarray(values, dtype=float), self.shape)
        bv = np.full(self.shape, np.nan)
        b = self.boundary
        bv[b] = values[b]
        if not np.all(np.isfinite(bv[b])):
            raise ValueError("boundary values must be finite on all boundary nodes")
        out = DomainGrid(self.spec, self.node_class, self.dist, bv, self.boundary_points,
                         self.graph, self.R, self.reach, self.offset, dict(self.meta))
        return out

    def node_point(self, idx) -> np.ndarray:
        return np.array([self.spec.lo[0] + idx[0] * self.h, self.spec.lo[1] + idx[1] * self.h])

    def restrict(self, field_: np.ndarray, child: "DomainGrid") -> np.ndarray:
        """Slice a field defined on this grid to a grid cut from it."""
        di = child.offset[0] - self.offset[0]
        dj = child.offset[1] - self.offset[1]
        nx, ny = child.shape
        if di < 0 or dj < 0 or di + nx > self.shape[0] or dj + ny > self.shape[1]:
            raise ValueError("child grid is not contained in this grid")
        return field_[di:di + nx, dj:dj + ny]

    def ball_mask(self, center, r: float, closed: bool = False) -> np.ndarray:
        X, Y = self.xy
        d2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
        return d2 <= r * r * (1 + 1e-12) if closed else d2 < r * r

    def diameter(self) -> float:
        X, Y = self.xy
        m = self.interior
        return float(np.hypot(np.ptp(X[m]), np.ptp(Y[m])))


def _classify(interior: np.ndarray, graph_side: np.ndarray, reach: int) -> np.ndarray:
    struct = np.ones((2 * reach + 1, 2 * reach + 1), dtype=bool)
    near = ndimage.binary_dilation(interior, structure=struct) & ~interior
    cls = np.full(interior.shape, EXTERIOR, dtype=np.int8)
    cls[interior] = INTERIOR
    cls[near & graph_side] = GRAPH
    cls[near & ~graph_side] = CAP
    return cls


def build_graph_domain(dom: LipschitzGraphDomain, spec: GridSpec, reach: int = 1) -> DomainGrid:
    """Discretise ``D_{L,R}`` on ``spec``."""
    h = spec.h
    if h > dom.R / 16:
        raise ValueError(f"h={h} too coarse: need h <= R/16 = {dom.R / 16}")
    if not spec.contains_box(dom.R):
        raise ValueError("grid box does not contain B_R")
    xs_chk = np.linspace(-dom.R, dom.R, 2001)
    if np.max(np.abs(dom.g(xs_chk))) >= min(-spec.lo[1], spec.hi[1]):
        raise ValueError("graph escapes the grid box (L * diameter exceeds box height)")
    X, Y = spec.coords()
    gX = dom.g(X)
    above = Y > gX
    interior = above & (X * X + Y * Y < dom.R ** 2)
    node_class = _classify(interior, ~above, reach)

    # dense graph samples aligned with the node columns
    xs = spec.lo[0] + (h / 4) * np.arange(4 * (spec.shape[0] - 1) + 1)
    pts = np.column_stack([xs, dom.g(xs)])
    kd, _ = cKDTree(pts).query(np.column_stack([X.ravel(), Y.ravel()]))
    dist = np.minimum(kd.reshape(X.shape), np.maximum(Y - gX, 0.0))
    dist[~above] = 0.0
    sel = np.abs(xs) <= dom.R + 4 * h
    return DomainGrid(spec, node_class, dist, np.full(spec.shape, np.nan), pts[sel],
                      graph=dom.g, R=dom.R, reach=reach,
                      meta={"kind": "graph", "name": dom.name, "L": dom.L})


def build_mask_domain(mask: MaskDomain, R: float = 1.0, reach: int = 1) -> DomainGrid:
    """Discretise ``Omega ∩ B_R`` for a mask domain ``Omega``."""
    spec = mask.spec
    if not spec.contains_box(R):
        raise ValueError("mask grid does not contain B_R")
    X, Y = spec.coords()
    occ = mask.occupancy
    interior = occ & (X * X + Y * Y < R * R)
    if not interior.any():
        raise ValueError("mask has no interior nodes inside B_R")
    node_class = _classify(interior, ~occ, reach)
    dist = ndimage.distance_transform_edt(occ, sampling=spec.h)
    edge = ~occ & ndimage.binary_dilation(occ, structure=np.ones((3, 3), bool))
    pts = np.column_stack([X[edge], Y[edge]])
    return DomainGrid(spec, node_class, dist, np.full(spec.shape, np.nan), pts,
                      graph=None, R=R, reach=reach,
                      meta={"kind": "mask", "K": mask.K, "connected": mask.connected})


def localize(dg: DomainGrid, center, r: float) -> DomainGrid:
    """``dg ∩ B_r(center)`` cut to its bounding window.

    Graph-boundary tags are inherited; every other new boundary node is a cap
    node.  Distances still refer to the original graph boundary.
    """
    h = dg.h
    if r < 4 * h - 1e-12:
        raise ValueError(f"localization radius r={r} below resolution floor 4h={4 * h}")
    c = np.asarray(center, dtype=float)
    ci, cj = dg.spec.nearest_index(c)
    if dg.node_class[ci, cj] == EXTERIOR and np.hypot(*(dg.node_point((ci, cj)) - c)) > 0:
        raise ValueError(f"center {tuple(c)} is not in the closure of the domain")
    pad = dg.reach + 1
    m = int(np.ceil(r / h)) + pad
    i0, i1 = max(ci - m, 0), min(ci + m + 1, dg.shape[0])
    j0, j1 = max(cj - m, 0), min(cj + m + 1, dg.shape[1])
    sub = GridSpec(h, (dg.spec.lo[0] + i0 * h, dg.spec.lo[1] + j0 * h), (i1 - i0, j1 - j0))
    parent_cls = dg.node_class[i0:i1, j0:j1]
    X, Y = sub.coords()
    interior = (parent_cls == INTERIOR) & ((X - c[0]) ** 2 + (Y - c[1]) ** 2 < r * r)
    if not interior.any():
        raise ValueError("degenerate localization: empty intersection")
    node_class = _classify(interior, parent_cls == GRAPH, dg.reach)
    if np.any((node_class != EXTERIOR) & (parent_cls == EXTERIOR)):
        raise ValueError("localization reaches exterior nodes of the parent grid")
    bv = dg.boundary_values[i0:i1, j0:j1].copy()
    bv[node_class != GRAPH] = np.nan
    meta = dict(dg.meta)
    meta["localized"] = (tuple(c), r)
    return DomainGrid(sub, node_class, dg.dist[i0:i1, j0:j1], bv, dg.boundary_points,
                      dg.graph, dg.R, dg.reach, (dg.offset[0] + i0, dg.offset[1] + j0), meta)


# --------------------------------------------------------------------------
# NTA queries


class CorkscrewError(ValueError):
    def __init__(self, msg: str, best_K: float):
        super().__init__(msg)
        self.best_K = best_K


def corkscrew(dg: DomainGrid, x, r: float, K: float | None = None) -> tuple[np.ndarray, float]:
    """Interior ball ``B_{r/K'}(y) ⊂ interior ∩ B_r(x)`` with the smallest ``K'``.

    Candidate centres are grid nodes; the admissible radius at a node is the
    smaller of its clearance and ``r - |y - x|``, so the ball contains no
    non-interior node.  Returns ``(y, K')``.
    """
    x = np.asarray(x, dtype=float)
    if not 0 < r < dg.diameter():
        raise ValueError(f"radius r={r} must lie in (0, diameter)")
    X, Y = dg.xy
    rho = np.minimum(dg.clearance, r - np.hypot(X - x[0], Y - x[1]))
    rho = np.where(dg.interior, rho, -np.inf)
    k = int(np.argmax(rho))
    best = rho.flat[k]
    if not best > 0:
        raise CorkscrewError(f"no interior ball inside B_{r}({tuple(x)})", np.inf)
    Kp = r / best
    if K is not None and Kp > 2 * K:
        raise CorkscrewError(f"best corkscrew constant {Kp:.4g} exceeds 2K={2 * K}", Kp)
    y = np.array([X.flat[k], Y.flat[k]])
    return y, float(Kp)


def neighbor_slices(di: int, dj: int, shape) -> tuple[tuple[slice, slice], tuple[slice, slice]]:
    """Slices ``(sa, sb)`` such that ``a[sb]`` is the ``(di, dj)`` neighbour of ``a[sa]``."""
    nx, ny = shape
    sa = (slice(max(0, -di), nx - max(0, di)), slice(max(0, -dj), ny - max(0, dj)))
    sb = (slice(max(0, di), nx - max(0, -di)), slice(max(0, dj), ny - max(0, -dj)))
    return sa, sb


def _interior_graph(dg: DomainGrid):
    idx = -np.ones(dg.shape, dtype=np.int64)
    m = dg.interior
    idx[m] = np.arange(m.sum())
    rows, cols, w = [], [], []
    clr = dg.chain_distance
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        sa, sb = neighbor_slices(di, dj, dg.shape)
        a, b = idx[sa], idx[sb]
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
        w.append(dg.h * np.hypot(di, dj) / np.minimum(clr[sa][ok], clr[sb][ok]))
    n = int(m.sum())
    G = coo_matrix((np.concatenate(w), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(n, n)).tocsr()
    return idx, G


def harnack_chain(dg: DomainGrid, x, y) -> list[tuple[np.ndarray, float]]:
    """Overlapping interior balls joining ``x`` to ``y``.

    The path minimises ``∫ ds / ρ`` over the 8-connected interior node
    graph, ``ρ`` being :attr:`DomainGrid.chain_distance`; balls of radius
    ``ρ/2`` are laid along it with consecutive centres at most ``ρ_i / 2``
    apart.
    """
    X, Y = dg.xy
    ix = dg.spec.nearest_index(x)
    iy = dg.spec.nearest_index(y)
    if not (dg.interior[ix] and dg.interior[iy]):
        raise ValueError("chain endpoints must be interior nodes")
    clr = dg.chain_distance
    if ix == iy:
        return [(dg.node_point(ix), clr[ix] / 2)]
    idx, G = _interior_graph(dg)
    dists, pred = dijkstra(G, directed=False, indices=idx[ix], return_predecessors=True)
    if not np.isfinite(dists[idx[iy]]):
        raise ValueError("points lie in different components of the domain")
    flat_nodes = np.flatnonzero(dg.interior.ravel())
    path = [idx[iy]]
    while path[-1] != idx[ix]:
        path.append(pred[path[-1]])
    path = flat_nodes[np.array(path[::-1])]
    P = np.column_stack([X.flat[path], Y.flat[path]])
    rho = clr.flat[path]
    seg = np.hypot(*np.diff(P, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    balls = []
    pos = 0.0
    while True:
        i = min(int(np.searchsorted(arc, pos, side="right")) - 1, len(seg) - 1)
        t = (pos - arc[i]) / seg[i]
        c = P[i] + t * (P[i + 1] - P[i])
        # chain_distance is 1-Lipschitz, so this bound holds between nodes
        r = max(rho[i] - t * seg[i], rho[i + 1] - (1 - t) * seg[i])
        balls.append((c, float(r / 2)))
        if pos >= arc[-1]:
            return balls
        pos = min(pos + r / 2, arc[-1])


@dataclass
class NTAReport:
    worst_K: float
    worst_chain_ratio: float
    connected: bool
    failures: list = field(default_factory=list)
    passed: bool = True


def check_nta(dg: DomainGrid, K: float, radii: Sequence[float], n_points: int = 12,
              n_pairs: int = 12, seed: int = 0) -> NTAReport:
    """Sampled empirical check of the corkscrew and Harnack-chain conditions."""
    rng = np.random.default_rng(seed)
    failures = []
    _, ncomp = ndimage.label(dg.interior, structure=np.ones((3, 3), bool))
    connected = ncomp == 1
    if not connected:
        failures.append(f"interior has {ncomp} connected components")
    diam = dg.diameter()
    for r in radii:
        if not 4 * dg.h < r < diam:
            raise ValueError(f"radius {r} outside (4h, diameter)")
    SX, SY = dg.snapped_boundary_coords()
    g = (dg.node_class == GRAPH) & ndimage.binary_dilation(dg.interior)
    pts = np.column_stack([SX[g], SY[g]])
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= dg.R / 2]
    if len(pts) > n_points:
        pts = pts[np.sort(rng.choice(len(pts), n_points, replace=False))]
    worst_K = 0.0
    for p in pts:
        for r in radii:
            try:
                _, Kp = corkscrew(dg, p, r)
            except CorkscrewError as e:
                Kp = e.best_K
            worst_K = max(worst_K, Kp)
            if Kp > 2 * K:
                failures.append(f"corkscrew at {tuple(np.round(p, 6))}, r={r}: K'={Kp:.4g}")
    worst_chain = 0.0
    if connected:
        X, Y = dg.xy
        cand = np.flatnonzero((dg.interior & (dg.clearance >= 2 * dg.h)
                               & dg.ball_mask((0, 0), dg.R / 2)).ravel())
        for _ in range(n_pairs if cand.size >= 2 else 0):
            a, b = rng.choice(cand, 2, replace=False)
            pa = np.array([X.flat[a], Y.flat[a]])
            pb = np.array([X.flat[b], Y.flat[b]])
            balls = harnack_chain(dg, pa, pb)
            dmin = min(dg.clearance.flat[a], dg.clearance.flat[b])
            scale = 1 + max(0.0, np.log(np.hypot(*(pa - pb)) / dmin))
            worst_chain = max(worst_chain, len(balls) / scale)
    return NTAReport(worst_K, worst_chain, connected, failures, passed=not failures)
