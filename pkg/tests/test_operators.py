import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhplab.geometry import GridSpec, LipschitzGraphDomain, build_graph_domain
from bhplab.operators import (InteriorView, OperatorSpec, apply_operator, centered_gradient,
                              discrete_pucci, pucci_minus, pucci_plus, stencil_for)

from conftest import half_disk

DG = half_disk(1 / 32)
WIDE = build_graph_domain(LipschitzGraphDomain.flat(), GridSpec.centered(1 / 32, 1.0, pad=3),
                          reach=2)
X, Y = DG.xy
eig_lists = st.lists(st.floats(-100, 100), min_size=1, max_size=4)
ellipticity = st.tuples(st.floats(0.1, 5), st.floats(1, 5)).map(lambda t: (t[0], t[0] * t[1]))


def _smooth_field(seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=6)
    return (a[0] * np.sin(2 * X + a[1]) * np.cos(3 * Y + a[2]) + a[3] * X * Y
            + a[4] * X ** 3 + a[5] * np.exp(Y))


def _interior(v):
    return v[DG.interior]


# --- pointwise Pucci -----------------------------------------------------------------------


def test_pucci_minus_examples():
    assert pucci_minus([1, 1], 1, 2) == 2
    assert pucci_minus([1, -1], 1, 2) == -1
    assert pucci_minus([0, 0], 1, 2) == 0


def test_pucci_plus_examples():
    assert pucci_plus([1, -1], 1, 2) == 1


@given(eig_lists)
def test_pucci_trace_reduction(e):
    assert pucci_plus(e, 1, 1) == pytest.approx(sum(e), abs=1e-9)
    assert pucci_minus(e, 1, 1) == pytest.approx(sum(e), abs=1e-9)


@given(eig_lists, ellipticity)
def test_pucci_plus_minus_duality(e, lL):
    lam, Lam = lL
    assert pucci_plus(e, lam, Lam) == pytest.approx(-pucci_minus([-x for x in e], lam, Lam),
                                                    rel=1e-12, abs=1e-9)
    assert pucci_minus(e, lam, Lam) <= pucci_plus(e, lam, Lam) + 1e-9


def test_operator_spec_validation():
    with pytest.raises(ValueError, match="p must exceed 1"):
        OperatorSpec("plaplace", p=1.0)
    with pytest.raises(ValueError):
        OperatorSpec("pucci", lam=2, Lam=1)
    with pytest.raises(ValueError):
        OperatorSpec("pucci", M=-1)
    with pytest.raises(ValueError):
        OperatorSpec("bogus")


def test_stencil_directions_come_in_pairs():
    for n in (8, 16):
        st_ = stencil_for(OperatorSpec("pucci", directions=n))
        dirs = {tuple(d) for d in st_.directions}
        for d in st_.directions:
            assert (-d[0], -d[1]) in dirs or tuple(d) in dirs
        assert np.linalg.matrix_rank(np.array(st_.directions, dtype=float)) == 2


# --- grid operators ------------------------------------------------------------------------


def test_laplace_of_linear_is_zero():
    v = apply_operator(OperatorSpec("laplace"), Y.copy(), DG)
    assert np.max(np.abs(_interior(v))) <= 1e-10


def test_laplace_of_quadratic_is_four():
    v = apply_operator(OperatorSpec("laplace"), X ** 2 + Y ** 2, DG)
    assert np.max(np.abs(_interior(v) - 4)) <= 1e-9


def test_operator_is_nan_off_interior():
    v = apply_operator(OperatorSpec("laplace"), X ** 2 + Y ** 2, DG)
    assert np.all(np.isnan(v[~DG.interior]))


@pytest.mark.parametrize("directions", [8, 16])
def test_pucci_minus_of_saddle(directions):
    op = OperatorSpec("pucci", lam=1, Lam=2, directions=directions)
    dg = DG if directions == 8 else WIDE
    Xg, Yg = dg.xy
    v = apply_operator(op, Xg ** 2 - Yg ** 2, dg)
    assert np.max(np.abs(v[dg.interior] - pucci_minus([2, -2], 1, 2))) <= 1e-9


def test_pucci_directional_approximation_improves_with_directions():
    # rotated saddle: eigen-directions off the stencil axes
    th = 0.3
    c, s = np.cos(th), np.sin(th)
    dg = WIDE
    Xg, Yg = dg.xy
    u = (c * Xg + s * Yg) ** 2 - (-s * Xg + c * Yg) ** 2
    exact = pucci_minus([2, -2], 1, 2)
    errs = []
    for n in (8, 16):
        v = apply_operator(OperatorSpec("pucci", lam=1, Lam=2, directions=n), u, dg)
        errs.append(np.max(np.abs(v[dg.interior] - exact)))
    assert errs[1] < errs[0]


def test_plaplace_p2_equals_laplace():
    for seed in range(5):
        u = _smooth_field(seed)
        a = apply_operator(OperatorSpec("laplace"), u, DG)
        b = apply_operator(OperatorSpec("plaplace", p=2.0, reg_delta=0.0), u, DG)
        scale = np.max(np.abs(_interior(a)))
        assert np.max(np.abs(_interior(a - b))) <= 1e-12 * max(scale, 1)


def test_pucci_reduces_to_laplace():
    u = _smooth_field(3)
    a = apply_operator(OperatorSpec("laplace"), u, DG)
    b = apply_operator(OperatorSpec("pucci", lam=1, Lam=1), u, DG)
    assert np.max(np.abs(_interior(a - b))) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(["laplace", "pucci"]),
       bump=st.floats(1e-3, 10), sign=st.sampled_from(["minus", "plus"]))
def test_monotone_in_neighbour_values(seed, kind, bump, sign):
    op = {"laplace": OperatorSpec("laplace"),
          "pucci": OperatorSpec("pucci", lam=1, Lam=3, M=0.0, pucci_sign=sign)}[kind]
    u = _smooth_field(seed)
    r = np.random.default_rng(seed)
    view = InteriorView(DG)
    k = int(r.integers(view.n))
    i, j = divmod(int(view.flat[k]), view.ny)
    di, dj = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)][
        int(r.integers(8 if kind == "pucci" else 4))]
    before = apply_operator(op, u, DG)[i, j]
    u2 = u.copy()
    u2[i + di, j + dj] += bump
    after = apply_operator(op, u2, DG)[i, j]
    assert after >= before - 1e-9 * max(1.0, abs(before))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), gamma=st.floats(0.01, 100),
       kind=st.sampled_from(["laplace", "pucci"]), M=st.floats(0, 3))
def test_positive_homogeneity(seed, gamma, kind, M):
    op = OperatorSpec(kind) if kind == "laplace" else OperatorSpec("pucci", lam=1, Lam=2, M=M)
    u = _smooth_field(seed)
    a = apply_operator(op, gamma * u, DG)
    b = gamma * apply_operator(op, u, DG)
    scale = np.max(np.abs(_interior(b)))
    assert np.max(np.abs(_interior(a - b))) <= 1e-12 * max(scale, 1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), gamma=st.floats(0.1, 10), p=st.floats(1.2, 5))
def test_plaplace_homogeneity_without_regularisation(seed, gamma, p):
    op = OperatorSpec("plaplace", p=p, reg_delta=0.0)
    u = _smooth_field(seed)
    a = apply_operator(op, gamma * u, DG)
    b = gamma ** (p - 1) * apply_operator(op, u, DG)
    scale = np.max(np.abs(_interior(b)))
    assert np.max(np.abs(_interior(a - b))) <= 1e-10 * max(scale, 1)


@settings(max_examples=30, deadline=None)
@given(s1=st.integers(0, 10_000), s2=st.integers(0, 10_000), M=st.floats(0, 2),
       sign=st.sampled_from(["minus", "plus"]))
def test_structural_sandwich(s1, s2, M, sign):
    lam, Lam = 1.0, 2.5
    op = OperatorSpec("pucci", lam=lam, Lam=Lam, M=M, pucci_sign=sign)
    u, v = _smooth_field(s1), _smooth_field(s2)
    diff = _interior(apply_operator(op, u, DG) - apply_operator(op, v, DG))
    w = u - v
    view = InteriorView(DG)
    gx, gy = centered_gradient(w, view)
    grad = M * np.hypot(gx, gy)
    lo = discrete_pucci(w, DG, lam, Lam, "minus", view=view) - grad
    hi = discrete_pucci(w, DG, lam, Lam, "plus", view=view) + grad
    # interior ordering of InteriorView matches boolean-mask ordering
    tol = 1e-9 * (1 + np.abs(diff))
    assert np.all(lo <= diff + tol)
    assert np.all(diff <= hi + tol)
