import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from bhplab.geometry import (CAP, EXTERIOR, GRAPH, INTERIOR, CorkscrewError, GridSpec,
                             LipschitzGraphDomain, MaskDomain, build_graph_domain,
                             build_mask_domain, check_nta, corkscrew, harnack_chain, localize,
                             read_mask, refine_mask, write_mask)

from conftest import graph_domain, half_disk


def _ball_is_interior(dg, y, rho):
    """Exhaustive scan: every node strictly inside ``B_rho(y)`` is interior."""
    m = dg.ball_mask(y, rho)
    return bool(np.all(dg.interior[m]))


# --- construction --------------------------------------------------------------------------


def test_gridspec_rejects_nonpositive_h():
    with pytest.raises(ValueError):
        GridSpec.centered(0.0, 1.0)


def test_lipschitz_bound_checked():
    with pytest.raises(ValueError, match="Lipschitz"):
        LipschitzGraphDomain(lambda x: 0.3 * np.abs(x), 0.1)
    with pytest.raises(ValueError, match="g\\(0\\) = 0"):
        LipschitzGraphDomain(lambda x: 0 * x + 0.1, 0.1)


def test_flat_domain_is_upper_half_disk(hd64):
    X, Y = hd64.xy
    expected = (Y > 0) & (X * X + Y * Y < 1)
    assert np.array_equal(hd64.interior, expected)
    m = hd64.interior & (X * X + Y * Y < 0.25)
    assert np.max(np.abs(hd64.dist[m] - Y[m])) <= hd64.h


def test_cone_excludes_nodes_on_or_below_graph():
    dg = graph_domain("cone", 1 / 64, L=0.05)
    X, Y = dg.xy
    assert not np.any(dg.interior & (Y <= 0.05 * np.abs(X)))


def test_piecewise_linear_distance_matches_brute_force():
    h = 1 / 128
    xs = np.array([-1.5, -0.5, 0.0, 0.5, 1.5])
    ys = np.array([0.0, 0.1, 0.05, 0.1, 0.0])
    ys = ys - np.interp(0.0, xs, ys)
    dom = LipschitzGraphDomain.piecewise_linear(xs, ys)
    assert dom.L == pytest.approx(0.1)
    dg = build_graph_domain(dom, GridSpec.centered(h, 1.25))
    X, Y = dg.xy
    t = np.linspace(-1.5, 1.5, 30001)
    gp = np.column_stack([t, np.interp(t, xs, ys)])
    m = dg.interior & (X * X + Y * Y < 0.5)
    pts = np.column_stack([X[m], Y[m]])
    from scipy.spatial import cKDTree
    brute, _ = cKDTree(gp).query(pts)
    assert np.max(np.abs(dg.dist[m] - brute)) <= h


def test_graph_nodes_have_zero_distance_up_to_h():
    dg = graph_domain("sawtooth", 1 / 64)
    assert np.all(dg.dist >= 0)
    assert np.all(dg.dist[dg.node_class == GRAPH] <= dg.h)


def test_distance_is_lipschitz_on_grid_neighbours():
    dg = graph_domain("sawtooth", 1 / 64, L=0.1)
    d = dg.dist
    for di, dj in ((1, 0), (0, 1), (1, 1)):
        diff = np.abs(d[di:, dj:] - d[:d.shape[0] - di, :d.shape[1] - dj])
        assert np.max(diff) <= np.hypot(di, dj) * dg.h + 2 * dg.h


def test_distance_symmetric_for_even_graph():
    dg = graph_domain("sawtooth", 1 / 64)
    assert np.array_equal(dg.dist, dg.dist[::-1, :])


def test_every_interior_stencil_neighbour_is_classified():
    dg = graph_domain("sawtooth", 1 / 64)
    near = ndimage.binary_dilation(dg.interior, structure=np.ones((3, 3), bool))
    assert not np.any(near & (dg.node_class == EXTERIOR))
    assert set(np.unique(dg.node_class)) == {EXTERIOR, INTERIOR, GRAPH, CAP}


def test_disconnected_mask_rejected():
    spec = GridSpec.centered(1 / 32, 1.0)
    X, Y = spec.coords()
    occ = ((X + 0.5) ** 2 + Y ** 2 < 0.16) | ((X - 0.5) ** 2 + Y ** 2 < 0.16)
    with pytest.raises(ValueError, match="connected"):
        MaskDomain(occ, spec)


def test_mask_roundtrip_and_refine(tmp_path):
    spec = GridSpec.centered(1 / 16, 1.0)
    X, Y = spec.coords()
    mask = MaskDomain((np.abs(X) < 0.9) & (Y > -0.5) & (Y < 0.9), spec)
    path = tmp_path / "m.txt"
    write_mask(mask, path)
    head = path.read_text().splitlines()[0].split()
    assert len(head) == 3
    back = read_mask(path)
    assert np.array_equal(back.occupancy, mask.occupancy)
    assert back.spec == mask.spec
    fine = refine_mask(mask)
    assert fine.spec.h == spec.h / 2
    assert np.array_equal(fine.occupancy[::2, ::2], mask.occupancy)


def test_read_mask_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.txt"):
        read_mask(tmp_path / "nope.txt")


# --- localize ------------------------------------------------------------------------------


def test_localize_half_space_quarter_disk(hd64):
    sub = localize(hd64, (0.0, 0.0), 0.25)
    X, Y = sub.xy
    assert np.array_equal(sub.interior, (Y > 0) & (X * X + Y * Y < 0.0625))


def test_localize_idempotent(hd64):
    a = localize(hd64, (0.1, 0.0), 0.2)
    b = localize(hd64, (0.1, 0.0), 0.2)
    assert np.array_equal(a.node_class, b.node_class)
    assert a.offset == b.offset


def test_localize_counts_match_node_scan():
    dg = graph_domain("sawtooth", 1 / 64)
    for c, r in (((0.0, 0.0), 0.3), ((0.2, 0.1), 0.15), ((-0.3, 0.4), 0.1)):
        sub = localize(dg, c, r)
        brute = int(np.sum(dg.interior & dg.ball_mask(c, r)))
        assert int(sub.interior.sum()) == brute


def test_localize_rejects_tiny_radius(hd64):
    with pytest.raises(ValueError, match="resolution floor"):
        localize(hd64, (0.0, 0.0), 2 * hd64.h)


_SAW = graph_domain("sawtooth", 1 / 64, L=0.1)


@settings(max_examples=40, deadline=None)
@given(cx=st.floats(-0.4, 0.4), cy=st.floats(0.05, 0.4), r=st.floats(0.07, 0.4))
def test_localization_consistency(cx, cy, r):
    sub = localize(_SAW, (cx, cy), r)
    parent = _SAW.restrict(_SAW.node_class, sub)
    X, Y = sub.xy
    inside = (X - cx) ** 2 + (Y - cy) ** 2 < r * r
    par_int = parent == INTERIOR
    assert np.array_equal(sub.interior[inside], par_int[inside])
    # graph tags survive where the parent had them next to the new interior
    g = sub.node_class == GRAPH
    assert np.all(parent[g] == GRAPH)


# --- corkscrew and chains ------------------------------------------------------------------


def test_corkscrew_half_space(hd64):
    y, K = corkscrew(hd64, (0.0, 0.0), 0.5)
    assert np.allclose(y, (0.0, 0.25))
    assert K == pytest.approx(2.0)


def test_corkscrew_sawtooth_ball_inclusion():
    dg = graph_domain("sawtooth", 1 / 128, L=0.1)
    for x in ((0.0, 0.0), (0.13, 0.013), (-0.25, 0.025)):
        y, K = corkscrew(dg, x, 0.25)
        assert _ball_is_interior(dg, y, 0.25 / K)
        assert np.hypot(*(y - np.array(x))) + 0.25 / K <= 0.25 + 1e-12


def test_corkscrew_radius_too_large(hd64):
    with pytest.raises(ValueError):
        corkscrew(hd64, (0.0, 0.0), 10.0)


def test_corkscrew_constant_bound_enforced(hd64):
    with pytest.raises(CorkscrewError):
        corkscrew(hd64, (0.0, 0.0), 0.5, K=0.5)


def test_harnack_chain_single_ball(hd64):
    balls = harnack_chain(hd64, (0.0, 0.5), (0.0, 0.5))
    assert len(balls) == 1


def test_harnack_chain_half_space_straight(hd64):
    balls = harnack_chain(hd64, (0.0, 0.5), (0.25, 0.5))
    assert len(balls) <= 4
    assert all(r <= 0.25 + 1e-12 for _, r in balls)


def test_harnack_chain_balls_inside_sawtooth():
    dg = graph_domain("sawtooth", 1 / 64, L=0.1)
    balls = harnack_chain(dg, (-0.4, 0.05), (0.35, 0.1))
    for c, r in balls:
        assert _ball_is_interior(dg, c, r)
    for (c1, r1), (c2, r2) in zip(balls, balls[1:]):
        assert np.hypot(*(c2 - c1)) <= max(r1, r2) * (1 + 1e-12)


def test_harnack_chain_count_nonincreasing_under_refinement():
    counts = [len(harnack_chain(graph_domain("sawtooth", h, L=0.1), (-0.3, 0.1), (0.3, 0.1)))
              for h in (1 / 32, 1 / 64, 1 / 128)]
    for a, b in zip(counts, counts[1:]):
        assert b <= a + 1


# --- NTA -----------------------------------------------------------------------------------


def test_check_nta_half_space(hd64):
    rep = check_nta(hd64, K=2.0, radii=[0.125, 0.25])
    assert rep.passed
    assert rep.worst_K <= 2.0 + 1e-12


def test_check_nta_monotone_in_L():
    worst = [check_nta(graph_domain("sawtooth", 1 / 64, L=L), K=4.0, radii=[0.125, 0.25]).worst_K
             for L in (0.0, 0.05, 0.1)]
    assert worst[0] <= worst[1] <= worst[2]


def test_check_nta_reports_disconnection():
    spec = GridSpec.centered(1 / 32, 1.0)
    X, Y = spec.coords()
    occ = (((X + 0.5) ** 2 + Y ** 2 < 0.16) | ((X - 0.5) ** 2 + Y ** 2 < 0.16)) & (Y > 0)
    dg = build_mask_domain(MaskDomain(occ, spec, require_connected=False))
    rep = check_nta(dg, K=4.0, radii=[0.25])
    assert not rep.connected
    assert not rep.passed
    assert any("connected" in f for f in rep.failures)


def test_snapping_moves_graph_nodes_only():
    dg = graph_domain("sawtooth", 1 / 64)
    X, Y = dg.xy
    SX, SY = dg.snapped_boundary_coords()
    g = dg.node_class == GRAPH
    assert np.allclose(SY[g], 0.05 * np.abs(X[g] - 0.5 * np.round(X[g] / 0.5)))
    assert np.array_equal(SY[~g], Y[~g])
    assert np.array_equal(SX, X)


def test_half_disk_helper_matches_fixture(hd64):
    assert np.array_equal(half_disk(1 / 64).node_class, hd64.node_class)
