import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhplab.geometry import GridSpec, MaskDomain, build_mask_domain
from bhplab.operators import OperatorSpec
from bhplab.runner import slab_solution
from bhplab.solver import (DirichletProblem, SolverConfig, comparison_check, dump_csv,
                           extension_check, residual, solve)

from conftest import graph_domain, half_disk, solve_field

LAPLACE = OperatorSpec("laplace")


def _box(h):
    spec = GridSpec.centered(h, 1.5)
    X, Y = spec.coords()
    return build_mask_domain(MaskDomain((np.abs(X) < 1) & (np.abs(Y) < 1), spec), R=1.5)


def test_half_space_linear_exact(hd64):
    res = solve_field(hd64, LAPLACE, 0.0, lambda x, y: y)
    X, Y = hd64.xy
    assert np.max(np.abs(res.u - Y)[hd64.interior]) <= 1e-12


def test_box_quadratic_exact():
    dg = _box(1 / 32)
    res = solve_field(dg, LAPLACE, 4.0, lambda x, y: x * x + y * y)
    X, Y = dg.xy
    assert np.max(np.abs(res.u - X * X - Y * Y)[dg.interior]) <= 1e-12


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_plaplace_slab_oracle(p):
    errs = []
    for h in (1 / 32, 1 / 64):
        dg = half_disk(h)
        X, Y = dg.xy
        exact = slab_solution(p)(X, Y)
        res = solve_field(dg, OperatorSpec("plaplace", p=p), -1.0, exact)
        errs.append(np.max(np.abs(res.u - exact)[dg.interior]))
        assert errs[-1] <= 5 * h
    # p = 2 is exact up to round-off, where the error no longer orders
    assert errs[1] < errs[0] or errs[0] < 1e-12


def test_plaplace_p2_slab_max():
    dg = half_disk(1 / 64)
    X, Y = dg.xy
    res = solve_field(dg, OperatorSpec("plaplace", p=2.0), -1.0, slab_solution(2.0)(X, Y))
    assert np.max(res.u[dg.interior]) == pytest.approx(1 / 8, abs=1e-6)


def test_pucci_isotropic_matches_laplace():
    dg = graph_domain("sawtooth", 1 / 32)
    X, Y = dg.xy
    f = np.sin(3 * X) * Y
    g = lambda x, y: np.cos(x) + y
    a = solve_field(dg, LAPLACE, f, g).u
    b = solve_field(dg, OperatorSpec("pucci", lam=1, Lam=1), f, g).u
    assert np.max(np.abs(a - b)[dg.interior]) <= 10 * 1e-8


def test_zero_data_gives_zero(hd64):
    for op in (LAPLACE, OperatorSpec("pucci", lam=1, Lam=2, M=1), OperatorSpec("plaplace", p=3)):
        res = solve_field(hd64, op, 0.0, 0.0)
        assert np.all(res.u[hd64.interior] == 0.0)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000), kind=st.sampled_from(["laplace", "pucci"]))
def test_discrete_maximum_principle(seed, kind):
    dg = half_disk(1 / 16)
    r = np.random.default_rng(seed)
    g = r.uniform(-1, 1, dg.shape)
    op = LAPLACE if kind == "laplace" else OperatorSpec("pucci", lam=1, Lam=3, M=0.5)
    u = solve_field(dg, op, 0.0, g).u[dg.interior]
    gb = g[dg.boundary]
    slack = 1e-9
    assert gb.min() - slack <= u.min() and u.max() <= gb.max() + slack


def _order(dgs, exact, f, region):
    errs = []
    for dg in dgs:
        X, Y = dg.xy
        u = solve_field(dg, LAPLACE, f, exact).u
        m = dg.interior & region(dg)
        errs.append(np.max(np.abs(u - exact(X, Y))[m]))
    hs = [dg.h for dg in dgs]
    return np.polyfit(np.log(hs), np.log(errs), 1)[0]


def test_convergence_order_second_on_node_aligned_domain():
    exact = lambda x, y: np.exp(x) * np.sin(y) + x * x * y
    f = lambda x, y: 2 * y
    slope = _order([half_disk(h) for h in (1 / 16, 1 / 32, 1 / 64)], exact, f,
                   lambda dg: np.ones(dg.shape, bool))
    assert abs(slope - 2) <= 0.3


def test_convergence_order_first_on_lipschitz_graph():
    exact = lambda x, y: np.exp(x) * np.sin(y + 0.3)
    slope = _order([graph_domain("sawtooth", h, L=0.1) for h in (1 / 32, 1 / 64, 1 / 128)],
                   exact, 0.0, lambda dg: np.ones(dg.shape, bool))
    assert abs(slope - 1) <= 0.3


def test_plaplace_energy_descent(hd64):
    for p in (1.5, 3.0):
        X, Y = hd64.xy
        res = solve_field(hd64, OperatorSpec("plaplace", p=p), -1.0, 0.0)
        energies = res.diagnostics["energies"]
        assert len(energies) > 1
        for stage in _stages(res):
            assert all(b <= a + 1e-12 * abs(a) for a, b in zip(stage, stage[1:]))


def _stages(res):
    # energies restart with each continuation value of delta
    deltas = res.diagnostics["deltas"]
    out, cur, last = [], [], None
    for e, d in zip(res.diagnostics["energies"], deltas):
        if d != last and cur:
            out.append(cur)
            cur = []
        cur.append(e)
        last = d
    out.append(cur)
    return out


def test_converged_residual_below_tolerance_plus_roundoff(hd64):
    X, Y = hd64.xy
    for op in (LAPLACE, OperatorSpec("pucci", lam=1, Lam=2, M=1)):
        res = solve_field(hd64, op, np.sin(4 * X), 0.0)
        tol = SolverConfig().tol_for(op.kind)
        umax = np.max(np.abs(res.u[hd64.interior]))
        floor = res.diagnostics["roundoff_floor"]
        assert floor <= 100 * np.finfo(float).eps * max(umax, 1) / hd64.h ** 2 * (1 + 1e-12)
        assert res.residual_inf <= tol + floor
        prob = DirichletProblem(hd64.with_boundary_values(0.0), op, np.sin(4 * X))
        assert residual(op, res.u, prob.f, hd64) == pytest.approx(res.residual_inf)


def test_problem_validation(hd64):
    with pytest.raises(ValueError, match="boundary values"):
        DirichletProblem(hd64, LAPLACE, 0.0)
    with pytest.raises(ValueError, match="finite"):
        DirichletProblem(hd64.with_boundary_values(0.0), LAPLACE, np.nan)
    with pytest.raises(ValueError):
        SolverConfig(tol=-1)


# --- comparison and extension ---------------------------------------------------------------


def test_comparison_sign_of_source(hd64):
    g = hd64.with_boundary_values(0.0)
    rep = comparison_check(DirichletProblem(g, LAPLACE, 1.0), DirichletProblem(g, LAPLACE, -1.0))
    assert rep.passed
    u1 = solve(DirichletProblem(g, LAPLACE, 1.0)).u
    u2 = solve(DirichletProblem(g, LAPLACE, -1.0)).u
    assert np.all((u2 - u1)[hd64.interior] > 0)


def test_comparison_identical_problems(hd64):
    g = hd64.with_boundary_values(lambda x, y: y)
    p = DirichletProblem(g, LAPLACE, 0.5)
    rep = comparison_check(p, p)
    assert rep.max_excess <= 2 * 1e-10


def test_comparison_precondition_names_node(hd64):
    g = hd64.with_boundary_values(0.0)
    with pytest.raises(ValueError, match="f1 >= f2 violated at node"):
        comparison_check(DirichletProblem(g, LAPLACE, -1.0), DirichletProblem(g, LAPLACE, 1.0))


def test_comparison_pucci_random_pairs():
    dg = half_disk(1 / 16)
    op = OperatorSpec("pucci", lam=1, Lam=2, M=0.5)
    r = np.random.default_rng(7)
    for _ in range(20):
        f2 = r.uniform(-1, 1, dg.shape)
        f1 = f2 + r.uniform(0, 1, dg.shape)
        g1 = r.uniform(-1, 1, dg.shape)
        g2 = g1 + r.uniform(0, 1, dg.shape)
        rep = comparison_check(DirichletProblem(dg.with_boundary_values(g1), op, f1),
                               DirichletProblem(dg.with_boundary_values(g2), op, f2))
        assert rep.passed, rep


def test_extension_laplace(hd64):
    X, Y = hd64.xy
    prob = DirichletProblem(hd64.with_boundary_values(0.0), LAPLACE, np.cos(5 * X) - Y)
    rep = extension_check(hd64, (0.0, 0.0), 0.3, prob)
    assert rep.passed and rep.sup_difference <= 2e-10


def test_extension_pucci(hd64):
    op = OperatorSpec("pucci", lam=1, Lam=2)
    prob = DirichletProblem(hd64.with_boundary_values(0.0), op, 1.0)
    rep = extension_check(hd64, (0.1, 0.0), 0.25, prob)
    assert rep.passed and rep.sup_difference <= 2e-8


def test_extension_rejects_small_radius(hd64):
    prob = DirichletProblem(hd64.with_boundary_values(0.0), LAPLACE, 1.0)
    with pytest.raises(ValueError, match="resolution floor"):
        extension_check(hd64, (0.0, 0.0), 2 * hd64.h, prob)


def test_dump_csv(tmp_path, hd64):
    res = solve_field(hd64, LAPLACE, 0.0, lambda x, y: y)
    path = tmp_path / "u.csv"
    dump_csv(res.u, hd64, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,value,node_class"
    assert len(lines) - 1 == int(np.sum(hd64.node_class != 0))
