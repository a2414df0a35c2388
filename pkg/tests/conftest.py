"""Shared grids, solve helpers and the acceptance summary printer."""

from __future__ import annotations

import numpy as np
import pytest

from bhplab.geometry import GridSpec, LipschitzGraphDomain, build_graph_domain
from bhplab.operators import OperatorSpec
from bhplab.solver import DirichletProblem, SolverConfig, solve

ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def half_disk(h: float, R: float = 1.0):
    return build_graph_domain(LipschitzGraphDomain.flat(R), GridSpec.centered(h, R))


def graph_domain(kind: str, h: float, L: float = 0.05, R: float = 1.0):
    dom = {"flat": lambda: LipschitzGraphDomain.flat(R),
           "cone": lambda: LipschitzGraphDomain.cone(L, R),
           "sawtooth": lambda: LipschitzGraphDomain.sawtooth(L, 0.5, R)}[kind]()
    return build_graph_domain(dom, GridSpec.centered(h, 1.25 * R))


def solve_field(dg, op: OperatorSpec, f, g, tol=None):
    res = solve(DirichletProblem(dg.with_boundary_values(g), op, f), SolverConfig(tol=tol))
    assert res.converged, res.residual_inf
    return res


@pytest.fixture(scope="session")
def hd64():
    return half_disk(1 / 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
