import numpy as np
import pytest

from proxsplit.bestapprox import (
    CompositeConstraint,
    ProjectionConfig,
    QualificationError,
    SummableErrorSchedule,
    encode_problem,
    feasibility_residual,
    project_intersection,
)
from proxsplit.functions import Indicator
from proxsplit.linops import LinearOperator
from proxsplit.sets import Ball, Box, Halfspace
from proxsplit.solver import CompositeProxProblem, SolverConfig, Term, solve


def constraint(cset, op=None, shift=None):
    op = op or LinearOperator.identity(cset.dim)
    shift = np.zeros(op.dim_out) if shift is None else np.asarray(shift, dtype=float)
    return CompositeConstraint(op, shift, cset)


def test_single_ball_plain_projection():
    sol, _ = project_intersection([3.0, 4.0], [constraint(Ball([0.0, 0.0], 1.0))],
                                  ProjectionConfig(tol=1e-10),
                                  slater_point=[0.0, 0.0])
    assert sol.converged
    np.testing.assert_allclose(sol.x, [0.6, 0.8], atol=1e-7)


def test_disk_halfplane_fixture():
    constraints = [constraint(Ball([0.0, 0.0], 1.0)),
                   constraint(Halfspace([1.0, 0.0], 0.0))]
    sol, _ = project_intersection([1.0, 1.0], constraints, ProjectionConfig(tol=1e-9),
                                  slater_point=[-0.5, 0.0])
    assert sol.converged
    np.testing.assert_allclose(sol.x, [0.0, 1.0], atol=1e-5)
    assert feasibility_residual(sol.x, constraints) <= 1e-5


def test_halfspace_preimage_fixture():
    row = LinearOperator.from_matrix([[1.0, 1.0]])
    constraints = [CompositeConstraint(row, np.zeros(1), Halfspace([1.0], 1.0))]
    sol, _ = project_intersection([1.0, 1.0], constraints, ProjectionConfig(tol=1e-10),
                                  slater_point=[0.0, 0.0])
    assert sol.converged
    np.testing.assert_allclose(sol.x, [0.5, 0.5], atol=1e-6)


def test_feasibility_residual_examples():
    ball = [constraint(Ball([0.0, 0.0], 1.0))]
    assert feasibility_residual([0.3, 0.4], ball) == 0.0
    assert feasibility_residual([2.0, 0.0], ball) == pytest.approx(1.0)
    mixed = ball + [constraint(Box([0.0, 0.0], [1.0, 1.0]))]
    assert feasibility_residual([2.0, 0.0], mixed) == pytest.approx(
        max(1.0, np.linalg.norm([1.0, 0.0])))


def test_converged_implies_feasible():
    config = ProjectionConfig(tol=1e-8)
    constraints = [constraint(Ball([0.0, 0.0], 1.0)),
                   constraint(Halfspace([1.0, 0.0], 0.0))]
    sol, _ = project_intersection([2.0, 2.0], constraints, config,
                                  slater_point=[-0.5, 0.0])
    assert sol.converged
    assert feasibility_residual(sol.x, constraints) <= 10 * config.tol


def test_variational_inequality_at_solution():
    constraints = [constraint(Ball([0.0, 0.0], 1.0)),
                   constraint(Halfspace([1.0, 0.0], 0.0))]
    z = np.array([1.0, 1.0])
    sol, _ = project_intersection(z, constraints, ProjectionConfig(tol=1e-10),
                                  slater_point=[-0.5, 0.0])
    rng = np.random.default_rng(6)
    tol = 1e-5
    for _ in range(200):
        y = rng.standard_normal(2) * 1.5
        y = constraints[0].set.project(y)
        y = constraints[1].set.project(y)
        if feasibility_residual(y, constraints) > 1e-12:
            continue
        assert float((z - sol.x) @ (y - sol.x)) <= tol * (1.0 + np.linalg.norm(y))


def test_equivalence_with_generic_solver_under_error_substitution():
    # same iterates once a_{i,n} = -gamma_n c_{i,n}
    rng = np.random.default_rng(7)
    z = rng.standard_normal(3)
    constraints = [
        constraint(Ball([0.2, 0.0, -0.1], 1.2)),
        CompositeConstraint(LinearOperator.from_matrix(rng.standard_normal((2, 3))),
                            rng.standard_normal(2) * 0.1, Box([-1.0, -1.0], [1.0, 1.0])),
    ]
    schedule = SummableErrorSchedule(amplitude=0.05, exponent=2.0, seed=3)
    gamma = 0.21
    config = ProjectionConfig(tol=0.0, max_iter=120, gamma=gamma, lam=0.9,
                              error_schedule=schedule)
    xs_proj = []
    project_intersection(z, constraints, config, allow_unknown_qualification=True,
                         callback=lambda n, x, v: xs_proj.append(x))

    problem = encode_problem(z, constraints)

    def injector(i, n):
        return -gamma * schedule.draw(i, n, constraints[i].op.dim_out)

    xs_gen = []
    solve(problem, SolverConfig(tol=0.0, max_iter=120, gamma=gamma, lam=0.9,
                                error_injector=injector),
          callback=lambda s: xs_gen.append(s.x))

    assert len(xs_proj) == len(xs_gen) == 121
    for a, b in zip(xs_proj, xs_gen):
        assert np.max(np.abs(a - b)) <= 1e-12


def test_qualification_gate():
    constraints = [constraint(Ball([0.0, 0.0], 1.0))]
    with pytest.raises(QualificationError):
        project_intersection([2.0, 0.0], constraints)
    sol, _ = project_intersection([2.0, 0.0], constraints, allow_unknown_qualification=True)
    assert sol.converged
    with pytest.raises(QualificationError):
        project_intersection([2.0, 0.0], constraints, slater_point=[1.0, 0.0])


def test_error_schedule_must_be_summable():
    with pytest.raises(ValueError):
        SummableErrorSchedule(amplitude=0.1, exponent=1.0)
    with pytest.raises(ValueError):
        SummableErrorSchedule(amplitude=0.1, exponent=0.5)


def test_empty_intersection_flagged_stalled():
    constraints = [constraint(Ball([2.0, 0.0], 0.5)),
                   constraint(Ball([-2.0, 0.0], 0.5))]
    sol, trace = project_intersection([0.0, 0.0], constraints,
                                      ProjectionConfig(tol=1e-7, max_iter=20000),
                                      allow_unknown_qualification=True)
    assert not sol.converged
    assert sol.status in ("stalled", "max_iter")
    assert feasibility_residual(sol.x, constraints) > 1e-3


def test_empty_constraint_list_rejected():
    with pytest.raises(ValueError):
        project_intersection([0.0], [])


def test_weights_fixed_to_uniform():
    constraints = [constraint(Ball([0.0, 0.0], 1.0)),
                   constraint(Halfspace([1.0, 0.0], 0.0)),
                   constraint(Box([-2.0, -2.0], [2.0, 2.0]))]
    problem = encode_problem(np.array([1.0, 1.0]), constraints)
    assert all(t.weight == pytest.approx(1.0 / 3.0) for t in problem.terms)
