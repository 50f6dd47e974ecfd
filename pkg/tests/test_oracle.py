import math

import numpy as np
import pytest

from proxsplit.functions import ElasticNet, Indicator, NormL1, NormL2, ZeroFunction
from proxsplit.linops import LinearOperator
from proxsplit.oracle import (
    Certificate,
    CertificationError,
    GridBoundsError,
    grid_oracle,
    long_run_reference,
    ref_ball_halfspace_through_center,
    ref_project_affine,
    ref_project_ball,
    ref_project_box,
    ref_project_halfspace,
    ref_shrink_l2,
    ref_soft_threshold,
    scalar_oracle,
    scalar_pieces_from_problem,
)
from proxsplit.sets import Ball, Box, Halfspace
from proxsplit.solver import CompositeProxProblem, SolverConfig, Term, solve


def single_term(z, fn, op=None, shift=None):
    z = np.asarray(z, dtype=float)
    op = op or LinearOperator.identity(z.size)
    shift = np.zeros(op.dim_out) if shift is None else np.asarray(shift, dtype=float)
    return CompositeProxProblem(z, [Term(1.0, fn, op, shift)])


def test_grid_disk_projection():
    prob = single_term([3.0, 4.0], Indicator(Ball([0.0, 0.0], 1.0)))
    cert = grid_oracle(prob, bounds=(-2.0, 2.0), resolution=1e-3)
    assert cert.method == "grid"
    assert np.linalg.norm(cert.reference_x - [0.6, 0.8]) <= cert.guaranteed_radius
    assert np.linalg.norm(cert.reference_x - [0.6, 0.8]) <= 5e-3


def test_grid_soft_threshold_1d():
    prob = single_term([3.0], NormL1())
    cert = grid_oracle(prob, bounds=(-5.0, 5.0), resolution=1e-3)
    assert abs(cert.reference_x[0] - 2.0) <= cert.guaranteed_radius
    assert abs(cert.reference_x[0] - 2.0) <= 2e-3


def test_grid_full_space_returns_z():
    prob = single_term([1.25, -0.5], ZeroFunction())
    cert = grid_oracle(prob, bounds=(-3.0, 3.0), resolution=1e-3)
    assert np.linalg.norm(cert.reference_x - prob.z) <= 2e-3


def test_grid_boundary_raises():
    prob = single_term([9.0, 0.0], ZeroFunction())  # minimizer z outside the box
    with pytest.raises(GridBoundsError):
        grid_oracle(prob, bounds=(-2.0, 2.0))


def test_grid_rejects_high_dimension():
    prob = single_term(np.zeros(4), NormL2())
    with pytest.raises(CertificationError):
        grid_oracle(prob)


def test_grid_radius_honest_across_fixtures():
    cases = [
        (single_term([3.0, 4.0], NormL2()), ref_shrink_l2(np.array([3.0, 4.0]), 1.0)),
        (single_term([2.0, -1.0], Indicator(Box([0.0, 0.0], [1.0, 1.0]))),
         np.array([1.0, 0.0])),
        (single_term([1.0, 1.0], Indicator(Halfspace([1.0, 1.0], 1.0))),
         np.array([0.5, 0.5])),
    ]
    for prob, exact in cases:
        cert = grid_oracle(prob, bounds=(-5.0, 5.0), resolution=1e-3)
        assert np.linalg.norm(cert.reference_x - exact) <= cert.guaranteed_radius


def test_scalar_oracle_abs_plus_quadratic():
    # |x| + (x-3)^2/2: pieces around the kink at 0
    pieces = [(-math.inf, 0.0, 0.5, -3.0 - 1.0, 4.5), (0.0, math.inf, 0.5, -3.0 + 1.0, 4.5)]
    cert = scalar_oracle(pieces)
    assert cert.reference_x[0] == pytest.approx(2.0, abs=1e-12)
    assert cert.method == "scalar_analysis"


def test_scalar_oracle_weighted_kinks():
    # 0.5 |x-2| + 0.25 |x| + x^2/2 has kinks at 0 and 2
    def coeffs(lo, hi):
        mid = (lo + hi) / 2.0 if math.isfinite(lo) and math.isfinite(hi) else (lo + 1.0 if math.isfinite(lo) else hi - 1.0)
        a, b, c = 0.5, 0.0, 0.0
        s1 = 1.0 if mid - 2.0 >= 0 else -1.0
        b += 0.5 * s1
        c += -0.5 * s1 * 2.0
        s2 = 1.0 if mid >= 0 else -1.0
        b += 0.25 * s2
        return lo, hi, a, b, c

    pieces = [coeffs(-math.inf, 0.0), coeffs(0.0, 2.0), coeffs(2.0, math.inf)]
    cert = scalar_oracle(pieces)
    assert cert.reference_x[0] == pytest.approx(0.25, abs=1e-12)


def test_scalar_oracle_pure_quadratic():
    cert = scalar_oracle([(-math.inf, math.inf, 0.5, 0.0, 0.0)])
    assert cert.reference_x[0] == 0.0


def test_scalar_oracle_validation():
    with pytest.raises(ValueError):
        scalar_oracle([(0.0, 1.0, 0.5, 0.0, 0.0), (2.0, 3.0, 0.5, 0.0, 0.0)])
    with pytest.raises(ValueError):
        scalar_oracle([(0.0, 1.0, 0.5, 0.0, 0.0), (1.0, 2.0, 0.5, 0.0, 5.0)])
    with pytest.raises(ValueError):
        # derivative drops at the junction: concave kink
        scalar_oracle([(-1.0, 0.0, 0.0, 1.0, 0.0), (0.0, 1.0, 0.0, -1.0, 0.0)])


def test_scalar_pieces_from_problem_matches_solver():
    ident = LinearOperator.identity(1)
    prob = CompositeProxProblem(np.array([3.0]), [
        Term(0.5, NormL1(), ident, np.zeros(1)),
        Term(0.5, NormL1(), ident, np.zeros(1)),
    ])
    cert = scalar_oracle(scalar_pieces_from_problem(prob))
    assert cert.reference_x[0] == pytest.approx(2.0, abs=1e-12)

    scaled = CompositeProxProblem(np.array([1.0]), [
        Term(1.0, NormL1(), LinearOperator.from_matrix([[2.0]]), np.zeros(1))])
    assert scalar_oracle(scalar_pieces_from_problem(scaled)).reference_x[0] == \
        pytest.approx(0.0, abs=1e-12)

    elastic = CompositeProxProblem(np.array([3.0]), [
        Term(1.0, ElasticNet(1.0, 0.5), ident, np.zeros(1))])
    assert scalar_oracle(scalar_pieces_from_problem(elastic)).reference_x[0] == \
        pytest.approx(1.0, abs=1e-12)

    boxed = CompositeProxProblem(np.array([2.0]), [
        Term(1.0, Indicator(Box([0.0], [1.0])), ident, np.zeros(1))])
    assert scalar_oracle(scalar_pieces_from_problem(boxed)).reference_x[0] == \
        pytest.approx(1.0, abs=1e-9)


def test_grid_and_scalar_agree_within_radii():
    prob = single_term([3.0], NormL1())
    g = grid_oracle(prob, bounds=(-5.0, 5.0))
    s = scalar_oracle(scalar_pieces_from_problem(prob))
    assert abs(g.reference_x[0] - s.reference_x[0]) <= g.guaranteed_radius + s.guaranteed_radius


def test_long_run_reference_hierarchy():
    prob = single_term([3.0, 4.0], NormL2())
    with pytest.raises(CertificationError):
        long_run_reference(prob)


def test_long_run_reference_cross_schedules():
    rng = np.random.default_rng(11)
    z = rng.standard_normal(6)
    ident = LinearOperator.identity(6)
    prob = CompositeProxProblem(z, [
        Term(0.5, NormL1(), ident, np.zeros(6)),
        Term(0.5, NormL2(), LinearOperator.diagonal(rng.uniform(0.5, 1.5, 6)),
             rng.standard_normal(6)),
    ])
    cert = long_run_reference(prob, tol=1e-13, max_iter=200000)
    assert cert.method == "long_run"
    direct, _ = solve(prob, SolverConfig(tol=1e-12, max_iter=200000))
    assert np.linalg.norm(direct.x - cert.reference_x) <= 1e-7


def test_closed_form_helpers():
    np.testing.assert_allclose(ref_project_ball([3.0, 4.0], [0.0, 0.0], 1.0), [0.6, 0.8])
    np.testing.assert_allclose(ref_project_box([2.0, -1.0], [0.0, 0.0], [1.0, 1.0]), [1.0, 0.0])
    np.testing.assert_allclose(ref_project_halfspace([1.0, 1.0], [1.0, 1.0], 1.0), [0.5, 0.5])
    np.testing.assert_allclose(ref_project_affine([1.0, 0.0], [[1.0, -1.0]], [0.0]), [0.5, 0.5])
    np.testing.assert_allclose(ref_soft_threshold([2.0, -0.5], 1.0), [1.0, 0.0])
    np.testing.assert_allclose(ref_shrink_l2([3.0, 4.0], 1.0), [2.4, 3.2])
    np.testing.assert_allclose(
        ref_ball_halfspace_through_center([1.0, 1.0], [0.0, 0.0], 1.0, [1.0, 0.0]),
        [0.0, 1.0], atol=1e-12)


def test_certificate_serialization():
    cert = Certificate(np.array([0.5, -1.0]), "closed_form", 1e-9, {"note": "test"})
    clone = Certificate.from_config(cert.to_config())
    np.testing.assert_array_equal(clone.reference_x, cert.reference_x)
    assert clone.method == cert.method
    assert clone.guaranteed_radius == cert.guaranteed_radius
    with pytest.raises(ValueError):
        Certificate(np.zeros(1), "grid", 0.0)
