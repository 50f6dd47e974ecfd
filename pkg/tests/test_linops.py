import numpy as np
import pytest

from proxsplit.linops import (
    DimensionMismatch,
    LinearOperator,
    OperatorNormError,
    check_adjoint,
    estimate_operator_norm,
    inner,
    load_matrix_csv,
    operator_from_config,
)


def test_inner_orthogonal_and_norm():
    assert inner([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert inner([1.0, 2.0], [1.0, 2.0]) == 5.0


def test_inner_positive_definite():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.standard_normal(7)
        assert inner(x, x) >= 0.0
    assert inner(np.zeros(4), np.zeros(4)) == 0.0


def test_inner_symmetric_bilinear():
    rng = np.random.default_rng(1)
    x, y, w = rng.standard_normal((3, 5))
    assert inner(x, y) == pytest.approx(inner(y, x), abs=1e-14)
    assert inner(x + 2.0 * w, y) == pytest.approx(inner(x, y) + 2.0 * inner(w, y), rel=1e-12)


def test_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        inner([1.0, 2.0], [1.0, 2.0, 3.0])


def test_norm_bound_identity_exact():
    assert LinearOperator.identity(3).norm_bound == 1.0


def test_estimate_norm_identity():
    est = estimate_operator_norm(LinearOperator(3, 3, lambda x: x, lambda u: u))
    assert 1.0 <= est <= 1.01 + 1e-12


def test_estimate_norm_diagonal():
    op = LinearOperator.from_matrix(np.diag([2.0, 0.5]))
    est = estimate_operator_norm(op)
    assert 2.0 <= est <= 2.0 * 1.01 + 1e-12


def test_estimate_norm_against_dense_svd():
    rng = np.random.default_rng(42)
    for _ in range(10):
        m = rng.standard_normal((4, 3))
        sigma = np.linalg.svd(m, compute_uv=False)[0]
        est = estimate_operator_norm(LinearOperator.from_matrix(m))
        assert sigma <= est <= 1.01 * sigma * (1.0 + 1e-8)


def test_estimate_norm_zero_operator():
    op = LinearOperator(3, 2, lambda x: np.zeros(2), lambda u: np.zeros(3))
    assert estimate_operator_norm(op) == 0.0


def test_estimate_norm_deterministic():
    op = LinearOperator.from_matrix(np.random.default_rng(3).standard_normal((5, 4)))
    assert estimate_operator_norm(op, seed=11) == estimate_operator_norm(op, seed=11)


def test_estimate_norm_budget_exhausted():
    op = LinearOperator.from_matrix(np.diag([1.0, 0.999999]))
    with pytest.raises(OperatorNormError):
        estimate_operator_norm(op, tol=1e-15, max_iter=3)


def test_check_adjoint_identity_and_transpose():
    assert check_adjoint(LinearOperator.identity(4)).max_discrepancy == 0.0
    m = np.random.default_rng(5).standard_normal((3, 6))
    report = check_adjoint(LinearOperator.from_matrix(m))
    assert report.passed
    assert report.max_discrepancy <= 1e-12


def test_check_adjoint_flags_wrong_transpose():
    m = np.random.default_rng(6).standard_normal((4, 4))
    wrong = m.T + 0.001
    op = LinearOperator(4, 4, lambda x: m @ x, lambda u: wrong @ u)
    report = check_adjoint(op)
    assert not report.passed
    assert report.max_discrepancy > 1e-6


def test_adjoint_consistency_catalog():
    rng = np.random.default_rng(7)
    ops = [
        LinearOperator.identity(5),
        LinearOperator.diagonal(rng.standard_normal(4)),
        LinearOperator.from_matrix(rng.standard_normal((3, 5))),
        LinearOperator.vstack([LinearOperator.identity(3),
                               LinearOperator.from_matrix(rng.standard_normal((2, 3)))]),
    ]
    for op in ops:
        assert check_adjoint(op, trials=30, seed=1).passed


def test_vstack_shapes_and_bound():
    a = LinearOperator.identity(3)
    b = LinearOperator.diagonal([2.0, 2.0, 2.0])
    stacked = LinearOperator.vstack([a, b])
    assert (stacked.dim_in, stacked.dim_out) == (3, 6)
    x = np.array([1.0, -1.0, 0.5])
    np.testing.assert_allclose(stacked.apply(x), np.concatenate([x, 2.0 * x]))
    true_norm = np.linalg.svd(stacked.as_matrix(), compute_uv=False)[0]
    assert stacked.norm_bound >= true_norm


def test_weighted_product_operator_norm_is_max_of_blocks():
    # In weighted product coordinates the stacked map is block diagonal, so
    # its spectral norm cannot exceed the largest per-block norm.
    rng = np.random.default_rng(8)
    blocks = [rng.standard_normal((3, 3)) for _ in range(3)]
    weights = np.array([0.5, 0.3, 0.2])
    full = np.zeros((9, 9))
    for i, blk in enumerate(blocks):
        full[3 * i:3 * i + 3, 3 * i:3 * i + 3] = blk
    assert weights.sum() == pytest.approx(1.0)
    product_norm = np.linalg.svd(full, compute_uv=False)[0]
    per_block = max(np.linalg.svd(b, compute_uv=False)[0] for b in blocks)
    assert product_norm <= per_block * (1.0 + 1e-12)


def test_operator_output_validated():
    bad = LinearOperator(2, 3, lambda x: x, lambda u: u[:2])
    with pytest.raises(DimensionMismatch):
        bad.apply(np.ones(2))


def test_load_matrix_csv_and_config(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n3.0,4.0\n")
    m = load_matrix_csv(path)
    np.testing.assert_allclose(m, [[1.0, 2.0], [3.0, 4.0]])
    op = operator_from_config({"kind": "csv", "path": "m.csv"}, base_dir=str(tmp_path))
    np.testing.assert_allclose(op.apply([1.0, 1.0]), [3.0, 7.0])
    ident = operator_from_config({"kind": "identity", "dim": 2})
    np.testing.assert_allclose(ident.apply([5.0, 6.0]), [5.0, 6.0])
    with pytest.raises(ValueError):
        operator_from_config({"kind": "mystery"})
