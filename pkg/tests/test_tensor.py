import numpy as np
import pytest

from mex.qcurvature.exceptions import TensorError
from mex.qcurvature.tensor import (
    RIEMANN_SYMMETRIES,
    SYMMETRIC_PAIR,
    TensorValue,
    contract,
    covariant,
    first_bianchi_residual,
    generalized_eigen,
    jacobi_eigh,
    kulkarni_nomizu,
    lower_index,
    raise_index,
    stamp_symmetries,
    sym_eigen,
    symmetry_residual,
    tensor_norm,
)

METRIC = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]])


@pytest.fixture
def metric() -> TensorValue:
    return covariant(METRIC)


@pytest.fixture
def inverse_metric() -> TensorValue:
    return TensorValue(
        dim=3,
        components=np.linalg.inv(METRIC),
        variance=["contravariant", "contravariant"],
    )


def test_shape_is_validated() -> None:
    with pytest.raises(ValueError, match="expected \\(3, 3\\)"):
        TensorValue(dim=3, components=np.zeros((3, 2)), variance=["covariant"] * 2)


def test_raise_then_lower_is_identity(
    metric: TensorValue, inverse_metric: TensorValue
) -> None:
    t = covariant(np.arange(9.0).reshape(3, 3))
    raised = raise_index(t, 1, inverse_metric)
    assert raised.variance == ["covariant", "contravariant"]
    lowered = lower_index(raised, 1, metric)
    np.testing.assert_allclose(lowered.components, t.components, atol=1e-12)


def test_index_errors(metric: TensorValue, inverse_metric: TensorValue) -> None:
    t = covariant(np.eye(3))
    with pytest.raises(TensorError, match="out of range"):
        raise_index(t, 2, inverse_metric)
    with pytest.raises(TensorError, match="already covariant"):
        lower_index(t, 0, metric)
    with pytest.raises(TensorError, match="dimension mismatch"):
        raise_index(covariant(np.eye(2)), 0, inverse_metric)


def test_trace_of_the_metric(metric: TensorValue, inverse_metric: TensorValue) -> None:
    trace = contract(metric, 0, 1, inverse_metric=inverse_metric)
    assert trace.rank == 0
    assert float(trace.components) == pytest.approx(3.0)
    with pytest.raises(TensorError, match="needs a metric"):
        contract(metric, 0, 1)
    with pytest.raises(TensorError, match="distinct slots"):
        contract(metric, 1, 1, inverse_metric=inverse_metric)


def test_mixed_contraction_needs_no_metric(inverse_metric: TensorValue) -> None:
    mixed = raise_index(covariant(np.diag([1.0, 2.0, 3.0])), 0, inverse_metric)
    trace = contract(mixed, 0, 1)
    expected = np.trace(np.linalg.inv(METRIC) @ np.diag([1.0, 2.0, 3.0]))
    assert float(trace.components) == pytest.approx(expected)


def test_kulkarni_nomizu_of_the_metric(
    metric: TensorValue, inverse_metric: TensorValue
) -> None:
    product = kulkarni_nomizu(metric, metric)
    assert product.symmetries == list(RIEMANN_SYMMETRIES)
    for symmetry in RIEMANN_SYMMETRIES:
        assert symmetry_residual(product, symmetry) < 1e-14
    assert first_bianchi_residual(product) < 1e-14
    # |g o g|^2 = 8 n (n - 1)
    assert tensor_norm(product, metric, inverse_metric) == pytest.approx(48.0)


def test_stamp_symmetries_rejects_asymmetric_tensors() -> None:
    symmetric = covariant(METRIC)
    assert stamp_symmetries(symmetric, SYMMETRIC_PAIR).symmetries == list(
        SYMMETRIC_PAIR
    )
    skewed = covariant(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(TensorError, match="symmetric symmetry on slots \\(0, 1\\)"):
        stamp_symmetries(skewed, SYMMETRIC_PAIR)


def test_jacobi_matches_lapack() -> None:
    generator = np.random.default_rng(7)
    raw = generator.normal(size=(5, 4, 4))
    batch = raw + np.swapaxes(raw, -1, -2)
    values, vectors = jacobi_eigh(batch)
    np.testing.assert_allclose(values, np.linalg.eigvalsh(batch), atol=1e-10)
    np.testing.assert_allclose(
        batch @ vectors, vectors * values[..., None, :], atol=1e-9
    )


def test_sym_eigen() -> None:
    data = sym_eigen(covariant(np.diag([3.0, -1.0, 2.0])))
    np.testing.assert_allclose(data.eigenvalues, [-1.0, 2.0, 3.0])
    with pytest.raises(TensorError, match="not symmetric"):
        sym_eigen(covariant(np.array([[1.0, 2.0], [0.0, 1.0]])))


def test_generalized_eigen() -> None:
    h = np.diag([2.0, 6.0])
    g = np.diag([1.0, 2.0])
    values, vectors = generalized_eigen(h, g)
    np.testing.assert_allclose(values, [2.0, 3.0])
    np.testing.assert_allclose(vectors.T @ g @ vectors, np.eye(2), atol=1e-12)
    with pytest.raises(TensorError, match="not positive definite"):
        generalized_eigen(h, np.diag([1.0, -1.0]))
