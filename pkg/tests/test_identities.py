from collections.abc import Callable
from math import pi

import numpy as np
import pytest
from numpy.typing import ArrayLike, NDArray

from mex.qcurvature.catalog import builtin_metric, random_lcf_metric
from mex.qcurvature.exceptions import PreconditionError
from mex.qcurvature.expr import parse_expr
from mex.qcurvature.geometry import CoordinateAxis, MetricChart, q_curvature
from mex.qcurvature.helpers import sample_points
from mex.qcurvature.identities import (
    IDENTITY_CHECKS,
    verify_bochner,
    verify_commutation,
    verify_div_weyl,
    verify_eigen_identity,
    verify_laplacian_ricci,
    verify_laplacian_schouten,
    verify_lemma21,
    verify_pointwise_bounds,
    verify_q_curvature,
    verify_ricci_decomposition,
    verify_schouten_div,
)
from mex.qcurvature.models import IdentityReport

COORDS = ["x1", "x2", "x3", "x4"]
GENERIC_METRIC = [
    ["exp(3/10*sin(x1))", "sin(x2)/10", "0", "0"],
    ["sin(x2)/10", "1 + cos(x1)/5", "0", "0"],
    ["0", "0", "exp(cos(x1 + x2)/5)", "0"],
    ["0", "0", "0", "2 + sin(x1)*cos(x2)/2"],
]


@pytest.fixture(scope="module")
def generic_chart() -> MetricChart:
    axes = tuple(
        CoordinateAxis(name=name, lower=0.0, upper=2 * pi, periodic=True)
        for name in COORDS
    )
    metric = tuple(
        tuple(parse_expr(source, COORDS) for source in row) for row in GENERIC_METRIC
    )
    return MetricChart(name="generic", axes=axes, metric=metric)


@pytest.fixture(scope="module")
def generic_points(generic_chart: MetricChart) -> NDArray[np.float64]:
    return sample_points(generic_chart, 3, seed=1)


@pytest.mark.parametrize(
    "check",
    [
        verify_schouten_div,
        verify_div_weyl,
        verify_commutation,
        verify_eigen_identity,
        verify_ricci_decomposition,
        verify_laplacian_schouten,
        verify_laplacian_ricci,
        verify_lemma21,
        verify_bochner,
        verify_q_curvature,
    ],
    ids=[
        "schouten-div",
        "div-weyl",
        "commutation",
        "eigen-identity",
        "ricci-decomposition",
        "laplacian-schouten",
        "laplacian-ricci",
        "lemma21",
        "bochner",
        "q-curvature",
    ],
)
def test_identities_hold_on_a_generic_metric(
    check: Callable[[MetricChart, ArrayLike], IdentityReport],
    generic_chart: MetricChart,
    generic_points: NDArray[np.float64],
) -> None:
    report = check(generic_chart, generic_points)
    assert report.passed, report
    assert report.points == 3
    assert report.scale > 0


def test_bochner_with_a_test_function(
    generic_chart: MetricChart, generic_points: NDArray[np.float64]
) -> None:
    u = parse_expr("sin(x1)*cos(x3) + x4^2/10", COORDS)
    report = verify_bochner(generic_chart, generic_points, u)
    assert report.identity == "bochner:sin(x1)*cos(x3) + x4^2/10"
    assert report.passed


def test_lemma21_variants_on_conformally_flat_metrics() -> None:
    chart = random_lcf_metric(4, seed=2, amplitude=0.1)
    points = sample_points(chart, 2, seed=4)
    assert verify_lemma21(chart, points, "lcf").passed
    assert verify_lemma21(chart, points, "general").passed


def test_lemma21_on_an_einstein_product() -> None:
    chart = builtin_metric("product_spheres", 4, {"k": 2}).chart
    points = sample_points(chart, 2, seed=4)
    report = verify_lemma21(chart, points, "div_weyl_free")
    assert report.identity == "lemma21:div_weyl_free"
    assert report.passed
    with pytest.raises(PreconditionError, match="vanishing Weyl tensor"):
        verify_lemma21(chart, points, "lcf")


def test_dimension_requirements(flat_torus: MetricChart) -> None:
    points = sample_points(flat_torus, 1)
    with pytest.raises(PreconditionError, match="at least 4, got 3"):
        verify_div_weyl(flat_torus, points)
    with pytest.raises(PreconditionError, match="at least 4, got 3"):
        verify_lemma21(flat_torus, points)


def test_flat_torus_passes_on_the_absolute_floor(flat_torus: MetricChart) -> None:
    report = verify_schouten_div(flat_torus, sample_points(flat_torus, 2))
    assert report.passed
    assert report.max_abs_residual == 0.0


@pytest.mark.parametrize(
    ("chart", "expected"),
    [
        (builtin_metric("sphere", 4).chart, 6.0),
        (builtin_metric("cylinder", 6).chart, 9.0),
        (random_lcf_metric(5, seed=3, amplitude=0.1), None),
    ],
    ids=["sphere", "cylinder", "random-lcf"],
)
def test_q_curvature_recomputed_from_its_pieces(
    chart: MetricChart, expected: float | None
) -> None:
    points = sample_points(chart, 3, seed=2)
    report = verify_q_curvature(chart, points)
    assert report.identity == "q_curvature"
    assert report.passed, report
    if expected is not None:
        for point in points:
            assert q_curvature(chart, point) == pytest.approx(expected, rel=1e-8)


def test_pointwise_bounds_on_the_round_sphere(unit_sphere: MetricChart) -> None:
    gradient, laplacian = verify_pointwise_bounds(
        unit_sphere, sample_points(unit_sphere, 3)
    )
    assert gradient.inequality == "nabla_ricci_bound"
    assert gradient.passed
    assert laplacian.inequality == "ricci_laplacian_bound"
    assert laplacian.applicable == 3
    assert laplacian.passed


def test_pointwise_bounds_skip_the_laplacian_bound_in_dimension_three() -> None:
    chart = random_lcf_metric(3, seed=0, amplitude=0.2)
    gradient, laplacian = verify_pointwise_bounds(chart, sample_points(chart, 2))
    assert gradient.passed
    assert laplacian.applicable == 0
    assert laplacian.min_slack is None
    assert laplacian.passed


def test_identity_registry() -> None:
    assert set(IDENTITY_CHECKS) == {
        "lemma21",
        "lemma21_lcf",
        "lemma21_div_weyl_free",
        "schouten_div",
        "div_weyl",
        "commutation",
        "bochner",
        "eigen_identity",
        "laplacian_schouten",
        "ricci_decomposition",
        "laplacian_ricci",
        "q_curvature",
    }
