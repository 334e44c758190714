from math import pi

import numpy as np
import pytest

from mex.qcurvature.catalog import builtin_metric
from mex.qcurvature.conformal import ConformalFactor, conformal_metric
from mex.qcurvature.exceptions import PreconditionError, QuadratureError
from mex.qcurvature.expr import parse_expr
from mex.qcurvature.geometry import CoordinateAxis, MetricChart
from mex.qcurvature.quadrature import (
    axis_rule,
    build_grid,
    integrate,
    parts_identity_check,
    rigidity_report,
)


@pytest.fixture(scope="module")
def wavy_torus() -> MetricChart:
    """Return a conformally flat torus whose factor varies along the first axis."""
    torus = builtin_metric("flat_torus", 3, closed=True).chart
    f = parse_expr("sin(x1)/5", torus.coords)
    return conformal_metric(torus, ConformalFactor(expr=f))


def test_axis_rules() -> None:
    periodic = CoordinateAxis(name="t", lower=0.0, upper=1.0, periodic=True)
    rule, nodes, weights = axis_rule(periodic, 4)
    assert rule == "trapezoid"
    np.testing.assert_allclose(nodes, [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(weights, 0.25)
    polar = CoordinateAxis(name="theta", lower=0.0, upper=pi, polar=True)
    rule, nodes, weights = axis_rule(polar, 8)
    assert rule == "gauss-legendre"
    assert 0 < nodes.min() < nodes.max() < pi
    assert weights.sum() == pytest.approx(pi)
    with pytest.raises(QuadratureError, match="neither periodic nor a polar"):
        axis_rule(CoordinateAxis(name="x", lower=0.0, upper=1.0), 8)


def test_flat_torus_grid_collapses_every_axis(flat_torus: MetricChart) -> None:
    grid = build_grid(flat_torus, 8)
    assert grid.size == 1
    assert grid.collapsed_axes == (0, 1, 2)
    assert grid.volume == pytest.approx((2 * pi) ** 3)


def test_integrand_axes_stay_active(flat_torus: MetricChart) -> None:
    grid = build_grid(flat_torus, 8, depends_on={0})
    assert grid.size == 8
    assert grid.active_axes == (0,)
    assert grid.rules == ("trapezoid",) * 3
    f = parse_expr("sin(x1)^2", flat_torus.coords)
    assert integrate(grid, f) == pytest.approx((2 * pi) ** 3 / 2)
    with pytest.raises(QuadratureError, match="collapsed axes \\['x2'\\]"):
        integrate(grid, parse_expr("cos(x2)", flat_torus.coords))


def test_volume_of_the_three_sphere() -> None:
    sphere = builtin_metric("sphere", 3, closed=True).chart
    grid = build_grid(sphere, 8)
    assert grid.size == 1
    assert grid.rules == ("gauss-legendre", "gauss-legendre", "trapezoid")
    assert grid.volume == pytest.approx(2 * pi**2, rel=1e-8)


def test_warped_axes_stay_active(wavy_torus: MetricChart) -> None:
    grid = build_grid(wavy_torus, 16)
    assert grid.active_axes == (0,)
    assert grid.collapsed_axes == (1, 2)
    # the volume density is e^{3f}
    nodes = (np.arange(16) + 0.5) * 2 * pi / 16
    expected = (2 * pi) ** 2 * np.sum(np.exp(3 * np.sin(nodes) / 5)) * 2 * pi / 16
    assert grid.volume == pytest.approx(expected)


@pytest.mark.parametrize(
    ("resolution", "depends_on", "message"),
    [
        (4, (), "resolution must be at least 8, got 4"),
        (8, (5,), "integrand axes \\[5\\] are outside the chart"),
    ],
    ids=["resolution", "unknown-axis"],
)
def test_grid_rejections(
    flat_torus: MetricChart, resolution: int, depends_on: tuple[int, ...], message: str
) -> None:
    with pytest.raises(QuadratureError, match=message):
        build_grid(flat_torus, resolution, depends_on)


def test_grid_needs_a_closed_chart(unit_sphere: MetricChart) -> None:
    with pytest.raises(QuadratureError, match="is not closed"):
        build_grid(unit_sphere, 8)


def test_grid_size_is_capped() -> None:
    torus = builtin_metric("flat_torus", 4, closed=True).chart
    with pytest.raises(QuadratureError, match="more than 262144"):
        build_grid(torus, 32, depends_on=range(4))


def test_integrate_node_arrays(flat_torus: MetricChart) -> None:
    grid = build_grid(flat_torus, 8, depends_on={0})
    assert integrate(grid, np.ones(8)) == pytest.approx(grid.volume)
    with pytest.raises(QuadratureError, match="expected 8 node values, got 3"):
        integrate(grid, np.ones(3))
    with pytest.raises(QuadratureError, match="not finite"):
        integrate(grid, np.full(8, np.nan))


def test_parts_identity(wavy_torus: MetricChart) -> None:
    report = parts_identity_check(build_grid(wavy_torus, 16))
    assert report.identity == "parts_identity"
    assert report.passed, report


def test_rigidity_report_on_a_cylinder() -> None:
    cylinder = builtin_metric("cylinder", 4, closed=True).chart
    report = rigidity_report(build_grid(cylinder, 8))
    assert report.nodes == 1
    assert report.ricci_nonnegative
    assert report.conformally_flat
    assert report.condition_holds
    assert report.hypotheses_met
    assert report.signature_satisfied
    assert report.verdict == "hypotheses met: R is constant and Ric is parallel"
    assert report.converged
    assert not report.dimension_regime
    assert set(report.pinching) == {"weyl_bach_pinched", "weyl_hessian_pinched"}
    assert report.parts_identity.passed
    assert [slack.inequality for slack in report.slacks] == [
        "integrated_laplacian_bound",
        "combined_gradient_bound",
        "integrated_bochner_bound",
    ]


@pytest.mark.slow
def test_rigidity_report_on_a_warped_torus(wavy_torus: MetricChart) -> None:
    report = rigidity_report(build_grid(wavy_torus, 16))
    assert report.conformally_flat
    assert not report.ricci_nonnegative
    assert not report.hypotheses_met
    assert not report.constant_scalar
    assert report.verdict == "hypotheses not met"
    assert report.pinching == {}
    assert report.parts_identity.passed
    assert report.converged
    assert "term_ii" not in report.integrals


def test_rigidity_report_needs_three_dimensions() -> None:
    torus = builtin_metric("flat_torus", 2, closed=True).chart
    with pytest.raises(PreconditionError, match="at least 3, got 2"):
        rigidity_report(build_grid(torus, 8))
