from fractions import Fraction
from math import pi, sqrt

import numpy as np
import pytest

from mex.qcurvature.catalog import builtin_metric, random_lcf_metric
from mex.qcurvature.conformal import (
    ConformalFactor,
    conformal_metric,
    paneitz_apply,
    paneitz_values,
    q_conformal_check,
    schoen_check,
    verify_conformal_laws,
    verify_traceless_divergence,
    yamabe_constant,
    yamabe_metric,
    yamabe_ode_solve,
    yamabe_threshold,
)
from mex.qcurvature.exceptions import ChartError, PreconditionError
from mex.qcurvature.expr import ONE, ZERO, parse_expr
from mex.qcurvature.geometry import MetricChart, curvature_bundle, curvature_bundles
from mex.qcurvature.helpers import sample_points


@pytest.fixture(scope="module")
def five_torus() -> MetricChart:
    """Return the flat five-torus, the smallest chart the Paneitz operator accepts."""
    return builtin_metric("flat_torus", 5, closed=True).chart


@pytest.mark.parametrize(
    ("convention", "n", "expected"),
    [
        ("scalar", 3, Fraction(4)),
        ("scalar", 6, Fraction(1)),
        ("paneitz", 5, Fraction(4)),
        ("paneitz", 6, Fraction(2)),
    ],
    ids=["scalar-3", "scalar-6", "paneitz-5", "paneitz-6"],
)
def test_factor_weight(convention: str, n: int, expected: Fraction) -> None:
    factor = ConformalFactor(expr=ONE, convention=convention)
    assert factor.weight(n) == expected


def test_factor_weight_is_undefined_outside_its_convention() -> None:
    with pytest.raises(PreconditionError, match="no power of u"):
        ConformalFactor(expr=ONE).weight(4)
    with pytest.raises(PreconditionError, match="undefined in dimension 4"):
        ConformalFactor(expr=ONE, convention="paneitz").weight(4)


def test_conformal_metric_of_the_torus(flat_torus: MetricChart) -> None:
    f = parse_expr("sin(x1)/10", flat_torus.coords)
    hat = conformal_metric(flat_torus, ConformalFactor(expr=f))
    assert hat.name == f"{flat_torus.name} conformal(exponential)"
    assert not hat.blocks[0].homogeneous
    point = [0.7, 1.0, 2.0]
    np.testing.assert_allclose(
        hat.metric_values([point])[0], np.exp(np.sin(0.7) / 5) * np.eye(3)
    )
    # R-hat = e^{-2f}(-4 Lap f - 2 |df|^2) on a flat three-manifold
    expected = np.exp(-np.sin(0.7) / 5) * (
        0.4 * np.sin(0.7) - 0.02 * np.cos(0.7) ** 2
    )
    assert curvature_bundle(hat, point).scalar == pytest.approx(expected, rel=1e-9)


def test_conformal_metric_binds_factor_parameters(flat_torus: MetricChart) -> None:
    f = parse_expr("a*cos(x2)", flat_torus.coords, ["a"])
    with pytest.raises(ChartError, match="unbound parameters \\['a'\\]"):
        conformal_metric(flat_torus, ConformalFactor(expr=f))
    hat = conformal_metric(flat_torus, ConformalFactor(expr=f, params={"a": 0.1}))
    assert hat.metric_values([[1.0, 0.0, 1.0]])[0, 2, 2] == pytest.approx(
        np.exp(0.2)
    )


def test_conformal_metric_needs_a_positive_u(flat_torus: MetricChart) -> None:
    u = parse_expr("x1 - 1", flat_torus.coords)
    with pytest.raises(PreconditionError, match="must be positive"):
        conformal_metric(flat_torus, ConformalFactor(expr=u, convention="scalar"))


@pytest.mark.parametrize(
    ("source", "convention"),
    [
        ("sin(x1)/10 + cos(x2)/5", "exponential"),
        ("1 + x1^2/4 + x2*x3/10", "scalar"),
    ],
    ids=["exponential", "scalar"],
)
def test_conformal_laws(
    unit_sphere: MetricChart, source: str, convention: str
) -> None:
    factor = ConformalFactor(
        expr=parse_expr(source, unit_sphere.coords), convention=convention
    )
    report = verify_conformal_laws(unit_sphere, factor, sample_points(unit_sphere, 3))
    assert report.identity == "conformal_laws"
    assert report.passed, report


@pytest.mark.parametrize("n", [3, 4], ids=["three", "four"])
def test_conformal_laws_from_flat_space_to_the_sphere(n: int) -> None:
    flat = builtin_metric("euclidean", n).chart
    # e^{2f} |dx|^2 is the round metric pulled back by stereographic projection
    f = parse_expr(
        "log(2/(1 + " + " + ".join(f"{x}^2" for x in flat.coords) + "))", flat.coords
    )
    factor = ConformalFactor(expr=f)
    points = sample_points(flat, 3)
    report = verify_conformal_laws(flat, factor, points)
    assert report.passed, report
    hat = conformal_metric(flat, factor)
    for point in points:
        bundle = curvature_bundle(hat, point)
        np.testing.assert_allclose(
            bundle.ricci, (n - 1) * bundle.metric, rtol=1e-7, atol=1e-7
        )
        assert bundle.scalar == pytest.approx(n * (n - 1), rel=1e-7)


def test_traceless_divergence() -> None:
    chart = random_lcf_metric(3, seed=1, amplitude=0.1)
    report = verify_traceless_divergence(chart, sample_points(chart, 3))
    assert report.identity == "traceless_divergence"
    assert report.passed


def test_paneitz_on_the_flat_torus(five_torus: MetricChart) -> None:
    u = parse_expr("sin(x1)", five_torus.coords)
    points = np.array([[0.3, 1.0, 2.0, 3.0, 4.0], [1.2, 0.5, 0.5, 0.5, 0.5]])
    np.testing.assert_allclose(
        paneitz_values(five_torus, u, points), np.sin(points[:, 0]), atol=1e-9
    )


def test_paneitz_of_a_constant_on_the_round_sphere() -> None:
    sphere = builtin_metric("sphere", 5).chart
    # P 1 = (n - 4)/2 Q with Q = n(n^2 - 4)/8
    assert paneitz_apply(sphere, ONE, [0.1, -0.2, 0.0, 0.3, 0.1]) == pytest.approx(
        105 / 16, rel=1e-6
    )


@pytest.mark.parametrize(
    ("name", "n", "expected"),
    [
        ("sphere", 5, 105 / 16),
        ("sphere", 6, 24.0),
        ("hyperbolic", 5, 105 / 16),
        ("cylinder", 5, 25 / 16),
        ("cylinder", 6, 9.0),
    ],
    ids=["sphere-5", "sphere-6", "hyperbolic-5", "cylinder-5", "cylinder-6"],
)
def test_paneitz_scales_constants_by_q(name: str, n: int, expected: float) -> None:
    chart = builtin_metric(name, n).chart
    points = sample_points(chart, 2)
    bundles = curvature_bundles(chart, points)
    for point, bundle, value in zip(
        points, bundles, paneitz_values(chart, ONE, points), strict=True
    ):
        assert bundle.q is not None
        assert value == pytest.approx((n - 4) / 2 * bundle.q, rel=1e-6)
        assert value == pytest.approx(expected, rel=1e-6)
        assert paneitz_apply(chart, 3 * ONE, point) == pytest.approx(
            3 * expected, rel=1e-6
        )


def test_paneitz_needs_five_dimensions(flat_torus: MetricChart) -> None:
    with pytest.raises(PreconditionError, match="at least 5, got 3"):
        paneitz_values(flat_torus, ONE, sample_points(flat_torus, 1))
    with pytest.raises(PreconditionError, match="at least 5, got 3"):
        q_conformal_check(flat_torus, ONE, sample_points(flat_torus, 1))


def test_q_transforms_with_the_paneitz_operator(five_torus: MetricChart) -> None:
    u = parse_expr("1 + sin(x1)/5 + cos(x2)/10", five_torus.coords)
    report = q_conformal_check(five_torus, u, sample_points(five_torus, 2))
    assert report.identity == "q_covariance"
    assert report.passed, report


def test_schoen_check_on_a_conformal_sphere() -> None:
    sphere = builtin_metric("sphere", 3, closed=True).chart
    f = parse_expr("cos(theta1)/10", sphere.coords)
    report = schoen_check(sphere, f, resolution=8)
    assert report.scalar_curvature == pytest.approx(6.0, rel=1e-9)
    assert report.lhs == pytest.approx(0.0, abs=1e-9)
    assert report.rhs > 0
    assert report.holds
    assert report.rewritten.holds
    assert report.exchanged is None


def test_schoen_check_on_a_non_einstein_cylinder() -> None:
    cylinder = builtin_metric("cylinder", 6, closed=True).chart
    f = parse_expr("sin(t)/10", cylinder.coords)
    report = schoen_check(cylinder, f)
    assert report.scalar_curvature == pytest.approx(20.0, rel=1e-9)
    assert report.lhs > 0
    assert report.lhs < report.rhs
    assert report.holds


def test_schoen_check_with_a_trivial_factor() -> None:
    cylinder = builtin_metric("cylinder", 3, closed=True).chart
    report = schoen_check(cylinder, ZERO, resolution=8)
    assert report.scalar_curvature == pytest.approx(2.0, rel=1e-9)
    assert report.lhs > 0
    assert report.lhs == pytest.approx(report.rhs, rel=1e-9)
    assert report.rewritten.rhs == pytest.approx(report.lhs, rel=1e-9)
    assert report.exchanged is not None
    assert report.exchanged.holds


def test_schoen_check_preconditions(flat_torus: MetricChart) -> None:
    f = parse_expr("sin(x1)/10", flat_torus.coords)
    with pytest.raises(PreconditionError, match="is not closed"):
        schoen_check(builtin_metric("sphere", 3).chart, f)
    with pytest.raises(PreconditionError, match="at least 8, got 4"):
        schoen_check(flat_torus, f, resolution=4)
    with pytest.raises(PreconditionError, match="not constant"):
        schoen_check(random_lcf_metric(3, seed=0, amplitude=0.2), f, resolution=8)


def test_yamabe_constants() -> None:
    assert yamabe_threshold(6) == pytest.approx(pi)
    assert yamabe_threshold(3) == pytest.approx(2 * pi)
    assert yamabe_constant(6) == pytest.approx(2 / 3)
    assert yamabe_constant(4) == pytest.approx(1 / sqrt(2))


def test_yamabe_below_the_threshold_is_constant() -> None:
    solution = yamabe_ode_solve(6, pi / 2, grid=16)
    assert solution.constant
    assert solution.coefficients == [pytest.approx(2 / 3)]
    assert solution.residual == pytest.approx(0.0, abs=1e-10)
    assert solution.samples.shape == (16,)
    hat = yamabe_metric(solution)
    point = [0.3, 1.0, 1.2, 0.8, 1.4, 2.0]
    assert curvature_bundle(hat, point).scalar == pytest.approx(30.0, rel=1e-9)


@pytest.mark.slow
def test_yamabe_above_the_threshold_oscillates() -> None:
    solution = yamabe_ode_solve(4, 2 * pi, grid=64)
    assert solution.threshold < solution.period
    assert not solution.constant
    assert solution.amplitude != pytest.approx(solution.constant_value)
    assert solution.samples[0] == pytest.approx(solution.amplitude)
    assert solution.periodicity_error < 1e-8
    assert solution.residual < 1e-6
    hat = yamabe_metric(solution)
    point = [0.3, 1.0, 1.2, 2.0]
    assert curvature_bundle(hat, point).scalar == pytest.approx(12.0, rel=1e-5)


@pytest.mark.slow
def test_yamabe_above_the_threshold_in_six_dimensions() -> None:
    solution = yamabe_ode_solve(6, 2 * pi)
    assert solution.threshold == pytest.approx(pi)
    assert not solution.constant
    # the orbit passes close to the homoclinic orbit through u = 1
    assert solution.amplitude == pytest.approx(1.0, abs=0.05)
    assert solution.residual <= 1e-8
    assert solution.periodicity_error < 1e-8
    hat = yamabe_metric(solution)
    bundles = curvature_bundles(hat, sample_points(hat, 8))
    for bundle in bundles:
        assert bundle.scalar == pytest.approx(30.0, rel=1e-5)
    q = np.array([bundle.q for bundle in bundles])
    assert np.std(q) > 1e-3 * abs(np.mean(q))


@pytest.mark.parametrize(
    ("n", "period", "grid", "message"),
    [
        (2, 1.0, 16, "at least 3, got 2"),
        (4, -1.0, 16, "period must be positive"),
        (4, 1.0, 15, "grid must be even"),
        (4, 1.0, 4, "grid must be even"),
    ],
    ids=["dimension", "period", "odd-grid", "small-grid"],
)
def test_yamabe_preconditions(n: int, period: float, grid: int, message: str) -> None:
    with pytest.raises(PreconditionError, match=message):
        yamabe_ode_solve(n, period, grid)
