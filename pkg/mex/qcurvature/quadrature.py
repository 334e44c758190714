"""Quadrature on closed charts and the integrals of the Q-curvature rigidity argument.

Periodic axes use the midpoint trapezoid rule and polar angle ranges use
Gauss-Legendre nodes, which stay clear of the coordinate singularities at the
ends of the range. Axes that neither the metric nor the integrand depends on
are collapsed exactly. The axes of homogeneous product blocks are collapsed as
well for curvature integrands, once the volume density is seen to factor over
them on the probe grid.
"""

from collections.abc import Callable, Iterable
from itertools import product
from math import prod

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict

from mex.common.logging import logger
from mex.qcurvature.constants import (
    DEFAULT_ABSOLUTE_TOLERANCE,
    DEFAULT_CONVERGENCE_TOLERANCE,
    DEFAULT_JET_ORDER,
    DEFAULT_RELATIVE_TOLERANCE,
    DEFAULT_RESOLUTION,
    DEFAULT_RICCI_SIGN_TOLERANCE,
    DEFAULT_SCALE_FLOOR,
    DEFAULT_WEYL_TOLERANCE,
    MAXIMUM_GRID_NODES,
    MINIMUM_RESOLUTION,
    RIGIDITY_REGIME_DIMENSION,
    SIGNATURE_TOLERANCE,
    WARPED_FACTOR_TOLERANCE,
)
from mex.qcurvature.exceptions import (
    ExprDomainError,
    PreconditionError,
    QuadratureError,
)
from mex.qcurvature.expr import Expr, evaluate, expr_coordinates
from mex.qcurvature.geometry import (
    CoordinateAxis,
    CurvatureJets,
    MetricChart,
    full_norm2,
    sample_fields,
    weyl_norm2,
)
from mex.qcurvature.helpers import residual_report, slack_report
from mex.qcurvature.models import IdentityReport, InequalityReport
from mex.qcurvature.simplexlab import dimension_constants
from mex.qcurvature.tensor import generalized_eigen
from mex.qcurvature.types import FloatArray, QuadratureRule

Arrays = dict[str, NDArray[np.float64]]

# second derivatives of R need fourth metric derivatives
PARTS_JET_ORDER = 4


class QuadratureGrid(BaseModel):
    """Nodes and positive weights of a tensor-product rule on a closed chart.

    Collapsed axes sit at the midpoint of their range in every node and their
    measure is folded into the weights.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    chart: MetricChart
    resolution: int
    rules: tuple[QuadratureRule, ...]
    active_axes: tuple[int, ...]
    collapsed_axes: tuple[int, ...]
    depends_on: frozenset[int]
    nodes: FloatArray
    weights: FloatArray

    @property
    def volume(self) -> float:
        """Return the sum of the weights."""
        return float(np.sum(self.weights))

    @property
    def size(self) -> int:
        """Return the number of nodes."""
        return len(self.weights)


class RigidityReport(BaseModel):
    """Integrals, slacks and flags of the rigidity argument on one closed chart."""

    chart: str
    dim: int
    resolution: int
    nodes: int
    volume: float
    integrals: dict[str, float]
    parts_identity: IdentityReport
    slacks: list[InequalityReport]
    condition_holds: bool
    ricci_nonnegative: bool
    conformally_flat: bool
    hypotheses_met: bool
    constant_scalar: bool
    parallel_ricci: bool
    signature_satisfied: bool
    pinching: dict[str, bool]
    dimension_regime: bool
    converged: bool
    max_relative_change: float
    verdict: str


def axis_rule(
    axis: CoordinateAxis, resolution: int
) -> tuple[QuadratureRule, NDArray[np.float64], NDArray[np.float64]]:
    """Return the rule name, nodes and weights of one closed axis."""
    if axis.periodic:
        step = axis.width / resolution
        nodes = axis.lower + step * (np.arange(resolution) + 0.5)
        return "trapezoid", nodes, np.full(resolution, step)
    if axis.polar:
        roots, weights = leggauss(resolution)
        half = axis.width / 2
        return "gauss-legendre", axis.lower + half * (roots + 1), half * weights
    msg = f"axis '{axis.name}' is neither periodic nor a polar angle range"
    raise QuadratureError(msg)


def volume_density(chart: MetricChart, points: ArrayLike) -> NDArray[np.float64]:
    """Return sqrt(det g) at each point."""
    return np.sqrt(np.linalg.det(chart.metric_values(points)))


def _metric_axes(chart: MetricChart) -> set[int]:
    return {
        index
        for row in chart.metric
        for entry in row
        for index in expr_coordinates(entry)
    }


def _homogeneous_axes(chart: MetricChart) -> set[int]:
    """Axes of homogeneous blocks that no metric entry outside the block reads."""
    n = chart.dim
    axes: set[int] = set()
    for block in chart.blocks:
        if not block.homogeneous:
            continue
        inside = set(block.axes)
        leaks = any(
            expr_coordinates(chart.metric[i][j]) & inside
            for i, j in product(range(n), repeat=2)
            if i not in inside or j not in inside
        )
        if not leaks:
            axes |= inside
    return axes


def _check_factorization(
    chart: MetricChart,
    collapsed: tuple[int, ...],
    center: NDArray[np.float64],
    base: float,
) -> None:
    """Require the volume density to split across the collapsed axes.

    That is rho(y) = rho(y_active, center) * prod_k rho(center, y_k) / rho(center).
    """
    if not collapsed:
        return
    probes = chart.probe_points()
    exact = volume_density(chart, probes)
    split = probes.copy()
    split[:, collapsed] = center[list(collapsed)]
    predicted = volume_density(chart, split)
    for k in collapsed:
        line = np.tile(center, (len(probes), 1))
        line[:, k] = probes[:, k]
        predicted = predicted * volume_density(chart, line) / base
    error = float(np.max(np.abs(predicted - exact)))
    if error > WARPED_FACTOR_TOLERANCE * float(np.max(np.abs(exact))):
        names = [chart.axes[k].name for k in collapsed]
        msg = f"volume density does not factor over the collapsed axes {names}"
        raise QuadratureError(msg)


def build_grid(
    chart: MetricChart,
    resolution: int = DEFAULT_RESOLUTION,
    depends_on: Iterable[int] = (),
) -> QuadratureGrid:
    """Build a quadrature grid for curvature integrands and expressions in depends_on.

    Raises:
        QuadratureError: when an axis is not closed, the resolution is too low,
            the volume density does not factor or the grid is too large
    """
    for axis in chart.axes:
        if not (axis.periodic or axis.polar):
            msg = f"chart '{chart.name}' is not closed: axis '{axis.name}' is bounded"
            raise QuadratureError(msg)
    if resolution < MINIMUM_RESOLUTION:
        msg = f"resolution must be at least {MINIMUM_RESOLUTION}, got {resolution}"
        raise QuadratureError(msg)
    n = chart.dim
    extra = frozenset(depends_on)
    if unknown := sorted(k for k in extra if not 0 <= k < n):
        msg = f"integrand axes {unknown} are outside the chart"
        raise QuadratureError(msg)
    keep = (_metric_axes(chart) - _homogeneous_axes(chart)) | extra
    active = tuple(sorted(keep))
    collapsed = tuple(k for k in range(n) if k not in keep)
    count = resolution ** len(active)
    if count > MAXIMUM_GRID_NODES:
        msg = (
            f"grid on axes {[chart.axes[k].name for k in active]} would hold "
            f"{count} nodes, more than {MAXIMUM_GRID_NODES}"
        )
        raise QuadratureError(msg)
    rules = [axis_rule(axis, resolution) for axis in chart.axes]
    center = np.array([(axis.lower + axis.upper) / 2 for axis in chart.axes])
    base = float(volume_density(chart, center[None])[0])
    _check_factorization(chart, collapsed, center, base)
    factors = []
    for k in collapsed:
        _, line_nodes, line_weights = rules[k]
        line = np.tile(center, (resolution, 1))
        line[:, k] = line_nodes
        factors.append(float(np.sum(line_weights * volume_density(chart, line))) / base)
    nodes = np.tile(center, (count, 1))
    weights = np.ones(count)
    if active:
        node_axes = np.meshgrid(*(rules[k][1] for k in active), indexing="ij")
        weight_axes = np.meshgrid(*(rules[k][2] for k in active), indexing="ij")
        for column, k in enumerate(active):
            nodes[:, k] = node_axes[column].reshape(-1)
            weights = weights * weight_axes[column].reshape(-1)
    weights = weights * volume_density(chart, nodes) * prod(factors)
    logger.info(
        f"grid on '{chart.name}': {count} nodes, "
        f"{len(collapsed)} of {n} axes collapsed"
    )
    return QuadratureGrid(
        chart=chart,
        resolution=resolution,
        rules=tuple(rule for rule, _, _ in rules),
        active_axes=active,
        collapsed_axes=collapsed,
        depends_on=extra,
        nodes=nodes,
        weights=weights,
    )


def integrate(grid: QuadratureGrid, field: Expr | ArrayLike) -> float:
    """Return sum_i w_i f(x_i) for an expression or an array of node values."""
    if isinstance(field, Expr):
        if outside := expr_coordinates(field) & set(grid.collapsed_axes):
            names = sorted(grid.chart.axes[k].name for k in outside)
            msg = f"integrand depends on collapsed axes {names}"
            raise QuadratureError(msg)
        columns = [grid.nodes[:, k] for k in range(grid.chart.dim)]
        try:
            raw = evaluate(field, columns, grid.chart.params)
        except ExprDomainError as error:
            msg = f"integrand cannot be evaluated at every node: {error}"
            raise QuadratureError(msg) from error
        values = np.broadcast_to(np.asarray(raw, dtype=np.float64), (grid.size,))
    else:
        values = np.asarray(field, dtype=np.float64).reshape(-1)
        if len(values) != grid.size:
            msg = f"expected {grid.size} node values, got {len(values)}"
            raise QuadratureError(msg)
    if not np.all(np.isfinite(values)):
        msg = "integrand is not finite at every node"
        raise QuadratureError(msg)
    return float(np.sum(grid.weights * values))


def node_values(
    grid: QuadratureGrid,
    extract: Callable[[CurvatureJets], Arrays],
    order: int = DEFAULT_JET_ORDER,
    description: str | None = None,
) -> Arrays:
    """Evaluate curvature quantities at every node of the grid."""
    return sample_fields(grid.chart, grid.nodes, extract, order, description)


def _parts_fields(jets: CurvatureJets) -> Arrays:
    value = jets.algebra.value
    inverse = value(jets.inverse_metric)
    scalar = value(jets.scalar_curvature)
    grad = value(jets.grad_scalar)
    ricci_up = value(jets.ricci_up)
    return {
        "ricci_hessian_r_r": (
            np.einsum("bij,bij->b", ricci_up, value(jets.hessian_scalar)) * scalar
        ),
        "grad_r_squared_r": np.einsum("bij,bi,bj->b", inverse, grad, grad) * scalar,
        "ricci_grad_r": np.einsum("bij,bi,bj->b", ricci_up, grad, grad),
    }


def _parts_report(integrals: dict[str, float], tolerance: float) -> IdentityReport:
    return residual_report(
        "parts_identity",
        [integrals["ricci_hessian_r_r"]],
        [[-0.5 * integrals["grad_r_squared_r"]], [-integrals["ricci_grad_r"]]],
        tolerance,
    )


def parts_identity_check(
    grid: QuadratureGrid, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check int R_ij R_,ij R = -1/2 int |grad R|^2 R - int Ric(grad R, grad R)."""
    values = node_values(grid, _parts_fields, PARTS_JET_ORDER, "integrating by parts")
    integrals = {name: integrate(grid, array) for name, array in values.items()}
    report = _parts_report(integrals, tolerance)
    logger.info(f"parts identity: relative residual {report.max_rel_residual:.3e}")
    return report


def _conformal_defect(
    jets: CurvatureJets,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return the Weyl tensor size, or the Cotton tensor size in dimension three."""
    value = jets.algebra.value
    count = len(jets.points)
    if jets.dim == 3:  # noqa: PLR2004
        nabla = value(jets.nabla_schouten)
        cotton = nabla - np.einsum("bijk->bikj", nabla)
        return (
            np.abs(cotton).reshape(count, -1).max(axis=1),
            np.abs(nabla).reshape(count, -1).max(axis=1),
        )
    return (
        np.abs(value(jets.weyl)).reshape(count, -1).max(axis=1),
        np.abs(value(jets.riemann)).reshape(count, -1).max(axis=1),
    )


def _rigidity_fields(jets: CurvatureJets) -> Arrays:
    value = jets.algebra.value
    n = jets.dim
    inverse = value(jets.inverse_metric)
    scalar = value(jets.scalar_curvature)
    grad_r = value(jets.grad_scalar)
    grad_q = value(jets.grad_q)
    ricci_up = value(jets.ricci_up)
    grad_r_norm2 = np.einsum("bij,bi,bj->b", inverse, grad_r, grad_r)
    grad_q_norm2 = np.einsum("bij,bi,bj->b", inverse, grad_q, grad_q)
    nabla_ricci_norm2 = full_norm2(value(jets.nabla_ricci), inverse)
    lambdas, _ = generalized_eigen(value(jets.ricci), value(jets.metric))
    defect, defect_scale = _conformal_defect(jets)
    fields = _parts_fields(jets) | {
        "grad_r_dot_grad_q": np.einsum("bij,bi,bj->b", inverse, grad_r, grad_q),
        "grad_r_grad_q_abs": np.sqrt(grad_r_norm2 * grad_q_norm2),
        "laplacian_r_squared": value(jets.laplacian_scalar) ** 2,
        "nabla_ricci_squared_r": nabla_ricci_norm2 * scalar,
        "scalar": scalar,
        "grad_r_norm2": grad_r_norm2,
        "nabla_ricci_norm2": nabla_ricci_norm2,
        "ricci_norm2": value(jets.ricci_norm2),
        "ricci_min": lambdas[:, 0],
        "ricci_max_abs": np.abs(lambdas).max(axis=1),
        "conformal_defect": defect,
        "conformal_scale": defect_scale,
    }
    if n > 3:  # noqa: PLR2004
        bach = value(jets.bach)
        weyl_ricci = value(jets.weyl_ricci)
        hessian_weyl = value(jets.covariant_derivative(jets.nabla_weyl))
        fields |= {
            "term_ii": (
                (n - 2) * np.einsum("bij,bij->b", bach, ricci_up)
                - 2 * np.einsum("bij,bij->b", weyl_ricci, ricci_up)
            )
            * scalar,
            "weyl_norm": np.sqrt(
                np.maximum(weyl_norm2(value(jets.weyl), inverse), 0.0)
            ),
            "bach_norm": np.sqrt(np.maximum(full_norm2(bach, inverse), 0.0)),
            "hessian_weyl_norm": np.sqrt(
                np.maximum(full_norm2(hessian_weyl, inverse), 0.0)
            ),
        }
    return fields


_INTEGRATED = (
    "grad_r_dot_grad_q",
    "laplacian_r_squared",
    "grad_r_squared_r",
    "ricci_grad_r",
    "nabla_ricci_squared_r",
    "ricci_hessian_r_r",
    "grad_r_grad_q_abs",
)


def _integrals(grid: QuadratureGrid, values: Arrays) -> dict[str, float]:
    names = [*_INTEGRATED, "term_ii"] if "term_ii" in values else list(_INTEGRATED)
    integrals = {name: integrate(grid, values[name]) for name in names}
    if "term_ii" in integrals:
        b = dimension_constants(grid.chart.dim).b
        integrals["term_ii"] *= 2 * float(b)
    return integrals


def _pinching(n: int, values: Arrays) -> dict[str, bool]:
    """Evaluate the two pointwise Weyl pinching conditions against d_n |grad R|^2."""
    d = float(dimension_constants(n).d)
    scalar = values["scalar"]
    weyl_term = scalar**2 * values["weyl_norm"]
    bound = d * values["grad_r_norm2"]
    scale = np.maximum(1.0, np.maximum(np.abs(weyl_term), bound))
    allowed = DEFAULT_WEYL_TOLERANCE * scale
    bach_flat = values["bach_norm"] <= DEFAULT_WEYL_TOLERANCE * np.maximum(
        1.0, values["ricci_norm2"]
    )
    hessian_term = weyl_term + scalar * values["hessian_weyl_norm"]
    hessian_bound = 2 * (n - 3) / (2 * n - 5) * bound
    return {
        "weyl_bach_pinched": bool(np.all((weyl_term <= bound + allowed) & bach_flat)),
        "weyl_hessian_pinched": bool(np.all(hessian_term <= hessian_bound + allowed)),
    }


def _slacks(
    n: int, integrals: dict[str, float], applicable: bool, tolerance: float
) -> list[InequalityReport]:
    constants = dimension_constants(n)
    a, b, c = float(constants.a), float(constants.b), float(constants.c)
    l = float(constants.l)  # noqa: E741
    gradient = float(constants.gradient_coefficient)
    gq = integrals["grad_r_dot_grad_q"]
    lap2 = integrals["laplacian_r_squared"]
    gr2r = integrals["grad_r_squared_r"]
    ric = integrals["ricci_grad_r"]
    nric = integrals["nabla_ricci_squared_r"]
    rhr = integrals["ricci_hessian_r_r"]
    laplacian_terms = [
        gq,
        -a * lap2,
        -2 * c * gr2r,
        -2 * b * nric,
        -(n - 2) / (n - 1) * b * rhr,
        2 * b / (n - 1) * gr2r,
    ]
    combined_terms = [gq, -l * gr2r, gradient * ric]
    bochner_terms = [lap2, -n / (n - 1) * ric]
    return [
        slack_report(
            "integrated_laplacian_bound",
            [sum(laplacian_terms)],
            [sum(abs(term) for term in laplacian_terms)],
            [applicable],
            tolerance,
        ),
        slack_report(
            "combined_gradient_bound",
            [sum(combined_terms)],
            [sum(abs(term) for term in combined_terms)],
            [applicable],
            tolerance,
        ),
        slack_report(
            "integrated_bochner_bound",
            [sum(bochner_terms)],
            [sum(abs(term) for term in bochner_terms)],
            tolerance=tolerance,
        ),
    ]


def _relative_change(
    coarse: dict[str, float], fine: dict[str, float], floor: float
) -> float:
    return max(
        (abs(coarse[name] - fine[name]) / max(abs(fine[name]), floor) for name in fine),
        default=0.0,
    )


def rigidity_report(
    grid: QuadratureGrid, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> RigidityReport:
    """Integrate the quantities of the rigidity argument and check its conclusion.

    The integrals are recomputed on a grid of twice the resolution; they count
    as converged when no integral moves by more than the convergence tolerance.
    """
    chart = grid.chart
    n = chart.dim
    if n < 3:  # noqa: PLR2004
        msg = f"the rigidity report needs dimension at least 3, got {n}"
        raise PreconditionError(msg)
    if n < RIGIDITY_REGIME_DIMENSION:
        logger.warning(
            f"dimension {n} is below {RIGIDITY_REGIME_DIMENSION}, where the "
            "Ricci gradient coefficient is not negative"
        )
    values = node_values(grid, _rigidity_fields, description="integrating curvature")
    integrals = _integrals(grid, values)
    fine_grid = build_grid(chart, 2 * grid.resolution, grid.depends_on)
    fine_values = node_values(fine_grid, _rigidity_fields, description="refining")
    fine = _integrals(fine_grid, fine_values)
    change = _relative_change(integrals, fine, DEFAULT_SCALE_FLOOR * fine_grid.volume)
    converged = change < DEFAULT_CONVERGENCE_TOLERANCE
    if not converged:
        logger.warning(f"integrals moved by {change:.3e} under resolution doubling")

    ricci_scale = max(1.0, float(np.max(values["ricci_max_abs"])))
    ricci_nonnegative = bool(
        np.all(values["ricci_min"] >= -DEFAULT_RICCI_SIGN_TOLERANCE * ricci_scale)
    )
    conformally_flat = bool(
        np.max(values["conformal_defect"])
        <= DEFAULT_WEYL_TOLERANCE * max(1.0, float(np.max(values["conformal_scale"])))
    )
    condition_allowed = (
        tolerance * integrals["grad_r_grad_q_abs"]
        + DEFAULT_ABSOLUTE_TOLERANCE * grid.volume
    )
    condition_holds = integrals["grad_r_dot_grad_q"] <= condition_allowed
    hypotheses_met = ricci_nonnegative and conformally_flat and condition_holds

    scalar = values["scalar"]
    scalar_scale = max(1.0, float(np.max(np.abs(scalar))))
    constant_scalar = float(np.ptp(scalar)) <= SIGNATURE_TOLERANCE * scalar_scale
    parallel_ricci = float(
        np.sqrt(np.max(values["nabla_ricci_norm2"]))
    ) <= SIGNATURE_TOLERANCE * max(1.0, float(np.sqrt(np.max(values["ricci_norm2"]))))
    signature = constant_scalar and parallel_ricci
    if not hypotheses_met:
        verdict = "hypotheses not met"
    elif signature:
        verdict = "hypotheses met: R is constant and Ric is parallel"
    else:
        verdict = "hypotheses met but the conclusion signature is violated"

    parts = _parts_report(integrals, tolerance)
    applicable = ricci_nonnegative and conformally_flat
    slacks = _slacks(n, integrals, applicable=applicable, tolerance=tolerance)
    logger.info(f"rigidity report for '{chart.name}': {verdict}")
    return RigidityReport(
        chart=chart.name,
        dim=n,
        resolution=grid.resolution,
        nodes=grid.size,
        volume=grid.volume,
        integrals={
            name: value
            for name, value in integrals.items()
            if name != "grad_r_grad_q_abs"
        },
        parts_identity=parts,
        slacks=slacks,
        condition_holds=condition_holds,
        ricci_nonnegative=ricci_nonnegative,
        conformally_flat=conformally_flat,
        hypotheses_met=hypotheses_met,
        constant_scalar=constant_scalar,
        parallel_ricci=parallel_ricci,
        signature_satisfied=signature,
        pinching=_pinching(n, values) if n > 3 else {},  # noqa: PLR2004
        dimension_regime=n >= RIGIDITY_REGIME_DIMENSION,
        converged=converged,
        max_relative_change=change,
        verdict=verdict,
    )
