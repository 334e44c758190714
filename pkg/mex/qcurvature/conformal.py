"""Conformal changes, the Paneitz operator and the Yamabe equation on S^1 x S^(n-1).

A conformal factor is either an exponent f with g-hat = e^{2f} g or a positive
function u with g-hat = u^{4/(n-2)} g (scalar curvature convention) or
u^{4/(n-4)} g (Paneitz convention).
"""

from collections.abc import Callable
from fractions import Fraction
from math import inf, pi, sqrt

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict
from rich.console import Console
from rich.progress import track
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from mex.common.logging import logger
from mex.qcurvature.catalog import builtin_metric
from mex.qcurvature.constants import (
    CONSTANT_SCALAR_TOLERANCE,
    DEFAULT_RELATIVE_TOLERANCE,
    DEFAULT_RESOLUTION,
    DEFAULT_SCALE_FLOOR,
    DEFAULT_YAMABE_GRID,
    MINIMUM_RESOLUTION,
    YAMABE_ATOL,
    YAMABE_MAX_ITERATIONS,
    YAMABE_MAX_MODES,
    YAMABE_RTOL,
    YAMABE_SERIES_CUTOFF,
    YAMABE_SWEEP_RANGE,
    YAMABE_SWEEP_SAMPLES,
)
from mex.qcurvature.exceptions import (
    ChartError,
    ConvergenceError,
    ExprDomainError,
    PreconditionError,
)
from mex.qcurvature.expr import (
    ZERO,
    Coord,
    Expr,
    coerce,
    constant_value,
    cos,
    evaluate,
    exp,
    expr_coordinates,
    expr_params,
    log,
    mul,
    power,
    substitute_params,
)
from mex.qcurvature.geometry import (
    ChartBlock,
    CurvatureJets,
    MetricChart,
    full_norm2,
    sample_fields,
)
from mex.qcurvature.helpers import residual_report
from mex.qcurvature.jets import Jet
from mex.qcurvature.models import IdentityReport
from mex.qcurvature.quadrature import build_grid, integrate
from mex.qcurvature.types import Convention, FloatArray

Arrays = dict[str, NDArray[np.float64]]

# the Paneitz operator and Q need fourth metric derivatives
PANEITZ_JET_ORDER = 4
LAW_JET_ORDER = 2


class ConformalFactor(BaseModel):
    """Conformal factor together with the convention it is written in."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    expr: Expr
    convention: Convention = "exponential"
    params: dict[str, float] = {}

    def bound(self) -> Expr:
        """Return the expression with the factor's own parameters substituted."""
        return substitute_params(self.expr, self.params)

    def weight(self, n: int) -> Fraction:
        """Return the power of u that multiplies the metric."""
        match self.convention:
            case "scalar" if n >= 3:  # noqa: PLR2004
                return Fraction(4, n - 2)
            case "paneitz" if n >= 5:  # noqa: PLR2004
                return Fraction(4, n - 4)
            case "exponential":
                msg = "the exponential convention has no power of u"
                raise PreconditionError(msg)
            case _:
                msg = f"the {self.convention} convention is undefined in dimension {n}"
                raise PreconditionError(msg)

    def exponent(self, n: int) -> Expr:
        """Return f with g-hat = e^{2f} g."""
        if self.convention == "exponential":
            return self.bound()
        return coerce(self.weight(n) / 2) * log(self.bound())

    def multiplier(self, n: int) -> Expr:
        """Return the function that multiplies every metric entry."""
        if self.convention == "exponential":
            return exp(2 * self.bound())
        return power(self.bound(), self.weight(n))


class SchoenComparison(BaseModel):
    """Both sides of one integral inequality."""

    lhs: float
    rhs: float
    holds: bool


class SchoenReport(BaseModel):
    """Integral comparison of traceless Ricci tensors across a conformal change."""

    chart: str
    resolution: int
    scalar_curvature: float
    lhs: float
    rhs: float
    scale: float
    holds: bool
    rewritten: SchoenComparison
    exchanged: SchoenComparison | None


class YamabeSolution(BaseModel):
    """Periodic solution of the Yamabe equation on S^1(T) x S^(n-1)."""

    n: int
    period: float
    grid: int
    threshold: float
    amplitude: float
    constant: bool
    constant_value: float
    samples: FloatArray
    coefficients: list[float]
    residual: float
    periodicity_error: float

    def profile(self, index: int = 0, name: str = "t") -> Expr:
        """Return the cosine series of u as an expression in one coordinate."""
        t = Coord(index, name)
        frequency = 2 * pi / self.period
        series: Expr = coerce(self.coefficients[0])
        for k, coefficient in enumerate(self.coefficients[1:], start=1):
            series = series + coefficient * cos(coerce(frequency * k) * t)
        return series


def _check_positive(chart: MetricChart, u: Expr) -> None:
    points = chart.probe_points()
    columns = [points[:, k] for k in range(chart.dim)]
    try:
        values = np.broadcast_to(evaluate(u, columns, chart.params), (len(points),))
    except ExprDomainError as error:
        msg = f"conformal factor cannot be evaluated on the probe grid: {error}"
        raise PreconditionError(msg) from error
    if not np.all(values > 0):
        point = points[int(np.argmin(values))].tolist()
        msg = f"conformal factor u must be positive, got {np.min(values)} at {point}"
        raise PreconditionError(msg)


def conformal_metric(chart: MetricChart, factor: ConformalFactor) -> MetricChart:
    """Return the chart of g-hat, the metric scaled by the conformal factor.

    Homogeneous blocks lose their flag when the factor reads their coordinates.
    """
    n = chart.dim
    expr = factor.bound()
    touched = expr_coordinates(expr)
    if outside := sorted(k for k in touched if k >= n):
        msg = f"conformal factor uses coordinates {outside} outside the chart"
        raise ChartError(msg)
    if missing := expr_params(expr) - set(chart.params):
        msg = f"conformal factor uses unbound parameters {sorted(missing)}"
        raise ChartError(msg)
    if factor.convention != "exponential":
        _check_positive(chart, expr)
    multiplier = factor.multiplier(n)
    rows: list[list[Expr]] = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            entry = chart.metric[i][j]
            scaled = entry if constant_value(entry) == 0 else mul(multiplier, entry)
            rows[i][j] = rows[j][i] = scaled
    blocks = tuple(
        ChartBlock(
            axes=block.axes,
            homogeneous=block.homogeneous and not touched & set(block.axes),
        )
        for block in chart.blocks
    )
    return MetricChart(
        name=f"{chart.name} conformal({factor.convention})",
        axes=chart.axes,
        metric=tuple(tuple(row) for row in rows),
        params=chart.params,
        blocks=blocks,
    )


def _factor_derivatives(
    jets: CurvatureJets, f: Expr
) -> tuple[Jet, FloatArray, FloatArray, FloatArray, FloatArray]:
    """Return the jet of f and the values of df, its Hessian, Laplacian and |df|^2."""
    value = jets.algebra.value
    jet = jets.scalar(f)
    grad = jets.algebra.gradient(jet)
    hessian = value(jets.covariant_derivative(grad))
    inverse = value(jets.inverse_metric)
    df = value(grad)
    return (
        jet,
        df,
        hessian,
        np.einsum("bij,bij->b", inverse, hessian),
        np.einsum("bij,bi,bj->b", inverse, df, df),
    )


def verify_conformal_laws(
    chart: MetricChart,
    factor: ConformalFactor,
    points: ArrayLike,
    tolerance: float = DEFAULT_RELATIVE_TOLERANCE,
) -> IdentityReport:
    """Compare Ric and R of g-hat computed directly with the transformation laws.

    Ric-hat = Ric - (n-2)(Hess f - df df) - (Lap f + (n-2)|df|^2) g and
    R-hat = e^{-2f}(R - 2(n-1) Lap f - (n-1)(n-2)|df|^2).
    """
    n = chart.dim
    hat = conformal_metric(chart, factor)
    f = factor.exponent(n)

    def law(jets: CurvatureJets) -> Arrays:
        value = jets.algebra.value
        jet, df, hessian, laplacian, norm2 = _factor_derivatives(jets, f)
        metric = value(jets.metric)
        ricci = (
            value(jets.ricci)
            - (n - 2) * (hessian - np.einsum("bi,bj->bij", df, df))
            - (laplacian + (n - 2) * norm2)[:, None, None] * metric
        )
        scalar = np.exp(-2 * value(jet)) * (
            value(jets.scalar_curvature)
            - 2 * (n - 1) * laplacian
            - (n - 1) * (n - 2) * norm2
        )
        flat_ricci = ricci.reshape(len(df), -1)
        return {"law": np.concatenate([flat_ricci, scalar[:, None]], axis=1)}

    def direct(jets: CurvatureJets) -> Arrays:
        value = jets.algebra.value
        ricci = value(jets.ricci)
        scalar = value(jets.scalar_curvature)
        return {
            "direct": np.concatenate(
                [ricci.reshape(len(scalar), -1), scalar[:, None]], axis=1
            )
        }

    predicted = sample_fields(chart, points, law, LAW_JET_ORDER)["law"]
    computed = sample_fields(hat, points, direct, LAW_JET_ORDER)["direct"]
    report = residual_report("conformal_laws", computed, [predicted], tolerance)
    logger.info(f"conformal laws: max relative residual {report.max_rel_residual:.3e}")
    return report


def verify_traceless_divergence(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check div(Ric - R g / n) = (n-2)/(2n) grad R, which vanishes for constant R."""
    n = chart.dim

    def sides(jets: CurvatureJets) -> Arrays:
        value = jets.algebra.value
        nabla = jets.covariant_derivative(jets.traceless_ricci)
        divergence = jets.algebra.contract("jk,ijk->i", jets.inverse_metric, nabla)
        return {
            "lhs": value(divergence),
            "rhs": (n - 2) / (2 * n) * value(jets.grad_scalar),
        }

    values = sample_fields(chart, points, sides, order=3)
    return residual_report(
        "traceless_divergence", values["lhs"], [values["rhs"]], tolerance
    )


def _require_paneitz_dimension(n: int) -> None:
    if n < 5:  # noqa: PLR2004
        msg = f"the Paneitz operator needs dimension at least 5, got {n}"
        raise PreconditionError(msg)


def _paneitz_jet(jets: CurvatureJets, u: Jet) -> Jet:
    """Apply Lap^2 u - div(a R du - 4/(n-2) Ric(du, .)) + (n-4)/2 Q u."""
    algebra = jets.algebra
    n = jets.dim
    coefficient = ((n - 2) ** 2 + 4) / (2 * (n - 1) * (n - 2))
    grad = algebra.gradient(u)
    bilaplacian = jets.laplacian(jets.trace(jets.covariant_derivative(grad)))
    scaled = algebra.contract(",i->i", jets.scalar_curvature, grad)
    ricci = algebra.contract("ij,j->i", jets.ricci, jets.raised(grad))
    scaled, ricci = algebra.align(scaled, ricci)
    divergence = jets.divergence(coefficient * scaled - 4 / (n - 2) * ricci)
    zeroth = algebra.multiply(jets.q, u)
    bilaplacian, divergence, zeroth = algebra.align(bilaplacian, divergence, zeroth)
    return bilaplacian - divergence + (n - 4) / 2 * zeroth


def paneitz_values(
    chart: MetricChart, u: Expr, points: ArrayLike
) -> NDArray[np.float64]:
    """Evaluate P_g u at every point."""
    _require_paneitz_dimension(chart.dim)

    def extract(jets: CurvatureJets) -> Arrays:
        return {"paneitz": jets.algebra.value(_paneitz_jet(jets, jets.scalar(u)))}

    return sample_fields(chart, points, extract, PANEITZ_JET_ORDER)["paneitz"]


def paneitz_apply(chart: MetricChart, u: Expr, point: ArrayLike) -> float:
    """Evaluate P_g u at one point."""
    return float(paneitz_values(chart, u, [point])[0])


def q_conformal_check(
    chart: MetricChart,
    u: Expr,
    points: ArrayLike,
    tolerance: float = DEFAULT_RELATIVE_TOLERANCE,
) -> IdentityReport:
    """Compare Q of u^{4/(n-4)} g with 2/(n-4) u^{-(n+4)/(n-4)} P_g u."""
    n = chart.dim
    _require_paneitz_dimension(n)
    hat = conformal_metric(chart, ConformalFactor(expr=u, convention="paneitz"))

    def predicted(jets: CurvatureJets) -> Arrays:
        value = jets.algebra.value
        u_jet = jets.scalar(u)
        scale = value(u_jet) ** (-(n + 4) / (n - 4))
        return {"q": 2 / (n - 4) * scale * value(_paneitz_jet(jets, u_jet))}

    def direct(jets: CurvatureJets) -> Arrays:
        return {"q": jets.algebra.value(jets.q)}

    expected = sample_fields(chart, points, predicted, PANEITZ_JET_ORDER)["q"]
    computed = sample_fields(hat, points, direct, PANEITZ_JET_ORDER)["q"]
    report = residual_report("q_covariance", computed, [expected], tolerance)
    logger.info(f"Q covariance: max relative residual {report.max_rel_residual:.3e}")
    return report


def _scalar_spread(values: NDArray[np.float64]) -> tuple[float, bool]:
    scale = max(1.0, float(np.max(np.abs(values))))
    constant = float(np.ptp(values)) <= CONSTANT_SCALAR_TOLERANCE * scale
    return float(np.mean(values)), constant


def _comparison(lhs: float, rhs: float) -> SchoenComparison:
    scale = max(abs(lhs), abs(rhs), DEFAULT_SCALE_FLOOR)
    holds = lhs <= rhs + DEFAULT_SCALE_FLOOR * scale
    return SchoenComparison(lhs=lhs, rhs=rhs, holds=holds)


def schoen_check(
    chart: MetricChart, f: Expr, resolution: int = DEFAULT_RESOLUTION
) -> SchoenReport:
    """Compare int e^{-f}|Ric°_g|_g^2 dV_g with int e^{-f}|Ric°_g-hat|_g^2 dV_g.

    The chart must be closed with constant scalar curvature and g-hat = e^{2f} g.
    The report also carries the right side rewritten on g-hat, and the comparison
    with the two metrics exchanged when g-hat has constant scalar curvature too.
    """
    if not chart.closed:
        msg = f"chart '{chart.name}' is not closed"
        raise PreconditionError(msg)
    if resolution < MINIMUM_RESOLUTION:
        msg = f"resolution must be at least {MINIMUM_RESOLUTION}, got {resolution}"
        raise PreconditionError(msg)
    probes = sample_fields(
        chart,
        chart.probe_points(),
        lambda jets: {"scalar": jets.algebra.value(jets.scalar_curvature)},
        LAW_JET_ORDER,
    )
    scalar, constant = _scalar_spread(probes["scalar"])
    if not constant:
        msg = f"scalar curvature of '{chart.name}' is not constant on the probe grid"
        raise PreconditionError(msg)
    n = chart.dim
    hat = conformal_metric(chart, ConformalFactor(expr=f))
    grid = build_grid(chart, resolution, expr_coordinates(f))

    def base(jets: CurvatureJets) -> Arrays:
        value = jets.algebra.value
        inverse = value(jets.inverse_metric)
        return {
            "f": value(jets.scalar(f)),
            "inverse": inverse,
            "norm2": full_norm2(value(jets.traceless_ricci), inverse),
        }

    def changed(jets: CurvatureJets) -> Arrays:
        value = jets.algebra.value
        return {
            "traceless": value(jets.traceless_ricci),
            "inverse": value(jets.inverse_metric),
            "scalar": value(jets.scalar_curvature),
        }

    g_side = sample_fields(chart, grid.nodes, base, LAW_JET_ORDER)
    hat_side = sample_fields(hat, grid.nodes, changed, LAW_JET_ORDER)
    weight = np.exp(g_side["f"])
    hat_in_g = full_norm2(hat_side["traceless"], g_side["inverse"])
    hat_in_hat = full_norm2(hat_side["traceless"], hat_side["inverse"])
    lhs = integrate(grid, g_side["norm2"] / weight)
    rhs = integrate(grid, hat_in_g / weight)
    main = _comparison(lhs, rhs)
    # dV_hat = e^{nf} dV_g
    rewritten = _comparison(lhs, integrate(grid, weight**3 * hat_in_hat))
    exchanged = None
    if _scalar_spread(hat_side["scalar"])[1]:
        exchanged = _comparison(
            integrate(grid, weight ** (n + 1) * hat_in_hat),
            integrate(grid, weight ** (n - 3) * g_side["norm2"]),
        )
    logger.info(f"traceless Ricci comparison: {lhs:.6e} <= {rhs:.6e} is {main.holds}")
    return SchoenReport(
        chart=chart.name,
        resolution=resolution,
        scalar_curvature=scalar,
        lhs=lhs,
        rhs=rhs,
        scale=max(abs(lhs), abs(rhs)),
        holds=main.holds,
        rewritten=rewritten,
        exchanged=exchanged,
    )


def yamabe_threshold(n: int) -> float:
    """Return the period above which non-constant solutions exist."""
    return 2 * pi / sqrt(n - 2)


def yamabe_constant(n: int) -> float:
    """Return the constant solution ((n-2)/n)^{(n-2)/4}."""
    return ((n - 2) / n) ** ((n - 2) / 4)


class _Event:
    """Terminal zero crossing of one state component."""

    def __init__(self, component: int, direction: float) -> None:
        self.component = component
        self.direction = direction
        self.terminal = True

    def __call__(self, t: float, y: NDArray[np.float64]) -> float:  # noqa: ARG002
        return float(y[self.component])


def _yamabe_field(n: int) -> Callable[[float, NDArray[np.float64]], list[float]]:
    exponent = (n + 2) / (n - 2)

    def field(t: float, y: NDArray[np.float64]) -> list[float]:  # noqa: ARG001
        u, du = y
        return [du, (n - 2) / 4 * ((n - 2) * u - n * max(u, 0.0) ** exponent)]

    return field


def _half_period(n: int, amplitude: float, limit: float) -> float:
    """Return the time until u' vanishes again when starting at rest from amplitude."""
    direction = -1.0 if amplitude < yamabe_constant(n) else 1.0
    solution = solve_ivp(
        _yamabe_field(n),
        (0.0, limit),
        [amplitude, 0.0],
        method="DOP853",
        rtol=YAMABE_RTOL,
        atol=YAMABE_ATOL,
        events=[_Event(1, direction), _Event(0, -1.0)],
    )
    turns = solution.t_events[0]
    return float(turns[0]) if len(turns) else inf


def _cosine_series(samples: NDArray[np.float64]) -> list[float]:
    spectrum = np.fft.rfft(samples) / len(samples)
    coefficients = [float(spectrum[0].real), *(2 * spectrum[1:].real)]
    if len(samples) % 2 == 0:
        coefficients[-1] /= 2
    cutoff = YAMABE_SERIES_CUTOFF * abs(coefficients[0])
    keep = max(
        (k for k, value in enumerate(coefficients) if abs(value) > cutoff), default=0
    )
    return coefficients[: min(keep, YAMABE_MAX_MODES) + 1]


def _ode_residual(n: int, period: float, coefficients: list[float], grid: int) -> float:
    """Return the RMS residual of the cosine series on the sample grid."""
    t = np.arange(grid) * period / grid
    modes = 2 * pi / period * np.arange(len(coefficients))
    waves = np.cos(np.outer(t, modes))
    u = waves @ np.asarray(coefficients)
    second = -waves @ (np.asarray(coefficients) * modes**2)
    residual = (
        -4 * (n - 1) / (n - 2) * second
        + (n - 1) * (n - 2) * u
        - n * (n - 1) * np.abs(u) ** ((n + 2) / (n - 2))
    )
    return float(np.sqrt(np.mean(residual**2)))


def yamabe_ode_solve(
    n: int, period: float, grid: int = DEFAULT_YAMABE_GRID
) -> YamabeSolution:
    """Solve -4(n-1)/(n-2) u'' + (n-1)(n-2) u = n(n-1) u^{(n+2)/(n-2)} with period T.

    Shooting from rest at u(0) = A: the half period of the orbit through A is
    matched with T/2 by Brent's method, starting from the first sign change of a
    sweep over A. Without a sign change the constant solution is returned, which
    only means that the sweep found nothing else.

    The half period is clipped at T, so the mismatch stays continuous across the
    homoclinic orbit where the half period diverges. Above the threshold the sign
    change usually sits right below that orbit, with T/2 on its far side.
    """
    if n < 3:  # noqa: PLR2004
        msg = f"the Yamabe equation needs dimension at least 3, got {n}"
        raise PreconditionError(msg)
    if period <= 0:
        msg = f"period must be positive, got {period}"
        raise PreconditionError(msg)
    if grid < MINIMUM_RESOLUTION or grid % 2:
        msg = f"grid must be even and at least {MINIMUM_RESOLUTION}, got {grid}"
        raise PreconditionError(msg)
    logger.info(f"shooting for periodic Yamabe solutions with n={n}, T={period}")
    constant_value = yamabe_constant(n)
    half = period / 2

    def mismatch(amplitude: float) -> float:
        return min(_half_period(n, amplitude, period), period) - half

    sweep_factors = np.geomspace(*YAMABE_SWEEP_RANGE, YAMABE_SWEEP_SAMPLES)
    amplitudes = constant_value * sweep_factors
    sweep = [
        mismatch(float(amplitude))
        for amplitude in track(
            amplitudes, description="sweeping amplitudes", console=Console(stderr=True)
        )
    ]
    bracket = next(
        (
            (float(amplitudes[k]), float(amplitudes[k + 1]))
            for k in range(len(sweep) - 1)
            if sweep[k] * sweep[k + 1] < 0
        ),
        None,
    )
    threshold = yamabe_threshold(n)
    if bracket is None:
        logger.info("sweep found only the constant solution")
        samples = np.full(grid, constant_value)
        coefficients = [constant_value]
        return YamabeSolution(
            n=n,
            period=period,
            grid=grid,
            threshold=threshold,
            amplitude=constant_value,
            constant=True,
            constant_value=constant_value,
            samples=samples,
            coefficients=coefficients,
            residual=_ode_residual(n, period, coefficients, grid),
            periodicity_error=0.0,
        )
    try:
        amplitude = brentq(
            mismatch, *bracket, xtol=1e-14, maxiter=YAMABE_MAX_ITERATIONS
        )
    except RuntimeError as error:
        msg = f"amplitude search did not converge in {YAMABE_MAX_ITERATIONS} steps"
        raise ConvergenceError(msg) from error
    times = np.arange(grid // 2 + 1) * period / grid
    solution = solve_ivp(
        _yamabe_field(n),
        (0.0, half),
        [amplitude, 0.0],
        method="DOP853",
        rtol=YAMABE_RTOL,
        atol=YAMABE_ATOL,
        t_eval=times,
    )
    first = solution.y[0]
    samples = np.concatenate([first, first[-2:0:-1]])
    coefficients = _cosine_series(samples)
    residual = _ode_residual(n, period, coefficients, grid)
    logger.info(
        f"non-constant solution with u(0)={amplitude:.12f}, residual {residual:.3e}"
    )
    return YamabeSolution(
        n=n,
        period=period,
        grid=grid,
        threshold=threshold,
        amplitude=float(amplitude),
        constant=False,
        constant_value=constant_value,
        samples=samples,
        coefficients=coefficients,
        residual=residual,
        periodicity_error=float(abs(solution.y[1][-1])),
    )


def yamabe_metric(solution: YamabeSolution) -> MetricChart:
    """Return u^{4/(n-2)} times the product metric of S^1(T) x S^(n-1)."""
    cylinder = builtin_metric(
        "cylinder", solution.n, {"T": solution.period}, closed=True
    ).chart
    factor = ConformalFactor(expr=solution.profile(), convention="scalar")
    return conformal_metric(cylinder, factor)
