import hashlib
import json
from collections.abc import Generator
from contextlib import contextmanager
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from time import perf_counter
from typing import Annotated, Any, cast

import numpy as np
import typer
from numpy.typing import NDArray
from pydantic import BaseModel

from mex.common.logging import logger
from mex.qcurvature.catalog import CLOSED_CHARTS, builtin_metric, catalog_names
from mex.qcurvature.conformal import (
    ConformalFactor,
    conformal_metric,
    q_conformal_check,
    schoen_check,
    verify_conformal_laws,
    verify_traceless_divergence,
    yamabe_metric,
    yamabe_ode_solve,
    yamabe_threshold,
)
from mex.qcurvature.constants import (
    DEFAULT_GRID_DEPTH,
    DEFAULT_POINTS,
    DEFAULT_RELATIVE_TOLERANCE,
    DEFAULT_RESOLUTION,
    DEFAULT_SCALE_FLOOR,
    DEFAULT_SEED,
    DEFAULT_WEYL_TOLERANCE,
    DEFAULT_YAMABE_GRID,
    MINIMUM_GRID_DEPTH,
    MINIMUM_RESOLUTION,
    REPORT_SCHEMA_VERSION,
    SIMPLEX_MAX_DIMENSION,
    SIMPLEX_MIN_DIMENSION,
    YAMABE_Q_SPREAD,
    YAMABE_RESIDUAL_TOLERANCE,
    YAMABE_SCALAR_TOLERANCE,
)
from mex.qcurvature.exceptions import (
    ChartError,
    ConvergenceError,
    ExprError,
    PreconditionError,
    QuadratureError,
    TensorError,
)
from mex.qcurvature.expr import parse_expr, substitute_params
from mex.qcurvature.geometry import (
    CurvatureJets,
    MetricChart,
    full_norm2,
    sample_fields,
)
from mex.qcurvature.helpers import create_faker, print_json, sample_points, to_json
from mex.qcurvature.hypersurface import (
    Immersion,
    check_immersion,
    gauss_residuals,
    isoparametric_clifford_data,
    lambda_quantities,
    pinching_check,
    shape_data,
)
from mex.qcurvature.identities import IDENTITY_CHECKS, verify_pointwise_bounds
from mex.qcurvature.models import RunReport
from mex.qcurvature.quadrature import build_grid, rigidity_report
from mex.qcurvature.simplexlab import (
    critical_points,
    dimension_constants,
    simplex_min_search,
)
from mex.qcurvature.specfile import (
    parse_params,
    require_chart,
    resolve_source,
)
from mex.qcurvature.tensor import generalized_eigen
from mex.qcurvature.types import Convention

INPUT_ERRORS = (ChartError, ExprError, PreconditionError, QuadratureError, TensorError)
EXIT_CHECKS_FAILED = 1
EXIT_INPUT_ERROR = 2
INVARIANTS_JET_ORDER = 4

app = typer.Typer(
    name="qcurv",
    help="Check curvature identities and Q-curvature rigidity on explicit metrics.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)

SpecOption = Annotated[
    Path | None,
    typer.Option(
        help="TOML file describing a manifold or an immersion.",
        exists=True,
        file_okay=True,
        dir_okay=False,
        readable=True,
    ),
]
CatalogOption = Annotated[
    str | None,
    typer.Option(help="Name of a built-in metric or immersion, see `qcurv catalog`."),
]
DimOption = Annotated[
    int,
    typer.Option(help="Dimension of the built-in metric or immersion.", min=2, max=16),
]
ParamOption = Annotated[
    list[str] | None,
    typer.Option(help="Catalog parameter as key=value, may be repeated."),
]
PointsOption = Annotated[
    int,
    typer.Option(help="Number of random points to evaluate at.", min=1, max=10_000),
]
SeedOption = Annotated[int, typer.Option(help="The seed value for faker randomness.")]
ToleranceOption = Annotated[
    float,
    typer.Option(help="Relative tolerance of every check.", min=0.0, max=1.0),
]
ResolutionOption = Annotated[
    int,
    typer.Option(
        help="Quadrature nodes per non-collapsed axis.",
        min=MINIMUM_RESOLUTION,
        max=1024,
    ),
]
PrettyOption = Annotated[
    bool, typer.Option("--pretty/--json", help="Indent the JSON report.")
]


class Emitter:
    """Collects the run envelope and prints the report when the run ends."""

    def __init__(self, subcommand: str, parameters: dict[str, Any]) -> None:
        """Start the clock for one subcommand."""
        self.subcommand = subcommand
        self.parameters = parameters
        self.digest = _digest(parameters)
        self.started = perf_counter()

    def finish(self, results: dict[str, Any], *, passed: bool, pretty: bool) -> None:
        """Print the report and exit with 1 when a check failed."""
        report = RunReport(
            schema_version=REPORT_SCHEMA_VERSION,
            tool_version=_tool_version(),
            input_digest=self.digest,
            subcommand=self.subcommand,
            parameters=self.parameters,
            results=results,
            passed=passed,
            timing={"seconds": perf_counter() - self.started},
        )
        print_json(to_json(report, pretty=pretty), pretty=pretty)
        logger.info(f"{self.subcommand} done")
        if not passed:
            raise typer.Exit(code=EXIT_CHECKS_FAILED)


def _tool_version() -> str:
    try:
        return version("mex-qcurvature")
    except PackageNotFoundError:  # pragma: no cover
        return "0.0.0"


def _digest(parameters: dict[str, Any]) -> str:
    canonical = json.dumps(parameters, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _dump(value: BaseModel | list[BaseModel]) -> Any:  # noqa: ANN401
    if isinstance(value, list):
        return [item.model_dump(mode="json") for item in value]
    return value.model_dump(mode="json")


@contextmanager
def input_errors() -> Generator[None, None, None]:
    """Turn invalid input into a diagnostic on stderr and exit code 2."""
    try:
        yield
    except INPUT_ERRORS as error:
        typer.echo(f"error: {error}", err=True)
        raise typer.Exit(code=EXIT_INPUT_ERROR) from error
    except ConvergenceError as error:
        typer.echo(f"error: {error}", err=True)
        raise typer.Exit(code=EXIT_CHECKS_FAILED) from error


def _invariant_fields(jets: CurvatureJets) -> dict[str, NDArray[np.float64]]:
    value = jets.algebra.value
    inverse = value(jets.inverse_metric)
    eigenvalues, _ = generalized_eigen(value(jets.ricci), value(jets.metric))
    fields = {
        "point": jets.points,
        "scalar": value(jets.scalar_curvature),
        "ricci_norm2": value(jets.ricci_norm2),
        "ricci_eigenvalues": eigenvalues,
    }
    if jets.dim >= 3:  # noqa: PLR2004
        fields["q"] = value(jets.q)
        fields["weyl_norm"] = np.sqrt(
            np.maximum(full_norm2(value(jets.weyl), inverse), 0.0)
        )
    return fields


def point_invariants(
    chart: MetricChart, points: NDArray[np.float64]
) -> list[dict[str, Any]]:
    """Return scalar, Q, Ricci spectrum and Weyl norm at every point."""
    values = sample_fields(
        chart, points, _invariant_fields, INVARIANTS_JET_ORDER, "evaluating invariants"
    )
    return [
        {name: array[index].tolist() for name, array in values.items()}
        for index in range(len(points))
    ]


def _close(actual: float, expected: float, tolerance: float) -> bool:
    return abs(actual - expected) <= tolerance * max(1.0, abs(expected))


def compare_expected(
    rows: list[dict[str, Any]], expected: dict[str, Any], tolerance: float
) -> bool:
    """Tell whether every row matches the exact catalog invariants."""
    for row in rows:
        if not _close(row["scalar"], expected["scalar"], tolerance):
            return False
        if expected.get("q") is not None and not _close(
            row["q"], expected["q"], tolerance
        ):
            return False
        pairs = zip(
            row["ricci_eigenvalues"], sorted(expected["ricci_eigenvalues"]), strict=True
        )
        if not all(_close(a, b, tolerance) for a, b in pairs):
            return False
        if expected["weyl_zero"] and row.get("weyl_norm", 0.0) > DEFAULT_WEYL_TOLERANCE:
            return False
    return True


@app.command()
def invariants(  # noqa: PLR0913
    spec: SpecOption = None,
    catalog: CatalogOption = None,
    dim: DimOption = 3,
    param: ParamOption = None,
    points: PointsOption = DEFAULT_POINTS,
    seed: SeedOption = DEFAULT_SEED,
    tolerance: ToleranceOption = DEFAULT_RELATIVE_TOLERANCE,
    pretty: PrettyOption = False,
) -> None:
    """Evaluate scalar curvature, Q-curvature, the Ricci spectrum and |W|."""
    logger.info("starting invariants")
    with input_errors():
        source = resolve_source(spec, catalog, dim, param)
        chart = require_chart(source)
        settings = {"points": points, "seed": seed, "tolerance": tolerance}
        emitter = Emitter("invariants", source.description | settings)
        rows = point_invariants(chart, sample_points(chart, points, seed))
    results: dict[str, Any] = {"chart": chart.name, "points": rows}
    passed = True
    if source.catalog is not None:
        entry = builtin_metric(source.catalog, chart.dim, parse_params(param))
        if entry.expected is not None:
            expected = entry.expected.model_dump(mode="json")
            passed = compare_expected(rows, expected, tolerance)
            results |= {
                "expected": expected,
                "provenance": entry.provenance,
                "matches_expected": passed,
            }
    emitter.finish(results, passed=passed, pretty=pretty)


@app.command()
def verify(  # noqa: PLR0913
    spec: SpecOption = None,
    catalog: CatalogOption = None,
    dim: DimOption = 3,
    param: ParamOption = None,
    identity: Annotated[
        list[str] | None,
        typer.Option(
            help="Identity to check, may be repeated.",
            show_default="every identity defined in the dimension",
        ),
    ] = None,
    points: PointsOption = DEFAULT_POINTS,
    seed: SeedOption = DEFAULT_SEED,
    tolerance: ToleranceOption = DEFAULT_RELATIVE_TOLERANCE,
    pretty: PrettyOption = False,
) -> None:
    """Check the pointwise curvature identities and bounds at random points."""
    logger.info("starting identity verification")
    skipped: dict[str, str] = {}
    reports: list[Any] = []
    with input_errors():
        source = resolve_source(spec, catalog, dim, param)
        chart = require_chart(source)
        if unknown := sorted(set(identity or []) - set(IDENTITY_CHECKS)):
            msg = (
                f"unknown identity {unknown}, "
                f"expected some of {sorted(IDENTITY_CHECKS)}"
            )
            raise PreconditionError(msg)
        names = identity or list(IDENTITY_CHECKS)
        settings = {"points": points, "seed": seed, "tolerance": tolerance}
        emitter = Emitter(
            "verify", source.description | {"identities": names} | settings
        )
        array = sample_points(chart, points, seed)
        for name in names:
            try:
                reports.append(IDENTITY_CHECKS[name](chart, array, tolerance))
            except PreconditionError as error:
                if identity:
                    raise
                skipped[name] = str(error)
        bounds = verify_pointwise_bounds(chart, array, tolerance)
        reports.append(verify_traceless_divergence(chart, array, tolerance))
    for name, reason in skipped.items():
        logger.warning(f"{name} skipped: {reason}")
    passed = all(report.passed for report in [*reports, *bounds])
    results = {
        "chart": chart.name,
        "identities": _dump(reports),
        "bounds": _dump(bounds),
        "skipped": skipped,
    }
    emitter.finish(results, passed=passed, pretty=pretty)


@app.command()
def inequality(
    dim: Annotated[
        int,
        typer.Option(
            help="Number of simplex coordinates.",
            min=SIMPLEX_MIN_DIMENSION,
            max=SIMPLEX_MAX_DIMENSION,
        ),
    ] = 6,
    depth: Annotated[
        int,
        typer.Option(
            help="Lattice spacing 1/depth of the exact search.",
            min=MINIMUM_GRID_DEPTH,
            max=200,
        ),
    ] = DEFAULT_GRID_DEPTH,
    pretty: PrettyOption = False,
) -> None:
    """Minimize the cubic simplex inequality exactly and list its equality cases."""
    logger.info("starting simplex inequality search")
    emitter = Emitter("inequality", {"dim": dim, "depth": depth})
    with input_errors():
        search = simplex_min_search(dim, depth)
        constants = dimension_constants(dim)
        critical = critical_points(dim)
    results = {
        "search": _dump(search),
        "constants": _dump(constants),
        "critical_points": _dump(critical),
        "equality_families": ["equal", "one-zero"],
    }
    passed = search.nonnegative and search.zeros_in_families
    emitter.finish(results, passed=passed, pretty=pretty)


def _factor_from_option(
    chart: MetricChart, source: str, convention: Convention
) -> ConformalFactor:
    names = [axis.name for axis in chart.axes]
    expr = parse_expr(source, names, list(chart.params))
    return ConformalFactor(
        expr=substitute_params(expr, chart.params), convention=convention
    )


@app.command()
def conformal(  # noqa: PLR0913
    spec: SpecOption = None,
    catalog: CatalogOption = None,
    dim: DimOption = 3,
    param: ParamOption = None,
    factor: Annotated[
        str | None,
        typer.Option(
            help="Conformal factor in the expression grammar.",
            show_default="the [conformal] table of the spec file",
        ),
    ] = None,
    convention: Annotated[
        str,
        typer.Option(help="One of exponential, scalar or paneitz."),
    ] = "exponential",
    points: PointsOption = DEFAULT_POINTS,
    seed: SeedOption = DEFAULT_SEED,
    resolution: ResolutionOption = DEFAULT_RESOLUTION,
    tolerance: ToleranceOption = DEFAULT_RELATIVE_TOLERANCE,
    pretty: PrettyOption = False,
) -> None:
    """Check the conformal change laws, Q covariance and the Schoen comparison."""
    logger.info("starting conformal checks")
    results: dict[str, Any] = {}
    with input_errors():
        if convention not in ("exponential", "scalar", "paneitz"):
            msg = (
                "--convention must be exponential, scalar or paneitz, "
                f"got {convention}"
            )
            raise PreconditionError(msg)
        source = resolve_source(
            spec, catalog, dim, param, closed=catalog in CLOSED_CHARTS
        )
        chart = require_chart(source)
        if factor is not None:
            chosen = _factor_from_option(
                chart, factor, cast("Convention", convention)
            )
        elif source.factor is not None:
            chosen = source.factor
        else:
            msg = "pass --factor or give the spec file a [conformal] table"
            raise PreconditionError(msg)
        emitter = Emitter(
            "conformal",
            source.description
            | {
                "factor": str(chosen.expr),
                "convention": chosen.convention,
                "points": points,
                "seed": seed,
                "resolution": resolution,
                "tolerance": tolerance,
            },
        )
        array = sample_points(chart, points, seed)
        hat = conformal_metric(chart, chosen)
        reports = [
            verify_conformal_laws(chart, chosen, array, tolerance),
            verify_traceless_divergence(hat, array, tolerance),
        ]
        if chosen.convention == "paneitz":
            reports.append(q_conformal_check(chart, chosen.bound(), array, tolerance))
        results["conformal_chart"] = hat.name
        results["identities"] = _dump(reports)
        passed = all(report.passed for report in reports)
        if chart.closed:
            try:
                schoen = schoen_check(chart, chosen.exponent(chart.dim), resolution)
            except PreconditionError as error:
                logger.warning(f"schoen comparison skipped: {error}")
                results["schoen_skipped"] = str(error)
            else:
                results["schoen"] = _dump(schoen)
                passed = passed and schoen.holds
    emitter.finish(results, passed=passed, pretty=pretty)


def _scalar_and_q(jets: CurvatureJets) -> dict[str, NDArray[np.float64]]:
    value = jets.algebra.value
    return {"scalar": value(jets.scalar_curvature), "q": value(jets.q)}


@app.command()
def yamabe(  # noqa: PLR0913
    dim: Annotated[
        int,
        typer.Option(help="Dimension of the cylinder S^1 x S^(n-1).", min=3, max=16),
    ] = 6,
    period: Annotated[
        float | None,
        typer.Option(
            help="Length T of the circle factor.",
            show_default="twice the bifurcation threshold 2 pi / sqrt(n - 2)",
        ),
    ] = None,
    grid: Annotated[
        int, typer.Option(help="Samples per period, must be even.", min=8, max=8192)
    ] = DEFAULT_YAMABE_GRID,
    points: PointsOption = DEFAULT_POINTS,
    seed: SeedOption = DEFAULT_SEED,
    pretty: PrettyOption = False,
) -> None:
    """Solve the periodic Yamabe equation on S^1 x S^(n-1) and evaluate R and Q."""
    logger.info("starting yamabe shooting")
    length = period if period is not None else 2 * yamabe_threshold(dim)
    emitter = Emitter(
        "yamabe",
        {"dim": dim, "period": length, "grid": grid, "points": points, "seed": seed},
    )
    with input_errors():
        solution = yamabe_ode_solve(dim, length, grid)
        chart = yamabe_metric(solution)
        values = sample_fields(
            chart,
            sample_points(chart, points, seed),
            _scalar_and_q,
            INVARIANTS_JET_ORDER,
            "evaluating the yamabe metric",
        )
    scalar, q = values["scalar"], values["q"]
    expected_scalar = float(dim * (dim - 1))
    deviation = float(np.max(np.abs(scalar - expected_scalar))) / expected_scalar
    q_spread = float(np.std(q)) / max(abs(float(np.mean(q))), DEFAULT_SCALE_FLOOR)
    threshold = yamabe_threshold(dim)
    bifurcated = length > threshold
    results = {
        "solution": _dump(solution),
        "threshold": threshold,
        "above_threshold": bifurcated,
        "scalar_curvature": scalar.tolist(),
        "expected_scalar": expected_scalar,
        "scalar_relative_deviation": deviation,
        "q": q.tolist(),
        "q_relative_spread": q_spread,
        "q_constant": q_spread <= YAMABE_Q_SPREAD,
    }
    passed = (
        solution.residual <= YAMABE_RESIDUAL_TOLERANCE
        and deviation <= YAMABE_SCALAR_TOLERANCE
    )
    if bifurcated and solution.constant:
        logger.warning(f"only the constant solution found above T={threshold:.6f}")
        passed = False
    elif bifurcated and q_spread <= YAMABE_Q_SPREAD:
        logger.warning("Q of the non-constant solution is constant")
        passed = False
    emitter.finish(results, passed=passed, pretty=pretty)


def _shape_rows(im: Immersion, array: NDArray[np.float64]) -> list[dict[str, Any]]:
    rows = []
    for point, sd in zip(array, shape_data(im, array), strict=True):
        rows.append(
            {
                "point": point.tolist(),
                "principal_curvatures": sd.principal_curvatures.tolist(),
                "mean_curvature": sd.mean_curvature,
                "lambda": _dump(lambda_quantities(sd)),
                "pinching": _dump(pinching_check(sd)),
            }
        )
    return rows


@app.command()
def hypersurface(  # noqa: PLR0913
    spec: SpecOption = None,
    catalog: CatalogOption = None,
    dim: DimOption = 3,
    param: ParamOption = None,
    points: PointsOption = DEFAULT_POINTS,
    seed: SeedOption = DEFAULT_SEED,
    tolerance: ToleranceOption = DEFAULT_RELATIVE_TOLERANCE,
    pretty: PrettyOption = False,
) -> None:
    """Check the Gauss equations and the principal curvature quantities."""
    logger.info("starting hypersurface checks")
    with input_errors():
        source = resolve_source(spec, catalog, dim, param)
        if source.immersion is None:
            msg = "hypersurface needs an immersion, not a manifold"
            raise ChartError(msg)
        im = source.immersion
        settings = {"points": points, "seed": seed, "tolerance": tolerance}
        emitter = Emitter("hypersurface", source.description | settings)
        array = create_faker(seed).interior_points(im.axes, points)
        reports = [check_immersion(im, array), gauss_residuals(im, array, tolerance)]
        results: dict[str, Any] = {
            "immersion": im.name,
            "identities": _dump(reports),
            "shapes": _shape_rows(im, array),
        }
        if source.catalog == "clifford_in_sn1" and im.dim >= 4:  # noqa: PLR2004
            results["isoparametric"] = _dump(
                [isoparametric_clifford_data(im.dim, m) for m in range(2, im.dim - 1)]
            )
    emitter.finish(
        results, passed=all(report.passed for report in reports), pretty=pretty
    )


@app.command("rigidity-report")
def rigidity(  # noqa: PLR0913
    spec: SpecOption = None,
    catalog: CatalogOption = None,
    dim: DimOption = 6,
    param: ParamOption = None,
    resolution: ResolutionOption = DEFAULT_RESOLUTION,
    tolerance: ToleranceOption = DEFAULT_RELATIVE_TOLERANCE,
    pretty: PrettyOption = False,
) -> None:
    """Integrate the rigidity quantities over a closed chart and report the verdict."""
    logger.info("starting rigidity report")
    with input_errors():
        source = resolve_source(
            spec, catalog, dim, param, closed=catalog in CLOSED_CHARTS
        )
        chart = require_chart(source)
        emitter = Emitter(
            "rigidity-report",
            source.description | {"resolution": resolution, "tolerance": tolerance},
        )
        report = rigidity_report(build_grid(chart, resolution), tolerance)
    passed = (
        report.converged
        and report.parts_identity.passed
        and all(slack.passed for slack in report.slacks)
        and (report.signature_satisfied or not report.hypotheses_met)
    )
    emitter.finish({"rigidity": _dump(report)}, passed=passed, pretty=pretty)


@app.command("catalog")
def list_catalog(
    dim: Annotated[
        int, typer.Option(help="Dimension of the expected invariants.", min=2, max=16)
    ] = 6,
    pretty: PrettyOption = False,
) -> None:
    """List built-in metrics and immersions with parameters and expected values."""
    logger.info("starting catalog listing")
    emitter = Emitter("catalog", {"dim": dim})
    entries = []
    for name in catalog_names():
        row = name.model_dump(mode="json")
        if name.kind == "metric":
            try:
                entry = builtin_metric(name.name, dim)
            except (ChartError, PreconditionError) as error:
                row["unavailable"] = str(error)
            else:
                row["expected"] = _dump(entry.expected) if entry.expected else None
                row["provenance"] = entry.provenance
        entries.append(row)
    emitter.finish({"entries": entries}, passed=True, pretty=pretty)


def main() -> None:  # pragma: no cover
    """Wrap entrypoint in typer."""
    app()
