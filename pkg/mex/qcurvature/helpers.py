import json
from collections.abc import Sequence
from typing import Any

import numpy as np
import typer
from faker import Faker
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel
from rich.console import Console

from mex.common.transform import MExEncoder
from mex.qcurvature.constants import (
    DEFAULT_ABSOLUTE_TOLERANCE,
    DEFAULT_POINTS,
    DEFAULT_RELATIVE_TOLERANCE,
    DEFAULT_SCALE_FLOOR,
    DEFAULT_SEED,
)
from mex.qcurvature.geometry import MetricChart
from mex.qcurvature.models import IdentityReport, InequalityReport
from mex.qcurvature.provider import GeometryProvider


def create_faker(seed: int = DEFAULT_SEED) -> Faker:
    """Create a faker instance with its own seeded random state."""
    faker = Faker()
    faker.seed_instance(seed)
    for factory in faker.factories:
        factory.add_provider(GeometryProvider(factory))
    return faker


def sample_points(
    chart: MetricChart, count: int = DEFAULT_POINTS, seed: int = DEFAULT_SEED
) -> NDArray[np.float64]:
    """Draw reproducible points from the central part of a chart."""
    return create_faker(seed).interior_points(chart.axes, count)


def _per_point(values: ArrayLike, count: int) -> NDArray[np.float64]:
    return np.abs(np.asarray(values, dtype=np.float64).reshape(count, -1))


def residual_report(
    identity: str,
    lhs: ArrayLike,
    terms: Sequence[ArrayLike],
    tolerance: float = DEFAULT_RELATIVE_TOLERANCE,
) -> IdentityReport:
    """Compare lhs with the sum of terms point by point.

    The scale at a point is the largest entry among lhs and all terms. Points with
    a scale below the floor must match to the absolute tolerance instead.
    """
    left = np.asarray(lhs, dtype=np.float64)
    count = left.shape[0]
    parts = [np.asarray(term, dtype=np.float64) for term in terms]
    right = sum(parts, np.zeros_like(left))
    residual = np.max(_per_point(left - right, count), axis=1, initial=0.0)
    scale = np.max(
        [
            np.max(_per_point(part, count), axis=1, initial=0.0)
            for part in (left, *terms)
        ],
        axis=0,
    )
    tiny = scale < DEFAULT_SCALE_FLOOR
    relative = np.where(
        tiny,
        np.where(
            residual <= DEFAULT_ABSOLUTE_TOLERANCE, 0.0, residual / DEFAULT_SCALE_FLOOR
        ),
        residual / np.where(tiny, 1.0, scale),
    )
    worst = float(np.max(relative, initial=0.0))
    return IdentityReport(
        identity=identity,
        points=count,
        max_abs_residual=float(np.max(residual, initial=0.0)),
        max_rel_residual=worst,
        scale=float(np.max(scale, initial=0.0)),
        tolerance=tolerance,
        passed=worst <= tolerance,
    )


def slack_report(
    inequality: str,
    slack: ArrayLike,
    scale: ArrayLike,
    applicable: ArrayLike | None = None,
    tolerance: float = DEFAULT_RELATIVE_TOLERANCE,
) -> InequalityReport:
    """Summarize the slack of an inequality that should be nonnegative."""
    values = np.asarray(slack, dtype=np.float64).reshape(-1)
    scales = np.broadcast_to(np.asarray(scale, dtype=np.float64), values.shape)
    mask = (
        np.ones(values.shape, dtype=bool)
        if applicable is None
        else np.asarray(applicable, dtype=bool).reshape(-1)
    )
    allowed = DEFAULT_ABSOLUTE_TOLERANCE + tolerance * scales
    return InequalityReport(
        inequality=inequality,
        points=len(values),
        applicable=int(mask.sum()),
        min_slack=float(values[mask].min()) if mask.any() else None,
        scale=float(scales[mask].max()) if mask.any() else 0.0,
        tolerance=tolerance,
        passed=bool(np.all(values[mask] >= -allowed[mask])),
    )


def to_json(report: BaseModel | dict[str, Any], *, pretty: bool = False) -> str:
    """Serialize a report with sorted keys, compact unless pretty.

    Floats keep their shortest repr, which parses back to the same double.
    """
    data = report.model_dump(mode="json") if isinstance(report, BaseModel) else report
    if pretty:
        return json.dumps(data, indent=2, sort_keys=True, cls=MExEncoder)
    return json.dumps(data, separators=(",", ":"), sort_keys=True, cls=MExEncoder)


def print_json(text: str, *, pretty: bool = False) -> None:
    """Write a JSON document to standard output."""
    if pretty:
        Console(soft_wrap=True).print_json(text, sort_keys=True)
    else:
        typer.echo(text)
