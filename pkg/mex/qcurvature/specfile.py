"""TOML spec files describing a metric chart or an immersion.

A manifold spec names its coordinates with either a ``period`` or a ``range``
and lists the metric as upper-triangular rows of expression strings::

    format_version = 1
    name = "perturbed-torus"
    params = { a = 0.05 }
    metric = [["exp(2*a*sin(x))", "0"], ["exp(2*a*sin(x))"]]

    [[coords]]
    name = "x"
    period = [0.0, 6.283185307179586]

    [[coords]]
    name = "y"
    period = [0.0, 6.283185307179586]

An optional ``[conformal]`` table holds ``f`` or ``u`` with a ``convention``.
An immersion spec has ``kind = "immersion"``, an ``ambient_curvature`` and the
``position`` and ``normal`` components instead of the metric.
"""

import hashlib
import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from mex.qcurvature.catalog import (
    IMMERSION_PARAMETERS,
    builtin_immersion,
    builtin_metric,
)
from mex.qcurvature.constants import SPEC_FORMAT_VERSION
from mex.qcurvature.conformal import ConformalFactor
from mex.qcurvature.exceptions import ChartError, ExprError
from mex.qcurvature.expr import Expr, parse_expr, substitute_params
from mex.qcurvature.geometry import ChartBlock, CoordinateAxis, MetricChart
from mex.qcurvature.hypersurface import Immersion
from mex.qcurvature.types import Convention


class SpecModel(BaseModel):
    """Base for spec tables, rejecting unknown keys."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class CoordinateSpec(SpecModel):
    """One coordinate with a periodic or bounded range."""

    name: str = Field(pattern=r"^[A-Za-z_][A-Za-z0-9_]*$")
    period: tuple[float, float] | None = None
    range: tuple[float, float] | None = None
    polar: bool = False

    @model_validator(mode="after")
    def check_one_range(self) -> "CoordinateSpec":
        """Require exactly one of period and range, and polar only with a range."""
        if (self.period is None) == (self.range is None):
            msg = f"coordinate '{self.name}' needs exactly one of period and range"
            raise ValueError(msg)
        if self.polar and self.range is None:
            msg = f"polar coordinate '{self.name}' needs a range"
            raise ValueError(msg)
        return self

    def to_axis(self) -> CoordinateAxis:
        """Return the chart axis."""
        lower, upper = self.period or self.range or (0.0, 0.0)
        return CoordinateAxis(
            name=self.name,
            lower=lower,
            upper=upper,
            periodic=self.period is not None,
            polar=self.polar,
        )


class BlockSpec(SpecModel):
    """Coordinates of one product factor."""

    coords: list[str] = Field(min_length=1)
    homogeneous: bool = False


class ConformalSpec(SpecModel):
    """Conformal factor given as an exponent f or a positive function u."""

    f: str | None = None
    u: str | None = None
    convention: Convention | None = None

    @model_validator(mode="after")
    def check_factor(self) -> "ConformalSpec":
        """Require f with the exponential convention or u with another one."""
        if (self.f is None) == (self.u is None):
            msg = "conformal table needs exactly one of f and u"
            raise ValueError(msg)
        if self.f is not None and self.convention not in (None, "exponential"):
            msg = "f is an exponent and only takes the exponential convention"
            raise ValueError(msg)
        if self.u is not None and self.convention in (None, "exponential"):
            msg = "u needs the scalar or paneitz convention"
            raise ValueError(msg)
        return self


class ManifoldSpec(SpecModel):
    """Metric chart spec."""

    format_version: Literal[1]
    kind: Literal["manifold"] = "manifold"
    name: str
    dim: int | None = Field(default=None, ge=2)
    params: dict[str, float] = {}
    coords: list[CoordinateSpec] = Field(min_length=2)
    metric: list[list[str]]
    blocks: list[BlockSpec] = []
    conformal: ConformalSpec | None = None

    @model_validator(mode="after")
    def check_shape(self) -> "ManifoldSpec":
        """Require dim to match and the metric rows to form an upper triangle."""
        n = len(self.coords)
        if self.dim is not None and self.dim != n:
            msg = f"dim is {self.dim} but {n} coords are given"
            raise ValueError(msg)
        lengths = [len(row) for row in self.metric]
        if lengths != list(range(n, 0, -1)):
            expected = list(range(n, 0, -1))
            msg = f"metric rows must have lengths {expected}, got {lengths}"
            raise ValueError(msg)
        return self


class ImmersionSpec(SpecModel):
    """Immersion spec."""

    format_version: Literal[1]
    kind: Literal["immersion"]
    name: str
    ambient_curvature: Literal[-1, 0, 1]
    params: dict[str, float] = {}
    coords: list[CoordinateSpec] = Field(min_length=2)
    position: list[str]
    normal: list[str]


def _parse(
    source: str, field: str, names: list[str], params: dict[str, float]
) -> Expr:
    try:
        return parse_expr(source, names, list(params))
    except ExprError as error:
        msg = f"{field}: {error}"
        raise ChartError(msg) from error


def build_chart(spec: ManifoldSpec) -> MetricChart:
    """Turn a manifold spec into a chart."""
    names = [coord.name for coord in spec.coords]
    n = len(names)
    rows: list[list[Expr | None]] = [[None] * n for _ in range(n)]
    for i, row in enumerate(spec.metric):
        for offset, source in enumerate(row):
            j = i + offset
            entry = _parse(source, f"metric[{i}][{offset}]", names, spec.params)
            rows[i][j] = rows[j][i] = entry
    blocks = []
    for index, block in enumerate(spec.blocks):
        if unknown := sorted(set(block.coords) - set(names)):
            msg = f"blocks[{index}]: unknown coords {unknown}"
            raise ChartError(msg)
        axes = tuple(sorted(names.index(name) for name in block.coords))
        blocks.append(ChartBlock(axes=axes, homogeneous=block.homogeneous))
    try:
        return MetricChart(
            name=spec.name,
            axes=tuple(coord.to_axis() for coord in spec.coords),
            metric=tuple(
                tuple(entry for entry in row if entry is not None) for row in rows
            ),
            params=spec.params,
            blocks=tuple(blocks),
        )
    except ValidationError as error:
        msg = f"metric of '{spec.name}' is invalid: {error}"
        raise ChartError(msg) from error


def build_factor(spec: ManifoldSpec) -> ConformalFactor | None:
    """Return the conformal factor of a manifold spec, if it has one."""
    if spec.conformal is None:
        return None
    names = [coord.name for coord in spec.coords]
    source = spec.conformal.f if spec.conformal.f is not None else spec.conformal.u
    expr = _parse(source or "", "conformal", names, spec.params)
    return ConformalFactor(
        expr=substitute_params(expr, spec.params),
        convention=spec.conformal.convention or "exponential",
    )


def build_immersion(spec: ImmersionSpec) -> Immersion:
    """Turn an immersion spec into an immersion with parameters substituted."""
    names = [coord.name for coord in spec.coords]

    def component(field: str, index: int, source: str) -> Expr:
        parsed = _parse(source, f"{field}[{index}]", names, spec.params)
        return substitute_params(parsed, spec.params)

    try:
        return Immersion(
            name=spec.name,
            ambient_curvature=spec.ambient_curvature,
            axes=tuple(coord.to_axis() for coord in spec.coords),
            position=tuple(
                component("position", k, s) for k, s in enumerate(spec.position)
            ),
            normal=tuple(
                component("normal", k, s) for k, s in enumerate(spec.normal)
            ),
        )
    except ValidationError as error:
        msg = f"immersion '{spec.name}' is invalid: {error}"
        raise ChartError(msg) from error


def load_document(path: Path) -> tuple[dict[str, Any], str]:
    """Read a TOML document and return it with the SHA-256 digest of its bytes."""
    raw = path.read_bytes()
    try:
        document = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as error:
        msg = f"cannot parse spec file '{path}': {error}"
        raise ChartError(msg) from error
    return document, hashlib.sha256(raw).hexdigest()


def parse_spec(document: dict[str, Any]) -> ManifoldSpec | ImmersionSpec:
    """Validate a spec document of either kind."""
    version = document.get("format_version")
    if version != SPEC_FORMAT_VERSION:
        msg = f"format_version must be {SPEC_FORMAT_VERSION}, got {version!r}"
        raise ChartError(msg)
    model: type[ManifoldSpec | ImmersionSpec] = (
        ImmersionSpec if document.get("kind") == "immersion" else ManifoldSpec
    )
    try:
        return model.model_validate(document)
    except ValidationError as error:
        fields = ", ".join(
            ".".join(str(part) for part in detail["loc"]) or "<root>"
            for detail in error.errors()
        )
        msg = f"invalid spec fields {fields}: {error}"
        raise ChartError(msg) from error


def parse_params(pairs: list[str] | None) -> dict[str, float]:
    """Parse repeated key=value options into floats."""
    params = {}
    for pair in pairs or []:
        key, separator, raw = pair.partition("=")
        if not separator or not key.strip():
            msg = f"--param expects key=value, got '{pair}'"
            raise ChartError(msg)
        try:
            params[key.strip()] = float(raw)
        except ValueError as error:
            msg = f"--param {key.strip()} needs a number, got '{raw}'"
            raise ChartError(msg) from error
    return params


class Source(BaseModel):
    """A resolved command input together with its canonical description."""

    description: dict[str, Any]
    chart: MetricChart | None = None
    factor: ConformalFactor | None = None
    immersion: Immersion | None = None
    catalog: str | None = None
    dim: int


def resolve_source(
    spec: Path | None,
    catalog: str | None,
    dim: int,
    params: list[str] | None,
    *,
    closed: bool = False,
) -> Source:
    """Load a spec file or build a catalog entry, never both."""
    if (spec is None) == (catalog is None):
        msg = "pass exactly one of --spec and --catalog"
        raise ChartError(msg)
    if spec is not None:
        document, digest = load_document(spec)
        parsed = parse_spec(document)
        description = {"spec": str(spec.name), "sha256": digest}
        if isinstance(parsed, ImmersionSpec):
            immersion = build_immersion(parsed)
            return Source(
                description=description, immersion=immersion, dim=immersion.dim
            )
        chart = build_chart(parsed)
        return Source(
            description=description,
            chart=chart,
            factor=build_factor(parsed),
            dim=chart.dim,
        )
    name = str(catalog)
    values = parse_params(params)
    description = {"catalog": name, "dim": dim, "params": values, "closed": closed}
    if name in IMMERSION_PARAMETERS:
        return Source(
            description=description,
            immersion=builtin_immersion(name, dim, values),
            catalog=name,
            dim=dim,
        )
    entry = builtin_metric(name, dim, values, closed=closed)
    return Source(description=description, chart=entry.chart, catalog=name, dim=dim)


def require_chart(source: Source) -> MetricChart:
    """Return the metric chart of a source or reject an immersion."""
    if source.chart is None:
        msg = "this subcommand needs a manifold, not an immersion"
        raise ChartError(msg)
    return source.chart
