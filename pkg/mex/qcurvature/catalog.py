"""Model spaces and immersions with exactly known curvature."""

from collections.abc import Mapping, Sequence
from math import cosh, isclose, pi, sinh, sqrt
from typing import Any

from pydantic import BaseModel, ConfigDict

from mex.qcurvature.constants import (
    DEFAULT_CIRCLE_LENGTH,
    EUCLIDEAN_HALF_WIDTH,
    POINCARE_BALL_FILL,
    RANDOM_LCF_MAX_AMPLITUDE,
    RANDOM_LCF_MODES,
    STEREOGRAPHIC_HALF_WIDTH,
)
from mex.qcurvature.exceptions import ChartError, PreconditionError
from mex.qcurvature.expr import (
    ONE,
    ZERO,
    Coord,
    Expr,
    coerce,
    cos,
    exp,
    mul,
    power,
    sin,
)
from mex.qcurvature.geometry import (
    ChartBlock,
    CoordinateAxis,
    MetricChart,
    q_coefficients,
)
from mex.qcurvature.helpers import create_faker
from mex.qcurvature.hypersurface import Immersion
from mex.qcurvature.types import ImmersionName, MetricName

EINSTEIN_TOLERANCE = 1e-10

METRIC_PARAMETERS: dict[str, dict[str, float]] = {
    "euclidean": {},
    "sphere": {"r": 1.0},
    "hyperbolic": {"r": 1.0},
    "cylinder": {"r": 1.0, "T": DEFAULT_CIRCLE_LENGTH},
    "flat_torus": {"L": 2 * pi},
    "product_spheres": {"k": 2.0, "r1": 1.0, "r2": 1.0},
    "circle_times_sphere": {"r": 1.0, "T": DEFAULT_CIRCLE_LENGTH},
}
IMMERSION_PARAMETERS: dict[str, dict[str, float]] = {
    "round_sphere_in_rn1": {"r": 1.0},
    "clifford_in_sn1": {"m": 1.0},
    "geodesic_sphere_in_hn1": {"rho": 1.0},
}
CLOSED_CHARTS = frozenset(
    {"sphere", "cylinder", "flat_torus", "product_spheres", "circle_times_sphere"}
)


class ExpectedInvariants(BaseModel):
    """Exact curvature values of a homogeneous model space."""

    scalar: float
    q: float | None = None
    ricci_norm2: float
    ricci_eigenvalues: list[float]
    weyl_zero: bool
    einstein: bool


class CatalogEntry(BaseModel):
    """Model chart with its known invariants and where they come from."""

    model_config = ConfigDict(frozen=True)

    chart: MetricChart
    expected: ExpectedInvariants | None = None
    provenance: dict[str, str] = {}


class CatalogName(BaseModel):
    """Built-in name with its parameter defaults."""

    name: str
    kind: str
    params: dict[str, float]
    closed: bool


def catalog_names() -> list[CatalogName]:
    """List every built-in metric and immersion."""
    metrics = [
        CatalogName(
            name=name, kind="metric", params=params, closed=name in CLOSED_CHARTS
        )
        for name, params in METRIC_PARAMETERS.items()
    ]
    immersions = [
        CatalogName(name=name, kind="immersion", params=params, closed=True)
        for name, params in IMMERSION_PARAMETERS.items()
    ]
    return metrics + immersions


def _resolve(
    name: str,
    known: Mapping[str, Mapping[str, float]],
    params: Mapping[str, Any] | None,
) -> dict[str, float]:
    if name not in known:
        msg = f"unknown catalog name '{name}', expected one of {sorted(known)}"
        raise ChartError(msg)
    values = dict(known[name])
    for key, value in (params or {}).items():
        if key not in values:
            msg = f"'{name}' has no parameter '{key}', expected one of {sorted(values)}"
            raise ChartError(msg)
        values[key] = float(value)
    for key, value in values.items():
        if key not in ("k", "m") and value <= 0:
            msg = f"parameter '{key}' of '{name}' must be positive, got {value}"
            raise ChartError(msg)
    return values


def _split(value: float, key: str, low: int, high: int) -> int:
    if not value.is_integer() or not low <= value <= high:
        msg = f"parameter '{key}' must be an integer in [{low}, {high}], got {value}"
        raise ChartError(msg)
    return int(value)


def _diagonal(entries: Sequence[Expr]) -> tuple[tuple[Expr, ...], ...]:
    n = len(entries)
    return tuple(
        tuple(entries[i] if i == j else ZERO for j in range(n)) for i in range(n)
    )


def _coords(names: Sequence[str], first: int) -> list[Coord]:
    return [Coord(first + offset, name) for offset, name in enumerate(names)]


def sphere_angles(
    m: int, first: int, prefix: str = ""
) -> tuple[list[CoordinateAxis], list[Expr], list[Expr]]:
    """Return angle axes, the unit position vector and the unit round metric of S^m.

    The polar angles come first and the periodic azimuth last; coordinate indices
    start at ``first``.
    """
    names = [f"{prefix}theta{k}" for k in range(1, m)] + [f"{prefix}phi"]
    axes = [
        CoordinateAxis(name=name, lower=0.0, upper=pi, polar=True)
        for name in names[:-1]
    ]
    axes.append(CoordinateAxis(name=names[-1], lower=0.0, upper=2 * pi, periodic=True))
    angles = _coords(names, first)
    omega: list[Expr] = []
    metric: list[Expr] = []
    running: Expr = ONE
    for theta in angles[:-1]:
        omega.append(mul(running, cos(theta)))
        metric.append(power(running, 2))
        running = mul(running, sin(theta))
    omega.extend([mul(running, cos(angles[-1])), mul(running, sin(angles[-1]))])
    metric.append(power(running, 2))
    return axes, omega, metric


def _stereographic(
    m: int, first: int, radius: float, sign: int, half_width: float, prefix: str = "x"
) -> tuple[list[CoordinateAxis], list[Expr]]:
    names = [f"{prefix}{first + k + 1}" for k in range(m)]
    axes = [
        CoordinateAxis(name=name, lower=-half_width, upper=half_width) for name in names
    ]
    squared = ZERO
    for coord in _coords(names, first):
        squared = squared + power(coord, 2)
    factor = coerce(4 * radius**2) / power(ONE + sign * squared, 2)
    return axes, [factor] * m


def _round_factor(
    m: int, first: int, radius: float, *, closed: bool, prefix: str
) -> tuple[list[CoordinateAxis], list[Expr]]:
    if closed or m == 1:
        axes, _, metric = sphere_angles(m, first, prefix)
        return axes, [coerce(radius**2) * entry for entry in metric]
    return _stereographic(m, first, radius, 1, STEREOGRAPHIC_HALF_WIDTH, prefix or "x")


def _expected(
    n: int, eigenvalues: Sequence[float], *, weyl_zero: bool
) -> ExpectedInvariants:
    scalar = sum(eigenvalues)
    norm2 = sum(x * x for x in eigenvalues)
    q = None
    if n >= 3:  # noqa: PLR2004
        _, b, c = (float(x) for x in q_coefficients(n))
        q = -b * norm2 + c * (scalar * scalar)
    return ExpectedInvariants(
        scalar=scalar,
        q=q,
        ricci_norm2=norm2,
        ricci_eigenvalues=sorted(eigenvalues),
        weyl_zero=weyl_zero,
        einstein=is_einstein(eigenvalues),
    )


def _require_dim(name: str, n: int, minimum: int) -> None:
    if n < minimum:
        msg = f"'{name}' needs dimension at least {minimum}, got {n}"
        raise ChartError(msg)


def builtin_metric(  # noqa: C901, PLR0915
    name: MetricName | str,
    n: int,
    params: Mapping[str, Any] | None = None,
    *,
    closed: bool = False,
) -> CatalogEntry:
    """Build a model chart and its exact invariants.

    With ``closed`` the chart uses angle coordinates that cover a compact manifold
    up to measure zero, as needed for quadrature.
    """
    values = _resolve(name, METRIC_PARAMETERS, params)
    _require_dim(name, n, 2)
    if closed and name not in CLOSED_CHARTS:
        msg = f"'{name}' has no closed chart"
        raise ChartError(msg)
    provenance: dict[str, str] = {}
    blocks: list[ChartBlock] = []
    match name:
        case "euclidean":
            width = EUCLIDEAN_HALF_WIDTH
            axes = [
                CoordinateAxis(name=f"x{k + 1}", lower=-width, upper=width)
                for k in range(n)
            ]
            entries = [ONE] * n
            expected = _expected(n, [0.0] * n, weyl_zero=True)
            provenance["scalar"] = "flat metric"
        case "sphere":
            r = values["r"]
            axes, entries = _round_factor(
                n, 0, r, closed=closed, prefix="" if closed else "x"
            )
            blocks = [ChartBlock(axes=tuple(range(n)), homogeneous=True)]
            expected = _expected(n, [(n - 1) / r**2] * n, weyl_zero=True)
            provenance["scalar"] = "n(n-1)/r^2 for the round sphere of radius r"
            provenance["q"] = "n(n^2-4)/(8 r^4), Q of an Einstein metric"
        case "hyperbolic":
            r = values["r"]
            half_width = POINCARE_BALL_FILL / sqrt(n)
            axes, entries = _stereographic(n, 0, r, -1, half_width)
            expected = _expected(n, [-(n - 1) / r**2] * n, weyl_zero=True)
            provenance["scalar"] = (
                "-n(n-1)/r^2 for the Poincare ball of curvature -1/r^2"
            )
        case "cylinder" | "circle_times_sphere":
            _require_dim(name, n, 3)
            r, length = values["r"], values["T"]
            t = CoordinateAxis(name="t", lower=0.0, upper=length, periodic=True)
            sphere_axes, sphere_entries = _round_factor(
                n - 1, 1, r, closed=closed, prefix="" if closed else "x"
            )
            axes, entries = [t, *sphere_axes], [ONE, *sphere_entries]
            blocks = [
                ChartBlock(axes=(0,), homogeneous=True),
                ChartBlock(axes=tuple(range(1, n)), homogeneous=True),
            ]
            expected = _expected(n, [0.0] + [(n - 2) / r**2] * (n - 1), weyl_zero=True)
            provenance["scalar"] = "(n-1)(n-2)/r^2 from the sphere factor"
            provenance["q"] = "(n^3-4n^2)/8 at r = 1"
        case "flat_torus":
            length = values["L"]
            axes = [
                CoordinateAxis(name=f"x{k + 1}", lower=0.0, upper=length, periodic=True)
                for k in range(n)
            ]
            entries = [ONE] * n
            blocks = [ChartBlock(axes=tuple(range(n)), homogeneous=True)]
            expected = _expected(n, [0.0] * n, weyl_zero=True)
            provenance["scalar"] = "flat metric"
        case "product_spheres":
            k = _split(values["k"], "k", 1, n - 1)
            r1, r2 = values["r1"], values["r2"]
            first_axes, first_entries = _round_factor(
                k, 0, r1, closed=closed, prefix="u"
            )
            second_axes, second_entries = _round_factor(
                n - k, k, r2, closed=closed, prefix="v"
            )
            axes = [*first_axes, *second_axes]
            entries = [*first_entries, *second_entries]
            blocks = [
                ChartBlock(axes=tuple(range(k)), homogeneous=True),
                ChartBlock(axes=tuple(range(k, n)), homogeneous=True),
            ]
            spectrum = [(k - 1) / r1**2] * k + [(n - k - 1) / r2**2] * (n - k)
            expected = _expected(n, spectrum, weyl_zero=k == 1 or n - k == 1)
            provenance["ricci_eigenvalues"] = "(k-1)/r^2 on each round factor S^k(r)"
        case _:  # pragma: no cover
            msg = f"unknown catalog name '{name}'"
            raise ChartError(msg)
    chart = MetricChart(
        name=f"{name}{'-closed' if closed else ''}(n={n})",
        axes=tuple(axes),
        metric=_diagonal(entries),
        blocks=tuple(blocks),
    )
    return CatalogEntry(chart=chart, expected=expected, provenance=provenance)


def random_lcf_metric(n: int, seed: int, amplitude: float) -> MetricChart:
    """Return e^{2f} times the flat metric on a torus for a random trigonometric f.

    f mixes the first modes along every axis with couplings sin(x_i + x_{i+1}), all
    coefficients bounded by the amplitude.
    """
    if n < 3:  # noqa: PLR2004
        msg = f"random conformally flat metrics need dimension at least 3, got {n}"
        raise PreconditionError(msg)
    if not 0 <= amplitude <= RANDOM_LCF_MAX_AMPLITUDE:
        msg = f"amplitude must lie in [0, {RANDOM_LCF_MAX_AMPLITUDE}], got {amplitude}"
        raise PreconditionError(msg)
    faker = create_faker(seed)
    names = [f"x{k + 1}" for k in range(n)]
    coords = _coords(names, 0)
    count = 2 * len(RANDOM_LCF_MODES) * n + n - 1
    coefficients = iter(faker.lcf_coefficients(count, amplitude))
    f: Expr = ZERO
    for coord in coords:
        for mode in RANDOM_LCF_MODES:
            f = f + next(coefficients) * sin(mode * coord)
            f = f + next(coefficients) * cos(mode * coord)
    for left, right in zip(coords, coords[1:], strict=False):
        f = f + next(coefficients) * sin(left + right)
    factor = exp(2 * f)
    axes = [
        CoordinateAxis(name=name, lower=0.0, upper=2 * pi, periodic=True)
        for name in names
    ]
    return MetricChart(
        name=f"random_lcf(n={n}, seed={seed}, amplitude={amplitude})",
        axes=tuple(axes),
        metric=_diagonal([factor] * n),
    )


def builtin_immersion(
    name: ImmersionName | str, n: int, params: Mapping[str, Any] | None = None
) -> Immersion:
    """Build one of the model hypersurfaces in a space form."""
    values = _resolve(name, IMMERSION_PARAMETERS, params)
    _require_dim(name, n, 2)
    match name:
        case "round_sphere_in_rn1":
            r = values["r"]
            axes, omega, _ = sphere_angles(n, 0)
            position = [coerce(r) * entry for entry in omega]
            normal = [-entry for entry in omega]
            curvature = 0
        case "clifford_in_sn1":
            m = _split(values["m"], "m", 1, n - 1)
            r, s = sqrt(m / n), sqrt((n - m) / n)
            first_axes, first, _ = sphere_angles(m, 0, "u")
            second_axes, second, _ = sphere_angles(n - m, m, "v")
            axes = [*first_axes, *second_axes]
            position = [coerce(r) * e for e in first] + [coerce(s) * e for e in second]
            normal = [coerce(-s) * e for e in first] + [coerce(r) * e for e in second]
            curvature = 1
        case "geodesic_sphere_in_hn1":
            rho = values["rho"]
            axes, omega, _ = sphere_angles(n, 0)
            position = [coerce(cosh(rho))] + [coerce(sinh(rho)) * e for e in omega]
            normal = [coerce(-sinh(rho))] + [coerce(-cosh(rho)) * e for e in omega]
            curvature = -1
        case _:  # pragma: no cover
            msg = f"unknown immersion '{name}'"
            raise ChartError(msg)
    return Immersion(
        name=f"{name}(n={n})",
        ambient_curvature=curvature,
        axes=tuple(axes),
        position=tuple(position),
        normal=tuple(normal),
    )


def is_einstein(eigenvalues: Sequence[float]) -> bool:
    """Tell whether a Ricci spectrum is constant up to the catalog tolerance."""
    top = max(abs(x) for x in eigenvalues)
    tolerance = EINSTEIN_TOLERANCE * max(1.0, top)
    return isclose(max(eigenvalues), min(eigenvalues), abs_tol=tolerance)
