"""The cubic simplex inequality n sum x^3 + 1/(n-1) >= (2n-1)/(n-1) sum x^2.

Its left side minus its right side is ``f_n``. On the probability simplex it is
nonnegative and vanishes exactly at the barycenter and at the barycenters of
the facets, which makes the curvature term I nonnegative for nonnegative Ricci.
"""

from collections.abc import Generator, Sequence
from fractions import Fraction
from typing import Literal

from pydantic import BaseModel, Field, model_validator

from mex.common.logging import logger
from mex.qcurvature.constants import (
    DEFAULT_GRID_DEPTH,
    MINIMUM_GRID_DEPTH,
    SIMPLEX_MAX_DIMENSION,
    SIMPLEX_MIN_DIMENSION,
    SIMPLEX_STEP_FLOOR,
)
from mex.qcurvature.exceptions import PreconditionError
from mex.qcurvature.geometry import q_coefficients
from mex.qcurvature.types import CriticalClass, ExactRational

SIMPLEX_SUM_TOLERANCE = Fraction(1, 10**12)

Family = Literal["equal", "one-zero"]


class SimplexPoint(BaseModel):
    """A point of the probability simplex with exact coordinates."""

    n: int = Field(ge=SIMPLEX_MIN_DIMENSION)
    x: tuple[ExactRational, ...]

    @model_validator(mode="after")
    def check_simplex(self) -> "SimplexPoint":
        """Require n nonnegative coordinates summing to one."""
        if len(self.x) != self.n:
            msg = f"expected {self.n} coordinates, got {len(self.x)}"
            raise ValueError(msg)
        if any(value < 0 for value in self.x):
            msg = "simplex coordinates must be nonnegative"
            raise ValueError(msg)
        if abs(sum(self.x) - 1) > SIMPLEX_SUM_TOLERANCE:
            msg = f"simplex coordinates sum to {float(sum(self.x))}, not 1"
            raise ValueError(msg)
        return self


class DimensionConstants(BaseModel):
    """Exact constants of the Q-curvature rigidity argument in dimension n."""

    n: int
    a: ExactRational
    b: ExactRational
    c: ExactRational
    d: ExactRational
    l: ExactRational  # noqa: E741
    beta: ExactRational
    gradient_coefficient: ExactRational
    l_matches_combination: bool
    l_positive: bool
    gradient_coefficient_negative: bool


class CriticalPointData(BaseModel):
    """An interior critical point of f_n with m coordinates equal to alpha."""

    m: int
    alpha: ExactRational
    point: tuple[ExactRational, ...]
    value: ExactRational
    classification: CriticalClass


class SimplexSearch(BaseModel):
    """Exact lattice minimum of f_n and its float refinement."""

    n: int
    depth: int
    lattice_points: int
    lattice_min: ExactRational
    lattice_argmin: SimplexPoint
    zero_points: list[tuple[ExactRational, ...]]
    zeros_in_families: bool
    refined_point: list[float]
    refined_value: float
    refined_family: Family | None
    nonnegative: bool


def dimension_constants(n: int) -> DimensionConstants:
    """Return the exact Q-curvature and pinching constants of dimension n."""
    if n < SIMPLEX_MIN_DIMENSION:
        msg = f"dimension constants need n >= 3, got {n}"
        raise PreconditionError(msg)
    a, b, c = q_coefficients(n)
    cubic = n**3 - 6 * n**2 + 16 * n - 8
    l = Fraction(cubic, 4 * n * (n - 1) ** 2 * (n - 2))  # noqa: E741
    combination = (Fraction(n + 2, 2 * (n - 1)) - Fraction(2, n)) * b - 2 * c
    gradient = Fraction(n - 2, n - 1) * b - Fraction(n, n - 1) * a
    return DimensionConstants(
        n=n,
        a=a,
        b=b,
        c=c,
        d=Fraction((n - 2) * cubic, 64 * n * (n - 1) ** 2),
        l=l,
        beta=Fraction(2 * (2 * n - 1), 3 * n * (n - 1)),
        gradient_coefficient=gradient,
        l_matches_combination=combination == -l,
        l_positive=l > 0,
        gradient_coefficient_negative=gradient < 0,
    )


def f_n_eval(p: SimplexPoint) -> Fraction:
    """Return n sum x^3 + 1/(n-1) - (2n-1)/(n-1) sum x^2 exactly."""
    n = p.n
    cubes = sum((value**3 for value in p.x), Fraction(0))
    squares = sum((value**2 for value in p.x), Fraction(0))
    return n * cubes + Fraction(1, n - 1) - Fraction(2 * n - 1, n - 1) * squares


def I_from_eigenvalues(  # noqa: N802
    n: int, lambdas: Sequence[float] | Sequence[Fraction]
) -> float | Fraction:
    """Return the cubic Ricci term I of a spectrum, homogeneous of degree 3.

    Exact when the eigenvalues are fractions.
    """
    if n <= 2:  # noqa: PLR2004
        msg = f"the Ricci term I needs n > 2, got {n}"
        raise PreconditionError(msg)
    total = sum(lambdas)
    squares = sum(value**2 for value in lambdas)
    cubes = sum(value**3 for value in lambdas)
    return (
        n * cubes
        - Fraction(2 * n - 1, n - 1) * total * squares
        + Fraction(1, n - 1) * total**3
    ) / (n - 2)


def _check_dimension(n: int) -> None:
    if not SIMPLEX_MIN_DIMENSION <= n <= SIMPLEX_MAX_DIMENSION:
        msg = (
            f"simplex search supports {SIMPLEX_MIN_DIMENSION} <= n <= "
            f"{SIMPLEX_MAX_DIMENSION}, got {n}"
        )
        raise PreconditionError(msg)


def _partitions(
    total: int, parts: int, largest: int
) -> Generator[tuple[int, ...], None, None]:
    """Yield nonincreasing tuples of ``parts`` nonnegative integers summing to total."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(total, largest), -1, -1):
        if first * parts < total:
            break
        for rest in _partitions(total - first, parts - 1, first):
            yield (first, *rest)


def lattice_points(n: int, depth: int) -> Generator[tuple[int, ...], None, None]:
    """Yield the lattice points of spacing 1/depth up to permutation."""
    return _partitions(depth, n, depth)


def _lattice_value(n: int, depth: int, counts: Sequence[int]) -> Fraction:
    cubes = sum(k**3 for k in counts)
    squares = sum(k**2 for k in counts)
    numerator = n * (n - 1) * cubes + depth**3 - (2 * n - 1) * depth * squares
    return Fraction(numerator, (n - 1) * depth**3)


def equality_family(x: Sequence[float], tolerance: float) -> Family | None:
    """Name the equality family within L-infinity distance tolerance of x."""
    n = len(x)
    ordered = sorted(x, reverse=True)
    families: tuple[tuple[Family, list[float]], ...] = (
        ("equal", [1 / n] * n),
        ("one-zero", [1 / (n - 1)] * (n - 1) + [0.0]),
    )
    for name, target in families:
        if max(abs(a - b) for a, b in zip(ordered, target, strict=True)) <= tolerance:
            return name
    return None


def _f_float(n: int, x: Sequence[float]) -> float:
    return (
        n * sum(v**3 for v in x)
        + 1 / (n - 1)
        - (2 * n - 1) / (n - 1) * sum(v**2 for v in x)
    )


def _refine(n: int, start: Sequence[float], step: float) -> tuple[list[float], float]:
    """Coordinate descent by mass transfers between pairs of coordinates."""
    x = list(start)
    best = _f_float(n, x)
    while step >= SIMPLEX_STEP_FLOOR:
        improved = False
        for i in range(n):
            for j in range(n):
                amount = min(step, x[j])
                if i == j or amount <= 0:
                    continue
                x[i] += amount
                x[j] -= amount
                value = _f_float(n, x)
                if value < best:
                    best, improved = value, True
                else:
                    x[i] -= amount
                    x[j] += amount
        if not improved:
            step /= 2
    return x, best


def simplex_min_search(n: int, grid_depth: int = DEFAULT_GRID_DEPTH) -> SimplexSearch:
    """Minimize f_n exactly on the simplex lattice of spacing 1/grid_depth, then refine.

    f_n is symmetric, so one sorted representative per permutation orbit is enough.
    """
    _check_dimension(n)
    if grid_depth < MINIMUM_GRID_DEPTH:
        msg = f"grid depth must be at least {MINIMUM_GRID_DEPTH}, got {grid_depth}"
        raise PreconditionError(msg)
    logger.info(f"searching the simplex lattice for n={n} at depth {grid_depth}")
    values = {
        counts: _lattice_value(n, grid_depth, counts)
        for counts in lattice_points(n, grid_depth)
    }
    argmin = min(values, key=values.__getitem__)
    best = values[argmin]
    count = len(values)
    zeros = [counts for counts, value in values.items() if value == 0]
    tolerance = 2 / grid_depth
    refined, refined_value = _refine(
        n, [k / grid_depth for k in argmin], 1 / grid_depth
    )
    zero_points = [tuple(Fraction(k, grid_depth) for k in point) for point in zeros]
    logger.info(f"lattice of {count} orbits has minimum {float(best):.3e}")
    return SimplexSearch(
        n=n,
        depth=grid_depth,
        lattice_points=count,
        lattice_min=best,
        lattice_argmin=SimplexPoint(
            n=n, x=tuple(Fraction(k, grid_depth) for k in argmin)
        ),
        zero_points=zero_points,
        zeros_in_families=all(
            equality_family([float(v) for v in point], tolerance) is not None
            for point in zero_points
        ),
        refined_point=refined,
        refined_value=refined_value,
        refined_family=equality_family(refined, tolerance),
        nonnegative=best >= 0,
    )


def critical_points(n: int) -> list[CriticalPointData]:
    """Enumerate interior critical points of the cubic on the simplex.

    A critical point has m + 1 coordinates alpha and the rest beta - alpha.

    The branch 2m = n - 2 has no solution for n >= 3 and is skipped, as are
    patterns with a negative coordinate.
    """
    if n < SIMPLEX_MIN_DIMENSION:
        msg = f"critical points need n >= 3, got {n}"
        raise PreconditionError(msg)
    beta = Fraction(2 * (2 * n - 1), 3 * n * (n - 1))
    candidates: list[tuple[int, Fraction, tuple[Fraction, ...], Fraction]] = []
    for m in range(n):
        if 2 * m == n - 2:
            continue
        alpha = beta / 2 + Fraction(n - 2, 3 * (n - 1) * (2 * m - (n - 2)))
        point = (alpha,) * (m + 1) + (beta - alpha,) * (n - 1 - m)
        if any(value < 0 for value in point):
            continue
        value = (n - Fraction(n**2, 2) * beta) * (alpha**2 - beta * alpha) + (
            Fraction(1, n - 1) - Fraction(n, 2) * beta**2
        )
        candidates.append((m, alpha, point, value))
    result = []
    for m, alpha, point, value in candidates:
        classification: CriticalClass
        if any(entry == 0 for entry in point):
            classification = "boundary"
        elif value == 0:
            classification = "interior-min"
        else:
            classification = "interior-other"
        result.append(
            CriticalPointData(
                m=m,
                alpha=alpha,
                point=point,
                value=value,
                classification=classification,
            )
        )
    return result
