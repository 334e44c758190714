"""Hypersurfaces in the space forms of curvature 0, 1 and -1.

Spheres and hyperbolic space are realized as the quadrics <x, x> = 1 in Euclidean
space and <x, x> = -1 in Minkowski space, so the second fundamental form is the
ambient Hessian of the position projected onto the unit normal.
"""

from collections.abc import Sequence
from fractions import Fraction
from math import sqrt
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mex.qcurvature.constants import (
    CARTAN_TOLERANCE,
    GAUSS_TOLERANCE,
    IMMERSION_TOLERANCE,
    PINCHING_TOLERANCE,
    UMBILIC_TOLERANCE,
)
from mex.qcurvature.exceptions import PreconditionError, TensorError
from mex.qcurvature.expr import (
    ZERO,
    Expr,
    diff_expr,
    expr_coordinates,
    mul,
    simplify_expr,
)
from mex.qcurvature.geometry import (
    CoordinateAxis,
    CurvatureJets,
    MetricChart,
    check_box,
)
from mex.qcurvature.helpers import residual_report
from mex.qcurvature.jets import expr_jet, jet_algebra
from mex.qcurvature.models import IdentityReport
from mex.qcurvature.tensor import generalized_eigen
from mex.qcurvature.types import ExactRational, FloatArray


class Immersion(BaseModel):
    """Parametrized hypersurface of a space form with its unit normal."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    ambient_curvature: Literal[-1, 0, 1]
    axes: tuple[CoordinateAxis, ...] = Field(min_length=2)
    position: tuple[Expr, ...]
    normal: tuple[Expr, ...]

    @property
    def dim(self) -> int:
        """Return the hypersurface dimension."""
        return len(self.axes)

    @property
    def ambient_signature(self) -> NDArray[np.float64]:
        """Return the diagonal of the ambient inner product."""
        signature = np.ones(len(self.position))
        if self.ambient_curvature == -1:
            signature[0] = -1.0
        return signature

    @model_validator(mode="after")
    def check_lengths(self) -> "Immersion":
        """Require position and normal vectors of the ambient length."""
        expected = self.dim + (1 if self.ambient_curvature == 0 else 2)
        if len(self.position) != expected or len(self.normal) != expected:
            msg = (
                f"position and normal need {expected} components, "
                f"got {len(self.position)} and {len(self.normal)}"
            )
            raise ValueError(msg)
        for component in (*self.position, *self.normal):
            if any(index >= self.dim for index in expr_coordinates(component)):
                msg = "immersion uses a coordinate outside its parameter domain"
                raise ValueError(msg)
        return self


class ShapeData(BaseModel):
    """First and second fundamental forms at a point with derived spectra."""

    ambient_curvature: int
    first_form: FloatArray
    second_form: FloatArray
    mean_curvature: float
    principal_curvatures: FloatArray
    lambdas: FloatArray
    traceless: FloatArray
    h_norm2: float
    z_norm2: float


class LambdaData(BaseModel):
    """Ricci spectrum of a hypersurface and the Cauchy-type quantity built on it."""

    lambdas: FloatArray
    kappa_lambda: float
    cauchy_gap: float
    umbilic: bool
    two_valued: bool
    cartan: bool
    gap_applicable: bool
    gap_nonpositive: bool
    cauchy_equality: bool


class PinchingReport(BaseModel):
    """Which pinching bounds a shape satisfies."""

    mean_curvature: float
    h_norm2: float
    lower_bound: float
    upper_bound: float
    in_window: bool
    z_bound: bool
    mu_bound: bool
    sign: Literal["nonnegative", "nonpositive", "zero", "mixed"]


class IsoparametricData(BaseModel):
    """Closed-form principal curvatures of a two-valued isoparametric hypersurface."""

    n: int
    m: int
    kappa_squared: ExactRational
    t_squared: ExactRational
    kappa: float
    t: float
    lam: ExactRational
    product_is_minus_one: bool
    weighted_sum_vanishes: bool
    lambda_matches: bool


def _position_jets(
    im: Immersion, points: NDArray[np.float64]
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    algebra = jet_algebra(im.dim, 2)
    position = np.stack([expr_jet(e, algebra, points) for e in im.position], axis=1)
    normal = np.stack([expr_jet(e, algebra, points) for e in im.normal], axis=1)
    tangent = algebra.gradient(position)
    hessian = algebra.gradient(tangent)
    return (
        algebra.value(position),
        algebra.value(normal),
        algebra.value(tangent),
        algebra.value(hessian),
    )


def _forms(
    im: Immersion, points: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    _, normal, tangent, hessian = _position_jets(im, points)
    eta = im.ambient_signature
    first = np.einsum("a,bai,baj->bij", eta, tangent, tangent)
    second = np.einsum("a,baij,ba->bij", eta, hessian, normal)
    return first, 0.5 * (second + np.swapaxes(second, 1, 2))


def _shape(
    c: int, first: NDArray[np.float64], second: NDArray[np.float64]
) -> ShapeData:
    n = first.shape[0]
    try:
        kappas, _ = generalized_eigen(second, first)
    except TensorError as error:
        msg = "induced metric is degenerate"
        raise PreconditionError(msg) from error
    inverse = np.linalg.inv(first)
    shape_operator = inverse @ second
    mean = float(np.trace(shape_operator))
    h_norm2 = float(np.trace(shape_operator @ shape_operator))
    return ShapeData(
        ambient_curvature=c,
        first_form=first,
        second_form=second,
        mean_curvature=mean,
        principal_curvatures=kappas,
        lambdas=(n - 1) * c + mean * kappas - kappas**2,
        traceless=kappas - mean / n,
        h_norm2=h_norm2,
        z_norm2=h_norm2 - mean**2 / n,
    )


def shape_data(im: Immersion, points: ArrayLike) -> list[ShapeData]:
    """Return the fundamental forms and spectra at every point."""
    array = check_box(im.axes, points)
    first, second = _forms(im, array)
    return [
        _shape(im.ambient_curvature, g, h)
        for g, h in zip(first, second, strict=True)
    ]


def fundamental_forms(im: Immersion, point: Sequence[float]) -> ShapeData:
    """Return the fundamental forms and spectra at one point."""
    return shape_data(im, [point])[0]


def shape_from_curvatures(kappas: Sequence[float], c: int = 0) -> ShapeData:
    """Return the shape of a diagonal orthonormal frame with given curvatures."""
    values = np.asarray(kappas, dtype=np.float64)
    return _shape(c, np.eye(len(values)), np.diag(values))


def check_immersion(im: Immersion, points: ArrayLike) -> IdentityReport:
    """Check the quadric constraint and that the normal is a unit normal."""
    array = check_box(im.axes, points)
    position, normal, tangent, _ = _position_jets(im, array)
    eta = im.ambient_signature
    actual = [
        np.einsum("a,ba,ba->b", eta, normal, normal)[:, None],
        np.einsum("a,ba,bai->bi", eta, normal, tangent),
    ]
    expected = [np.ones((len(array), 1)), np.zeros((len(array), im.dim))]
    if im.ambient_curvature:
        actual.append(np.einsum("a,ba,ba->b", eta, position, position)[:, None])
        actual.append(np.einsum("a,ba,ba->b", eta, normal, position)[:, None])
        expected.append(np.full((len(array), 1), float(im.ambient_curvature)))
        expected.append(np.zeros((len(array), 1)))
    return residual_report(
        f"immersion:{im.name}",
        np.concatenate(actual, axis=1),
        [np.concatenate(expected, axis=1)],
        IMMERSION_TOLERANCE,
    )


def induced_chart(im: Immersion) -> MetricChart:
    """Return the metric induced on the parameter domain."""
    n = im.dim
    eta = im.ambient_signature
    tangents = [
        [diff_expr(component, i) for component in im.position] for i in range(n)
    ]
    rows: list[list[Expr]] = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            entry = ZERO
            for sign, a, b in zip(eta, tangents[i], tangents[j], strict=True):
                entry = entry + mul(a, b) * int(sign)
            rows[i][j] = rows[j][i] = simplify_expr(entry)
    return MetricChart(
        name=f"induced {im.name}",
        axes=im.axes,
        metric=tuple(tuple(row) for row in rows),
    )


def gauss_residuals(
    im: Immersion, points: ArrayLike, tolerance: float = GAUSS_TOLERANCE
) -> IdentityReport:
    """Compare intrinsic curvature of the induced metric with the Gauss equations."""
    array = check_box(im.axes, points)
    jets = CurvatureJets(induced_chart(im), array, order=2)
    value = jets.algebra.value
    riemann, ricci = value(jets.riemann), value(jets.ricci)
    scalar = value(jets.scalar_curvature)
    first, second = _forms(im, array)
    c, n = im.ambient_curvature, im.dim
    inverse = np.linalg.inv(first)
    shape_operator = inverse @ second
    mean = np.trace(shape_operator, axis1=1, axis2=2)
    h_norm2 = np.einsum("bij,bji->b", shape_operator, shape_operator)

    def wedge(a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.einsum("bik,bjl->bijkl", a, b) - np.einsum("bil,bjk->bijkl", a, b)

    gauss = c * wedge(first, first) + wedge(second, second)
    traced = (
        (n - 1) * c * first
        + mean[:, None, None] * second
        - np.einsum("bik,bkl,blj->bij", second, inverse, second)
    )
    contracted = n * (n - 1) * c + mean**2 - h_norm2
    count = len(array)
    lhs = np.concatenate(
        [riemann.reshape(count, -1), ricci.reshape(count, -1), scalar[:, None]], axis=1
    )
    rhs = np.concatenate(
        [gauss.reshape(count, -1), traced.reshape(count, -1), contracted[:, None]],
        axis=1,
    )
    return residual_report(f"gauss:{im.name}", lhs, [rhs], tolerance)


def _distinct_values(values: NDArray[np.float64], tolerance: float) -> list[float]:
    distinct: list[float] = []
    for value in np.sort(values):
        if not distinct or value - distinct[-1] > tolerance:
            distinct.append(float(value))
    return distinct


def lambda_quantities(sd: ShapeData, c: int | None = None) -> LambdaData:
    """Return the Ricci spectrum, the Cauchy gap and the equality-pattern flags.

    The gap (sum k_i l_i)^2 - H sum k_i l_i^2 is nonpositive for hypersurfaces of
    Euclidean space with H > 0 and nonnegative Ricci curvature.
    """
    c = sd.ambient_curvature if c is None else c
    kappas = sd.principal_curvatures
    n = len(kappas)
    mean = float(kappas.sum())
    lambdas = (n - 1) * c + mean * kappas - kappas**2
    kappa_lambda = float(np.sum(kappas * lambdas))
    gap = kappa_lambda**2 - mean * float(np.sum(kappas * lambdas**2))
    scale = max(1.0, float(np.max(np.abs(kappas))))
    distinct = _distinct_values(kappas, UMBILIC_TOLERANCE * scale)
    pairs = [
        (a, b)
        for a in range(n)
        for b in range(a + 1, n)
        if abs(kappas[a] - kappas[b]) > UMBILIC_TOLERANCE * scale
    ]
    applicable = c == 0 and mean > 0 and bool(np.all(lambdas >= -PINCHING_TOLERANCE))
    gap_scale = max(1.0, kappa_lambda**2)
    nonzero = np.abs(kappas) > UMBILIC_TOLERANCE * scale
    lambda_scale = max(1.0, float(np.max(np.abs(lambdas))))
    lambda_values = _distinct_values(lambdas[nonzero], UMBILIC_TOLERANCE * lambda_scale)
    return LambdaData(
        lambdas=lambdas,
        kappa_lambda=kappa_lambda,
        cauchy_gap=gap,
        umbilic=len(distinct) == 1,
        two_valued=len(distinct) == 2,  # noqa: PLR2004
        cartan=bool(pairs)
        and all(abs(c + kappas[a] * kappas[b]) <= CARTAN_TOLERANCE for a, b in pairs),
        gap_applicable=applicable,
        gap_nonpositive=gap <= 1e-10 * gap_scale,
        cauchy_equality=len(lambda_values) <= 1,
    )


def pinching_check(sd: ShapeData) -> PinchingReport:
    """Evaluate the pinching window H^2/n <= |h|^2 <= H^2/(n-1) and its consequences."""
    kappas = sd.principal_curvatures
    n = len(kappas)
    mean, h_norm2 = sd.mean_curvature, sd.h_norm2
    slack = PINCHING_TOLERANCE * max(1.0, mean**2, h_norm2)
    lower, upper = mean**2 / n, mean**2 / (n - 1)
    if np.all(np.abs(kappas) <= slack):
        sign = "zero"
    elif np.all(kappas >= -slack):
        sign = "nonnegative"
    elif np.all(kappas <= slack):
        sign = "nonpositive"
    else:
        sign = "mixed"
    return PinchingReport(
        mean_curvature=mean,
        h_norm2=h_norm2,
        lower_bound=lower,
        upper_bound=upper,
        in_window=lower - slack <= h_norm2 <= upper + slack,
        z_bound=sd.z_norm2 <= mean**2 / (n * (n - 1)) + slack,
        mu_bound=bool(np.all(np.abs(sd.traceless) <= abs(mean) / n + slack)),
        sign=sign,
    )


def isoparametric_clifford_data(n: int, m: int) -> IsoparametricData:
    """Return the principal curvatures of the isoparametric case lambda = n - 2.

    The curvatures have multiplicities m and n - m and satisfy kappa t = -1.
    """
    if not 2 <= m <= n - 2:  # noqa: PLR2004
        msg = f"multiplicity m must satisfy 2 <= m <= n - 2, got m={m}, n={n}"
        raise PreconditionError(msg)
    kappa_squared = Fraction(n - m - 1, m - 1)
    t_squared = Fraction(m - 1, n - m - 1)
    product_squared = kappa_squared * t_squared
    # kappa and t have opposite signs
    kappa_t = Fraction(-1) if product_squared == 1 else Fraction(-sqrt(product_squared))
    # (m-1) kappa = -(n-m-1) t with opposite signs, compared through the squares
    weighted = (m - 1) ** 2 * kappa_squared == (n - m - 1) ** 2 * t_squared
    lam = n - 1 + kappa_t
    return IsoparametricData(
        n=n,
        m=m,
        kappa_squared=kappa_squared,
        t_squared=t_squared,
        kappa=sqrt(kappa_squared),
        t=-sqrt(t_squared),
        lam=lam,
        product_is_minus_one=product_squared == 1,
        weighted_sum_vanishes=weighted,
        lambda_matches=lam == n - 2,
    )
