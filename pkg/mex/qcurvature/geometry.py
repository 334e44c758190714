"""Curvature of a Riemannian metric given in one coordinate chart.

Two paths compute the same tensors. The symbolic path (``christoffel``,
``riemann``, ``covariant_derivative``) builds expression trees and is meant for
small charts and cross-checks. The jet path (``CurvatureJets``) expands the
metric into truncated Taylor series at a batch of points and derives every
curvature quantity, including fifth metric derivatives, by exact jet arithmetic.
"""

from collections.abc import Callable, Sequence
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from rich.console import Console
from rich.progress import track

from mex.qcurvature.constants import (
    DEFAULT_JET_ORDER,
    DEFAULT_PROBE_FRACTION,
    JET_CHUNK_BUDGET,
    MINIMUM_CHUNK_SIZE,
)
from mex.qcurvature.exceptions import (
    ChartError,
    ExprDomainError,
    PreconditionError,
    TensorError,
)
from mex.qcurvature.expr import (
    ZERO,
    Expr,
    add,
    coerce,
    constant_value,
    diff_expr,
    div,
    evaluate,
    expr_coordinates,
    expr_params,
    mul,
    simplify_expr,
    sub,
)
from mex.qcurvature.jets import (
    Jet,
    JetAlgebra,
    expr_jet,
    jet_algebra,
    kulkarni_nomizu_jet,
)
from mex.qcurvature.types import FloatArray

_LETTERS = "abcdefghijklmnopqrstuvw"


class CoordinateAxis(BaseModel):
    """One chart coordinate and its range."""

    model_config = ConfigDict(frozen=True)

    name: str
    lower: float
    upper: float
    periodic: bool = False
    polar: bool = False

    @property
    def width(self) -> float:
        """Return the length of the coordinate range."""
        return self.upper - self.lower

    @model_validator(mode="after")
    def check_range(self) -> "CoordinateAxis":
        """Require a non-empty range and at most one closing rule."""
        if not self.lower < self.upper:
            msg = f"axis '{self.name}' has empty range [{self.lower}, {self.upper}]"
            raise ValueError(msg)
        if self.periodic and self.polar:
            msg = f"axis '{self.name}' cannot be both periodic and polar"
            raise ValueError(msg)
        return self


class ChartBlock(BaseModel):
    """Axes belonging to one product factor of a chart."""

    model_config = ConfigDict(frozen=True)

    axes: tuple[int, ...] = Field(min_length=1)
    homogeneous: bool = False


def check_box(
    axes: Sequence[CoordinateAxis], points: ArrayLike
) -> NDArray[np.float64]:
    """Return points as a (batch, n) array, rejecting any outside the open box.

    Periodic coordinates are never out of range.
    """
    array = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if array.ndim != 2 or array.shape[1] != len(axes):  # noqa: PLR2004
        msg = f"points must have {len(axes)} coordinates, got shape {array.shape}"
        raise ChartError(msg)
    for index, axis in enumerate(axes):
        if axis.periodic:
            continue
        column = array[:, index]
        if np.any((column <= axis.lower) | (column >= axis.upper)):
            msg = (
                f"coordinate '{axis.name}' outside the open range "
                f"({axis.lower}, {axis.upper})"
            )
            raise ChartError(msg)
    return array


class MetricChart(BaseModel):
    """Riemannian metric as a symmetric matrix of expressions on a coordinate box."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    axes: tuple[CoordinateAxis, ...] = Field(min_length=2)
    metric: tuple[tuple[Expr, ...], ...]
    params: dict[str, float] = {}
    blocks: tuple[ChartBlock, ...] = ()

    _symbolic: dict[str, Any] = PrivateAttr(default_factory=dict)

    @property
    def dim(self) -> int:
        """Return the manifold dimension."""
        return len(self.axes)

    @property
    def coords(self) -> list[str]:
        """Return the coordinate names."""
        return [axis.name for axis in self.axes]

    @property
    def closed(self) -> bool:
        """Tell whether every axis is periodic or a polar angle range."""
        return all(axis.periodic or axis.polar for axis in self.axes)

    @model_validator(mode="after")
    def check_metric(self) -> "MetricChart":
        """Require a symmetric, well-scoped, positive definite metric."""
        n = self.dim
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            msg = f"metric must be a {n}x{n} matrix"
            raise ValueError(msg)
        for i, j in product(range(n), repeat=2):
            entry = self.metric[i][j]
            mirror = self.metric[j][i]
            asymmetric = i < j and entry is not mirror
            if asymmetric and simplify_expr(entry) != simplify_expr(mirror):
                msg = f"metric entries ({i},{j}) and ({j},{i}) differ"
                raise ValueError(msg)
            if any(index >= n for index in expr_coordinates(entry)):
                msg = f"metric entry ({i},{j}) uses a coordinate outside the chart"
                raise ValueError(msg)
            if missing := expr_params(entry) - set(self.params):
                msg = f"metric entry ({i},{j}) has unbound parameters {sorted(missing)}"
                raise ValueError(msg)
        if self.blocks:
            covered = sorted(axis for block in self.blocks for axis in block.axes)
            if covered != list(range(n)):
                msg = "chart blocks must partition the axes"
                raise ValueError(msg)
        self._check_positive_definite()
        return self

    def _check_positive_definite(self) -> None:
        points = self.probe_points()
        try:
            values = self.metric_values(points)
        except ExprDomainError as error:
            msg = f"metric cannot be evaluated on the probe grid: {error}"
            raise ValueError(msg) from error
        with np.errstate(invalid="ignore"):
            smallest = np.linalg.eigvalsh(np.nan_to_num(values, nan=-1.0))[:, 0]
        bad = ~np.isfinite(values).all(axis=(1, 2)) | (smallest <= 0)
        if np.any(bad):
            point = points[int(np.argmax(bad))].tolist()
            msg = f"metric is not positive definite at probe point {point}"
            raise ValueError(msg)

    def probe_points(self) -> NDArray[np.float64]:
        """Return the 3^n probe grid spanning the central part of the box."""
        half = DEFAULT_PROBE_FRACTION / 2
        offsets = (0.5 - half, 0.5, 0.5 + half)
        per_axis = [
            [axis.lower + axis.width * t for t in offsets] for axis in self.axes
        ]
        return np.array(list(product(*per_axis)), dtype=np.float64)

    def check_points(self, points: ArrayLike) -> NDArray[np.float64]:
        """Return points as a (batch, n) array after a domain check."""
        return check_box(self.axes, points)

    def metric_values(self, points: ArrayLike) -> NDArray[np.float64]:
        """Evaluate the metric matrix at each point."""
        array = np.atleast_2d(np.asarray(points, dtype=np.float64))
        columns = [array[:, k] for k in range(self.dim)]
        values = np.empty((len(array), self.dim, self.dim))
        for i in range(self.dim):
            for j in range(i, self.dim):
                entry = evaluate(self.metric[i][j], columns, self.params)
                values[:, i, j] = values[:, j, i] = np.broadcast_to(entry, len(array))
        return values


# symbolic path


def _determinant(
    matrix: Sequence[Sequence[Expr]],
    rows: tuple[int, ...],
    cols: tuple[int, ...],
    memo: dict[tuple[tuple[int, ...], tuple[int, ...]], Expr],
) -> Expr:
    key = (rows, cols)
    if key in memo:
        return memo[key]
    if len(rows) == 1:
        return matrix[rows[0]][cols[0]]
    total = ZERO
    for position, col in enumerate(cols):
        entry = matrix[rows[0]][col]
        if constant_value(entry) == 0:
            continue
        remaining = cols[:position] + cols[position + 1 :]
        minor = _determinant(matrix, rows[1:], remaining, memo)
        term = mul(entry, minor)
        total = sub(total, term) if position % 2 else add(total, term)
    memo[key] = total
    return total


def inverse_metric(chart: MetricChart) -> NDArray[np.object_]:
    """Return g^ij as expressions built from the adjugate and the determinant."""
    if "inverse" in chart._symbolic:  # noqa: SLF001
        return chart._symbolic["inverse"]  # noqa: SLF001
    n = chart.dim
    memo: dict[tuple[tuple[int, ...], tuple[int, ...]], Expr] = {}
    everything = tuple(range(n))
    determinant = simplify_expr(
        _determinant(chart.metric, everything, everything, memo)
    )
    if constant_value(determinant) == 0:
        msg = f"metric determinant of chart '{chart.name}' is identically zero"
        raise ChartError(msg)
    inverse = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(i, n):
            rows = tuple(k for k in everything if k != j)
            cols = tuple(k for k in everything if k != i)
            if n > 1:
                cofactor = _determinant(chart.metric, rows, cols, memo)
            else:
                cofactor = coerce(1)
            if (i + j) % 2:
                cofactor = mul(coerce(-1), cofactor)
            inverse[i, j] = inverse[j, i] = simplify_expr(div(cofactor, determinant))
    chart._symbolic["inverse"] = inverse  # noqa: SLF001
    return inverse


def _total(terms: Sequence[Expr]) -> Expr:
    result = ZERO
    for term in terms:
        result = add(result, term)
    return result


def christoffel(chart: MetricChart) -> NDArray[np.object_]:
    """Return the Christoffel symbols, indexed as gamma[k, i, j]."""
    if "christoffel" in chart._symbolic:  # noqa: SLF001
        return chart._symbolic["christoffel"]  # noqa: SLF001
    n = chart.dim
    inverse = inverse_metric(chart)
    derivative = np.empty((n, n, n), dtype=object)
    for a, b, c in product(range(n), repeat=3):
        if a <= b:
            derivative[a, b, c] = derivative[b, a, c] = diff_expr(chart.metric[a][b], c)
    gamma = np.empty((n, n, n), dtype=object)
    half = coerce(Fraction(1, 2))
    for k, i in product(range(n), repeat=2):
        for j in range(i, n):
            terms = [
                mul(
                    inverse[k, l],
                    sub(
                        add(derivative[j, l, i], derivative[i, l, j]),
                        derivative[i, j, l],
                    ),
                )
                for l in range(n)  # noqa: E741
            ]
            gamma[k, i, j] = gamma[k, j, i] = simplify_expr(mul(half, _total(terms)))
    chart._symbolic["christoffel"] = gamma  # noqa: SLF001
    return gamma


def riemann(chart: MetricChart) -> NDArray[np.object_]:
    """Return the all-covariant Riemann tensor R[i, j, k, l].

    Signs are fixed so that the unit sphere has R_ijkl = g_ik g_jl - g_il g_jk.
    """
    if "riemann" in chart._symbolic:  # noqa: SLF001
        return chart._symbolic["riemann"]  # noqa: SLF001
    n = chart.dim
    gamma = christoffel(chart)
    mixed = np.empty((n, n, n, n), dtype=object)
    for r, s in product(range(n), repeat=2):
        mixed[r, s, :, :] = ZERO
        for m in range(n):
            for q in range(m + 1, n):
                terms = [
                    diff_expr(gamma[r, q, s], m),
                    mul(coerce(-1), diff_expr(gamma[r, m, s], q)),
                ]
                for l in range(n):  # noqa: E741
                    terms.append(mul(gamma[r, m, l], gamma[l, q, s]))
                    terms.append(mul(coerce(-1), mul(gamma[r, q, l], gamma[l, m, s])))
                value = _total(terms)
                mixed[r, s, m, q] = value
                mixed[r, s, q, m] = mul(coerce(-1), value)
    lowered = np.empty((n, n, n, n), dtype=object)
    for p, s, m, q in product(range(n), repeat=4):
        lowered[p, s, m, q] = simplify_expr(
            _total([mul(chart.metric[p][r], mixed[r, s, m, q]) for r in range(n)])
        )
    chart._symbolic["riemann"] = lowered  # noqa: SLF001
    return lowered


def covariant_derivative(
    chart: MetricChart, field: NDArray[np.object_] | Expr
) -> NDArray[np.object_]:
    """Append one covariant slot to a covariant tensor field of expressions."""
    components = np.asarray(field, dtype=object)
    n, rank = chart.dim, components.ndim
    if any(size != n for size in components.shape):
        msg = f"field of shape {components.shape} does not live on a {n}-chart"
        raise TensorError(msg)
    gamma = christoffel(chart)
    result = np.empty((n,) * (rank + 1), dtype=object)
    for index in product(range(n), repeat=rank):
        for c in range(n):
            terms = [diff_expr(components[index], c)]
            for slot, i_s in enumerate(index):
                for x in range(n):
                    moved = (*index[:slot], x, *index[slot + 1 :])
                    connection = mul(gamma[x, i_s, c], components[moved])
                    terms.append(mul(coerce(-1), connection))
            result[(*index, c)] = simplify_expr(_total(terms))
    return result


def field_values(
    chart: MetricChart, field: NDArray[np.object_], points: ArrayLike
) -> NDArray[np.float64]:
    """Evaluate every component of an expression field at a batch of points."""
    array = chart.check_points(points)
    columns = [array[:, k] for k in range(chart.dim)]
    components = np.asarray(field, dtype=object)
    values = np.empty((len(array), *components.shape))
    for index in np.ndindex(*components.shape):
        entry = evaluate(components[index], columns, chart.params)
        values[(slice(None), *index)] = np.broadcast_to(entry, len(array))
    return values


# jet path


def q_coefficients(n: int) -> tuple[Fraction, Fraction, Fraction]:
    """Return the weights of the Laplacian, |Ric|^2 and R^2 terms of Q."""
    return (
        Fraction(1, 2 * (n - 1)),
        Fraction(2, (n - 2) ** 2),
        Fraction(n**3 - 4 * n**2 + 16 * n - 16, 8 * (n - 1) ** 2 * (n - 2) ** 2),
    )


class CurvatureJets:
    """Curvature jets of a chart at a batch of points, computed on first access.

    Jet orders drop by one with every derivative: at the default order 5 the
    Christoffel symbols carry order 4, curvature order 3, first covariant
    derivatives of curvature order 2 and Q order 1.
    """

    def __init__(
        self, chart: MetricChart, points: ArrayLike, order: int = DEFAULT_JET_ORDER
    ) -> None:
        """Check the points and pick the shared jet algebra."""
        self.chart = chart
        self.points = chart.check_points(points)
        self.dim = chart.dim
        self.algebra: JetAlgebra = jet_algebra(chart.dim, order)

    def scalar(self, e: Expr) -> Jet:
        """Expand an expression over the chart coordinates."""
        return expr_jet(e, self.algebra, self.points, self.chart.params)

    def _scaled(self, factor: Jet, tensor: Jet) -> Jet:
        return self.algebra.contract(",ij->ij", factor, tensor)

    def covariant_derivative(self, jet: Jet) -> Jet:
        """Append one covariant slot to a covariant tensor jet."""
        algebra = self.algebra
        rank = jet.ndim - 2
        order = algebra.order_of(jet) - 1
        result = algebra.gradient(jet)
        letters = _LETTERS[:rank]
        for slot, letter in enumerate(letters):
            source = letters[:slot] + "x" + letters[slot + 1 :]
            correction = algebra.contract(
                f"x{letter}y,{source}->{letters}y", self.christoffel, jet
            )
            result = result - algebra.truncate(correction, order)
        return result

    def hessian(self, jet: Jet) -> Jet:
        """Return the covariant Hessian of a scalar jet."""
        return self.covariant_derivative(self.algebra.gradient(jet))

    def trace(self, jet: Jet) -> Jet:
        """Contract a 2-tensor jet with the inverse metric."""
        return self.algebra.contract("ij,ij->", self.inverse_metric, jet)

    def laplacian(self, jet: Jet) -> Jet:
        """Return the Laplace-Beltrami operator, negative on the flat torus."""
        return self.trace(self.hessian(jet))

    def divergence(self, jet: Jet) -> Jet:
        """Return the divergence of a covector field jet."""
        return self.trace(self.covariant_derivative(jet))

    def raised(self, jet: Jet) -> Jet:
        """Return g^ia v_a for a covector jet."""
        return self.algebra.contract("ia,a->i", self.inverse_metric, jet)

    @cached_property
    def metric(self) -> Jet:
        """Metric jets at full order."""
        n = self.dim
        jet = np.empty((len(self.points), n, n, self.algebra.sizes[-1]))
        for i in range(n):
            for j in range(i, n):
                jet[:, i, j] = jet[:, j, i] = self.scalar(self.chart.metric[i][j])
        return jet

    @cached_property
    def inverse_metric(self) -> Jet:
        """Inverse metric from a Neumann series around the value at each point."""
        algebra = self.algebra
        base = algebra.constant(np.linalg.inv(algebra.value(self.metric)))
        perturbation = self.metric.copy()
        perturbation[..., 0] = 0.0
        step = -algebra.contract("ij,jk->ik", base, perturbation)
        shape = (len(self.points), self.dim, self.dim)
        identity = np.broadcast_to(np.eye(self.dim), shape)
        term = total = algebra.constant(identity)
        for _ in range(algebra.order):
            term = algebra.contract("ij,jk->ik", term, step)
            total = total + term
        return algebra.contract("ij,jk->ik", total, base)

    @cached_property
    def christoffel(self) -> Jet:
        """Christoffel symbols gamma[k, i, j]."""
        dg = self.algebra.gradient(self.metric)
        first_kind = 0.5 * (
            np.einsum("...jliz->...lijz", dg)
            + np.einsum("...iljz->...lijz", dg)
            - np.einsum("...ijlz->...lijz", dg)
        )
        return self.algebra.contract("kl,lij->kij", self.inverse_metric, first_kind)

    @cached_property
    def riemann(self) -> Jet:
        """All-covariant Riemann tensor."""
        algebra = self.algebra
        d_gamma = algebra.gradient(self.christoffel)
        low = algebra.truncate(self.christoffel, algebra.order_of(d_gamma))
        quadratic = algebra.contract("rml,lns->rsmn", low, low)
        mixed = (
            np.einsum("...rnsmz->...rsmnz", d_gamma)
            - np.einsum("...rmsnz->...rsmnz", d_gamma)
            + quadratic
            - np.einsum("...rsmnz->...rsnmz", quadratic)
        )
        return algebra.contract("pr,rsmn->psmn", self.metric, mixed)

    @cached_property
    def ricci(self) -> Jet:
        """Ricci tensor R_ij = g^kl R_ikjl."""
        return self.algebra.contract("kl,ikjl->ij", self.inverse_metric, self.riemann)

    @cached_property
    def scalar_curvature(self) -> Jet:
        """Scalar curvature."""
        return self.trace(self.ricci)

    @cached_property
    def ricci_mixed(self) -> Jet:
        """Ricci endomorphism g^ik R_kj."""
        return self.algebra.contract("ik,kj->ij", self.inverse_metric, self.ricci)

    @cached_property
    def ricci_up(self) -> Jet:
        """Ricci tensor with both indices raised."""
        return self.algebra.contract("ij,jk->ik", self.ricci_mixed, self.inverse_metric)

    @cached_property
    def ricci_norm2(self) -> Jet:
        """|Ric|^2."""
        return self.algebra.contract("ij,ji->", self.ricci_mixed, self.ricci_mixed)

    @cached_property
    def traceless_ricci(self) -> Jet:
        """Ric - R g / n."""
        return self.ricci - self._scaled(self.scalar_curvature / self.dim, self.metric)

    def _require(self, minimum: int, quantity: str) -> None:
        if self.dim < minimum:
            msg = f"{quantity} needs dimension at least {minimum}, got {self.dim}"
            raise PreconditionError(msg)

    @cached_property
    def schouten(self) -> Jet:
        """Schouten tensor (Ric - R g / (2(n-1))) / (n-2)."""
        self._require(3, "the Schouten tensor")
        n = self.dim
        shift = self._scaled(self.scalar_curvature / (2 * (n - 1)), self.metric)
        return (self.ricci - shift) / (n - 2)

    @cached_property
    def weyl(self) -> Jet:
        """Weyl tensor Riem - A (KN) g; identically zero below dimension 4."""
        self._require(3, "the Weyl tensor")
        if self.dim == 3:  # noqa: PLR2004
            return np.zeros_like(self.riemann)
        product = kulkarni_nomizu_jet(self.algebra, self.schouten, self.metric)
        return self.riemann - product

    @cached_property
    def grad_scalar(self) -> Jet:
        """Gradient of R as a covector."""
        return self.algebra.gradient(self.scalar_curvature)

    @cached_property
    def hessian_scalar(self) -> Jet:
        """Covariant Hessian of R."""
        return self.covariant_derivative(self.grad_scalar)

    @cached_property
    def laplacian_scalar(self) -> Jet:
        """Laplacian of R."""
        return self.trace(self.hessian_scalar)

    @cached_property
    def q(self) -> Jet:
        """Q-curvature."""
        self._require(3, "Q-curvature")
        a, b, c = (float(x) for x in q_coefficients(self.dim))
        r = self.scalar_curvature
        lap, norm2, square = self.algebra.align(
            self.laplacian_scalar, self.ricci_norm2, self.algebra.multiply(r, r)
        )
        return -(a * lap) - b * norm2 + c * square

    @cached_property
    def grad_q(self) -> Jet:
        """Gradient of Q as a covector."""
        return self.algebra.gradient(self.q)

    @cached_property
    def nabla_ricci(self) -> Jet:
        """R_ij,k."""
        return self.covariant_derivative(self.ricci)

    @cached_property
    def nabla_schouten(self) -> Jet:
        """A_ij,k."""
        return self.covariant_derivative(self.schouten)

    @cached_property
    def nabla_weyl(self) -> Jet:
        """W_ijkl,m."""
        return self.covariant_derivative(self.weyl)

    @cached_property
    def div_weyl(self) -> Jet:
        """(delta W)_ijk = W_ijkl,l."""
        return self.algebra.contract(
            "lm,ijklm->ijk", self.inverse_metric, self.nabla_weyl
        )

    @cached_property
    def div2_weyl(self) -> Jet:
        """(delta^2 W)_ij = W_ikjl,lk."""
        nabla = self.covariant_derivative(self.div_weyl)
        return self.algebra.contract("kb,ikjb->ij", self.inverse_metric, nabla)

    @cached_property
    def weyl_ricci(self) -> Jet:
        """W_ikjl R^kl."""
        return self.algebra.contract("kl,ikjl->ij", self.ricci_up, self.weyl)

    @cached_property
    def bach(self) -> Jet:
        """Bach tensor (delta^2 W)/(n-3) + W_ikjl R^kl / (n-2)."""
        self._require(4, "the Bach tensor")
        n = self.dim
        div2, contracted = self.algebra.align(self.div2_weyl, self.weyl_ricci)
        return div2 / (n - 3) + contracted / (n - 2)


class CurvatureBundle(BaseModel):
    """Curvature quantities of a chart at one point."""

    point: FloatArray
    metric: FloatArray
    inverse_metric: FloatArray
    gamma: FloatArray
    riemann: FloatArray
    ricci: FloatArray
    scalar: float
    traceless_ricci: FloatArray
    ricci_norm2: float
    grad_scalar: FloatArray
    hessian_scalar: FloatArray
    laplacian_scalar: float
    nabla_ricci: FloatArray
    schouten: FloatArray | None = None
    weyl: FloatArray | None = None
    weyl_norm2: float | None = None
    div_weyl: FloatArray | None = None
    div2_weyl: FloatArray | None = None
    bach: FloatArray | None = None
    q: float | None = None
    grad_q: FloatArray | None = None
    absent: dict[str, str] = {}


def chunk_size(dim: int) -> int:
    """Return how many points one jet batch holds in the given dimension."""
    return max(MINIMUM_CHUNK_SIZE, JET_CHUNK_BUDGET // dim**3)


def sample_fields(
    chart: MetricChart,
    points: ArrayLike,
    extract: Callable[[CurvatureJets], dict[str, NDArray[np.float64]]],
    order: int = DEFAULT_JET_ORDER,
    description: str | None = None,
) -> dict[str, NDArray[np.float64]]:
    """Evaluate named quantities chunk by chunk and stack them along the first axis."""
    array = chart.check_points(points)
    size = chunk_size(chart.dim)
    starts = range(0, len(array), size)
    if description:
        starts = track(starts, description=description, console=Console(stderr=True))
    parts: dict[str, list[NDArray[np.float64]]] = {}
    for start in starts:
        jets = CurvatureJets(chart, array[start : start + size], order)
        for name, values in extract(jets).items():
            parts.setdefault(name, []).append(np.asarray(values, dtype=np.float64))
    return {name: np.concatenate(values) for name, values in parts.items()}


def weyl_norm2(
    weyl: NDArray[np.float64], inverse: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Return |W|^2 for batches of all-covariant 4-tensors."""
    return np.einsum(
        "...ia,...jb,...kc,...ld,...ijkl,...abcd->...",
        inverse,
        inverse,
        inverse,
        inverse,
        weyl,
        weyl,
        optimize=True,
    )


def full_norm2(
    tensor: NDArray[np.float64], inverse: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Return the full contraction of batches of covariant tensors with themselves."""
    raised = tensor
    for slot in range(1, tensor.ndim):
        moved = np.moveaxis(raised, slot, -1)
        raised = np.moveaxis(np.einsum("bij,b...j->b...i", inverse, moved), -1, slot)
    return np.sum(raised * tensor, axis=tuple(range(1, tensor.ndim)))


def bundle_values(jets: CurvatureJets) -> dict[str, NDArray[np.float64]]:
    """Extract every bundle field from the jets at order zero."""
    value = jets.algebra.value
    values = {
        "point": jets.points,
        "metric": value(jets.metric),
        "inverse_metric": value(jets.inverse_metric),
        "gamma": value(jets.christoffel),
        "riemann": value(jets.riemann),
        "ricci": value(jets.ricci),
        "scalar": value(jets.scalar_curvature),
        "traceless_ricci": value(jets.traceless_ricci),
        "ricci_norm2": value(jets.ricci_norm2),
        "grad_scalar": value(jets.grad_scalar),
        "hessian_scalar": value(jets.hessian_scalar),
        "laplacian_scalar": value(jets.laplacian_scalar),
        "nabla_ricci": value(jets.nabla_ricci),
    }
    if jets.dim >= 3:  # noqa: PLR2004
        values |= {
            "schouten": value(jets.schouten),
            "weyl": value(jets.weyl),
            "div_weyl": value(jets.div_weyl),
            "div2_weyl": value(jets.div2_weyl),
            "q": value(jets.q),
            "grad_q": value(jets.grad_q),
        }
        values["weyl_norm2"] = weyl_norm2(values["weyl"], values["inverse_metric"])
    if jets.dim >= 4:  # noqa: PLR2004
        values["bach"] = value(jets.bach)
    return values


def _absent_reasons(dim: int) -> dict[str, str]:
    reasons = {}
    if dim < 3:  # noqa: PLR2004
        undefined = (
            "schouten",
            "weyl",
            "weyl_norm2",
            "div_weyl",
            "div2_weyl",
            "q",
            "grad_q",
        )
        for name in undefined:
            reasons[name] = "undefined in dimension 2"
    if dim < 4:  # noqa: PLR2004
        reasons["bach"] = "division by n - 3"
    return reasons


def curvature_bundles(chart: MetricChart, points: ArrayLike) -> list[CurvatureBundle]:
    """Return curvature bundles at every point from batched jet evaluations."""
    values = sample_fields(chart, points, bundle_values)
    absent = _absent_reasons(chart.dim)
    count = len(values["point"])
    return [
        CurvatureBundle(
            absent=absent, **{name: array[index] for name, array in values.items()}
        )
        for index in range(count)
    ]


def curvature_bundle(chart: MetricChart, point: Sequence[float]) -> CurvatureBundle:
    """Return the curvature bundle at one point."""
    return curvature_bundles(chart, [point])[0]


def laplacian_scalar(chart: MetricChart, f: Expr, point: Sequence[float]) -> float:
    """Return the Laplace-Beltrami operator applied to f at a point."""
    jets = CurvatureJets(chart, [point], order=2)
    return float(jets.algebra.value(jets.laplacian(jets.scalar(f)))[0])


def q_curvature(chart: MetricChart, point: Sequence[float]) -> float:
    """Return Q-curvature at a point."""
    if chart.dim < 3:  # noqa: PLR2004
        msg = f"Q-curvature needs dimension at least 3, got {chart.dim}"
        raise PreconditionError(msg)
    jets = CurvatureJets(chart, [point], order=4)
    return float(jets.algebra.value(jets.q)[0])
