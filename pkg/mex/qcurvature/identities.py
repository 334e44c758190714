"""Pointwise checks of the curvature identities behind the rigidity arguments.

Left-hand sides differentiate scalar or tensor fields directly, right-hand sides
are assembled from curvature pieces, so the two sides share no intermediate sum.
"""

from collections.abc import Callable
from typing import Final

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mex.common.logging import logger
from mex.qcurvature.constants import (
    DEFAULT_JET_ORDER,
    DEFAULT_RELATIVE_TOLERANCE,
    DEFAULT_RICCI_SIGN_TOLERANCE,
    DEFAULT_WEYL_TOLERANCE,
)
from mex.qcurvature.exceptions import PreconditionError
from mex.qcurvature.expr import Expr
from mex.qcurvature.geometry import (
    CurvatureJets,
    MetricChart,
    full_norm2,
    sample_fields,
)
from mex.qcurvature.helpers import residual_report, slack_report
from mex.qcurvature.models import IdentityReport, InequalityReport
from mex.qcurvature.tensor import generalized_eigen
from mex.qcurvature.types import Lemma21Variant

Arrays = dict[str, NDArray[np.float64]]
Sides = tuple[NDArray[np.float64], list[NDArray[np.float64]]]

# fourth metric derivatives suffice for every identity except Bochner on R
IDENTITY_JET_ORDER: Final = 4


def _require_dim(chart: MetricChart, minimum: int, identity: str) -> None:
    if chart.dim < minimum:
        msg = f"{identity} needs dimension at least {minimum}, got {chart.dim}"
        raise PreconditionError(msg)


def _check(
    identity: str,
    chart: MetricChart,
    points: ArrayLike,
    sides: Callable[[CurvatureJets], Sides],
    tolerance: float,
    order: int = IDENTITY_JET_ORDER,
) -> IdentityReport:
    def extract(jets: CurvatureJets) -> Arrays:
        lhs, terms = sides(jets)
        return {"lhs": lhs} | {f"term{k}": term for k, term in enumerate(terms)}

    values = sample_fields(
        chart, points, extract, order, description=f"checking {identity}"
    )
    terms = [values[f"term{k}"] for k in range(len(values) - 1)]
    report = residual_report(identity, values["lhs"], terms, tolerance)
    logger.info(
        f"{identity}: max relative residual {report.max_rel_residual:.3e} "
        f"over {report.points} points"
    )
    return report


def _norm2(jets: CurvatureJets, tensor: NDArray[np.float64]) -> NDArray[np.float64]:
    return full_norm2(tensor, jets.algebra.value(jets.inverse_metric))


def _ricci_cubed(ricci_mixed: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.einsum("bij,bjk,bki->b", ricci_mixed, ricci_mixed, ricci_mixed)


def _weyl_small(jets: CurvatureJets, which: NDArray[np.float64]) -> bool:
    riemann = jets.algebra.value(jets.riemann)
    scale = max(1.0, float(np.max(np.abs(riemann), initial=0.0)))
    return bool(np.max(np.abs(which), initial=0.0) <= DEFAULT_WEYL_TOLERANCE * scale)


def _lemma21_sides(variant: Lemma21Variant) -> Callable[[CurvatureJets], Sides]:
    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        n = jets.dim
        lhs = value(jets.laplacian(jets.ricci_norm2))
        ricci_up = value(jets.ricci_up)
        scalar = value(jets.scalar_curvature)
        mixed = value(jets.ricci_mixed)
        norm2 = value(jets.ricci_norm2)
        cubed = _ricci_cubed(mixed)
        terms = [
            2 * _norm2(jets, value(jets.nabla_ricci)),
            (n - 2)
            / (n - 1)
            * np.einsum("bij,bij->b", ricci_up, value(jets.hessian_scalar)),
            scalar * value(jets.laplacian_scalar) / (n - 1),
        ]
        twice_i = (
            2
            * (
                n * cubed
                - (2 * n - 1) / (n - 1) * scalar * norm2
                + scalar**3 / (n - 1)
            )
            / (n - 2)
        )
        match variant:
            case "general":
                weyl_ricci = value(jets.weyl_ricci)
                terms += [
                    twice_i,
                    -4 * np.einsum("bij,bij->b", weyl_ricci, ricci_up),
                    2 * (n - 2) * np.einsum("bij,bij->b", value(jets.bach), ricci_up),
                ]
            case "lcf":
                if not _weyl_small(jets, value(jets.weyl)):
                    msg = "the lcf variant needs a vanishing Weyl tensor"
                    raise PreconditionError(msg)
                terms.append(twice_i)
            case "div_weyl_free":
                if not _weyl_small(jets, value(jets.div2_weyl)):
                    msg = "the div_weyl_free variant needs a vanishing delta^2 W"
                    raise PreconditionError(msg)
                riemann_ricci = np.einsum(
                    "bikjl,bij,bkl->b", value(jets.riemann), ricci_up, ricci_up
                )
                terms += [2 * cubed, -2 * riemann_ricci]
        return lhs, terms

    return sides


def verify_lemma21(
    chart: MetricChart,
    points: ArrayLike,
    variant: Lemma21Variant = "general",
    tolerance: float = DEFAULT_RELATIVE_TOLERANCE,
) -> IdentityReport:
    """Check the Laplacian of |Ric|^2 against its curvature expansion.

    The general form carries the Weyl and Bach contributions, the ``lcf`` form
    drops them on locally conformally flat charts, and ``div_weyl_free`` rewrites
    them through the full Riemann tensor when the double divergence of W vanishes.
    """
    _require_dim(chart, 4, "the Laplacian of |Ric|^2")
    return _check(
        f"lemma21:{variant}", chart, points, _lemma21_sides(variant), tolerance
    )


def verify_q_curvature(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Recompute Q = -Lap R/(2(n-1)) - 2|Ric|^2/(n-2)^2 + c_n R^2 from its pieces.

    Here c_n = (n^3 - 4n^2 + 16n - 16)/(8(n-1)^2(n-2)^2). The right-hand side
    contracts Ric with two inverse metrics itself and takes the Laplacian of the
    scalar curvature jet, so it shares only R and Ric with the curvature bundle.
    """
    _require_dim(chart, 3, "Q-curvature")

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        n = jets.dim
        scalar = value(jets.scalar_curvature)
        ricci = value(jets.ricci)
        inverse = value(jets.inverse_metric)
        norm2 = np.einsum("bik,bjl,bij,bkl->b", inverse, inverse, ricci, ricci)
        laplacian = value(jets.laplacian(jets.scalar_curvature))
        return value(jets.q), [
            -laplacian / (2 * (n - 1)),
            -2 * norm2 / (n - 2) ** 2,
            (n**3 - 4 * n**2 + 16 * n - 16)
            * scalar**2
            / (8 * (n - 1) ** 2 * (n - 2) ** 2),
        ]

    return _check("q_curvature", chart, points, sides, tolerance)


def verify_schouten_div(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check that the divergence of the Schouten tensor is dR / (2(n-1))."""
    _require_dim(chart, 3, "the Schouten divergence")

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        divergence = jets.algebra.contract(
            "kb,ikb->i", jets.inverse_metric, jets.nabla_schouten
        )
        lhs = value(divergence)
        return lhs, [value(jets.grad_scalar) / (2 * (jets.dim - 1))]

    return _check("schouten_div", chart, points, sides, tolerance)


def verify_div_weyl(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check W_ikjl,l = (n-3)(A_ij,k - A_jk,i)."""
    _require_dim(chart, 4, "the Weyl divergence")

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        nabla = value(jets.nabla_schouten)
        factor = jets.dim - 3
        return np.einsum("bikj->bijk", value(jets.div_weyl)), [
            factor * nabla,
            -factor * np.einsum("bjki->bijk", nabla),
        ]

    return _check("div_weyl", chart, points, sides, tolerance)


def verify_commutation(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check the Ricci identity A_jk,ik = A_jk,ki - (R_ikjl A_lk - R_il A_jl)."""
    _require_dim(chart, 3, "the Schouten commutation formula")

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        inverse = value(jets.inverse_metric)
        second = value(jets.covariant_derivative(jets.nabla_schouten))
        schouten = value(jets.schouten)
        schouten_up = np.einsum("bla,bkc,bac->blk", inverse, inverse, schouten)
        return np.einsum("bkc,bjkic->bij", inverse, second), [
            np.einsum("bkc,bjkci->bij", inverse, second),
            -np.einsum("bikjl,blk->bij", value(jets.riemann), schouten_up),
            np.einsum("bli,bjl->bij", value(jets.ricci_mixed), schouten),
        ]

    return _check("commutation", chart, points, sides, tolerance)


def verify_bochner(
    chart: MetricChart,
    points: ArrayLike,
    u: Expr | None = None,
    tolerance: float = DEFAULT_RELATIVE_TOLERANCE,
) -> IdentityReport:
    """Check the Bochner formula for a test scalar, by default the scalar curvature."""

    def sides(jets: CurvatureJets) -> Sides:
        algebra, value = jets.algebra, jets.algebra.value
        field = jets.scalar_curvature if u is None else jets.scalar(u)
        gradient = algebra.gradient(field)
        norm2 = algebra.contract(
            "ij,ij->",
            jets.inverse_metric,
            algebra.contract("i,j->ij", gradient, gradient),
        )
        hessian = jets.hessian(field)
        laplacian = jets.trace(hessian)
        du = value(gradient)
        raised = np.einsum("bij,bj->bi", value(jets.inverse_metric), du)
        return 0.5 * value(jets.laplacian(norm2)), [
            _norm2(jets, value(hessian)),
            np.einsum("bi,bi->b", raised, value(algebra.gradient(laplacian))),
            np.einsum("bij,bi,bj->b", value(jets.ricci_up), du, du),
        ]

    name = "bochner" if u is None else f"bochner:{u}"
    order = DEFAULT_JET_ORDER if u is None else IDENTITY_JET_ORDER
    return _check(name, chart, points, sides, tolerance, order)


def verify_eigen_identity(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check tr Ric^3 - R_ijkl R_ik R_jl = sum R_ijij (l_i - l_j)^2 / 2.

    Both sides are evaluated in a Ricci eigenframe.
    """

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        ricci = value(jets.ricci)
        riemann = value(jets.riemann)
        ricci_up = value(jets.ricci_up)
        lambdas, frame = generalized_eigen(ricci, value(jets.metric))
        sectional = np.einsum(
            "bijkl,bia,bjc,bka,blc->bac", riemann, frame, frame, frame, frame
        )
        gaps = (lambdas[:, :, None] - lambdas[:, None, :]) ** 2
        return _ricci_cubed(value(jets.ricci_mixed)), [
            np.einsum("bijkl,bik,bjl->b", riemann, ricci_up, ricci_up),
            0.5 * np.einsum("bac,bac->b", sectional, gaps),
        ]

    return _check("eigen_identity", chart, points, sides, tolerance, order=2)


def verify_laplacian_schouten(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check the expansion of the rough Laplacian of the Schouten tensor."""
    _require_dim(chart, 4, "the Schouten Laplacian")

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        n = jets.dim
        inverse = value(jets.inverse_metric)
        schouten = value(jets.schouten)
        schouten_up = np.einsum("bla,bkc,bac->blk", inverse, inverse, schouten)
        second = jets.covariant_derivative(jets.nabla_schouten)
        laplacian = jets.algebra.contract("ab,ijab->ij", jets.inverse_metric, second)
        return value(laplacian), [
            value(jets.div2_weyl) / (n - 3),
            value(jets.hessian_scalar) / (2 * (n - 1)),
            -np.einsum("bikjl,blk->bij", value(jets.riemann), schouten_up),
            np.einsum("bli,bjl->bij", value(jets.ricci_mixed), schouten),
        ]

    return _check("laplacian_schouten", chart, points, sides, tolerance)


def verify_ricci_decomposition(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check R_ikjl R^kl against its Weyl and Ricci parts."""
    _require_dim(chart, 3, "the Ricci decomposition")

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        n = jets.dim
        scalar = value(jets.scalar_curvature)[:, None, None]
        norm2 = value(jets.ricci_norm2)[:, None, None]
        ricci = value(jets.ricci)
        square = np.einsum("bik,bkj->bij", ricci, value(jets.ricci_mixed))
        return np.einsum("bikjl,bkl->bij", value(jets.riemann), value(jets.ricci_up)), [
            n * scalar * value(jets.traceless_ricci) / ((n - 1) * (n - 2)),
            norm2 * value(jets.metric) / (n - 2),
            -2 * square / (n - 2),
            value(jets.weyl_ricci),
        ]

    return _check("ricci_decomposition", chart, points, sides, tolerance, order=2)


def verify_laplacian_ricci(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> IdentityReport:
    """Check the expansion of the rough Laplacian of the Ricci tensor."""
    _require_dim(chart, 4, "the Ricci Laplacian")

    def sides(jets: CurvatureJets) -> Sides:
        value = jets.algebra.value
        n = jets.dim
        metric = value(jets.metric)
        ricci = value(jets.ricci)
        scalar = value(jets.scalar_curvature)[:, None, None]
        norm2 = value(jets.ricci_norm2)[:, None, None]
        square = np.einsum("bik,bkj->bij", ricci, value(jets.ricci_mixed))
        second = jets.covariant_derivative(jets.nabla_ricci)
        laplacian = jets.algebra.contract("ab,ijab->ij", jets.inverse_metric, second)
        return value(laplacian), [
            (n - 2) * value(jets.bach),
            -2 * value(jets.weyl_ricci),
            (n - 2) / (2 * (n - 1)) * value(jets.hessian_scalar),
            value(jets.laplacian_scalar)[:, None, None] * metric / (2 * (n - 1)),
            scalar**2 * metric / ((n - 1) * (n - 2)),
            -n * scalar * ricci / ((n - 1) * (n - 2)),
            -norm2 * metric / (n - 2),
            n * square / (n - 2),
        ]

    return _check("laplacian_ricci", chart, points, sides, tolerance)


def verify_pointwise_bounds(
    chart: MetricChart, points: ArrayLike, tolerance: float = DEFAULT_RELATIVE_TOLERANCE
) -> list[InequalityReport]:
    """Evaluate |nabla Ric|^2 >= |nabla R|^2 / n and the Ricci Laplacian lower bound.

    The Laplacian bound holds on locally conformally flat charts with nonnegative
    Ricci curvature in dimension above three, so it is only applied at points
    where the Weyl tensor vanishes and the smallest Ricci eigenvalue is not
    below -1e-10.
    """
    n = chart.dim

    def extract(jets: CurvatureJets) -> Arrays:
        value = jets.algebra.value
        nabla_norm2 = _norm2(jets, value(jets.nabla_ricci))
        grad = value(jets.grad_scalar)
        grad_norm2 = np.einsum("bij,bi,bj->b", value(jets.inverse_metric), grad, grad)
        lambdas, _ = generalized_eigen(value(jets.ricci), value(jets.metric))
        # curvature cubed carries the same units as both sides
        cubic = np.abs(value(jets.scalar_curvature) * value(jets.ricci_norm2))
        lhs = value(jets.laplacian(jets.ricci_norm2))
        bound = [
            2 * nabla_norm2,
            (n - 2)
            / (n - 1)
            * np.einsum(
                "bij,bij->b", value(jets.ricci_up), value(jets.hessian_scalar)
            ),
            value(jets.scalar_curvature) * value(jets.laplacian_scalar) / (n - 1),
        ]
        if n > 3:  # noqa: PLR2004
            weyl = np.abs(value(jets.weyl)).reshape(len(lhs), -1).max(axis=1)
            riemann = np.abs(value(jets.riemann)).reshape(len(lhs), -1).max(axis=1)
            conformally_flat = weyl <= DEFAULT_WEYL_TOLERANCE * np.maximum(1.0, riemann)
        else:
            conformally_flat = np.zeros(len(lhs), dtype=bool)
        return {
            "gradient_slack": nabla_norm2 - grad_norm2 / n,
            "gradient_scale": np.max([nabla_norm2, grad_norm2 / n, cubic], axis=0),
            "laplacian_slack": lhs - sum(bound),
            "laplacian_scale": np.max(np.abs([lhs, *bound, cubic]), axis=0),
            "applicable": (
                conformally_flat & (lambdas[:, 0] >= -DEFAULT_RICCI_SIGN_TOLERANCE)
            ).astype(np.float64),
        }

    values = sample_fields(
        chart, points, extract, IDENTITY_JET_ORDER, "checking bounds"
    )
    applicable = values["applicable"] > 0
    skipped = int((~applicable).sum())
    if skipped:
        logger.warning(
            f"ricci laplacian bound skipped at {skipped} points without "
            "vanishing Weyl tensor and nonnegative Ricci curvature"
        )
    return [
        slack_report(
            "nabla_ricci_bound",
            values["gradient_slack"],
            values["gradient_scale"],
            tolerance=tolerance,
        ),
        slack_report(
            "ricci_laplacian_bound",
            values["laplacian_slack"],
            values["laplacian_scale"],
            applicable,
            tolerance,
        ),
    ]


IdentityCheck = Callable[[MetricChart, ArrayLike, float], IdentityReport]

IDENTITY_CHECKS: Final[dict[str, IdentityCheck]] = {
    "lemma21": lambda chart, points, tolerance: verify_lemma21(
        chart, points, "general", tolerance
    ),
    "lemma21_lcf": lambda chart, points, tolerance: verify_lemma21(
        chart, points, "lcf", tolerance
    ),
    "lemma21_div_weyl_free": lambda chart, points, tolerance: verify_lemma21(
        chart, points, "div_weyl_free", tolerance
    ),
    "schouten_div": verify_schouten_div,
    "div_weyl": verify_div_weyl,
    "commutation": verify_commutation,
    "bochner": lambda chart, points, tolerance: verify_bochner(
        chart, points, None, tolerance
    ),
    "eigen_identity": verify_eigen_identity,
    "laplacian_schouten": verify_laplacian_schouten,
    "ricci_decomposition": verify_ricci_decomposition,
    "laplacian_ricci": verify_laplacian_ricci,
    "q_curvature": verify_q_curvature,
}
