from typing import Any

import numpy as np
import pytest

from mex.qcurvature.catalog import (
    CLOSED_CHARTS,
    builtin_immersion,
    builtin_metric,
    catalog_names,
    is_einstein,
    random_lcf_metric,
    sphere_angles,
)
from mex.qcurvature.exceptions import ChartError, PreconditionError
from mex.qcurvature.geometry import CurvatureJets, curvature_bundle, q_curvature
from mex.qcurvature.helpers import sample_points


@pytest.mark.parametrize(
    ("name", "n", "params", "closed"),
    [
        ("sphere", 4, {"r": 2.0}, False),
        ("sphere", 3, {}, True),
        ("hyperbolic", 3, {}, False),
        ("cylinder", 4, {}, False),
        ("circle_times_sphere", 3, {"r": 0.5}, True),
        ("flat_torus", 3, {}, True),
        ("product_spheres", 4, {"k": 2}, False),
        ("euclidean", 2, {}, False),
    ],
    ids=[
        "sphere",
        "closed-sphere",
        "hyperbolic",
        "cylinder",
        "circle-times-sphere",
        "flat-torus",
        "product-spheres",
        "euclidean",
    ],
)
def test_expected_invariants_match_the_jets(
    name: str, n: int, params: dict[str, Any], closed: bool
) -> None:
    entry = builtin_metric(name, n, params, closed=closed)
    assert entry.expected is not None
    (point,) = sample_points(entry.chart, 1, seed=3)
    bundle = curvature_bundle(entry.chart, point)
    assert bundle.scalar == pytest.approx(entry.expected.scalar, abs=1e-8)
    assert bundle.ricci_norm2 == pytest.approx(entry.expected.ricci_norm2, abs=1e-8)
    eigenvalues = np.linalg.eigvals(np.linalg.solve(bundle.metric, bundle.ricci))
    np.testing.assert_allclose(
        np.sort(eigenvalues.real), entry.expected.ricci_eigenvalues, atol=1e-8
    )
    if entry.expected.q is None:
        assert bundle.q is None
    else:
        assert bundle.q == pytest.approx(entry.expected.q, abs=1e-7)
    if entry.expected.weyl_zero and n >= 3:
        assert bundle.weyl_norm2 == pytest.approx(0.0, abs=1e-8)


def test_six_sphere_and_cylinder() -> None:
    sphere = builtin_metric("sphere", 6)
    cylinder = builtin_metric("cylinder", 6)
    assert sphere.expected is not None
    assert cylinder.expected is not None
    assert sphere.expected.scalar == pytest.approx(30.0)
    assert sphere.expected.q == pytest.approx(24.0)
    assert cylinder.expected.scalar == pytest.approx(20.0)
    assert cylinder.expected.q == pytest.approx(9.0)
    assert q_curvature(sphere.chart, [0.1] * 6) == pytest.approx(24.0, rel=1e-7)


def test_product_of_spheres_is_einstein_but_not_conformally_flat() -> None:
    entry = builtin_metric("product_spheres", 4, {"k": 2})
    assert entry.expected is not None
    assert entry.expected.einstein
    assert not entry.expected.weyl_zero
    bundle = curvature_bundle(entry.chart, [0.1, 0.2, -0.1, 0.3])
    assert bundle.weyl_norm2 is not None
    assert bundle.weyl_norm2 > 1.0


def test_chart_names_and_blocks() -> None:
    entry = builtin_metric("cylinder", 3, closed=True)
    assert entry.chart.name == "cylinder-closed(n=3)"
    assert entry.chart.closed
    assert [block.axes for block in entry.chart.blocks] == [(0,), (1, 2)]
    assert entry.provenance["scalar"].startswith("(n-1)(n-2)")
    assert builtin_metric("sphere", 3).chart.name == "sphere(n=3)"


@pytest.mark.parametrize(
    ("name", "n", "params", "closed", "message"),
    [
        ("torus", 3, {}, False, "unknown catalog name 'torus'"),
        ("sphere", 3, {"R": 1.0}, False, "has no parameter 'R'"),
        ("sphere", 3, {"r": -1.0}, False, "must be positive"),
        ("cylinder", 2, {}, False, "needs dimension at least 3"),
        ("euclidean", 3, {}, True, "has no closed chart"),
        ("product_spheres", 4, {"k": 4}, False, "integer in \\[1, 3\\]"),
    ],
    ids=[
        "unknown-name",
        "unknown-param",
        "negative-radius",
        "low-dimension",
        "no-closed-chart",
        "bad-split",
    ],
)
def test_invalid_catalog_requests(
    name: str, n: int, params: dict[str, Any], closed: bool, message: str
) -> None:
    with pytest.raises(ChartError, match=message):
        builtin_metric(name, n, params, closed=closed)


def test_catalog_names() -> None:
    names = catalog_names()
    assert len(names) == 10
    closed = {entry.name for entry in names if entry.kind == "metric" and entry.closed}
    assert closed == CLOSED_CHARTS
    assert {entry.name for entry in names if entry.kind == "immersion"} == {
        "round_sphere_in_rn1",
        "clifford_in_sn1",
        "geodesic_sphere_in_hn1",
    }


def test_sphere_angles() -> None:
    axes, omega, metric = sphere_angles(2, 1, "u")
    assert [axis.name for axis in axes] == ["utheta1", "uphi"]
    assert axes[0].polar
    assert axes[1].periodic
    assert len(omega) == 3
    assert len(metric) == 2


def test_random_lcf_metric_is_reproducible_and_conformally_flat() -> None:
    first = random_lcf_metric(4, seed=11, amplitude=0.1)
    second = random_lcf_metric(4, seed=11, amplitude=0.1)
    assert first.metric == second.metric
    assert first.metric != random_lcf_metric(4, seed=12, amplitude=0.1).metric
    jets = CurvatureJets(first, [[0.4, 1.3, 2.2, 5.0]], order=2)
    weyl = jets.algebra.value(jets.weyl)
    riemann = jets.algebra.value(jets.riemann)
    assert np.max(np.abs(weyl)) <= 1e-9 * max(1.0, np.max(np.abs(riemann)))


@pytest.mark.parametrize(
    ("n", "amplitude", "message"),
    [(2, 0.1, "at least 3"), (3, 0.5, "amplitude must lie in")],
    ids=["low-dimension", "large-amplitude"],
)
def test_random_lcf_preconditions(n: int, amplitude: float, message: str) -> None:
    with pytest.raises(PreconditionError, match=message):
        random_lcf_metric(n, seed=0, amplitude=amplitude)


def test_builtin_immersions() -> None:
    sphere = builtin_immersion("round_sphere_in_rn1", 3, {"r": 2.0})
    assert sphere.dim == 3
    assert sphere.ambient_curvature == 0
    clifford = builtin_immersion("clifford_in_sn1", 4, {"m": 2})
    assert len(clifford.position) == 6
    hyperbolic = builtin_immersion("geodesic_sphere_in_hn1", 2)
    assert hyperbolic.ambient_signature.tolist() == [-1.0, 1.0, 1.0, 1.0]
    with pytest.raises(ChartError, match="integer in \\[1, 3\\]"):
        builtin_immersion("clifford_in_sn1", 4, {"m": 0})


def test_is_einstein() -> None:
    assert is_einstein([2.0, 2.0, 2.0])
    assert not is_einstein([0.0, 1.0, 1.0])
