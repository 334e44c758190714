from pathlib import Path
from typing import Any

import numpy as np
import pytest

from mex.qcurvature.exceptions import ChartError
from mex.qcurvature.expr import eval_expr, expr_params
from mex.qcurvature.specfile import (
    ImmersionSpec,
    ManifoldSpec,
    build_chart,
    build_factor,
    build_immersion,
    load_document,
    parse_params,
    parse_spec,
    require_chart,
    resolve_source,
)


def manifold_document(**overrides: Any) -> dict[str, Any]:  # noqa: ANN401
    document: dict[str, Any] = {
        "format_version": 1,
        "name": "plane",
        "coords": [
            {"name": "x", "range": [0.0, 1.0]},
            {"name": "y", "range": [0.0, 1.0]},
        ],
        "metric": [["1", "0"], ["1"]],
    }
    return document | overrides


def test_load_perturbed_torus(test_data_path: Path) -> None:
    document, digest = load_document(test_data_path / "perturbed_torus.toml")
    assert len(digest) == 64
    spec = parse_spec(document)
    assert isinstance(spec, ManifoldSpec)
    chart = build_chart(spec)
    assert chart.name == "perturbed-torus"
    assert chart.closed
    assert chart.params == {"a": 0.05}
    assert [block.axes for block in chart.blocks] == [(0,), (1, 2)]
    np.testing.assert_allclose(
        chart.metric_values([[1.0, 2.0, 3.0]])[0],
        np.exp(0.1 * np.sin(1.0)) * np.eye(3),
    )


def test_conformal_table(test_data_path: Path) -> None:
    document, _ = load_document(test_data_path / "perturbed_torus.toml")
    spec = parse_spec(document)
    assert isinstance(spec, ManifoldSpec)
    factor = build_factor(spec)
    assert factor is not None
    assert factor.convention == "exponential"
    assert expr_params(factor.expr) == frozenset()
    assert eval_expr(factor.expr, [1.0, 0.0, 2.0]) == pytest.approx(0.05)
    assert build_factor(ManifoldSpec.model_validate(manifold_document())) is None


def test_load_immersion(test_data_path: Path) -> None:
    document, _ = load_document(test_data_path / "unit_circle.toml")
    spec = parse_spec(document)
    assert isinstance(spec, ImmersionSpec)
    immersion = build_immersion(spec)
    assert immersion.name == "circle-in-plane"
    assert immersion.dim == 2
    assert immersion.ambient_curvature == 0


def test_unknown_keys_are_rejected(test_data_path: Path) -> None:
    document, _ = load_document(test_data_path / "unknown_key.toml")
    with pytest.raises(ChartError, match="invalid spec fields signature"):
        parse_spec(document)


def test_broken_toml(tmp_path: Path) -> None:
    path = tmp_path / "broken.toml"
    path.write_text("name = [", encoding="utf-8")
    with pytest.raises(ChartError, match="cannot parse spec file"):
        load_document(path)


@pytest.mark.parametrize(
    ("overrides", "message"),
    [
        ({"format_version": 2}, "format_version must be 1, got 2"),
        ({"dim": 3}, "dim is 3 but 2 coords are given"),
        ({"metric": [["1", "0"], ["1", "0"]]}, "lengths \\[2, 1\\], got \\[2, 2\\]"),
        (
            {"coords": [{"name": "x", "range": [0, 1], "period": [0, 1]}] * 2},
            "exactly one of period and range",
        ),
        (
            {"coords": [{"name": "x", "period": [0, 1], "polar": True}] * 2},
            "needs a range",
        ),
        ({"conformal": {"f": "x", "u": "y"}}, "exactly one of f and u"),
        ({"conformal": {"u": "1 + x"}}, "scalar or paneitz convention"),
        (
            {"conformal": {"f": "x", "convention": "scalar"}},
            "only takes the exponential convention",
        ),
    ],
    ids=[
        "version",
        "dim",
        "triangle",
        "period-and-range",
        "polar-period",
        "f-and-u",
        "u-convention",
        "f-convention",
    ],
)
def test_invalid_documents(overrides: dict[str, Any], message: str) -> None:
    with pytest.raises(ChartError, match=message):
        parse_spec(manifold_document(**overrides))


@pytest.mark.parametrize(
    ("overrides", "message"),
    [
        ({"metric": [["1", "0"], ["z"]]}, "metric\\[1\\]\\[0\\]: unknown identifier 'z'"),
        ({"metric": [["1", "0"], ["-1"]]}, "not positive definite"),
        ({"blocks": [{"coords": ["w"]}]}, "blocks\\[0\\]: unknown coords \\['w'\\]"),
    ],
    ids=["identifier", "indefinite", "block"],
)
def test_invalid_charts(overrides: dict[str, Any], message: str) -> None:
    spec = parse_spec(manifold_document(**overrides))
    assert isinstance(spec, ManifoldSpec)
    with pytest.raises(ChartError, match=message):
        build_chart(spec)


def test_parse_params() -> None:
    assert parse_params(["r=2", " k = 3 "]) == {"r": 2.0, "k": 3.0}
    assert parse_params(None) == {}
    with pytest.raises(ChartError, match="expects key=value"):
        parse_params(["r"])
    with pytest.raises(ChartError, match="needs a number"):
        parse_params(["r=big"])


def test_resolve_source(test_data_path: Path) -> None:
    source = resolve_source(None, "sphere", 3, ["r=2"])
    assert source.description == {
        "catalog": "sphere",
        "dim": 3,
        "params": {"r": 2.0},
        "closed": False,
    }
    assert require_chart(source).name == "sphere(n=3)"
    from_file = resolve_source(test_data_path / "unit_circle.toml", None, 3, None)
    assert from_file.description["spec"] == "unit_circle.toml"
    assert from_file.immersion is not None
    assert from_file.dim == 2
    with pytest.raises(ChartError, match="needs a manifold"):
        require_chart(from_file)
    with pytest.raises(ChartError, match="exactly one of --spec and --catalog"):
        resolve_source(None, None, 3, None)
