import json
import math

import numpy as np
import pytest
from faker import Faker

from mex.qcurvature.geometry import MetricChart
from mex.qcurvature.helpers import (
    create_faker,
    print_json,
    residual_report,
    sample_points,
    slack_report,
    to_json,
)
from mex.qcurvature.models import IdentityReport


def test_faker() -> None:
    faker = create_faker(42)
    assert isinstance(faker, Faker)
    assert faker.lcf_coefficients(3, 0.1) == create_faker(42).lcf_coefficients(3, 0.1)


def test_sample_points(unit_sphere: MetricChart) -> None:
    points = sample_points(unit_sphere, 5, seed=7)
    assert points.shape == (5, 4)
    assert np.all(np.abs(points) <= 0.8)
    np.testing.assert_array_equal(points, sample_points(unit_sphere, 5, seed=7))
    assert not np.array_equal(points, sample_points(unit_sphere, 5, seed=8))


@pytest.mark.parametrize(
    ("lhs", "terms", "passed", "max_rel_residual"),
    [
        ([[1.0, 2.0], [3.0, 4.0]], [[[1.0, 2.0], [3.0, 4.0]]], True, 0.0),
        ([[1.0], [2.0]], [[[0.5], [1.0]], [[0.5], [0.9]]], False, 0.05),
        ([[1e-13]], [[[0.0]]], True, 0.0),
        ([[1e-10]], [[[0.0]]], False, 1e-2),
    ],
    ids=["exact", "relative-miss", "absolute-floor", "absolute-miss"],
)
def test_residual_report(
    lhs: list[list[float]],
    terms: list[list[list[float]]],
    passed: bool,
    max_rel_residual: float,
) -> None:
    report = residual_report("example", lhs, terms, tolerance=1e-6)
    assert report.identity == "example"
    assert report.points == len(lhs)
    assert report.passed is passed
    assert report.max_rel_residual == pytest.approx(max_rel_residual)


def test_slack_report() -> None:
    report = slack_report("bound", [1.0, -1e-9, -5.0], [1.0, 1.0, 1.0], [True, True, False])
    assert report.applicable == 2
    assert report.min_slack == pytest.approx(-1e-9)
    assert report.passed
    failing = slack_report("bound", [-1.0], [1.0])
    assert not failing.passed
    empty = slack_report("bound", [-1.0], [1.0], [False])
    assert empty.min_slack is None
    assert empty.passed


def test_to_json_sorts_keys() -> None:
    report = IdentityReport(
        identity="x",
        points=1,
        max_abs_residual=0.0,
        max_rel_residual=0.0,
        scale=1.0,
        tolerance=1e-6,
        passed=True,
    )
    compact = to_json(report)
    assert compact.startswith('{"identity":"x","max_abs_residual":0.0')
    assert json.loads(to_json(report, pretty=True)) == json.loads(compact)
    assert to_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'


@pytest.mark.parametrize(
    "value",
    [0.1, 1 / 3, math.pi, 2.0**-1074, 1.7976931348623157e308, -0.0, 123456789.125],
    ids=["tenth", "third", "pi", "subnormal", "largest", "negative-zero", "exact"],
)
def test_to_json_floats_round_trip(value: float) -> None:
    text = to_json({"value": value})
    assert text == f'{{"value":{value!r}}}'
    parsed = json.loads(text)["value"]
    assert parsed == value
    assert math.copysign(1.0, parsed) == math.copysign(1.0, value)


def test_print_json(capsys: pytest.CaptureFixture[str]) -> None:
    print_json('{"a":1}')
    assert capsys.readouterr().out == '{"a":1}\n'
