from fractions import Fraction

import pytest
from faker import Faker

from mex.qcurvature.exceptions import PreconditionError
from mex.qcurvature.simplexlab import (
    I_from_eigenvalues,
    SimplexPoint,
    critical_points,
    dimension_constants,
    equality_family,
    f_n_eval,
    lattice_points,
    simplex_min_search,
)


def test_dimension_constants_in_dimension_six() -> None:
    constants = dimension_constants(6)
    assert constants.a == Fraction(1, 10)
    assert constants.b == Fraction(1, 8)
    assert constants.c == Fraction(19, 400)
    assert constants.l == Fraction(11, 300)
    assert constants.d == Fraction(11, 300)
    assert constants.beta == Fraction(11, 45)
    assert constants.gradient_coefficient == Fraction(-1, 50)


@pytest.mark.parametrize("n", range(6, 21))
def test_dimension_constant_signs(n: int) -> None:
    constants = dimension_constants(n)
    assert constants.l_matches_combination
    assert constants.l_positive
    assert constants.gradient_coefficient_negative


def test_dimension_constants_need_three_dimensions() -> None:
    with pytest.raises(PreconditionError, match="n >= 3"):
        dimension_constants(2)


@pytest.mark.parametrize(
    ("x", "expected"),
    [
        ((Fraction(1, 3),) * 3, Fraction(0)),
        ((Fraction(1, 2), Fraction(1, 2), Fraction(0)), Fraction(0)),
        ((Fraction(4, 9), Fraction(4, 9), Fraction(1, 9)), Fraction(1, 81)),
        ((Fraction(1), Fraction(0), Fraction(0)), Fraction(1)),
        ((Fraction(1, 3),) * 3 + (Fraction(0),), Fraction(0)),
    ],
    ids=["barycenter", "facet", "critical", "vertex", "facet-n4"],
)
def test_f_n_eval(x: tuple[Fraction, ...], expected: Fraction) -> None:
    assert f_n_eval(SimplexPoint(n=len(x), x=x)) == expected


@pytest.mark.parametrize(
    ("n", "x", "message"),
    [
        (3, (0.5, 0.5), "expected 3 coordinates"),
        (3, (1.5, -0.5, 0.0), "must be nonnegative"),
        (3, (0.5, 0.5, 0.5), "sum to 1.5"),
    ],
    ids=["length", "negative", "sum"],
)
def test_simplex_point_validation(
    n: int, x: tuple[float, ...], message: str
) -> None:
    with pytest.raises(ValueError, match=message):
        SimplexPoint(n=n, x=x)


def test_ricci_term_vanishes_on_einstein_spectra() -> None:
    assert I_from_eigenvalues(4, [Fraction(3)] * 4) == 0
    assert I_from_eigenvalues(3, [Fraction(1), Fraction(0), Fraction(0)]) == 1
    assert I_from_eigenvalues(3, [2.0, 0.0, 0.0]) == pytest.approx(8.0)
    with pytest.raises(PreconditionError, match="n > 2"):
        I_from_eigenvalues(2, [1.0, 1.0])


def test_lattice_points_are_sorted_orbits() -> None:
    assert sorted(lattice_points(3, 4)) == [
        (2, 1, 1),
        (2, 2, 0),
        (3, 1, 0),
        (4, 0, 0),
    ]


def test_equality_family() -> None:
    assert equality_family([0.25, 0.25, 0.25, 0.25], 0.01) == "equal"
    assert equality_family([0.0, 0.5, 0.5], 0.01) == "one-zero"
    assert equality_family([0.7, 0.2, 0.1], 0.01) is None


def test_search_finds_both_equality_families() -> None:
    search = simplex_min_search(3, 30)
    assert search.nonnegative
    assert search.lattice_min == 0
    assert sorted(search.zero_points) == [
        (Fraction(1, 3), Fraction(1, 3), Fraction(1, 3)),
        (Fraction(1, 2), Fraction(1, 2), Fraction(0)),
    ]
    assert search.zeros_in_families
    assert search.refined_value == pytest.approx(0.0, abs=1e-12)
    assert search.refined_family in ("equal", "one-zero")


@pytest.mark.parametrize("n", range(3, 9))
def test_search_is_nonnegative_at_depth_forty(n: int) -> None:
    search = simplex_min_search(n, 40)
    assert search.lattice_min >= 0
    assert search.nonnegative
    assert search.zeros_in_families


@pytest.mark.parametrize(
    ("n", "depth", "message"),
    [(13, 40, "got 13"), (3, 10, "at least 20")],
    ids=["dimension", "depth"],
)
def test_search_preconditions(n: int, depth: int, message: str) -> None:
    with pytest.raises(PreconditionError, match=message):
        simplex_min_search(n, depth)


def test_critical_points_in_dimension_three() -> None:
    points = critical_points(3)
    by_alpha = {point.alpha: point for point in points}
    assert by_alpha[Fraction(1, 3)].classification == "interior-min"
    assert by_alpha[Fraction(1, 3)].value == 0
    assert by_alpha[Fraction(4, 9)].value == Fraction(1, 81)
    assert by_alpha[Fraction(4, 9)].classification == "interior-other"
    assert by_alpha[Fraction(1, 9)].point == (
        Fraction(1, 9),
        Fraction(4, 9),
        Fraction(4, 9),
    )
    for point in points:
        assert sum(point.point) == 1
        assert f_n_eval(SimplexPoint(n=3, x=point.point)) == point.value


@pytest.mark.parametrize(
    ("n", "alpha", "other", "value"),
    [
        (3, Fraction(1, 9), Fraction(4, 9), Fraction(1, 81)),
        (6, Fraction(1, 18), Fraction(17, 90), Fraction(8, 2025)),
    ],
    ids=["three", "six"],
)
def test_critical_point_with_one_small_coordinate(
    n: int, alpha: Fraction, other: Fraction, value: Fraction
) -> None:
    point = next(point for point in critical_points(n) if point.m == 0)
    assert point.alpha == alpha
    assert point.point == (alpha,) + (other,) * (n - 1)
    assert point.value == value
    assert point.classification == "interior-other"
    assert f_n_eval(SimplexPoint(n=n, x=point.point)) == value


@pytest.mark.parametrize(
    ("n", "scale"),
    [(3, Fraction(2)), (5, Fraction(-1, 3)), (6, Fraction(7, 2)), (8, Fraction(0))],
    ids=["double", "negative-third", "seven-halves", "zero"],
)
def test_ricci_term_is_cubic(faker: Faker, n: int, scale: Fraction) -> None:
    lambdas = [faker.bounded_rational(2.0) for _ in range(n)]
    scaled = I_from_eigenvalues(n, [scale * value for value in lambdas])
    assert scaled == scale**3 * I_from_eigenvalues(n, lambdas)


@pytest.mark.parametrize("n", range(3, 9))
def test_ricci_term_is_nonnegative_on_random_spectra(faker: Faker, n: int) -> None:
    for _ in range(200):
        spectrum = faker.nonnegative_spectrum(n)
        assert I_from_eigenvalues(n, spectrum.tolist()) >= -1e-12
