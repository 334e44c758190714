from collections.abc import Sequence
from fractions import Fraction

import numpy as np
from faker.providers import BaseProvider
from numpy.typing import NDArray

from mex.qcurvature.constants import DEFAULT_PROBE_FRACTION
from mex.qcurvature.expr import Add, Call, Const, Coord, Div, Expr, Mul, Neg, Pow
from mex.qcurvature.geometry import CoordinateAxis


class GeometryProvider(BaseProvider):
    """Faker provider for random coefficients, points and spectra."""

    def bounded_rational(self, amplitude: float) -> Fraction:
        """Return a six-decimal rational drawn uniformly from +-amplitude."""
        value = self.generator.random.uniform(-amplitude, amplitude)
        bound = Fraction(repr(amplitude))
        return max(-bound, min(bound, Fraction(f"{value:.6f}")))

    def lcf_coefficients(self, count: int, amplitude: float) -> list[Fraction]:
        """Return coefficients for a random trigonometric conformal exponent."""
        return [self.bounded_rational(amplitude) for _ in range(count)]

    def interior_points(
        self, axes: Sequence[CoordinateAxis], count: int
    ) -> NDArray[np.float64]:
        """Return points drawn uniformly from the central part of each axis range."""
        half = DEFAULT_PROBE_FRACTION / 2
        return np.array(
            [
                [
                    self.generator.random.uniform(
                        axis.lower + axis.width * (0.5 - half),
                        axis.lower + axis.width * (0.5 + half),
                    )
                    for axis in axes
                ]
                for _ in range(count)
            ],
            dtype=np.float64,
        ).reshape(count, len(axes))

    def nonnegative_spectrum(self, n: int) -> NDArray[np.float64]:
        """Return n nonnegative numbers summing to one."""
        values = np.array([self.generator.random.expovariate(1.0) for _ in range(n)])
        return values / values.sum()

    def principal_curvatures(self, n: int, low: float, high: float) -> list[float]:
        """Return n curvatures drawn uniformly from [low, high]."""
        return [self.generator.random.uniform(low, high) for _ in range(n)]

    def expression(self, coords: Sequence[str], depth: int) -> Expr:
        """Return an unsimplified expression tree that is smooth everywhere.

        Denominators stay at least one and exponentials only see bounded
        arguments, so the tree evaluates and differentiates at every point.
        """
        random = self.generator.random
        if depth <= 0 or random.random() < 0.2:  # noqa: PLR2004
            if random.random() < 0.6:  # noqa: PLR2004
                index = random.randrange(len(coords))
                return Coord(index, coords[index])
            return Const(Fraction(random.randint(-4, 4), random.randint(1, 3)))
        left = self.expression(coords, depth - 1)
        kind = random.choice(
            ["add", "mul", "neg", "pow", "trig", "exp", "quotient", "zero", "one"]
        )
        if kind == "add":
            return Add(left, self.expression(coords, depth - 1))
        if kind == "mul":
            return Mul(left, self.expression(coords, depth - 1))
        if kind == "neg":
            return Neg(left)
        if kind == "pow":
            return Pow(left, Fraction(random.randint(2, 3)))
        if kind == "trig":
            return Call(random.choice(["sin", "cos"]), left)
        if kind == "exp":
            return Call("exp", Call("sin", left))
        if kind == "quotient":
            bump = Pow(Call("cos", self.expression(coords, depth - 1)), Fraction(2))
            return Div(left, Add(Const(Fraction(1)), bump))
        if kind == "zero":
            return Add(Mul(Const(Fraction(0)), left), Coord(0, coords[0]))
        return Mul(Const(Fraction(1)), left)
