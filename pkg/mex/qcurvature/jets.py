"""Truncated multivariate Taylor arithmetic.

A jet of order k at a batch of points stores, along its last axis, the Taylor
coefficients of every monomial of total degree at most k. Monomials are sorted by
degree, so the jet of order j < k is the prefix of length ``sizes[j]`` and the
order of an array is read off its last dimension.
"""

from collections.abc import Callable, Mapping, Sequence
from fractions import Fraction
from functools import cache
from math import factorial, prod

import numpy as np
from numpy.typing import NDArray

from mex.qcurvature.exceptions import ExprDomainError
from mex.qcurvature.expr import (
    Add,
    Call,
    Const,
    Coord,
    Div,
    Expr,
    Mul,
    Neg,
    Param,
    Pow,
)

Jet = NDArray[np.float64]
_RESERVED = "z"


class JetAlgebra:
    """Products, contractions and derivatives of jets in ``dim`` variables."""

    def __init__(self, dim: int, order: int) -> None:
        """Enumerate monomials and precompute product and shift tables."""
        self.dim = dim
        self.order = order
        exponents = sorted(
            (
                tuple(int(x) for x in e)
                for e in np.ndindex(*([order + 1] * dim))
                if sum(e) <= order
            ),
            key=lambda e: (sum(e), tuple(-x for x in e)),
        )
        self.exponents = np.array(exponents, dtype=np.int64).reshape(-1, dim)
        self.degrees = self.exponents.sum(axis=1)
        self.sizes = tuple(
            int(np.count_nonzero(self.degrees <= k)) for k in range(order + 1)
        )
        self._order_by_size = {size: k for k, size in enumerate(self.sizes)}
        self.factorials = np.array(
            [prod(factorial(x) for x in e) for e in exponents], dtype=np.float64
        )
        self._radix = (order + 1) ** np.arange(dim, dtype=np.int64)
        keys = self.exponents @ self._radix
        self._key_order = np.argsort(keys)
        self._sorted_keys = keys[self._key_order]
        self._products = [self._product_table(k) for k in range(order + 1)]
        self._shifts = [
            [self._shift_table(k, axis) for axis in range(dim)]
            for k in range(1, order + 1)
        ]

    def _lookup(self, exponents: NDArray[np.int64]) -> NDArray[np.int64]:
        keys = exponents @ self._radix
        return self._key_order[np.searchsorted(self._sorted_keys, keys)]

    def _product_table(
        self, order: int
    ) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
        size = self.sizes[order]
        left_parts, right_parts, target_parts = [], [], []
        for a in range(size):
            (partners,) = np.nonzero(self.degrees[:size] <= order - self.degrees[a])
            left_parts.append(np.full(partners.shape, a, dtype=np.int64))
            right_parts.append(partners)
            summed = self.exponents[a] + self.exponents[partners]
            target_parts.append(self._lookup(summed))
        left = np.concatenate(left_parts)
        right = np.concatenate(right_parts)
        targets = np.concatenate(target_parts)
        ordering = np.argsort(targets, kind="stable")
        starts = np.searchsorted(targets[ordering], np.arange(size))
        return left[ordering], right[ordering], starts

    def _shift_table(
        self, order: int, axis: int
    ) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        lower = self.exponents[: self.sizes[order - 1]]
        raised = lower.copy()
        raised[:, axis] += 1
        return self._lookup(raised), (lower[:, axis] + 1).astype(np.float64)

    def order_of(self, jet: Jet) -> int:
        """Return the truncation order of a jet."""
        return self._order_by_size[jet.shape[-1]]

    def truncate(self, jet: Jet, order: int) -> Jet:
        """Drop the coefficients above ``order``."""
        return jet[..., : self.sizes[order]]

    def align(self, *jets: Jet) -> list[Jet]:
        """Truncate all jets to their common order."""
        order = min(self.order_of(jet) for jet in jets)
        return [self.truncate(jet, order) for jet in jets]

    def constant(self, values: NDArray[np.float64], order: int | None = None) -> Jet:
        """Return the jets of constant functions."""
        values = np.asarray(values, dtype=np.float64)
        size = self.sizes[self.order if order is None else order]
        jet = np.zeros((*values.shape, size))
        jet[..., 0] = values
        return jet

    def variable(self, axis: int, values: NDArray[np.float64]) -> Jet:
        """Return the jets of the coordinate function ``x[axis]`` around ``values``."""
        jet = self.constant(values)
        if self.order > 0:
            jet[..., 1 + axis] = 1.0
        return jet

    def value(self, jet: Jet) -> NDArray[np.float64]:
        """Return the values at the expansion points."""
        return jet[..., 0]

    def multiply(self, a: Jet, b: Jet) -> Jet:
        """Multiply scalar (or elementwise) jets."""
        order = min(self.order_of(a), self.order_of(b))
        left, right, starts = self._products[order]
        return np.add.reduceat(a[..., left] * b[..., right], starts, axis=-1)

    def contract(self, subscripts: str, a: Jet, b: Jet) -> Jet:
        """Contract two tensor jets with einsum subscripts over their tensor axes."""
        if _RESERVED in subscripts:
            msg = f"subscript '{_RESERVED}' is reserved for the jet axis"
            raise ValueError(msg)
        inputs, output = subscripts.split("->")
        first, second = inputs.split(",")
        order = min(self.order_of(a), self.order_of(b))
        left, right, starts = self._products[order]
        product = np.einsum(
            f"...{first}z,...{second}z->...{output}z", a[..., left], b[..., right]
        )
        return np.add.reduceat(product, starts, axis=-1)

    def derivative(self, jet: Jet, axis: int) -> Jet:
        """Differentiate along one variable; the order drops by one."""
        order = self.order_of(jet)
        if order == 0:
            msg = "cannot differentiate an order-0 jet"
            raise ValueError(msg)
        source, factor = self._shifts[order - 1][axis]
        return jet[..., source] * factor

    def gradient(self, jet: Jet) -> Jet:
        """Stack all first derivatives along a new last tensor axis."""
        return np.stack(
            [self.derivative(jet, axis) for axis in range(self.dim)], axis=-2
        )

    def partial(self, jet: Jet, exponent: Sequence[int]) -> NDArray[np.float64]:
        """Return the partial derivative of the given multi-index at the points."""
        index = int(self._lookup(np.array([exponent], dtype=np.int64))[0])
        return jet[..., index] * self.factorials[index]

    def compose(self, jet: Jet, derivatives: Sequence[NDArray[np.float64]]) -> Jet:
        """Compose a univariate function, given its derivatives at the base values."""
        order = self.order_of(jet)
        shift = jet.copy()
        shift[..., 0] = 0.0
        result = self.constant(derivatives[order] / factorial(order), order)
        for k in range(order - 1, -1, -1):
            result = self.multiply(result, shift)
            result[..., 0] += derivatives[k] / factorial(k)
        return result

    def power(self, jet: Jet, exponent: Fraction) -> Jet:
        """Raise a jet to a rational power."""
        order = self.order_of(jet)
        if exponent.denominator == 1 and exponent >= 0:
            result = self.constant(np.ones(jet.shape[:-1]), order)
            base = jet
            remaining = int(exponent)
            while remaining:
                if remaining & 1:
                    result = self.multiply(result, base)
                remaining >>= 1
                if remaining:
                    base = self.multiply(base, base)
            return result
        values = jet[..., 0]
        derivatives = []
        coefficient = 1.0
        for k in range(order + 1):
            derivatives.append(coefficient * np.power(values, float(exponent - k)))
            coefficient *= float(exponent - k)
        return self.compose(jet, derivatives)

    def reciprocal(self, jet: Jet) -> Jet:
        """Return 1/jet."""
        return self.power(jet, Fraction(-1))

    def exp(self, jet: Jet) -> Jet:
        """Return exp(jet)."""
        value = np.exp(jet[..., 0])
        return self.compose(jet, [value] * (self.order_of(jet) + 1))

    def log(self, jet: Jet) -> Jet:
        """Return log(jet) for positive base values."""
        values = jet[..., 0]
        derivatives = [np.log(values)]
        for k in range(1, self.order_of(jet) + 1):
            derivatives.append((-1) ** (k - 1) * factorial(k - 1) / values**k)
        return self.compose(jet, derivatives)

    def sin(self, jet: Jet) -> Jet:
        """Return sin(jet)."""
        s, c = np.sin(jet[..., 0]), np.cos(jet[..., 0])
        cycle = [s, c, -s, -c]
        return self.compose(jet, [cycle[k % 4] for k in range(self.order_of(jet) + 1)])

    def cos(self, jet: Jet) -> Jet:
        """Return cos(jet)."""
        s, c = np.sin(jet[..., 0]), np.cos(jet[..., 0])
        cycle = [c, -s, -c, s]
        return self.compose(jet, [cycle[k % 4] for k in range(self.order_of(jet) + 1)])


@cache
def jet_algebra(dim: int, order: int) -> JetAlgebra:
    """Return the shared algebra for a dimension and order."""
    return JetAlgebra(dim, order)


def _describe(node: Expr) -> str:
    text = str(node)
    return text if len(text) <= 80 else f"{text[:77]}..."  # noqa: PLR2004


def expr_jet(
    e: Expr,
    algebra: JetAlgebra,
    points: NDArray[np.float64],
    params: Mapping[str, float] | None = None,
) -> Jet:
    """Expand an expression into jets around each row of ``points``."""
    params = params or {}
    batch = points.shape[0]
    memo: dict[int, Jet] = {}

    def unary(node: Call, arg: Jet) -> Jet:
        values = arg[..., 0]
        if node.func in ("log", "sqrt") and np.any(values <= 0):
            kind = "log" if node.func == "log" else "square root"
            msg = f"{kind} of non-positive value in '{_describe(node)}'"
            raise ExprDomainError(msg)
        functions: dict[str, Callable[[Jet], Jet]] = {
            "sin": algebra.sin,
            "cos": algebra.cos,
            "exp": algebra.exp,
            "log": algebra.log,
            "sqrt": lambda j: algebra.power(j, Fraction(1, 2)),
            "tan": lambda j: algebra.multiply(
                algebra.sin(j), algebra.reciprocal(algebra.cos(j))
            ),
        }
        return functions[node.func](arg)

    def visit(node: Expr) -> Jet:  # noqa: PLR0911, PLR0912
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            result = algebra.constant(np.full(batch, float(node.value)))
        elif isinstance(node, Coord):
            result = algebra.variable(node.index, points[:, node.index])
        elif isinstance(node, Param):
            result = algebra.constant(np.full(batch, float(params[node.name])))
        elif isinstance(node, Add):
            result = visit(node.left) + visit(node.right)
        elif isinstance(node, Neg):
            result = -visit(node.operand)
        elif isinstance(node, Mul):
            result = algebra.multiply(visit(node.left), visit(node.right))
        elif isinstance(node, Div):
            denominator = visit(node.denominator)
            if np.any(denominator[..., 0] == 0):
                msg = f"division by zero in '{_describe(node)}'"
                raise ExprDomainError(msg)
            result = algebra.multiply(
                visit(node.numerator), algebra.reciprocal(denominator)
            )
        elif isinstance(node, Pow):
            base = visit(node.base)
            values = base[..., 0]
            integral = node.exponent.denominator == 1
            if not integral and np.any(values < 0):
                msg = f"fractional power of negative value in '{_describe(node)}'"
                raise ExprDomainError(msg)
            if (node.exponent < 0 or not integral) and np.any(values == 0):
                msg = f"singular power of zero in '{_describe(node)}'"
                raise ExprDomainError(msg)
            result = algebra.power(base, node.exponent)
        elif isinstance(node, Call):
            result = unary(node, visit(node.arg))
        else:
            msg = f"cannot expand {type(node).__name__}"
            raise TypeError(msg)
        memo[key] = result
        return result

    with np.errstate(all="ignore"):
        return visit(e)


def kulkarni_nomizu_jet(algebra: JetAlgebra, a: Jet, b: Jet) -> Jet:
    """Kulkarni-Nomizu product of two symmetric 2-tensor jets."""
    return (
        algebra.contract("ik,jl->ijkl", a, b)
        + algebra.contract("jl,ik->ijkl", a, b)
        - algebra.contract("il,jk->ijkl", a, b)
        - algebra.contract("jk,il->ijkl", a, b)
    )
