"""Closed-form expressions over chart coordinates.

Expressions are immutable trees of frozen dataclasses. Parsing keeps the tree the
user wrote; the operator overloads and every transformation (differentiation,
simplification) go through the folding constructors ``add``, ``mul``, ``div``,
``neg``, ``power`` and ``call`` so that trees stay small.

The grammar accepted by :func:`parse_expr` is documented in ``docs/expressions.rst``.
"""

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import singledispatch
from typing import Any

import numpy as np
from numpy.typing import NDArray

from mex.qcurvature.constants import SIMPLIFY_MAX_PASSES
from mex.qcurvature.exceptions import (
    ExprDomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
)

Scalar = Fraction | float
FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __add__(self, other: "Expr | Scalar | int") -> "Expr":
        return add(self, coerce(other))

    def __radd__(self, other: "Scalar | int") -> "Expr":
        return add(coerce(other), self)

    def __sub__(self, other: "Expr | Scalar | int") -> "Expr":
        return sub(self, coerce(other))

    def __rsub__(self, other: "Scalar | int") -> "Expr":
        return sub(coerce(other), self)

    def __mul__(self, other: "Expr | Scalar | int") -> "Expr":
        return mul(self, coerce(other))

    def __rmul__(self, other: "Scalar | int") -> "Expr":
        return mul(coerce(other), self)

    def __truediv__(self, other: "Expr | Scalar | int") -> "Expr":
        return div(self, coerce(other))

    def __rtruediv__(self, other: "Scalar | int") -> "Expr":
        return div(coerce(other), self)

    def __neg__(self) -> "Expr":
        return neg(self)

    def __pow__(self, exponent: Fraction | int) -> "Expr":
        return power(self, Fraction(exponent))

    def __str__(self) -> str:
        return _render(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    """Literal number, exact when rational."""

    value: Scalar

    def __str__(self) -> str:
        return _render(self)


@dataclass(frozen=True, slots=True)
class Coord(Expr):
    """Reference to the chart coordinate at ``index``."""

    index: int
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Param(Expr):
    """Named parameter bound at evaluation time."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Add(Expr):
    """Sum of two expressions."""

    left: Expr
    right: Expr

    def __str__(self) -> str:
        return _render(self)


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    """Product of two expressions."""

    left: Expr
    right: Expr

    def __str__(self) -> str:
        return _render(self)


@dataclass(frozen=True, slots=True)
class Div(Expr):
    """Quotient of two expressions."""

    numerator: Expr
    denominator: Expr

    def __str__(self) -> str:
        return _render(self)


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    """Unary minus."""

    operand: Expr

    def __str__(self) -> str:
        return _render(self)


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    """Power with an exact rational exponent."""

    base: Expr
    exponent: Fraction

    def __str__(self) -> str:
        return _render(self)


@dataclass(frozen=True, slots=True)
class Call(Expr):
    """Elementary function applied to one argument."""

    func: str
    arg: Expr

    def __str__(self) -> str:
        return _render(self)


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def coerce(value: Expr | Scalar | int) -> Expr:
    """Wrap plain numbers into constants."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, float):
        return Const(value)
    return Const(Fraction(value))


def _value(e: Expr) -> Scalar | None:
    return e.value if isinstance(e, Const) else None


def add(a: Expr, b: Expr) -> Expr:
    """Return a + b with constant folding and zero absorption."""
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return Const(va + vb)
    if va == 0:
        return b
    if vb == 0:
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    """Return a - b."""
    return add(a, neg(b))


def neg(a: Expr) -> Expr:
    """Return -a, folding constants and double negation."""
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _base_and_exponent(e: Expr) -> tuple[Expr, Fraction]:
    if isinstance(e, Pow):
        return e.base, e.exponent
    return e, Fraction(1)


def mul(a: Expr, b: Expr) -> Expr:
    """Return a * b with folding, 0/1 absorption and power merging."""
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return Const(va * vb)
    if va == 0 or vb == 0:
        return ZERO
    if va == 1:
        return b
    if vb == 1:
        return a
    if va == -1:
        return neg(b)
    if vb == -1:
        return neg(a)
    if vb is not None:
        return mul(b, a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.operand, b.operand)
    if va is not None and isinstance(b, Mul) and isinstance(b.left, Const):
        return mul(Const(va * b.left.value), b.right)
    base_a, exp_a = _base_and_exponent(a)
    base_b, exp_b = _base_and_exponent(b)
    if va is None and (base_a is base_b or base_a == base_b):
        return power(base_a, exp_a + exp_b)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    """Return a / b, folding constants but never a division by zero."""
    va, vb = _value(a), _value(b)
    if vb == 0:
        return Div(a, b)
    if vb == 1:
        return a
    if va == 0:
        return ZERO
    if va is not None and vb is not None:
        return Const(va / vb)
    if isinstance(vb, Fraction):
        return mul(Const(1 / vb), a)
    return Div(a, b)


def power(base: Expr, exponent: Fraction) -> Expr:
    """Return base^exponent with exact folding where it stays real and rational."""
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    value = _value(base)
    if value is not None and exponent.denominator == 1:
        if value != 0 or exponent > 0:
            if isinstance(value, Fraction):
                return Const(value ** int(exponent))
            return Const(float(value) ** int(exponent))
    if value is not None and isinstance(value, float) and value > 0:
        return Const(value ** float(exponent))
    if isinstance(base, Pow) and exponent.denominator == 1:
        return power(base.base, base.exponent * exponent)
    return Pow(base, exponent)


_EXACT_VALUES: dict[tuple[str, Fraction], Fraction] = {
    ("sin", Fraction(0)): Fraction(0),
    ("cos", Fraction(0)): Fraction(1),
    ("tan", Fraction(0)): Fraction(0),
    ("exp", Fraction(0)): Fraction(1),
    ("log", Fraction(1)): Fraction(0),
    ("sqrt", Fraction(0)): Fraction(0),
    ("sqrt", Fraction(1)): Fraction(1),
}


def call(func: str, arg: Expr) -> Expr:
    """Return func(arg), folding the exact special values."""
    value = _value(arg)
    if isinstance(value, Fraction) and (func, value) in _EXACT_VALUES:
        return Const(_EXACT_VALUES[(func, value)])
    if func == "log" and isinstance(arg, Call) and arg.func == "exp":
        return arg.arg
    return Call(func, arg)


def sin(e: Expr | Scalar | int) -> Expr:
    """Return sin(e)."""
    return call("sin", coerce(e))


def cos(e: Expr | Scalar | int) -> Expr:
    """Return cos(e)."""
    return call("cos", coerce(e))


def tan(e: Expr | Scalar | int) -> Expr:
    """Return tan(e)."""
    return call("tan", coerce(e))


def exp(e: Expr | Scalar | int) -> Expr:
    """Return exp(e)."""
    return call("exp", coerce(e))


def log(e: Expr | Scalar | int) -> Expr:
    """Return log(e)."""
    return call("log", coerce(e))


def sqrt(e: Expr | Scalar | int) -> Expr:
    """Return sqrt(e)."""
    return call("sqrt", coerce(e))


# printing


def _precedence(e: Expr) -> int:
    if isinstance(e, Add):
        return 1
    if isinstance(e, Mul | Div):
        return 2
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    if isinstance(e, Const):
        if e.value < 0:
            return 3
        if isinstance(e.value, Fraction) and e.value.denominator != 1:
            return 2
    return 5


def _wrap(e: Expr, level: int) -> str:
    text = _render(e)
    return f"({text})" if _precedence(e) < level else text


def _render_number(value: Scalar) -> str:
    if isinstance(value, float):
        return repr(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _render(e: Expr) -> str:  # noqa: PLR0911
    if isinstance(e, Const):
        return _render_number(e.value)
    if isinstance(e, Coord | Param):
        return str(e)
    if isinstance(e, Add):
        right = e.right
        if isinstance(right, Neg):
            return f"{_wrap(e.left, 1)} - {_wrap(right.operand, 2)}"
        return f"{_wrap(e.left, 1)} + {_wrap(right, 2)}"
    if isinstance(e, Mul):
        return f"{_wrap(e.left, 2)}*{_wrap(e.right, 3)}"
    if isinstance(e, Div):
        return f"{_wrap(e.numerator, 2)}/{_wrap(e.denominator, 3)}"
    if isinstance(e, Neg):
        return f"-{_wrap(e.operand, 4)}"
    if isinstance(e, Pow):
        exponent = e.exponent
        if exponent.denominator == 1 and exponent >= 0:
            rendered = str(exponent.numerator)
        else:
            rendered = f"({_render_number(exponent)})"
        return f"{_wrap(e.base, 5)}^{rendered}"
    if isinstance(e, Call):
        return f"{e.func}({_render(e.arg)})"
    msg = f"cannot render {type(e).__name__}"
    raise TypeError(msg)


def _describe(e: Expr, limit: int = 80) -> str:
    text = _render(e)
    return text if len(text) <= limit else f"{text[: limit - 3]}..."


# parsing

_OPERATORS = "+-*/^(),"


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    position = 0
    while position < len(source):
        char = source[position]
        offset = len(source[:position].encode())
        if char.isspace():
            position += 1
        elif char in _OPERATORS:
            tokens.append(_Token("op", char, offset))
            position += 1
        elif char.isdigit() or char == ".":
            end = position
            while end < len(source) and (source[end].isdigit() or source[end] == "."):
                end += 1
            if end < len(source) and source[end] in "eE":
                probe = end + 1
                if probe < len(source) and source[probe] in "+-":
                    probe += 1
                if probe < len(source) and source[probe].isdigit():
                    end = probe
                    while end < len(source) and source[end].isdigit():
                        end += 1
            tokens.append(_Token("number", source[position:end], offset))
            position = end
        elif char.isalpha() or char == "_":
            end = position
            while end < len(source) and (source[end].isalnum() or source[end] == "_"):
                end += 1
            tokens.append(_Token("name", source[position:end], offset))
            position = end
        else:
            msg = f"unexpected character {char!r}"
            raise ExprSyntaxError(msg, offset)
    tokens.append(_Token("end", "", len(source.encode())))
    return tokens


def constant_value(e: Expr) -> Fraction | None:
    """Return the exact rational value of a constant-only tree, if it has one."""
    if isinstance(e, Const):
        return e.value if isinstance(e.value, Fraction) else None
    if isinstance(e, Neg):
        inner = constant_value(e.operand)
        return None if inner is None else -inner
    if isinstance(e, Add | Mul):
        left, right = constant_value(e.left), constant_value(e.right)
        if left is None or right is None:
            return None
        return left + right if isinstance(e, Add) else left * right
    if isinstance(e, Div):
        num, den = constant_value(e.numerator), constant_value(e.denominator)
        if num is None or den is None or den == 0:
            return None
        return num / den
    if isinstance(e, Pow):
        base = constant_value(e.base)
        if base is None or e.exponent.denominator != 1 or base == 0:
            return None
        return base ** int(e.exponent)
    return None


class _Parser:
    def __init__(
        self, source: str, coords: Sequence[str], params: Sequence[str]
    ) -> None:
        self.tokens = _tokenize(source)
        self.position = 0
        self.coords = {name: index for index, name in enumerate(coords)}
        self.params = set(params)

    @property
    def current(self) -> _Token:
        return self.tokens[self.position]

    def advance(self) -> _Token:
        token = self.current
        self.position += 1
        return token

    def accept(self, text: str) -> bool:
        if self.current.kind == "op" and self.current.text == text:
            self.position += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            msg = f"expected '{text}'"
            raise ExprSyntaxError(msg, self.current.offset)

    def parse(self) -> Expr:
        if self.current.kind == "end":
            msg = "empty expression"
            raise ExprSyntaxError(msg, self.current.offset)
        tree = self.sum()
        if self.current.kind != "end":
            msg = f"unexpected token '{self.current.text}'"
            raise ExprSyntaxError(msg, self.current.offset)
        return tree

    def sum(self) -> Expr:
        tree = self.product()
        while True:
            if self.accept("+"):
                tree = Add(tree, self.product())
            elif self.accept("-"):
                tree = Add(tree, Neg(self.product()))
            else:
                return tree

    def product(self) -> Expr:
        tree = self.unary()
        while True:
            if self.accept("*"):
                tree = Mul(tree, self.unary())
            elif self.current.kind == "op" and self.current.text == "/":
                slash = self.advance()
                if self.current.kind == "end" or self.current.text == ")":
                    msg = "empty denominator"
                    raise ExprSyntaxError(msg, slash.offset)
                tree = Div(tree, self.unary())
            else:
                return tree

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if not self.accept("^"):
            return base
        offset = self.current.offset
        exponent = constant_value(self.unary())
        if exponent is None:
            msg = "exponent must be a rational constant"
            raise ExprSyntaxError(msg, offset)
        return Pow(base, exponent)

    def atom(self) -> Expr:
        token = self.advance()
        if token.kind == "number":
            try:
                return Const(Fraction(token.text))
            except ValueError:
                msg = f"malformed number '{token.text}'"
                raise ExprSyntaxError(msg, token.offset) from None
        if token.kind == "name":
            return self.identifier(token)
        if token.kind == "op" and token.text == "(":
            tree = self.sum()
            self.expect(")")
            return tree
        msg = "unexpected end of input" if token.kind == "end" else (
            f"unexpected token '{token.text}'"
        )
        raise ExprSyntaxError(msg, token.offset)

    def identifier(self, token: _Token) -> Expr:
        name = token.text
        if name in self.coords:
            return Coord(self.coords[name], name)
        if name in self.params:
            return Param(name)
        if name in FUNCTIONS:
            self.expect("(")
            arg = self.sum()
            self.expect(")")
            return Call(name, arg)
        if name == "pi":
            return Const(math.pi)
        raise UnknownIdentifierError(name, token.offset)


def parse_expr(
    source: str, coords: Sequence[str], params: Sequence[str] = ()
) -> Expr:
    """Parse source text into an expression over the given coordinates and params."""
    return _Parser(source, coords, params).parse()


# traversal


def _children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, Add | Mul):
        return (e.left, e.right)
    if isinstance(e, Div):
        return (e.numerator, e.denominator)
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Call):
        return (e.arg,)
    return ()


def expr_size(e: Expr) -> int:
    """Count the distinct nodes of an expression graph."""
    seen: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.extend(_children(node))
    return len(seen)


def expr_coordinates(e: Expr) -> frozenset[int]:
    """Return the coordinate indices an expression depends on."""
    seen: set[int] = set()
    found: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Coord):
            found.add(node.index)
        stack.extend(_children(node))
    return frozenset(found)


def expr_params(e: Expr) -> frozenset[str]:
    """Return the parameter names an expression refers to."""
    seen: set[int] = set()
    found: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Param):
            found.add(node.name)
        stack.extend(_children(node))
    return frozenset(found)


# differentiation


@singledispatch
def _derive(e: Expr, index: int, memo: dict[int, Expr]) -> Expr:
    msg = f"cannot differentiate {type(e).__name__}"
    raise TypeError(msg)


def _d(e: Expr, index: int, memo: dict[int, Expr]) -> Expr:
    key = id(e)
    if key not in memo:
        memo[key] = _derive(e, index, memo)
    return memo[key]


@_derive.register
def _(e: Const, index: int, memo: dict[int, Expr]) -> Expr:
    return ZERO


@_derive.register
def _(e: Param, index: int, memo: dict[int, Expr]) -> Expr:
    return ZERO


@_derive.register
def _(e: Coord, index: int, memo: dict[int, Expr]) -> Expr:
    return ONE if e.index == index else ZERO


@_derive.register
def _(e: Add, index: int, memo: dict[int, Expr]) -> Expr:
    return add(_d(e.left, index, memo), _d(e.right, index, memo))


@_derive.register
def _(e: Neg, index: int, memo: dict[int, Expr]) -> Expr:
    return neg(_d(e.operand, index, memo))


@_derive.register
def _(e: Mul, index: int, memo: dict[int, Expr]) -> Expr:
    return add(
        mul(_d(e.left, index, memo), e.right),
        mul(e.left, _d(e.right, index, memo)),
    )


@_derive.register
def _(e: Div, index: int, memo: dict[int, Expr]) -> Expr:
    d_den = _d(e.denominator, index, memo)
    quotient = div(_d(e.numerator, index, memo), e.denominator)
    correction = div(mul(e.numerator, d_den), power(e.denominator, Fraction(2)))
    return sub(quotient, correction)


@_derive.register
def _(e: Pow, index: int, memo: dict[int, Expr]) -> Expr:
    outer = mul(Const(e.exponent), power(e.base, e.exponent - 1))
    return mul(outer, _d(e.base, index, memo))


_CHAIN_RULES: dict[str, Callable[[Expr], Expr]] = {
    "sin": lambda a: cos(a),
    "cos": lambda a: neg(sin(a)),
    "tan": lambda a: add(ONE, power(tan(a), Fraction(2))),
    "exp": lambda a: exp(a),
    "log": lambda a: power(a, Fraction(-1)),
    "sqrt": lambda a: div(Const(Fraction(1, 2)), sqrt(a)),
}


@_derive.register
def _(e: Call, index: int, memo: dict[int, Expr]) -> Expr:
    inner = _d(e.arg, index, memo)
    if inner == ZERO:
        return ZERO
    return mul(_CHAIN_RULES[e.func](e.arg), inner)


def diff_expr(e: Expr, coord_index: int) -> Expr:
    """Return the exact partial derivative of e along one coordinate."""
    if coord_index < 0:
        msg = f"coordinate index {coord_index} is negative"
        raise ValueError(msg)
    return _d(e, coord_index, {})


# simplification


def _rebuild(e: Expr, memo: dict[int, Expr]) -> Expr:  # noqa: PLR0911
    key = id(e)
    if key in memo:
        return memo[key]
    if isinstance(e, Add):
        result = add(_rebuild(e.left, memo), _rebuild(e.right, memo))
    elif isinstance(e, Mul):
        result = mul(_rebuild(e.left, memo), _rebuild(e.right, memo))
    elif isinstance(e, Div):
        result = div(_rebuild(e.numerator, memo), _rebuild(e.denominator, memo))
    elif isinstance(e, Neg):
        result = neg(_rebuild(e.operand, memo))
    elif isinstance(e, Pow):
        result = power(_rebuild(e.base, memo), e.exponent)
    elif isinstance(e, Call):
        result = call(e.func, _rebuild(e.arg, memo))
    else:
        result = e
    memo[key] = result
    return result


def simplify_expr(e: Expr) -> Expr:
    """Apply the folding rewrites until nothing changes or the tree stops shrinking."""
    current = e
    for _ in range(SIMPLIFY_MAX_PASSES):
        rebuilt = _rebuild(current, {})
        if rebuilt is current or rebuilt == current:
            return rebuilt
        if expr_size(rebuilt) > expr_size(current):
            return current
        current = rebuilt
    return current


# evaluation

ArrayLike = NDArray[np.float64] | float


def _fail(message: str, node: Expr) -> ExprDomainError:
    return ExprDomainError(f"{message} in '{_describe(node)}'")


def _evaluate_power(node: Pow, base: NDArray[np.float64]) -> NDArray[np.float64]:
    exponent = node.exponent
    if exponent.denominator == 1:
        if exponent < 0 and np.any(base == 0):
            raise _fail("division by zero", node)
        if exponent < 0:
            return np.power(base, float(exponent))
        return base ** int(exponent)
    if np.any(base < 0):
        raise _fail("fractional power of negative value", node)
    if exponent < 0 and np.any(base == 0):
        raise _fail("division by zero", node)
    return np.power(base, float(exponent))


def _evaluate_call(node: Call, arg: NDArray[np.float64]) -> NDArray[np.float64]:
    if node.func == "log":
        if np.any(arg <= 0):
            raise _fail("log of non-positive value", node)
        return np.log(arg)
    if node.func == "sqrt":
        if np.any(arg < 0):
            raise _fail("square root of negative value", node)
        return np.sqrt(arg)
    function: Callable[[NDArray[np.float64]], NDArray[np.float64]] = getattr(
        np, node.func
    )
    return function(arg)


def _evaluate(  # noqa: PLR0911
    e: Expr,
    coords: Sequence[ArrayLike],
    params: Mapping[str, float],
    memo: dict[int, NDArray[np.float64]],
) -> NDArray[np.float64]:
    key = id(e)
    if key in memo:
        return memo[key]
    if isinstance(e, Const):
        result = np.asarray(float(e.value))
    elif isinstance(e, Coord):
        result = np.asarray(coords[e.index], dtype=np.float64)
    elif isinstance(e, Param):
        if e.name not in params:
            msg = f"parameter '{e.name}' is not bound"
            raise KeyError(msg)
        result = np.asarray(float(params[e.name]))
    elif isinstance(e, Add):
        result = _evaluate(e.left, coords, params, memo) + _evaluate(
            e.right, coords, params, memo
        )
    elif isinstance(e, Mul):
        result = _evaluate(e.left, coords, params, memo) * _evaluate(
            e.right, coords, params, memo
        )
    elif isinstance(e, Div):
        denominator = _evaluate(e.denominator, coords, params, memo)
        if np.any(denominator == 0):
            raise _fail("division by zero", e)
        result = _evaluate(e.numerator, coords, params, memo) / denominator
    elif isinstance(e, Neg):
        result = -_evaluate(e.operand, coords, params, memo)
    elif isinstance(e, Pow):
        result = _evaluate_power(e, _evaluate(e.base, coords, params, memo))
    elif isinstance(e, Call):
        result = _evaluate_call(e, _evaluate(e.arg, coords, params, memo))
    else:
        msg = f"cannot evaluate {type(e).__name__}"
        raise TypeError(msg)
    memo[key] = result
    return result


def evaluate(
    e: Expr,
    coords: Sequence[ArrayLike],
    params: Mapping[str, float] | None = None,
) -> NDArray[np.float64]:
    """Evaluate e elementwise over broadcastable coordinate arrays."""
    with np.errstate(all="ignore"):
        return _evaluate(e, coords, params or {}, {})


def eval_expr(
    e: Expr,
    point: Sequence[float],
    param_values: Mapping[str, float] | None = None,
) -> float:
    """Evaluate e at a single point."""
    return float(evaluate(e, [float(x) for x in point], param_values))


def substitute_params(e: Expr, values: Mapping[str, Any]) -> Expr:
    """Replace bound parameters by constants."""
    memo: dict[int, Expr] = {}

    def visit(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Param) and node.name in values:
            result: Expr = coerce(values[node.name])
        elif isinstance(node, Add):
            result = add(visit(node.left), visit(node.right))
        elif isinstance(node, Mul):
            result = mul(visit(node.left), visit(node.right))
        elif isinstance(node, Div):
            result = div(visit(node.numerator), visit(node.denominator))
        elif isinstance(node, Neg):
            result = neg(visit(node.operand))
        elif isinstance(node, Pow):
            result = power(visit(node.base), node.exponent)
        elif isinstance(node, Call):
            result = call(node.func, visit(node.arg))
        else:
            result = node
        memo[key] = result
        return result

    return visit(e)
