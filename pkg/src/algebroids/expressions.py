"""Scalar coefficient functions as expression trees with exact differentiation.

A scalar field is an immutable expression tree over named base coordinates.
Node kinds: constant, coordinate, sum, difference, product, quotient, integer
power, sin, cos, exp (plus an internal square root used when orthonormalizing
metric frames).  Differentiation is symbolic and closed under these node
kinds, so identities downstream fail only through floating-point evaluation,
never through truncation.  No canonicalization is attempted beyond cheap
constant folding; equality of fields is always decided pointwise.
"""

from __future__ import annotations

import math
from typing import Sequence


class ExpressionError(ValueError):
    """Parse failure, with the offending position in the source text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ScalarField:
    """Base class for expression nodes. Instances are immutable and pure."""

    __slots__ = ()

    def eval(self, point: Sequence[float]) -> float:
        raise NotImplementedError

    def diff(self, index: int) -> "ScalarField":
        """Exact partial derivative with respect to coordinate `index` (0-based)."""
        raise NotImplementedError

    def subs(self, index: int, value: float) -> "ScalarField":
        """Substitute a constant for coordinate `index`, folding constants."""
        raise NotImplementedError

    def tau_degree(self, index: int) -> int | None:
        """Polynomial degree in coordinate `index`, or None if not polynomial."""
        raise NotImplementedError

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0

    # Operator sugar builds through the folding constructors below.
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, exponent: int):
        return power(self, exponent)

    def __neg__(self):
        return sub(Const(0.0), self)

    def __repr__(self):
        return f"{type(self).__name__}({self})"


def _coerce(value) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    return Const(float(value))


class Const(ScalarField):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)

    def eval(self, point):
        return self.value

    def diff(self, index):
        return ZERO

    def subs(self, index, value):
        return self

    def tau_degree(self, index):
        return 0

    def __str__(self):
        return _format_number(self.value)


class Coord(ScalarField):
    __slots__ = ("index", "name")

    def __init__(self, index: int, name: str):
        self.index = index
        self.name = name

    def eval(self, point):
        return point[self.index]

    def diff(self, index):
        return ONE if index == self.index else ZERO

    def subs(self, index, value):
        return Const(value) if index == self.index else self

    def tau_degree(self, index):
        return 1 if index == self.index else 0

    def __str__(self):
        return self.name


class _Binary(ScalarField):
    __slots__ = ("left", "right")

    def __init__(self, left: ScalarField, right: ScalarField):
        self.left = left
        self.right = right


class Add(_Binary):
    __slots__ = ()

    def eval(self, point):
        return self.left.eval(point) + self.right.eval(point)

    def diff(self, index):
        return add(self.left.diff(index), self.right.diff(index))

    def subs(self, index, value):
        return add(self.left.subs(index, value), self.right.subs(index, value))

    def tau_degree(self, index):
        return _max_degree(self.left.tau_degree(index), self.right.tau_degree(index))

    def __str__(self):
        return f"{self.left} + {self.right}"


class Sub(_Binary):
    __slots__ = ()

    def eval(self, point):
        return self.left.eval(point) - self.right.eval(point)

    def diff(self, index):
        return sub(self.left.diff(index), self.right.diff(index))

    def subs(self, index, value):
        return sub(self.left.subs(index, value), self.right.subs(index, value))

    def tau_degree(self, index):
        return _max_degree(self.left.tau_degree(index), self.right.tau_degree(index))

    def __str__(self):
        return f"{self.left} - {_paren_additive(self.right)}"


class Mul(_Binary):
    __slots__ = ()

    def eval(self, point):
        return self.left.eval(point) * self.right.eval(point)

    def diff(self, index):
        return add(
            mul(self.left.diff(index), self.right),
            mul(self.left, self.right.diff(index)),
        )

    def subs(self, index, value):
        return mul(self.left.subs(index, value), self.right.subs(index, value))

    def tau_degree(self, index):
        a = self.left.tau_degree(index)
        b = self.right.tau_degree(index)
        if a is None or b is None:
            return None
        return a + b

    def __str__(self):
        return f"{_paren_additive(self.left)}*{_paren_additive(self.right)}"


class Div(_Binary):
    __slots__ = ()

    def eval(self, point):
        return self.left.eval(point) / self.right.eval(point)

    def diff(self, index):
        return div(
            sub(
                mul(self.left.diff(index), self.right),
                mul(self.left, self.right.diff(index)),
            ),
            mul(self.right, self.right),
        )

    def subs(self, index, value):
        return div(self.left.subs(index, value), self.right.subs(index, value))

    def tau_degree(self, index):
        a = self.left.tau_degree(index)
        b = self.right.tau_degree(index)
        if a is None or b != 0:
            return None
        return a

    def __str__(self):
        return f"{_paren_additive(self.left)}/{_paren_tight(self.right)}"


class Pow(ScalarField):
    __slots__ = ("base", "exponent")

    def __init__(self, base: ScalarField, exponent: int):
        self.base = base
        self.exponent = int(exponent)

    def eval(self, point):
        return self.base.eval(point) ** self.exponent

    def diff(self, index):
        n = self.exponent
        return mul(mul(Const(n), power(self.base, n - 1)), self.base.diff(index))

    def subs(self, index, value):
        return power(self.base.subs(index, value), self.exponent)

    def tau_degree(self, index):
        a = self.base.tau_degree(index)
        if a is None:
            return None
        if self.exponent >= 0:
            return a * self.exponent
        return None if a != 0 else 0

    def __str__(self):
        return f"{_paren_tight(self.base)}^{self.exponent}"


class _Unary(ScalarField):
    __slots__ = ("arg",)

    def __init__(self, arg: ScalarField):
        self.arg = arg

    def tau_degree(self, index):
        return 0 if self.arg.tau_degree(index) == 0 else None

    def __str__(self):
        return f"{self._name}({self.arg})"


class Sin(_Unary):
    __slots__ = ()
    _name = "sin"

    def eval(self, point):
        return math.sin(self.arg.eval(point))

    def diff(self, index):
        return mul(Cos(self.arg), self.arg.diff(index))

    def subs(self, index, value):
        return sine(self.arg.subs(index, value))


class Cos(_Unary):
    __slots__ = ()
    _name = "cos"

    def eval(self, point):
        return math.cos(self.arg.eval(point))

    def diff(self, index):
        return sub(ZERO, mul(Sin(self.arg), self.arg.diff(index)))

    def subs(self, index, value):
        return cosine(self.arg.subs(index, value))


class Exp(_Unary):
    __slots__ = ()
    _name = "exp"

    def eval(self, point):
        return math.exp(self.arg.eval(point))

    def diff(self, index):
        return mul(self, self.arg.diff(index))

    def subs(self, index, value):
        return exponential(self.arg.subs(index, value))


class Sqrt(_Unary):
    """Internal node used by metric orthonormalization; not part of the grammar."""

    __slots__ = ()
    _name = "sqrt"

    def eval(self, point):
        return math.sqrt(self.arg.eval(point))

    def diff(self, index):
        return div(self.arg.diff(index), mul(Const(2.0), self))

    def subs(self, index, value):
        return square_root(self.arg.subs(index, value))


ZERO = Const(0.0)
ONE = Const(1.0)


def add(a: ScalarField, b: ScalarField) -> ScalarField:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    return Add(a, b)


def sub(a: ScalarField, b: ScalarField) -> ScalarField:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if b.is_zero():
        return a
    return Sub(a, b)


def mul(a: ScalarField, b: ScalarField) -> ScalarField:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if a.is_zero() or b.is_zero():
        return ZERO
    if isinstance(a, Const) and a.value == 1.0:
        return b
    if isinstance(b, Const) and b.value == 1.0:
        return a
    return Mul(a, b)


def div(a: ScalarField, b: ScalarField) -> ScalarField:
    if isinstance(b, Const):
        if b.value == 1.0:
            return a
        if isinstance(a, Const) and b.value != 0.0:
            return Const(a.value / b.value)
    if a.is_zero():
        return ZERO
    return Div(a, b)


def power(base: ScalarField, exponent: int) -> ScalarField:
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** exponent)
    return Pow(base, exponent)


def sine(arg: ScalarField) -> ScalarField:
    if isinstance(arg, Const):
        return Const(math.sin(arg.value))
    return Sin(arg)


def cosine(arg: ScalarField) -> ScalarField:
    if isinstance(arg, Const):
        return Const(math.cos(arg.value))
    return Cos(arg)


def exponential(arg: ScalarField) -> ScalarField:
    if isinstance(arg, Const):
        return Const(math.exp(arg.value))
    return Exp(arg)


def square_root(arg: ScalarField) -> ScalarField:
    if isinstance(arg, Const):
        return Const(math.sqrt(arg.value))
    return Sqrt(arg)


def differentiate(field: ScalarField, index: int) -> ScalarField:
    """Exact partial derivative of `field` along coordinate `index` (0-based)."""
    return field.diff(index)


def balanced_sum(terms: Sequence[ScalarField]) -> ScalarField:
    """Sum many fields as a balanced tree, keeping evaluation depth logarithmic."""
    terms = [t for t in terms if not t.is_zero()]
    if not terms:
        return ZERO
    while len(terms) > 1:
        paired = [add(terms[i], terms[i + 1]) for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            paired.append(terms[-1])
        terms = paired
    return terms[0]


def _max_degree(a, b):
    if a is None or b is None:
        return None
    return max(a, b)


def _format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _paren_additive(node: ScalarField) -> str:
    if isinstance(node, (Add, Sub)):
        return f"({node})"
    return str(node)


def _paren_tight(node: ScalarField) -> str:
    if isinstance(node, (Add, Sub, Mul, Div, Pow)):
        return f"({node})"
    return str(node)


# --------------------------------------------------------------------------
# Parser for the coefficient grammar:
#   expr   := term { ("+" | "-") term }
#   term   := factor { ("*" | "/") factor }
#   factor := atom [ "^" integer ] | "-" factor
#   atom   := number | ident | "(" expr ")" | ("sin"|"cos"|"exp") "(" expr ")"
# --------------------------------------------------------------------------

_FUNCTIONS = {"sin": sine, "cos": cosine, "exp": exponential}


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> tuple[str, str, int]:
        saved = self.pos
        token = self.next()
        self.pos = saved
        return token

    def next(self) -> tuple[str, str, int]:
        self._skip_ws()
        start = self.pos
        if self.pos >= len(self.text):
            return ("end", "", start)
        ch = self.text[self.pos]
        if ch in "+-*/^()":
            self.pos += 1
            return ("op", ch, start)
        if ch.isdigit() or ch == ".":
            j = self.pos
            seen_dot = False
            while j < len(self.text) and (self.text[j].isdigit() or self.text[j] == "."):
                if self.text[j] == ".":
                    if seen_dot:
                        raise ExpressionError("malformed number", j)
                    seen_dot = True
                j += 1
            literal = self.text[self.pos:j]
            if literal == ".":
                raise ExpressionError("malformed number", start)
            self.pos = j
            return ("number", literal, start)
        if ch.isalpha() or ch == "_":
            j = self.pos
            while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
                j += 1
            name = self.text[self.pos:j]
            self.pos = j
            return ("ident", name, start)
        raise ExpressionError(f"unexpected character {ch!r}", start)


class _Parser:
    def __init__(self, text: str, coords: Sequence[str]):
        self.tokens = _Tokenizer(text)
        self.coords = {name: i for i, name in enumerate(coords)}

    def parse(self) -> ScalarField:
        node = self._expr()
        kind, value, pos = self.tokens.next()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing input {value!r}", pos)
        return node

    def _expr(self) -> ScalarField:
        node = self._term()
        while True:
            kind, value, _ = self.tokens.peek()
            if kind == "op" and value in "+-":
                self.tokens.next()
                rhs = self._term()
                node = add(node, rhs) if value == "+" else sub(node, rhs)
            else:
                return node

    def _term(self) -> ScalarField:
        node = self._factor()
        while True:
            kind, value, _ = self.tokens.peek()
            if kind == "op" and value in "*/":
                self.tokens.next()
                rhs = self._factor()
                node = mul(node, rhs) if value == "*" else div(node, rhs)
            else:
                return node

    def _factor(self) -> ScalarField:
        kind, value, pos = self.tokens.peek()
        if kind == "op" and value == "-":
            self.tokens.next()
            return sub(ZERO, self._factor())
        node = self._atom()
        kind, value, pos = self.tokens.peek()
        if kind == "op" and value == "^":
            self.tokens.next()
            node = power(node, self._integer())
        return node

    def _integer(self) -> int:
        kind, value, pos = self.tokens.next()
        sign = 1
        if kind == "op" and value == "-":
            sign = -1
            kind, value, pos = self.tokens.next()
        if kind != "number" or "." in value:
            raise ExpressionError("exponent must be an integer", pos)
        return sign * int(value)

    def _atom(self) -> ScalarField:
        kind, value, pos = self.tokens.next()
        if kind == "number":
            return Const(float(value))
        if kind == "ident":
            if value in _FUNCTIONS:
                kind2, value2, pos2 = self.tokens.next()
                if kind2 != "op" or value2 != "(":
                    raise ExpressionError(f"{value} must be followed by '('", pos2)
                inner = self._expr()
                self._expect_close()
                return _FUNCTIONS[value](inner)
            if value in self.coords:
                return Coord(self.coords[value], value)
            raise ExpressionError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            inner = self._expr()
            self._expect_close()
            return inner
        raise ExpressionError(f"expected a value, found {value!r}", pos)

    def _expect_close(self):
        kind, value, pos = self.tokens.next()
        if kind != "op" or value != ")":
            raise ExpressionError("expected ')'", pos)


def parse_expression(text: str, coords: Sequence[str]) -> ScalarField:
    """Parse `text` against the coefficient grammar over the named coordinates."""
    return _Parser(text, coords).parse()
