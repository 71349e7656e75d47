"""Formal rational expressions: AST, parser, printer, involution, complexity.

An expression is an ordered rooted tree over complex scalars, variables
``x1..xd``, binary ``+`` and ``*``, and unary inverse.  The adjoint is not a
node kind: ``adj(e)`` in the surface syntax is eagerly pushed to the leaves
(products reversed, scalars conjugated, variables fixed).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "Expr",
    "ExprMatrix",
    "ParseError",
    "scalar",
    "var",
    "add",
    "mul",
    "inv",
    "sub",
    "neg",
    "involution",
    "subexpressions",
    "variables_used",
    "tau",
    "parse",
    "to_str",
]

SCALAR = "scalar"
VAR = "var"
ADD = "add"
MUL = "mul"
INV = "inv"


@dataclass(frozen=True)
class Expr:
    """Immutable node of a formal rational expression tree."""

    kind: str
    children: tuple["Expr", ...] = ()
    value: complex = 0j
    index: int = 0

    def __post_init__(self):
        if self.kind in (ADD, MUL) and len(self.children) != 2:
            raise ValueError(f"{self.kind} node needs exactly 2 children")
        if self.kind == INV and len(self.children) != 1:
            raise ValueError("inv node needs exactly 1 child")
        if self.kind == VAR and self.index < 1:
            raise ValueError("variable index must be >= 1")

    def __str__(self):
        return to_str(self)


def scalar(a) -> Expr:
    return Expr(SCALAR, value=complex(a))


def var(j: int) -> Expr:
    return Expr(VAR, index=j)


def add(a: Expr, b: Expr) -> Expr:
    if a.kind == SCALAR and b.kind == SCALAR:
        return scalar(a.value + b.value)
    return Expr(ADD, (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if a.kind == SCALAR and b.kind == SCALAR:
        return scalar(a.value * b.value)
    return Expr(MUL, (a, b))


def inv(a: Expr) -> Expr:
    if a.kind == SCALAR and a.value != 0:
        return scalar(1 / a.value)
    return Expr(INV, (a,))


def sub(a: Expr, b: Expr) -> Expr:
    """a - b, desugared to a + (-1)*b."""
    return add(a, mul(scalar(-1), b))


def neg(a: Expr) -> Expr:
    return mul(scalar(-1), a)


def involution(r: Expr) -> Expr:
    """Adjoint: transpose the tree left to right and conjugate scalars."""
    if r.kind == SCALAR:
        return scalar(r.value.conjugate())
    if r.kind == VAR:
        return r
    if r.kind == ADD:
        return add(involution(r.children[0]), involution(r.children[1]))
    if r.kind == MUL:
        a, b = r.children
        # scalars commute; keeping them in place makes s* structurally equal
        # to s for hermitian s built with scalar coefficients
        if a.kind == SCALAR or b.kind == SCALAR:
            return mul(involution(a), involution(b))
        return mul(involution(b), involution(a))
    return Expr(INV, (involution(r.children[0]),))


def subexpressions(r: Expr) -> list[Expr]:
    """All distinct subtrees of r (postorder, structurally deduplicated)."""
    seen: dict[Expr, None] = {}

    def walk(e: Expr):
        for c in e.children:
            walk(c)
        seen.setdefault(e)

    walk(r)
    return list(seen)


def variables_used(r: Expr) -> set[int]:
    out: set[int] = set()
    for s in subexpressions(r):
        if s.kind == VAR:
            out.add(s.index)
    return out


def tau(r: Expr) -> int:
    """Tree-recursive complexity: additive on products, doubled by inverses."""
    if r.kind == SCALAR:
        return 0
    if r.kind == VAR:
        return 1
    if r.kind == ADD:
        return max(tau(r.children[0]), tau(r.children[1]))
    if r.kind == MUL:
        return tau(r.children[0]) + tau(r.children[1])
    return 2 * tau(r.children[0])


@dataclass(frozen=True)
class ExprMatrix:
    """Rectangular matrix of expressions, row-major."""

    rows: int
    cols: int
    entries: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.entries) != self.rows * self.cols:
            raise ValueError("entry count must equal rows*cols")

    def at(self, i: int, j: int) -> Expr:
        return self.entries[i * self.cols + j]

    def adjoint(self) -> "ExprMatrix":
        ent = [involution(self.at(i, j)) for j in range(self.cols) for i in range(self.rows)]
        return ExprMatrix(self.cols, self.rows, tuple(ent))

    def to_strings(self) -> list[list[str]]:
        return [[to_str(self.at(i, j)) for j in range(self.cols)] for i in range(self.rows)]


# ---------------------------------------------------------------------------
# parsing

class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


class _Parser:
    """Recursive descent over the grammar:

    expr   := term (('+'|'-') term)*
    term   := ('-')? factor ('*' factor)*
    factor := atom | 'inv(' expr ')' | 'adj(' expr ')'
    atom   := number | 'i' | 'x'index | '(' expr ')'
    """

    def __init__(self, text: str, d: int, split_adjoint: bool = False):
        self.text = text
        self.d = d
        self.split_adjoint = split_adjoint
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise ParseError(f"expected '{ch}'", self.pos)
        self.pos += 1

    def parse(self) -> Expr:
        e = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            raise ParseError("unexpected trailing input", self.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            c = self.peek()
            if c == "+":
                self.pos += 1
                e = add(e, self.term())
            elif c == "-":
                self.pos += 1
                e = sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        negated = False
        if self.peek() == "-":
            self.pos += 1
            negated = True
        e = self.factor()
        while self.peek() == "*":
            self.pos += 1
            e = mul(e, self.factor())
        return neg(e) if negated else e

    def factor(self) -> Expr:
        self.skip_ws()
        if self.text.startswith("inv(", self.pos):
            self.pos += 4
            e = self.expr()
            self.expect(")")
            return inv(e)
        if self.text.startswith("adj(", self.pos):
            self.pos += 4
            e = self.expr()
            self.expect(")")
            return involution(e)
        return self.atom()

    def atom(self) -> Expr:
        c = self.peek()
        start = self.pos
        if c == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        if c == "i" and not self.text.startswith("inv(", self.pos):
            self.pos += 1
            return scalar(1j)
        if c == "x":
            self.pos += 1
            j = self._integer("variable index")
            if j < 1 or j > self.d:
                raise ParseError(f"variable index {j} out of range 1..{self.d}", start)
            if self.split_adjoint:
                # x_j = a_j + i b_j over 2d hermitian variables
                return add(var(j), mul(scalar(1j), var(self.d + j)))
            return var(j)
        if c.isdigit() or c == ".":
            return scalar(self._number())
        raise ParseError("expected atom", self.pos)

    def _integer(self, what: str) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise ParseError(f"expected {what}", start)
        return int(self.text[start:self.pos])

    def _number(self) -> float:
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            self.pos += 1
        if self.pos < len(self.text) and self.text[self.pos] in "eE":
            save = self.pos
            self.pos += 1
            if self.pos < len(self.text) and self.text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(self.text) and self.text[self.pos].isdigit():
                while self.pos < len(self.text) and self.text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = save
        try:
            return float(self.text[start:self.pos])
        except ValueError:
            raise ParseError("malformed number", start) from None


def parse(text: str, d: int | None = None, split_adjoint: bool = False) -> Expr:
    """Parse an expression over variables x1..xd (d inferred when omitted).

    With ``split_adjoint`` each variable is replaced by ``x_j + i*x_{d+j}``
    over 2d hermitian variables, so that ``adj()`` acts as the formal adjoint
    of a non-hermitian variable.
    """
    if d is None:
        found = re.findall(r"x(\d+)", text)
        d = max((int(s) for s in found), default=0)
    return _Parser(text, d, split_adjoint).parse()


# ---------------------------------------------------------------------------
# printing

def _fmt_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _fmt_scalar(z: complex) -> str:
    re, im = z.real, z.imag
    if im == 0:
        return _fmt_real(re) if re >= 0 else f"({_fmt_real(re)})"
    if z == 1j:
        return "i"
    if re == 0:
        return f"({_fmt_real(im)}*i)" if im >= 0 else f"(-{_fmt_real(-im)}*i)"
    op = "+" if im >= 0 else "-"
    return f"({_fmt_real(re)}{op}{_fmt_real(abs(im))}*i)"


def to_str(r: Expr) -> str:
    """Print r so that parse(to_str(r)) is structurally identical to r."""
    if r.kind == SCALAR:
        return _fmt_scalar(r.value)
    if r.kind == VAR:
        return f"x{r.index}"
    if r.kind == INV:
        return f"inv({to_str(r.children[0])})"
    if r.kind == ADD:
        a, b = r.children
        left = to_str(a)
        # a + (-1)*c prints as subtraction when that round-trips
        if b.kind == MUL and b.children[0] == scalar(-1):
            c = b.children[1]
            if not (c.kind == MUL and c.children[0] == scalar(-1)):
                return f"{left}-{_paren_if(c, (ADD,))}"
        return f"{left}+{_paren_if(b, (ADD,))}"
    # MUL
    a, b = r.children
    return f"{_paren_if(a, (ADD,))}*{_paren_if(b, (ADD, MUL))}"


def _paren_if(e: Expr, kinds: tuple[str, ...]) -> str:
    s = to_str(e)
    return f"({s})" if e.kind in kinds else s
