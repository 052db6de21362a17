"""LOC formula AST, parser and printer.

Concrete grammar::

    formula := expr relop number
             | expr distop '{' number ',' number ',' number '}'
    relop   := '<=' | '<' | '>=' | '>' | '==' | '!='
    distop  := '><' | '<|' | '|>'
    expr    := ordinary + - * / arithmetic with parentheses and unary minus
    term    := annotation '(' event '[' 'i' ( '+' uint )? ']' ')'

``><`` is the partitioning distribution operator, ``<|`` the cumulative
(value <= grid point) one and ``|>`` the complementary (value >= grid point)
one.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

RELATIONS = ("<=", "<", ">=", ">", "==", "!=")
DIST_OPS = ("><", "<|", "|>")
OP_NAMES = {"><": "partition", "<|": "at_most", "|>": "at_least"}


class FormulaError(ValueError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at column {pos + 1})"
        super().__init__(message)


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Term:
    """``annotation(event[i+offset])``"""
    annotation: str
    event: str
    offset: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, Term, Neg, BinOp]


def _exact(x: float) -> Fraction:
    # shortest repr keeps decimal literals like 0.01 exact
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class AnalysisPeriod:
    min: float
    max: float
    step: float

    def __post_init__(self):
        for v in (self.min, self.max, self.step):
            if not math.isfinite(v):
                raise FormulaError("analysis period values must be finite")
        if self.step <= 0:
            raise FormulaError(f"analysis period step must be > 0, got {self.step}")
        if self.min >= self.max:
            raise FormulaError(f"analysis period needs min < max, got {self.min} >= {self.max}")

    def grid(self) -> list[float]:
        """Grid points min, min+step, ..., with the last one clamped to max."""
        lo, hi, st = _exact(self.min), _exact(self.max), _exact(self.step)
        n = math.ceil((hi - lo) / st)
        pts = [float(lo + k * st) for k in range(n)]
        pts.append(float(hi))
        return pts

    def bin_count(self, operator: str) -> int:
        npts = len(self.grid())
        if operator == "><":
            return npts + 1
        if operator in ("<|", "|>"):
            return npts
        raise FormulaError(f"unknown distribution operator {operator!r}")


def bin_count(period: AnalysisPeriod, operator: str) -> int:
    return period.bin_count(operator)


@dataclass(frozen=True)
class LocFormula:
    kind: str  # "assertion" | "distribution"
    lhs: Node
    relation: str | None = None
    rhs: float | None = None
    operator: str | None = None
    period: AnalysisPeriod | None = None
    text: str = field(default="", compare=False)

    def terms(self) -> list[Term]:
        out: list[Term] = []
        _collect_terms(self.lhs, out)
        return out

    def __str__(self) -> str:
        return to_text(self)


def _collect_terms(node: Node, out: list[Term]) -> None:
    if isinstance(node, Term):
        out.append(node)
    elif isinstance(node, Neg):
        _collect_terms(node.operand, out)
    elif isinstance(node, BinOp):
        _collect_terms(node.left, out)
        _collect_terms(node.right, out)


def max_offset(formula: LocFormula) -> int:
    return max(t.offset for t in formula.terms())


def offsets_by_event(formula: LocFormula) -> dict[str, int]:
    out: dict[str, int] = {}
    for t in formula.terms():
        out[t.event] = max(out.get(t.event, 0), t.offset)
    return out


# --- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|<\||>=|><|==|!=|\|>|[<>+\-*/()\[\]{},])
""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def next(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value or kind == "eof":
            found = "end of input" if kind == "eof" else repr(val)
            raise FormulaError(f"expected {value!r}, found {found}", pos)

    def formula(self) -> LocFormula:
        lhs = self.expr()
        kind, val, pos = self.next()
        if kind == "op" and val in RELATIONS:
            rhs = self.signed_number()
            result = LocFormula("assertion", lhs, relation=val, rhs=rhs, text=self.text)
        elif kind == "op" and val in DIST_OPS:
            self.expect("{")
            lo = self.signed_number()
            self.expect(",")
            hi = self.signed_number()
            self.expect(",")
            step = self.signed_number()
            self.expect("}")
            result = LocFormula("distribution", lhs, operator=val,
                                period=AnalysisPeriod(lo, hi, step), text=self.text)
        elif kind == "eof":
            raise FormulaError("formula needs a relation or distribution operator", pos)
        else:
            raise FormulaError(f"unexpected {val!r}", pos)
        kind, val, pos = self.peek()
        if kind != "eof":
            raise FormulaError(f"trailing input {val!r}", pos)
        if not result.terms():
            raise FormulaError("formula must reference at least one annotation term", 0)
        return result

    def signed_number(self) -> float:
        kind, val, pos = self.next()
        sign = 1.0
        if val in ("-", "+") and kind == "op":
            sign = -1.0 if val == "-" else 1.0
            kind, val, pos = self.next()
        if kind != "num":
            raise FormulaError(f"expected a number, found {val!r}" if val else
                               "expected a number, found end of input", pos)
        return sign * float(val)

    def expr(self) -> Node:
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.next()[1]
            node = _fold(BinOp(op, node, self.product()))
        return node

    def product(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.next()[1]
            node = _fold(BinOp(op, node, self.unary()))
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return _fold(Neg(self.unary()))
        if kind == "op" and val == "+":
            self.next()
            return self.unary()
        return self.primary()

    def primary(self) -> Node:
        kind, val, pos = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            return self.term(val, pos)
        found = "end of input" if kind == "eof" else repr(val)
        raise FormulaError(f"expected a number, term or '(', found {found}", pos)

    def term(self, annotation: str, pos: int) -> Term:
        self.expect("(")
        kind, event, epos = self.next()
        if kind != "ident":
            raise FormulaError("expected an event name", epos)
        self.expect("[")
        kind, var, vpos = self.next()
        if kind != "ident":
            raise FormulaError("expected the index variable 'i'", vpos)
        if var != "i":
            raise FormulaError(f"only the single index variable 'i' is allowed, found {var!r}", vpos)
        offset = 0
        kind, val, opos = self.peek()
        if kind == "op" and val == "-":
            raise FormulaError("negative index offsets are not allowed", opos)
        if kind == "op" and val == "+":
            self.next()
            kind, val, npos = self.next()
            if kind != "num" or not val.isdigit():
                raise FormulaError("index offset must be a non-negative integer", npos)
            offset = int(val)
        self.expect("]")
        self.expect(")")
        return Term(annotation, event, offset)


_FOLD = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
}


def _fold(node: Node) -> Node:
    if isinstance(node, Neg) and isinstance(node.operand, Num):
        return Num(-node.operand.value)
    if isinstance(node, BinOp) and isinstance(node.left, Num) and isinstance(node.right, Num):
        if node.op == "/" and node.right.value == 0:
            return node  # keep it; evaluation reports the instance as undefined
        return Num(_FOLD[node.op](node.left.value, node.right.value))
    return node


def parse_formula(text: str) -> LocFormula:
    return _Parser(text).formula()


# --- printer ---------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _num_text(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def node_text(node: Node) -> str:
    if isinstance(node, Num):
        s = _num_text(node.value)
        return f"({s})" if node.value < 0 or s.startswith("-") else s
    if isinstance(node, Term):
        idx = "i" if node.offset == 0 else f"i+{node.offset}"
        return f"{node.annotation}({node.event}[{idx}])"
    if isinstance(node, Neg):
        inner = node_text(node.operand)
        if isinstance(node.operand, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    prec = _PREC[node.op]
    left = node_text(node.left)
    if isinstance(node.left, BinOp) and _PREC[node.left.op] < prec:
        left = f"({left})"
    right = node_text(node.right)
    if isinstance(node.right, BinOp) and _PREC[node.right.op] <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def to_text(formula: LocFormula) -> str:
    lhs = node_text(formula.lhs)
    if formula.kind == "assertion":
        return f"{lhs} {formula.relation} {_num_text(formula.rhs)}"
    p = formula.period
    return f"{lhs} {formula.operator} {{{_num_text(p.min)}, {_num_text(p.max)}, {_num_text(p.step)}}}"
