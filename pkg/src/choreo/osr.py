"""Offering selection rules: comparisons over non-functional properties joined by AND/OR.

Grammar::

    expr       := term ("OR" term)*
    term       := factor ("AND" factor)*
    factor     := "(" expr ")" | "TRUE" | "FALSE" | comparison
    comparison := path op literal
    path       := ident ("." ident)*
    op         := "=" | "!=" | "<" | "<=" | ">" | ">="
    literal    := quoted-string | decimal-number | "true" | "false"

The empty string is the always-true rule ``And([])``.
"""

from __future__ import annotations

import enum
import operator
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Mapping, Union

from .errors import OsrSyntaxError

Literal = Union[str, Decimal, bool]


class Op(enum.Enum):
    EQ = "="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="

    @property
    def ordering(self) -> bool:
        return self in (Op.LT, Op.LE, Op.GT, Op.GE)


_PY_OPS = {
    Op.EQ: operator.eq,
    Op.NE: operator.ne,
    Op.LT: operator.lt,
    Op.LE: operator.le,
    Op.GT: operator.gt,
    Op.GE: operator.ge,
}


@dataclass(frozen=True, eq=False)
class Comparison:
    path: str
    op: Op
    literal: Literal

    def __post_init__(self) -> None:
        if isinstance(self.literal, (int, float)) and not isinstance(self.literal, bool):
            object.__setattr__(self, "literal", _to_decimal(self.literal))
        if self.op.ordering and not isinstance(self.literal, Decimal):
            raise ValueError(f"operator {self.op.value} requires a numeric literal")

    def _key(self):
        # True == Decimal(1) in Python; keep literal kinds apart
        return (self.path, self.op, type(self.literal).__name__, self.literal)

    def __eq__(self, other):
        if not isinstance(other, Comparison):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@dataclass(frozen=True)
class And:
    items: tuple["OsrExpr", ...] = ()

    def __init__(self, items=()):
        object.__setattr__(self, "items", tuple(items))


@dataclass(frozen=True)
class Or:
    items: tuple["OsrExpr", ...] = ()

    def __init__(self, items=()):
        object.__setattr__(self, "items", tuple(items))


OsrExpr = Union[Comparison, And, Or]

TRUE = And()
FALSE = Or()


def _to_decimal(value) -> Decimal:
    # str() first so 0.1 compares as 0.1, not its binary expansion
    return Decimal(str(value))


# --- evaluation -----------------------------------------------------------


def _compare(cmp: Comparison, props: Mapping[str, object]) -> bool:
    if cmp.path not in props:
        return False
    value = props[cmp.path]
    lit = cmp.literal
    if isinstance(lit, bool):
        if not isinstance(value, bool):
            return False
    elif isinstance(lit, Decimal):
        if isinstance(value, bool) or not isinstance(value, (int, float, Decimal)):
            return False
        try:
            value = _to_decimal(value)
        except InvalidOperation:
            return False
        if value.is_nan():
            return False
    elif not isinstance(value, str):
        return False
    return _PY_OPS[cmp.op](value, lit)


def evaluate(expr: OsrExpr, od) -> bool:
    """Evaluate ``expr`` against an offering (or a bare property mapping).

    Missing properties and type-mismatched comparisons are false.
    """
    props = od if isinstance(od, Mapping) else od.nonFunctional
    return _eval(expr, props)


def _eval(expr: OsrExpr, props: Mapping[str, object]) -> bool:
    if isinstance(expr, Comparison):
        return _compare(expr, props)
    if isinstance(expr, And):
        return all(_eval(e, props) for e in expr.items)
    return any(_eval(e, props) for e in expr.items)


# --- normalization --------------------------------------------------------


def normalize(expr: OsrExpr) -> OsrExpr:
    """Flatten nested same-kind nodes, fold constants, unwrap singletons."""
    if isinstance(expr, Comparison):
        return expr
    kind = type(expr)
    identity, absorbing = (TRUE, FALSE) if kind is And else (FALSE, TRUE)
    items: list[OsrExpr] = []
    for child in expr.items:
        child = normalize(child)
        if child == absorbing:
            return absorbing
        if child == identity:
            continue
        if type(child) is kind:
            items.extend(child.items)
        else:
            items.append(child)
    if len(items) == 1:
        return items[0]
    return kind(items)


# --- serialization --------------------------------------------------------


def _literal_text(lit: Literal) -> str:
    if isinstance(lit, bool):
        return "true" if lit else "false"
    if isinstance(lit, Decimal):
        return format(lit, "f")
    escaped = lit.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def serialize_osr(expr: OsrExpr) -> str:
    """Canonical, fully parenthesized text; round-trips through :func:`parse_osr`."""
    expr = normalize(expr)
    if expr == TRUE:
        return ""
    return _ser(expr)


def _ser(expr: OsrExpr) -> str:
    if isinstance(expr, Comparison):
        return f"({expr.path} {expr.op.value} {_literal_text(expr.literal)})"
    if expr == FALSE:
        return "FALSE"
    if expr == TRUE:
        return "TRUE"
    joiner = " AND " if isinstance(expr, And) else " OR "
    return "(" + joiner.join(_ser(e) for e in expr.items) + ")"


# --- parsing --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<op>!=|<=|>=|=|<|>)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<path>[A-Za-z_][\w-]*(?:\.[A-Za-z_][\w-]*)*)
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise OsrSyntaxError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def keyword(self, word: str) -> bool:
        tok = self.peek()
        if tok.kind == "path" and tok.text == word:
            self.i += 1
            return True
        return False

    def expr(self) -> OsrExpr:
        items = [self.term()]
        while self.keyword("OR"):
            items.append(self.term())
        return items[0] if len(items) == 1 else Or(items)

    def term(self) -> OsrExpr:
        items = [self.factor()]
        while self.keyword("AND"):
            items.append(self.factor())
        return items[0] if len(items) == 1 else And(items)

    def factor(self) -> OsrExpr:
        tok = self.peek()
        if tok.kind == "lparen":
            self.take()
            inner = self.expr()
            close = self.take()
            if close.kind != "rparen":
                raise OsrSyntaxError(close.pos, "expected ')'")
            return inner
        nxt = self.toks[self.i + 1] if tok.kind != "eof" else tok
        if tok.kind == "path" and tok.text in ("TRUE", "FALSE") and nxt.kind != "op":
            self.take()
            return TRUE if tok.text == "TRUE" else FALSE
        return self.comparison()

    def comparison(self) -> Comparison:
        path = self.take()
        if path.kind != "path" or path.text in ("AND", "OR"):
            raise OsrSyntaxError(path.pos, f"expected property path, got {path.text or 'end of input'!r}")
        op_tok = self.take()
        if op_tok.kind != "op":
            raise OsrSyntaxError(op_tok.pos, f"expected comparison operator, got {op_tok.text or 'end of input'!r}")
        op = Op(op_tok.text)
        lit_tok = self.take()
        if lit_tok.kind == "string":
            lit: Literal = re.sub(r"\\(.)", r"\1", lit_tok.text[1:-1])
        elif lit_tok.kind == "number":
            lit = Decimal(lit_tok.text)
        elif lit_tok.kind == "path" and lit_tok.text in ("true", "false"):
            lit = lit_tok.text == "true"
        else:
            raise OsrSyntaxError(lit_tok.pos, f"expected literal, got {lit_tok.text or 'end of input'!r}")
        if op.ordering and not isinstance(lit, Decimal):
            raise OsrSyntaxError(lit_tok.pos, f"operator {op.value} requires a numeric literal")
        return Comparison(path.text, op, lit)


def parse_osr(text: str) -> OsrExpr:
    """Parse rule text; AND binds tighter than OR.

    >>> parse_osr('extent.city = "Munich"')
    Comparison(path='extent.city', op=<Op.EQ: '='>, literal='Munich')
    """
    parser = _Parser(text)
    if parser.peek().kind == "eof":
        return TRUE
    result = parser.expr()
    tail = parser.peek()
    if tail.kind != "eof":
        raise OsrSyntaxError(tail.pos, f"unexpected {tail.text!r}")
    return result
