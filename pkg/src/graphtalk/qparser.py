"""Recursive-descent parser for the logical-form surface syntax."""

from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass

from . import ast as A
from .errors import ParseError, UnknownIdentifierError
from .schema import SchemaRegistry, is_qid

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<date>\d{4}\.\d{2}\.\d{2}(?![\d.]))
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<domain>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>==|>=|<=|&&|\|\||[<>!()\[\],/+*?])
    """,
    re.VERBOSE,
)

KEYWORDS = frozenset(
    "filter of sort asc desc count max min sum avg by join on contains any NULL".split()
)
AGGS = {a.value: a for a in A.Agg}
COMPARE_OPS = {"==": A.Op.EQ, ">=": A.Op.GE, "<=": A.Op.LE, ">": A.Op.GT, "<": A.Op.LT}


@dataclass(frozen=True)
class Token:
    kind: str  # string, date, number, domain, name, keyword, punct, eof
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(_line_col(text, pos), ["token"], text[pos], pos)
        kind = m.lastgroup
        if kind != "ws":
            word = m.group()
            if kind == "name" and word in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, word, pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


class _Parser:
    def __init__(self, text: str, registry: SchemaRegistry):
        self.text = text
        self.registry = registry
        self.tokens = tokenize(text)
        self.i = 0

    # --- token helpers ---

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "keyword") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, *expected: str):
        t = self.tok
        found = t.text if t.kind != "eof" else "<end of input>"
        raise ParseError(_line_col(self.text, t.offset), list(expected), found, t.offset)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def expect_int(self) -> int:
        t = self.tok
        if t.kind != "number" or not re.fullmatch(r"\d+", t.text):
            self.fail("positive integer")
        self.advance()
        return int(t.text)

    # --- queries ---

    def query(self) -> A.QueryExpr:
        q = self.prefix()
        while self.at("join"):
            self.advance()
            right = self.prefix()
            self.expect("on")
            lp, op, rp = self.join_condition()
            q = A.Join(q, right, lp, op, rp)
        return q

    def join_condition(self):
        if self.at("contains"):
            self.advance()
            self.expect("(")
            lp = self.path()
            self.expect(",")
            rp = self.path()
            self.expect(")")
            return lp, A.Op.CONTAINS, rp
        lp = self.path()
        op = self.operator()
        return lp, op, self.path()

    def prefix(self) -> A.QueryExpr:
        if not self.at("["):
            return self.postfix()
        self.advance()
        if self._bracket_is_projection():
            items = [self.projected()]
            while self.at(","):
                self.advance()
                items.append(self.projected())
            self.expect("]")
            self.expect("of")
            return A.Projection(tuple(items), self.prefix())
        pred = self.predicate()
        self.expect("]")
        self.expect("of")
        return A.Verification(pred, self.prefix())

    def _bracket_is_projection(self) -> bool:
        if self.tok.kind != "name":
            return False
        save = self.i
        try:
            self.path()
            return self.at(",", "]", "filter")
        except ParseError:
            return False
        finally:
            self.i = save

    def projected(self) -> A.Projected:
        p = self.path()
        if self.at("filter"):
            self.advance()
            return A.Projected(p, self.predicate())
        return A.Projected(p)

    def postfix(self) -> A.QueryExpr:
        q = self.primary()
        while True:
            if self.at("filter"):
                self.advance()
                q = A.Selection(q, self.predicate())
            elif self.at("[") and self.peek().kind == "number":
                self.advance()
                i = self.expect_int()
                if self.at(","):
                    self.advance()
                    j = self.expect_int()
                    self.expect("]")
                    q = self._build(A.Slice, q, i, j)
                else:
                    self.expect("]")
                    q = self._build(A.Index, q, i)
            else:
                return q

    def _build(self, cls, *args):
        start = self.tok
        try:
            return cls(*args)
        except ValueError as exc:
            raise ParseError(_line_col(self.text, start.offset), [str(exc)], start.text, start.offset) from None

    def primary(self) -> A.QueryExpr:
        t = self.tok
        if t.kind == "domain":
            name = t.text[1:]
            if not self.registry.has_domain(name):
                raise UnknownIdentifierError(name, "domain", _line_col(self.text, t.offset))
            self.advance()
            self.expect("(")
            self.expect(")")
            return A.DomainScan(name)
        if self.at("("):
            self.advance()
            q = self.query()
            self.expect(")")
            return q
        if self.at("sort"):
            self.advance()
            self.expect("(")
            p = self.path()
            if not self.at("asc", "desc"):
                self.fail("'asc'", "'desc'")
            direction = A.Direction(self.advance().text)
            self.expect("of")
            q = self.query()
            self.expect(")")
            return A.Sort(p, direction, q)
        if t.kind == "keyword" and t.text in AGGS:
            agg = AGGS[self.advance().text]
            self.expect("(")
            if agg is A.Agg.COUNT and self.tok.kind != "name":
                q = self.query()
                self.expect(")")
                return A.AggregateCount(q)
            p = self.path()
            self.expect("of")
            q = self.query()
            self.expect(")")
            if self.at("by"):
                self.advance()
                return A.GroupBy(agg, p, q, self.path())
            return A.AggregateOver(agg, p, q)
        self.fail("query")

    # --- predicates ---

    def predicate(self) -> A.Predicate:
        left = self.conjunction()
        while self.at("||"):
            self.advance()
            left = A.Or(left, self.conjunction())
        return left

    def conjunction(self) -> A.Predicate:
        left = self.unary()
        while self.at("&&"):
            self.advance()
            left = A.And(left, self.unary())
        return left

    def unary(self) -> A.Predicate:
        if self.at("!"):
            self.advance()
            return A.Not(self.unary())
        if self.at("("):
            qualified = self._try_qualified()
            if qualified is not None:
                return qualified
            self.advance()
            p = self.predicate()
            self.expect(")")
            return p
        return self.atom()

    def _try_qualified(self) -> A.Qualified | None:
        save = self.i
        self.advance()
        if self.tok.kind != "name":
            self.i = save
            return None
        try:
            outer = self.path()
        except ParseError:
            self.i = save
            return None
        if not self.at("filter"):
            self.i = save
            return None
        self.advance()
        qpath = self.path()
        qop = self.operator()
        qval = self.value(qpath)
        self.expect(")")
        op = self.operator()
        return A.Qualified(outer, op, self.value(outer), qpath, qop, qval)

    def atom(self) -> A.Predicate:
        t = self.tok
        if self.at("contains"):
            self.advance()
            self.expect("(")
            p = self.path()
            self.expect(",")
            v = self.value(p)
            self.expect(")")
            return A.Compare(p, A.Op.CONTAINS, v)
        if t.kind == "keyword" and t.text in AGGS:
            agg = AGGS[self.advance().text]
            self.expect("(")
            p = self.path()
            self.expect(")")
            op = self.operator()
            v = self.number_value() if agg is A.Agg.COUNT else self.value(p)
            return A.AggCompare(agg, p, op, v)
        if t.kind != "name":
            self.fail("predicate")
        p = self.path()
        op = self.operator()
        if self.at("any"):
            self.advance()
            self.expect("(")
            q = self.query()
            self.expect(")")
            return A.SubqueryAny(p, op, q)
        return A.Compare(p, op, self.value(p))

    def operator(self) -> A.Op:
        if self.at("contains"):
            self.advance()
            return A.Op.CONTAINS
        t = self.tok
        if t.kind == "punct" and t.text in COMPARE_OPS:
            self.advance()
            return COMPARE_OPS[t.text]
        self.fail("comparison operator")

    # --- paths and values ---

    def path(self) -> A.PropertyPath:
        steps = [self.step()]
        while self.at("/"):
            self.advance()
            steps.append(self.step())
        return A.PropertyPath(tuple(steps))

    def step(self) -> A.Step:
        t = self.tok
        if t.kind != "name":
            self.fail("property name")
        if not self.registry.has_name(t.text):
            raise UnknownIdentifierError(t.text, "property", _line_col(self.text, t.offset))
        self.advance()
        mod = A.Modifier.ONE
        if self.at("+", "*", "?"):
            mod = A.Modifier(self.advance().text)
        return A.Step(t.text, mod)

    def number_value(self) -> A.Num:
        t = self.tok
        if t.kind != "number":
            self.fail("number")
        self.advance()
        return A.Num(_number(t.text))

    def value(self, p: A.PropertyPath) -> A.Value:
        t = self.tok
        kind = self.registry.value_kind(p.steps[-1].name)
        if t.kind == "keyword" and t.text == "NULL":
            self.advance()
            return A.NULL
        if t.kind == "number":
            self.advance()
            return A.Num(_number(t.text), kind.unit if kind.kind == "quantity" else None)
        if t.kind == "date":
            self.advance()
            y, m, d = (int(x) for x in t.text.split("."))
            try:
                return A.Date(_dt.date(y, m, d))
            except ValueError:
                raise ParseError(_line_col(self.text, t.offset), ["valid date"], t.text, t.offset) from None
        if t.kind == "string":
            self.advance()
            text = json.loads(t.text)
            if kind.is_entity:
                if is_qid(text):
                    return A.Entity(A.Resolved(text))
                if not text:
                    raise ParseError(_line_col(self.text, t.offset), ["non-empty mention"], t.text, t.offset)
                return A.Entity(A.Mention(text))
            return A.Str(text)
        self.fail("value")


def _number(text: str) -> int | float:
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return float(text)


def _finish(parser: _Parser, node):
    if parser.tok.kind != "eof":
        parser.fail("end of input")
    return node


def parse_query(text: str, registry: SchemaRegistry) -> A.QueryExpr:
    """Parse surface text into a QueryExpr.

    Raises ParseError for syntax errors and UnknownIdentifierError for
    names the registry does not know.
    """
    p = _Parser(text, registry)
    return _finish(p, p.query())


def parse_predicate(text: str, registry: SchemaRegistry) -> A.Predicate:
    p = _Parser(text, registry)
    return _finish(p, p.predicate())
