"""Syntax tree, printer and parser for the SPARQL subset the toolchain speaks.

The subset covers SELECT/ASK, basic graph patterns with property paths,
OPTIONAL, UNION, FILTER (with EXISTS / NOT EXISTS), BIND, VALUES,
sub-selects, aggregates, GROUP BY, ORDER BY, LIMIT and OFFSET. Anything
else is rejected with UnsupportedConstruct.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass, field
from typing import Union

from .errors import SparqlSyntaxError, UnsupportedConstruct

PREFIXES = {
    "wd": "http://www.wikidata.org/entity/",
    "wdt": "http://www.wikidata.org/prop/direct/",
    "p": "http://www.wikidata.org/prop/",
    "ps": "http://www.wikidata.org/prop/statement/",
    "pq": "http://www.wikidata.org/prop/qualifier/",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
}


# --- terms, paths, expressions ------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Iri:
    prefix: str | None
    local: str


@dataclass(frozen=True)
class Lit:
    value: object  # int, float, str or datetime.date


Term = Union[Var, Iri, Lit]


@dataclass(frozen=True)
class PSeq:
    parts: tuple


@dataclass(frozen=True)
class PAlt:
    parts: tuple


@dataclass(frozen=True)
class PMod:
    path: object
    mod: str


@dataclass(frozen=True)
class BinOp:
    op: str  # = != < > <= >= && ||
    left: object
    right: object


@dataclass(frozen=True)
class NotExpr:
    operand: object


@dataclass(frozen=True)
class Exists:
    group: "Group"
    negated: bool = False


@dataclass(frozen=True)
class Func:
    name: str
    args: tuple


@dataclass(frozen=True)
class AggExpr:
    name: str  # COUNT MAX MIN SUM AVG
    arg: object | None  # None means *
    distinct: bool = False


# --- patterns -----------------------------------------------------------------


@dataclass(frozen=True)
class Triple:
    s: object
    p: object
    o: object


@dataclass(frozen=True)
class Group:
    elements: tuple = ()


@dataclass(frozen=True)
class Optional:
    group: Group


@dataclass(frozen=True)
class Union_:
    groups: tuple


@dataclass(frozen=True)
class Filter:
    expr: object


@dataclass(frozen=True)
class Bind:
    expr: object
    var: Var


@dataclass(frozen=True)
class Values:
    var: Var
    terms: tuple


@dataclass(frozen=True)
class Select:
    projection: tuple  # Var or (expr, Var)
    where: Group
    distinct: bool = False
    group_by: tuple = ()
    order_by: tuple = ()  # (direction, expr)
    offset: int | None = None
    limit: int | None = None

    @property
    def out_vars(self) -> list[Var]:
        return [p if isinstance(p, Var) else p[1] for p in self.projection]


@dataclass(frozen=True)
class SubSelect:
    select: Select


@dataclass(frozen=True)
class Ask:
    where: Group


@dataclass(frozen=True)
class Query:
    form: Union[Select, Ask]
    prefixes: dict = field(default_factory=lambda: dict(PREFIXES), compare=False)


# --- printing -----------------------------------------------------------------

_IND = "  "


def term_text(t) -> str:
    if isinstance(t, Var):
        return "?" + t.name
    if isinstance(t, Iri):
        return f"{t.prefix}:{t.local}" if t.prefix is not None else f"<{t.local}>"
    if isinstance(t, Lit):
        v = t.value
        if isinstance(v, bool):
            raise TypeError("boolean literals are outside the subset")
        if isinstance(v, int):
            return str(v)
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, _dt.date):
            return f'"{v.isoformat()}T00:00:00Z"^^xsd:dateTime'
        return json.dumps(v, ensure_ascii=False)
    raise TypeError(f"not a term: {t!r}")


def path_text(p, top: bool = True) -> str:
    if isinstance(p, (Iri, Var)):
        return term_text(p)
    if isinstance(p, PSeq):
        return "/".join(path_text(x, False) for x in p.parts)
    if isinstance(p, PAlt):
        text = "|".join(path_text(x, False) for x in p.parts)
        return text if top else f"({text})"
    if isinstance(p, PMod):
        inner = p.path
        body = path_text(inner, False)
        if isinstance(inner, (PSeq, PAlt)) and not body.startswith("("):
            body = f"({body})"
        return body + p.mod
    raise TypeError(f"not a path: {p!r}")


_PREC = {"||": 0, "&&": 1, "=": 2, "!=": 2, "<": 2, ">": 2, "<=": 2, ">=": 2}


def expr_text(e, indent: int = 0, prec: int = 0) -> str:
    if isinstance(e, (Var, Iri, Lit)):
        return term_text(e)
    if isinstance(e, BinOp):
        own = _PREC[e.op]
        right_prec = own + 1 if own < 2 else 3
        text = f"{expr_text(e.left, indent, own)} {e.op} {expr_text(e.right, indent, right_prec)}"
        return f"({text})" if own < prec else text
    if isinstance(e, NotExpr):
        return f"!({expr_text(e.operand, indent, 0)})"
    if isinstance(e, Exists):
        kw = "NOT EXISTS" if e.negated else "EXISTS"
        return f"{kw} {group_text(e.group, indent)}"
    if isinstance(e, Func):
        return f"{e.name}(" + ", ".join(expr_text(a, indent) for a in e.args) + ")"
    if isinstance(e, AggExpr):
        arg = "*" if e.arg is None else expr_text(e.arg, indent)
        return f"{e.name}({'DISTINCT ' if e.distinct else ''}{arg})"
    raise TypeError(f"not an expression: {e!r}")


def _inline(group: Group) -> bool:
    return len(group.elements) == 1 and isinstance(group.elements[0], Triple)


def group_text(group: Group, indent: int) -> str:
    if not group.elements:
        return "{ }"
    if _inline(group):
        return "{ " + element_text(group.elements[0], indent) + " }"
    pad = _IND * (indent + 1)
    lines = ["{"]
    for el in group.elements:
        lines.append(pad + element_text(el, indent + 1))
    lines.append(_IND * indent + "}")
    return "\n".join(lines)


def element_text(el, indent: int) -> str:
    if isinstance(el, Triple):
        return f"{term_text(el.s)} {path_text(el.p)} {term_text(el.o)}."
    if isinstance(el, Optional):
        return "OPTIONAL " + group_text(el.group, indent)
    if isinstance(el, Union_):
        return " UNION ".join(group_text(g, indent) for g in el.groups)
    if isinstance(el, Filter):
        if isinstance(el.expr, Exists):
            return "FILTER " + expr_text(el.expr, indent)
        return f"FILTER({expr_text(el.expr, indent)})"
    if isinstance(el, Bind):
        return f"BIND({expr_text(el.expr, indent)} AS {term_text(el.var)})"
    if isinstance(el, Values):
        return f"VALUES {term_text(el.var)} {{ " + " ".join(term_text(t) for t in el.terms) + " }"
    if isinstance(el, SubSelect):
        pad = _IND * (indent + 1)
        return "{\n" + pad + select_text(el.select, indent + 1) + "\n" + _IND * indent + "}"
    if isinstance(el, Group):
        return group_text(el, indent)
    raise TypeError(f"not a pattern element: {el!r}")


def select_text(s: Select, indent: int = 0) -> str:
    proj = []
    for p in s.projection:
        if isinstance(p, Var):
            proj.append(term_text(p))
        else:
            proj.append(f"({expr_text(p[0], indent)} AS {term_text(p[1])})")
    head = "SELECT " + ("DISTINCT " if s.distinct else "") + " ".join(proj)
    text = f"{head} WHERE {_block(s.where, indent)}"
    if s.group_by:
        text += " GROUP BY " + " ".join(term_text(v) for v in s.group_by)
    if s.order_by:
        text += " ORDER BY " + " ".join(f"{d}({expr_text(e, indent)})" for d, e in s.order_by)
    if s.offset is not None:
        text += f" OFFSET {s.offset}"
    if s.limit is not None:
        text += f" LIMIT {s.limit}"
    return text


def _block(group: Group, indent: int) -> str:
    """Like group_text but never inlined, so WHERE clauses read uniformly."""
    pad = _IND * (indent + 1)
    lines = ["{"] + [pad + element_text(el, indent + 1) for el in group.elements] + [_IND * indent + "}"]
    return "\n".join(lines)


def to_text(q: Query) -> str:
    head = "".join(f"PREFIX {k}: <{v}>\n" for k, v in PREFIXES.items())
    if isinstance(q.form, Ask):
        return head + "ASK " + _block(q.form.where, 0) + "\n"
    return head + select_text(q.form, 0) + "\n"


# --- parsing ------------------------------------------------------------------

UNSUPPORTED = frozenset(
    "SERVICE GRAPH MINUS CONSTRUCT DESCRIBE FROM NAMED HAVING REDUCED BASE LOAD INSERT DELETE "
    "CLEAR DROP CREATE WITH USING REGEX STR LANG LANGMATCHES CONTAINS STRSTARTS IF BOUND "
    "SAMPLE GROUP_CONCAT IN".split()
)
KEYWORDS = frozenset(
    "PREFIX SELECT DISTINCT WHERE FILTER OPTIONAL UNION BIND AS VALUES ASK ORDER BY ASC DESC "
    "LIMIT OFFSET GROUP EXISTS NOT COUNT MAX MIN SUM AVG COALESCE".split()
) | UNSUPPORTED

_TOK = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\s]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<number>[+-]?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+))
  | (?P<pname>[A-Za-z][A-Za-z0-9_-]*:[A-Za-z0-9_][A-Za-z0-9_.-]*(?<!\.)|[A-Za-z][A-Za-z0-9_-]*:)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>\^\^|\^|&&|\|\||!=|<=|>=|[{}().,;/|*+?!=<>\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOK.match(text, pos)
        if m is None:
            raise SparqlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            word = m.group()
            if kind == "word":
                up = word.upper()
                if up in KEYWORDS:
                    kind, word = "kw", up
                elif word == "a":
                    kind = "a"
            out.append(_Tok(kind, word, pos))
        pos = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


def _unescape(raw: str) -> str:
    body = raw[1:-1]
    if raw[0] == "'":
        body = body.replace('\\"', '"').replace("\\'", "'").replace('"', '\\"')
    return json.loads('"' + body + '"')


class _SparqlParser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def adv(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("kw", "punct") and t.text in texts

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self._unsupported_or(f"expected {text!r}, found {self.tok.text or '<eof>'!r}")
        return self.adv()

    def _unsupported_or(self, message: str):
        t = self.tok
        if t.kind == "kw" and t.text in UNSUPPORTED:
            raise UnsupportedConstruct(t.text, t.offset)
        if t.kind == "a":
            raise UnsupportedConstruct("a (rdf:type shorthand)", t.offset)
        if t.kind == "lang":
            raise UnsupportedConstruct("language tag", t.offset)
        if t.kind == "punct" and t.text == "[":
            raise UnsupportedConstruct("blank node", t.offset)
        raise SparqlSyntaxError(message, t.offset)

    # --- top level ---

    def query(self) -> Query:
        while self.at("PREFIX"):
            self.adv()
            t = self.adv()
            if t.kind != "pname" or not t.text.endswith(":"):
                raise SparqlSyntaxError("expected prefix name", t.offset)
            iri = self.adv()
            if iri.kind != "iri":
                raise SparqlSyntaxError("expected IRI", iri.offset)
            self.prefixes[t.text[:-1]] = iri.text[1:-1]
        if self.at("ASK"):
            self.adv()
            if self.at("WHERE"):
                self.adv()
            form = Ask(self.group())
        elif self.at("SELECT"):
            form = self.select()
        else:
            self._unsupported_or("expected SELECT or ASK")
        if self.tok.kind != "eof":
            self._unsupported_or(f"trailing input {self.tok.text!r}")
        return Query(form, dict(self.prefixes))

    def select(self) -> Select:
        self.expect("SELECT")
        distinct = False
        if self.at("DISTINCT"):
            self.adv()
            distinct = True
        proj = []
        while True:
            if self.tok.kind == "var":
                proj.append(Var(self.adv().text[1:]))
            elif self.at("("):
                self.adv()
                e = self.expr()
                self.expect("AS")
                v = self.adv()
                if v.kind != "var":
                    raise SparqlSyntaxError("expected variable after AS", v.offset)
                self.expect(")")
                proj.append((e, Var(v.text[1:])))
            elif self.at("*"):
                raise UnsupportedConstruct("SELECT *", self.tok.offset)
            else:
                break
        if not proj:
            self._unsupported_or("empty projection")
        if self.at("WHERE"):
            self.adv()
        where = self.group()
        group_by, order_by, offset, limit = (), (), None, None
        if self.at("GROUP"):
            self.adv()
            self.expect("BY")
            gb = []
            while self.tok.kind == "var":
                gb.append(Var(self.adv().text[1:]))
            if not gb:
                self._unsupported_or("GROUP BY expects variables")
            group_by = tuple(gb)
        if self.at("ORDER"):
            self.adv()
            self.expect("BY")
            ob = []
            while True:
                if self.at("ASC", "DESC"):
                    d = self.adv().text
                    self.expect("(")
                    e = self.expr()
                    self.expect(")")
                    ob.append((d, e))
                elif self.tok.kind == "var":
                    ob.append(("ASC", Var(self.adv().text[1:])))
                else:
                    break
            if not ob:
                self._unsupported_or("ORDER BY expects conditions")
            order_by = tuple(ob)
        while self.at("LIMIT", "OFFSET"):
            kw = self.adv().text
            n = self.adv()
            if n.kind != "number" or not n.text.isdigit():
                raise SparqlSyntaxError(f"{kw} expects a non-negative integer", n.offset)
            if kw == "LIMIT":
                limit = int(n.text)
            else:
                offset = int(n.text)
        return Select(tuple(proj), where, distinct, group_by, order_by, offset, limit)

    # --- patterns ---

    def group(self) -> Group:
        self.expect("{")
        if self.at("SELECT"):
            sel = self.select()
            self.expect("}")
            return Group((SubSelect(sel),))
        elements: list = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise SparqlSyntaxError("unterminated group", self.tok.offset)
            if self.at("OPTIONAL"):
                self.adv()
                elements.append(Optional(self.group()))
            elif self.at("FILTER"):
                self.adv()
                elements.append(Filter(self.filter_expr()))
            elif self.at("BIND"):
                self.adv()
                self.expect("(")
                e = self.expr()
                self.expect("AS")
                v = self.adv()
                if v.kind != "var":
                    raise SparqlSyntaxError("expected variable after AS", v.offset)
                self.expect(")")
                elements.append(Bind(e, Var(v.text[1:])))
            elif self.at("VALUES"):
                self.adv()
                v = self.adv()
                if v.kind != "var":
                    raise UnsupportedConstruct("multi-variable VALUES", v.offset)
                self.expect("{")
                terms = []
                while not self.at("}"):
                    terms.append(self.term())
                self.adv()
                elements.append(Values(Var(v.text[1:]), tuple(terms)))
            elif self.at("{"):
                g = self.group()
                if self.at("UNION"):
                    groups = [g]
                    while self.at("UNION"):
                        self.adv()
                        groups.append(self.group())
                    elements.append(Union_(tuple(groups)))
                elif len(g.elements) == 1 and isinstance(g.elements[0], SubSelect):
                    elements.append(g.elements[0])
                else:
                    elements.append(g)
            else:
                elements.extend(self.triples_block())
            while self.at("."):
                self.adv()
        self.adv()
        return Group(tuple(elements))

    def filter_expr(self):
        if self.at("NOT"):
            self.adv()
            self.expect("EXISTS")
            return Exists(self.group(), True)
        if self.at("EXISTS"):
            self.adv()
            return Exists(self.group())
        self.expect("(")
        e = self.expr()
        self.expect(")")
        return e

    def triples_block(self) -> list:
        subj = self.term()
        out = []
        while True:
            pred = self.path()
            while True:
                out.append(Triple(subj, pred, self.term()))
                if not self.at(","):
                    break
                self.adv()
            if not self.at(";"):
                break
            self.adv()
            if self.at(".", "}"):
                break
        return out

    def term(self):
        t = self.tok
        if t.kind == "var":
            self.adv()
            return Var(t.text[1:])
        if t.kind in ("iri", "pname"):
            return self.iri()
        if t.kind == "number":
            self.adv()
            return Lit(_num(t.text))
        if t.kind == "string":
            self.adv()
            value = _unescape(t.text)
            if self.at("^^"):
                self.adv()
                dt = self.iri()
                return Lit(_typed(value, dt, t.offset))
            if self.tok.kind == "lang":
                raise UnsupportedConstruct("language tag", self.tok.offset)
            return Lit(value)
        self._unsupported_or(f"expected term, found {t.text or '<eof>'!r}")

    def iri(self) -> Iri:
        t = self.adv()
        if t.kind == "iri":
            full = t.text[1:-1]
            for pfx, base in PREFIXES.items():
                if full.startswith(base) and re.fullmatch(r"[A-Za-z0-9_]+", full[len(base):]):
                    return Iri(pfx, full[len(base):])
            return Iri(None, full)
        if t.kind != "pname":
            raise SparqlSyntaxError(f"expected IRI, found {t.text!r}", t.offset)
        pfx, local = t.text.split(":", 1)
        if pfx in self.prefixes and self.prefixes[pfx] != PREFIXES.get(pfx):
            full = self.prefixes[pfx] + local
            for known, base in PREFIXES.items():
                if full.startswith(base):
                    return Iri(known, full[len(base):])
            return Iri(None, full)
        if pfx not in PREFIXES and pfx not in self.prefixes:
            raise SparqlSyntaxError(f"undeclared prefix {pfx!r}", t.offset)
        return Iri(pfx, local)

    # property paths: alt := seq ('|' seq)*; seq := elt ('/' elt)*; elt := primary mod?
    def path(self):
        if self.tok.kind == "var":
            return Var(self.adv().text[1:])
        if self.tok.kind == "a":
            raise UnsupportedConstruct("a (rdf:type shorthand)", self.tok.offset)
        return self.path_alt()

    def path_alt(self):
        parts = [self.path_seq()]
        while self.at("|"):
            self.adv()
            parts.append(self.path_seq())
        return parts[0] if len(parts) == 1 else PAlt(tuple(parts))

    def path_seq(self):
        parts = [self.path_elt()]
        while self.at("/"):
            self.adv()
            parts.append(self.path_elt())
        return parts[0] if len(parts) == 1 else PSeq(tuple(parts))

    def path_elt(self):
        if self.at("("):
            self.adv()
            inner = self.path_alt()
            self.expect(")")
        elif self.at("^"):
            raise UnsupportedConstruct("inverse path", self.tok.offset)
        elif self.at("!"):
            raise UnsupportedConstruct("negated property set", self.tok.offset)
        else:
            inner = self.iri()
        if self.at("*", "+", "?"):
            return PMod(inner, self.adv().text)
        return inner

    # --- expressions ---

    def expr(self):
        left = self.and_expr()
        while self.at("||"):
            self.adv()
            left = BinOp("||", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.rel_expr()
        while self.at("&&"):
            self.adv()
            left = BinOp("&&", left, self.rel_expr())
        return left

    def rel_expr(self):
        left = self.unary()
        if self.at("=", "!=", "<", ">", "<=", ">="):
            op = self.adv().text
            return BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.at("!"):
            self.adv()
            return NotExpr(self.unary())
        if self.at("("):
            self.adv()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("NOT"):
            self.adv()
            self.expect("EXISTS")
            return Exists(self.group(), True)
        if self.at("EXISTS"):
            self.adv()
            return Exists(self.group())
        if self.at("COALESCE"):
            self.adv()
            self.expect("(")
            args = [self.expr()]
            while self.at(","):
                self.adv()
                args.append(self.expr())
            self.expect(")")
            return Func("COALESCE", tuple(args))
        if self.at("COUNT", "MAX", "MIN", "SUM", "AVG"):
            name = self.adv().text
            self.expect("(")
            distinct = False
            if self.at("DISTINCT"):
                self.adv()
                distinct = True
            if self.at("*"):
                if name != "COUNT":
                    raise SparqlSyntaxError(f"{name}(*) is not allowed", self.tok.offset)
                self.adv()
                arg = None
            else:
                arg = self.expr()
            self.expect(")")
            return AggExpr(name, arg, distinct)
        return self.term()


def _num(text: str):
    if re.fullmatch(r"[+-]?\d+", text):
        return int(text)
    return float(text)


def _typed(value: str, dt: Iri, offset: int):
    if dt.prefix == "xsd" and dt.local in ("dateTime", "date"):
        m = re.fullmatch(r"([+-]?\d{4,})-(\d{2})-(\d{2})(?:T00:00:00(?:\.0+)?Z?)?", value)
        if not m:
            raise UnsupportedConstruct(f"non-midnight {dt.local} literal", offset)
        return _dt.date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    if dt.prefix == "xsd" and dt.local in ("integer", "int", "long"):
        return int(value)
    if dt.prefix == "xsd" and dt.local in ("decimal", "double", "float"):
        return float(value)
    if dt.prefix == "xsd" and dt.local == "string":
        return value
    raise UnsupportedConstruct(f"datatype {term_text(dt)}", offset)


def parse_sparql(text: str) -> Query:
    """Parse text in the supported subset; raises UnsupportedConstruct outside it."""
    return _SparqlParser(text).query()


# --- small helpers used by compiler and decompiler ------------------------------


def wdt(pid: str) -> Iri:
    return Iri("wdt", pid)


def wd(qid: str) -> Iri:
    return Iri("wd", qid)


def walk_elements(group: Group):
    """Yield every pattern element, descending into nested groups."""
    for el in group.elements:
        yield el
        if isinstance(el, (Optional,)):
            yield from walk_elements(el.group)
        elif isinstance(el, Group):
            yield from walk_elements(el)
        elif isinstance(el, Union_):
            for g in el.groups:
                yield from walk_elements(g)
        elif isinstance(el, SubSelect):
            yield from walk_elements(el.select.where)
