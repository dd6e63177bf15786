"""Abstract syntax of the graph logical form, its printer and canonical form.

Queries denote entity sets, value sets, booleans, numbers or tuples; the
predicate language filters entities by (possibly multi-hop) property values.
All nodes are frozen dataclasses, so ASTs hash and compare structurally.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

from .schema import ID_PROPERTY, ROOT_DOMAIN, is_qid


# --- entity references and values -------------------------------------------


@dataclass(frozen=True)
class Resolved:
    qid: str
    display: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not is_qid(self.qid):
            raise ValueError(f"not a QID: {self.qid!r}")


@dataclass(frozen=True)
class Mention:
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("empty mention")
        if is_qid(self.text):
            raise ValueError(f"mention text looks like a QID: {self.text!r}")


EntityRef = Union[Resolved, Mention]


@dataclass(frozen=True)
class Entity:
    ref: EntityRef

    @classmethod
    def q(cls, qid: str) -> "Entity":
        return cls(Resolved(qid))


@dataclass(frozen=True)
class Str:
    text: str


@dataclass(frozen=True)
class Num:
    value: int | float
    unit: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if isinstance(self.value, bool) or self.value != self.value or self.value in (float("inf"), float("-inf")):
            raise ValueError(f"number must be finite: {self.value!r}")


@dataclass(frozen=True)
class Date:
    value: _dt.date


@dataclass(frozen=True)
class Null:
    pass


NULL = Null()
Value = Union[Entity, Str, Num, Date, Null]


# --- paths --------------------------------------------------------------------


class Modifier(str, Enum):
    ONE = ""
    PLUS = "+"
    STAR = "*"
    OPT = "?"


@dataclass(frozen=True)
class Step:
    name: str
    modifier: Modifier = Modifier.ONE


@dataclass(frozen=True)
class PropertyPath:
    steps: tuple[Step, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("empty property path")

    @classmethod
    def of(cls, *names: str) -> "PropertyPath":
        return cls(tuple(Step(n) for n in names))

    @property
    def is_id(self) -> bool:
        return len(self.steps) == 1 and self.steps[0].name == ID_PROPERTY

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.steps)


def path(spec: str) -> PropertyPath:
    """Build a path from ``"country+/population"`` shorthand."""
    steps = []
    for part in spec.split("/"):
        part = part.strip()
        mod = Modifier.ONE
        if part and part[-1] in "+*?":
            mod = Modifier(part[-1])
            part = part[:-1]
        steps.append(Step(part, mod))
    return PropertyPath(tuple(steps))


class Op(str, Enum):
    EQ = "=="
    GE = ">="
    LE = "<="
    GT = ">"
    LT = "<"
    CONTAINS = "contains"


class Agg(str, Enum):
    COUNT = "count"
    MAX = "max"
    MIN = "min"
    SUM = "sum"
    AVG = "avg"


class Direction(str, Enum):
    ASC = "asc"
    DESC = "desc"


# --- predicates ---------------------------------------------------------------


@dataclass(frozen=True)
class Compare:
    path: PropertyPath
    op: Op
    value: Value


@dataclass(frozen=True)
class SubqueryAny:
    path: PropertyPath
    op: Op
    query: "QueryExpr"


@dataclass(frozen=True)
class Qualified:
    path: PropertyPath
    op: Op
    value: Value
    qual_path: PropertyPath
    qual_op: Op
    qual_value: Value


@dataclass(frozen=True)
class AggCompare:
    agg: Agg
    path: PropertyPath
    op: Op
    value: Value


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Not:
    operand: "Predicate"


Predicate = Union[Compare, SubqueryAny, Qualified, AggCompare, And, Or, Not]


# --- queries ------------------------------------------------------------------


@dataclass(frozen=True)
class DomainScan:
    domain: str


@dataclass(frozen=True)
class Selection:
    query: "QueryExpr"
    predicate: Predicate


@dataclass(frozen=True)
class Projected:
    path: PropertyPath
    qualifier: Predicate | None = None


@dataclass(frozen=True)
class Projection:
    projections: tuple[Projected, ...]
    query: "QueryExpr"

    def __post_init__(self):
        if not self.projections:
            raise ValueError("projection list must be non-empty")


@dataclass(frozen=True)
class Verification:
    predicate: Predicate
    query: "QueryExpr"


@dataclass(frozen=True)
class Sort:
    path: PropertyPath
    direction: Direction
    query: "QueryExpr"


@dataclass(frozen=True)
class Index:
    query: "QueryExpr"
    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("index is 1-based")


@dataclass(frozen=True)
class Slice:
    query: "QueryExpr"
    start: int
    end: int

    def __post_init__(self):
        if self.start < 1 or self.end < self.start:
            raise ValueError(f"bad slice [{self.start}, {self.end}]")


@dataclass(frozen=True)
class AggregateCount:
    query: "QueryExpr"


@dataclass(frozen=True)
class AggregateOver:
    agg: Agg
    path: PropertyPath
    query: "QueryExpr"


@dataclass(frozen=True)
class GroupBy:
    agg: Agg
    path: PropertyPath
    query: "QueryExpr"
    key: PropertyPath


@dataclass(frozen=True)
class Join:
    left: "QueryExpr"
    right: "QueryExpr"
    left_path: PropertyPath
    op: Op
    right_path: PropertyPath


QueryExpr = Union[
    DomainScan, Selection, Projection, Verification, Sort, Index, Slice,
    AggregateCount, AggregateOver, GroupBy, Join,
]

QUERY_TYPES = (
    DomainScan, Selection, Projection, Verification, Sort, Index, Slice,
    AggregateCount, AggregateOver, GroupBy, Join,
)
PREDICATE_TYPES = (Compare, SubqueryAny, Qualified, AggCompare, And, Or, Not)


def pivot(qid_or_ref) -> Selection:
    """``@entity() filter id == "Q..."``, the single-entity query."""
    ref = qid_or_ref if isinstance(qid_or_ref, (Resolved, Mention)) else Resolved(qid_or_ref)
    return Selection(DomainScan(ROOT_DOMAIN), Compare(PropertyPath.of(ID_PROPERTY), Op.EQ, Entity(ref)))


def is_pivot(q) -> bool:
    return (
        isinstance(q, Selection)
        and q.query == DomainScan(ROOT_DOMAIN)
        and isinstance(q.predicate, Compare)
        and q.predicate.path.is_id
        and q.predicate.op in (Op.EQ, Op.CONTAINS)
        and isinstance(q.predicate.value, Entity)
    )


# --- printing -----------------------------------------------------------------

_Q_JOIN, _Q_PREFIX, _Q_POSTFIX = 0, 1, 2
_P_OR, _P_AND, _P_UNARY = 0, 1, 2


def _quote(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


def format_number(value: int | float) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def print_value(v: Value) -> str:
    if isinstance(v, Entity):
        return _quote(v.ref.qid if isinstance(v.ref, Resolved) else v.ref.text)
    if isinstance(v, Str):
        return _quote(v.text)
    if isinstance(v, Num):
        return format_number(v.value)
    if isinstance(v, Date):
        return f"{v.value.year:04d}.{v.value.month:02d}.{v.value.day:02d}"
    if isinstance(v, Null):
        return "NULL"
    raise TypeError(f"not a value: {v!r}")


def print_path(p: PropertyPath) -> str:
    return " / ".join(s.name + s.modifier.value for s in p.steps)


def _compare_text(p: PropertyPath, op: Op, rhs: str) -> str:
    return f"{print_path(p)} {op.value} {rhs}"


def _pred(p: Predicate, level: int) -> str:
    if isinstance(p, Or):
        text, own = f"{_pred(p.left, _P_OR)} || {_pred(p.right, _P_AND)}", _P_OR
    elif isinstance(p, And):
        text, own = f"{_pred(p.left, _P_AND)} && {_pred(p.right, _P_UNARY)}", _P_AND
    elif isinstance(p, Not):
        return f"! ( {_pred(p.operand, _P_OR)} )"
    elif isinstance(p, Compare):
        if p.op is Op.CONTAINS:
            return f"contains ( {print_path(p.path)} , {print_value(p.value)} )"
        return _compare_text(p.path, p.op, print_value(p.value))
    elif isinstance(p, SubqueryAny):
        return _compare_text(p.path, p.op, f"any ( {_query(p.query, _Q_JOIN)} )")
    elif isinstance(p, Qualified):
        inner = _compare_text(p.qual_path, p.qual_op, print_value(p.qual_value))
        return f"( {print_path(p.path)} filter {inner} ) {p.op.value} {print_value(p.value)}"
    elif isinstance(p, AggCompare):
        return f"{p.agg.value} ( {print_path(p.path)} ) {p.op.value} {print_value(p.value)}"
    else:
        raise TypeError(f"not a predicate: {p!r}")
    return f"( {text} )" if own < level else text


def _projected(item: Projected) -> str:
    if item.qualifier is None:
        return print_path(item.path)
    return f"{print_path(item.path)} filter {_pred(item.qualifier, _P_OR)}"


def _query(q: QueryExpr, level: int) -> str:
    if isinstance(q, DomainScan):
        text, own = f"@{q.domain}()", _Q_POSTFIX
    elif isinstance(q, Selection):
        text, own = f"{_query(q.query, _Q_POSTFIX)} filter {_pred(q.predicate, _P_OR)}", _Q_POSTFIX
    elif isinstance(q, Projection):
        items = " , ".join(_projected(i) for i in q.projections)
        text, own = f"[ {items} ] of {_query(q.query, _Q_PREFIX)}", _Q_PREFIX
    elif isinstance(q, Verification):
        text, own = f"[ {_pred(q.predicate, _P_OR)} ] of {_query(q.query, _Q_PREFIX)}", _Q_PREFIX
    elif isinstance(q, Sort):
        text = f"sort ( {print_path(q.path)} {q.direction.value} of {_query(q.query, _Q_JOIN)} )"
        own = _Q_POSTFIX
    elif isinstance(q, Index):
        text, own = f"{_query(q.query, _Q_POSTFIX)} [ {q.index} ]", _Q_POSTFIX
    elif isinstance(q, Slice):
        text, own = f"{_query(q.query, _Q_POSTFIX)} [ {q.start} , {q.end} ]", _Q_POSTFIX
    elif isinstance(q, AggregateCount):
        text, own = f"count ( {_query(q.query, _Q_JOIN)} )", _Q_POSTFIX
    elif isinstance(q, AggregateOver):
        text = f"{q.agg.value} ( {print_path(q.path)} of {_query(q.query, _Q_JOIN)} )"
        own = _Q_POSTFIX
    elif isinstance(q, GroupBy):
        text = f"{q.agg.value} ( {print_path(q.path)} of {_query(q.query, _Q_JOIN)} ) by {print_path(q.key)}"
        own = _Q_PREFIX
    elif isinstance(q, Join):
        if q.op is Op.CONTAINS:
            cond = f"contains ( {print_path(q.left_path)} , {print_path(q.right_path)} )"
        else:
            cond = f"{print_path(q.left_path)} {q.op.value} {print_path(q.right_path)}"
        text = f"{_query(q.left, _Q_JOIN)} join {_query(q.right, _Q_PREFIX)} on {cond}"
        own = _Q_JOIN
    else:
        raise TypeError(f"not a query: {q!r}")
    return f"( {text} )" if own < level else text


def pretty_print(node) -> str:
    """Render a query, predicate, path or value in surface syntax."""
    if isinstance(node, QUERY_TYPES):
        return _query(node, _Q_JOIN)
    if isinstance(node, PREDICATE_TYPES):
        return _pred(node, _P_OR)
    if isinstance(node, PropertyPath):
        return print_path(node)
    return print_value(node)


# --- canonical form -----------------------------------------------------------


def _canonical_op(op: Op, value: Value, p: PropertyPath) -> Op:
    if op not in (Op.EQ, Op.CONTAINS) or isinstance(value, Null):
        return op
    if p.is_id:
        return Op.EQ
    return Op.CONTAINS if isinstance(value, Entity) else Op.EQ


def _flatten(p: Predicate, kind) -> list:
    if isinstance(p, kind):
        return _flatten(p.left, kind) + _flatten(p.right, kind)
    return [p]


def _rebuild(parts: list, kind) -> Predicate:
    parts = sorted(parts, key=pretty_print)
    out = parts[0]
    for nxt in parts[1:]:
        out = kind(out, nxt)
    return out


def _canon_pred(p: Predicate) -> Predicate:
    if isinstance(p, (And, Or)):
        kind = type(p)
        parts = [_canon_pred(x) for x in _flatten(p, kind)]
        flat = []
        for x in parts:
            flat.extend(_flatten(x, kind))
        return _rebuild(flat, kind)
    if isinstance(p, Not):
        inner = _canon_pred(p.operand)
        if isinstance(inner, Not):
            return inner.operand
        return Not(inner)
    if isinstance(p, Compare):
        return replace(p, op=_canonical_op(p.op, p.value, p.path))
    if isinstance(p, Qualified):
        return replace(
            p,
            op=_canonical_op(p.op, p.value, p.path),
            qual_op=_canonical_op(p.qual_op, p.qual_value, p.qual_path),
        )
    if isinstance(p, SubqueryAny):
        op = Op.EQ if p.op is Op.CONTAINS else p.op
        return replace(p, op=op, query=canonicalize(p.query))
    return p


def _plain_single(items) -> bool:
    return len(items) == 1 and items[0].qualifier is None


def canonicalize(q: QueryExpr) -> QueryExpr:
    """Normal form used for exact-match comparison.

    Nested selections merge into one conjunction (except on top of the
    single-entity pivot form), And/Or operands are flattened and sorted by
    printed form, double negation is removed, chained single projections
    become one path, equality against entity values is spelled ``contains``
    (``==`` for ``id`` and for path-to-path comparisons), a verification
    absorbs the selections under it, and a one-element slice becomes an
    index. Answers are unchanged by every rewrite.
    """
    if isinstance(q, DomainScan):
        return q
    if isinstance(q, Selection):
        if is_pivot(q):
            return replace(q, predicate=_canon_pred(q.predicate))
        conjuncts = [q.predicate]
        base = q.query
        while isinstance(base, Selection) and not is_pivot(base):
            conjuncts.append(base.predicate)
            base = base.query
        base = canonicalize(base)
        pred = _canon_pred(_rebuild(conjuncts, And) if len(conjuncts) > 1 else conjuncts[0])
        return Selection(base, pred)
    if isinstance(q, Projection):
        items = tuple(
            Projected(i.path, None if i.qualifier is None else _canon_pred(i.qualifier)) for i in q.projections
        )
        inner = canonicalize(q.query)
        # [a, c] of [b] of q  ==  [b / a, b / c] of q
        if all(i.qualifier is None for i in items) and isinstance(inner, Projection) \
                and _plain_single(inner.projections):
            head = inner.projections[0].path.steps
            return Projection(tuple(Projected(PropertyPath(head + i.path.steps)) for i in items), inner.query)
        return Projection(items, inner)
    if isinstance(q, Verification):
        pred, base = q.predicate, q.query
        # "some e in {q | s} has p" is "some e in q has s and p"
        while isinstance(base, Selection) and not is_pivot(base):
            pred = And(base.predicate, pred)
            base = base.query
        return Verification(_canon_pred(pred), canonicalize(base))
    if isinstance(q, Sort):
        return replace(q, query=canonicalize(q.query))
    if isinstance(q, Index):
        return replace(q, query=canonicalize(q.query))
    if isinstance(q, Slice):
        if q.start == q.end:
            return Index(canonicalize(q.query), q.start)
        return replace(q, query=canonicalize(q.query))
    if isinstance(q, (AggregateCount, AggregateOver, GroupBy)):
        return replace(q, query=canonicalize(q.query))
    if isinstance(q, Join):
        op = Op.EQ if q.op is Op.CONTAINS else q.op
        return replace(q, op=op, left=canonicalize(q.left), right=canonicalize(q.right))
    raise TypeError(f"not a query: {q!r}")


# --- traversal helpers --------------------------------------------------------


def iter_values(node):
    """Yield every Value in a query or predicate (depth first)."""
    if isinstance(node, (Compare, AggCompare)):
        yield node.value
    elif isinstance(node, Qualified):
        yield node.value
        yield node.qual_value
    elif isinstance(node, SubqueryAny):
        yield from iter_values(node.query)
    elif isinstance(node, (And, Or)):
        yield from iter_values(node.left)
        yield from iter_values(node.right)
    elif isinstance(node, Not):
        yield from iter_values(node.operand)
    elif isinstance(node, Selection):
        yield from iter_values(node.query)
        yield from iter_values(node.predicate)
    elif isinstance(node, Projection):
        for item in node.projections:
            if item.qualifier is not None:
                yield from iter_values(item.qualifier)
        yield from iter_values(node.query)
    elif isinstance(node, Verification):
        yield from iter_values(node.predicate)
        yield from iter_values(node.query)
    elif isinstance(node, Join):
        yield from iter_values(node.left)
        yield from iter_values(node.right)
    elif isinstance(node, (Sort, Index, Slice, AggregateCount, AggregateOver, GroupBy)):
        yield from iter_values(node.query)


def map_values(node, fn):
    """Rebuild ``node`` with every Value replaced by ``fn(value)``."""
    if isinstance(node, (Compare, AggCompare)):
        return replace(node, value=fn(node.value))
    if isinstance(node, Qualified):
        return replace(node, value=fn(node.value), qual_value=fn(node.qual_value))
    if isinstance(node, SubqueryAny):
        return replace(node, query=map_values(node.query, fn))
    if isinstance(node, (And, Or)):
        return type(node)(map_values(node.left, fn), map_values(node.right, fn))
    if isinstance(node, Not):
        return Not(map_values(node.operand, fn))
    if isinstance(node, Selection):
        return Selection(map_values(node.query, fn), map_values(node.predicate, fn))
    if isinstance(node, Projection):
        items = tuple(
            Projected(i.path, None if i.qualifier is None else map_values(i.qualifier, fn))
            for i in node.projections
        )
        return Projection(items, map_values(node.query, fn))
    if isinstance(node, Verification):
        return Verification(map_values(node.predicate, fn), map_values(node.query, fn))
    if isinstance(node, Join):
        return replace(node, left=map_values(node.left, fn), right=map_values(node.right, fn))
    if isinstance(node, (Sort, Index, Slice, AggregateCount, AggregateOver, GroupBy)):
        return replace(node, query=map_values(node.query, fn))
    return node
