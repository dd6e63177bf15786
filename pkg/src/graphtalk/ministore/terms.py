"""RDF-ish terms shared by the interpreter and the SPARQL evaluator.

Terms reuse the AST value classes: ``Entity(Resolved(qid))``, ``Num``,
``Date`` and ``Str``. Helpers here fix one ordering, one comparison and
one aggregation semantics so both evaluators agree by construction on
the arithmetic and differ only in how they walk queries.
"""

from __future__ import annotations

import datetime as _dt
import math
from typing import Iterable, Mapping

from ..ast import Agg, Date, Entity, Num, Op, Resolved, Str
from ..errors import LoadError
from ..schema import qid_number

_KIND_RANK = {Num: 0, Date: 1, Str: 2, Entity: 3}


def entity(qid: str) -> Entity:
    return Entity(Resolved(qid))


def qid_of(term) -> str | None:
    if isinstance(term, Entity) and isinstance(term.ref, Resolved):
        return term.ref.qid
    return None


def sort_key(term, labels: Mapping[str, str] | None = None):
    """Total order: numbers < dates < strings < entities (label, then QID)."""
    if isinstance(term, tuple):
        return (9, tuple(sort_key(t, labels) for t in term))
    rank = _KIND_RANK.get(type(term))
    if rank is None:
        return (8, repr(term))
    if isinstance(term, Num):
        return (rank, term.value)
    if isinstance(term, Date):
        return (rank, term.value.toordinal())
    if isinstance(term, Str):
        return (rank, term.text)
    qid = term.ref.qid
    label = (labels or {}).get(qid, "")
    return (rank, label, qid_number(qid))


def compare(a, op: Op, b) -> bool:
    """Comparison as FILTER sees it: mismatched kinds are never true."""
    if op in (Op.EQ, Op.CONTAINS):
        if isinstance(a, Num) and isinstance(b, Num):
            return a.value == b.value
        return type(a) is type(b) and a == b
    if type(a) is not type(b) or type(a) not in (Num, Date, Str):
        return False
    ka, kb = _scalar(a), _scalar(b)
    if op is Op.GT:
        return ka > kb
    if op is Op.GE:
        return ka >= kb
    if op is Op.LT:
        return ka < kb
    if op is Op.LE:
        return ka <= kb
    raise ValueError(op)


def _scalar(t):
    if isinstance(t, Num):
        return t.value
    if isinstance(t, Date):
        return t.value
    if isinstance(t, Str):
        return t.text
    raise TypeError(t)


def _sum(values: list) -> int | float:
    nums = [v.value for v in values]
    if all(isinstance(n, int) for n in nums):
        return sum(nums)
    return math.fsum(nums)


def aggregate(agg: Agg, values: Iterable, labels: Mapping[str, str] | None = None):
    """Aggregate a multiset of terms; ``None`` means the result is unbound.

    count/sum/avg of nothing are 0; max/min of nothing are unbound, as in
    SPARQL. sum and avg over any non-number are unbound (type error).
    """
    values = list(values)
    if agg is Agg.COUNT:
        return Num(len(values))
    if agg in (Agg.MAX, Agg.MIN):
        if not values:
            return None
        pick = max if agg is Agg.MAX else min
        return pick(values, key=lambda t: sort_key(t, labels))
    if any(not isinstance(v, Num) for v in values):
        return None
    if not values:
        return Num(0)
    total = _sum(values)
    if agg is Agg.SUM:
        return Num(total)
    return Num(total / len(values))


# --- JSON encoding used by the triple file format ----------------------------


def value_from_json(data) -> object:
    if not isinstance(data, dict) or "kind" not in data:
        raise LoadError(f"bad value object {data!r}")
    kind = data["kind"]
    if kind == "entity":
        return entity(data["id"])
    if kind == "quantity":
        amount = data["amount"]
        if isinstance(amount, bool) or not isinstance(amount, (int, float)):
            raise LoadError(f"bad quantity {amount!r}")
        return Num(amount, data.get("unit"))
    if kind == "time":
        return Date(_dt.date.fromisoformat(data["date"]))
    if kind in ("string", "coordinate"):
        return Str(str(data["text"]))
    raise LoadError(f"unknown value kind {kind!r}")


def value_to_json(term) -> dict:
    if isinstance(term, Entity):
        return {"kind": "entity", "id": term.ref.qid}
    if isinstance(term, Num):
        out = {"kind": "quantity", "amount": term.value}
        if term.unit:
            out["unit"] = term.unit
        return out
    if isinstance(term, Date):
        return {"kind": "time", "date": term.value.isoformat()}
    if isinstance(term, Str):
        return {"kind": "string", "text": term.text}
    raise TypeError(f"not a storable term: {term!r}")


def render(term, labels: Mapping[str, str] | None = None) -> str:
    """Human-readable rendering of an answer term or tuple."""
    if isinstance(term, tuple):
        return "(" + ", ".join(render(t, labels) for t in term) + ")"
    if isinstance(term, Entity):
        qid = term.ref.qid
        label = (labels or {}).get(qid)
        return f"{label} ({qid})" if label else qid
    if isinstance(term, Num):
        return repr(term.value) if isinstance(term.value, float) else str(term.value)
    if isinstance(term, Date):
        return term.value.isoformat()
    if isinstance(term, Str):
        return term.text
    return str(term)
