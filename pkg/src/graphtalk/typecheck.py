"""Static checks of a QueryExpr against a schema registry."""

from __future__ import annotations

from dataclasses import dataclass

from . import ast as A
from .errors import NotFoundError, TypeCheckError
from .schema import ID_PROPERTY, ROOT_DOMAIN, SchemaRegistry, ValueKind

ORDERABLE = frozenset({"quantity", "time", "string"})


@dataclass(frozen=True)
class QType:
    """Result type of a query.

    ``shape`` is one of entities, values, boolean, number, pairs; ``domain``
    is set for entity sets, ``kind`` for value sets and numbers.
    """

    shape: str
    domain: str | None = None
    kind: ValueKind | None = None

    @property
    def is_entities(self) -> bool:
        return self.shape == "entities"


class TypeChecker:
    def __init__(self, registry: SchemaRegistry):
        self.reg = registry

    # --- helpers ---

    def _ancestors(self, domain: str) -> set[str]:
        seen, stack = set(), [domain]
        while stack:
            d = stack.pop()
            if d in seen:
                continue
            seen.add(d)
            stack.extend(self.reg.domain(d).parents or ({ROOT_DOMAIN} if d != ROOT_DOMAIN else set()))
        return seen

    def domain_accepts(self, domain: str | None, name: str) -> bool:
        if domain in (None, ROOT_DOMAIN) or name == ID_PROPERTY:
            return True
        allowed: set[str] = set()
        for d in self._ancestors(domain):
            allowed |= self.reg.domain(d).properties
        if name in allowed:
            return True
        sup = self.reg.super_properties.get(name)
        return sup is not None and any(m in allowed for m in sup.members)

    def path_kind(self, path: A.PropertyPath, domain: str | None = None, allow_id: bool = False) -> ValueKind:
        if path.is_id and not allow_id:
            raise TypeCheckError("'id' is only usable in comparisons and join conditions")
        for i, step in enumerate(path.steps):
            if not self.reg.has_name(step.name):
                raise NotFoundError(step.name, "property")
            if step.name == ID_PROPERTY and len(path.steps) > 1:
                raise TypeCheckError("'id' cannot appear inside a multi-step path")
            if step.name == ID_PROPERTY and step.modifier is not A.Modifier.ONE:
                raise TypeCheckError("'id' takes no path modifier")
            kind = self.reg.value_kind(step.name)
            if step.modifier is not A.Modifier.ONE and not kind.is_entity:
                raise TypeCheckError(f"modifier on non-entity property {step.name}")
            if i < len(path.steps) - 1 and not kind.is_entity:
                raise TypeCheckError(f"cannot traverse through {step.name} ({kind.kind})")
            if self.reg.is_super(step.name) and step.modifier is not A.Modifier.ONE:
                raise TypeCheckError(f"super-property {step.name} takes no modifier")
        if domain is not None and not self.domain_accepts(domain, path.steps[0].name):
            raise TypeCheckError(f"domain {domain} has no property {path.steps[0].name}")
        return self.reg.value_kind(path.steps[-1].name)

    def _plain_step(self, path: A.PropertyPath, what: str) -> None:
        if len(path.steps) != 1 or path.steps[0].modifier is not A.Modifier.ONE:
            raise TypeCheckError(f"{what} must be a single plain property")
        name = path.steps[0].name
        if name == ID_PROPERTY or self.reg.is_super(name):
            raise TypeCheckError(f"{what} cannot be {name}")

    def check_value(self, kind: ValueKind, op: A.Op, value: A.Value) -> None:
        if isinstance(value, A.Null):
            if op is not A.Op.EQ:
                raise TypeCheckError("NULL only supports ==")
            return
        expected = {
            "entity": A.Entity, "quantity": A.Num, "time": A.Date, "string": A.Str, "coordinate": A.Str,
        }[kind.kind]
        if not isinstance(value, expected):
            raise TypeCheckError(f"{kind.kind} property compared with {type(value).__name__}")
        if op not in (A.Op.EQ, A.Op.CONTAINS) and kind.kind not in ORDERABLE:
            raise TypeCheckError(f"operator {op.value} not defined on {kind.kind} values")

    def _qualifier_compare(self, p: A.Predicate) -> None:
        if not isinstance(p, A.Compare):
            raise TypeCheckError("qualifier filters must be a single comparison")
        self._plain_step(p.path, "qualifier")
        prop = self.reg.resolve_property(p.path.steps[0].name)
        if not prop.is_qualifier:
            raise TypeCheckError(f"{prop.canonical_name} is not a qualifier property")
        if isinstance(p.value, A.Null):
            raise TypeCheckError("qualifier comparisons cannot use NULL")
        self.check_value(prop.value_kind, p.op, p.value)

    # --- predicates ---

    def predicate(self, p: A.Predicate, domain: str | None) -> None:
        if isinstance(p, (A.And, A.Or)):
            self.predicate(p.left, domain)
            self.predicate(p.right, domain)
        elif isinstance(p, A.Not):
            self.predicate(p.operand, domain)
        elif isinstance(p, A.Compare):
            kind = self.path_kind(p.path, domain, allow_id=True)
            if p.path.is_id and p.op not in (A.Op.EQ, A.Op.CONTAINS):
                raise TypeCheckError("id only supports equality")
            if p.path.is_id and isinstance(p.value, A.Null):
                raise TypeCheckError("id is never NULL")
            self.check_value(kind, p.op, p.value)
        elif isinstance(p, A.SubqueryAny):
            kind = self.path_kind(p.path, domain)
            sub = self.query(p.query)
            if sub.is_entities:
                if not kind.is_entity or p.op not in (A.Op.EQ, A.Op.CONTAINS):
                    raise TypeCheckError("entity subquery needs an entity path and equality")
            elif sub.shape == "values":
                if sub.kind.kind != kind.kind:
                    raise TypeCheckError(f"subquery yields {sub.kind.kind}, path is {kind.kind}")
                if p.op not in (A.Op.EQ, A.Op.CONTAINS) and kind.kind not in ORDERABLE:
                    raise TypeCheckError(f"operator {p.op.value} not defined on {kind.kind}")
            else:
                raise TypeCheckError(f"any() needs a set-valued subquery, got {sub.shape}")
        elif isinstance(p, A.Qualified):
            self._plain_step(p.path, "qualified property")
            kind = self.path_kind(p.path, domain)
            if isinstance(p.value, A.Null):
                raise TypeCheckError("qualified comparisons cannot use NULL")
            self.check_value(kind, p.op, p.value)
            self._qualifier_compare(A.Compare(p.qual_path, p.qual_op, p.qual_value))
        elif isinstance(p, A.AggCompare):
            kind = self.path_kind(p.path, domain)
            if isinstance(p.value, A.Null):
                raise TypeCheckError("aggregates cannot be compared with NULL")
            if p.op is A.Op.CONTAINS:
                raise TypeCheckError("aggregates compare with ==, <, >, <=, >=")
            if p.agg is A.Agg.COUNT:
                if not isinstance(p.value, A.Num):
                    raise TypeCheckError("count compares with a number")
            else:
                self._agg_kind(p.agg, kind)
                self.check_value(kind, p.op, p.value)
        else:
            raise TypeCheckError(f"not a predicate: {p!r}")

    def _agg_kind(self, agg: A.Agg, kind: ValueKind) -> None:
        if agg in (A.Agg.SUM, A.Agg.AVG) and kind.kind != "quantity":
            raise TypeCheckError(f"{agg.value} needs quantity values")
        if agg in (A.Agg.MAX, A.Agg.MIN) and kind.kind not in ("quantity", "time"):
            raise TypeCheckError(f"{agg.value} needs quantity or time values")

    # --- queries ---

    def _entities(self, q: A.QueryExpr, what: str) -> QType:
        t = self.query(q)
        if not t.is_entities:
            raise TypeCheckError(f"{what} needs an entity set, got {t.shape}")
        return t

    @staticmethod
    def _entity_domain(kind: ValueKind) -> str:
        return next(iter(kind.domains)) if len(kind.domains) == 1 else ROOT_DOMAIN

    def query(self, q: A.QueryExpr) -> QType:
        if isinstance(q, A.DomainScan):
            self.reg.domain(q.domain)
            return QType("entities", q.domain)
        if isinstance(q, A.Selection):
            t = self._entities(q.query, "filter")
            self.predicate(q.predicate, t.domain)
            return t
        if isinstance(q, A.Projection):
            t = self._entities(q.query, "projection")
            kinds = []
            for item in q.projections:
                kinds.append(self.path_kind(item.path, t.domain))
                if item.qualifier is not None:
                    self._plain_step(item.path, "qualified projection")
                    self._qualifier_compare(item.qualifier)
            if len(set(k.kind for k in kinds)) > 1:
                raise TypeCheckError("projected paths must share a value kind")
            kind = kinds[0]
            if kind.is_entity:
                return QType("entities", self._entity_domain(kind) if len(kinds) == 1 else ROOT_DOMAIN)
            return QType("values", kind=kind)
        if isinstance(q, A.Verification):
            t = self._entities(q.query, "verification")
            self.predicate(q.predicate, t.domain)
            return QType("boolean")
        if isinstance(q, A.Sort):
            t = self._entities(q.query, "sort")
            kind = self.path_kind(q.path, t.domain)
            if kind.kind not in ORDERABLE:
                raise TypeCheckError(f"cannot sort by {kind.kind} values")
            return t
        if isinstance(q, (A.Index, A.Slice)):
            t = self.query(q.query)
            if t.shape not in ("entities", "values"):
                raise TypeCheckError(f"cannot index a {t.shape} result")
            return t
        if isinstance(q, A.AggregateCount):
            t = self.query(q.query)
            if t.shape not in ("entities", "values", "pairs"):
                raise TypeCheckError(f"cannot count a {t.shape} result")
            return QType("number", kind=ValueKind("quantity"))
        if isinstance(q, A.AggregateOver):
            t = self._entities(q.query, "aggregation")
            kind = self.path_kind(q.path, t.domain)
            if q.agg is A.Agg.COUNT:
                return QType("number", kind=ValueKind("quantity"))
            self._agg_kind(q.agg, kind)
            return QType("number", kind=kind if q.agg in (A.Agg.MAX, A.Agg.MIN) else ValueKind("quantity"))
        if isinstance(q, A.GroupBy):
            t = self._entities(q.query, "group by")
            kind = self.path_kind(q.path, t.domain)
            if q.agg is not A.Agg.COUNT:
                self._agg_kind(q.agg, kind)
            self.path_kind(q.key, t.domain)
            return QType("pairs")
        if isinstance(q, A.Join):
            lt = self._entities(q.left, "join")
            rt = self._entities(q.right, "join")
            lk = self.path_kind(q.left_path, lt.domain, allow_id=True)
            rk = self.path_kind(q.right_path, rt.domain, allow_id=True)
            if lk.kind != rk.kind:
                raise TypeCheckError(f"join compares {lk.kind} with {rk.kind}")
            if q.op not in (A.Op.EQ, A.Op.CONTAINS) and lk.kind not in ORDERABLE:
                raise TypeCheckError(f"operator {q.op.value} not defined on {lk.kind}")
            return QType("pairs")
        raise TypeCheckError(f"not a query: {q!r}")


def typecheck(q: A.QueryExpr, registry: SchemaRegistry) -> QType:
    """Check ``q`` and return its result type; raises TypeCheckError."""
    return TypeChecker(registry).query(q)
