"""Random well-typed logical forms and random small graphs.

Used by the property tests (round-trip, oracle equivalence) and by
``synth`` for value pools. Every generated query type-checks against the
registry it was generated from.
"""

from __future__ import annotations

import datetime as _dt
import random

from . import ast as A
from .ministore.graph import Graph, Triple
from .ministore.terms import entity
from .schema import ROOT_DOMAIN, SchemaRegistry

ORDERABLE = ("quantity", "time", "string")
_EQS = (A.Op.EQ, A.Op.CONTAINS)
_INEQS = (A.Op.EQ, A.Op.GE, A.Op.LE, A.Op.GT, A.Op.LT)

_DEFAULT_STRINGS = ("Paris", "République", "a \"quoted\" name", "東京", "")
_DEFAULT_DATES = tuple(_dt.date(y, m, 1) for y, m in [(1900, 1), (1960, 6), (2000, 1), (2012, 9), (2021, 1)])
_MENTIONS = ("Selena Gomez", "Paris", "the Beatles", "Europe")


def value_pools(graph: Graph, registry: SchemaRegistry) -> dict[str, list]:
    """Distinct objects per property name, in first-seen order."""
    pools: dict[str, dict] = {}
    for t in graph.triples:
        name = registry.pid_index.get(t.pid)
        if name is not None:
            pools.setdefault(name, {})[t.object] = None
        for qpid, qv in t.qualifiers:
            qname = registry.pid_index.get(qpid)
            if qname is not None:
                pools.setdefault(qname, {})[qv] = None
    return {k: list(v) for k, v in pools.items()}


class AstGenerator:
    """Draw random typed ASTs; ``depth`` bounds query nesting."""

    def __init__(
        self,
        registry: SchemaRegistry,
        rng: random.Random,
        pools: dict[str, list] | None = None,
        qids: list[str] | None = None,
        mention_rate: float = 0.0,
    ):
        self.reg = registry
        self.rng = rng
        self.pools = pools or {}
        self.mention_rate = mention_rate
        self.qids = qids or sorted(
            {v.ref.qid for vals in self.pools.values() for v in vals if isinstance(v, A.Entity)}
        ) or ["Q1", "Q2", "Q3"]
        self.domains = sorted(d for d in registry.domains)
        self.qualifiers = sorted(n for n, p in registry.properties.items() if p.is_qualifier)

    # --- schema helpers ---

    def allowed(self, domain: str) -> list[str]:
        if domain == ROOT_DOMAIN:
            names = {n for n, p in self.reg.properties.items() if not p.is_qualifier}
        else:
            names = set(self.reg.domain(domain).properties)
            for parent in self.reg.domain(domain).parents:
                if parent != ROOT_DOMAIN:
                    names |= set(self.allowed(parent))
        for s in self.reg.super_properties.values():
            if any(m in names for m in s.members):
                names.add(s.name)
        return sorted(names)

    def kind(self, name: str) -> str:
        return self.reg.value_kind(name).kind

    def target_domain(self, path: A.PropertyPath) -> str:
        doms = self.reg.value_kind(path.steps[-1].name).domains
        return next(iter(doms)) if len(doms) == 1 else ROOT_DOMAIN

    def path(self, domain: str, kinds=None, plain: bool = False) -> A.PropertyPath | None:
        """A path from ``domain`` ending in one of ``kinds`` (any kind when None)."""
        rng = self.rng
        first = [n for n in self.allowed(domain) if not plain or not self.reg.is_super(n)]
        two_step = not plain and rng.random() < 0.25
        if two_step:
            heads = [n for n in first if self.kind(n) == "entity"]
            tails = [n for n in self.allowed(ROOT_DOMAIN) if kinds is None or self.kind(n) in kinds]
            if heads and tails:
                h = rng.choice(heads)
                return A.PropertyPath((self.step(h), self.step(rng.choice(tails))))
        names = [n for n in first if kinds is None or self.kind(n) in kinds]
        if not names:
            return None
        n = rng.choice(names)
        return A.PropertyPath((self.step(n) if not plain else A.Step(n),))

    def step(self, name: str) -> A.Step:
        mod = A.Modifier.ONE
        if self.kind(name) == "entity" and not self.reg.is_super(name) and self.rng.random() < 0.25:
            mod = self.rng.choice([A.Modifier.PLUS, A.Modifier.STAR, A.Modifier.OPT])
        return A.Step(name, mod)

    # --- values ---

    def value(self, name: str) -> A.Value:
        rng = self.rng
        pool = [v for v in self.pools.get(name, ()) if not isinstance(v, A.Null)]
        kind = self.reg.value_kind(name)
        if kind.kind == "entity":
            if rng.random() < self.mention_rate:
                return A.Entity(A.Mention(rng.choice(_MENTIONS)))
            if pool and rng.random() < 0.8:
                return rng.choice(pool)
            return A.Entity(A.Resolved(rng.choice(self.qids)))
        if pool and rng.random() < 0.8:
            return rng.choice(pool)
        if kind.kind == "quantity":
            x = rng.choice([0, 1, 2, 5, 100, 2.5, -3, 1e6])
            return A.Num(x, kind.unit)
        if kind.kind == "time":
            return A.Date(rng.choice(_DEFAULT_DATES))
        return A.Str(rng.choice(_DEFAULT_STRINGS))

    def compare(self, path: A.PropertyPath) -> A.Compare:
        last = path.steps[-1].name
        k = self.kind(last)
        if self.rng.random() < 0.12:
            return A.Compare(path, A.Op.EQ, A.NULL)
        op = self.rng.choice(_EQS if k not in ORDERABLE else _INEQS)
        return A.Compare(path, op, self.value(last))

    # --- predicates ---

    def predicate(self, domain: str, depth: int) -> A.Predicate:
        rng = self.rng
        r = rng.random()
        if depth > 0 and r < 0.12:
            return rng.choice([A.And, A.Or])(self.predicate(domain, depth - 1), self.predicate(domain, depth - 1))
        if depth > 0 and r < 0.18:
            return A.Not(self.predicate(domain, depth - 1))
        if depth > 0 and r < 0.26:
            sub = self.subquery_any(domain, depth - 1)
            if sub is not None:
                return sub
        if r < 0.36:
            q = self.qualified(domain)
            if q is not None:
                return q
        if r < 0.46:
            a = self.agg_compare(domain)
            if a is not None:
                return a
        if r < 0.52:
            return A.Compare(A.PropertyPath.of("id"), rng.choice(_EQS), A.Entity(A.Resolved(rng.choice(self.qids))))
        return self.compare(self.path(domain))

    def subquery_any(self, domain: str, depth: int) -> A.SubqueryAny | None:
        if self.rng.random() < 0.6:
            p = self.path(domain, ("entity",))
            if p is None:
                return None
            sub, _ = self.entity_query(depth)
            return A.SubqueryAny(p, self.rng.choice(_EQS), sub)
        p = self.path(domain, ORDERABLE)
        if p is None:
            return None
        k = self.kind(p.steps[-1].name)
        base, bdom = self.entity_query(depth)
        vp = self.path(bdom, (k,))
        if vp is None:
            return None
        return A.SubqueryAny(p, self.rng.choice(_INEQS), A.Projection((A.Projected(vp),), base))

    def qualifier(self) -> A.Compare | None:
        if not self.qualifiers:
            return None
        q = self.rng.choice(self.qualifiers)
        k = self.kind(q)
        op = self.rng.choice(_EQS if k not in ORDERABLE else _INEQS)
        return A.Compare(A.PropertyPath.of(q), op, self.value(q))

    def qualified(self, domain: str) -> A.Qualified | None:
        p = self.path(domain, plain=True)
        qual = self.qualifier()
        if p is None or qual is None:
            return None
        name = p.steps[0].name
        k = self.kind(name)
        op = self.rng.choice(_EQS if k not in ORDERABLE else _INEQS)
        return A.Qualified(p, op, self.value(name), qual.path, qual.op, qual.value)

    def agg_compare(self, domain: str) -> A.AggCompare | None:
        rng = self.rng
        agg = rng.choice(list(A.Agg))
        if agg is A.Agg.COUNT:
            p = self.path(domain)
            return A.AggCompare(agg, p, rng.choice(_INEQS), A.Num(rng.choice([0, 1, 2, 3])))
        kinds = ("quantity",) if agg in (A.Agg.SUM, A.Agg.AVG) else ("quantity", "time")
        p = self.path(domain, kinds)
        if p is None:
            return None
        return A.AggCompare(agg, p, rng.choice(_INEQS), self.value(p.steps[-1].name))

    # --- queries ---

    def entity_query(self, depth: int) -> tuple[A.QueryExpr, str]:
        """An entity-set query and the domain its answers belong to."""
        rng = self.rng
        if depth <= 0:
            if rng.random() < 0.2:
                return A.pivot(rng.choice(self.qids)), ROOT_DOMAIN
            d = rng.choice(self.domains)
            return A.DomainScan(d), d
        r = rng.random()
        base, dom = self.entity_query(depth - 1)
        if r < 0.45:
            return A.Selection(base, self.predicate(dom, min(depth, 2))), dom
        if r < 0.65:
            p = self.path(dom, ("entity",))
            if p is not None:
                qual = None
                if len(p.steps) == 1 and p.steps[0].modifier is A.Modifier.ONE \
                        and not self.reg.is_super(p.steps[0].name) and rng.random() < 0.2:
                    qual = self.qualifier()
                items = [A.Projected(p, qual)]
                if qual is None and rng.random() < 0.15:
                    p2 = self.path(dom, ("entity",))
                    if p2 is not None and p2 != p:
                        items.append(A.Projected(p2))
                return A.Projection(tuple(items), base), self.target_domain(p) if len(items) == 1 else ROOT_DOMAIN
        if r < 0.8:
            p = self.path(dom, ("quantity", "time"))
            if p is not None:
                return A.Sort(p, rng.choice(list(A.Direction)), base), dom
        if r < 0.9:
            i = rng.randint(1, 3)
            return A.Index(base, i), dom
        i = rng.randint(1, 3)
        return A.Slice(base, i, i + rng.randint(1, 3)), dom

    def values_query(self, depth: int) -> A.QueryExpr | None:
        base, dom = self.entity_query(max(depth - 1, 0))
        p = self.path(dom, ORDERABLE)
        if p is None:
            return None
        q = A.Projection((A.Projected(p),), base)
        if self.rng.random() < 0.2:
            q = A.Index(q, self.rng.randint(1, 2))
        return q

    def query(self, depth: int = 3) -> A.QueryExpr:
        """Any top-level query form."""
        rng = self.rng
        r = rng.random()
        if r < 0.35:
            return self.entity_query(depth)[0]
        if r < 0.45:
            q = self.values_query(depth)
            if q is not None:
                return q
        if r < 0.55:
            base, dom = self.entity_query(depth - 1)
            return A.Verification(self.predicate(dom, 1), base)
        if r < 0.65:
            return A.AggregateCount(self.entity_query(depth - 1)[0])
        if r < 0.75:
            base, dom = self.entity_query(depth - 1)
            agg = rng.choice(list(A.Agg))
            kinds = None if agg is A.Agg.COUNT else ("quantity",) if agg in (A.Agg.SUM, A.Agg.AVG) else ("quantity", "time")
            p = self.path(dom, kinds)
            if p is not None:
                return A.AggregateOver(agg, p, base)
        if r < 0.87:
            base, dom = self.entity_query(depth - 1)
            agg = rng.choice(list(A.Agg))
            kinds = None if agg is A.Agg.COUNT else ("quantity",) if agg in (A.Agg.SUM, A.Agg.AVG) else ("quantity", "time")
            p = self.path(dom, kinds)
            key = self.path(dom)
            if p is not None and key is not None:
                return A.GroupBy(agg, p, base, key)
        left, ldom = self.entity_query(depth - 1)
        right, rdom = self.entity_query(depth - 1)
        if rng.random() < 0.5:
            lp = A.PropertyPath.of("id") if rng.random() < 0.4 else self.path(ldom, ("entity",))
            rp = self.path(rdom, ("entity",))
            if lp is not None and rp is not None:
                return A.Join(left, right, lp, rng.choice(_EQS), rp)
        lp = self.path(ldom, ("quantity", "time"))
        if lp is not None:
            rp = self.path(rdom, (self.kind(lp.steps[-1].name),))
            if rp is not None:
                return A.Join(left, right, lp, rng.choice(_INEQS), rp)
        return A.AggregateCount(left)


def random_graph(registry: SchemaRegistry, rng: random.Random, n_triples: int = 200) -> Graph:
    """A small random graph over the registry's domains and properties."""
    doms = [d for d in sorted(registry.domains) if d != ROOT_DOMAIN]
    per_domain = {d: [f"Q{1000 + 20 * i + j}" for j in range(rng.randint(3, 6))] for i, d in enumerate(doms)}
    everyone = [q for qs in per_domain.values() for q in qs]
    triples: list[Triple] = []
    sub = "Q900"
    triples.append(Triple(sub, "P279", entity(registry.domain(doms[0]).domain_qid)))
    for d, qs in per_domain.items():
        for q in qs:
            cls = sub if d == doms[0] and rng.random() < 0.3 else registry.domain(d).domain_qid
            triples.append(Triple(q, "P31", entity(cls)))
    props = [p for p in registry.properties.values() if not p.is_qualifier]
    quals = [p for p in registry.properties.values() if p.is_qualifier]
    quantities = [0, 1, 2, 3, 5, 8, 2.5]
    dates = [_dt.date(2000, 1, 1), _dt.date(2005, 6, 1), _dt.date(2010, 1, 1), _dt.date(2020, 1, 1)]
    strings = ["alpha", "beta", "Gamma", "delta"]

    def draw(kind) -> object:
        if kind.kind == "entity":
            pool = [q for d in kind.domains for q in per_domain.get(d, ())] or everyone
            return entity(rng.choice(pool))
        if kind.kind == "quantity":
            return A.Num(rng.choice(quantities), kind.unit)
        if kind.kind == "time":
            return A.Date(rng.choice(dates))
        return A.Str(rng.choice(strings))

    seen = set()
    while len(triples) < n_triples:
        d = rng.choice(doms)
        s = rng.choice(per_domain[d])
        allowed = [p for p in props if p.canonical_name in registry.domain(d).properties] or props
        p = rng.choice(allowed)
        o = draw(p.value_kind)
        qs: tuple = ()
        if quals and p.value_kind.is_entity and rng.random() < 0.2:
            qp = rng.choice(quals)
            qs = ((qp.pid, draw(qp.value_kind)),)
        key = (s, p.pid, o, qs)
        if key in seen:
            continue
        seen.add(key)
        triples.append(Triple(s, p.pid, o, qs))
    labels = {q: rng.choice(["Ann", "Bob", "Cy", ""]) or q for q in everyone}
    labels = {q: lab for q, lab in labels.items() if lab != q}
    return Graph(triples, labels)
