"""Decompile the supported SPARQL subset back into logical forms.

The group patterns are first cut into *chunks* (a property path between
two nodes, a reified qualifier statement, a class triple, a sub-select,
a filter). Chunks joined through an intermediate variable are fused into
multi-step paths, then the chunks are split into connected components
around the answer variable: one component binds it (the base query),
every other component is one condition on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast as A
from . import sparql as S
from .errors import NotFoundError, UnsupportedConstruct
from .schema import ROOT_DOMAIN, Mode, SchemaRegistry
from .typecheck import typecheck

_OPS = {"=": A.Op.EQ, ">=": A.Op.GE, "<=": A.Op.LE, ">": A.Op.GT, "<": A.Op.LT}
_FLIP = {">=": "<=", "<=": ">=", ">": "<", "<": ">", "=": "="}
_AGGS = {a.value.upper(): a for a in A.Agg}


@dataclass
class PathChunk:
    src: object
    steps: list
    dst: object


@dataclass
class UnionChunk:
    """``{ a wdt:P1 b } UNION { a wdt:P2 b }`` with no matching super-property."""

    src: object
    names: list
    dst: object


@dataclass
class ClassChunk:
    var: S.Var
    qid: str


@dataclass
class QualChunk:
    subj: object
    name: str
    target: object
    qual_name: str
    qual_var: S.Var


@dataclass
class Item:
    """Any other element (filter, sub-select, VALUES, UNION of groups, group)."""

    element: object
    vars: set = field(default_factory=set)


def _vars_of(x) -> set:
    out = set()
    if isinstance(x, S.Var):
        out.add(x.name)
    elif isinstance(x, (tuple, list)):
        for y in x:
            out |= _vars_of(y)
    elif hasattr(x, "__dataclass_fields__"):
        for name in x.__dataclass_fields__:
            out |= _vars_of(getattr(x, name))
    return out


def _chunk_vars(c) -> set:
    if isinstance(c, (PathChunk, UnionChunk)):
        return _vars_of(c.src) | _vars_of(c.dst)
    if isinstance(c, ClassChunk):
        return {c.var.name}
    if isinstance(c, QualChunk):
        return _vars_of(c.subj) | _vars_of(c.target) | {c.qual_var.name}
    if isinstance(c.element, S.SubSelect):
        return {v.name for v in c.element.select.out_vars}
    return _vars_of(c.element)


class Decompiler:
    def __init__(self, registry: SchemaRegistry):
        self.reg = registry

    # --- names ---

    def name_of(self, iri) -> str:
        if not isinstance(iri, S.Iri) or iri.prefix not in ("wdt", "p", "ps", "pq"):
            raise UnsupportedConstruct(f"predicate {S.term_text(iri) if isinstance(iri, S.Iri) else iri!r}")
        return self.reg.resolve_property(iri.local).canonical_name

    def steps_of(self, path) -> list:
        if isinstance(path, S.Iri):
            return [A.Step(self.name_of(path))]
        if isinstance(path, S.PMod) and isinstance(path.path, S.Iri):
            return [A.Step(self.name_of(path.path), A.Modifier(path.mod))]
        if isinstance(path, S.PSeq):
            return [s for part in path.parts for s in self.steps_of(part)]
        if isinstance(path, S.PAlt) and all(isinstance(p, S.Iri) for p in path.parts):
            names = tuple(self.name_of(p) for p in path.parts)
            sup = self.reg.super_by_members(Mode.ALL, names)
            if sup is None:
                raise UnsupportedConstruct("alternative path over unregistered property list")
            return [A.Step(sup.name)]
        raise UnsupportedConstruct(f"property path {S.path_text(path)}")

    def value(self, t) -> A.Value:
        if isinstance(t, S.Iri):
            if t.prefix == "wd":
                return A.Entity(A.Resolved(t.local))
            raise UnsupportedConstruct(f"IRI value {S.term_text(t)}")
        if isinstance(t, S.Lit):
            v = t.value
            if isinstance(v, str):
                return A.Str(v)
            if isinstance(v, (int, float)):
                return A.Num(v)
            return A.Date(v)
        raise UnsupportedConstruct(f"value {t!r}")

    # --- chunking ---

    def chunks(self, elements, keep=()) -> list:
        """Cut ``elements`` into chunks; variables in ``keep`` are never fused away."""
        els = list(elements)
        out: list = []
        i = 0
        while i < len(els):
            el = els[i]
            if isinstance(el, S.Triple) and isinstance(el.p, S.Iri) and el.p.prefix == "p":
                out.append(self._qualified(el, els[i + 1:i + 3]))
                i += 3
                continue
            if isinstance(el, S.Triple) and isinstance(el.p, S.PAlt):
                n = len(el.p.parts)
                block = els[i + 1:i + 2 + n]
                if block and isinstance(block[0], S.Optional):
                    out.append(self._any_block(el, block))
                    i += 2 + n
                    continue
            if isinstance(el, S.Triple):
                out.append(self._triple(el))
            elif isinstance(el, S.Union_):
                out.append(self._union(el))
            elif isinstance(el, (S.Optional, S.Bind)):
                raise UnsupportedConstruct("OPTIONAL" if isinstance(el, S.Optional) else "BIND")
            else:
                out.append(Item(el))
            i += 1
        for c in out:
            if isinstance(c, Item):
                c.vars = _chunk_vars(c)
        return self._fuse(out, {v.name for v in keep})

    def _triple(self, t: S.Triple):
        if t.p == S.PSeq((S.wdt("P31"), S.PMod(S.wdt("P279"), "*"))) or t.p == S.wdt("P31"):
            if not isinstance(t.s, S.Var) or not isinstance(t.o, S.Iri) or t.o.prefix != "wd":
                raise UnsupportedConstruct("class triple shape")
            return ClassChunk(t.s, t.o.local)
        if isinstance(t.p, S.Var):
            return Item(t)
        return PathChunk(t.s, self.steps_of(t.p), t.o)

    def _qualified(self, first: S.Triple, rest: list) -> QualChunk:
        if len(rest) != 2 or not all(isinstance(r, S.Triple) and isinstance(r.p, S.Iri) for r in rest):
            raise UnsupportedConstruct("statement pattern")
        ps, pq = rest
        st = first.o
        if ps.p.prefix != "ps" or pq.p.prefix != "pq" or ps.s != st or pq.s != st or ps.p.local != first.p.local:
            raise UnsupportedConstruct("statement pattern")
        if not isinstance(pq.o, S.Var):
            raise UnsupportedConstruct("constant qualifier value")
        return QualChunk(first.s, self.name_of(first.p), ps.o, self.name_of(pq.p), pq.o)

    def _any_block(self, guard: S.Triple, block: list) -> PathChunk:
        *opts, bind = block
        pids, slots = [], []
        for o in opts:
            if not (isinstance(o, S.Optional) and len(o.group.elements) == 1):
                raise UnsupportedConstruct("OPTIONAL")
            t = o.group.elements[0]
            if not (isinstance(t, S.Triple) and t.s == guard.s and isinstance(t.p, S.Iri)):
                raise UnsupportedConstruct("OPTIONAL")
            pids.append(t.p)
            slots.append(t.o)
        if tuple(pids) != guard.p.parts:
            raise UnsupportedConstruct("COALESCE guard does not match its OPTIONAL blocks")
        if not (isinstance(bind, S.Bind) and isinstance(bind.expr, S.Func) and bind.expr.name == "COALESCE"):
            raise UnsupportedConstruct("BIND")
        if tuple(bind.expr.args) != tuple(slots):
            raise UnsupportedConstruct("COALESCE arguments do not match OPTIONAL blocks")
        names = tuple(self.name_of(p) for p in pids)
        sup = self.reg.super_by_members(Mode.ANY, names)
        if sup is None:
            raise UnsupportedConstruct("COALESCE over unregistered property list")
        return PathChunk(guard.s, [A.Step(sup.name)], bind.var)

    def _union(self, u: S.Union_):
        triples = [g.elements[0] for g in u.groups if len(g.elements) == 1 and isinstance(g.elements[0], S.Triple)]
        if len(triples) == len(u.groups):
            a, b = triples[0].s, triples[0].o
            if all(t.s == a and t.o == b and isinstance(t.p, S.Iri) for t in triples):
                names = tuple(self.name_of(t.p) for t in triples)
                sup = self.reg.super_by_members(Mode.ALL, names)
                if sup is not None:
                    return PathChunk(a, [A.Step(sup.name)], b)
                return UnionChunk(a, list(names), b)
        return Item(u)

    def _fuse(self, chunks: list, keep: set) -> list:
        """Join PathChunks that meet at a variable used nowhere else."""
        changed = True
        while changed:
            changed = False
            counts: dict = {}
            for c in chunks:
                for v in _chunk_vars(c):
                    counts[v] = counts.get(v, 0) + 1
            for c1 in chunks:
                if not (isinstance(c1, PathChunk) and isinstance(c1.dst, S.Var)) or counts[c1.dst.name] != 2 \
                        or c1.dst.name in keep:
                    continue
                nxt = [c for c in chunks if isinstance(c, PathChunk) and c is not c1 and c.src == c1.dst]
                if len(nxt) != 1 or nxt[0].dst == c1.dst:
                    continue
                c2 = nxt[0]
                merged = PathChunk(c1.src, c1.steps + c2.steps, c2.dst)
                chunks = [merged if c is c1 else c for c in chunks if c is not c2]
                changed = True
                break
        return chunks

    # --- components ---

    def components(self, chunks: list, var: S.Var) -> list[list]:
        parent = list(range(len(chunks)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        owner: dict = {}
        for i, c in enumerate(chunks):
            for v in _chunk_vars(c) - {var.name}:
                if v in owner:
                    parent[find(i)] = find(owner[v])
                else:
                    owner[v] = i
        groups: dict = {}
        for i in range(len(chunks)):
            groups.setdefault(find(i), []).append(chunks[i])
        return list(groups.values())

    def _binds(self, c, var: S.Var) -> bool:
        if isinstance(c, ClassChunk):
            return c.var == var
        if isinstance(c, (PathChunk, UnionChunk)):
            return c.dst == var and c.src != var
        if isinstance(c, QualChunk):
            return c.target == var
        el = c.element
        if isinstance(el, S.Values):
            return el.var == var
        if isinstance(el, S.SubSelect):
            return var in el.select.out_vars
        if isinstance(el, S.Union_):
            return var.name in c.vars
        return False

    def split(self, elements, var: S.Var) -> tuple[A.QueryExpr, list]:
        return self.split_chunks(self.chunks(elements, (var,)), var)

    def split_chunks(self, chunks: list, var: S.Var) -> tuple[A.QueryExpr, list]:
        comps = self.components(chunks, var)
        base_comps = [comp for comp in comps if any(self._binds(c, var) for c in comp)]
        if len(base_comps) > 1:
            raise UnsupportedConstruct(f"?{var.name} is bound twice")
        if not base_comps:
            # plain BGP style: nothing introduces the variable, so it ranges over everything
            return A.DomainScan(ROOT_DOMAIN), [self.condition(comp, var) for comp in comps]
        preds = [self.condition(comp, var) for comp in comps if comp is not base_comps[0]]
        return self.base(base_comps[0], var), preds

    def set_query(self, elements, var: S.Var) -> A.QueryExpr:
        base, preds = self.split(elements, var)
        return _select(base, preds)

    # --- base queries ---

    def base(self, comp: list, var: S.Var) -> A.QueryExpr:
        binder = next(c for c in comp if self._binds(c, var))
        rest = [c for c in comp if c is not binder]
        if isinstance(binder, ClassChunk):
            self._only(rest)
            dom = self.reg.domain_by_qid(binder.qid)
            if dom is None:
                raise NotFoundError(binder.qid, "domain class")
            return A.DomainScan(dom.name)
        if isinstance(binder, PathChunk):
            return A.Projection((A.Projected(A.PropertyPath(tuple(binder.steps))),), self._sub(rest, binder.src))
        if isinstance(binder, UnionChunk):
            items = tuple(A.Projected(A.PropertyPath.of(n)) for n in binder.names)
            return A.Projection(items, self._sub(rest, binder.src))
        if isinstance(binder, QualChunk):
            qfilter = [c for c in rest if isinstance(c, Item) and isinstance(c.element, S.Filter)
                       and binder.qual_var.name in c.vars]
            if len(qfilter) != 1:
                raise UnsupportedConstruct("qualifier filter")
            rest = [c for c in rest if c is not qfilter[0]]
            qual = self._filter_compare(qfilter[0].element.expr, binder.qual_var, A.PropertyPath.of(binder.qual_name))
            item = A.Projected(A.PropertyPath.of(binder.name), qual)
            return A.Projection((item,), self._sub(rest, binder.subj))
        el = binder.element
        self._only(rest)
        if isinstance(el, S.Values):
            if len(el.terms) != 1:
                raise UnsupportedConstruct("VALUES with several terms")
            return A.pivot(self.value(el.terms[0]).ref)
        if isinstance(el, S.SubSelect):
            return self.subselect(el.select, var)
        if isinstance(el, S.Union_):
            return self._multi_projection(el, var)
        raise UnsupportedConstruct(type(el).__name__)

    def _only(self, rest: list) -> None:
        if rest:
            raise UnsupportedConstruct("pattern elements attached to the base")

    def _sub(self, chunks: list, var) -> A.QueryExpr:
        if isinstance(var, S.Iri):
            self._only(chunks)
            return A.pivot(self.value(var).ref)
        if not isinstance(var, S.Var):
            raise UnsupportedConstruct("projection from a literal")
        return _select(*self.split_chunks(chunks, var))

    def _multi_projection(self, u: S.Union_, var: S.Var) -> A.QueryExpr:
        items, bases = [], []
        for g in u.groups:
            q = self.set_query(g.elements, var)
            if not isinstance(q, A.Projection) or len(q.projections) != 1:
                raise UnsupportedConstruct("UNION")
            items.append(q.projections[0])
            bases.append(q.query)
        if any(b != bases[0] for b in bases):
            raise UnsupportedConstruct("UNION branches over different queries")
        return A.Projection(tuple(items), bases[0])

    def subselect(self, sel: S.Select, var: S.Var) -> A.QueryExpr:
        where = sel.where.elements
        if sel.group_by == (var,) and len(sel.projection) == 2:
            return self._sort(sel, var)
        if sel.limit is not None:
            offset = sel.offset or 0
            if len(where) == 1 and isinstance(where[0], S.SubSelect) and where[0].select.group_by:
                inner = self._sort(where[0].select, var)
            else:
                if sel.order_by != (("ASC", var),):
                    raise UnsupportedConstruct("ORDER BY")
                inner = self.set_query(where, var)
            if sel.limit == 1:
                return A.Index(inner, offset + 1)
            if sel.limit < 1:
                raise UnsupportedConstruct("LIMIT 0")
            return A.Slice(inner, offset + 1, offset + sel.limit)
        if sel.projection == (var,) and len(where) == 1 and isinstance(where[0], S.Triple) \
                and isinstance(where[0].p, S.Var) and where[0].s == var:
            return A.DomainScan(ROOT_DOMAIN)
        if sel.projection == (var,) and sel.distinct and not sel.order_by:
            return self.set_query(where, var)
        raise UnsupportedConstruct("sub-select shape")

    def _sort(self, sel: S.Select, var: S.Var) -> A.Sort:
        expr, _ = sel.projection[1]
        if not (isinstance(expr, S.AggExpr) and expr.name in ("MAX", "MIN") and isinstance(expr.arg, S.Var)):
            raise UnsupportedConstruct("sort key aggregate")
        key_var = expr.arg
        chunks = self.chunks(sel.where.elements, (var, key_var))
        key_chunk = [c for c in chunks if isinstance(c, PathChunk) and c.src == var and c.dst == key_var]
        if len(key_chunk) != 1:
            raise UnsupportedConstruct("sort key path")
        rest = [c for c in chunks if c is not key_chunk[0]]
        direction = A.Direction.DESC if expr.name == "MAX" else A.Direction.ASC
        return A.Sort(A.PropertyPath(tuple(key_chunk[0].steps)), direction, self._sub(rest, var))

    # --- conditions ---

    def condition(self, comp: list, var: S.Var) -> A.Predicate:
        filters = [c for c in comp if isinstance(c, Item) and isinstance(c.element, S.Filter)]
        others = [c for c in comp if c not in filters]
        if not others:
            if len(filters) != 1:
                raise UnsupportedConstruct("several filters in one condition")
            return self.expr_predicate(filters[0].element.expr, var)
        if len(others) == 1 and isinstance(others[0], PathChunk) and others[0].src == var:
            c = others[0]
            path = A.PropertyPath(tuple(c.steps))
            if not isinstance(c.dst, S.Var):
                if filters:
                    raise UnsupportedConstruct("filter on a constant path end")
                return A.Compare(path, A.Op.CONTAINS, self.value(c.dst))
            if not filters:
                return A.Not(A.Compare(path, A.Op.EQ, A.NULL))
            if len(filters) != 1:
                raise UnsupportedConstruct("several filters on one value")
            return self._filter_compare(filters[0].element.expr, c.dst, path)
        if len(others) == 1 and isinstance(others[0], UnionChunk) and others[0].src == var and not filters:
            c = others[0]
            value = self.value(c.dst)
            preds = [A.Compare(A.PropertyPath.of(n), A.Op.CONTAINS, value) for n in c.names]
            out = preds[0]
            for p in preds[1:]:
                out = A.Or(out, p)
            return out
        if len(others) == 1 and isinstance(others[0], QualChunk) and others[0].subj == var:
            c = others[0]
            outer = [f for f in filters if _vars_of(f.element.expr) == {c.target.name}]
            inner = [f for f in filters if _vars_of(f.element.expr) == {c.qual_var.name}]
            if len(outer) != 1 or len(inner) != 1 or len(filters) != 2:
                raise UnsupportedConstruct("qualified statement filters")
            o = self._filter_compare(outer[0].element.expr, c.target, A.PropertyPath.of(c.name))
            q = self._filter_compare(inner[0].element.expr, c.qual_var, A.PropertyPath.of(c.qual_name))
            return A.Qualified(o.path, o.op, o.value, q.path, q.op, q.value)
        subs = [c for c in others if isinstance(c, Item) and isinstance(c.element, S.SubSelect)]
        paths = [c for c in others if isinstance(c, PathChunk)]
        if len(subs) == 1 and len(paths) == 1 and len(others) == 2 and len(filters) == 1:
            return self._subquery_any(paths[0], subs[0].element.select, filters[0].element.expr, var)
        if len(subs) == 1 and len(others) == 1 and len(filters) == 1:
            return self._agg_compare(subs[0].element.select, filters[0].element.expr, var)
        raise UnsupportedConstruct("condition shape")

    def _filter_compare(self, expr, v: S.Var, path: A.PropertyPath) -> A.Compare:
        if not isinstance(expr, S.BinOp) or expr.op not in _OPS:
            raise UnsupportedConstruct("filter expression")
        left, right, op = expr.left, expr.right, expr.op
        if right == v and left != v:
            left, right, op = right, left, _FLIP[op]
        if left != v or isinstance(right, S.Var):
            raise UnsupportedConstruct("filter expression")
        return A.Compare(path, _OPS[op], self.value(right))

    def _subquery_any(self, chunk: PathChunk, sel: S.Select, expr, var: S.Var) -> A.SubqueryAny:
        if chunk.src != var or len(sel.projection) != 1 or not isinstance(sel.projection[0], S.Var):
            raise UnsupportedConstruct("subquery shape")
        b = sel.projection[0]
        a = chunk.dst
        if not isinstance(expr, S.BinOp) or expr.op not in _OPS:
            raise UnsupportedConstruct("subquery filter")
        op = expr.op
        if expr.left == b and expr.right == a:
            op = _FLIP[op]
        elif not (expr.left == a and expr.right == b):
            raise UnsupportedConstruct("subquery filter")
        sub = self.set_query(sel.where.elements, b)
        return A.SubqueryAny(A.PropertyPath(tuple(chunk.steps)), _OPS[op], sub)

    def _agg_compare(self, sel: S.Select, expr, var: S.Var) -> A.AggCompare:
        if len(sel.projection) != 1 or isinstance(sel.projection[0], S.Var):
            raise UnsupportedConstruct("aggregate sub-select")
        agg, c = sel.projection[0]
        if not isinstance(agg, S.AggExpr) or agg.arg is None:
            raise UnsupportedConstruct("aggregate sub-select")
        chunks = self.chunks(sel.where.elements, (var, agg.arg))
        if len(chunks) != 1 or not isinstance(chunks[0], PathChunk) or chunks[0].src != var \
                or chunks[0].dst != agg.arg:
            raise UnsupportedConstruct("aggregate sub-select pattern")
        cmp = self._filter_compare(expr, c, A.PropertyPath(tuple(chunks[0].steps)))
        return A.AggCompare(_AGGS[agg.name], cmp.path, cmp.op, cmp.value)

    def expr_predicate(self, e, var: S.Var) -> A.Predicate:
        if isinstance(e, S.BinOp) and e.op in ("&&", "||"):
            kind = A.And if e.op == "&&" else A.Or
            return kind(self.expr_predicate(e.left, var), self.expr_predicate(e.right, var))
        if isinstance(e, S.NotExpr):
            return A.Not(self.expr_predicate(e.operand, var))
        if isinstance(e, S.BinOp) and e.op == "=" and var in (e.left, e.right):
            other = e.right if e.left == var else e.left
            return A.Compare(A.PropertyPath.of("id"), A.Op.EQ, self.value(other))
        if isinstance(e, S.Exists):
            chunks = self.chunks(e.group.elements, (var,))
            if len(chunks) == 1 and isinstance(chunks[0], PathChunk) and chunks[0].src == var \
                    and isinstance(chunks[0].dst, S.Var):
                null = A.Compare(A.PropertyPath(tuple(chunks[0].steps)), A.Op.EQ, A.NULL)
                return null if e.negated else A.Not(null)
            comps = self.components(chunks, var)
            if len(comps) != 1:
                raise UnsupportedConstruct("EXISTS with several conditions")
            atom = self.condition(comps[0], var)
            return A.Not(atom) if e.negated else atom
        raise UnsupportedConstruct("filter expression")

    # --- top level ---

    def top(self, q: S.Query) -> A.QueryExpr:
        if isinstance(q.form, S.Ask):
            x = self._answer_var(q.form.where)
            base, preds = self.split(q.form.where.elements, x)
            if not preds:
                raise UnsupportedConstruct("ASK without a condition")
            return A.Verification(_conj(preds), base)
        sel = q.form
        where = sel.where.elements
        if len(sel.projection) == 1 and isinstance(sel.projection[0], S.Var):
            var = sel.projection[0]
            if sel.order_by or sel.limit is not None:
                return self.subselect(sel, var)
            return self.set_query(where, var)
        if len(sel.projection) == 1:
            agg, _ = sel.projection[0]
            if not isinstance(agg, S.AggExpr) or len(where) != 1 or not isinstance(where[0], S.SubSelect):
                raise UnsupportedConstruct("aggregate query shape")
            inner = where[0].select
            if agg.name == "COUNT" and agg.arg is None:
                if len(inner.projection) == 2:
                    return A.AggregateCount(self.join(inner.where.elements, *inner.projection))
                return A.AggregateCount(self.set_query(inner.where.elements, inner.projection[0]))
            e, v = inner.projection
            return A.AggregateOver(_AGGS[agg.name], *self._value_path(inner.where.elements, e, v))
        if sel.group_by and len(sel.projection) == 2:
            k = sel.projection[0]
            agg, _ = sel.projection[1]
            inner = where[0].select
            e, k2, v = inner.projection
            if k2 != k or agg.arg != v:
                raise UnsupportedConstruct("GROUP BY shape")
            chunks = self.chunks(inner.where.elements, (e, k, v))
            key = [c for c in chunks if isinstance(c, PathChunk) and c.src == e and c.dst == k]
            val = [c for c in chunks if isinstance(c, PathChunk) and c.src == e and c.dst == v]
            if len(key) != 1 or len(val) != 1:
                raise UnsupportedConstruct("GROUP BY paths")
            rest = [c for c in chunks if c is not key[0] and c is not val[0]]
            return A.GroupBy(
                _AGGS[agg.name], A.PropertyPath(tuple(val[0].steps)), self._sub(rest, e),
                A.PropertyPath(tuple(key[0].steps)),
            )
        if len(sel.projection) == 2 and all(isinstance(p, S.Var) for p in sel.projection):
            return self.join(where, *sel.projection)
        raise UnsupportedConstruct("query form")

    def _answer_var(self, where: S.Group) -> S.Var:
        names = _vars_of(where.elements)
        if "x" in names:
            return S.Var("x")
        raise UnsupportedConstruct("ASK without ?x")

    def _value_path(self, elements, e: S.Var, v: S.Var):
        chunks = self.chunks(elements, (e, v))
        val = [c for c in chunks if isinstance(c, PathChunk) and c.src == e and c.dst == v]
        if len(val) != 1:
            raise UnsupportedConstruct("aggregate value path")
        rest = [c for c in chunks if c is not val[0]]
        return A.PropertyPath(tuple(val[0].steps)), self._sub(rest, e)

    def join(self, elements, left: S.Var, right: S.Var) -> A.Join:
        # each side is a nested group; a group holding only a sub-select parses as the sub-select
        sides = [el.elements if isinstance(el, S.Group) else (el,) for el in elements[:2]]
        rest = list(elements[2:])
        if len(sides) != 2 or not all(isinstance(el, (S.Group, S.SubSelect)) for el in elements[:2]) \
                or not rest or not isinstance(rest[-1], S.Filter):
            raise UnsupportedConstruct("join shape")
        q1 = self.set_query(sides[0], left)
        q2 = self.set_query(sides[1], right)
        cond = rest[-1].expr
        if not isinstance(cond, S.BinOp) or cond.op not in _OPS:
            raise UnsupportedConstruct("join condition")
        chunks = self.chunks(rest[:-1], (left, right, cond.left, cond.right))

        def side(var: S.Var, end) -> A.PropertyPath:
            if end == var:
                return A.PropertyPath.of("id")
            hits = [c for c in chunks if isinstance(c, PathChunk) and c.src == var and c.dst == end]
            if len(hits) != 1:
                raise UnsupportedConstruct("join path")
            return A.PropertyPath(tuple(hits[0].steps))

        return A.Join(q1, q2, side(left, cond.left), _OPS[cond.op], side(right, cond.right))


def _conj(preds: list) -> A.Predicate:
    out = preds[0]
    for p in preds[1:]:
        out = A.And(out, p)
    return out


def _select(base: A.QueryExpr, preds: list) -> A.QueryExpr:
    return A.Selection(base, _conj(preds)) if preds else base


def decompile(text, registry: SchemaRegistry) -> A.QueryExpr:
    """SPARQL text (or a parsed Query) to the canonical logical form."""
    tree = text if isinstance(text, S.Query) else S.parse_sparql(getattr(text, "text", text))
    q = A.canonicalize(Decompiler(registry).top(tree))
    typecheck(q, registry)
    return q
