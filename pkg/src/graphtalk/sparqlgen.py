"""Compile type-checked logical forms into SPARQL.

Emission is deterministic: the same AST always yields byte-identical
text. Variables are ``?x`` (and ``?y`` for joins) for answers and
``?v1, ?v2, ...`` for intermediates, numbered in emission order.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ast as A
from . import sparql as S
from .errors import CompileError
from .schema import ROOT_DOMAIN, Mode, SchemaRegistry
from .typecheck import typecheck

CLASS_PATH = S.PSeq((S.wdt("P31"), S.PMod(S.wdt("P279"), "*")))

_OPS = {A.Op.EQ: "=", A.Op.CONTAINS: "=", A.Op.GE: ">=", A.Op.LE: "<=", A.Op.GT: ">", A.Op.LT: "<"}
_AGG_NAMES = {a: a.value.upper() for a in A.Agg}


@dataclass(frozen=True)
class SparqlQuery:
    text: str
    form: str  # select | ask
    projected_vars: tuple
    tree: S.Query

    def __str__(self) -> str:
        return self.text


def unresolved_mentions(q) -> list[str]:
    return [
        v.ref.text for v in A.iter_values(q) if isinstance(v, A.Entity) and isinstance(v.ref, A.Mention)
    ]


def literal(v: A.Value):
    if isinstance(v, A.Entity):
        return S.wd(v.ref.qid)
    if isinstance(v, A.Num):
        return S.Lit(v.value)
    if isinstance(v, A.Date):
        return S.Lit(v.value)
    if isinstance(v, A.Str):
        return S.Lit(v.text)
    raise CompileError(f"cannot emit value {v!r}")


class Compiler:
    def __init__(self, registry: SchemaRegistry):
        self.reg = registry
        self.n = 0

    def fresh(self) -> S.Var:
        self.n += 1
        return S.Var(f"v{self.n}")

    def pid(self, name: str) -> str:
        return self.reg.resolve_property(name).pid

    # --- paths ---

    def _step_path(self, step: A.Step):
        plan = self.reg.expand(step.name)
        if plan.mode is Mode.ALL:
            return S.PAlt(tuple(S.wdt(p) for p in plan.pids))
        base = S.wdt(plan.pids[0])
        return base if step.modifier is A.Modifier.ONE else S.PMod(base, step.modifier.value)

    def path_pattern(self, a, path: A.PropertyPath, b) -> list:
        """Elements binding ``b`` to the values of ``path`` from ``a``.

        ``b`` is an unbound variable or a constant.
        """
        steps = path.steps
        if len(steps) == 1 and self.reg.is_super(steps[0].name):
            plan = self.reg.expand(steps[0].name)
            if plan.mode is Mode.ALL:
                return [S.Union_(tuple(S.Group((S.Triple(a, S.wdt(p), b),)) for p in plan.pids))]
        out: list = []
        run: list = []
        cur = a
        for step in steps:
            plan = self.reg.expand(step.name)
            if plan.mode is not Mode.ANY:
                run.append(self._step_path(step))
                continue
            if run:
                mid = self.fresh()
                out.append(S.Triple(cur, _seq(run), mid))
                cur, run = mid, []
            guard = self.fresh()
            out.append(S.Triple(cur, S.PAlt(tuple(S.wdt(p) for p in plan.pids)), guard))
            slots = []
            for p in plan.pids:
                v = self.fresh()
                slots.append(v)
                out.append(S.Optional(S.Group((S.Triple(cur, S.wdt(p), v),))))
            last = step is steps[-1]
            target = b if last and isinstance(b, S.Var) else self.fresh()
            out.append(S.Bind(S.Func("COALESCE", tuple(slots)), target))
            if last and not isinstance(b, S.Var):
                out.append(S.Filter(S.BinOp("=", target, b)))
            cur = target
        if run:
            out.append(S.Triple(cur, _seq(run), b))
        return out

    # --- predicates ---

    def _compare_elements(self, var, c: A.Compare) -> list:
        if isinstance(c.value, A.Entity):
            return self.path_pattern(var, c.path, literal(c.value))
        b = self.fresh()
        return self.path_pattern(var, c.path, b) + [S.Filter(S.BinOp(_OPS[c.op], b, literal(c.value)))]

    def condition(self, pred: A.Predicate, var) -> list:
        out = []
        for c in _conjuncts(pred):
            if isinstance(c, A.Compare) and not isinstance(c.value, A.Null):
                if c.path.is_id:
                    out.append(S.Filter(S.BinOp("=", var, literal(c.value))))
                else:
                    out.extend(self._compare_elements(var, c))
            else:
                out.append(S.Filter(self.expr(c, var)))
        return out

    def expr(self, p: A.Predicate, var):
        if isinstance(p, (A.And, A.Or)):
            op = "&&" if isinstance(p, A.And) else "||"
            return S.BinOp(op, self.expr(p.left, var), self.expr(p.right, var))
        if isinstance(p, A.Not):
            inner = p.operand
            if _is_null(inner):
                return S.Exists(S.Group(tuple(self.path_pattern(var, inner.path, self.fresh()))))
            if _is_atom(inner) and not (isinstance(inner, A.Compare) and inner.path.is_id):
                return S.Exists(self.atom_group(inner, var), negated=True)
            return S.NotExpr(self.expr(inner, var))
        if _is_null(p):
            return S.Exists(S.Group(tuple(self.path_pattern(var, p.path, self.fresh()))), negated=True)
        if isinstance(p, A.Compare) and p.path.is_id:
            return S.BinOp("=", var, literal(p.value))
        return S.Exists(self.atom_group(p, var))

    def atom_group(self, p: A.Predicate, var) -> S.Group:
        if isinstance(p, A.Compare):
            return S.Group(tuple(self._compare_elements(var, p)))
        if isinstance(p, A.SubqueryAny):
            a = self.fresh()
            els = self.path_pattern(var, p.path, a)
            b = self.fresh()
            sub = S.Select((b,), S.Group(tuple(self.pattern(p.query, b))), distinct=True)
            els += [S.SubSelect(sub), S.Filter(S.BinOp(_OPS[p.op], a, b))]
            return S.Group(tuple(els))
        if isinstance(p, A.Qualified):
            els = self.qualified_elements(var, p.path, A.Compare(p.qual_path, p.qual_op, p.qual_value))
            target = els[1].o
            els.append(S.Filter(S.BinOp(_OPS[p.op], target, literal(p.value))))
            return S.Group(tuple(els))
        if isinstance(p, A.AggCompare):
            a = self.fresh()
            inner = S.Group(tuple(self.path_pattern(var, p.path, a)))
            c = self.fresh()
            agg = S.AggExpr(_AGG_NAMES[p.agg], a, distinct=True)
            sub = S.Select(((agg, c),), inner)
            return S.Group((S.SubSelect(sub), S.Filter(S.BinOp(_OPS[p.op], c, literal(p.value)))))
        raise CompileError(f"not an atomic predicate: {p!r}")

    def qualified_elements(self, subj, path: A.PropertyPath, qual: A.Compare, target=None) -> list:
        pid = self.pid(path.steps[0].name)
        qpid = self.pid(qual.path.steps[0].name)
        st = self.fresh()
        target = target if target is not None else self.fresh()
        qv = self.fresh()
        return [
            S.Triple(subj, S.Iri("p", pid), st),
            S.Triple(st, S.Iri("ps", pid), target),
            S.Triple(st, S.Iri("pq", qpid), qv),
            S.Filter(S.BinOp(_OPS[qual.op], qv, literal(qual.value))),
        ]

    # --- set-valued queries ---

    def sort_select(self, q: A.Sort, var) -> S.Select:
        els = self.pattern(q.query, var)
        k = self.fresh()
        els += self.path_pattern(var, q.path, k)
        key = self.fresh()
        desc = q.direction is A.Direction.DESC
        agg = S.AggExpr("MAX" if desc else "MIN", k)
        return S.Select(
            (var, (agg, key)),
            S.Group(tuple(els)),
            group_by=(var,),
            order_by=(("DESC" if desc else "ASC", key), ("ASC", var)),
        )

    def pattern(self, q: A.QueryExpr, var) -> list:
        if isinstance(q, A.DomainScan):
            if q.domain == ROOT_DOMAIN:
                sub = S.Select((var,), S.Group((S.Triple(var, self.fresh(), self.fresh()),)), distinct=True)
                return [S.SubSelect(sub)]
            return [S.Triple(var, CLASS_PATH, S.wd(self.reg.domain(q.domain).domain_qid))]
        if isinstance(q, A.Selection):
            if A.is_pivot(q):
                return [S.Values(var, (literal(q.predicate.value),))]
            return self.pattern(q.query, var) + self.condition(q.predicate, var)
        if isinstance(q, A.Projection):
            branches = []
            for item in q.projections:
                e = self.fresh()
                els = self.pattern(q.query, e)
                if item.qualifier is None:
                    els += self.path_pattern(e, item.path, var)
                else:
                    els += self.qualified_elements(e, item.path, item.qualifier, target=var)
                branches.append(els)
            if len(branches) == 1:
                return branches[0]
            return [S.Union_(tuple(S.Group(tuple(b)) for b in branches))]
        if isinstance(q, A.Sort):
            return [S.SubSelect(self.sort_select(q, var))]
        if isinstance(q, (A.Index, A.Slice)):
            if isinstance(q, A.Index):
                offset, limit = q.index - 1, 1
            else:
                offset, limit = q.start - 1, q.end - q.start + 1
            if isinstance(q.query, A.Sort):
                inner = self.sort_select(q.query, var)
                outer = S.Select(
                    (var,), S.Group((S.SubSelect(inner),)), order_by=inner.order_by, offset=offset, limit=limit
                )
            else:
                outer = S.Select(
                    (var,), S.Group(tuple(self.pattern(q.query, var))), distinct=True,
                    order_by=(("ASC", var),), offset=offset, limit=limit,
                )
            return [S.SubSelect(outer)]
        if isinstance(q, A.Join):
            raise CompileError("join results cannot be nested")
        raise CompileError(f"{type(q).__name__} does not denote a set")

    # --- top level ---

    def top(self, q: A.QueryExpr) -> S.Query:
        x = S.Var("x")
        if isinstance(q, A.Verification):
            return S.Query(S.Ask(S.Group(tuple(self.pattern(q.query, x) + self.condition(q.predicate, x)))))
        if isinstance(q, A.AggregateCount):
            if isinstance(q.query, A.Join):
                inner_vars, where = self.join_body(q.query, self.fresh(), self.fresh())
            else:
                v = self.fresh()
                inner_vars, where = (v,), self.pattern(q.query, v)
            sub = S.Select(inner_vars, S.Group(tuple(where)), distinct=True)
            return S.Query(S.Select(((S.AggExpr("COUNT", None), x),), S.Group((S.SubSelect(sub),))))
        if isinstance(q, A.AggregateOver):
            e = self.fresh()
            els = self.pattern(q.query, e)
            v = self.fresh()
            els += self.path_pattern(e, q.path, v)
            sub = S.Select((e, v), S.Group(tuple(els)), distinct=True)
            agg = S.AggExpr(_AGG_NAMES[q.agg], v)
            return S.Query(S.Select(((agg, x),), S.Group((S.SubSelect(sub),))))
        if isinstance(q, A.GroupBy):
            e = self.fresh()
            els = self.pattern(q.query, e)
            k = self.fresh()
            els += self.path_pattern(e, q.key, k)
            v = self.fresh()
            els += self.path_pattern(e, q.path, v)
            sub = S.Select((e, k, v), S.Group(tuple(els)), distinct=True)
            agg = S.AggExpr(_AGG_NAMES[q.agg], v)
            return S.Query(S.Select((k, (agg, x)), S.Group((S.SubSelect(sub),)), group_by=(k,)))
        if isinstance(q, A.Join):
            out_vars, where = self.join_body(q, x, S.Var("y"))
            return S.Query(S.Select(out_vars, S.Group(tuple(where)), distinct=True))
        return S.Query(S.Select((x,), S.Group(tuple(self.pattern(q, x))), distinct=True))

    def join_body(self, q: A.Join, left, right):
        els = [S.Group(tuple(self.pattern(q.left, left))), S.Group(tuple(self.pattern(q.right, right)))]
        ends = []
        for var, path in ((left, q.left_path), (right, q.right_path)):
            if path.is_id:
                ends.append(var)
            else:
                v = self.fresh()
                els += self.path_pattern(var, path, v)
                ends.append(v)
        els.append(S.Filter(S.BinOp(_OPS[q.op], ends[0], ends[1])))
        return (left, right), els


def _seq(run: list):
    return run[0] if len(run) == 1 else S.PSeq(tuple(run))


def _conjuncts(p: A.Predicate) -> list:
    if isinstance(p, A.And):
        return _conjuncts(p.left) + _conjuncts(p.right)
    return [p]


def _is_null(p) -> bool:
    return isinstance(p, A.Compare) and isinstance(p.value, A.Null)


def _is_atom(p) -> bool:
    return isinstance(p, (A.Compare, A.SubqueryAny, A.Qualified, A.AggCompare))


def compile(q: A.QueryExpr, registry: SchemaRegistry) -> SparqlQuery:  # noqa: A001 - public name
    """Compile ``q`` to SPARQL; mentions must be resolved first."""
    mentions = unresolved_mentions(q)
    if mentions:
        raise CompileError("unresolved entity mentions: " + ", ".join(repr(m) for m in mentions), mentions)
    typecheck(q, registry)
    tree = Compiler(registry).top(q)
    form = "ask" if isinstance(tree.form, S.Ask) else "select"
    names = () if form == "ask" else tuple(v.name for v in tree.form.out_vars)
    return SparqlQuery(S.to_text(tree), form, names, tree)
