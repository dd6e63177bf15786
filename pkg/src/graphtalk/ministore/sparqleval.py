"""Evaluator for the SPARQL subset over an in-memory Graph.

Groups are evaluated left to right: triples, OPTIONAL, UNION and nested
groups extend each incoming solution; sub-selects are evaluated on their
own and joined; FILTERs apply to the whole group at the end. EXISTS
substitutes the current solution into its pattern, sub-selects included.
Solution modifiers run in the order ORDER BY, projection, DISTINCT,
OFFSET/LIMIT.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import sparql as S
from ..ast import Agg, Date, Entity, Num, Op, Str
from ..errors import EvaluationError, UnsupportedConstruct
from ..schema import is_pid, is_qid
from .graph import Graph, Triple
from .interp import AnswerSet
from .terms import aggregate, compare, entity, sort_key


@dataclass(frozen=True)
class StatementNode:
    """Stands for a reified statement reached through ``p:``."""

    triple: Triple


class _ExprError(Exception):
    pass


_CMP = {"=": Op.EQ, "<": Op.LT, ">": Op.GT, "<=": Op.LE, ">=": Op.GE}
_AGGS = {"COUNT": Agg.COUNT, "MAX": Agg.MAX, "MIN": Agg.MIN, "SUM": Agg.SUM, "AVG": Agg.AVG}


class SparqlEvaluator:
    def __init__(self, graph: Graph):
        self.g = graph

    # --- terms ---

    def term(self, t):
        if isinstance(t, S.Lit):
            v = t.value
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                return Num(v)
            if isinstance(v, str):
                return Str(v)
            return Date(v)
        if isinstance(t, S.Iri):
            if t.prefix == "wd" and is_qid(t.local):
                return entity(t.local)
            return t
        raise EvaluationError(f"not a constant: {t!r}")

    def resolve(self, t, row: dict):
        if isinstance(t, S.Var):
            return row.get(t.name)
        return self.term(t)

    # --- paths ---

    def forward(self, path, node) -> list:
        if isinstance(path, S.Iri):
            return self._forward_iri(path, node)
        if isinstance(path, S.PSeq):
            nodes = [node]
            for part in path.parts:
                nxt: dict = {}
                for n in nodes:
                    for v in self.forward(part, n):
                        nxt[v] = None
                nodes = list(nxt)
            return nodes
        if isinstance(path, S.PAlt):
            out: dict = {}
            for part in path.parts:
                for v in self.forward(part, node):
                    out[v] = None
            return list(out)
        if isinstance(path, S.PMod):
            return self._closure(path, node, self.forward)
        raise UnsupportedConstruct(f"path {path!r}")

    def backward(self, path, node) -> list:
        if isinstance(path, S.Iri):
            return self._backward_iri(path, node)
        if isinstance(path, S.PSeq):
            nodes = [node]
            for part in reversed(path.parts):
                nxt: dict = {}
                for n in nodes:
                    for v in self.backward(part, n):
                        nxt[v] = None
                nodes = list(nxt)
            return nodes
        if isinstance(path, S.PAlt):
            out: dict = {}
            for part in path.parts:
                for v in self.backward(part, node):
                    out[v] = None
            return list(out)
        if isinstance(path, S.PMod):
            return self._closure(path, node, self.backward)
        raise UnsupportedConstruct(f"path {path!r}")

    def _closure(self, path: S.PMod, node, step) -> list:
        out: dict = {}
        if path.mod in ("*", "?"):
            out[node] = None
        if path.mod == "?":
            for v in step(path.path, node):
                out[v] = None
            return list(out)
        seen: dict = {}
        frontier = [node]
        while frontier:
            n = frontier.pop()
            for v in step(path.path, n):
                if v not in seen:
                    seen[v] = None
                    frontier.append(v)
        out.update(seen)
        return list(out)

    def _pid(self, iri: S.Iri) -> str:
        if not is_pid(iri.local):
            raise UnsupportedConstruct(f"predicate {S.term_text(iri)}")
        return iri.local

    def _forward_iri(self, iri: S.Iri, node) -> list:
        pid = self._pid(iri)
        if iri.prefix == "wdt":
            return self.g.objects(node.ref.qid, pid) if isinstance(node, Entity) else []
        if iri.prefix == "p":
            if not isinstance(node, Entity):
                return []
            return [StatementNode(t) for t in self.g.statements(node.ref.qid, pid)]
        if iri.prefix == "ps":
            return [node.triple.object] if isinstance(node, StatementNode) and node.triple.pid == pid else []
        if iri.prefix == "pq":
            if not isinstance(node, StatementNode):
                return []
            return list(dict.fromkeys(v for q, v in node.triple.qualifiers if q == pid))
        raise UnsupportedConstruct(f"predicate {S.term_text(iri)}")

    def _backward_iri(self, iri: S.Iri, node) -> list:
        pid = self._pid(iri)
        if iri.prefix == "wdt":
            return [entity(s) for s in sorted(self.g.subjects(pid, node), key=lambda q: int(q[1:]))]
        if iri.prefix == "p":
            if isinstance(node, StatementNode) and node.triple.pid == pid:
                return [entity(node.triple.subject)]
            return []
        if iri.prefix in ("ps", "pq"):
            out = []
            for t in self.g.triples:
                if iri.prefix == "ps" and t.pid == pid and t.object == node:
                    out.append(StatementNode(t))
                if iri.prefix == "pq" and any(q == pid and v == node for q, v in t.qualifiers):
                    out.append(StatementNode(t))
            return list(dict.fromkeys(out))
        raise UnsupportedConstruct(f"predicate {S.term_text(iri)}")

    def _start_nodes(self, path) -> list:
        if isinstance(path, S.Iri) and path.prefix == "wdt":
            return [entity(s) for s in dict.fromkeys(s for s, _ in self.g.pairs(path.local))]
        if isinstance(path, S.Iri) and path.prefix == "p":
            return [entity(s) for s in dict.fromkeys(s for s, _ in self.g.pairs(path.local))]
        return [entity(q) for q in sorted(self.g.node_set, key=lambda q: int(q[1:]))]

    # --- triple matching ---

    def match(self, tp: S.Triple, row: dict) -> list[dict]:
        s = self.resolve(tp.s, row)
        o = self.resolve(tp.o, row)
        if isinstance(tp.p, S.Var):
            return self._match_any_predicate(tp, s, o, row)
        results = []
        if s is not None:
            for v in self.forward(tp.p, s):
                if o is None or v == o:
                    results.append((s, v))
        elif o is not None:
            for v in self.backward(tp.p, o):
                results.append((v, o))
        else:
            for n in self._start_nodes(tp.p):
                for v in self.forward(tp.p, n):
                    results.append((n, v))
        out = []
        for sv, ov in results:
            new = self._bind(row, tp.s, sv)
            if new is None:
                continue
            new = self._bind(new, tp.o, ov)
            if new is not None:
                out.append(new)
        return out

    def _match_any_predicate(self, tp: S.Triple, s, o, row: dict) -> list[dict]:
        out = []
        pvar = tp.p.name
        for pid in self.g.predicates():
            pterm = S.Iri("wdt", pid)
            if pvar in row and row[pvar] != pterm:
                continue
            for subj, obj in self.g.pairs(pid):
                sv = entity(subj)
                if s is not None and s != sv:
                    continue
                if o is not None and o != obj:
                    continue
                new = self._bind(row, tp.s, sv)
                new = new and self._bind(new, tp.p, pterm)
                new = new and self._bind(new, tp.o, obj)
                if new:
                    out.append(new)
        return out

    @staticmethod
    def _bind(row: dict, t, value):
        if not isinstance(t, S.Var):
            return row
        cur = row.get(t.name)
        if cur is None:
            new = dict(row)
            new[t.name] = value
            return new
        return row if cur == value else None

    # --- groups ---

    def group(self, group: S.Group, subst: dict, seed: dict | None = None) -> list[dict]:
        """Solutions of ``group`` extending ``seed``.

        ``subst`` is the EXISTS substitution in force; unlike ``seed`` it
        also reaches into sub-selects.
        """
        rows = [dict(subst if seed is None else seed)]
        filters = []
        for el in group.elements:
            if isinstance(el, S.Triple):
                rows = [n for r in rows for n in self.match(el, r)]
            elif isinstance(el, S.Optional):
                nxt = []
                for r in rows:
                    ext = self.group(el.group, subst, r)
                    nxt.extend(ext if ext else [r])
                rows = nxt
            elif isinstance(el, S.Union_):
                rows = [n for r in rows for g in el.groups for n in self.group(g, subst, r)]
            elif isinstance(el, S.Group):
                rows = [n for r in rows for n in self.group(el, subst, r)]
            elif isinstance(el, S.Filter):
                filters.append(el.expr)
            elif isinstance(el, S.Bind):
                nxt = []
                for r in rows:
                    if el.var.name in r:
                        raise EvaluationError(f"BIND to already bound ?{el.var.name}")
                    try:
                        val = self.expr(el.expr, r)
                    except _ExprError:
                        nxt.append(r)
                        continue
                    nxt.append({**r, el.var.name: val})
                rows = nxt
            elif isinstance(el, S.Values):
                terms = [self.term(t) for t in el.terms]
                rows = [n for r in rows for t in terms if (n := self._bind(r, el.var, t)) is not None]
            elif isinstance(el, S.SubSelect):
                sub = self.select(el.select, subst)
                rows = [merged for r in rows for s in sub if (merged := _merge(r, s)) is not None]
            else:
                raise UnsupportedConstruct(type(el).__name__)
            if not rows:
                break
        for f in filters:
            rows = [r for r in rows if self._ebv(f, r)]
        return rows

    # --- expressions ---

    def _ebv(self, e, row: dict) -> bool:
        try:
            v = self.expr(e, row)
        except _ExprError:
            return False
        return _truth(v)

    def expr(self, e, row: dict):
        if isinstance(e, S.Var):
            v = row.get(e.name)
            if v is None:
                raise _ExprError(f"unbound ?{e.name}")
            return v
        if isinstance(e, (S.Iri, S.Lit)):
            return self.term(e)
        if isinstance(e, S.BinOp):
            if e.op in ("&&", "||"):
                return self._logical(e, row)
            a, b = self.expr(e.left, row), self.expr(e.right, row)
            if e.op == "!=":
                return not compare(a, Op.EQ, b)
            if e.op != "=" and (type(a) is not type(b) or isinstance(a, Entity)):
                raise _ExprError("incomparable terms")
            return compare(a, _CMP[e.op], b)
        if isinstance(e, S.NotExpr):
            return not _truth(self.expr(e.operand, row))
        if isinstance(e, S.Exists):
            found = bool(self.group(e.group, row))
            return not found if e.negated else found
        if isinstance(e, S.Func) and e.name == "COALESCE":
            for arg in e.args:
                try:
                    return self.expr(arg, row)
                except _ExprError:
                    continue
            raise _ExprError("COALESCE of nothing")
        if isinstance(e, S.AggExpr):
            raise _ExprError("aggregate outside a grouped projection")
        raise UnsupportedConstruct(type(e).__name__)

    def _logical(self, e: S.BinOp, row: dict) -> bool:
        vals = []
        for side in (e.left, e.right):
            try:
                vals.append(_truth(self.expr(side, row)))
            except _ExprError:
                vals.append(None)
        a, b = vals
        if e.op == "&&":
            if a is False or b is False:
                return False
            if a is None or b is None:
                raise _ExprError("error in &&")
            return True
        if a is True or b is True:
            return True
        if a is None or b is None:
            raise _ExprError("error in ||")
        return False

    def _aggregate(self, e: S.AggExpr, rows: list[dict]):
        if e.arg is None:
            return Num(len(rows))
        vals = []
        for r in rows:
            try:
                vals.append(self.expr(e.arg, r))
            except _ExprError:
                continue
        if e.distinct:
            vals = list(dict.fromkeys(vals))
        result = aggregate(_AGGS[e.name], vals, self.g.labels)
        if result is None:
            raise _ExprError(f"{e.name} undefined")
        return result

    # --- select ---

    def select(self, sel: S.Select, subst: dict) -> list[dict]:
        rows = self.group(sel.where, subst)
        has_agg = sel.group_by or any(
            not isinstance(p, S.Var) and isinstance(p[0], S.AggExpr) for p in sel.projection
        )
        if has_agg:
            groups: dict = {}
            for r in rows:
                key = tuple(r.get(v.name) for v in sel.group_by)
                groups.setdefault(key, []).append(r)
            if not sel.group_by and not groups:
                groups[()] = []
            rows = []
            for key, members in groups.items():
                out = {v.name: k for v, k in zip(sel.group_by, key) if k is not None}
                for p in sel.projection:
                    if isinstance(p, S.Var):
                        continue
                    expr, var = p
                    try:
                        if isinstance(expr, S.AggExpr):
                            out[var.name] = self._aggregate(expr, members)
                        else:
                            out[var.name] = self.expr(expr, out)
                    except _ExprError:
                        pass
                rows.append(out)
        else:
            ext = []
            for r in rows:
                r = dict(r)
                for p in sel.projection:
                    if not isinstance(p, S.Var):
                        try:
                            r[p[1].name] = self.expr(p[0], r)
                        except _ExprError:
                            pass
                ext.append(r)
            rows = ext
        for direction, expr in reversed(sel.order_by):
            rows.sort(key=lambda r: self._order_key(expr, r), reverse=direction == "DESC")
        names = [v.name for v in sel.out_vars]
        projected = [{n: r[n] for n in names if n in r} for r in rows]
        if sel.distinct:
            seen, uniq = set(), []
            for r in projected:
                key = tuple(r.get(n) for n in names)
                if key not in seen:
                    seen.add(key)
                    uniq.append(r)
            projected = uniq
        start = sel.offset or 0
        end = None if sel.limit is None else start + sel.limit
        return projected[start:end]

    def _order_key(self, expr, row):
        try:
            v = self.expr(expr, row)
        except _ExprError:
            return (0,)
        return (1, sort_key(v, self.g.labels))

    def run(self, q: S.Query) -> AnswerSet:
        if isinstance(q.form, S.Ask):
            return AnswerSet.yes_no(bool(self.group(q.form.where, {})))
        rows = self.select(q.form, {})
        names = [v.name for v in q.form.out_vars]
        values = set()
        for r in rows:
            if any(n not in r for n in names):
                continue
            values.add(r[names[0]] if len(names) == 1 else tuple(r[n] for n in names))
        return AnswerSet.of(values)


def _merge(a: dict, b: dict) -> dict | None:
    out = dict(a)
    for k, v in b.items():
        cur = out.get(k)
        if cur is None:
            out[k] = v
        elif cur != v:
            return None
    return out


def _truth(v) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, Num):
        return v.value != 0
    if isinstance(v, Str):
        return bool(v.text)
    raise _ExprError("no effective boolean value")


def eval_sparql(query, graph: Graph) -> AnswerSet:
    """Run a SparqlQuery, parsed Query or raw text against ``graph``."""
    if isinstance(query, str):
        query = S.parse_sparql(query)
    elif not isinstance(query, S.Query):
        query = S.parse_sparql(query.text)
    return SparqlEvaluator(graph).run(query)
