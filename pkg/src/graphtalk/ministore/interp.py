"""Reference interpreter: direct denotational semantics of QueryExpr."""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import ast as A
from ..errors import EvaluationError
from ..schema import ID_PROPERTY, ROOT_DOMAIN, Mode, SchemaRegistry
from .graph import Graph
from .terms import aggregate, compare, entity, sort_key


@dataclass(frozen=True)
class AnswerSet:
    """Set of answer terms (or tuples of terms); ``boolean`` for yes/no queries."""

    values: frozenset = field(default_factory=frozenset)
    boolean: bool | None = None

    @classmethod
    def of(cls, values) -> "AnswerSet":
        return cls(frozenset(values))

    @classmethod
    def yes_no(cls, flag: bool) -> "AnswerSet":
        return cls(frozenset(), bool(flag))

    def __len__(self) -> int:
        return len(self.values)

    def __bool__(self) -> bool:
        return self.boolean if self.boolean is not None else bool(self.values)

    def sorted(self, labels=None) -> list:
        return sorted(self.values, key=lambda t: sort_key(t, labels))


class Interpreter:
    def __init__(self, graph: Graph, registry: SchemaRegistry):
        self.g = graph
        self.reg = registry
        self.labels = graph.labels

    # --- paths ---

    def step_values(self, node, step: A.Step) -> list:
        """Values reached from ``node`` by one path step (distinct, ordered)."""
        name = step.name
        if name == ID_PROPERTY:
            return [node]
        plan = self.reg.expand(name)
        if plan.mode is Mode.ANY:
            if not isinstance(node, A.Entity):
                return []
            for pid in plan.pids:
                vals = self.g.objects(node.ref.qid, pid)
                if vals:
                    return list(vals)
            return []
        out: dict = {}
        pids = plan.pids
        if step.modifier in (A.Modifier.STAR, A.Modifier.OPT):
            out[node] = None
        if step.modifier in (A.Modifier.ONE, A.Modifier.OPT):
            for v in self._one(node, pids):
                out[v] = None
            return list(out)
        frontier = [node]
        seen_plus: dict = {}
        while frontier:
            n = frontier.pop()
            for v in self._one(n, pids):
                if v not in seen_plus:
                    seen_plus[v] = None
                    frontier.append(v)
        out.update(seen_plus)
        return list(out)

    def _one(self, node, pids) -> list:
        if not isinstance(node, A.Entity):
            return []
        out = []
        for pid in pids:
            out.extend(self.g.objects(node.ref.qid, pid))
        return out

    def path_values(self, node, path: A.PropertyPath) -> set:
        nodes = {node}
        for step in path.steps:
            nxt = set()
            for n in nodes:
                nxt.update(self.step_values(n, step))
            nodes = nxt
        return nodes

    def _pid(self, path: A.PropertyPath) -> str:
        return self.reg.resolve_property(path.steps[0].name).pid

    def qualified_values(self, node, path: A.PropertyPath, qual: A.Compare) -> set:
        """Objects of statements ``node path ?`` whose qualifiers satisfy ``qual``."""
        if not isinstance(node, A.Entity):
            return set()
        qpid = self._pid(qual.path)
        out = set()
        for st in self.g.statements(node.ref.qid, self._pid(path)):
            if any(p == qpid and compare(v, qual.op, qual.value) for p, v in st.qualifiers):
                out.add(st.object)
        return out

    # --- predicates ---

    def holds(self, p: A.Predicate, node) -> bool:
        if isinstance(p, A.And):
            return self.holds(p.left, node) and self.holds(p.right, node)
        if isinstance(p, A.Or):
            return self.holds(p.left, node) or self.holds(p.right, node)
        if isinstance(p, A.Not):
            return not self.holds(p.operand, node)
        if isinstance(p, A.Compare):
            self._check_value(p.value)
            vals = self.path_values(node, p.path)
            if isinstance(p.value, A.Null):
                return not vals
            return any(compare(v, p.op, p.value) for v in vals)
        if isinstance(p, A.SubqueryAny):
            candidates = self.answers(p.query)
            vals = self.path_values(node, p.path)
            return any(compare(v, p.op, c) for v in vals for c in candidates)
        if isinstance(p, A.Qualified):
            self._check_value(p.value)
            self._check_value(p.qual_value)
            vals = self.qualified_values(node, p.path, A.Compare(p.qual_path, p.qual_op, p.qual_value))
            return any(compare(v, p.op, p.value) for v in vals)
        if isinstance(p, A.AggCompare):
            result = aggregate(p.agg, self.path_values(node, p.path), self.labels)
            return result is not None and compare(result, p.op, p.value)
        raise EvaluationError(f"not a predicate: {p!r}")

    @staticmethod
    def _check_value(v) -> None:
        if isinstance(v, A.Entity) and isinstance(v.ref, A.Mention):
            raise EvaluationError(f"unresolved mention {v.ref.text!r}")

    # --- queries ---

    def ordered(self, q: A.QueryExpr) -> list:
        """Answers in the order Index/Slice sees them."""
        if isinstance(q, A.Sort):
            base = self.answers(q.query)
            keyed = []
            for e in base:
                vals = self.path_values(e, q.path)
                if not vals:
                    continue
                agg = A.Agg.MAX if q.direction is A.Direction.DESC else A.Agg.MIN
                keyed.append((aggregate(agg, vals, self.labels), e))
            keyed.sort(key=lambda ke: sort_key(ke[1], self.labels))
            keyed.sort(key=lambda ke: sort_key(ke[0], self.labels), reverse=q.direction is A.Direction.DESC)
            return [e for _, e in keyed]
        return sorted(self.answers(q), key=lambda t: sort_key(t, self.labels))

    def answers(self, q: A.QueryExpr) -> set:
        if isinstance(q, A.DomainScan):
            if q.domain == ROOT_DOMAIN:
                return {entity(s) for s in self.g.subject_set}
            qid = self.reg.domain(q.domain).domain_qid
            return {entity(s) for s in self.g.instances(qid)}
        if isinstance(q, A.Selection):
            if A.is_pivot(q):
                self._check_value(q.predicate.value)
                return {q.predicate.value}
            return {e for e in self.answers(q.query) if self.holds(q.predicate, e)}
        if isinstance(q, A.Projection):
            base = self.answers(q.query)
            out = set()
            for item in q.projections:
                for e in base:
                    if item.qualifier is None:
                        out |= self.path_values(e, item.path)
                    else:
                        self._check_value(item.qualifier.value)
                        out |= self.qualified_values(e, item.path, item.qualifier)
            return out
        if isinstance(q, A.Sort):
            return set(self.ordered(q))
        if isinstance(q, A.Index):
            items = self.ordered(q.query)
            return set(items[q.index - 1:q.index])
        if isinstance(q, A.Slice):
            return set(self.ordered(q.query)[q.start - 1:q.end])
        if isinstance(q, A.Join):
            left, right = self.answers(q.left), self.answers(q.right)
            out = set()
            for a in left:
                avals = self.path_values(a, q.left_path)
                if not avals:
                    continue
                for b in right:
                    bvals = self.path_values(b, q.right_path)
                    if any(compare(x, q.op, y) for x in avals for y in bvals):
                        out.add((a, b))
            return out
        raise EvaluationError(f"{type(q).__name__} does not denote a set")

    def run(self, q: A.QueryExpr) -> AnswerSet:
        if isinstance(q, A.Verification):
            return AnswerSet.yes_no(any(self.holds(q.predicate, e) for e in self.answers(q.query)))
        if isinstance(q, A.AggregateCount):
            return AnswerSet.of([A.Num(len(self.answers(q.query)))])
        if isinstance(q, A.AggregateOver):
            rows = {(e, v) for e in self.answers(q.query) for v in self.path_values(e, q.path)}
            result = aggregate(q.agg, [v for _, v in rows], self.labels)
            return AnswerSet.of([] if result is None else [result])
        if isinstance(q, A.GroupBy):
            rows = {
                (e, k, v)
                for e in self.answers(q.query)
                for k in self.path_values(e, q.key)
                for v in self.path_values(e, q.path)
            }
            groups: dict = {}
            for _, k, v in rows:
                groups.setdefault(k, []).append(v)
            out = set()
            for k, vs in groups.items():
                result = aggregate(q.agg, vs, self.labels)
                if result is not None:
                    out.add((k, result))
            return AnswerSet.of(out)
        return AnswerSet.of(self.answers(q))


def interpret(q: A.QueryExpr, graph: Graph, registry: SchemaRegistry) -> AnswerSet:
    """Evaluate ``q`` directly over ``graph``; mentions raise EvaluationError."""
    return Interpreter(graph, registry).run(q)
