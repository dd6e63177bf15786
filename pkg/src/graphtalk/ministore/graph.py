"""Immutable in-memory triple graph with statement qualifiers."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from ..ast import Entity
from ..errors import LoadError
from ..schema import is_pid, is_qid
from .terms import entity, value_from_json, value_to_json

INSTANCE_OF = "P31"
SUBCLASS_OF = "P279"


@dataclass(frozen=True)
class Triple:
    subject: str
    pid: str
    object: object
    qualifiers: tuple = ()

    def __post_init__(self):
        if not is_qid(self.subject):
            raise LoadError(f"subject must be a QID: {self.subject!r}")
        if not is_pid(self.pid):
            raise LoadError(f"predicate must be a PID: {self.pid!r}")
        if self.object is None:
            raise LoadError("triple object cannot be null")
        for q in self.qualifiers:
            if len(q) != 2 or not is_pid(q[0]):
                raise LoadError(f"bad qualifier {q!r}")

    def to_json(self) -> dict:
        row = {"s": self.subject, "p": self.pid, "o": value_to_json(self.object)}
        if self.qualifiers:
            row["q"] = [[pid, value_to_json(v)] for pid, v in self.qualifiers]
        return row


class Graph:
    """Triples plus labels and sitelinks, indexed for both evaluators."""

    def __init__(
        self,
        triples: Iterable[Triple] = (),
        labels: Mapping[str, str] | None = None,
        sitelinks: Mapping[str, int] | None = None,
    ):
        self.triples = tuple(triples)
        self.labels = dict(labels or {})
        self.sitelinks = dict(sitelinks or {})
        self._by_sp: dict[tuple[str, str], list] = defaultdict(list)
        self._stmts: dict[tuple[str, str], list[Triple]] = defaultdict(list)
        self._by_po: dict[tuple[str, object], set[str]] = defaultdict(set)
        self._by_p: dict[str, list[tuple[str, object]]] = defaultdict(list)
        seen = set()
        for t in self.triples:
            self._stmts[(t.subject, t.pid)].append(t)
            key = (t.subject, t.pid, t.object)
            if key in seen:
                continue
            seen.add(key)
            self._by_sp[(t.subject, t.pid)].append(t.object)
            self._by_po[(t.pid, t.object)].add(t.subject)
            self._by_p[t.pid].append((t.subject, t.object))
        self._subjects = frozenset(t.subject for t in self.triples)
        self._nodes = self._subjects | {
            t.object.ref.qid for t in self.triples if isinstance(t.object, Entity)
        }
        self._check_subclass_acyclic()

    def __len__(self) -> int:
        return len(self.triples)

    def _check_subclass_acyclic(self) -> None:
        parents: dict[str, list[str]] = defaultdict(list)
        for s, o in self._by_p.get(SUBCLASS_OF, ()):
            if not isinstance(o, Entity):
                raise LoadError(f"{s} subclass of a non-entity value")
            parents[s].append(o.ref.qid)
        state: dict[str, int] = {}
        for start in list(parents):
            if state.get(start):
                continue
            stack = [(start, iter(parents[start]))]
            trail = [start]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                    trail.pop()
                    continue
                if state.get(nxt) == 1:
                    cycle = trail[trail.index(nxt):] + [nxt]
                    raise LoadError("subclass cycle: " + " -> ".join(cycle))
                if not state.get(nxt):
                    state[nxt] = 1
                    trail.append(nxt)
                    stack.append((nxt, iter(parents.get(nxt, ()))))

    # --- lookups ---

    def objects(self, subject: str, pid: str) -> list:
        """Distinct objects of ``subject pid ?o`` in load order."""
        return self._by_sp.get((subject, pid), [])

    def statements(self, subject: str, pid: str) -> list[Triple]:
        return self._stmts.get((subject, pid), [])

    def subjects(self, pid: str, obj) -> set[str]:
        return self._by_po.get((pid, obj), set())

    def pairs(self, pid: str) -> list[tuple[str, object]]:
        return self._by_p.get(pid, [])

    def predicates(self) -> list[str]:
        return sorted(self._by_p, key=lambda p: int(p[1:]))

    @property
    def subject_set(self) -> frozenset:
        return self._subjects

    @property
    def node_set(self) -> frozenset:
        """QIDs appearing as subject or entity object."""
        return self._nodes

    def instances(self, class_qid: str) -> set[str]:
        """Subjects whose P31 value is ``class_qid`` or a transitive subclass."""
        classes = {class_qid}
        frontier = [class_qid]
        while frontier:
            c = frontier.pop()
            for sub in self.subjects(SUBCLASS_OF, entity(c)):
                if sub not in classes:
                    classes.add(sub)
                    frontier.append(sub)
        out = set()
        for c in classes:
            out |= self.subjects(INSTANCE_OF, entity(c))
        return out


def parse_row(row: dict, line: int | None = None):
    """Return a Triple or an ``(qid, label, sitelinks)`` info tuple."""
    try:
        if "p" not in row:
            qid = row["s"]
            if not is_qid(qid):
                raise LoadError(f"subject must be a QID: {qid!r}", line)
            return qid, row.get("label"), row.get("sitelinks")
        quals = tuple((q[0], value_from_json(q[1])) for q in row.get("q") or ())
        return Triple(row["s"], row["p"], value_from_json(row["o"]), quals)
    except LoadError as exc:
        if exc.line is None:
            raise LoadError(str(exc), line) from None
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise LoadError(f"malformed row: {exc}", line) from None


def load_triples(path: str | Path) -> Graph:
    """Load a JSONL triple file; ``#`` lines and blank lines are skipped.

    Rows without ``p`` carry entity metadata: ``{"s", "label", "sitelinks"}``.
    """
    triples, labels, sitelinks = [], {}, {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            try:
                row = json.loads(text)
            except json.JSONDecodeError as exc:
                raise LoadError(f"invalid JSON: {exc.msg}", n) from None
            if not isinstance(row, dict):
                raise LoadError("row must be a JSON object", n)
            item = parse_row(row, n)
            if isinstance(item, Triple):
                triples.append(item)
            else:
                qid, label, links = item
                if label is not None:
                    labels[qid] = label
                if links is not None:
                    sitelinks[qid] = int(links)
    return Graph(triples, labels, sitelinks)


def dump_triples(graph: Graph, path: str | Path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for qid in sorted(set(graph.labels) | set(graph.sitelinks), key=lambda q: int(q[1:])):
            row = {"s": qid}
            if qid in graph.labels:
                row["label"] = graph.labels[qid]
            if qid in graph.sitelinks:
                row["sitelinks"] = graph.sitelinks[qid]
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        for t in graph.triples:
            fh.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")
