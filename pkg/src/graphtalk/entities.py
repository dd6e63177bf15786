"""Entity-linker annotations, parser-input serialization and mention recovery."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import ast as A
from .ast import Mention, Resolved
from .errors import ValidationError
from .schema import is_qid, qid_number

__all__ = [
    "Resolved", "Mention", "EntityAnnotation", "Candidate", "AnnotatedUtterance",
    "serialize_parser_input", "parse_parser_input", "load_annotations",
    "pick_candidate", "resolve_entity_refs", "resolve_with_report", "load_candidates", "mapping_resolver",
]

OPEN, CLOSE, BAR = "<e>", "</e>", "|"


@dataclass(frozen=True)
class EntityAnnotation:
    start: int
    end: int
    surface: str
    qid: str
    domain: str

    def validate(self, utterance: str) -> None:
        if not 0 <= self.start < self.end <= len(utterance):
            raise ValidationError(f"span ({self.start}, {self.end}) outside utterance of length {len(utterance)}")
        if utterance[self.start:self.end] != self.surface:
            raise ValidationError(
                f"surface {self.surface!r} does not match utterance slice {utterance[self.start:self.end]!r}"
            )
        if not is_qid(self.qid):
            raise ValidationError(f"bad QID {self.qid!r}")
        if not self.domain:
            raise ValidationError("empty domain")


@dataclass(frozen=True)
class Candidate:
    qid: str
    label: str
    sitelinks: int

    def __post_init__(self):
        if self.sitelinks < 0:
            raise ValidationError(f"negative sitelinks for {self.qid}")


@dataclass(frozen=True)
class AnnotatedUtterance:
    utterance: str
    annotations: tuple[EntityAnnotation, ...]


# --- serialization ---------------------------------------------------------

_ESCAPE = re.compile(r"[\\|<]")


def _escape(text: str) -> str:
    # after escaping, "<e>", "</e>" and " | " only ever appear as structure
    return _ESCAPE.sub(lambda m: "\\" + m.group(), text)


def _unescape(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text)


def _ordered(utterance: str, annotations: Iterable[EntityAnnotation]) -> list[EntityAnnotation]:
    anns = sorted(annotations, key=lambda a: (a.start, a.end))
    for a in anns:
        a.validate(utterance)
    for a, b in zip(anns, anns[1:]):
        if b.start < a.end:
            raise ValidationError(f"overlapping entity spans {a.surface!r} and {b.surface!r}")
    return anns


def serialize_parser_input(utterance: str, annotations: Iterable[EntityAnnotation]) -> str:
    """``utterance <e> surface | domain | QID </e> ...`` with entries in span order.

    ``\\``, ``|`` and ``<`` inside text are backslash-escaped, which keeps the
    encoding injective.
    """
    parts = [_escape(utterance), OPEN]
    anns = _ordered(utterance, annotations)
    if not anns:
        parts.append(CLOSE)
    for a in anns:
        parts.append(f"{_escape(a.surface)} {BAR} {_escape(a.domain)} {BAR} {a.qid} {CLOSE}")
    return " ".join(parts)


_UNESCAPED = r"((?:[^\\<|]|\\.)*?)"


def parse_parser_input(text: str) -> tuple[str, list[tuple[str, str, str]]]:
    """Inverse of serialize_parser_input (spans are not recoverable, triples are)."""
    m = re.fullmatch(_UNESCAPED + r" <e> (.*)", text, re.S)
    if m is None:
        raise ValidationError("missing <e> block")
    utterance, block = _unescape(m.group(1)), m.group(2)
    if block == CLOSE:
        return utterance, []
    entries = []
    entry = re.compile(_UNESCAPED + r" \| " + _UNESCAPED + r" \| (Q\d+) </e>(?: |$)", re.S)
    pos = 0
    while pos < len(block):
        e = entry.match(block, pos)
        if e is None:
            raise ValidationError(f"malformed entity entry at {pos}")
        entries.append((_unescape(e.group(1)), _unescape(e.group(2)), e.group(3)))
        pos = e.end()
    return utterance, entries


def load_annotations(path: str | Path) -> list[AnnotatedUtterance]:
    """Read ``{utterance, entities: [{start, end, surface, qid, domain}]}`` rows."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                utt = row["utterance"]
                anns = tuple(
                    EntityAnnotation(int(e["start"]), int(e["end"]), e["surface"], e["qid"], e["domain"])
                    for e in row.get("entities", ())
                )
                _ordered(utt, anns)
            except ValidationError as exc:
                raise ValidationError(f"line {n}: {exc}") from None
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"line {n}: malformed annotation row ({exc})") from None
            out.append(AnnotatedUtterance(utt, anns))
    return out


# --- mention recovery ---------------------------------------------------------


def pick_candidate(candidates: Iterable[Candidate]) -> Candidate | None:
    """Most sitelinks wins; ties go to the smaller QID number."""
    best = None
    for c in candidates:
        if best is None or (-c.sitelinks, qid_number(c.qid)) < (-best.sitelinks, qid_number(best.qid)):
            best = c
    return best


Resolver = Callable[[str], "list[Candidate]"]


def resolve_entity_refs(q: A.QueryExpr, resolver: Resolver, report: list | None = None) -> A.QueryExpr:
    """Replace each Mention by its most popular candidate.

    Mentions without candidates stay in place; their text is appended to
    ``report`` (once per distinct mention) when a list is given.
    """
    cache: dict[str, Candidate | None] = {}

    def fix(v):
        if not (isinstance(v, A.Entity) and isinstance(v.ref, Mention)):
            return v
        text = v.ref.text
        if text not in cache:
            cache[text] = pick_candidate(resolver(text) or ())
            if cache[text] is None and report is not None:
                report.append(text)
        best = cache[text]
        return v if best is None else A.Entity(Resolved(best.qid, best.label or None))

    return A.map_values(q, fix)


def resolve_with_report(q: A.QueryExpr, resolver: Resolver) -> tuple[A.QueryExpr, list[str]]:
    unresolved: list[str] = []
    return resolve_entity_refs(q, resolver, unresolved), unresolved


def load_candidates(path: str | Path) -> dict[str, list[Candidate]]:
    """Entity-search fixture: ``{mention: [{id, label, sitelinks, ...}]}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {
        k: [Candidate(c["id"], c.get("label", ""), int(c.get("sitelinks", 0))) for c in v]
        for k, v in data.items()
    }


def mapping_resolver(table: Mapping[str, list[Candidate]]) -> Resolver:
    return lambda text: list(table.get(text, ()))
