"""Query and answer accuracy, dataset containers and the answer-combination policy."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import ast as A
from .entities import EntityAnnotation
from .errors import GraphTalkError, ModeViolation, ParseError, ValidationError
from .ministore.interp import AnswerSet
from .ministore.terms import render, value_from_json, value_to_json
from .qparser import parse_query
from .schema import SchemaRegistry

log = logging.getLogger(__name__)

MODES = ("wwq", "wwqsp")
SPLITS = ("train", "dev", "test")
GUESS_PREFACE = "We are not sure but GPT-3 guesses that the answer is:"
NO_ANSWER = "Sorry, I could not find an answer."


# --- dataset container ------------------------------------------------------------


@dataclass(frozen=True)
class Example:
    id: str
    utterance: str
    gold_thingtalk: str
    gold: A.QueryExpr
    gold_sparql: str = ""
    gold_answers: AnswerSet = field(default_factory=AnswerSet)
    annotations: tuple[EntityAnnotation, ...] = ()
    split: str = "test"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "utterance": self.utterance,
            "annotations": [
                {"start": a.start, "end": a.end, "surface": a.surface, "qid": a.qid, "domain": a.domain}
                for a in self.annotations
            ],
            "gold_thingtalk": self.gold_thingtalk,
            "gold_sparql": self.gold_sparql,
            "gold_answers": answers_to_json(self.gold_answers),
            "split": self.split,
        }


def answers_to_json(ans: AnswerSet):
    if ans.boolean is not None:
        return {"boolean": ans.boolean}
    return [[value_to_json(t) for t in v] if isinstance(v, tuple) else value_to_json(v) for v in ans.sorted()]


def answers_from_json(data) -> AnswerSet:
    if isinstance(data, dict) and "boolean" in data:
        return AnswerSet.yes_no(bool(data["boolean"]))
    if not isinstance(data, list):
        raise ValidationError("gold_answers must be a list or {\"boolean\": ...}")
    return AnswerSet.of(
        tuple(value_from_json(t) for t in v) if isinstance(v, list) else value_from_json(v) for v in data
    )


def _rows(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    yield n, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path}:{n}: invalid JSON ({exc.msg})") from None


def load_dataset(path: str | Path, registry: SchemaRegistry) -> list[Example]:
    """Read a dataset JSONL file; a gold form that fails to parse is an error."""
    out, seen = [], set()
    for n, row in _rows(path):
        try:
            ex_id = str(row["id"])
            text = row["gold_thingtalk"]
            gold = parse_query(text, registry)
            anns = tuple(
                EntityAnnotation(int(e["start"]), int(e["end"]), e["surface"], e["qid"], e["domain"])
                for e in row.get("annotations", ())
            )
            for a in anns:
                a.validate(row["utterance"])
            split = row.get("split", "test")
            if split not in SPLITS:
                raise ValidationError(f"unknown split {split!r}")
            ex = Example(ex_id, row["utterance"], text, gold, row.get("gold_sparql", ""),
                         answers_from_json(row.get("gold_answers", [])), anns, split)
        except (ParseError, ValidationError, GraphTalkError) as exc:
            raise ValidationError(f"{path}:{n}: {exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{n}: malformed example ({exc!r})") from None
        if ex_id in seen:
            raise ValidationError(f"{path}:{n}: duplicate id {ex_id}")
        seen.add(ex_id)
        out.append(ex)
    return out


def load_predictions(path: str | Path, registry: SchemaRegistry) -> dict[str, A.QueryExpr | None]:
    """``{id, thingtalk}`` rows; an unparsable prediction maps to None (scored wrong)."""
    out: dict[str, A.QueryExpr | None] = {}
    for n, row in _rows(path):
        try:
            ex_id, text = str(row["id"]), row["thingtalk"]
        except (KeyError, TypeError):
            raise ValidationError(f"{path}:{n}: prediction rows need id and thingtalk") from None
        try:
            out[ex_id] = parse_query(text, registry)
        except GraphTalkError as exc:
            log.warning("prediction %s does not parse: %s", ex_id, exc)
            out[ex_id] = None
    return out


# --- metrics -------------------------------------------------------------------------


def query_em(pred: A.QueryExpr, gold: A.QueryExpr) -> bool:
    return A.canonicalize(pred) == A.canonicalize(gold)


def _norm(t):
    if isinstance(t, tuple):
        return tuple(_norm(x) for x in t)
    if isinstance(t, A.Entity):
        return ("e", t.ref.qid if isinstance(t.ref, A.Resolved) else t.ref.text.strip().casefold())
    if isinstance(t, A.Str):
        return ("s", t.text.strip().casefold())
    if isinstance(t, A.Num):
        return ("n", float(t.value))
    if isinstance(t, A.Date):
        return ("d", t.value)
    return ("?", t)


def answer_metrics(pred: AnswerSet, gold: AnswerSet) -> tuple[bool, float]:
    """(exact set match, F1) after normalizing QIDs, strings and dates."""
    if gold.boolean is not None or pred.boolean is not None:
        if gold.boolean is None and not gold.values:
            raise ModeViolation("gold answer set is empty")
        same = gold.boolean is not None and pred.boolean == gold.boolean
        return same, 1.0 if same else 0.0
    if not gold.values:
        raise ModeViolation("gold answer set is empty")
    p = {_norm(t) for t in pred.values}
    g = {_norm(t) for t in gold.values}
    hit = len(p & g)
    precision = hit / len(p) if p else 0.0
    recall = hit / len(g)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return p == g, f1


@dataclass(frozen=True)
class ExampleScore:
    id: str
    query_em: bool
    answer_em: bool | None = None
    answer_f1: float | None = None
    note: str = ""


@dataclass(frozen=True)
class Metrics:
    n: int
    query_em: float
    answer_em: float | None = None
    answer_f1: float | None = None
    mode: str = "wwq"
    per_example: tuple[ExampleScore, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        for v in (self.query_em, self.answer_em, self.answer_f1):
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"metric {v} outside [0, 1]")
        if self.mode == "wwqsp" and (self.answer_em is not None or self.answer_f1 is not None):
            raise ValueError("answer metrics are not reported in wwqsp mode")

    def to_json(self) -> dict:
        out = {"mode": self.mode, "n": self.n, "query_em": self.query_em}
        if self.answer_em is not None:
            out["answer_em"] = self.answer_em
            out["answer_f1"] = self.answer_f1
        return out


Executor = Callable[[A.QueryExpr], AnswerSet]


_MISSING = object()


def _score(ex: Example, pred, mode: str, executor: Executor | None) -> ExampleScore:
    if pred is None or pred is _MISSING:
        note = "no prediction" if pred is _MISSING else "unparsable prediction"
        return ExampleScore(ex.id, False, None if mode == "wwqsp" else False,
                            None if mode == "wwqsp" else 0.0, note)
    qem = query_em(pred, ex.gold)
    if mode == "wwqsp":
        return ExampleScore(ex.id, qem)
    try:
        got = executor(pred)
    except GraphTalkError as exc:
        log.warning("executing prediction for %s failed: %s", ex.id, exc)
        return ExampleScore(ex.id, qem, False, 0.0, f"execution failed: {exc}")
    em, f1 = answer_metrics(got, ex.gold_answers)
    return ExampleScore(ex.id, qem, em, f1)


def evaluate_split(
    examples: Iterable[Example],
    predictions: Mapping[str, A.QueryExpr | None],
    mode: str = "wwq",
    executor: Executor | None = None,
) -> Metrics:
    """Average query EM (and, in wwq mode, answer EM and macro F1).

    wwq mode keeps only answerable examples (non-empty gold answers); wwqsp
    mode scores every example on query EM and never executes anything.
    Missing predictions score zero.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, not {mode!r}")
    if mode == "wwq" and executor is None:
        raise ValidationError("wwq mode needs an executor")
    exs = sorted(examples, key=lambda e: e.id)
    if mode == "wwq":
        exs = [e for e in exs if e.gold_answers]
    scores = tuple(_score(e, predictions.get(e.id, _MISSING), mode, executor) for e in exs)
    for s in scores:
        if s.note == "no prediction":
            log.warning("no prediction for %s; scored as wrong", s.id)
    n = len(scores)
    if n == 0:
        return Metrics(0, 0.0, None if mode == "wwqsp" else 0.0, None if mode == "wwqsp" else 0.0, mode, scores)
    qem = sum(s.query_em for s in scores) / n
    if mode == "wwqsp":
        return Metrics(n, qem, mode=mode, per_example=scores)
    aem = sum(bool(s.answer_em) for s in scores) / n
    f1 = sum(s.answer_f1 or 0.0 for s in scores) / n
    return Metrics(n, qem, aem, f1, mode, scores)


# --- answer combination ------------------------------------------------------------


@dataclass(frozen=True)
class CombinedAnswer:
    text: str
    provenance: str  # verified | guess | none
    guess_preface: str | None = None


def combine_answers(
    parser_result: AnswerSet | None,
    guess: str | None,
    labels: Mapping[str, str] | None = None,
) -> CombinedAnswer:
    """Prefer a non-empty executed answer; otherwise fall back to a labeled guess."""
    if parser_result is not None and parser_result:
        if parser_result.boolean is not None:
            text = "Yes" if parser_result.boolean else "No"
        else:
            text = ", ".join(render(v, labels) for v in parser_result.sorted(labels))
        return CombinedAnswer(text, "verified")
    if parser_result is not None and parser_result.boolean is False:
        return CombinedAnswer("No", "verified")
    if guess is not None and guess.strip():
        return CombinedAnswer(f"{GUESS_PREFACE} {guess.strip()}", "guess", GUESS_PREFACE)
    return CombinedAnswer(NO_ANSWER, "none")


Guesser = Callable[[str], "str | None"]


class StubGuesser:
    """Deterministic guesser: looks the question up in a table."""

    def __init__(self, table: Mapping[str, str] | None = None, default: str | None = None):
        self.table = dict(table or {})
        self.default = default

    def __call__(self, question: str) -> str | None:
        return self.table.get(question.strip(), self.default)


def answer_question(
    question: str,
    parse: Callable[[str], A.QueryExpr],
    executor: Executor,
    guesser: Guesser | None = None,
    labels: Mapping[str, str] | None = None,
) -> CombinedAnswer:
    """Parse, execute, and fall back to the guesser when that yields nothing."""
    result = None
    try:
        result = executor(parse(question))
    except GraphTalkError as exc:
        log.info("parser path failed for %r: %s", question, exc)
    if result is not None and result:
        return combine_answers(result, None, labels)
    return combine_answers(result, guesser(question) if guesser else None, labels)
