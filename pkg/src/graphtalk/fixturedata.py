"""Builds the small evaluation fixture: dataset, predictions and a replay cache.

Cached endpoint replies are produced by running each compiled query on the
reference store over the ``world`` graph, so offline evaluation needs no
network and its answers agree with the local evaluators.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from .entities import EntityAnnotation, load_candidates
from .errors import GraphTalkError
from .evalharness import Example
from .ministore.graph import load_triples
from .ministore.interp import interpret
from .ministore.sparqleval import eval_sparql
from .qparser import parse_query
from .schema import SchemaRegistry
from .sparqlgen import compile as compile_sparql
from .wdclient import answers_to_results, seed_cache, seed_search

# id, utterance, [(surface, qid, domain)], gold form
DATASET = [
    ("WQ-1", "who is the head of state of the United States of America",
     [("United States of America", "Q30", "country")],
     '[ head_of_state ] of @entity() filter id == "Q30"'),
    ("WQ-2", "what movies has Selena Gomez starred in",
     [("Selena Gomez", "Q83287", "human")],
     '@film() filter contains ( cast_member , "Q83287" )'),
    ("WQ-3", "which cities have more than three million inhabitants",
     [], "@city() filter population > 3000000"),
    ("WQ-4", "who has Justin Bieber been dating",
     [("Justin Bieber", "Q34086", "human")],
     '[ unmarried_partner ] of @entity() filter id == "Q34086"'),
    ("WQ-5", "where is the headquarters of Q95 located",
     [], '[ location ] of @entity() filter id == "Q95"'),
    ("WQ-6", "how many cities are in France",
     [("France", "Q142", "country")],
     'count ( @city() filter contains ( country , "Q142" ) )'),
    ("WQ-7", "what is the largest city in Germany by population",
     [("Germany", "Q183", "country")],
     'sort ( population desc of @city() filter contains ( country , "Q183" ) ) [ 1 ]'),
    ("WQ-8", "who are the partners of Justin Bieber",
     [("Justin Bieber", "Q34086", "human")],
     '[ partner ] of @entity() filter id == "Q34086"'),
    ("WQ-9", "is Paris the capital of France",
     [("Paris", "Q90", "city"), ("France", "Q142", "country")],
     '[ contains ( capital_of , "Q142" ) ] of @entity() filter id == "Q90"'),
    ("WQ-10", "which cities are twinned with Paris",
     [("Paris", "Q90", "city")],
     '@city() filter contains ( twinned_administrative_body , "Q90" )'),
    ("WQ-11", "who was the spouse of Selena Gomez",
     [("Selena Gomez", "Q83287", "human")],
     '[ spouse ] of @entity() filter id == "Q83287"'),
    ("WQ-12", "what films did Selena Gomez star in after 2013",
     [("Selena Gomez", "Q83287", "human")],
     '@film() filter contains ( cast_member , "Q83287" ) && publication_date > 2013.01.01'),
]

# a search term the endpoint knows nothing about
UNMATCHED = "allied invasion of France"

# predictions that differ from gold; every other example is predicted exactly
PREDICTIONS = {
    "WQ-3": "@city() filter population >= 3000001",  # different form, same answers
    "WQ-4": '[ partner ] of @entity() filter id == "Q34086"',  # broader answer set
    "WQ-6": 'count ( @city() filter contains ( country , "Q183" ) )',  # wrong entity
    "WQ-10": None,  # missing
    "WQ-11": "[ spouse of",  # does not parse
    "WQ-12": '@film() filter publication_date > 2013.01.01 && contains ( cast_member , "Q83287" )',
}


def _annotations(utterance: str, ents) -> tuple[EntityAnnotation, ...]:
    out = []
    for surface, qid, domain in ents:
        start = utterance.index(surface)
        out.append(EntityAnnotation(start, start + len(surface), surface, qid, domain))
    return tuple(out)


def build_dataset(fix: Path) -> None:
    fix = Path(fix)
    schema = fix / "schema"
    reg = SchemaRegistry.load(schema / "schema.json", schema / "super_properties.json")
    graph = load_triples(fix / "graph" / "world.jsonl")
    cache = fix / "cache"
    if cache.exists():
        shutil.rmtree(cache)
    out = fix / "dataset"
    out.mkdir(parents=True, exist_ok=True)

    def seed(q) -> None:
        sq = compile_sparql(q, reg)
        ans = eval_sparql(sq, graph)
        names = [v.lstrip("?") for v in map(str, sq.projected_vars)]
        seed_cache(cache, sq.text, json.dumps(answers_to_results(ans, names), sort_keys=True))

    rows, preds = [], []
    for ex_id, utt, ents, text in DATASET:
        gold = parse_query(text, reg)
        ex = Example(ex_id, utt, text, gold, compile_sparql(gold, reg).text,
                     interpret(gold, graph, reg), _annotations(utt, ents), "test")
        rows.append(ex.to_json())
        seed(gold)
        pred = PREDICTIONS.get(ex_id, text)
        if pred is not None:
            preds.append({"id": ex_id, "thingtalk": pred})
            try:
                seed(parse_query(pred, reg))
            except GraphTalkError:
                pass  # unparsable predictions are part of the fixture
    _write(out / "wwq_test.jsonl", rows)
    _write(out / "predictions.jsonl", preds)
    _write(out / "gold_predictions.jsonl", [{"id": r["id"], "thingtalk": r["gold_thingtalk"]} for r in rows])
    for term, cands in sorted(load_candidates(fix / "el" / "europe.json").items()):
        seed_search(cache, term, cands)
    seed_search(cache, UNMATCHED, [])


def _write(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")
