import json
import random

import pytest
from hypothesis import given, strategies as st

from graphtalk import ast as A
from graphtalk.errors import ModeViolation
from graphtalk.evalharness import (
    GUESS_PREFACE, Example, StubGuesser, answer_metrics, answer_question, combine_answers, evaluate_split,
    load_dataset, load_predictions, query_em,
)
from graphtalk.ministore.interp import AnswerSet
from graphtalk.ministore.terms import entity
from graphtalk.qparser import parse_query

E = [entity(f"Q{i}") for i in range(1, 6)]


def test_query_em_commutative(reg):
    a = parse_query("@city() filter population > 1 && area > 2", reg)
    b = parse_query("@city() filter area > 2 && population > 1", reg)
    assert query_em(a, a) and query_em(a, b)


def test_query_em_same_answers_different_form(reg, world):
    from graphtalk.ministore import interpret

    a = parse_query('[ capital_of ] of @entity() filter id == "Q90"', reg)
    b = parse_query('@country() filter id == "Q142"', reg)
    assert interpret(a, world, reg) == interpret(b, world, reg)
    assert not query_em(a, b)


def test_answer_metrics_examples():
    assert answer_metrics(AnswerSet.of([E[0]]), AnswerSet.of([E[0]])) == (True, 1.0)
    em, f1 = answer_metrics(AnswerSet.of(E[:2]), AnswerSet.of(E[:3]))
    assert em is False and f1 == pytest.approx(0.8, abs=1e-12)
    assert answer_metrics(AnswerSet.of([]), AnswerSet.of([E[0]])) == (False, 0.0)


def test_empty_gold_is_mode_violation():
    with pytest.raises(ModeViolation):
        answer_metrics(AnswerSet.of([E[0]]), AnswerSet.of([]))


def test_string_normalization():
    assert answer_metrics(AnswerSet.of([A.Str(" paris ")]), AnswerSet.of([A.Str("Paris")])) == (True, 1.0)


_sets = st.sets(st.sampled_from(E), min_size=1)


@given(_sets, _sets)
def test_f1_symmetric_and_exact(a, b):
    em1, f1 = answer_metrics(AnswerSet.of(a), AnswerSet.of(b))
    em2, f2 = answer_metrics(AnswerSet.of(b), AnswerSet.of(a))
    assert f1 == pytest.approx(f2) and em1 == em2
    assert (f1 == 1.0) == em1


def _ex(i, gold, answers):
    return Example(f"e{i}", "u", A.pretty_print(gold), gold, gold_answers=AnswerSet.of(answers))


def _fixed_executor(table):
    return lambda q: table[A.pretty_print(q)]


def test_macro_f1(reg):
    golds = [parse_query(f'@city() filter population > {i}', reg) for i in range(4)]
    preds = [parse_query(f'@city() filter population > {i + 10}', reg) for i in range(4)]
    table = {
        A.pretty_print(preds[0]): AnswerSet.of(E[:1]),
        A.pretty_print(preds[1]): AnswerSet.of(E[:2]),
        A.pretty_print(preds[2]): AnswerSet.of(E[:2]),
        A.pretty_print(preds[3]): AnswerSet.of([E[4]]),
    }
    exs = [_ex(0, golds[0], E[:1]), _ex(1, golds[1], E[:2]), _ex(2, golds[2], E[:3]), _ex(3, golds[3], E[:1])]
    m = evaluate_split(exs, {f"e{i}": p for i, p in enumerate(preds)}, "wwq", _fixed_executor(table))
    assert m.answer_f1 == pytest.approx(0.7) and m.answer_em == 0.5 and m.query_em == 0.0


def test_wwqsp_has_no_answer_metrics(reg):
    g = parse_query("@city()", reg)
    m = evaluate_split([_ex(0, g, [])], {"e0": g}, "wwqsp")
    assert m.to_json() == {"mode": "wwqsp", "n": 1, "query_em": 1.0}


def test_missing_prediction_scores_zero(reg):
    g = parse_query("@city()", reg)
    m = evaluate_split([_ex(0, g, E[:1]), _ex(1, g, E[:1])], {"e0": g}, "wwq", lambda q: AnswerSet.of(E[:1]))
    assert (m.query_em, m.answer_em, m.answer_f1) == (0.5, 0.5, 0.5)


def test_order_independent(reg):
    g = parse_query("@city()", reg)
    other = parse_query("@country()", reg)
    exs = [_ex(i, g, E[:1]) for i in range(6)]
    preds = {f"e{i}": g if i % 2 else other for i in range(6)}
    ex2 = exs[:]
    random.Random(3).shuffle(ex2)
    run = lambda xs: evaluate_split(xs, preds, "wwq", lambda q: AnswerSet.of(E[:1] if q == g else E[1:2]))
    assert run(exs).to_json() == run(ex2).to_json()


def test_gold_fixture_scores_perfect(reg, fix, world):
    from graphtalk.ministore import interpret

    exs = load_dataset(fix / "dataset" / "wwq_test.jsonl", reg)
    preds = load_predictions(fix / "dataset" / "gold_predictions.jsonl", reg)
    m = evaluate_split(exs, preds, "wwq", lambda q: interpret(q, world, reg))
    assert (m.n, m.query_em, m.answer_em, m.answer_f1) == (10, 1.0, 1.0, 1.0)


def test_combine_answers():
    v = combine_answers(AnswerSet.of([entity("Q30")]), "Germany", {"Q30": "United States of America"})
    assert v.provenance == "verified" and "United States of America" in v.text and "Germany" not in v.text
    g = combine_answers(AnswerSet.of([]), "Russia")
    assert g.provenance == "guess" and g.text == f"{GUESS_PREFACE} Russia"
    assert GUESS_PREFACE == "We are not sure but GPT-3 guesses that the answer is:"
    n = combine_answers(None, None)
    assert n.provenance == "none" and n.text


def test_answer_question_falls_back(reg, world):
    from graphtalk.ministore import interpret

    parse = lambda text: parse_query(text, reg)
    run = lambda q: interpret(q, world, reg)
    guess = StubGuesser({"@city() filter population > 99999999999": "Atlantis"})
    assert answer_question("@city() filter population > 99999999999", parse, run, guess).provenance == "guess"
    assert answer_question("not a form", parse, run, StubGuesser()).provenance == "none"
    assert answer_question('[ head_of_state ] of @entity() filter id == "Q30"', parse, run,
                           guess).provenance == "verified"
