import json

import pytest
from hypothesis import given, strategies as st

from graphtalk import ast as A
from graphtalk.entities import (
    Candidate, EntityAnnotation, load_annotations, load_candidates, mapping_resolver, parse_parser_input,
    pick_candidate, resolve_with_report, serialize_parser_input,
)
from graphtalk.errors import CacheMiss, ProtocolError, RemoteHTTPError, RemoteTimeout, ValidationError
from graphtalk.ministore.terms import entity
from graphtalk.qparser import parse_query
from graphtalk.sparqlgen import compile as compile_sparql
from graphtalk.wdclient import EndpointConfig, WikidataClient, cache_key, results_to_answers, seed_cache

UTT = "What movies has Selena Gomez starred in?"


def test_serialize_example():
    ann = EntityAnnotation(16, 28, "Selena Gomez", "Q83287", "human")
    assert serialize_parser_input(UTT, [ann]) == f"{UTT} <e> Selena Gomez | human | Q83287 </e>"


def test_serialize_empty():
    assert serialize_parser_input("who is x", []) == "who is x <e> </e>"


def test_serialize_orders_by_span():
    u = "Paris or Berlin"
    a = EntityAnnotation(0, 5, "Paris", "Q90", "city")
    b = EntityAnnotation(9, 15, "Berlin", "Q64", "city")
    assert serialize_parser_input(u, [b, a]) == serialize_parser_input(u, [a, b])
    assert serialize_parser_input(u, [b, a]).index("Paris |") < serialize_parser_input(u, [b, a]).index("Berlin |")


def test_bad_span():
    with pytest.raises(ValidationError):
        serialize_parser_input("abc", [EntityAnnotation(0, 2, "xx", "Q1", "d")])


_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=20)


@given(_text, _text, _text)
def test_serialization_is_invertible(prefix, surface, domain):
    surface = surface or "x"
    domain = domain or "d"
    utt = prefix + surface
    ann = EntityAnnotation(len(prefix), len(utt), surface, "Q7", domain)
    assert parse_parser_input(serialize_parser_input(utt, [ann])) == (utt, [(surface, domain, "Q7")])


def test_load_annotations_reports_line(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text(json.dumps({"utterance": "hi", "entities": []}) + "\n"
                 + json.dumps({"utterance": "hi", "entities": [{"start": 0, "end": 2, "surface": "no",
                                                                "qid": "Q1", "domain": "d"}]}) + "\n")
    with pytest.raises(ValidationError, match="line 2"):
        load_annotations(p)


def test_pick_candidate_tie_break():
    c = pick_candidate([Candidate("Q28515", "", 40), Candidate("Q28513", "", 40), Candidate("Q49158", "", 12)])
    assert c.qid == "Q28513"


def test_resolve_with_fixture(reg, fix):
    table = load_candidates(fix / "el" / "europe.json")
    q = parse_query('@city() filter contains ( country , "Europe" ) || contains ( country , "nowhere" )', reg)
    out, unresolved = resolve_with_report(q, mapping_resolver(table))
    vals = list(A.iter_values(out))
    assert vals[0].ref.qid == "Q46"
    assert vals[1] == A.Entity(A.Mention("nowhere"))
    assert unresolved == ["nowhere"]


def test_unresolvable_mention_left_alone(reg):
    q = parse_query('@film() filter contains ( cast_member , "allied invasion of France" )', reg)
    out, unresolved = resolve_with_report(q, lambda _: [])
    assert out == q and unresolved == ["allied invasion of France"]


def test_resolved_only_is_noop(reg):
    q = parse_query('@film() filter contains ( cast_member , "Q83287" )', reg)
    assert resolve_with_report(q, lambda _: [Candidate("Q1", "x", 999)]) == (q, [])


# --- endpoint client ---


def offline(fix):
    return WikidataClient(EndpointConfig(cache_path=fix / "cache", mode="offline"))


def test_execute_from_cache(reg, fix):
    sq = compile_sparql(parse_query('@film() filter contains ( cast_member , "Q83287" )', reg), reg)
    ans = offline(fix).execute_sparql(sq)
    assert set(ans.values) == {entity("Q200001"), entity("Q200002"), entity("Q200003")}


def test_cache_key_ignores_whitespace():
    assert cache_key("SELECT  ?x\nWHERE { }") == cache_key("SELECT ?x WHERE { }")


def test_offline_miss(fix):
    with pytest.raises(CacheMiss):
        offline(fix).raw_sparql("SELECT ?x WHERE { ?x ?p ?o }")


def test_offline_needs_cache():
    with pytest.raises(ValidationError):
        EndpointConfig(mode="offline")


def test_malformed_json():
    with pytest.raises(ProtocolError) as err:
        results_to_answers(b"<html>oops</html>")
    assert "oops" in err.value.excerpt


def test_search_from_cache(fix):
    cands = offline(fix).search_entities("Europe")
    assert cands[0] == Candidate("Q46", "Europe", 300)
    assert pick_candidate(cands).qid == "Q46"


def test_search_no_match_and_limit(tmp_path):
    from graphtalk.wdclient import seed_search

    seed_search(tmp_path, "zzz", [])
    seed_search(tmp_path, "Paris", [Candidate("Q90", "Paris", 290), Candidate("Q830149", "Paris", 30)], limit=1)
    client = WikidataClient(EndpointConfig(cache_path=tmp_path, mode="offline"))
    assert client.search_entities("zzz") == []
    assert len(client.search_entities("Paris", limit=1)) == 1


class FakeResponse:
    def __init__(self, status, body):
        self.status_code = status
        self.content = body.encode()
        self.text = body


class FakeSession:
    def __init__(self, *replies):
        self.replies = list(replies)
        self.calls = 0

    def get(self, url, params=None, timeout=None):
        self.calls += 1
        r = self.replies.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def test_live_fetch_is_cached(tmp_path):
    body = json.dumps({"head": {"vars": ["x"]}, "results": {"bindings": [
        {"x": {"type": "uri", "value": "http://www.wikidata.org/entity/Q1"}}]}})
    session = FakeSession(FakeResponse(200, body))
    client = WikidataClient(EndpointConfig(cache_path=tmp_path, min_interval=0), session=session)
    assert set(client.execute_sparql("SELECT ?x WHERE { }").values) == {entity("Q1")}
    assert set(client.execute_sparql("SELECT ?x  WHERE { }").values) == {entity("Q1")}
    assert session.calls == 1
    replay = WikidataClient(EndpointConfig(cache_path=tmp_path, mode="offline"))
    assert set(replay.execute_sparql("SELECT ?x WHERE { }").values) == {entity("Q1")}


def test_http_and_timeout_errors(tmp_path):
    import requests

    client = WikidataClient(EndpointConfig(min_interval=0),
                            session=FakeSession(FakeResponse(429, "slow down"), requests.Timeout()))
    with pytest.raises(RemoteHTTPError) as err:
        client.raw_sparql("ASK { }")
    assert err.value.status == 429
    with pytest.raises(RemoteTimeout):
        client.raw_sparql("ASK { }")


def test_endpoint_from_env(monkeypatch):
    monkeypatch.setenv("GRAPHTALK_ENDPOINT", "http://localhost:9999/sparql")
    assert EndpointConfig.from_env().sparql_url == "http://localhost:9999/sparql"


def test_typed_literals():
    body = json.dumps({"head": {"vars": ["v"]}, "results": {"bindings": [
        {"v": {"type": "literal", "datatype": "http://www.w3.org/2001/XMLSchema#decimal", "value": "2.5"}},
        {"v": {"type": "literal", "datatype": "http://www.w3.org/2001/XMLSchema#dateTime",
               "value": "2000-01-01T00:00:00Z"}},
        {"v": {"type": "literal", "value": "Paris"}}]}})
    import datetime

    assert results_to_answers(body).values == {A.Num(2.5), A.Date(datetime.date(2000, 1, 1)), A.Str("Paris")}
    assert results_to_answers('{"head": {}, "boolean": true}').boolean is True
