import pytest

from graphtalk import ast as A
from graphtalk import synth
from graphtalk.ministore.graph import Graph, Triple
from graphtalk.ministore.terms import entity
from graphtalk.typecheck import typecheck


@pytest.fixture(scope="module")
def pools(reg, fix):
    g = synth.load_pool_graph([fix / "graph" / "world.jsonl", fix / "graph" / "people.jsonl"])
    return synth.ValuePools(reg, g)


def _template(tid):
    return next(t for t in synth.default_templates() if t.id == tid)


def test_projection_template(reg, pools):
    ex = synth.instantiate_template(_template("proj"), {"domain": "country", "prop": "head_of_state",
                                                        "entity": "Q30"}, reg, pools)
    assert ex.utterance == "what is the head of state of United States of America"
    assert ex.thingtalk == '[ head_of_state ] of @entity() filter id == "Q30"'
    assert "wdt:P35" in ex.sparql


def test_kind_mismatch_skips(reg, pools):
    out = synth.instantiate_template(_template("cmp_more"), {"domain": "country", "prop": "head_of_state",
                                                             "value": A.Num(3)}, reg, pools)
    assert isinstance(out, synth.Skip) and "entity" in out.reason


def test_pos_mismatch_skips(reg, pools):
    b = {"domain": "country", "prop": "head_of_state", "prop_phrase": "head of state", "value": entity("Q6279")}
    out = synth.instantiate_template(_template("sel_vp"), b, reg, pools)
    assert isinstance(out, synth.Skip)


def test_budget_zero(reg, pools):
    assert synth.synthesize_dataset(reg, budget=0, pools=pools) == []


def test_every_property_covered(reg, pools):
    out = synth.synthesize_dataset(reg, budget=600, seed=5, pools=pools)
    assert len(out) == 600
    used = set()
    for ex in out:
        typecheck(ex.logical_form, reg)
        used |= {n for n in ex.thingtalk.replace("/", " ").split() if reg.has_name(n)}
    wanted = {p for _, p in synth.domain_property_pairs(reg)}
    assert wanted <= used


def test_deterministic(reg, pools):
    a = synth.synthesize_dataset(reg, budget=300, seed=9, pools=pools)
    b = synth.synthesize_dataset(reg, budget=300, seed=9, pools=pools)
    assert [x.to_json() for x in a] == [x.to_json() for x in b]


def _country_pools(reg, n):
    # n countries with labels, one head of state each
    triples = [Triple(f"Q{100 + i}", "P35", entity(f"Q{500 + i}")) for i in range(n)]
    labels = {f"Q{500 + i}": f"Leader {i}" for i in range(n)}
    labels.update({f"Q{100 + i}": f"Land {i}" for i in range(n)})
    return synth.ValuePools(reg, Graph(triples, labels))


def test_augment_three_variants(reg):
    pools = _country_pools(reg, 10)
    ex = synth.instantiate_template(
        _template("sel_np"), {"domain": "country", "prop": "head_of_state", "value": entity("Q500")}, reg, pools)
    out = synth.augment_values([ex], reg, 3, seed=1, pools=pools)
    assert len(out) == 4 and out[0] is ex
    assert len({(e.utterance, e.thingtalk) for e in out}) == 4
    for e in out[1:]:
        (v,) = list(A.iter_values(e.logical_form))
        assert pools.label(v.ref.qid) in e.utterance
        typecheck(e.logical_form, reg)


def test_augment_without_candidates(reg):
    pools = _country_pools(reg, 1)
    ex = synth.instantiate_template(
        _template("sel_np"), {"domain": "country", "prop": "head_of_state", "value": entity("Q500")}, reg, pools)
    assert synth.augment_values([ex], reg, 1, pools=pools) == [ex]


def test_jsonl_fields(reg, pools, tmp_path):
    import json

    out = synth.synthesize_dataset(reg, budget=5, pools=pools)
    n = synth.write_jsonl(out, tmp_path / "x.jsonl")
    rows = [json.loads(l) for l in (tmp_path / "x.jsonl").read_text().splitlines()]
    assert n == 5 and set(rows[0]) == {"utterance", "thingtalk", "sparql", "provenance"}
