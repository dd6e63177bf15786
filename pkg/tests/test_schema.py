import json

import pytest
from hypothesis import given, settings, strategies as st

from graphtalk.errors import NotFoundError, SchemaConflictError, SchemaError
from graphtalk.schema import (
    Mode, PosCategory, SampledEntity, build_domain_schema, expand_super_property, load_samples,
    pos_categorize_alias, resolve_property,
)


def test_threshold_rule(reg):
    sampled = [
        SampledEntity("Q1", 10, frozenset({"P26", "P571"})),
        SampledEntity("Q2", 5, frozenset({"P26"})),
        SampledEntity("Q3", 1, frozenset()),
    ]
    d = build_domain_schema("human", "Q5", sampled, reg)
    assert d.properties == {"spouse"}


def test_top_100_cutoff(reg):
    # 150 entities; P166 is held by the top entity and by the one ranked 101st
    sampled = [SampledEntity(f"Q{i}", 1000 - i, frozenset({"P26"})) for i in range(1, 151)]
    sampled[0] = SampledEntity("Q1", 999, frozenset({"P26", "P166"}))
    sampled[100] = SampledEntity("Q101", 899, frozenset({"P166"}))
    skipped = []
    d = build_domain_schema("human", "Q5", sampled, reg, skipped=skipped)
    assert d.properties == {"spouse"}
    assert "P166" not in skipped  # never reached the support threshold


def test_unknown_pids_reported(reg):
    sampled = [SampledEntity("Q1", 1, frozenset({"P9999"})), SampledEntity("Q2", 1, frozenset({"P9999"}))]
    skipped = []
    d = build_domain_schema("thing", "Q123", sampled, reg, skipped=skipped)
    assert d.properties == frozenset() and skipped == ["P9999"]


def test_tie_break_by_qid(reg):
    # 101 entities with equal sitelinks: the cutoff drops the largest QID
    sampled = [SampledEntity(f"Q{i}", 7, frozenset({"P26"} if i in (5, 150) else set())) for i in range(50, 151)]
    sampled.append(SampledEntity("Q49", 7, frozenset({"P26"})))
    d = build_domain_schema("human", "Q5", sampled, reg)
    assert d.properties == frozenset()


def test_conflicting_domain_qid(reg):
    with pytest.raises(SchemaConflictError):
        build_domain_schema("city", "Q1", [SampledEntity("Q2", 1)], reg)


def test_empty_sample(reg):
    with pytest.raises(SchemaError):
        build_domain_schema("city", "Q515", [], reg)


def _brute_force(path):
    data = json.loads(path.read_text())
    rows = sorted(data["sampled"], key=lambda r: (-r["sitelinks"], int(r["entity"][1:])))[:100]
    counts = {}
    for r in rows:
        for p in set(r["properties"]):
            counts[p] = counts.get(p, 0) + 1
    return {p for p, c in counts.items() if c >= 2}


def test_city_sample_matches_brute_force(reg, fix):
    path = fix / "schema" / "city_sample.json"
    meta, sampled = load_samples(path)
    skipped = []
    d = build_domain_schema(meta["name"], meta["domain_qid"], sampled, reg, skipped=skipped)
    expected = _brute_force(path)
    assert {reg.resolve_property(n).pid for n in d.properties} | set(skipped) == expected
    assert set(skipped) == {p for p in expected if p not in reg.pid_index}


def test_resolve_property(reg):
    by_name = resolve_property("cast_member", reg)
    assert by_name.pid == "P161"
    assert resolve_property("P161", reg) is by_name
    with pytest.raises(NotFoundError):
        resolve_property("no_such_prop", reg)


def test_expansion_plans(reg):
    loc = expand_super_property("location", reg)
    assert loc.mode is Mode.ANY and loc.pids[:3] == ("P131", "P159", "P551")
    partner = expand_super_property("partner", reg)
    assert partner.mode is Mode.ALL and partner.names == ("unmarried_partner", "spouse")
    plain = expand_super_property("country_of_citizenship", reg)
    assert plain.mode is Mode.NONE and plain.pids == ("P27",)


@pytest.mark.parametrize("phrase,pos", [
    ("head of state", PosCategory.NOUN_PHRASE),
    ("married to", PosCategory.PASSIVE_VERB_PHRASE),
    ("born in", PosCategory.PREPOSITION_PHRASE),
    ("directed by", PosCategory.PASSIVE_VERB_PHRASE),
    ("starring", PosCategory.VERB_PHRASE),
])
def test_pos_rules(phrase, pos):
    assert pos_categorize_alias(phrase) is pos


def test_schema_json_round_trip(reg):
    from graphtalk.schema import SchemaRegistry

    assert SchemaRegistry.from_json(reg.to_json()).to_json() == reg.to_json()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.sets(st.sampled_from(["P26", "P27", "P569", "P39"]))),
                min_size=1, max_size=130))
def test_builder_matches_counting(reg, rows):
    sampled = [SampledEntity(f"Q{i + 1}", links, frozenset(ps)) for i, (links, ps) in enumerate(rows)]
    d = build_domain_schema("human", "Q5", sampled, reg)
    ranked = sorted(sampled, key=lambda s: (-s.sitelinks, int(s.qid[1:])))[:100]
    want = {reg.pid_index[p] for p in {"P26", "P27", "P569", "P39"} if sum(p in s.properties for s in ranked) >= 2}
    assert d.properties == want
