import random

import pytest
from hypothesis import given, settings, strategies as st

from graphtalk import ast as A
from graphtalk.errors import ParseError, UnknownIdentifierError
from graphtalk.qparser import parse_query
from graphtalk.randgen import AstGenerator, random_graph, value_pools
from graphtalk.typecheck import typecheck


def test_print_selection():
    q = A.Selection(A.DomainScan("city"), A.Compare(A.PropertyPath.of("population"), A.Op.GE, A.Num(10000)))
    assert A.pretty_print(q) == "@city() filter population >= 10000"


def test_print_superlative():
    q = A.Index(A.Sort(A.PropertyPath.of("population"), A.Direction.DESC, A.DomainScan("city")), 1)
    assert A.pretty_print(q) == "sort ( population desc of @city() ) [ 1 ]"


def test_print_projection_of_pivot():
    q = A.Projection((A.Projected(A.PropertyPath.of("head_of_state")),), A.pivot("Q30"))
    assert A.pretty_print(q) == '[ head_of_state ] of @entity() filter id == "Q30"'


def test_canonical_and_is_sorted():
    a = A.Compare(A.PropertyPath.of("area"), A.Op.GT, A.Num(1))
    b = A.Compare(A.PropertyPath.of("population"), A.Op.GT, A.Num(1))
    q1 = A.Selection(A.DomainScan("city"), A.And(b, a))
    q2 = A.Selection(A.DomainScan("city"), A.And(a, b))
    assert A.canonicalize(q1) == A.canonicalize(q2)


def test_double_negation_removed():
    p = A.Compare(A.PropertyPath.of("area"), A.Op.GT, A.Num(1))
    q = A.Selection(A.DomainScan("city"), A.Not(A.Not(p)))
    assert A.canonicalize(q) == A.Selection(A.DomainScan("city"), p)


def test_parse_join(reg):
    q = parse_query("@city() join @city() on contains ( twinned_administrative_body , id )", reg)
    assert isinstance(q, A.Join) and q.op is A.Op.CONTAINS and q.right_path.is_id


def test_parse_qualifier(reg):
    q = parse_query("@city() filter ( population filter point_in_time <= 2000.01.01 ) >= 10000", reg)
    assert isinstance(q.predicate, A.Qualified)
    assert q.predicate.qual_path == A.PropertyPath.of("point_in_time")


def test_parse_subquery(reg):
    q = parse_query("@city() filter population >= any ( [ population ] of @country() )", reg)
    assert isinstance(q.predicate, A.SubqueryAny)


def test_truncated_filter_reports_position(reg):
    with pytest.raises(ParseError) as err:
        parse_query("@city() filter", reg)
    assert err.value.position == (1, 15)
    assert any("predicate" in e or "property" in e for e in err.value.expected)


def test_unknown_property(reg):
    with pytest.raises(UnknownIdentifierError):
        parse_query("@city() filter no_such_prop == 3", reg)


def test_mentions_and_qids(reg):
    q = parse_query('@film() filter contains ( cast_member , "Selena Gomez" )', reg)
    assert q.predicate.value == A.Entity(A.Mention("Selena Gomez"))
    q = parse_query('@film() filter contains ( cast_member , "Q83287" )', reg)
    assert q.predicate.value == A.Entity(A.Resolved("Q83287"))


def test_string_escapes_round_trip(reg):
    q = A.Selection(A.DomainScan("city"), A.Compare(A.PropertyPath.of("official_name"), A.Op.EQ,
                                                     A.Str('a "quoted" \\ name')))
    assert parse_query(A.pretty_print(q), reg) == q


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=0, max_value=4))
def test_print_parse_round_trip(reg, seed, depth):
    rng = random.Random(seed)
    g = random_graph(reg, random.Random(seed % 7), 120)
    q = AstGenerator(reg, rng, value_pools(g, reg), mention_rate=0.2).query(depth)
    typecheck(q, reg)
    assert parse_query(A.pretty_print(q), reg) == q


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_canonicalize_idempotent(reg, seed):
    q = AstGenerator(reg, random.Random(seed)).query(3)
    c = A.canonicalize(q)
    assert A.canonicalize(c) == c
