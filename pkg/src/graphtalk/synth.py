"""Template-based synthesis of (utterance, logical form) pairs.

Templates are small families keyed by the part of speech of a property
alias and the value kind of the property. Slot values are drawn from a
graph so every synthesized query has something to find.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, fields, is_dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

from . import ast as A
from .ministore.graph import Graph
from .ministore.terms import entity
from .schema import ROOT_DOMAIN, PosCategory, SchemaRegistry
from .sparqlgen import compile as compile_sparql
from .typecheck import typecheck

log = logging.getLogger(__name__)

NP, VP, PASSIVE, ADJ, PREP = (
    PosCategory.NOUN_PHRASE, PosCategory.VERB_PHRASE, PosCategory.PASSIVE_VERB_PHRASE,
    PosCategory.ADJECTIVE_PHRASE, PosCategory.PREPOSITION_PHRASE,
)
ORDERED = ("quantity", "time")


@dataclass(frozen=True)
class Template:
    id: str
    family: str
    pattern: str
    build: Callable[[dict], A.QueryExpr]
    kinds: tuple[str, ...] | None = None  # value kinds the main property may have
    pos: tuple[PosCategory, ...] = (NP,)
    slots: tuple[str, ...] = ()  # extra slots besides domain and prop


@dataclass(frozen=True)
class SynthExample:
    utterance: str
    logical_form: A.QueryExpr
    sparql: str = ""
    provenance: tuple = ()

    @property
    def thingtalk(self) -> str:
        return A.pretty_print(self.logical_form)

    def to_json(self) -> dict:
        return {
            "utterance": self.utterance,
            "thingtalk": self.thingtalk,
            "sparql": self.sparql,
            "provenance": {"template": self.provenance[0] if self.provenance else None,
                           "bindings": dict(self.provenance[1]) if len(self.provenance) > 1 else {}},
        }


@dataclass(frozen=True)
class Skip:
    reason: str


class SynthesisError(AssertionError):
    """A template produced a form that fails type-checking or compilation."""


# --- value pools -------------------------------------------------------------


class ValuePools:
    """Per-property objects and subjects taken from a graph."""

    def __init__(self, registry: SchemaRegistry, graph: Graph | None = None):
        self.reg = registry
        self.labels = dict(graph.labels) if graph is not None else {}
        self.objects: dict[str, list] = {}
        self.subjects: dict[str, list[str]] = {}
        self.qualifiers: dict[str, dict[str, list]] = {}  # property -> qualifier -> values
        self.instances: dict[str, list[str]] = {}
        if graph is None:
            return
        objs: dict[str, dict] = {}
        subs: dict[str, dict] = {}
        quals: dict[str, dict[str, dict]] = {}
        for t in graph.triples:
            name = registry.pid_index.get(t.pid)
            if name is None:
                continue
            objs.setdefault(name, {})[t.object] = None
            subs.setdefault(name, {})[t.subject] = None
            for qpid, qv in t.qualifiers:
                qname = registry.pid_index.get(qpid)
                if qname is not None:
                    quals.setdefault(name, {}).setdefault(qname, {})[qv] = None
        for s in registry.super_properties.values():
            objs[s.name] = {v: None for m in s.members for v in objs.get(m, {})}
            subs[s.name] = {v: None for m in s.members for v in subs.get(m, {})}
        self.objects = {k: list(v) for k, v in objs.items()}
        self.subjects = {k: list(v) for k, v in subs.items()}
        self.qualifiers = {k: {q: list(vs) for q, vs in d.items()} for k, d in quals.items()}
        for name, d in registry.domains.items():
            if name != ROOT_DOMAIN:
                self.instances[name] = sorted(graph.instances(d.domain_qid))

    def label(self, qid: str) -> str:
        return self.labels.get(qid, qid)


def load_pool_graph(paths: Iterable[str | Path]) -> Graph:
    from .ministore.graph import load_triples

    triples, labels, links = [], {}, {}
    for p in paths:
        g = load_triples(p)
        triples.extend(g.triples)
        labels.update(g.labels)
        links.update(g.sitelinks)
    return Graph(triples, labels, links)


# --- surface realization ---------------------------------------------------------


def plural(domain: str) -> str:
    special = {"human": "people", "entity": "things"}
    if domain in special:
        return special[domain]
    if domain.endswith("y") and domain[-2:-1] not in "aeiou":
        return domain[:-1] + "ies"
    return domain + "s"


def render_value(v: A.Value, pools: ValuePools) -> str:
    if isinstance(v, A.Entity):
        ref = v.ref
        return ref.text if isinstance(ref, A.Mention) else (ref.display or pools.label(ref.qid))
    if isinstance(v, A.Num):
        return A.format_number(v.value)
    if isinstance(v, A.Date):
        return v.value.isoformat()
    if isinstance(v, A.Str):
        return f'"{v.text}"'
    return "nothing"


def _article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


# --- templates -------------------------------------------------------------------


def _p(b: dict, key: str = "prop") -> A.PropertyPath:
    return A.PropertyPath.of(b[key])


def _cmp(b, op=None):
    v = b["value"]
    default = A.Op.CONTAINS if isinstance(v, A.Entity) else A.Op.EQ
    return A.Compare(_p(b), op or default, v)


def _scan(b, key="domain"):
    return A.DomainScan(b[key])


def default_templates() -> list[Template]:
    T = Template
    ANYK = None
    return [
        T("proj", "projection", "what is the {prop} of {entity}",
          lambda b: A.Projection((A.Projected(_p(b)),), A.pivot(b["entity"])), ANYK, (NP,), ("entity",)),
        T("proj_hop", "projection", "what is the {prop2} of the {prop} of {entity}",
          lambda b: A.Projection((A.Projected(A.PropertyPath.of(b["prop"], b["prop2"])),), A.pivot(b["entity"])),
          ("entity",), (NP,), ("entity", "prop2")),
        T("sel_np", "selection", "which {domains} have {value} as their {prop}",
          lambda b: A.Selection(_scan(b), _cmp(b)), ("entity", "string"), (NP,), ("value",)),
        T("sel_vp", "selection", "which {domains} {prop} {value}",
          lambda b: A.Selection(_scan(b), _cmp(b)), ANYK, (VP,), ("value",)),
        T("sel_passive", "selection", "which {domains} were {prop} {value}",
          lambda b: A.Selection(_scan(b), _cmp(b)), ANYK, (PASSIVE,), ("value",)),
        T("sel_prep", "selection", "which {domains} are {prop} {value}",
          lambda b: A.Selection(_scan(b), _cmp(b)), ANYK, (PREP,), ("value",)),
        T("cmp_more", "comparison", "{domains} with {prop} more than {value}",
          lambda b: A.Selection(_scan(b), _cmp(b, A.Op.GT)), ("quantity",), (NP,), ("value",)),
        T("cmp_atmost", "comparison", "{domains} with {prop} at most {value}",
          lambda b: A.Selection(_scan(b), _cmp(b, A.Op.LE)), ("quantity",), (NP,), ("value",)),
        T("cmp_after", "comparison", "{domains} whose {prop} is after {value}",
          lambda b: A.Selection(_scan(b), _cmp(b, A.Op.GT)), ("time",), (NP,), ("value",)),
        T("cmp_before", "comparison", "{domains} whose {prop} is before {value}",
          lambda b: A.Selection(_scan(b), _cmp(b, A.Op.LT)), ("time",), (NP,), ("value",)),
        T("verify", "verification", "is {value} the {prop} of {entity}",
          lambda b: A.Verification(_cmp(b), A.pivot(b["entity"])), ANYK, (NP,), ("value", "entity")),
        T("top", "superlative", "which {domain} has the highest {prop}",
          lambda b: A.Index(A.Sort(_p(b), A.Direction.DESC, _scan(b)), 1), ORDERED, (NP,)),
        T("bottom", "superlative", "which {domain} has the lowest {prop}",
          lambda b: A.Index(A.Sort(_p(b), A.Direction.ASC, _scan(b)), 1), ORDERED, (NP,)),
        T("most_adj", "superlative", "what is the most {prop} {domain}",
          lambda b: A.Index(A.Sort(_p(b), A.Direction.DESC, _scan(b)), 1), ORDERED, (ADJ,)),
        T("top_k", "superlative", "the {k} {domains} with the highest {prop}",
          lambda b: A.Slice(A.Sort(_p(b), A.Direction.DESC, _scan(b)), 1, b["k"]), ORDERED, (NP,), ("k",)),
        T("count", "count", "how many {domains} have {value} as their {prop}",
          lambda b: A.AggregateCount(A.Selection(_scan(b), _cmp(b))), ("entity", "string"), (NP,), ("value",)),
        T("agg", "aggregate", "what is the {agg_word} {prop} of all {domains}",
          lambda b: A.AggregateOver(b["agg"], _p(b), _scan(b)), ("quantity",), (NP,), ("agg",)),
        T("group", "group-by", "what is the average {prop} of {domains} for each {prop2}",
          lambda b: A.GroupBy(A.Agg.AVG, _p(b), _scan(b), _p(b, "prop2")), ("quantity",), (NP,), ("key",)),
        T("join", "join", "list {domains} together with their {prop}",
          lambda b: A.Join(_scan(b), _scan(b, "domain2"), _p(b), A.Op.EQ, A.PropertyPath.of("id")),
          ("entity",), (NP,), ("domain2",)),
        T("subquery", "subquery", "which {domains} have a {prop} that is a {domain2} with {value2} as their {prop2}",
          lambda b: A.Selection(_scan(b), A.SubqueryAny(
              _p(b), A.Op.EQ,
              A.Selection(_scan(b, "domain2"), A.Compare(_p(b, "prop2"), A.Op.CONTAINS, b["value2"])))),
          ("entity",), (NP,), ("domain2", "prop2", "value2")),
        T("qualified", "qualifier", "which {domains} had {value} as their {prop} with {qprop} after {qvalue}",
          lambda b: A.Selection(_scan(b), A.Qualified(
              _p(b), A.Op.CONTAINS, b["value"], _p(b, "qprop"), A.Op.GT, b["qvalue"])),
          ("entity",), (NP,), ("value", "qual")),
        T("qual_proj", "qualifier", "what {prop} did {entity} have with {qprop} after {qvalue}",
          lambda b: A.Projection(
              (A.Projected(_p(b), A.Compare(_p(b, "qprop"), A.Op.GT, b["qvalue"])),), A.pivot(b["entity"])),
          ("entity",), (NP,), ("entity", "qual")),
        T("null", "null", "which {domains} have no {prop}",
          lambda b: A.Selection(_scan(b), A.Compare(_p(b), A.Op.EQ, A.NULL)), ANYK, (NP,)),
        T("negation", "negation", "which {domains} do not have {value} as their {prop}",
          lambda b: A.Selection(_scan(b), A.Not(_cmp(b))), ("entity",), (NP,), ("value",)),
        T("and", "conjunction", "which {domains} have {value} as their {prop} and {value2} as their {prop2}",
          lambda b: A.Selection(_scan(b), A.And(_cmp(b), A.Compare(_p(b, "prop2"), A.Op.CONTAINS, b["value2"]))),
          ("entity",), (NP,), ("value", "sibling", "value2")),
    ]


_AGG_WORDS = {A.Agg.AVG: "average", A.Agg.SUM: "total", A.Agg.MAX: "largest", A.Agg.MIN: "smallest"}


# --- instantiation ------------------------------------------------------------------


def _alias_for(registry: SchemaRegistry, name: str, pos: tuple, rng: random.Random | None = None):
    if registry.is_super(name):
        phrases = [name.replace("_", " ")]
        return phrases[0] if NP in pos else None
    options = [a.phrase for a in registry.resolve_property(name).aliases if a.pos in pos]
    if not options:
        return None
    return options[0] if rng is None else rng.choice(options)


def instantiate_template(
    t: Template, bindings: dict, registry: SchemaRegistry, pools: ValuePools | None = None
) -> SynthExample | Skip:
    """Fill ``t`` with ``bindings``; mismatched kinds or parts of speech give a Skip."""
    pools = pools or ValuePools(registry)
    prop = bindings["prop"]
    kind = registry.value_kind(prop).kind
    if t.kinds is not None and kind not in t.kinds:
        return Skip(f"{t.id}: property {prop} has {kind} values, template needs {'/'.join(t.kinds)}")
    phrase = bindings.get("prop_phrase") or _alias_for(registry, prop, t.pos)
    if phrase is None:
        return Skip(f"{t.id}: {prop} has no alias of kind {'/'.join(p.value for p in t.pos)}")
    if phrase not in _phrases(registry, prop, t.pos):
        return Skip(f"{t.id}: alias {phrase!r} is not a {'/'.join(p.value for p in t.pos)}")
    words = {
        "domain": bindings["domain"].replace("_", " "),
        "domains": plural(bindings["domain"]).replace("_", " "),
        "prop": phrase,
    }
    if "entity" in bindings:
        words["entity"] = pools.label(bindings["entity"])
    for key in ("value", "value2", "qvalue"):
        if key in bindings:
            words[key] = render_value(bindings[key], pools)
    for key in ("prop2", "qprop"):
        if key in bindings:
            words[key] = _alias_for(registry, bindings[key], (NP,)) or bindings[key].replace("_", " ")
    if "domain2" in bindings:
        words["domain2"] = bindings["domain2"].replace("_", " ")
    if "agg" in bindings:
        words["agg_word"] = _AGG_WORDS.get(bindings["agg"], bindings["agg"].value)
    if "k" in bindings:
        words["k"] = str(bindings["k"])
    try:
        utterance = t.pattern.format(**words).replace(" of of ", " of ")
    except KeyError as exc:
        return Skip(f"{t.id}: missing binding {exc.args[0]}")
    lf = t.build(bindings)
    try:
        typecheck(lf, registry)
        sparql = compile_sparql(lf, registry).text
    except Exception as exc:
        raise SynthesisError(f"template {t.id} built an invalid form {A.pretty_print(lf)}: {exc}") from exc
    prov = (t.id, tuple(sorted((k, _show(v)) for k, v in bindings.items() if k != "prop_phrase")))
    return SynthExample(utterance, lf, sparql, prov)


def _phrases(registry, prop, pos) -> set:
    if registry.is_super(prop):
        return {prop.replace("_", " ")} if NP in pos else set()
    return {a.phrase for a in registry.resolve_property(prop).aliases if a.pos in pos}


def _show(v) -> str:
    if isinstance(v, (A.Entity, A.Str, A.Num, A.Date, A.Null)):
        return A.print_value(v)
    if isinstance(v, A.Agg):
        return v.value
    return str(v)


# --- dataset synthesis ---------------------------------------------------------------


class _Binder:
    """Draws slot values for a (domain, property, template) combination."""

    def __init__(self, registry: SchemaRegistry, pools: ValuePools, rng: random.Random):
        self.reg = registry
        self.pools = pools
        self.rng = rng

    def value(self, prop: str):
        pool = [v for v in self.pools.objects.get(prop, ()) if not isinstance(v, A.Null)]
        kind = self.reg.value_kind(prop)
        rng = self.rng
        if kind.kind == "quantity":
            base = rng.choice(pool).value if pool else rng.choice([1, 10, 100, 1000])
            x = _round(base, rng) if rng.random() < 0.5 else base
            return A.Num(x, kind.unit)
        if kind.kind == "time":
            if pool and rng.random() < 0.6:
                return rng.choice(pool)
            import datetime as _dt

            year = rng.choice(pool).value.year if pool else rng.randint(1900, 2020)
            return A.Date(_dt.date(year + rng.randint(-5, 5), 1, 1))
        if not pool:
            return None
        v = rng.choice(pool)
        if isinstance(v, A.Entity):
            return A.Entity(A.Resolved(v.ref.qid, self.pools.label(v.ref.qid)))
        return v

    def subject(self, prop: str) -> str | None:
        subs = self.pools.subjects.get(prop)
        return self.rng.choice(subs) if subs else None

    def bind(self, t: Template, domain: str, prop: str) -> dict | None:
        rng, reg = self.rng, self.reg
        b: dict = {"domain": domain, "prop": prop}
        phrase = _alias_for(reg, prop, t.pos, rng)
        if phrase is not None:
            b["prop_phrase"] = phrase
        for slot in t.slots:
            if slot == "entity":
                e = self.subject(prop)
                if e is None:
                    return None
                b["entity"] = e
            elif slot == "value":
                v = self.value(prop)
                if v is None:
                    return None
                b["value"] = v
            elif slot == "agg":
                b["agg"] = rng.choice([A.Agg.AVG, A.Agg.SUM, A.Agg.MAX, A.Agg.MIN])
            elif slot == "k":
                b["k"] = rng.randint(2, 5)
            elif slot == "prop2":
                names = self._allowed(self._target(prop))
                if not names:
                    return None
                b["prop2"] = rng.choice(names)
            elif slot == "sibling":
                names = [n for n in self._allowed(domain) if reg.value_kind(n).is_entity and n != prop]
                if not names:
                    return None
                b["prop2"] = rng.choice(names)
            elif slot == "key":
                names = [n for n in self._allowed(domain) if reg.value_kind(n).is_entity]
                if not names:
                    return None
                b["prop2"] = rng.choice(names)
            elif slot == "domain2":
                b["domain2"] = self._target(prop)
            elif slot == "value2":
                if "prop2" not in b:
                    names = [n for n in self._allowed(b["domain2"]) if reg.value_kind(n).is_entity]
                    if not names:
                        return None
                    b["prop2"] = rng.choice(names)
                v = self.value(b["prop2"])
                if not isinstance(v, A.Entity):
                    return None
                b["value2"] = v
            elif slot == "qual":
                quals = self.pools.qualifiers.get(prop)
                if not quals:
                    return None
                q = rng.choice(sorted(quals))
                if reg.value_kind(q).kind not in ORDERED:
                    return None
                b["qprop"] = q
                b["qvalue"] = rng.choice(quals[q])
        return b

    def _target(self, prop: str) -> str:
        doms = self.reg.value_kind(prop).domains
        return next(iter(doms)) if len(doms) == 1 else ROOT_DOMAIN

    def _allowed(self, domain: str) -> list[str]:
        if domain == ROOT_DOMAIN:
            names = [n for n, p in self.reg.properties.items() if not p.is_qualifier]
        else:
            names = list(self.reg.domain(domain).properties)
        return sorted(names)


def _round(x, rng: random.Random):
    if isinstance(x, float) and not x.is_integer():
        return round(x, 1)
    x = int(x)
    digits = len(str(abs(x)))
    if digits <= 2:
        return x
    step = 10 ** (digits - rng.choice([1, 2]))
    return (x // step) * step


def domain_property_pairs(registry: SchemaRegistry) -> list[tuple[str, str]]:
    pairs = []
    for d in sorted(registry.domains):
        if d == ROOT_DOMAIN:
            continue
        props = set(registry.domain(d).properties)
        for s in registry.super_properties.values():
            if any(m in props for m in s.members):
                props.add(s.name)
        pairs += [(d, p) for p in sorted(props)]
    return pairs


def synthesize_dataset(
    registry: SchemaRegistry,
    templates: list[Template] | None = None,
    budget: int = 1000,
    seed: int = 0,
    pools: ValuePools | None = None,
    max_idle_rounds: int = 25,
) -> list[SynthExample]:
    """Round-robin over (domain, property, template) until ``budget`` distinct examples.

    Every combination gets one draw per round, so coverage is even; a round
    that adds nothing new counts as idle and synthesis stops after
    ``max_idle_rounds`` idle rounds in a row.
    """
    templates = default_templates() if templates is None else templates
    pools = pools or ValuePools(registry)
    rng = random.Random(seed)
    binder = _Binder(registry, pools, rng)
    combos = []
    for d, p in domain_property_pairs(registry):
        kind = registry.value_kind(p).kind
        for t in templates:
            if (t.kinds is None or kind in t.kinds) and _phrases(registry, p, t.pos):
                combos.append((d, p, t))
    out: list[SynthExample] = []
    seen: set = set()
    idle = 0
    while len(out) < budget and combos and idle < max_idle_rounds:
        added = 0
        for d, p, t in combos:
            if len(out) >= budget:
                break
            b = binder.bind(t, d, p)
            if b is None:
                continue
            ex = instantiate_template(t, b, registry, pools)
            if isinstance(ex, Skip):
                log.debug("skip: %s", ex.reason)
                continue
            key = (ex.utterance, ex.thingtalk)
            if key in seen:
                continue
            seen.add(key)
            out.append(ex)
            added += 1
        idle = 0 if added else idle + 1
    return out


# --- augmentation ------------------------------------------------------------------


def _value_slots(lf: A.QueryExpr) -> list[tuple[A.Value, str | None]]:
    """(value, property it is compared on) for every replaceable value."""
    out = []

    def visit(node):
        if isinstance(node, (A.Compare, A.AggCompare)):
            if not isinstance(node.value, A.Null):
                out.append((node.value, None if node.path.is_id else node.path.steps[-1].name))
            return
        if isinstance(node, A.Qualified):
            out.append((node.value, node.path.steps[-1].name))
            out.append((node.qual_value, node.qual_path.steps[-1].name))
            return
        if isinstance(node, (list, tuple)):
            for x in node:
                visit(x)
        elif is_dataclass(node):
            for f in fields(node):
                visit(getattr(node, f.name))

    visit(lf)
    seen, uniq = set(), []
    for v, p in out:
        if v not in seen:
            seen.add(v)
            uniq.append((v, p))
    return uniq


def augment_values(
    examples: list,
    registry: SchemaRegistry,
    factor: int = 1,
    seed: int = 0,
    pools: ValuePools | None = None,
) -> list:
    """Add up to ``factor`` variants per example with one value swapped.

    The replacement is a different value of the same property (or, for
    ``id`` comparisons, any entity the pools know); it is substituted in
    both the utterance and the logical form. Originals come first.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    pools = pools or ValuePools(registry)
    rng = random.Random(seed)
    out = []
    all_entities = sorted({v.ref.qid for vals in pools.objects.values() for v in vals if isinstance(v, A.Entity)}
                          | {s for subs in pools.subjects.values() for s in subs})
    for ex in examples:
        out.append(ex)
        variants: list = []
        seen = {(ex.utterance, A.pretty_print(ex.logical_form))}
        slots = [(v, p) for v, p in _value_slots(ex.logical_form) if render_value(v, pools) in ex.utterance]
        if not slots:
            continue
        options = []
        for v, p in slots:
            if p is None:
                cands = [A.Entity(A.Resolved(q, pools.label(q))) for q in all_entities]
            else:
                cands = list(pools.objects.get(p, ()))
            cands = [c for c in cands if type(c) is type(v) and c != v
                     and render_value(c, pools) not in ex.utterance]
            options += [(v, c) for c in cands]
        rng.shuffle(options)
        for old, new in options:
            if len(variants) >= factor:
                break
            if isinstance(new, A.Entity) and isinstance(new.ref, A.Resolved) and new.ref.display is None:
                new = A.Entity(A.Resolved(new.ref.qid, pools.label(new.ref.qid)))
            utt = ex.utterance.replace(render_value(old, pools), render_value(new, pools))
            lf = A.map_values(ex.logical_form, lambda x, o=old, n=new: n if x == o else x)
            key = (utt, A.pretty_print(lf))
            if key in seen:
                continue
            seen.add(key)
            variants.append(_with(ex, utt, lf, registry))
        out.extend(variants)
    return out


def _with(ex, utterance: str, lf: A.QueryExpr, registry: SchemaRegistry):
    changes = {"utterance": utterance, "logical_form": lf}
    if isinstance(ex, SynthExample):
        changes["sparql"] = compile_sparql(lf, registry).text
        changes["provenance"] = (ex.provenance[0] if ex.provenance else "", ()) + ("augmented",)
    elif hasattr(ex, "sparql"):
        changes["sparql"] = compile_sparql(lf, registry).text
    return replace(ex, **changes)


def write_jsonl(examples: Iterable[SynthExample], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")
            n += 1
    return n


__all__ = [
    "Template", "SynthExample", "Skip", "SynthesisError", "ValuePools", "default_templates",
    "instantiate_template", "synthesize_dataset", "augment_values", "domain_property_pairs",
    "load_pool_graph", "write_jsonl", "entity",
]
