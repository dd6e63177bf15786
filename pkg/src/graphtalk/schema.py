"""Reduced-resolution knowledge-graph schema.

The registry holds first-class domains, property descriptors (named by a
unique snake_case identifier, addressed by PID), and curated super-properties
that group several properties under one name.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import NotFoundError, SchemaConflictError, SchemaError

log = logging.getLogger(__name__)

QID_RE = re.compile(r"^Q[0-9]+$")
PID_RE = re.compile(r"^P[0-9]+$")
NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")

ROOT_DOMAIN = "entity"
ID_PROPERTY = "id"
SCHEMA_VERSION = 1


def is_qid(value: str) -> bool:
    return isinstance(value, str) and bool(QID_RE.match(value))


def is_pid(value: str) -> bool:
    return isinstance(value, str) and bool(PID_RE.match(value))


def qid_number(qid: str) -> int:
    return int(qid[1:])


class PosCategory(str, Enum):
    NOUN_PHRASE = "noun_phrase"
    VERB_PHRASE = "verb_phrase"
    PASSIVE_VERB_PHRASE = "passive_verb_phrase"
    ADJECTIVE_PHRASE = "adjective_phrase"
    PREPOSITION_PHRASE = "preposition_phrase"


class Mode(str, Enum):
    ANY = "ANY"
    ALL = "ALL"
    NONE = "NONE"


VALUE_KINDS = ("entity", "string", "quantity", "time", "coordinate")


@dataclass(frozen=True)
class ValueKind:
    kind: str
    domains: frozenset = frozenset()
    unit: str | None = None

    def __post_init__(self):
        if self.kind not in VALUE_KINDS:
            raise SchemaError(f"bad value kind {self.kind!r}")

    @property
    def is_entity(self) -> bool:
        return self.kind == "entity"

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "entity":
            out["domains"] = sorted(self.domains)
        if self.kind == "quantity":
            out["unit"] = self.unit
        return out

    @classmethod
    def from_json(cls, data) -> "ValueKind":
        if isinstance(data, str):
            return cls(data)
        return cls(data["kind"], frozenset(data.get("domains", ())), data.get("unit"))


ENTITY_KIND = ValueKind("entity")


@dataclass(frozen=True)
class Alias:
    phrase: str
    pos: PosCategory


@dataclass(frozen=True)
class PropertyDescriptor:
    pid: str
    canonical_name: str
    aliases: tuple[Alias, ...]
    value_kind: ValueKind
    is_qualifier: bool = False

    def __post_init__(self):
        if not is_pid(self.pid):
            raise SchemaError(f"bad PID {self.pid!r}")
        if not NAME_RE.match(self.canonical_name):
            raise SchemaError(f"property name must be snake_case: {self.canonical_name!r}")
        if not self.aliases:
            raise SchemaError(f"property {self.canonical_name} has no aliases")

    @property
    def label(self) -> str:
        return self.aliases[0].phrase

    def to_json(self) -> dict:
        out = {
            "pid": self.pid,
            "canonical_name": self.canonical_name,
            "aliases": [{"phrase": a.phrase, "pos": a.pos.value} for a in self.aliases],
            "value_kind": self.value_kind.to_json(),
        }
        if self.is_qualifier:
            out["is_qualifier"] = True
        return out

    @classmethod
    def from_json(cls, data: dict) -> "PropertyDescriptor":
        aliases = []
        for a in data.get("aliases") or []:
            if isinstance(a, str):
                aliases.append(Alias(a, pos_categorize_alias(a)))
            else:
                pos = a.get("pos")
                aliases.append(Alias(a["phrase"], PosCategory(pos) if pos else pos_categorize_alias(a["phrase"])))
        if not aliases:
            label = data["canonical_name"].replace("_", " ")
            aliases.append(Alias(label, pos_categorize_alias(label)))
        return cls(
            pid=data["pid"],
            canonical_name=data["canonical_name"],
            aliases=tuple(aliases),
            value_kind=ValueKind.from_json(data.get("value_kind", "entity")),
            is_qualifier=bool(data.get("is_qualifier", False)),
        )


@dataclass(frozen=True)
class SuperProperty:
    name: str
    mode: Mode
    members: tuple[str, ...]

    def __post_init__(self):
        if self.mode not in (Mode.ANY, Mode.ALL):
            raise SchemaError(f"super-property {self.name} must be ANY or ALL")
        if len(self.members) < 2:
            raise SchemaError(f"super-property {self.name} needs at least two members")

    def to_json(self) -> dict:
        return {"name": self.name, "mode": self.mode.value, "members": list(self.members)}

    @classmethod
    def from_json(cls, data: dict) -> "SuperProperty":
        return cls(data["name"], Mode(data["mode"]), tuple(data["members"]))


@dataclass(frozen=True)
class DomainDescriptor:
    name: str
    domain_qid: str
    schema_org_class: str | None = None
    parents: frozenset = frozenset()
    properties: frozenset = frozenset()

    def __post_init__(self):
        if not is_qid(self.domain_qid):
            raise SchemaError(f"bad domain QID {self.domain_qid!r}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "domain_qid": self.domain_qid,
            "schema_org_class": self.schema_org_class,
            "parents": sorted(self.parents),
            "properties": sorted(self.properties),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DomainDescriptor":
        return cls(
            name=data["name"],
            domain_qid=data["domain_qid"],
            schema_org_class=data.get("schema_org_class"),
            parents=frozenset(data.get("parents", ())),
            properties=frozenset(data.get("properties", ())),
        )


@dataclass(frozen=True)
class ExpansionPlan:
    mode: Mode
    pids: tuple[str, ...]
    names: tuple[str, ...]


@dataclass(frozen=True)
class SampledEntity:
    qid: str
    sitelinks: int
    properties: frozenset = field(default_factory=frozenset)


class SchemaRegistry:
    """Immutable lookup tables for domains, properties and super-properties."""

    def __init__(
        self,
        domains: Iterable[DomainDescriptor] = (),
        properties: Iterable[PropertyDescriptor] = (),
        super_properties: Iterable[SuperProperty] = (),
    ):
        doms: dict[str, DomainDescriptor] = {}
        for d in domains:
            if d.name in doms:
                raise SchemaError(f"duplicate domain {d.name}")
            doms[d.name] = d
        if ROOT_DOMAIN not in doms:
            doms[ROOT_DOMAIN] = DomainDescriptor(ROOT_DOMAIN, "Q35120")
        props: dict[str, PropertyDescriptor] = {}
        pid_index: dict[str, str] = {}
        for p in properties:
            if p.canonical_name in props:
                raise SchemaError(f"duplicate property name {p.canonical_name}")
            if p.pid in pid_index:
                raise SchemaError(f"duplicate PID {p.pid}")
            if p.canonical_name == ID_PROPERTY:
                raise SchemaError("'id' is reserved")
            props[p.canonical_name] = p
            pid_index[p.pid] = p.canonical_name
        supers: dict[str, SuperProperty] = {}
        for s in super_properties:
            if s.name in props or s.name == ID_PROPERTY:
                raise SchemaError(f"super-property {s.name} collides with a property name")
            if s.name in supers:
                raise SchemaError(f"duplicate super-property {s.name}")
            for m in s.members:
                if m not in props:
                    raise SchemaError(f"super-property {s.name}: unknown member {m}")
            supers[s.name] = s
        for d in doms.values():
            missing = set(d.properties) - set(props) - set(supers)
            if missing:
                raise SchemaError(f"domain {d.name} lists unknown properties {sorted(missing)}")
        self._domains = doms
        self._properties = props
        self._pid_index = pid_index
        self._supers = supers
        self._qid_index = {d.domain_qid: d.name for d in doms.values()}
        self._check_domain_dag()

    def _check_domain_dag(self) -> None:
        state: dict[str, int] = {}

        def visit(name: str, trail: list[str]) -> None:
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                raise SchemaError(f"domain hierarchy cycle: {' -> '.join(trail + [name])}")
            state[name] = 1
            dom = self._domains[name]
            parents = dom.parents
            if name != ROOT_DOMAIN and not parents:
                parents = frozenset({ROOT_DOMAIN})
            for p in parents:
                if p not in self._domains:
                    raise SchemaError(f"domain {name} has unknown parent {p}")
                visit(p, trail + [name])
            state[name] = 2

        for name in self._domains:
            visit(name, [])

    # --- read-only views -------------------------------------------------

    @property
    def domains(self) -> Mapping[str, DomainDescriptor]:
        return MappingProxyType(self._domains)

    @property
    def properties(self) -> Mapping[str, PropertyDescriptor]:
        return MappingProxyType(self._properties)

    @property
    def pid_index(self) -> Mapping[str, str]:
        return MappingProxyType(self._pid_index)

    @property
    def super_properties(self) -> Mapping[str, SuperProperty]:
        return MappingProxyType(self._supers)

    # --- lookups ----------------------------------------------------------

    def resolve_property(self, name_or_pid: str) -> PropertyDescriptor:
        if is_pid(name_or_pid):
            name = self._pid_index.get(name_or_pid)
            if name is None:
                raise NotFoundError(name_or_pid, "property")
            return self._properties[name]
        key = name_or_pid.strip().replace(" ", "_")
        try:
            return self._properties[key]
        except KeyError:
            raise NotFoundError(name_or_pid, "property") from None

    def domain(self, name: str) -> DomainDescriptor:
        try:
            return self._domains[name]
        except KeyError:
            raise NotFoundError(name, "domain") from None

    def domain_by_qid(self, qid: str) -> DomainDescriptor | None:
        name = self._qid_index.get(qid)
        return self._domains[name] if name else None

    def has_domain(self, name: str) -> bool:
        return name in self._domains

    def has_name(self, name: str) -> bool:
        return name == ID_PROPERTY or name in self._properties or name in self._supers

    def is_super(self, name: str) -> bool:
        return name in self._supers

    def expand(self, name: str) -> ExpansionPlan:
        return expand_super_property(name, self)

    def value_kind(self, name: str) -> ValueKind:
        """Value kind of a property, super-property (first member) or ``id``."""
        if name == ID_PROPERTY:
            return ENTITY_KIND
        if name in self._supers:
            return self._properties[self._supers[name].members[0]].value_kind
        return self.resolve_property(name).value_kind

    def super_by_members(self, mode: Mode, member_names: tuple[str, ...]) -> SuperProperty | None:
        for s in self._supers.values():
            if s.mode == mode and s.members == tuple(member_names):
                return s
        return None

    def domain_properties(self, name: str) -> frozenset:
        return self.domain(name).properties

    # --- derivation -------------------------------------------------------

    def with_domain(self, descriptor: DomainDescriptor) -> "SchemaRegistry":
        doms = dict(self._domains)
        doms[descriptor.name] = descriptor
        return SchemaRegistry(doms.values(), self._properties.values(), self._supers.values())

    def with_super_properties(self, supers: Iterable[SuperProperty]) -> "SchemaRegistry":
        merged = dict(self._supers)
        for s in supers:
            merged[s.name] = s
        return SchemaRegistry(self._domains.values(), self._properties.values(), merged.values())

    # --- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "domains": [self._domains[k].to_json() for k in sorted(self._domains)],
            "properties": [self._properties[k].to_json() for k in sorted(self._properties)],
            "super_properties": [self._supers[k].to_json() for k in sorted(self._supers)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SchemaRegistry":
        version = data.get("version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema version {version}")
        return cls(
            [DomainDescriptor.from_json(d) for d in data.get("domains", [])],
            [PropertyDescriptor.from_json(p) for p in data.get("properties", [])],
            [SuperProperty.from_json(s) for s in data.get("super_properties", [])],
        )

    @classmethod
    def load(cls, path: str | Path, super_properties: str | Path | None = None) -> "SchemaRegistry":
        reg = cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
        if super_properties is not None:
            reg = reg.with_super_properties(load_super_properties(super_properties))
        return reg

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_super_properties(path: str | Path) -> list[SuperProperty]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("super_properties", [])
    return [SuperProperty.from_json(s) for s in data]


def resolve_property(name_or_pid: str, registry: SchemaRegistry) -> PropertyDescriptor:
    return registry.resolve_property(name_or_pid)


def expand_super_property(name: str, registry: SchemaRegistry) -> ExpansionPlan:
    """Map a super-property to its mode and ordered member PIDs.

    Plain properties (and PIDs) pass through as a singleton NONE plan, so an
    explicitly requested member is never re-expanded.
    """
    sup = registry.super_properties.get(name)
    if sup is not None:
        props = [registry.properties[m] for m in sup.members]
        return ExpansionPlan(sup.mode, tuple(p.pid for p in props), tuple(p.canonical_name for p in props))
    prop = registry.resolve_property(name)
    return ExpansionPlan(Mode.NONE, (prop.pid,), (prop.canonical_name,))


def build_domain_schema(
    name: str,
    domain_qid: str,
    sampled: Iterable[SampledEntity],
    registry: SchemaRegistry,
    *,
    schema_org_class: str | None = None,
    parents: Iterable[str] = (ROOT_DOMAIN,),
    top_k: int = 100,
    min_support: int = 2,
    skipped: list[str] | None = None,
) -> DomainDescriptor:
    """Derive a domain's property set from its most popular sampled entities.

    Entities are ranked by sitelinks (descending, ties by ascending QID
    number); a property is kept when at least ``min_support`` of the top
    ``top_k`` entities carry it. PIDs missing from the registry are dropped
    and appended to ``skipped``.
    """
    sampled = list(sampled)
    if not sampled:
        raise SchemaError("no sampled entities")
    existing = registry.domains.get(name)
    if existing is not None and existing.domain_qid != domain_qid:
        raise SchemaConflictError(
            f"domain {name} already registered with {existing.domain_qid}, not {domain_qid}"
        )
    for s in sampled:
        if s.sitelinks < 0:
            raise SchemaError(f"negative sitelinks for {s.qid}")
    ranked = sorted(sampled, key=lambda s: (-s.sitelinks, qid_number(s.qid)))[:top_k]
    support: dict[str, int] = {}
    for ent in ranked:
        for pid in set(ent.properties):
            support[pid] = support.get(pid, 0) + 1
    names = set()
    unknown = []
    for pid in sorted(support, key=lambda p: int(p[1:])):
        if support[pid] < min_support:
            continue
        canonical = registry.pid_index.get(pid)
        if canonical is None:
            unknown.append(pid)
            continue
        names.add(canonical)
    if unknown:
        log.warning("domain %s: skipped unknown PIDs %s", name, ", ".join(unknown))
        if skipped is not None:
            skipped.extend(unknown)
    return DomainDescriptor(
        name=name,
        domain_qid=domain_qid,
        schema_org_class=schema_org_class,
        parents=frozenset(parents),
        properties=frozenset(names),
    )


def load_samples(path: str | Path) -> tuple[dict, list[SampledEntity]]:
    """Read a domain sample file: ``{domain: {...}, sampled: [...]}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    sampled = [
        SampledEntity(row["entity"], int(row["sitelinks"]), frozenset(row.get("properties", ())))
        for row in data["sampled"]
    ]
    return data["domain"], sampled


# --- part-of-speech assignment for property aliases -------------------------

PREPOSITIONS = frozenset(
    """about above across after against along among around at before behind below
    beneath beside between beyond by despite during for from in inside into near
    of off on onto out outside over per since through throughout to toward towards
    under until upon via with within without""".split()
)

# Participles used statively before a preposition ("born in", "located in");
# these read as locative modifiers rather than passive verbs.
STATIVE_PARTICIPLES = frozenset("born located based situated headquartered buried set".split())

VERB_LEMMAS = frozenset(
    """act attend award border coach compose contain create design develop direct
    draft edit educate employ found follow govern include influence inspire lead
    live manage marry nominate own participate perform play produce publish receive
    record replace represent serve sign speak sponsor star study succeed teach train
    win work write""".split()
)

_IRREGULAR = {
    "won": "win", "led": "lead", "wrote": "write", "written": "write", "taught": "teach",
    "spoke": "speak", "spoken": "speak", "studied": "study", "married": "marry",
    "starred": "star", "starring": "star",
}

_ADJ_SUFFIXES = ("al", "ous", "ive", "able")


def _verb_form(word: str) -> tuple[str | None, bool]:
    """Return (lemma, is_participle) if ``word`` inflects a known verb."""
    if word in VERB_LEMMAS:
        return word, False
    if word in _IRREGULAR:
        lemma = _IRREGULAR[word]
        return lemma, word.endswith(("ed", "en", "n", "t")) and not word.endswith("ing")
    candidates = []
    if word.endswith("ied"):
        candidates.append((word[:-3] + "y", True))
    if word.endswith("ed"):
        candidates += [(word[:-2], True), (word[:-1], True)]
    if word.endswith("ing"):
        candidates += [(word[:-3], False), (word[:-3] + "e", False)]
    if word.endswith("ies"):
        candidates.append((word[:-3] + "y", False))
    if word.endswith("es"):
        candidates.append((word[:-2], False))
    if word.endswith("s"):
        candidates.append((word[:-1], False))
    for lemma, participle in candidates:
        if lemma in VERB_LEMMAS:
            return lemma, participle
    return None, False


def pos_categorize_alias(phrase: str) -> PosCategory:
    """Assign a part-of-speech category to a property alias by fixed rules.

    Rules, first match wins:
      1. first word is a preposition -> preposition_phrase
      2. stative participle followed by a preposition -> preposition_phrase
      3. first word inflects a known verb: past participle ending in a
         preposition -> passive_verb_phrase, otherwise verb_phrase
      4. single word with an adjective suffix -> adjective_phrase
      5. otherwise noun_phrase
    """
    words = phrase.strip().lower().split()
    if not words:
        raise ValueError("empty alias phrase")
    first, last = words[0], words[-1]
    if first in PREPOSITIONS:
        return PosCategory.PREPOSITION_PHRASE
    if len(words) >= 2 and first in STATIVE_PARTICIPLES and last in PREPOSITIONS:
        return PosCategory.PREPOSITION_PHRASE
    lemma, participle = _verb_form(first)
    if lemma is not None:
        if participle and len(words) >= 2 and last in PREPOSITIONS:
            return PosCategory.PASSIVE_VERB_PHRASE
        return PosCategory.VERB_PHRASE
    if len(words) == 1 and first.endswith(_ADJ_SUFFIXES):
        return PosCategory.ADJECTIVE_PHRASE
    return PosCategory.NOUN_PHRASE
