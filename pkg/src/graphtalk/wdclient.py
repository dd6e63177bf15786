"""Wikidata Query Service and ``wbsearchentities`` clients with a replay cache.

Every response body is stored under ``cache_path`` as one JSON file per
request, named by the SHA-256 of the normalized request. In offline mode
only the cache is consulted, so runs are reproducible byte for byte.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from . import ast as A
from .entities import Candidate
from .errors import CacheMiss, ProtocolError, RemoteError, RemoteHTTPError, RemoteTimeout, ValidationError
from .ministore.interp import AnswerSet
from .ministore.terms import entity

DEFAULT_SPARQL_URL = "https://query.wikidata.org/sparql"
DEFAULT_SEARCH_URL = "https://www.wikidata.org/w/api.php"
ENTITY_IRI = "http://www.wikidata.org/entity/"
XSD = "http://www.w3.org/2001/XMLSchema#"
USER_AGENT = "graphtalk/0.1 (research artifact; offline-first)"
_NUMERIC = {XSD + t for t in ("integer", "decimal", "double", "float", "int", "long")}


@dataclass(frozen=True)
class EndpointConfig:
    sparql_url: str = DEFAULT_SPARQL_URL
    search_api_url: str = DEFAULT_SEARCH_URL
    timeout: float = 60.0
    cache_path: Path | None = None
    mode: str = "live"
    min_interval: float = 1.0  # seconds between live requests

    def __post_init__(self):
        if self.mode not in ("live", "offline"):
            raise ValidationError(f"mode must be live or offline, not {self.mode!r}")
        if self.mode == "offline" and self.cache_path is None:
            raise ValidationError("offline mode needs a cache_path")

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        url = os.environ.get("GRAPHTALK_ENDPOINT")
        if url and "sparql_url" not in overrides:
            overrides["sparql_url"] = url
        if overrides.get("cache_path") is not None:
            overrides["cache_path"] = Path(overrides["cache_path"])
        return cls(**overrides)


@dataclass(frozen=True)
class CacheEntry:
    key: str
    response: bytes
    fetched_at: str
    request: str = ""

    def to_json(self) -> dict:
        return {
            "key": self.key,
            "request": self.request,
            "fetched_at": self.fetched_at,
            "response": self.response.decode("utf-8"),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CacheEntry":
        return cls(data["key"], data["response"].encode("utf-8"), data["fetched_at"], data.get("request", ""))


def normalize_query(text: str) -> str:
    return " ".join(text.split())


def cache_key(request: str) -> str:
    return hashlib.sha256(normalize_query(request).encode("utf-8")).hexdigest()


class ResponseCache:
    """One ``<key>.json`` file per entry; writes are serialized."""

    def __init__(self, root: Path | None):
        self.root = Path(root) if root is not None else None
        self._lock = threading.Lock()

    def get(self, key: str) -> CacheEntry | None:
        if self.root is None:
            return None
        path = self.root / f"{key}.json"
        if not path.exists():
            return None
        return CacheEntry.from_json(json.loads(path.read_text(encoding="utf-8")))

    def put(self, entry: CacheEntry) -> None:
        if self.root is None:
            return
        with self._lock:
            self.root.mkdir(parents=True, exist_ok=True)
            path = self.root / f"{entry.key}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entry.to_json(), indent=1, ensure_ascii=False, sort_keys=True) + "\n",
                           encoding="utf-8")
            tmp.replace(path)


# --- result normalization ---------------------------------------------------------


def term_from_binding(b: dict):
    kind = b.get("type")
    value = b.get("value")
    if kind == "uri":
        if value.startswith(ENTITY_IRI):
            return entity(value[len(ENTITY_IRI):])
        return A.Str(value)
    if kind in ("literal", "typed-literal"):
        dt = b.get("datatype")
        if dt in _NUMERIC:
            num = float(value)
            return A.Num(int(num) if dt in (XSD + "integer", XSD + "int", XSD + "long") or num.is_integer() else num)
        if dt == XSD + "dateTime":
            return A.Date(_dt.date.fromisoformat(value.lstrip("+")[:10]))
        return A.Str(value)
    raise ProtocolError(f"unsupported binding type {kind!r}", json.dumps(b)[:200])


def term_to_binding(t) -> dict:
    if isinstance(t, A.Entity):
        return {"type": "uri", "value": ENTITY_IRI + t.ref.qid}
    if isinstance(t, A.Num):
        dt = "integer" if isinstance(t.value, int) else "decimal"
        return {"type": "literal", "datatype": XSD + dt, "value": str(t.value)}
    if isinstance(t, A.Date):
        return {"type": "literal", "datatype": XSD + "dateTime", "value": f"{t.value.isoformat()}T00:00:00Z"}
    if isinstance(t, A.Str):
        return {"type": "literal", "value": t.text}
    raise TypeError(f"cannot encode {t!r}")


def results_to_answers(body: bytes | str) -> AnswerSet:
    """Wikidata Query Service JSON results to an AnswerSet (ASK or SELECT)."""
    text = body.decode("utf-8", "replace") if isinstance(body, bytes) else body
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"endpoint returned invalid JSON ({exc.msg})", text[:200]) from None
    if not isinstance(data, dict):
        raise ProtocolError("endpoint JSON is not an object", text[:200])
    if "boolean" in data:
        return AnswerSet.yes_no(bool(data["boolean"]))
    try:
        names = data["head"]["vars"]
        rows = data["results"]["bindings"]
    except (KeyError, TypeError):
        raise ProtocolError("missing head.vars or results.bindings", text[:200]) from None
    out = set()
    for row in rows:
        terms = [term_from_binding(row[v]) if v in row else None for v in names]
        if len(names) == 1:
            if terms[0] is not None:
                out.add(terms[0])
        elif all(t is not None for t in terms):
            out.add(tuple(terms))
    return AnswerSet.of(out)


def answers_to_results(answers: AnswerSet, names: list[str]) -> dict:
    """The JSON results document a SPARQL endpoint would return for ``answers``."""
    if answers.boolean is not None:
        return {"head": {}, "boolean": answers.boolean}
    rows = []
    for v in answers.sorted():
        terms = v if isinstance(v, tuple) else (v,)
        rows.append({n: term_to_binding(t) for n, t in zip(names, terms)})
    return {"head": {"vars": list(names)}, "results": {"bindings": rows}}


# --- client ---------------------------------------------------------------------


@dataclass
class WikidataClient:
    config: EndpointConfig = field(default_factory=EndpointConfig)
    session: object | None = None  # anything with requests.Session's get()

    def __post_init__(self):
        self.cache = ResponseCache(self.config.cache_path)
        self._rate_lock = threading.Lock()
        self._last = 0.0
        if self.session is None and self.config.mode == "live":
            self.session = requests.Session()
            self.session.headers["User-Agent"] = USER_AGENT

    def _fetch(self, request_text: str, url: str, params: dict) -> bytes:
        key = cache_key(request_text)
        hit = self.cache.get(key)
        if hit is not None:
            return hit.response
        if self.config.mode == "offline":
            raise CacheMiss(key)
        with self._rate_lock:
            wait = self.config.min_interval - (time.monotonic() - self._last)
            if wait > 0:
                time.sleep(wait)
            try:
                resp = self.session.get(url, params=params, timeout=self.config.timeout)
            except requests.Timeout:
                raise RemoteTimeout(f"no answer from {url} within {self.config.timeout}s") from None
            except requests.RequestException as exc:
                raise RemoteError(f"request to {url} failed: {exc}") from None
            finally:
                self._last = time.monotonic()
        if resp.status_code != 200:
            raise RemoteHTTPError(resp.status_code, resp.text[:200])
        body = resp.content
        stamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
        self.cache.put(CacheEntry(key, body, stamp, normalize_query(request_text)))
        return body

    def raw_sparql(self, text: str) -> bytes:
        return self._fetch(text, self.config.sparql_url, {"query": text, "format": "json"})

    def execute_sparql(self, query) -> AnswerSet:
        """Run a SparqlQuery (or text) and normalize the answer bindings."""
        text = getattr(query, "text", query)
        return results_to_answers(self.raw_sparql(text))

    def search_entities(self, term: str, limit: int = 7, language: str = "en") -> list[Candidate]:
        if not term.strip():
            raise ValidationError("empty search term")
        params = {"action": "wbsearchentities", "search": term, "language": language,
                  "limit": limit, "format": "json", "type": "item"}
        body = self._fetch(f"wbsearchentities\n{language}\n{limit}\n{term}", self.config.search_api_url, params)
        data = _json(body)
        hits = data.get("search")
        if not isinstance(hits, list):
            raise ProtocolError("wbsearchentities reply has no 'search' list", body.decode("utf-8", "replace")[:200])
        ids = [h["id"] for h in hits[:limit]]
        links = self.sitelinks(ids) if ids else {}
        return [Candidate(h["id"], h.get("label", ""), links.get(h["id"], 0)) for h in hits[:limit]]

    def sitelinks(self, qids: list[str]) -> dict[str, int]:
        ids = "|".join(qids)
        params = {"action": "wbgetentities", "ids": ids, "props": "sitelinks", "format": "json"}
        body = self._fetch(f"wbgetentities sitelinks\n{ids}", self.config.search_api_url, params)
        ents = _json(body).get("entities", {})
        return {q: len((ents.get(q) or {}).get("sitelinks", {})) for q in qids}

    def resolver(self, limit: int = 7):
        return lambda text: self.search_entities(text, limit)


def _json(body: bytes) -> dict:
    text = body.decode("utf-8", "replace")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON ({exc.msg})", text[:200]) from None
    if not isinstance(data, dict):
        raise ProtocolError("JSON reply is not an object", text[:200])
    return data


def seed_cache(cache_path: Path, request_text: str, body: bytes | str, fetched_at: str = "2023-05-01T00:00:00+00:00") -> str:
    """Store a response as if it had been fetched; returns the cache key."""
    data = body.encode("utf-8") if isinstance(body, str) else body
    key = cache_key(request_text)
    ResponseCache(cache_path).put(CacheEntry(key, data, fetched_at, normalize_query(request_text)))
    return key


def seed_search(cache_path: Path, term: str, candidates: list[Candidate], limit: int = 7, language: str = "en") -> None:
    """Cache entity-search replies for ``term`` (search plus sitelink lookup)."""
    shown = candidates[:limit]
    search = {"search": [{"id": c.qid, "label": c.label} for c in shown]}
    seed_cache(cache_path, f"wbsearchentities\n{language}\n{limit}\n{term}", json.dumps(search, ensure_ascii=False))
    if shown:
        ids = "|".join(c.qid for c in shown)
        ents = {c.qid: {"sitelinks": {f"site{i}": {} for i in range(c.sitelinks)}} for c in shown}
        seed_cache(cache_path, f"wbgetentities sitelinks\n{ids}", json.dumps({"entities": ents}))
