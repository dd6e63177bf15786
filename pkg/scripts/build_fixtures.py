"""Regenerate the files under fixtures/ (deterministic; safe to re-run).

    python3 scripts/build_fixtures.py            # schema, samples, graphs, entity search
    python3 scripts/build_fixtures.py --dataset  # also the evaluation dataset and cache
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"

# name, pid, value kind, aliases, qualifier?
PROPERTIES = [
    ("located_in_the_administrative_territorial_entity", "P131", {"kind": "entity"},
     ["located in", "in the administrative unit"], False),
    ("headquarters_location", "P159", {"kind": "entity", "domains": ["city"]},
     ["headquarters", "headquartered in"], False),
    ("residence", "P551", {"kind": "entity", "domains": ["city"]}, ["residence", "lives in"], False),
    ("work_location", "P937", {"kind": "entity", "domains": ["city"]}, [("work location", "noun_phrase"), "works in"], False),
    ("country_of_citizenship", "P27", {"kind": "entity", "domains": ["country"]},
     ["citizenship", "citizen of"], False),
    ("spouse", "P26", {"kind": "entity", "domains": ["human"]}, ["spouse", "married to", "wife", "husband"], False),
    ("unmarried_partner", "P451", {"kind": "entity", "domains": ["human"]},
     ["partner", ("dating", "verb_phrase"), ("dated", "verb_phrase")], False),
    ("head_of_state", "P35", {"kind": "entity", "domains": ["human"]}, ["head of state", "led by"], False),
    ("cast_member", "P161", {"kind": "entity", "domains": ["human"]}, ["cast member", "starring", "starred"], False),
    ("director", "P57", {"kind": "entity", "domains": ["human"]}, ["director", "directed by"], False),
    ("country", "P17", {"kind": "entity", "domains": ["country"]}, ["country", "in the country"], False),
    ("capital_of", "P1376", {"kind": "entity", "domains": ["country"]}, ["capital of"], False),
    ("twinned_administrative_body", "P190", {"kind": "entity", "domains": ["city"]},
     ["sister city", ("twinned with", "passive_verb_phrase")], False),
    ("position_held", "P39", {"kind": "entity"}, ["position held", "served as"], False),
    ("population", "P1082", {"kind": "quantity", "unit": "1"}, ["population", "populous", "inhabitants"], False),
    ("area", "P2046", {"kind": "quantity", "unit": "km2"}, ["area", ("large", "adjective_phrase"), ("big", "adjective_phrase")], False),
    ("duration", "P2047", {"kind": "quantity", "unit": "minute"}, ["duration", ("long", "adjective_phrase"), "running time"], False),
    ("date_of_birth", "P569", {"kind": "time"}, ["date of birth", "born on"], False),
    ("inception", "P571", {"kind": "time"}, ["inception", "founded on", ("established in", "passive_verb_phrase")], False),
    ("publication_date", "P577", {"kind": "time"}, ["publication date", ("released on", "passive_verb_phrase")], False),
    ("official_name", "P1448", {"kind": "string"}, ["official name", ("officially called", "passive_verb_phrase")], False),
    ("point_in_time", "P585", {"kind": "time"}, ["point in time", "at the time"], True),
    ("start_time", "P580", {"kind": "time"}, ["start time", "since"], True),
    ("end_time", "P582", {"kind": "time"}, ["end time", "until"], True),
]

DOMAINS = [
    ("human", "Q5", "Person", ["country_of_citizenship", "spouse", "unmarried_partner", "date_of_birth",
                               "position_held", "residence", "work_location"]),
    ("city", "Q515", "City", ["located_in_the_administrative_territorial_entity", "country", "population",
                              "area", "inception", "twinned_administrative_body", "capital_of",
                              "head_of_state", "official_name"]),
    ("country", "Q6256", "Country", ["head_of_state", "population", "area", "inception", "official_name"]),
    ("film", "Q11424", "Movie", ["cast_member", "director", "publication_date", "duration", "country"]),
    ("organization", "Q43229", "Organization", ["headquarters_location",
                                                "located_in_the_administrative_territorial_entity",
                                                "country", "inception"]),
]

SUPER_PROPERTIES = [
    {"name": "location", "mode": "ANY",
     "members": ["located_in_the_administrative_territorial_entity", "headquarters_location", "residence",
                 "work_location", "country_of_citizenship"]},
    {"name": "partner", "mode": "ALL", "members": ["unmarried_partner", "spouse"]},
]


def build_schema() -> None:
    out = FIX / "schema"
    out.mkdir(parents=True, exist_ok=True)
    props = []
    for name, pid, kind, aliases, qual in PROPERTIES:
        # tuples pin a part of speech the rule-based categorizer would get wrong
        aliases = [{"phrase": a[0], "pos": a[1]} if isinstance(a, tuple) else a for a in aliases]
        row = {"pid": pid, "canonical_name": name, "aliases": aliases, "value_kind": kind}
        if qual:
            row["is_qualifier"] = True
        props.append(row)
    doms = [
        {"name": n, "domain_qid": q, "schema_org_class": c, "parents": ["entity"], "properties": sorted(p)}
        for n, q, c, p in DOMAINS
    ]
    from graphtalk.schema import SchemaRegistry

    reg = SchemaRegistry.from_json({"version": 1, "domains": doms, "properties": props})
    reg.dump(out / "schema.json")
    (out / "super_properties.json").write_text(json.dumps(SUPER_PROPERTIES, indent=2) + "\n")


def build_city_sample() -> None:
    rng = random.Random(20230501)
    common = ["P17", "P131", "P1082", "P571", "P2046"]
    medium = ["P190", "P1376", "P1448", "P35"]
    rare = ["P159", "P161", "P569", "P9001", "P9002"]
    sampled = []
    qids = rng.sample(range(10_000, 99_999), 200)
    for i, n in enumerate(qids):
        props = {p for p in common if rng.random() < 0.85}
        props |= {p for p in medium if rng.random() < 0.3}
        if i % 37 == 0:
            props.add(rng.choice(rare))
        if i % 53 == 0:
            props.add("P9003")  # unknown PID with support, lands in the skip list
        sampled.append({
            "entity": f"Q{n}",
            # ties are frequent on purpose so the QID tie-break matters
            "sitelinks": rng.choice([0, 1, 2, 5, 10, 10, 20, 40, 80, 80, 160]),
            "properties": sorted(props, key=lambda p: int(p[1:])),
        })
    # a popular entity carrying a property no other top entity has
    sampled[0]["sitelinks"] = 500
    sampled[0]["properties"] = sorted(set(sampled[0]["properties"]) | {"P577"}, key=lambda p: int(p[1:]))
    data = {"domain": {"name": "city", "domain_qid": "Q515", "schema_org_class": "City"}, "sampled": sampled}
    (FIX / "schema" / "city_sample.json").write_text(json.dumps(data, indent=1) + "\n")


# --- graphs -----------------------------------------------------------------


def ent(q):
    return {"kind": "entity", "id": q}


def qty(x, unit=None):
    out = {"kind": "quantity", "amount": x}
    if unit:
        out["unit"] = unit
    return out


def day(s):
    return {"kind": "time", "date": s}


def text(s):
    return {"kind": "string", "text": s}


LABELS = {
    "Q5": "human", "Q515": "city", "Q1549591": "big city", "Q6256": "country", "Q11424": "film",
    "Q43229": "organization", "Q4830453": "business",
    "Q30": "United States of America", "Q142": "France", "Q183": "Germany", "Q145": "United Kingdom",
    "Q17": "Japan",
    "Q60": "New York City", "Q65": "Los Angeles", "Q90": "Paris", "Q64": "Berlin", "Q84": "London",
    "Q1490": "Tokyo", "Q456": "Lyon", "Q61": "Washington, D.C.", "Q486860": "Mountain View",
    "Q189471": "Cupertino", "Q99": "California",
    "Q83287": "Selena Gomez", "Q34086": "Justin Bieber", "Q23215": "Hailey Bieber", "Q76": "Barack Obama",
    "Q13133": "Michelle Obama", "Q6279": "Joe Biden", "Q22686": "Donald Trump", "Q329": "Emmanuel Macron",
    "Q3052772": "Brigitte Macron", "Q57553": "Frank-Walter Steinmeier", "Q9682": "Elizabeth II",
    "Q25191": "Christopher Nolan", "Q2121062": "The Weeknd",
    "Q11696": "President of the United States", "Q191954": "President of France",
    "Q200001": "Hotel Transylvania", "Q200002": "Spring Breakers", "Q200003": "Monte Carlo",
    "Q25188": "Inception",
    "Q95": "Google", "Q312": "Apple", "Q999001": "Unknown Org",
}

SITELINKS = {"Q30": 320, "Q142": 310, "Q90": 290, "Q76": 280, "Q83287": 120, "Q46": 300}


def world_rows() -> list[dict]:
    t = []

    def add(s, p, o, q=None):
        row = {"s": s, "p": p, "o": o}
        if q:
            row["q"] = q
        t.append(row)

    # classes: 5 direct cities plus 2 through the "big city" subclass
    add("Q1549591", "P279", ent("Q515"))
    add("Q4830453", "P279", ent("Q43229"))
    for c in ["Q90", "Q64", "Q84", "Q1490", "Q456"]:
        add(c, "P31", ent("Q515"))
    for c in ["Q60", "Q65"]:
        add(c, "P31", ent("Q1549591"))
    for c in ["Q30", "Q142", "Q183", "Q145", "Q17"]:
        add(c, "P31", ent("Q6256"))
    for h in ["Q83287", "Q34086", "Q23215", "Q76", "Q13133", "Q6279", "Q22686", "Q329", "Q3052772",
              "Q57553", "Q9682", "Q25191", "Q2121062"]:
        add(h, "P31", ent("Q5"))
    for f in ["Q200001", "Q200002", "Q200003", "Q25188"]:
        add(f, "P31", ent("Q11424"))
    add("Q95", "P31", ent("Q4830453"))
    add("Q312", "P31", ent("Q4830453"))
    add("Q999001", "P31", ent("Q43229"))

    # countries
    for c, hos, pop, area, inc, name in [
        ("Q30", "Q6279", 331_449_281, 9_833_520, "1776-07-04", "United States of America"),
        ("Q142", "Q329", 68_042_591, 643_801, "0843-08-10", "République française"),
        ("Q183", "Q57553", 84_432_670, 357_588, "1949-05-23", "Bundesrepublik Deutschland"),
        ("Q145", "Q9682", 67_326_569, 242_495, "1707-05-01", "United Kingdom of Great Britain and Northern Ireland"),
        ("Q17", None, 124_516_650, 377_975, "0660-02-11", "日本国"),
    ]:
        if hos:
            add(c, "P35", ent(hos))
        add(c, "P1082", qty(pop, "1"))
        add(c, "P2046", qty(area, "km2"))
        add(c, "P571", day(inc))
        add(c, "P1448", text(name))

    # cities
    for c, country, admin, pop, inc in [
        ("Q60", "Q30", None, 8_804_190, "1624-01-01"),
        ("Q65", "Q30", "Q99", 3_898_747, "1781-09-04"),
        ("Q90", "Q142", None, 2_145_906, None),
        ("Q64", "Q183", None, 3_755_251, "1237-01-01"),
        ("Q84", "Q145", None, 8_799_800, None),
        ("Q1490", "Q17", None, 14_094_034, "1457-01-01"),
        ("Q456", "Q142", None, 522_250, None),
    ]:
        add(c, "P17", ent(country))
        if admin:
            add(c, "P131", ent(admin))
        add(c, "P1082", qty(pop, "1"))
        if inc:
            add(c, "P571", day(inc))
    add("Q90", "P1376", ent("Q142"))
    add("Q64", "P1376", ent("Q183"))
    add("Q84", "P1376", ent("Q145"))
    add("Q1490", "P1376", ent("Q17"))
    add("Q90", "P190", ent("Q1490"))
    add("Q1490", "P190", ent("Q90"))
    add("Q64", "P190", ent("Q90"))
    add("Q60", "P190", ent("Q84"))
    add("Q90", "P2046", qty(105.4, "km2"))
    add("Q64", "P2046", qty(891.3, "km2"))
    add("Q90", "P1448", text("Paris"))
    add("Q189471", "P131", ent("Q99"))
    add("Q486860", "P131", ent("Q99"))
    add("Q99", "P131", ent("Q30"))

    # people
    add("Q83287", "P569", day("1992-07-22"))
    add("Q83287", "P27", ent("Q30"))
    add("Q83287", "P551", ent("Q65"))
    add("Q83287", "P451", ent("Q34086"))
    add("Q83287", "P451", ent("Q2121062"))
    add("Q34086", "P569", day("1994-03-01"))
    add("Q34086", "P26", ent("Q23215"))
    add("Q34086", "P451", ent("Q83287"))
    add("Q23215", "P26", ent("Q34086"))
    add("Q76", "P569", day("1961-08-04"))
    add("Q76", "P27", ent("Q30"))
    add("Q76", "P26", ent("Q13133"))
    add("Q76", "P551", ent("Q61"))
    add("Q76", "P39", ent("Q11696"), [["P580", day("2009-01-20")], ["P582", day("2017-01-20")]])
    add("Q13133", "P26", ent("Q76"))
    add("Q13133", "P569", day("1964-01-17"))
    add("Q6279", "P569", day("1942-11-20"))
    add("Q6279", "P27", ent("Q30"))
    add("Q6279", "P39", ent("Q11696"), [["P580", day("2021-01-20")], ["P582", day("2025-01-20")]])
    add("Q22686", "P569", day("1946-06-14"))
    add("Q22686", "P27", ent("Q30"))
    add("Q22686", "P39", ent("Q11696"), [["P580", day("2017-01-20")], ["P582", day("2021-01-20")]])
    add("Q22686", "P39", ent("Q11696"), [["P580", day("2025-01-20")]])
    add("Q329", "P569", day("1977-12-21"))
    add("Q329", "P27", ent("Q142"))
    add("Q329", "P26", ent("Q3052772"))
    add("Q329", "P39", ent("Q191954"), [["P580", day("2017-05-14")]])
    add("Q329", "P937", ent("Q90"))
    add("Q3052772", "P26", ent("Q329"))
    add("Q57553", "P27", ent("Q183"))
    add("Q9682", "P27", ent("Q145"))
    add("Q9682", "P569", day("1926-04-21"))
    add("Q25191", "P27", ent("Q145"))
    add("Q25191", "P551", ent("Q65"))
    add("Q2121062", "P569", day("1990-02-16"))

    # films: Selena Gomez is cast in exactly three
    for f, date, mins, cast in [
        ("Q200001", "2012-09-28", 91, ["Q83287"]),
        ("Q200002", "2012-09-05", 94, ["Q83287"]),
        ("Q200003", "2011-07-01", 109, ["Q83287"]),
        ("Q25188", "2010-07-16", 148, []),
    ]:
        add(f, "P577", day(date))
        add(f, "P2047", qty(mins, "minute"))
        add(f, "P17", ent("Q30"))
        for c in cast:
            add(f, "P161", ent(c))
    add("Q25188", "P57", ent("Q25191"))

    # organizations: headquarters only / both admin territory and headquarters
    add("Q95", "P159", ent("Q486860"))
    add("Q95", "P17", ent("Q30"))
    add("Q95", "P571", day("1998-09-04"))
    add("Q312", "P131", ent("Q189471"))
    add("Q312", "P159", ent("Q65"))
    add("Q312", "P17", ent("Q30"))
    add("Q999001", "P131", ent("Q90"))
    add("Q999001", "P159", ent("Q64"))
    return t


def people_rows(n_triples: int = 200) -> list[dict]:
    """Synthetic people graph with exactly ``n_triples`` triples."""
    rng = random.Random(1729)
    countries = ["Q30", "Q142", "Q183", "Q145", "Q17"]
    cities = ["Q60", "Q65", "Q90", "Q64", "Q84", "Q1490", "Q456"]
    offices = ["Q11696", "Q191954"]
    people = [f"Q{700000 + i}" for i in range(40)]
    rows: list[dict] = []
    for p in people:
        rows.append({"s": p, "p": "P31", "o": ent("Q5")})
    candidates: list[dict] = []
    for i, p in enumerate(people):
        y = rng.randint(1920, 2005)
        candidates.append({"s": p, "p": "P569", "o": day(f"{y:04d}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}")})
        candidates.append({"s": p, "p": "P27", "o": ent(rng.choice(countries))})
        if rng.random() < 0.5:
            candidates.append({"s": p, "p": "P551", "o": ent(rng.choice(cities))})
        if rng.random() < 0.4:
            candidates.append({"s": p, "p": "P937", "o": ent(rng.choice(cities))})
        if i % 2 == 0 and i + 1 < len(people):
            candidates.append({"s": p, "p": "P26", "o": ent(people[i + 1])})
            candidates.append({"s": people[i + 1], "p": "P26", "o": ent(p)})
        if rng.random() < 0.3:
            candidates.append({"s": p, "p": "P451", "o": ent(rng.choice(people))})
        if rng.random() < 0.3:
            start = rng.randint(1990, 2020)
            candidates.append({"s": p, "p": "P39", "o": ent(rng.choice(offices)),
                               "q": [["P580", day(f"{start}-01-20")], ["P582", day(f"{start + 4}-01-20")]]})
    rows.extend(candidates[: n_triples - len(rows)])
    if len(rows) != n_triples:
        raise SystemExit(f"people graph has {len(rows)} triples, wanted {n_triples}")
    return rows


def write_jsonl(path: Path, header: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for h in header:
            fh.write(f"# {h}\n")
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def build_graphs() -> None:
    meta = [{"s": q, "label": lab, **({"sitelinks": SITELINKS[q]} if q in SITELINKS else {})}
            for q, lab in sorted(LABELS.items(), key=lambda kv: int(kv[0][1:]))]
    write_jsonl(FIX / "graph" / "world.jsonl", ["hand-authored world graph: cities, countries, people, films",
                                               "rows without \"p\" are labels and sitelink counts"],
                world_rows() + meta)
    write_jsonl(FIX / "graph" / "people.jsonl", ["synthetic people graph, 200 triples, seed 1729"], people_rows())


def build_entity_search() -> None:
    out = FIX / "el"
    out.mkdir(parents=True, exist_ok=True)
    search = {
        "Europe": [
            {"id": "Q46", "label": "Europe", "description": "continent", "sitelinks": 300},
            {"id": "Q99999", "label": "Europe", "description": "band", "sitelinks": 2},
        ],
        "Selena Gomez": [
            {"id": "Q83287", "label": "Selena Gomez", "description": "American singer", "sitelinks": 120},
        ],
        "Springfield": [
            {"id": "Q28515", "label": "Springfield", "description": "city in Missouri", "sitelinks": 40},
            {"id": "Q28513", "label": "Springfield", "description": "city in Illinois", "sitelinks": 40},
            {"id": "Q49158", "label": "Springfield", "description": "city in Massachusetts", "sitelinks": 12},
        ],
        "Paris": [
            {"id": "Q90", "label": "Paris", "description": "capital of France", "sitelinks": 290},
            {"id": "Q830149", "label": "Paris", "description": "city in Texas", "sitelinks": 30},
        ],
    }
    (out / "europe.json").write_text(json.dumps(search, indent=2, ensure_ascii=False) + "\n")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dataset", action="store_true", help="also rebuild fixtures/dataset and fixtures/cache")
    args = ap.parse_args()
    build_schema()
    build_city_sample()
    build_graphs()
    build_entity_search()
    if args.dataset:
        from graphtalk.fixturedata import build_dataset

        build_dataset(FIX)
    print(f"fixtures written under {FIX}")


if __name__ == "__main__":
    main()
