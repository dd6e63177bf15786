"""``graphtalk`` command line.

Exit status: 0 on success, 1 for bad input (syntax, types, files), 2 when
the remote endpoint or its replay cache fails.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import enum
import json
import logging
import sys
from dataclasses import fields, is_dataclass
from pathlib import Path

from . import ast as A
from .errors import GraphTalkError, ParseError, RemoteError
from .schema import SchemaRegistry

log = logging.getLogger("graphtalk")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read(arg: str | None) -> str:
    if arg is None or arg == "-":
        return sys.stdin.read()
    return arg


def load_registry(args) -> SchemaRegistry:
    schema = Path(args.schema)
    supers = args.super_properties
    if supers is None and (schema.parent / "super_properties.json").exists():
        supers = schema.parent / "super_properties.json"
    return SchemaRegistry.load(schema, supers)


def ast_to_json(node):
    """Plain JSON tree of an AST node (``type`` plus its fields)."""
    if isinstance(node, enum.Enum):
        return node.value
    if isinstance(node, _dt.date):
        return node.isoformat()
    if isinstance(node, (list, tuple, frozenset)):
        return [ast_to_json(x) for x in node]
    if is_dataclass(node):
        out = {"type": type(node).__name__}
        for f in fields(node):
            out[f.name] = ast_to_json(getattr(node, f.name))
        return out
    return node


# --- executors ------------------------------------------------------------------------


def make_executor(args, reg: SchemaRegistry):
    """Run logical forms on a local graph (``--graph``) or through the endpoint client."""
    from .sparqlgen import compile as compile_sparql

    if getattr(args, "graph", None):
        from .ministore.graph import Graph, load_triples
        from .ministore.interp import interpret

        graphs = [load_triples(p) for p in args.graph]
        g = graphs[0] if len(graphs) == 1 else Graph(
            [t for x in graphs for t in x.triples],
            {k: v for x in graphs for k, v in x.labels.items()},
            {k: v for x in graphs for k, v in x.sitelinks.items()},
        )
        return (lambda q: interpret(q, g, reg)), g.labels
    client = _client(args)
    return (lambda q: client.execute_sparql(compile_sparql(q, reg))), {}


def _client(args):
    from .wdclient import EndpointConfig, WikidataClient

    mode = "offline" if getattr(args, "offline", False) else "live"
    cfg = EndpointConfig.from_env(cache_path=getattr(args, "cache", None), mode=mode,
                                  timeout=getattr(args, "timeout", 60.0))
    return WikidataClient(cfg)


# --- subcommands -------------------------------------------------------------------------


def cmd_parse(args, reg):
    from .qparser import parse_query

    q = parse_query(_read(args.text), reg)
    if args.check:
        from .typecheck import typecheck

        typecheck(q, reg)
    print(json.dumps(ast_to_json(q), ensure_ascii=False, indent=None if args.compact else 2))
    return 0


def cmd_compile(args, reg):
    from .qparser import parse_query
    from .sparqlgen import compile as compile_sparql

    print(compile_sparql(parse_query(_read(args.text), reg), reg).text)
    return 0


def cmd_decompile(args, reg):
    from .sparql2tt import decompile

    print(A.pretty_print(decompile(_read(args.text), reg)))
    return 0


def cmd_resolve(args, reg):
    from .entities import load_candidates, mapping_resolver, resolve_with_report
    from .qparser import parse_query

    q = parse_query(_read(args.text), reg)
    if args.candidates:
        resolver = mapping_resolver(load_candidates(args.candidates))
    else:
        resolver = _client(args).resolver()
    out, unresolved = resolve_with_report(q, resolver)
    print(A.pretty_print(out))
    for m in unresolved:
        print(f"unresolved mention: {m}", file=sys.stderr)
    return 0


def cmd_synthesize(args, reg):
    from . import synth

    pools = synth.ValuePools(reg, synth.load_pool_graph(args.graph) if args.graph else None)
    examples = synth.synthesize_dataset(reg, budget=args.budget, seed=args.seed, pools=pools)
    if args.augment:
        examples = synth.augment_values(examples, reg, args.augment, seed=args.seed, pools=pools)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for ex in examples:
            out.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")
    finally:
        if args.out:
            out.close()
    print(f"{len(examples)} examples", file=sys.stderr)
    return 0


def cmd_schema_build(args, reg):
    from .schema import build_domain_schema, load_samples

    meta, sampled = load_samples(args.samples)
    skipped: list[str] = []
    desc = build_domain_schema(
        meta["name"], meta["domain_qid"], sampled, reg,
        schema_org_class=meta.get("schema_org_class"),
        parents=meta.get("parents", ("entity",)),
        top_k=args.top_k, min_support=args.min_support, skipped=skipped,
    )
    reg.with_domain(desc).dump(args.out)
    print(json.dumps({"domain": desc.name, "properties": sorted(desc.properties), "skipped": skipped}))
    return 0


def cmd_evaluate(args, reg):
    from .evalharness import evaluate_split, load_dataset, load_predictions
    from .plotting import metrics_json, write_report

    examples = load_dataset(args.dataset, reg)
    preds = load_predictions(args.predictions, reg)
    executor = None
    if args.mode == "wwq":
        executor, _ = make_executor(args, reg)
    metrics = evaluate_split(examples, preds, args.mode, executor)
    sys.stdout.write(metrics_json(metrics))
    if args.report:
        write_report(metrics, args.report)
    return 0


def cmd_exec(args, reg):
    from .ministore.terms import render
    from .qparser import parse_query

    q = parse_query(_read(args.text), reg)
    executor, labels = make_executor(args, reg)
    ans = executor(q)
    if ans.boolean is not None:
        print("true" if ans.boolean else "false")
    for v in ans.sorted(labels):
        print(render(v, labels))
    return 0


def _remote_args(p):
    p.add_argument("--graph", action="append", help="run on a local triple file instead of the endpoint (repeatable)")
    p.add_argument("--offline", action="store_true", help="answer only from the replay cache")
    p.add_argument("--cache", help="replay cache directory")
    p.add_argument("--timeout", type=float, default=60.0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="graphtalk", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--schema", default="schema.json", help="schema registry JSON (default: ./schema.json)")
    ap.add_argument("--super-properties", help="super-property JSON (default: super_properties.json beside the schema)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="parse a logical form and print its tree as JSON")
    p.add_argument("text", nargs="?", help="logical form (default: stdin)")
    p.add_argument("--check", action="store_true", help="also type-check")
    p.add_argument("--compact", action="store_true")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("compile", help="logical form to SPARQL")
    p.add_argument("text", nargs="?")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("decompile", help="SPARQL to logical form")
    p.add_argument("text", nargs="?")
    p.set_defaults(fn=cmd_decompile)

    p = sub.add_parser("resolve", help="replace entity mentions by QIDs")
    p.add_argument("text", nargs="?")
    p.add_argument("--candidates", help="entity-search fixture JSON instead of the live search API")
    p.add_argument("--offline", action="store_true")
    p.add_argument("--cache")
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(fn=cmd_resolve)

    p = sub.add_parser("synthesize", help="write synthesized examples as JSONL")
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--graph", action="append", help="triple file supplying slot values (repeatable)")
    p.add_argument("--augment", type=int, default=0, help="value-replacement variants per example")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("schema-build", help="derive a domain's properties from sampled entities")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", default="schema.json")
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--min-support", type=int, default=2)
    p.set_defaults(fn=cmd_schema_build)

    p = sub.add_parser("evaluate", help="score predictions against a dataset")
    p.add_argument("--mode", choices=["wwq", "wwqsp"], default="wwq")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--report", help="directory for metrics.json, per_example.tsv and metrics.png")
    _remote_args(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("exec", help="run a logical form and print its answers")
    p.add_argument("text", nargs="?")
    _remote_args(p)
    p.set_defaults(fn=cmd_exec)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        reg = load_registry(args)
        return args.fn(args, reg)
    except RemoteError as exc:
        print(f"remote error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"parse error at {exc}", file=sys.stderr)
        return 1
    except (GraphTalkError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
