"""In-memory triple store with a reference interpreter and a SPARQL evaluator."""

from .graph import Graph, Triple, dump_triples, load_triples
from .interp import AnswerSet, Interpreter, interpret
from .sparqleval import SparqlEvaluator, eval_sparql

__all__ = [
    "AnswerSet", "Graph", "Interpreter", "SparqlEvaluator", "Triple",
    "dump_triples", "eval_sparql", "interpret", "load_triples",
]
