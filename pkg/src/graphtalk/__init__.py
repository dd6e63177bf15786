"""Graph logical forms: parse, type-check, compile to and from SPARQL, evaluate."""

__version__ = "0.1.0"
