"""Knowledge-graph embeddings with literal-enriched relation vectors.

Entity/relation triples plus numeric attribute triples go in; trained
embedding tables, filtered-ranking link-prediction reports, and node
classification predictions come out.  Relation embeddings are optionally
fused with per-relation aggregates of the head/tail entities' numeric
attributes before scoring.
"""

from litrel.data import (
    KnowledgeGraph,
    LiteralMatrix,
    build_graph,
    date_to_decimal,
    load_literals,
    load_triples,
)
from litrel.errors import ConfigError, ParseError, ShapeError, TrainingError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "KnowledgeGraph",
    "LiteralMatrix",
    "build_graph",
    "date_to_decimal",
    "load_literals",
    "load_triples",
    "ParseError",
    "ValidationError",
    "ConfigError",
    "ShapeError",
    "TrainingError",
]
