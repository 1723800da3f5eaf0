"""Ranked enumeration for acyclic join queries.

Answers stream in ranking order (lexicographic, sum, max, or tuple-weight)
with time-to-k linear in input size plus k, without materializing the join.
"""

from .analysis import AnalysisReport, JoinTree, analyze, build_join_tree
from .errors import (
    AnyKQError,
    CyclicQueryError,
    EmptyResult,
    NotAchievable,
    QuerySyntaxError,
    SchemaError,
    TooLargeError,
)
from .model import (
    Answer,
    Atom,
    ConjunctiveQuery,
    Database,
    LexOrder,
    MaxOrder,
    Relation,
    SumOrder,
    SumTerm,
    TupleWeightOrder,
)
from .oracle import differential_check, join_then_rank, random_instance
from .parser import load_database, load_relation_csv, parse_query
from .pipeline import Plan, plan_query, run, stream_answers

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "Answer",
    "AnyKQError",
    "Atom",
    "ConjunctiveQuery",
    "CyclicQueryError",
    "Database",
    "EmptyResult",
    "JoinTree",
    "LexOrder",
    "MaxOrder",
    "NotAchievable",
    "Plan",
    "QuerySyntaxError",
    "Relation",
    "SchemaError",
    "SumOrder",
    "SumTerm",
    "TooLargeError",
    "TupleWeightOrder",
    "analyze",
    "build_join_tree",
    "differential_check",
    "join_then_rank",
    "load_database",
    "load_relation_csv",
    "parse_query",
    "plan_query",
    "random_instance",
    "run",
    "stream_answers",
    "__version__",
]
