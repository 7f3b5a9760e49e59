"""kgunravel: answering arbitrary conjunctive queries over incomplete
knowledge graphs by rewriting cyclic queries into complete tree-like
approximations and executing tree-like queries exactly or fuzzily."""

from .containment import Homomorphism, find_homomorphism, is_contained, verify_homomorphism
from .fuzzy import (
    Anchor,
    ExistentialLeaf,
    FuzzyConfig,
    Intersection,
    Negation,
    Projection,
    Union_,
    compile_plan,
    execute,
    predicted_cardinality,
)
from .kg import KnowledgeGraph, build_graph, load_aligned, load_graph, merge
from .metrics import (
    QueryEvalRecord,
    build_report,
    filtered_rank,
    hits_at_k,
    mape,
    mrr,
    render_table,
    spearman,
)
from .predictors import BilinearModel, CrispPredictor, LinkPredictor
from .queries import (
    Atom,
    ConjunctiveQuery,
    Const,
    QueryGraph,
    ShapeReport,
    Var,
    build_query_graph,
    classify,
    parse_query,
    serialize_query,
)
from .symbolic import evaluate_cq, evaluate_plan, evaluate_workload_query
from .training import TrainConfig, TrainResult, gradient_check, train
from .unravel import (
    QueryPath,
    UnravelResult,
    canonical_map,
    canonicalize_path,
    make_path,
    unravel,
    valid_paths,
)
from .workloads import (
    CYCLIC_TYPES,
    QUERY_TYPES,
    TREE_TYPES,
    LabeledQuery,
    generate,
    read_workload,
    unravel_workload,
    write_answers_jsonl,
    write_queries_jsonl,
)

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "Atom",
    "BilinearModel",
    "ConjunctiveQuery",
    "Const",
    "CrispPredictor",
    "CYCLIC_TYPES",
    "ExistentialLeaf",
    "FuzzyConfig",
    "Homomorphism",
    "Intersection",
    "KnowledgeGraph",
    "LabeledQuery",
    "LinkPredictor",
    "Negation",
    "Projection",
    "QueryEvalRecord",
    "QueryGraph",
    "QueryPath",
    "QUERY_TYPES",
    "ShapeReport",
    "TrainConfig",
    "TrainResult",
    "TREE_TYPES",
    "Union_",
    "UnravelResult",
    "Var",
    "build_graph",
    "build_query_graph",
    "build_report",
    "canonical_map",
    "canonicalize_path",
    "classify",
    "compile_plan",
    "evaluate_cq",
    "evaluate_plan",
    "evaluate_workload_query",
    "execute",
    "filtered_rank",
    "find_homomorphism",
    "generate",
    "gradient_check",
    "hits_at_k",
    "is_contained",
    "load_aligned",
    "load_graph",
    "make_path",
    "mape",
    "merge",
    "mrr",
    "parse_query",
    "predicted_cardinality",
    "read_workload",
    "render_table",
    "serialize_query",
    "spearman",
    "train",
    "unravel",
    "unravel_workload",
    "valid_paths",
    "verify_homomorphism",
    "write_answers_jsonl",
    "write_queries_jsonl",
]
