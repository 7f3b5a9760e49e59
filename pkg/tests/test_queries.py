import numpy as np
import pytest

from kgunravel import (
    Atom,
    ConjunctiveQuery,
    Const,
    Var,
    build_query_graph,
    classify,
    parse_query,
    serialize_query,
)
from kgunravel.errors import DisconnectedQueryError, SchemaError, UnsupportedShapeError
from kgunravel.queries import ConstOccNode

from util import random_cq


def test_triangle_graph_shape(triangle_query):
    graph = build_query_graph(triangle_query)
    assert len(graph.nodes) == 3
    assert len(graph.edges) == 3


def test_constant_occurrences_are_duplicated():
    q = ConjunctiveQuery.conjunction(
        "x",
        [
            Atom("Employee", Const("Tech"), Var("x")),
            Atom("Employee", Const("Tech"), Var("y")),
        ],
    )
    graph = build_query_graph(q)
    assert len(graph.nodes) == 4  # x, y, two Tech occurrences
    assert len(graph.edges) == 2
    occs = [n for n in graph.nodes if isinstance(n, ConstOccNode)]
    assert len(occs) == 2 and len(set(occs)) == 2


def test_self_loop_graph():
    q = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("x"))])
    graph = build_query_graph(q)
    assert len(graph.nodes) == 1
    assert len(graph.edges) == 1
    report = classify(q)
    assert report.is_cyclic and not report.is_tree_like


def test_build_query_graph_rejects_negation_and_union():
    negated = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("y"), negated=True)])
    with pytest.raises(UnsupportedShapeError):
        build_query_graph(negated)
    union = ConjunctiveQuery(
        target="x",
        branches=((Atom("R", Var("x"), Var("y")),), (Atom("S", Var("x"), Var("y")),)),
    )
    with pytest.raises(UnsupportedShapeError):
        build_query_graph(union)


def test_classify_anchored_chain():
    q = ConjunctiveQuery.conjunction(
        "x",
        [Atom("Employee", Const("Tech"), Var("y")), Atom("Manages", Var("y"), Var("x"))],
    )
    report = classify(q)
    assert report.is_tree_like and report.is_anchored and not report.is_cyclic
    assert report.depth == 2


def test_classify_unanchored_chain():
    q = ConjunctiveQuery.conjunction(
        "x",
        [Atom("Employee", Var("w"), Var("y")), Atom("Manages", Var("y"), Var("x"))],
    )
    report = classify(q)
    assert report.is_tree_like and not report.is_anchored
    assert report.depth == 2


def test_classify_triangle_is_cyclic(triangle_query):
    report = classify(triangle_query)
    assert report.is_cyclic and not report.is_tree_like and report.depth is None


def test_classify_parallel_atoms_cyclic():
    q = ConjunctiveQuery.conjunction(
        "x", [Atom("R", Var("x"), Var("y")), Atom("S", Var("x"), Var("y"))]
    )
    assert classify(q).is_cyclic


def test_classify_single_node_query():
    q = ConjunctiveQuery.conjunction("x", [])
    report = classify(q)
    assert report.is_tree_like and not report.is_anchored and report.depth == 0


def test_classify_disconnected_raises():
    q = ConjunctiveQuery.conjunction(
        "x", [Atom("R", Var("x"), Var("y")), Atom("R", Var("u"), Var("v"))]
    )
    with pytest.raises(DisconnectedQueryError):
        classify(q)


def test_tree_like_edge_count_invariant():
    rng = np.random.default_rng(0)
    seen_tree = 0
    for _ in range(200):
        q = random_cq(rng)
        try:
            report = classify(q)
        except DisconnectedQueryError:
            continue
        graph = build_query_graph(q)
        if report.is_tree_like:
            seen_tree += 1
            assert len(graph.edges) == len(graph.nodes) - 1
        assert report.is_cyclic == (not report.is_tree_like)
    assert seen_tree > 10


def test_parse_minimal_1p():
    q = parse_query({"target": "x", "atoms": [["Friend", "x", "y"]]})
    assert q.target == "x"
    assert q.atoms == (Atom("Friend", Var("x"), Var("y")),)


def test_parse_triangle_json(triangle_query):
    doc = {
        "target": "x",
        "atoms": [
            ["Friend", "x", "y"],
            ["Friend", "y", "z"],
            ["Coworker", "z", "x"],
        ],
    }
    q = parse_query(doc)
    assert q == ConjunctiveQuery(triangle_query.target, triangle_query.branches, None)
    assert q.variables() == {"x", "y", "z"}


def test_parse_constants_and_negation():
    doc = {
        "target": "x",
        "atoms": [
            ["R", {"const": "Tech"}, "x"],
            ["S", {"const": "Sales"}, "x", {"neg": True}],
        ],
    }
    q = parse_query(doc)
    assert q.atoms[0].subject == Const("Tech")
    assert q.atoms[1].negated


def test_parse_rejects_unknown_field():
    with pytest.raises(SchemaError):
        parse_query({"target": "x", "atoms": [], "bogus": 1})


def test_parse_rejects_missing_target_variable():
    with pytest.raises(SchemaError):
        parse_query({"target": "x", "atoms": [["R", "y", "z"]]})


def test_parse_rejects_both_atom_forms():
    with pytest.raises(SchemaError):
        parse_query({"target": "x", "atoms": [], "branches": [[]]})


def test_roundtrip_random_queries():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        q = random_cq(rng)
        assert parse_query(serialize_query(q)) == q


def test_roundtrip_union_and_ids():
    q = ConjunctiveQuery(
        target="x",
        branches=(
            (Atom("R", Const("a"), Var("x")),),
            (Atom("S", Const("b"), Var("x"), negated=False), Atom("T", Var("x"), Var("y"))),
        ),
        id="q-7",
    )
    assert parse_query(serialize_query(q)) == q
