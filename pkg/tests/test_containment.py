import numpy as np
import pytest

from kgunravel import (
    Atom,
    ConjunctiveQuery,
    Const,
    Var,
    evaluate_cq,
    find_homomorphism,
    is_contained,
    verify_homomorphism,
)
from kgunravel.errors import UnsupportedShapeError

from util import brute_force_homomorphism, random_cq, random_graph


def _path_approximation():
    # x -Friend-> y -Friend-> z -Coworker-> x2: an unrolled triangle walk
    return ConjunctiveQuery.conjunction(
        "x",
        [
            Atom("Friend", Var("x"), Var("y")),
            Atom("Friend", Var("y"), Var("z")),
            Atom("Coworker", Var("z"), Var("x2")),
        ],
    )


def test_path_into_triangle(triangle_query):
    hom = find_homomorphism(_path_approximation(), triangle_query)
    assert hom is not None
    mapping = hom.mapping
    assert mapping[Var("x")] == Var("x")
    assert mapping[Var("y")] == Var("y")
    assert mapping[Var("z")] == Var("z")
    assert mapping[Var("x2")] == Var("x")
    assert verify_homomorphism(_path_approximation(), triangle_query, mapping)


def test_identity_homomorphism(triangle_query):
    hom = find_homomorphism(triangle_query, triangle_query)
    assert hom is not None
    assert verify_homomorphism(triangle_query, triangle_query, hom.mapping)


def test_no_homomorphism_on_mismatched_relation():
    src = ConjunctiveQuery.conjunction("x", [Atom("Missing", Var("x"), Var("y"))])
    dest = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("y"))])
    assert find_homomorphism(src, dest) is None


def test_constants_map_only_to_themselves():
    src = ConjunctiveQuery.conjunction("x", [Atom("R", Const("a"), Var("x"))])
    dest_same = ConjunctiveQuery.conjunction("x", [Atom("R", Const("a"), Var("x"))])
    dest_other = ConjunctiveQuery.conjunction("x", [Atom("R", Const("b"), Var("x"))])
    assert find_homomorphism(src, dest_same) is not None
    assert find_homomorphism(src, dest_other) is None
    # but a variable may map onto a constant
    src_var = ConjunctiveQuery.conjunction("x", [Atom("R", Var("u"), Var("x"))])
    hom = find_homomorphism(src_var, dest_other)
    assert hom is not None and hom.mapping[Var("u")] == Const("b")


def test_self_loop_source():
    src = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("x"))])
    dest_loop = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("x"))])
    dest_edge = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("y"))])
    assert find_homomorphism(src, dest_loop) is not None
    assert find_homomorphism(src, dest_edge) is None


def test_rejects_negation():
    bad = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("y"), negated=True)])
    ok = ConjunctiveQuery.conjunction("x", [Atom("R", Var("x"), Var("y"))])
    with pytest.raises(UnsupportedShapeError):
        find_homomorphism(bad, ok)


def test_containment_direction(triangle_query):
    # the triangle is contained in its relaxation, not conversely
    assert is_contained(triangle_query, _path_approximation())
    assert not is_contained(_path_approximation(), triangle_query)
    assert is_contained(triangle_query, triangle_query)


def test_matches_brute_force_on_random_pairs():
    rng = np.random.default_rng(123)
    agreements = {True: 0, False: 0}
    for _ in range(200):
        source = random_cq(rng, max_vars=4, max_atoms=5, max_consts=1, n_relations=2)
        dest = random_cq(rng, max_vars=4, max_atoms=5, max_consts=1, n_relations=2)
        expected = brute_force_homomorphism(source, dest)
        got = find_homomorphism(source, dest)
        assert (got is not None) == (expected is not None)
        if got is not None:
            assert verify_homomorphism(source, dest, got.mapping)
        agreements[got is not None] += 1
    # the corpus must exercise both outcomes
    assert agreements[True] > 10 and agreements[False] > 10


def test_returned_witnesses_always_verify():
    rng = np.random.default_rng(9)
    for _ in range(100):
        source = random_cq(rng, max_vars=4, max_atoms=4)
        dest = random_cq(rng, max_vars=5, max_atoms=6)
        hom = find_homomorphism(source, dest)
        if hom is not None:
            assert verify_homomorphism(source, dest, hom.mapping)


def test_containment_implies_answer_subset():
    rng = np.random.default_rng(31)
    checked = 0
    while checked < 25:
        p = random_cq(rng, max_vars=3, max_atoms=4, max_consts=0, n_relations=2)
        p_prime = random_cq(rng, max_vars=3, max_atoms=3, max_consts=0, n_relations=2)
        if not is_contained(p, p_prime):
            continue
        g = random_graph(rng, n_entities=8, n_relations=2, n_edges=25)
        assert evaluate_cq(p, g) <= evaluate_cq(p_prime, g)
        checked += 1


def test_containment_reflexive_transitive():
    rng = np.random.default_rng(77)
    queries = [random_cq(rng, max_vars=3, max_atoms=3, max_consts=0, n_relations=2) for _ in range(12)]
    for q in queries:
        assert is_contained(q, q)
    for a in queries:
        for b in queries:
            for c in queries:
                if is_contained(a, b) and is_contained(b, c):
                    assert is_contained(a, c)


def test_witness_json_shape(triangle_query):
    hom = find_homomorphism(_path_approximation(), triangle_query)
    payload = hom.as_json()
    assert payload == {"x": "x", "y": "y", "z": "z", "x2": "x"}
