import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgunravel import Atom, ConjunctiveQuery, Var, build_graph


@pytest.fixture
def triangle_query():
    return ConjunctiveQuery.conjunction(
        "x",
        [
            Atom("Friend", Var("x"), Var("y")),
            Atom("Friend", Var("y"), Var("z")),
            Atom("Coworker", Var("z"), Var("x")),
        ],
    )


@pytest.fixture
def triangle_graph():
    return build_graph(
        [
            ("a", "Friend", "b"),
            ("b", "Friend", "c"),
            ("c", "Coworker", "a"),
        ]
    )


@pytest.fixture
def office_graph():
    return build_graph(
        [
            ("Tech", "Employee", "ana"),
            ("Tech", "Employee", "bob"),
            ("Sales", "Employee", "cruz"),
            ("ana", "Manages", "bob"),
            ("bob", "Manages", "cruz"),
            ("ana", "Friend", "cruz"),
        ]
    )
