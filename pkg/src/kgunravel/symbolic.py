"""Exact query evaluation over a knowledge graph.

``evaluate_cq`` is the ground-truth oracle for pure conjunctive queries.
Tree-like queries run through the crisp bottom-up plan evaluator, which
is linear in the tree; cyclic queries fall back to a backtracking join
(most-bound atom first, indexes for candidate enumeration) that checks
each candidate target entity with early exit. ``evaluate_plan`` evaluates
the workload operator types (unions, negations) with crisp set semantics;
negation is complement within the entity set.
"""

from __future__ import annotations

from typing import Iterable

from .errors import BindingError, DisconnectedQueryError
from .fuzzy import (
    Anchor,
    ExistentialLeaf,
    Intersection,
    Negation,
    PlanNode,
    Projection,
    Union_,
    compile_plan,
)
from .kg import KnowledgeGraph
from .queries import Atom, ConjunctiveQuery, Const, Term, Var, classify

AnswerSet = frozenset[int]


def _bind_atoms(atoms: Iterable[Atom], g: KnowledgeGraph) -> list[tuple[int, Term, Term]]:
    bound = []
    for atom in atoms:
        if atom.relation not in g.relations:
            raise BindingError(f"unknown relation {atom.relation!r}")
        for term in atom.terms():
            if isinstance(term, Const) and term.name not in g.entities:
                raise BindingError(f"unknown entity {term.name!r}")
        bound.append((g.relations[atom.relation], atom.subject, atom.object))
    return bound


def _resolve(term: Term, assignment: dict[str, int], g: KnowledgeGraph) -> int | None:
    if isinstance(term, Const):
        return g.entities[term.name]
    return assignment.get(term.name)


def _exists(g: KnowledgeGraph, atoms: list, assignment: dict[str, int]) -> bool:
    """True iff the remaining atoms admit some extension of ``assignment``."""
    if not atoms:
        return True

    def boundness(entry) -> int:
        _, s, o = entry
        return sum(_resolve(t, assignment, g) is not None for t in (s, o))

    index = max(range(len(atoms)), key=lambda i: boundness(atoms[i]))
    rel, subj, obj = atoms[index]
    rest = atoms[:index] + atoms[index + 1 :]
    s_val = _resolve(subj, assignment, g)
    o_val = _resolve(obj, assignment, g)

    if s_val is not None and o_val is not None:
        return g.has_edge(s_val, rel, o_val) and _exists(g, rest, assignment)

    def try_binding(term: Term, value: int) -> bool:
        assignment[term.name] = value
        ok = _exists(g, rest, assignment)
        del assignment[term.name]
        return ok

    if s_val is not None:
        return any(try_binding(obj, t) for t in g.neighbors(s_val, rel, "fwd"))
    if o_val is not None:
        return any(try_binding(subj, h) for h in g.neighbors(o_val, rel, "bwd"))

    for head, tail in g.edges_of_relation(rel):
        if subj == obj:
            if head == tail and try_binding(subj, head):
                return True
            continue
        assignment[subj.name] = head
        ok = try_binding(obj, tail)
        del assignment[subj.name]
        if ok:
            return True
    return False


def _target_candidates(g: KnowledgeGraph, bound: list, target: str) -> list[int]:
    """Smallest candidate pool for the target from one incident atom."""
    best: set[int] | None = None
    for rel, subj, obj in bound:
        s_is = isinstance(subj, Var) and subj.name == target
        o_is = isinstance(obj, Var) and obj.name == target
        if not (s_is or o_is):
            continue
        if s_is and o_is:
            pool = {h for h, t in g.edges_of_relation(rel) if h == t}
        elif s_is:
            pool = {h for h, _ in g.edges_of_relation(rel)}
        else:
            pool = {t for _, t in g.edges_of_relation(rel)}
        if best is None or len(pool) < len(best):
            best = pool
    if best is None:
        return list(range(g.n_entities))
    return sorted(best)


def evaluate_cq(q: ConjunctiveQuery, g: KnowledgeGraph) -> AnswerSet:
    """Exact answer set of a pure conjunctive query."""
    atoms = q.require_pure("evaluate_cq")
    bound = _bind_atoms(atoms, g)
    if not atoms:
        return frozenset(range(g.n_entities))

    try:
        report = classify(q)
    except DisconnectedQueryError:
        report = None
    if report is not None and report.is_tree_like:
        return evaluate_plan(q, g)

    target_in_atoms = any(
        isinstance(t, Var) and t.name == q.target for a in atoms for t in a.terms()
    )
    if not target_in_atoms:
        # Unconstrained target: every entity answers iff the body holds.
        return frozenset(range(g.n_entities)) if _exists(g, bound, {}) else frozenset()

    answers = {
        e for e in _target_candidates(g, bound, q.target) if _exists(g, bound, {q.target: e})
    }
    return frozenset(answers)


def evaluate_plan(q: ConjunctiveQuery, g: KnowledgeGraph) -> AnswerSet:
    """Crisp bottom-up evaluation of a tree-like workload query."""
    plan = compile_plan(q, g)
    everything = frozenset(range(g.n_entities))

    def ev(node: PlanNode) -> frozenset[int]:
        if isinstance(node, Anchor):
            return frozenset({node.entity})
        if isinstance(node, ExistentialLeaf):
            return everything
        if isinstance(node, Negation):
            return everything - ev(node.child)
        if isinstance(node, Intersection):
            values = sorted((ev(c) for c in node.children), key=len)
            out = values[0]
            for v in values[1:]:
                out &= v
            return out
        if isinstance(node, Union_):
            out: frozenset[int] = frozenset()
            for c in node.children:
                out |= ev(c)
            return out
        if isinstance(node, Projection):
            child = ev(node.child)
            out_set: set[int] = set()
            for e in child:
                out_set.update(g.neighbors(e, node.relation, node.direction))
            return frozenset(out_set)
        raise AssertionError(f"cannot evaluate plan node {node!r}")

    return ev(plan)


def evaluate_workload_query(q: ConjunctiveQuery, g: KnowledgeGraph) -> AnswerSet:
    """Dispatch: pure queries go to the exact oracle (cyclic included),
    union/negation workload types to the crisp plan evaluator."""
    if q.is_pure:
        return evaluate_cq(q, g)
    return evaluate_plan(q, g)
