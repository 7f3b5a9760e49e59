"""Shared test helpers: independent oracles and random instance generators.

The oracles here deliberately reimplement things the library computes by
cleverer means (exhaustive enumeration instead of backtracking search,
full assignment scans instead of joins) so that agreement is meaningful.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from kgunravel import Atom, ConjunctiveQuery, Const, KnowledgeGraph, Var, build_graph
from kgunravel.queries import ConstOccNode, VarNode, build_query_graph


def brute_force_homomorphism(source: ConjunctiveQuery, dest: ConjunctiveQuery):
    """Exhaustive search over all |dest terms|^|source vars| mappings."""
    src_atoms = source.atoms
    dest_atoms = {(a.relation, a.subject, a.object) for a in dest.atoms}
    dest_terms = {Var(dest.target)}
    for a in dest.atoms:
        dest_terms.update(a.terms())
    dest_terms = sorted(dest_terms, key=str)

    src_vars = sorted(source.variables())
    base = {Const(c): Const(c) for c in source.constants()}
    for combo in product(dest_terms, repeat=len(src_vars)):
        mapping = dict(base)
        mapping.update({Var(v): image for v, image in zip(src_vars, combo)})
        if mapping[Var(source.target)] != Var(dest.target):
            continue
        ok = True
        for atom in src_atoms:
            s = mapping[atom.subject]
            o = mapping[atom.object]
            if (atom.relation, s, o) not in dest_atoms:
                ok = False
                break
        if ok:
            return mapping
    return None


def brute_force_answers(q: ConjunctiveQuery, g: KnowledgeGraph) -> frozenset[int]:
    """All-assignments scan; exponential, for small instances only."""
    atoms = q.atoms
    names = sorted(q.variables())
    answers = set()
    for combo in product(range(g.n_entities), repeat=len(names)):
        assignment = dict(zip(names, combo))

        def value(term):
            if isinstance(term, Const):
                return g.entities[term.name]
            return assignment[term.name]

        if all(
            (value(a.subject), g.relations[a.relation], value(a.object)) in g.edges
            for a in atoms
        ):
            answers.add(assignment[q.target])
    return frozenset(answers)


def random_cq(
    rng: np.random.Generator,
    max_vars: int = 5,
    max_atoms: int = 6,
    max_consts: int = 2,
    n_relations: int = 3,
) -> ConjunctiveQuery:
    """Random connected pure CQ grown from the target outward.

    Every atom touches an element already reachable from the target, so
    every atom is reachable along traversals; self-loops, parallel atoms
    and repeated constants all occur with positive probability.
    """
    var_pool = ["x", "y", "z", "v", "w"][:max_vars]
    const_pool = [f"c{i + 1}" for i in range(max_consts)]
    elements: list = [Var("x")]
    unused_vars = [Var(n) for n in var_pool[1:]]
    atoms: list[Atom] = []
    n_atoms = int(rng.integers(1, max_atoms + 1))
    while len(atoms) < n_atoms:
        base = elements[int(rng.integers(len(elements)))]
        roll = rng.random()
        fresh = None
        if roll < 0.5 and unused_vars:
            other = fresh = unused_vars[0]
        elif roll < 0.65 and const_pool:
            other = Const(const_pool[int(rng.integers(len(const_pool)))])
            if other not in elements:
                fresh = other
        else:
            other = elements[int(rng.integers(len(elements)))]
        if isinstance(base, Const) and isinstance(other, Const):
            continue
        rel = f"R{int(rng.integers(n_relations))}"
        subject, object_ = (base, other) if rng.random() < 0.5 else (other, base)
        atom = Atom(rel, subject, object_)
        if atom in atoms:
            continue
        atoms.append(atom)
        if fresh is not None:
            elements.append(fresh)
            if isinstance(fresh, Var):
                unused_vars.pop(0)
    return ConjunctiveQuery.conjunction("x", atoms)


def random_graph(
    rng: np.random.Generator, n_entities: int, n_relations: int, n_edges: int
) -> KnowledgeGraph:
    """Uniform random edge set over pre-seeded full dictionaries."""
    ents = {f"e{i}": i for i in range(n_entities)}
    rels = {f"R{r}": r for r in range(n_relations)}
    triples = set()
    while len(triples) < n_edges:
        h = int(rng.integers(n_entities))
        r = int(rng.integers(n_relations))
        t = int(rng.integers(n_entities))
        triples.add((f"e{h}", f"R{r}", f"e{t}"))
    return build_graph(sorted(triples), ents, rels)


def tree_signature(q: ConjunctiveQuery):
    """Canonical form of a tree-like query up to variable renaming.

    Constants keep their names; children are sorted, so two tree-like
    queries are isomorphic as rooted labeled trees iff signatures match.
    """
    graph = build_query_graph(q)
    adj = graph.adjacency()
    root = VarNode(q.target)
    atoms = q.atoms

    def canon(node, via_atom):
        children = []
        for other, i in adj[node]:
            if i == via_atom:
                continue
            atom = atoms[i]
            child_is_subject = (
                isinstance(other, VarNode)
                and isinstance(atom.subject, Var)
                and atom.subject.name == other.name
            ) or (
                isinstance(other, ConstOccNode)
                and other.position == "subject"
                and other.atom_index == i
            )
            direction = "bwd" if child_is_subject else "fwd"
            children.append((atom.relation, direction, atom.negated, canon(other, i)))
        children.sort(key=repr)
        label = ("const", node.name) if isinstance(node, ConstOccNode) else ("var",)
        return (label, tuple(children))

    return canon(root, None)
