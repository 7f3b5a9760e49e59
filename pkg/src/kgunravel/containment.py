"""Query containment via homomorphism search.

A homomorphism from query ``source`` to query ``dest`` maps variables and
constants of ``source`` to those of ``dest`` such that the source target
goes to the dest target, constants stay fixed, and every source atom lands
on a dest atom with the same relation. ``source`` is contained in ``dest``
exactly when a homomorphism exists from ``dest`` to ``source``, so the
search doubles as a containment decision procedure.

The search backtracks over source variables in a most-constrained-first
order: variables adjacent to already-assigned ones come first and their
candidates are read off the dest adjacency index, which keeps tree-shaped
sources (the main workload here) close to linear.
"""

from __future__ import annotations

from dataclasses import dataclass

from .queries import Atom, ConjunctiveQuery, Const, Term, Var


@dataclass
class Homomorphism:
    """Witness mapping from source terms to dest terms."""

    mapping: dict[Term, Term]

    def apply(self, term: Term) -> Term:
        return self.mapping[term]

    def as_json(self) -> dict:
        out = {}
        for term, image in sorted(self.mapping.items(), key=lambda kv: str(kv[0])):
            if isinstance(term, Const):
                continue
            out[term.name] = image.name if isinstance(image, Var) else {"const": image.name}
        return out


def _term_key(term: Term) -> tuple[int, str]:
    return (0 if isinstance(term, Var) else 1, term.name)


def verify_homomorphism(
    source: ConjunctiveQuery,
    dest: ConjunctiveQuery,
    mapping: dict[Term, Term],
) -> bool:
    """Check the homomorphism conditions directly, atom by atom."""
    src_atoms = source.require_pure("verify_homomorphism")
    dest_atoms = set()
    for a in dest.require_pure("verify_homomorphism"):
        dest_atoms.add((a.relation, a.subject, a.object))

    if mapping.get(Var(source.target)) != Var(dest.target):
        return False
    for atom in src_atoms:
        for term in atom.terms():
            if isinstance(term, Const) and mapping.get(term, term) != term:
                return False
            if term not in mapping and isinstance(term, Var):
                return False
    for atom in src_atoms:
        s = mapping.get(atom.subject, atom.subject)
        o = mapping.get(atom.object, atom.object)
        if (atom.relation, s, o) not in dest_atoms:
            return False
    return True


def _variable_order(atoms: tuple[Atom, ...], target: str) -> list[str]:
    """Static search order: start at the target, grow along atoms,
    most-constrained (highest degree) first, stable tie-break by name."""
    degree: dict[str, int] = {}
    neighbors: dict[str, set[str]] = {}
    for atom in atoms:
        names = [t.name for t in atom.terms() if isinstance(t, Var)]
        for name in names:
            degree[name] = degree.get(name, 0) + 1
            neighbors.setdefault(name, set())
        if len(names) == 2:
            neighbors[names[0]].add(names[1])
            neighbors[names[1]].add(names[0])
    degree.setdefault(target, 0)
    neighbors.setdefault(target, set())

    order = [target]
    placed = {target}
    remaining = set(degree) - placed
    while remaining:
        attached = [v for v in remaining if neighbors[v] & placed]
        pool = attached or sorted(remaining)
        best = max(pool, key=lambda v: (len(neighbors[v] & placed), degree[v], v))
        order.append(best)
        placed.add(best)
        remaining.remove(best)
    return order


def find_homomorphism(
    source: ConjunctiveQuery, dest: ConjunctiveQuery
) -> Homomorphism | None:
    """Complete backtracking search for a homomorphism source -> dest.

    Returns a witness mapping or None. Constants map only to themselves;
    a source constant missing from dest simply yields None.
    """
    src_atoms = source.require_pure("find_homomorphism")
    dest_atoms_list = dest.require_pure("find_homomorphism")

    dest_atom_set: set[tuple[str, Term, Term]] = set()
    by_rel_subject: dict[tuple[str, Term], list[Term]] = {}
    by_rel_object: dict[tuple[str, Term], list[Term]] = {}
    dest_terms: set[Term] = {Var(dest.target)}
    for a in dest_atoms_list:
        dest_atom_set.add((a.relation, a.subject, a.object))
        by_rel_subject.setdefault((a.relation, a.subject), []).append(a.object)
        by_rel_object.setdefault((a.relation, a.object), []).append(a.subject)
        dest_terms.update(a.terms())
    all_dest_terms = sorted(dest_terms, key=_term_key)

    mapping: dict[Term, Term] = {Var(source.target): Var(dest.target)}
    for atom in src_atoms:
        for term in atom.terms():
            if isinstance(term, Const):
                mapping[term] = term

    atoms_of: dict[str, list[Atom]] = {}
    for atom in src_atoms:
        for term in set(atom.terms()):
            if isinstance(term, Var):
                atoms_of.setdefault(term.name, []).append(atom)

    def consistent(atom: Atom) -> bool:
        s = mapping.get(atom.subject)
        o = mapping.get(atom.object)
        if s is None or o is None:
            return True
        return (atom.relation, s, o) in dest_atom_set

    def candidates_for(name: str) -> list[Term]:
        var = Var(name)
        pools: list[set[Term]] = []
        for atom in atoms_of.get(name, ()):
            other = atom.object if atom.subject == var else atom.subject
            if atom.subject == atom.object == var:
                pool = {
                    s
                    for (rel, s, o) in dest_atom_set
                    if rel == atom.relation and s == o
                }
                pools.append(pool)
                continue
            image = mapping.get(other)
            if image is None:
                continue
            if atom.subject == var:
                pools.append(set(by_rel_object.get((atom.relation, image), ())))
            else:
                pools.append(set(by_rel_subject.get((atom.relation, image), ())))
        if not pools:
            return all_dest_terms
        common = set.intersection(*pools)
        return sorted(common, key=_term_key)

    order = _variable_order(src_atoms, source.target)

    def search(index: int) -> bool:
        if index == len(order):
            return True
        name = order[index]
        var = Var(name)
        if var in mapping:  # target, pre-assigned
            if not all(consistent(a) for a in atoms_of.get(name, ())):
                return False
            return search(index + 1)
        for candidate in candidates_for(name):
            mapping[var] = candidate
            if all(consistent(a) for a in atoms_of.get(name, ())):
                if search(index + 1):
                    return True
            del mapping[var]
        return False

    # The pre-assigned target must already satisfy its ground atoms.
    if not all(
        consistent(a)
        for a in src_atoms
        if not any(isinstance(t, Var) and t.name != source.target for t in a.terms())
    ):
        return None
    if search(0):
        return Homomorphism(mapping=dict(mapping))
    return None


def is_contained(q: ConjunctiveQuery, q_prime: ConjunctiveQuery) -> bool:
    """True iff every answer of ``q`` is an answer of ``q_prime`` on every
    graph, decided by searching for a homomorphism from q_prime to q."""
    return find_homomorphism(q_prime, q) is not None
