"""Valid-path enumeration and depth-d unravelings of conjunctive queries.

A valid path traverses a query from its target variable through atoms,
never crossing the same atom twice in a row. The depth-d unraveling is
the tree-like query whose variables are the unanchored valid paths of
length at most d, with one atom per path extension. It always contains
the original query (no false negatives) and is the tightest such
approximation among tree-like queries of depth at most d.

Paths record a direction flag per step, so the two traversals of a
self-loop atom are distinct paths; for every other atom the direction is
forced by the endpoints. Paths may pass through constants: a path ending
at a constant contributes that constant to the unraveled query instead of
a fresh variable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import DepthLimitError, DisconnectedQueryError
from .queries import Atom, ConjunctiveQuery, Const, Term, Var

MAX_DEPTH = 16


@dataclass(frozen=True)
class PathStep:
    atom_index: int
    forward: bool
    end: Term

    @property
    def signature(self) -> str:
        return f"{'f' if self.forward else 'b'}{self.atom_index}"


@dataclass(frozen=True)
class QueryPath:
    """Alternating element/atom traversal starting at the target."""

    start: Term
    steps: tuple[PathStep, ...]

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def end(self) -> Term:
        return self.steps[-1].end if self.steps else self.start

    @property
    def anchored(self) -> bool:
        return isinstance(self.end, Const)

    @property
    def is_valid(self) -> bool:
        return all(
            self.steps[i].atom_index != self.steps[i + 1].atom_index
            for i in range(len(self.steps) - 1)
        )

    def prefix(self) -> "QueryPath":
        if not self.steps:
            raise ValueError("the empty path has no prefix")
        return QueryPath(self.start, self.steps[:-1])

    @property
    def signature(self) -> str:
        return ".".join(step.signature for step in self.steps)

    @property
    def breadcrumb(self) -> str:
        return ".".join(step.end.name for step in self.steps)

    def as_json(self) -> dict:
        return {
            "start": self.start.name,
            "steps": [
                {
                    "atom": s.atom_index,
                    "dir": "fwd" if s.forward else "bwd",
                    "to": s.end.name if isinstance(s.end, Var) else {"const": s.end.name},
                }
                for s in self.steps
            ],
        }


def _check_step(atoms: tuple[Atom, ...], at: Term, step: PathStep) -> None:
    if not 0 <= step.atom_index < len(atoms):
        raise ValueError(f"atom index {step.atom_index} out of range")
    atom = atoms[step.atom_index]
    came_from, arrived_at = (
        (atom.subject, atom.object) if step.forward else (atom.object, atom.subject)
    )
    if came_from != at or arrived_at != step.end:
        raise ValueError(
            f"step {step.signature} does not traverse {atom} from {at} to {step.end}"
        )


def make_path(q: ConjunctiveQuery, moves: Iterable[tuple[int, bool]]) -> QueryPath:
    """Build a path (not necessarily valid) from (atom index, forward) moves."""
    atoms = q.require_pure("make_path")
    at: Term = Var(q.target)
    steps = []
    for atom_index, forward in moves:
        if not 0 <= atom_index < len(atoms):
            raise ValueError(f"atom index {atom_index} out of range")
        atom = atoms[atom_index]
        came_from, arrived_at = (
            (atom.subject, atom.object) if forward else (atom.object, atom.subject)
        )
        if came_from != at:
            raise ValueError(
                f"cannot traverse {atom} {'forward' if forward else 'backward'} from {at}"
            )
        step = PathStep(atom_index, forward, arrived_at)
        steps.append(step)
        at = arrived_at
    return QueryPath(Var(q.target), tuple(steps))


def _extensions(atoms: tuple[Atom, ...], path: QueryPath) -> list[PathStep]:
    last = path.steps[-1].atom_index if path.steps else None
    at = path.end
    out = []
    for i, atom in enumerate(atoms):
        if i == last:
            continue
        if atom.subject == at:
            out.append(PathStep(i, True, atom.object))
        if atom.object == at:
            out.append(PathStep(i, False, atom.subject))
    out.sort(key=lambda s: (s.atom_index, not s.forward))
    return out


def valid_paths(q: ConjunctiveQuery, d: int) -> list[QueryPath]:
    """All valid paths of length <= d in lexicographic step order."""
    if d < 0:
        raise ValueError(f"depth must be >= 0, got {d}")
    atoms = q.require_pure("valid_paths")
    result: list[QueryPath] = []

    def walk(path: QueryPath) -> None:
        result.append(path)
        if path.length == d:
            return
        for step in _extensions(atoms, path):
            walk(QueryPath(path.start, path.steps + (step,)))

    walk(QueryPath(Var(q.target), ()))
    return result


def canonicalize_path(q: ConjunctiveQuery, path: QueryPath) -> QueryPath:
    """Reduce a path to its unique valid form.

    Adjacent steps through the same atom cancel each other (they retrace
    the atom immediately); repeating the cancellation until none is left
    yields a unique fixpoint with the same endpoint.
    """
    atoms = q.require_pure("canonicalize_path")
    if path.start != Var(q.target):
        raise ValueError(f"path must start at the target {q.target!r}")
    at: Term = path.start
    for step in path.steps:
        _check_step(atoms, at, step)
        at = step.end

    stack: list[PathStep] = []
    for step in path.steps:
        if stack and stack[-1].atom_index == step.atom_index:
            stack.pop()
        else:
            stack.append(step)
    return QueryPath(path.start, tuple(stack))


def _variable_name(target: str, path: QueryPath) -> str:
    if not path.steps:
        return target
    return f"{target}__{path.signature}__{path.breadcrumb}"


@dataclass(frozen=True)
class AtomOrigin:
    """Where one unraveled atom came from: the extension of ``parent`` by
    the last step of ``child`` through ``source_atom_index``."""

    out_index: int
    source_atom_index: int
    parent: QueryPath
    child: QueryPath
    forward: bool


@dataclass(frozen=True)
class Provenance:
    variables: dict[str, QueryPath]
    atom_origins: tuple[AtomOrigin, ...]

    def constant_leaves(self) -> dict[tuple[int, str], QueryPath]:
        """Anchored path behind each constant occurrence of the output."""
        out = {}
        for origin in self.atom_origins:
            parent_pos, child_pos = ("subject", "object") if origin.forward else ("object", "subject")
            if origin.parent.anchored:
                out[(origin.out_index, parent_pos)] = origin.parent
            if origin.child.anchored:
                out[(origin.out_index, child_pos)] = origin.child
        return out

    def as_json(self) -> dict:
        return {
            "variables": {name: p.as_json() for name, p in sorted(self.variables.items())},
            "atoms": [
                {
                    "atom": origin.out_index,
                    "source_atom": origin.source_atom_index,
                    "parent": origin.parent.as_json(),
                    "child": origin.child.as_json(),
                    "dir": "fwd" if origin.forward else "bwd",
                }
                for origin in self.atom_origins
            ],
        }


@dataclass(frozen=True)
class UnravelResult:
    query: ConjunctiveQuery
    provenance: Provenance


def _reachable_atoms(q: ConjunctiveQuery) -> set[int]:
    """Atoms reachable from the target when constants merge occurrences."""
    atoms = q.atoms
    incident: dict[Term, set[int]] = {}
    for i, atom in enumerate(atoms):
        for term in atom.terms():
            incident.setdefault(term, set()).add(i)
    seen_terms = {Var(q.target)}
    seen_atoms: set[int] = set()
    frontier: list[Term] = [Var(q.target)]
    while frontier:
        term = frontier.pop()
        for i in incident.get(term, ()):
            if i in seen_atoms:
                continue
            seen_atoms.add(i)
            for other in atoms[i].terms():
                if other not in seen_terms:
                    seen_terms.add(other)
                    frontier.append(other)
    return seen_atoms


def unravel(q: ConjunctiveQuery, d: int, max_depth: int = MAX_DEPTH) -> UnravelResult:
    """Depth-d unraveling of a pure connected query.

    Variables are the unanchored valid paths of length <= d (the empty
    path keeps the original target name); every one-step path extension
    contributes an atom oriented like the traversed source atom, with
    anchored paths contributing their end constant instead of a variable.
    """
    atoms = q.require_pure("unravel")
    if d < 1:
        raise ValueError(f"unraveling depth must be >= 1, got {d}")
    if d > max_depth:
        raise DepthLimitError(f"depth {d} exceeds the safety cap {max_depth}")
    missing = set(range(len(atoms))) - _reachable_atoms(q)
    if missing:
        raise DisconnectedQueryError(
            f"{len(missing)} atoms are unreachable from the target: "
            + ", ".join(str(atoms[i]) for i in sorted(missing))
        )

    paths = valid_paths(q, d)
    names: dict[tuple, str] = {}
    variables: dict[str, QueryPath] = {}
    for p in paths:
        if p.anchored:
            continue
        name = _variable_name(q.target, p)
        key = tuple(p.steps)
        if name in variables:
            raise AssertionError(f"duplicate unraveling variable name {name!r}")
        names[key] = name
        variables[name] = p

    def term_for(p: QueryPath) -> Term:
        if p.anchored:
            return Const(p.end.name)
        return Var(names[tuple(p.steps)])

    out_atoms: list[Atom] = []
    origins: list[AtomOrigin] = []
    seen: dict[Atom, int] = {}
    for p in paths:
        if not p.steps:
            continue
        parent = p.prefix()
        step = p.steps[-1]
        relation = atoms[step.atom_index].relation
        if step.forward:
            atom = Atom(relation, term_for(parent), term_for(p))
        else:
            atom = Atom(relation, term_for(p), term_for(parent))
        if atom in seen:
            # Identical ground atoms (both ends anchored) can be reached
            # along several routes; one copy carries the same constraint.
            continue
        seen[atom] = len(out_atoms)
        origins.append(
            AtomOrigin(
                out_index=len(out_atoms),
                source_atom_index=step.atom_index,
                parent=parent,
                child=p,
                forward=step.forward,
            )
        )
        out_atoms.append(atom)

    query = ConjunctiveQuery.conjunction(q.target, out_atoms, id=q.id)
    return UnravelResult(query=query, provenance=Provenance(variables, tuple(origins)))


def canonical_map(result: UnravelResult) -> dict[Term, Term]:
    """The mapping sending each unraveling variable to the end of its path.

    This is the witness that the unraveling contains the original query;
    it can be checked directly with verify_homomorphism.
    """
    mapping: dict[Term, Term] = {}
    for name, path in result.provenance.variables.items():
        mapping[Var(name)] = path.end
    for atom in result.query.atoms:
        for term in atom.terms():
            if isinstance(term, Const):
                mapping[term] = term
    return mapping
