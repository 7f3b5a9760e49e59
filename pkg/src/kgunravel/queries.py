"""Conjunctive query model: terms, atoms, query graphs, shape reports.

A query has one target variable and one or more branches (atom lists).
A single branch is a plain conjunction; multiple branches encode unions.
Atoms may carry a negation flag for the workload types that need it.
Operations that require a pure conjunctive query (no unions, no negation)
validate and reject anything else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import DisconnectedQueryError, SchemaError, UnsupportedShapeError


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self):
        return f"<{self.name}>"


Term = Union[Var, Const]


@dataclass(frozen=True)
class Atom:
    relation: str
    subject: Term
    object: Term
    negated: bool = False

    def terms(self) -> tuple[Term, Term]:
        return (self.subject, self.object)

    def __str__(self):
        neg = "not " if self.negated else ""
        return f"{neg}{self.relation}({self.subject}, {self.object})"


@dataclass(frozen=True)
class ConjunctiveQuery:
    """Unary query ``q(target)`` given by branches of atoms.

    ``branches`` has one entry for plain conjunctions; union workload
    types use several branches, each a conjunction on its own.
    """

    target: str
    branches: tuple[tuple[Atom, ...], ...]
    id: str | None = None

    @staticmethod
    def conjunction(target: str, atoms: Iterable[Atom], id: str | None = None) -> "ConjunctiveQuery":
        return ConjunctiveQuery(target=target, branches=(tuple(atoms),), id=id)

    @property
    def atoms(self) -> tuple[Atom, ...]:
        if len(self.branches) != 1:
            raise UnsupportedShapeError("query has multiple branches; expected a single conjunction")
        return self.branches[0]

    @property
    def is_pure(self) -> bool:
        """True for a plain conjunctive query: one branch, no negated atoms."""
        return len(self.branches) == 1 and not any(a.negated for a in self.branches[0])

    def all_atoms(self) -> tuple[Atom, ...]:
        return tuple(a for branch in self.branches for a in branch)

    def variables(self) -> set[str]:
        """Variable names, always including the target."""
        names = {self.target}
        for atom in self.all_atoms():
            for term in atom.terms():
                if isinstance(term, Var):
                    names.add(term.name)
        return names

    def constants(self) -> set[str]:
        return {
            term.name
            for atom in self.all_atoms()
            for term in atom.terms()
            if isinstance(term, Const)
        }

    def relation_names(self) -> set[str]:
        return {a.relation for a in self.all_atoms()}

    def require_pure(self, operation: str) -> tuple[Atom, ...]:
        if len(self.branches) != 1:
            raise UnsupportedShapeError(f"{operation} does not support union queries")
        if any(a.negated for a in self.branches[0]):
            raise UnsupportedShapeError(f"{operation} does not support negated atoms")
        return self.branches[0]


# Query graph nodes: variables, and one node per occurrence of a constant
# in an atom slot. Duplicating occurrences keeps shared anchors from
# gluing branches together.

@dataclass(frozen=True)
class VarNode:
    name: str


@dataclass(frozen=True)
class ConstOccNode:
    name: str
    atom_index: int
    position: str  # "subject" | "object"


GraphNode = Union[VarNode, ConstOccNode]


@dataclass(frozen=True)
class QueryGraph:
    """Undirected multigraph view of a pure query: one edge per atom."""

    nodes: tuple[GraphNode, ...]
    edges: tuple[tuple[GraphNode, GraphNode, int], ...]

    def adjacency(self) -> dict[GraphNode, list[tuple[GraphNode, int]]]:
        adj: dict[GraphNode, list[tuple[GraphNode, int]]] = {n: [] for n in self.nodes}
        for u, v, i in self.edges:
            adj[u].append((v, i))
            if u != v:
                adj[v].append((u, i))
        return adj


@dataclass(frozen=True)
class ShapeReport:
    is_tree_like: bool
    is_anchored: bool
    is_cyclic: bool
    depth: int | None = None


def _node_for(term: Term, atom_index: int, position: str) -> GraphNode:
    if isinstance(term, Var):
        return VarNode(term.name)
    return ConstOccNode(term.name, atom_index, position)


def build_query_graph(q: ConjunctiveQuery) -> QueryGraph:
    """Multigraph with variables and constant occurrences as nodes.

    Each atom contributes exactly one edge; a constant appearing in k atom
    slots contributes k distinct nodes.
    """
    atoms = q.require_pure("build_query_graph")
    nodes: list[GraphNode] = [VarNode(name) for name in sorted(q.variables())]
    edges = []
    for i, atom in enumerate(atoms):
        s = _node_for(atom.subject, i, "subject")
        o = _node_for(atom.object, i, "object")
        for node in (s, o):
            if isinstance(node, ConstOccNode):
                nodes.append(node)
        edges.append((s, o, i))
    return QueryGraph(nodes=tuple(nodes), edges=tuple(edges))


def classify(q: ConjunctiveQuery) -> ShapeReport:
    """Shape report for a pure query.

    Tree-like means the query graph is an undirected tree rooted at the
    target (connected, no cycles, no parallel edges); anchored means every
    leaf of that tree is a constant occurrence. Depth is the longest
    root-to-leaf path. Cycles include self-loops and parallel atoms.
    """
    graph = build_query_graph(q)
    root = VarNode(q.target)
    adj = graph.adjacency()

    seen = {root}
    frontier = [root]
    while frontier:
        node = frontier.pop()
        for other, _ in adj[node]:
            if other not in seen:
                seen.add(other)
                frontier.append(other)
    if len(seen) != len(graph.nodes):
        raise DisconnectedQueryError(
            f"query graph has {len(graph.nodes) - len(seen)} nodes unreachable from the target"
        )

    # A connected multigraph has an undirected cycle iff #edges >= #nodes.
    is_cyclic = len(graph.edges) >= len(graph.nodes)
    is_tree_like = not is_cyclic

    depth = None
    is_anchored = False
    if is_tree_like:
        depth = 0
        levels = {root: 0}
        queue = [root]
        while queue:
            node = queue.pop(0)
            for other, _ in adj[node]:
                if other not in levels:
                    levels[other] = levels[node] + 1
                    depth = max(depth, levels[other])
                    queue.append(other)
        leaves = [n for n in graph.nodes if len(adj[n]) == 1 and n != root]
        if not graph.edges:
            leaves = [root]
        is_anchored = bool(leaves) and all(isinstance(n, ConstOccNode) for n in leaves)

    return ShapeReport(
        is_tree_like=is_tree_like,
        is_anchored=is_anchored,
        is_cyclic=is_cyclic,
        depth=depth,
    )


# JSON schema
# -----------
# {"id": str?, "type": str?, "target": str,
#  "atoms": [[rel, s, o, {"neg": bool}?], ...]}          single branch, or
#  "branches": [[[rel, s, o, {"neg": bool}?], ...], ...]}
# Terms: bare strings are variables, {"const": "name"} is a constant.

_ALLOWED_KEYS = {"id", "type", "target", "atoms", "branches"}


def _parse_term(obj) -> Term:
    if isinstance(obj, str):
        return Var(obj)
    if isinstance(obj, dict) and set(obj.keys()) == {"const"} and isinstance(obj["const"], str):
        return Const(obj["const"])
    raise SchemaError(f"bad term {obj!r}: expected a variable name or {{'const': name}}")


def _parse_atom(entry) -> Atom:
    if not isinstance(entry, list) or len(entry) not in (3, 4):
        raise SchemaError(f"bad atom {entry!r}: expected [relation, subject, object, options?]")
    rel = entry[0]
    if not isinstance(rel, str):
        raise SchemaError(f"bad relation {rel!r}: expected a string")
    negated = False
    if len(entry) == 4:
        opts = entry[3]
        if not isinstance(opts, dict) or set(opts.keys()) - {"neg"}:
            raise SchemaError(f"bad atom options {entry[3]!r}: only 'neg' is allowed")
        negated = bool(opts.get("neg", False))
    return Atom(rel, _parse_term(entry[1]), _parse_term(entry[2]), negated=negated)


def parse_query(doc) -> ConjunctiveQuery:
    """Parse a query document (dict or JSON string)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("query document must be a JSON object")
    unknown = set(doc.keys()) - _ALLOWED_KEYS
    if unknown:
        raise SchemaError(f"unknown fields {sorted(unknown)}")
    if "target" not in doc or not isinstance(doc["target"], str):
        raise SchemaError("missing string field 'target'")
    if ("atoms" in doc) == ("branches" in doc):
        raise SchemaError("exactly one of 'atoms' or 'branches' is required")
    if "atoms" in doc:
        raw_branches = [doc["atoms"]]
    else:
        raw_branches = doc["branches"]
        if not isinstance(raw_branches, list) or not raw_branches:
            raise SchemaError("'branches' must be a non-empty list of atom lists")
    branches = []
    for raw in raw_branches:
        if not isinstance(raw, list):
            raise SchemaError("each branch must be a list of atoms")
        branches.append(tuple(_parse_atom(a) for a in raw))
    qid = doc.get("id")
    if qid is not None and not isinstance(qid, str):
        raise SchemaError("'id' must be a string")
    q = ConjunctiveQuery(target=doc["target"], branches=tuple(branches), id=qid)
    atom_vars = {
        t.name for a in q.all_atoms() for t in a.terms() if isinstance(t, Var)
    }
    if q.all_atoms() and q.target not in atom_vars:
        raise SchemaError(f"target {q.target!r} does not occur in any atom")
    return q


def _term_json(term: Term):
    if isinstance(term, Var):
        return term.name
    return {"const": term.name}


def _atom_json(atom: Atom) -> list:
    entry = [atom.relation, _term_json(atom.subject), _term_json(atom.object)]
    if atom.negated:
        entry.append({"neg": True})
    return entry


def serialize_query(q: ConjunctiveQuery, type_tag: str | None = None) -> dict:
    """Inverse of parse_query: parse(serialize(q)) equals q structurally."""
    doc: dict = {}
    if q.id is not None:
        doc["id"] = q.id
    if type_tag is not None:
        doc["type"] = type_tag
    doc["target"] = q.target
    if len(q.branches) == 1:
        doc["atoms"] = [_atom_json(a) for a in q.branches[0]]
    else:
        doc["branches"] = [[_atom_json(a) for a in branch] for branch in q.branches]
    return doc
