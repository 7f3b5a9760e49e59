"""Immutable knowledge graph store with bidirectional adjacency.

A graph is a set of (head, relation, tail) edges over dense integer ids.
Ids are assigned in first-appearance order at load time so that all
downstream entity vectors can be indexed positionally. Graphs are never
mutated after construction; "completing" a graph is the predictor's job.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal, Sequence

from .errors import EmptyGraphError, TripleParseError

Direction = Literal["fwd", "bwd"]


@dataclass(frozen=True)
class KnowledgeGraph:
    """Entity/relation dictionaries plus an indexed edge set.

    ``entities`` and ``relations`` map names to dense ids; ``edges`` holds
    (head id, relation id, tail id) triples. The forward index answers
    "tails of r(h, .)", the backward index "heads of r(., t)".
    """

    entities: dict[str, int]
    relations: dict[str, int]
    edges: frozenset[tuple[int, int, int]]
    _fwd: dict[tuple[int, int], tuple[int, ...]] = field(repr=False)
    _bwd: dict[tuple[int, int], tuple[int, ...]] = field(repr=False)
    _by_rel: dict[int, tuple[tuple[int, int], ...]] = field(repr=False)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def entity_names(self) -> list[str]:
        names = [""] * len(self.entities)
        for name, idx in self.entities.items():
            names[idx] = name
        return names

    @property
    def relation_names(self) -> list[str]:
        names = [""] * len(self.relations)
        for name, idx in self.relations.items():
            names[idx] = name
        return names

    def has_edge(self, head: int, relation: int, tail: int) -> bool:
        return (head, relation, tail) in self.edges

    def neighbors(self, node: int, relation: int, direction: Direction) -> list[int]:
        """Sorted neighbor ids of ``node`` through ``relation``.

        ``fwd`` returns tails of relation(node, .), ``bwd`` the heads of
        relation(., node). Out-of-range ids raise IndexError.
        """
        if not 0 <= node < self.n_entities:
            raise IndexError(f"entity id {node} out of range [0, {self.n_entities})")
        if not 0 <= relation < self.n_relations:
            raise IndexError(f"relation id {relation} out of range [0, {self.n_relations})")
        if direction == "fwd":
            return list(self._fwd.get((relation, node), ()))
        if direction == "bwd":
            return list(self._bwd.get((relation, node), ()))
        raise ValueError(f"direction must be 'fwd' or 'bwd', got {direction!r}")

    def edges_of_relation(self, relation: int) -> tuple[tuple[int, int], ...]:
        """Sorted (head, tail) pairs of one relation."""
        if not 0 <= relation < self.n_relations:
            raise IndexError(f"relation id {relation} out of range [0, {self.n_relations})")
        return self._by_rel.get(relation, ())

    def subgraph(self, edges: Iterable[tuple[int, int, int]]) -> "KnowledgeGraph":
        """New graph over the same dictionaries with a subset of edges."""
        kept = frozenset(edges)
        extra = kept - self.edges
        if extra:
            raise ValueError(f"{len(extra)} edges are not part of this graph")
        return _assemble(self.entities, self.relations, kept)

    def dictionaries_json(self) -> str:
        """Dictionary export: {"entities": [...], "relations": [...]} in id order."""
        payload = {"entities": self.entity_names, "relations": self.relation_names}
        return json.dumps(payload, sort_keys=True)


def _assemble(
    entities: dict[str, int],
    relations: dict[str, int],
    edges: frozenset[tuple[int, int, int]],
) -> KnowledgeGraph:
    fwd: dict[tuple[int, int], list[int]] = {}
    bwd: dict[tuple[int, int], list[int]] = {}
    by_rel: dict[int, list[tuple[int, int]]] = {}
    for h, r, t in edges:
        fwd.setdefault((r, h), []).append(t)
        bwd.setdefault((r, t), []).append(h)
        by_rel.setdefault(r, []).append((h, t))
    return KnowledgeGraph(
        entities=dict(entities),
        relations=dict(relations),
        edges=edges,
        _fwd={k: tuple(sorted(v)) for k, v in fwd.items()},
        _bwd={k: tuple(sorted(v)) for k, v in bwd.items()},
        _by_rel={k: tuple(sorted(v)) for k, v in by_rel.items()},
    )


def _read_triples(path) -> list[tuple[str, str, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    triples = []
    for number, line in enumerate(text.splitlines(), start=1):
        fields = line.split("\t")
        if len(fields) != 3:
            raise TripleParseError(
                path, number, f"expected 3 tab-separated fields, got {len(fields)}"
            )
        if not all(fields):
            raise TripleParseError(path, number, "empty field")
        triples.append((fields[0], fields[1], fields[2]))
    if not triples:
        raise EmptyGraphError(f"{path}: no triples")
    return triples


def build_graph(
    triples: Iterable[tuple[str, str, str]],
    entities: dict[str, int] | None = None,
    relations: dict[str, int] | None = None,
) -> KnowledgeGraph:
    """Build a graph from (head, relation, tail) name triples.

    Dictionaries are extended in first-appearance order; duplicate triples
    collapse into one edge.
    """
    ents = dict(entities) if entities else {}
    rels = dict(relations) if relations else {}
    edges = set()
    for h, r, t in triples:
        hid = ents.setdefault(h, len(ents))
        rid = rels.setdefault(r, len(rels))
        tid = ents.setdefault(t, len(ents))
        edges.add((hid, rid, tid))
    return _assemble(ents, rels, frozenset(edges))


def load_graph(path, fmt: str = "tsv") -> KnowledgeGraph:
    """Load one TSV triple file (``head<TAB>relation<TAB>tail`` per line)."""
    if fmt != "tsv":
        raise ValueError(f"unsupported format {fmt!r}; only 'tsv' is available")
    return build_graph(_read_triples(path))


def load_aligned(paths: Sequence, fmt: str = "tsv") -> list[KnowledgeGraph]:
    """Load several TSV files onto one shared dictionary.

    Ids are assigned in first-appearance order across the files in the
    given order, so e.g. a train split loaded before the full graph keeps
    stable ids while every returned graph shares the same vector space.
    """
    if fmt != "tsv":
        raise ValueError(f"unsupported format {fmt!r}; only 'tsv' is available")
    per_file = [_read_triples(p) for p in paths]
    ents: dict[str, int] = {}
    rels: dict[str, int] = {}
    for triples in per_file:
        for h, r, t in triples:
            ents.setdefault(h, len(ents))
            rels.setdefault(r, len(rels))
            ents.setdefault(t, len(ents))
    return [build_graph(triples, ents, rels) for triples in per_file]


def merge(graphs: Sequence[KnowledgeGraph]) -> KnowledgeGraph:
    """Union of several graphs, matching entities and relations by name."""
    if not graphs:
        raise ValueError("merge needs at least one graph")
    ents: dict[str, int] = {}
    rels: dict[str, int] = {}
    edges = set()
    for g in graphs:
        enames = g.entity_names
        rnames = g.relation_names
        for name in enames:
            ents.setdefault(name, len(ents))
        for name in rnames:
            rels.setdefault(name, len(rels))
        for h, r, t in g.edges:
            edges.add((ents[enames[h]], rels[rnames[r]], ents[enames[t]]))
    return _assemble(ents, rels, frozenset(edges))


def iter_named_edges(g: KnowledgeGraph) -> Iterator[tuple[str, str, str]]:
    """Edges as name triples in sorted id order."""
    enames = g.entity_names
    rnames = g.relation_names
    for h, r, t in sorted(g.edges):
        yield enames[h], rnames[r], enames[t]


def write_tsv(g: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in iter_named_edges(g):
            fh.write(f"{h}\t{r}\t{t}\n")
