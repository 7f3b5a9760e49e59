"""Query workload sampling and labeling.

Covers the fourteen tree-like operator types (paths, intersections,
unions, negations — anchored or with anchors existentially quantified)
plus three cyclic shapes: double path (two parallel atoms), triangle and
square. Instances are sampled by random walks on the full graph so every
query has at least one answer there; easy answers are those already
derivable from the training graph, hard answers need the held-out edges.

All randomness flows from one seed through per-query derived generators,
so generation is reproducible and order-independent under parallelism.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ExhaustionError, SchemaError
from .kg import KnowledgeGraph
from .queries import Atom, ConjunctiveQuery, Const, Var, parse_query, serialize_query
from .symbolic import AnswerSet, evaluate_workload_query
from .unravel import unravel

TREE_TYPES = ("1p", "2p", "3p", "2i", "3i", "ip", "pi", "2in", "3in", "inp", "pin", "pni", "2u", "up")
CYCLIC_TYPES = ("double_path", "triangle", "square")
QUERY_TYPES = TREE_TYPES + CYCLIC_TYPES

MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class LabeledQuery:
    query: ConjunctiveQuery
    type: str
    easy_answers: AnswerSet
    hard_answers: AnswerSet


class _GraphView:
    """Adjacency scratch structures for sampling walks."""

    def __init__(self, g: KnowledgeGraph):
        self.g = g
        self.entity_names = g.entity_names
        self.relation_names = g.relation_names
        self.edge_list = sorted(g.edges)
        self.out_adj: dict[int, list[tuple[int, int]]] = {}
        self.in_adj: dict[int, list[tuple[int, int]]] = {}
        for h, r, t in self.edge_list:
            self.out_adj.setdefault(h, []).append((r, t))
            self.in_adj.setdefault(t, []).append((r, h))

    def random_edge(self, rng) -> tuple[int, int, int]:
        return self.edge_list[int(rng.integers(len(self.edge_list)))]

    def random_out(self, rng, node: int) -> tuple[int, int] | None:
        options = self.out_adj.get(node)
        if not options:
            return None
        return options[int(rng.integers(len(options)))]

    def random_in(self, rng, node: int) -> tuple[int, int] | None:
        options = self.in_adj.get(node)
        if not options:
            return None
        return options[int(rng.integers(len(options)))]

    def random_undirected(self, rng, node: int) -> tuple[int, int, bool] | None:
        """(relation, other endpoint, edge points away from node)."""
        options = [(r, t, True) for r, t in self.out_adj.get(node, [])]
        options += [(r, h, False) for r, h in self.in_adj.get(node, [])]
        if not options:
            return None
        return options[int(rng.integers(len(options)))]

    def between(self, u: int, v: int) -> list[tuple[int, bool]]:
        """Atoms available between u and v: (relation, oriented u->v)."""
        out = [(r, True) for r, t in self.out_adj.get(u, []) if t == v]
        out += [(r, False) for r, t in self.out_adj.get(v, []) if t == u]
        return out

    def rel(self, rid: int) -> str:
        return self.relation_names[rid]

    def ent(self, eid: int) -> str:
        return self.entity_names[eid]


def _atom(view: _GraphView, rid: int, subj, obj, negated=False) -> Atom:
    return Atom(view.rel(rid), subj, obj, negated=negated)


def _sample_tree(view: _GraphView, rng, qtype: str) -> ConjunctiveQuery | None:
    x = Var("x")
    u1, u2 = Var("u1"), Var("u2")

    def const(eid: int) -> Const:
        return Const(view.ent(eid))

    def random_relation() -> int:
        return int(rng.integers(view.g.n_relations))

    def random_entity() -> int:
        return int(rng.integers(view.g.n_entities))

    if qtype == "1p":
        h, r, _ = view.random_edge(rng)
        return ConjunctiveQuery.conjunction("x", [_atom(view, r, const(h), x)])

    if qtype == "2p":
        h, r1, m = view.random_edge(rng)
        step = view.random_out(rng, m)
        if step is None:
            return None
        r2, _ = step
        return ConjunctiveQuery.conjunction(
            "x", [_atom(view, r1, const(h), u1), _atom(view, r2, u1, x)]
        )

    if qtype == "3p":
        h, r1, m = view.random_edge(rng)
        step2 = view.random_out(rng, m)
        if step2 is None:
            return None
        r2, m2 = step2
        step3 = view.random_out(rng, m2)
        if step3 is None:
            return None
        r3, _ = step3
        return ConjunctiveQuery.conjunction(
            "x",
            [_atom(view, r1, const(h), u1), _atom(view, r2, u1, u2), _atom(view, r3, u2, x)],
        )

    if qtype in ("2i", "3i"):
        h1, r1, t = view.random_edge(rng)
        incoming = {(r, h) for r, h in view.in_adj.get(t, [])} - {(r1, h1)}
        needed = 1 if qtype == "2i" else 2
        if len(incoming) < needed:
            return None
        others = sorted(incoming)
        picks = rng.choice(len(others), size=needed, replace=False)
        atoms = [_atom(view, r1, const(h1), x)]
        for p in sorted(int(i) for i in picks):
            r, h = others[p]
            atoms.append(_atom(view, r, const(h), x))
        return ConjunctiveQuery.conjunction("x", atoms)

    if qtype == "ip":
        m, r3, _ = view.random_edge(rng)
        incoming = sorted({(r, h) for r, h in view.in_adj.get(m, [])})
        if len(incoming) < 2:
            return None
        picks = rng.choice(len(incoming), size=2, replace=False)
        (ra, ha), (rb, hb) = incoming[int(picks[0])], incoming[int(picks[1])]
        return ConjunctiveQuery.conjunction(
            "x",
            [
                _atom(view, ra, const(ha), u1),
                _atom(view, rb, const(hb), u1),
                _atom(view, r3, u1, x),
            ],
        )

    if qtype == "pi":
        h, r1, m = view.random_edge(rng)
        step = view.random_out(rng, m)
        if step is None:
            return None
        r2, t = step
        side = view.random_in(rng, t)
        if side is None:
            return None
        r3, b = side
        return ConjunctiveQuery.conjunction(
            "x",
            [
                _atom(view, r1, const(h), u1),
                _atom(view, r2, u1, x),
                _atom(view, r3, const(b), x),
            ],
        )

    if qtype == "2in":
        h, r1, _ = view.random_edge(rng)
        return ConjunctiveQuery.conjunction(
            "x",
            [
                _atom(view, r1, const(h), x),
                _atom(view, random_relation(), const(random_entity()), x, negated=True),
            ],
        )

    if qtype == "3in":
        h1, r1, t = view.random_edge(rng)
        incoming = sorted({(r, h) for r, h in view.in_adj.get(t, [])} - {(r1, h1)})
        if not incoming:
            return None
        r2, h2 = incoming[int(rng.integers(len(incoming)))]
        return ConjunctiveQuery.conjunction(
            "x",
            [
                _atom(view, r1, const(h1), x),
                _atom(view, r2, const(h2), x),
                _atom(view, random_relation(), const(random_entity()), x, negated=True),
            ],
        )

    if qtype == "inp":
        m, r3, _ = view.random_edge(rng)
        side = view.random_in(rng, m)
        if side is None:
            return None
        r1, a = side
        return ConjunctiveQuery.conjunction(
            "x",
            [
                _atom(view, r1, const(a), u1),
                _atom(view, random_relation(), const(random_entity()), u1, negated=True),
                _atom(view, r3, u1, x),
            ],
        )

    if qtype == "pin":
        h, r1, m = view.random_edge(rng)
        step = view.random_out(rng, m)
        if step is None:
            return None
        r2, _ = step
        return ConjunctiveQuery.conjunction(
            "x",
            [
                _atom(view, r1, const(h), u1),
                _atom(view, r2, u1, x),
                _atom(view, random_relation(), const(random_entity()), x, negated=True),
            ],
        )

    if qtype == "pni":
        # Negation of a whole two-hop branch, intersected with a live edge.
        b, r3, _ = view.random_edge(rng)
        return ConjunctiveQuery.conjunction(
            "x",
            [
                _atom(view, random_relation(), const(random_entity()), u1),
                _atom(view, random_relation(), u1, x, negated=True),
                _atom(view, r3, const(b), x),
            ],
        )

    if qtype == "2u":
        h1, r1, _ = view.random_edge(rng)
        h2, r2, _ = view.random_edge(rng)
        return ConjunctiveQuery(
            target="x",
            branches=(
                (_atom(view, r1, const(h1), x),),
                (_atom(view, r2, const(h2), x),),
            ),
        )

    if qtype == "up":
        m1, r3, _ = view.random_edge(rng)
        side1 = view.random_in(rng, m1)
        if side1 is None:
            return None
        r1, a = side1
        candidates = view.g.edges_of_relation(r3)
        m2, _ = candidates[int(rng.integers(len(candidates)))]
        side2 = view.random_in(rng, m2)
        if side2 is None:
            return None
        r2, b = side2
        return ConjunctiveQuery(
            target="x",
            branches=(
                (_atom(view, r1, const(a), u1), _atom(view, r3, u1, x)),
                (_atom(view, r2, const(b), u1), _atom(view, r3, u1, x)),
            ),
        )

    raise ValueError(f"unknown tree query type {qtype!r}")


def _oriented(view: _GraphView, rid: int, oriented_from_first: bool, first, second) -> Atom:
    if oriented_from_first:
        return _atom(view, rid, first, second)
    return _atom(view, rid, second, first)


def _sample_cyclic(view: _GraphView, rng, qtype: str) -> ConjunctiveQuery | None:
    names = ["x", "y", "z", "w"]
    steps = {"double_path": 1, "triangle": 2, "square": 3}[qtype]

    # walks start at uniformly random entities, not edge-weighted
    start = int(rng.integers(view.g.n_entities))
    nodes = [start]
    atoms: list[Atom] = []
    for i in range(steps):
        move = view.random_undirected(rng, nodes[-1])
        if move is None:
            return None
        rid, other, outgoing = move
        atoms.append(
            _oriented(view, rid, outgoing, Var(names[i]), Var(names[i + 1]))
        )
        nodes.append(other)

    closing = view.between(nodes[-1], nodes[0])
    if qtype == "double_path":
        # The two parallel atoms must differ as query atoms.
        closing = [
            (rid, fwd)
            for rid, fwd in closing
            if _oriented(view, rid, fwd, Var(names[1]), Var(names[0])) != atoms[0]
        ]
    if not closing:
        return None
    rid, fwd = closing[int(rng.integers(len(closing)))]
    atoms.append(_oriented(view, rid, fwd, Var(names[steps]), Var(names[0])))
    return ConjunctiveQuery.conjunction("x", atoms)


def _quantify_anchors(q: ConjunctiveQuery, rng, mode: str) -> ConjunctiveQuery:
    """Replace anchor occurrences with fresh existential variables."""
    occurrences = []
    for b, branch in enumerate(q.branches):
        for i, atom in enumerate(branch):
            if isinstance(atom.subject, Const):
                occurrences.append((b, i, "subject"))
            if isinstance(atom.object, Const):
                occurrences.append((b, i, "object"))
    if not occurrences:
        return q
    if mode == "all":
        chosen = occurrences
    elif mode == "subset":
        k = int(rng.integers(1, len(occurrences) + 1))
        picks = rng.choice(len(occurrences), size=k, replace=False)
        chosen = [occurrences[int(i)] for i in sorted(picks)]
    else:
        raise ValueError(f"unknown anchor mode {mode!r}")

    branches = [list(branch) for branch in q.branches]
    for n, (b, i, position) in enumerate(chosen):
        atom = branches[b][i]
        fresh = Var(f"w{n + 1}")
        if position == "subject":
            branches[b][i] = replace(atom, subject=fresh)
        else:
            branches[b][i] = replace(atom, object=fresh)
    return ConjunctiveQuery(
        target=q.target, branches=tuple(tuple(b) for b in branches), id=q.id
    )


def generate(
    qtype: str,
    g_train: KnowledgeGraph,
    g_full: KnowledgeGraph,
    count: int,
    seed: int,
    unanchored: bool = False,
    anchor_mode: str = "all",
    require_hard: bool = True,
) -> list[LabeledQuery]:
    """Sample ``count`` labeled queries of one type.

    Requires the training edge set to be a subset of the full edge set
    over shared dictionaries. Test workloads keep ``require_hard`` so
    every query has at least one answer only the full graph provides.
    """
    if qtype not in QUERY_TYPES:
        raise ValueError(f"unknown query type {qtype!r}; expected one of {QUERY_TYPES}")
    if g_train.entities != g_full.entities or g_train.relations != g_full.relations:
        raise ValueError("train and full graphs must share dictionaries (use load_aligned)")
    if not g_train.edges <= g_full.edges:
        raise ValueError("training edges must be a subset of the full edges")

    view = _GraphView(g_full)
    out: list[LabeledQuery] = []
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        sampled = None
        for _ in range(MAX_ATTEMPTS):
            q = (
                _sample_cyclic(view, rng, qtype)
                if qtype in CYCLIC_TYPES
                else _sample_tree(view, rng, qtype)
            )
            if q is None:
                continue
            if unanchored:
                q = _quantify_anchors(q, rng, anchor_mode)
            full_answers = evaluate_workload_query(q, g_full)
            if not full_answers:
                continue
            easy = evaluate_workload_query(q, g_train)
            hard = full_answers - easy
            if require_hard and not hard:
                continue
            qid = f"{qtype}-{seed}-{index}"
            sampled = LabeledQuery(
                query=ConjunctiveQuery(target=q.target, branches=q.branches, id=qid),
                type=qtype,
                easy_answers=easy,
                hard_answers=frozenset(hard),
            )
            break
        if sampled is None:
            raise ExhaustionError(
                f"could not sample a {qtype} query with the required answers", MAX_ATTEMPTS
            )
        out.append(sampled)
    return out


def unravel_workload(
    batch: list[LabeledQuery], depths: list[int]
) -> dict[int, list[LabeledQuery]]:
    """Unravel cyclic labeled queries at each depth, carrying the labels.

    Ground truth stays the cyclic query's answers: the unraveling is the
    executable stand-in, not a new labeling.
    """
    out: dict[int, list[LabeledQuery]] = {}
    for d in depths:
        row = []
        for labeled in batch:
            result = unravel(labeled.query, d)
            renamed = ConjunctiveQuery(
                target=result.query.target,
                branches=result.query.branches,
                id=f"{labeled.query.id}@d{d}" if labeled.query.id else None,
            )
            row.append(
                LabeledQuery(
                    query=renamed,
                    type=labeled.type,
                    easy_answers=labeled.easy_answers,
                    hard_answers=labeled.hard_answers,
                )
            )
        out[d] = row
    return out


def write_queries_jsonl(path, batch: list[LabeledQuery]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for labeled in batch:
            doc = serialize_query(labeled.query, type_tag=labeled.type)
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def write_answers_jsonl(path, batch: list[LabeledQuery], g: KnowledgeGraph) -> None:
    names = g.entity_names
    with open(path, "w", encoding="utf-8") as fh:
        for labeled in batch:
            record = {
                "id": labeled.query.id,
                "easy": sorted(names[e] for e in labeled.easy_answers),
                "hard": sorted(names[e] for e in labeled.hard_answers),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_workload(queries_path, answers_path, g: KnowledgeGraph) -> list[LabeledQuery]:
    """Load queries.jsonl + answers.jsonl back into labeled queries."""
    with open(queries_path, "r", encoding="utf-8") as fh:
        query_docs = [json.loads(line) for line in fh if line.strip()]
    with open(answers_path, "r", encoding="utf-8") as fh:
        answer_docs = [json.loads(line) for line in fh if line.strip()]
    if len(query_docs) != len(answer_docs):
        raise SchemaError(
            f"{queries_path} has {len(query_docs)} queries but {answers_path} "
            f"has {len(answer_docs)} answer rows"
        )
    out = []
    for qdoc, adoc in zip(query_docs, answer_docs):
        qtype = qdoc.get("type", "unknown")
        q = parse_query(qdoc)
        if q.id != adoc.get("id"):
            raise SchemaError(f"query id {q.id!r} does not match answers id {adoc.get('id')!r}")
        try:
            easy = frozenset(g.entities[name] for name in adoc.get("easy", []))
            hard = frozenset(g.entities[name] for name in adoc.get("hard", []))
        except KeyError as exc:
            raise SchemaError(f"answer entity {exc.args[0]!r} missing from graph") from exc
        out.append(LabeledQuery(query=q, type=qtype, easy_answers=easy, hard_answers=hard))
    return out
