"""Bottom-up fuzzy execution of tree-like queries over a link predictor.

Queries compile into rooted operator trees: anchors become one-hot
vectors, existentially quantified leaf variables become all-ones vectors
(every entity is an equally plausible start), projections push a fuzzy
entity set through a relation, and intersections/unions/negations combine
branch vectors with fuzzy set operators. Everything works on dense
[0, 1]-valued vectors of length |E|.

With an exact 0/1 predictor every intermediate vector stays 0/1-valued
and the support of the result equals the crisp answer set, which is the
anchor for all correctness testing here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import BindingError, PredictorError, UnsupportedShapeError
from .kg import KnowledgeGraph
from .queries import (
    Atom,
    ConjunctiveQuery,
    Const,
    ConstOccNode,
    GraphNode,
    Var,
    VarNode,
    build_query_graph,
    classify,
)

_PROJECTION_CHUNK = 1024


@dataclass(frozen=True)
class Anchor:
    entity: int


@dataclass(frozen=True)
class ExistentialLeaf:
    pass


@dataclass(frozen=True)
class Projection:
    relation: int
    direction: str  # "fwd": scores flow subject -> object, "bwd": object -> subject
    child: "PlanNode"


@dataclass(frozen=True)
class Intersection:
    children: tuple["PlanNode", ...]


@dataclass(frozen=True)
class Union_:
    children: tuple["PlanNode", ...]


@dataclass(frozen=True)
class Negation:
    child: "PlanNode"


PlanNode = Union[Anchor, ExistentialLeaf, Projection, Intersection, Union_, Negation]


@dataclass(frozen=True)
class FuzzyConfig:
    projection_mode: str = "max_product"  # or "noisy_or"
    conjunction: str = "product"  # or "min"
    disjunction: str = "prob_sum"  # or "max"
    count_threshold: float = 0.5

    def __post_init__(self):
        if self.projection_mode not in ("max_product", "noisy_or"):
            raise ValueError(f"unknown projection mode {self.projection_mode!r}")
        if self.conjunction not in ("product", "min"):
            raise ValueError(f"unknown conjunction {self.conjunction!r}")
        if self.disjunction not in ("prob_sum", "max"):
            raise ValueError(f"unknown disjunction {self.disjunction!r}")
        if not 0.0 < self.count_threshold < 1.0:
            raise ValueError(f"count threshold must be in (0, 1), got {self.count_threshold}")


def _child_slot(atom: Atom, child_node: GraphNode, atom_index: int) -> str:
    """Which slot of ``atom`` the child occupies ("subject" or "object")."""

    def matches(term, position):
        if isinstance(child_node, VarNode):
            return isinstance(term, Var) and term.name == child_node.name
        return (
            isinstance(term, Const)
            and term.name == child_node.name
            and child_node.atom_index == atom_index
            and child_node.position == position
        )

    if matches(atom.subject, "subject"):
        return "subject"
    if matches(atom.object, "object"):
        return "object"
    raise AssertionError(f"child node {child_node} not found in {atom}")


def _compile_branch(atoms: tuple[Atom, ...], target: str, g: KnowledgeGraph) -> PlanNode:
    stripped = ConjunctiveQuery.conjunction(
        target, [Atom(a.relation, a.subject, a.object) for a in atoms]
    )
    report = classify(stripped)  # raises on disconnected branches
    if not report.is_tree_like:
        raise UnsupportedShapeError(
            "branch is not tree-like; unravel cyclic queries before compiling"
        )
    adj = build_query_graph(stripped).adjacency()
    root: GraphNode = VarNode(target)

    def build(node: GraphNode, via_atom: int | None) -> PlanNode:
        children = [(other, i) for other, i in adj[node] if i != via_atom]
        if not children:
            if isinstance(node, ConstOccNode):
                if node.name not in g.entities:
                    raise BindingError(f"unknown entity {node.name!r}")
                return Anchor(g.entities[node.name])
            return ExistentialLeaf()
        contributions = []
        negated_count = 0
        for other, i in children:
            atom = atoms[i]
            if atom.relation not in g.relations:
                raise BindingError(f"unknown relation {atom.relation!r}")
            rel = g.relations[atom.relation]
            child_value = build(other, i)
            direction = "fwd" if _child_slot(atom, other, i) == "subject" else "bwd"
            value: PlanNode = Projection(rel, direction, child_value)
            if atom.negated:
                negated_count += 1
                value = Negation(value)
            contributions.append(value)
        if negated_count == len(contributions):
            raise UnsupportedShapeError("negated branches need at least one positive sibling")
        if len(contributions) == 1:
            return contributions[0]
        return Intersection(tuple(contributions))

    return build(root, None)


def compile_plan(q: ConjunctiveQuery, g: KnowledgeGraph) -> PlanNode:
    """Compile a tree-like query (anchored or not) into an operator tree.

    Union queries compile branch by branch. Cyclic branches are rejected;
    unravel them first.
    """
    branch_plans = [_compile_branch(branch, q.target, g) for branch in q.branches]
    if len(branch_plans) == 1:
        return branch_plans[0]
    return Union_(tuple(branch_plans))


def plan_relations(plan: PlanNode) -> set[int]:
    if isinstance(plan, Projection):
        return {plan.relation} | plan_relations(plan.child)
    if isinstance(plan, Negation):
        return plan_relations(plan.child)
    if isinstance(plan, (Intersection, Union_)):
        out: set[int] = set()
        for child in plan.children:
            out |= plan_relations(child)
        return out
    return set()


def _project_dense(predictor, relation: int, direction: str, v: np.ndarray, mode: str) -> np.ndarray:
    n = predictor.n_entities
    if mode == "max_product":
        out = np.zeros(n)
    else:
        log_miss = np.zeros(n)  # sum of log(1 - v[a] * P(a, b))
    for start in range(0, n, _PROJECTION_CHUNK):
        heads = np.arange(start, min(start + _PROJECTION_CHUNK, n))
        block = predictor.score_block(relation, heads)
        if direction == "fwd":
            weighted = block * v[heads, None]
            if mode == "max_product":
                np.maximum(out, weighted.max(axis=0), out=out)
            else:
                log_miss += np.log1p(-np.clip(weighted, 0.0, 1.0 - 1e-12)).sum(axis=0)
        else:
            weighted = block * v[None, :]
            if mode == "max_product":
                out[heads] = weighted.max(axis=1)
            else:
                log_miss[heads] = np.log1p(-np.clip(weighted, 0.0, 1.0 - 1e-12)).sum(axis=1)
    if mode == "max_product":
        return out
    return 1.0 - np.exp(log_miss)


def _project_crisp(graph: KnowledgeGraph, relation: int, direction: str, v: np.ndarray) -> np.ndarray:
    out = np.zeros(graph.n_entities)
    support = np.nonzero(v > 0.0)[0]
    for node in support:
        for other in graph.neighbors(int(node), relation, "fwd" if direction == "fwd" else "bwd"):
            out[other] = 1.0
    return out


def execute(plan: PlanNode, predictor, cfg: FuzzyConfig | None = None) -> np.ndarray:
    """Evaluate a plan bottom-up into a fuzzy entity set over all entities."""
    cfg = cfg or FuzzyConfig()
    n = predictor.n_entities
    for rel in plan_relations(plan):
        if not 0 <= rel < predictor.n_relations:
            raise PredictorError(f"predictor does not cover relation id {rel}")
    crisp_graph = getattr(predictor, "graph", None) if getattr(predictor, "is_crisp", False) else None

    def ev(node: PlanNode) -> np.ndarray:
        if isinstance(node, Anchor):
            if not 0 <= node.entity < n:
                raise PredictorError(f"anchor entity id {node.entity} out of range")
            v = np.zeros(n)
            v[node.entity] = 1.0
            return v
        if isinstance(node, ExistentialLeaf):
            return np.ones(n)
        if isinstance(node, Negation):
            return 1.0 - ev(node.child)
        if isinstance(node, Intersection):
            values = [ev(c) for c in node.children]
            out = values[0]
            for v in values[1:]:
                out = out * v if cfg.conjunction == "product" else np.minimum(out, v)
            return out
        if isinstance(node, Union_):
            values = [ev(c) for c in node.children]
            out = values[0]
            for v in values[1:]:
                if cfg.disjunction == "prob_sum":
                    out = out + v - out * v
                else:
                    out = np.maximum(out, v)
            return out
        if isinstance(node, Projection):
            v = ev(node.child)
            if crisp_graph is not None:
                return _project_crisp(crisp_graph, node.relation, node.direction, v)
            return _project_dense(predictor, node.relation, node.direction, v, cfg.projection_mode)
        raise AssertionError(f"unknown plan node {node!r}")

    result = np.clip(ev(plan), 0.0, 1.0)
    return result


def predicted_cardinality(v: np.ndarray, cfg: FuzzyConfig | None = None) -> int:
    """Number of entities scored at or above the counting threshold."""
    cfg = cfg or FuzzyConfig()
    return int(np.count_nonzero(v >= cfg.count_threshold))


def support(v: np.ndarray) -> frozenset[int]:
    """Entities with strictly positive score."""
    return frozenset(int(i) for i in np.nonzero(v > 0.0)[0])
