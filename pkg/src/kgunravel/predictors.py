"""Link predictors: the interface, an exact graph-backed oracle, and a
trainable bilinear model.

A predictor scores (head, relation, tail) triples in [0, 1] and exposes
batched row/column access so the fuzzy executor can stream projections
without ever materializing a full |E| x |E| score matrix.
"""

from __future__ import annotations

import abc
import json
import threading
from dataclasses import dataclass

import numpy as np

from .kg import KnowledgeGraph

_MAGIC = "kgunravel-bilinear-v1"


class LinkPredictor(abc.ABC):
    """Scores in [0, 1]; deterministic given fixed parameters."""

    @property
    @abc.abstractmethod
    def n_entities(self) -> int: ...

    @property
    @abc.abstractmethod
    def n_relations(self) -> int: ...

    @abc.abstractmethod
    def score(self, relation: int, head: int, tail: int) -> float: ...

    @abc.abstractmethod
    def score_row(self, relation: int, head: int) -> np.ndarray:
        """Scores of (head, relation, t) for every tail t."""

    def score_col(self, relation: int, tail: int) -> np.ndarray:
        """Scores of (h, relation, tail) for every head h."""
        return np.array([self.score(relation, h, tail) for h in range(self.n_entities)])

    def score_block(self, relation: int, heads: np.ndarray) -> np.ndarray:
        """Row-stacked scores for a batch of heads, shape (len(heads), |E|)."""
        return np.stack([self.score_row(relation, int(h)) for h in heads])


class CrispPredictor(LinkPredictor):
    """Exact oracle: score 1 iff the edge is in the backing graph."""

    is_crisp = True

    def __init__(self, graph: KnowledgeGraph):
        self.graph = graph

    @property
    def n_entities(self) -> int:
        return self.graph.n_entities

    @property
    def n_relations(self) -> int:
        return self.graph.n_relations

    def score(self, relation, head, tail):
        return 1.0 if self.graph.has_edge(head, relation, tail) else 0.0

    def score_row(self, relation, head):
        row = np.zeros(self.n_entities)
        row[self.graph.neighbors(head, relation, "fwd")] = 1.0
        return row

    def score_col(self, relation, tail):
        col = np.zeros(self.n_entities)
        col[self.graph.neighbors(tail, relation, "bwd")] = 1.0
        return col


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class MatrixCachedPredictor(LinkPredictor):
    """Wraps a predictor, materializing one dense score matrix per relation.

    Worth it when many projections reuse the same relations and |E| is
    small enough for |E| x |E| float32 blocks (about 4 MB at 1k entities).
    Read-only after fill; safe to share across evaluation workers.
    """

    def __init__(self, inner: LinkPredictor, max_entities: int = 4096):
        if inner.n_entities > max_entities:
            raise ValueError(
                f"refusing to cache {inner.n_entities}x{inner.n_entities} score matrices"
            )
        self.inner = inner
        self._matrices: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def n_entities(self) -> int:
        return self.inner.n_entities

    @property
    def n_relations(self) -> int:
        return self.inner.n_relations

    def matrix(self, relation: int) -> np.ndarray:
        with self._lock:
            cached = self._matrices.get(relation)
            if cached is None:
                heads = np.arange(self.inner.n_entities)
                cached = self.inner.score_block(relation, heads).astype(np.float32)
                self._matrices[relation] = cached
        return cached

    def score(self, relation, head, tail):
        return float(self.matrix(relation)[head, tail])

    def score_row(self, relation, head):
        return self.matrix(relation)[head].astype(np.float64)

    def score_col(self, relation, tail):
        return self.matrix(relation)[:, tail].astype(np.float64)

    def score_block(self, relation, heads):
        return self.matrix(relation)[heads]


@dataclass
class BilinearModel(LinkPredictor):
    """Diagonal bilinear scorer: logistic(sum_i e_h[i] * w_r[i] * e_t[i]).

    Embeddings are kept in float64 in memory; the on-disk format stores
    them as little-endian float32.
    """

    entity_vecs: np.ndarray  # (|E|, k)
    relation_vecs: np.ndarray  # (|R|, k)
    meta: dict | None = None

    @property
    def n_entities(self) -> int:
        return self.entity_vecs.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_vecs.shape[0]

    @property
    def dim(self) -> int:
        return self.entity_vecs.shape[1]

    def logit(self, relation: int, head: int, tail: int) -> float:
        return float(
            np.dot(self.entity_vecs[head] * self.relation_vecs[relation], self.entity_vecs[tail])
        )

    def score(self, relation, head, tail):
        return float(_sigmoid(np.array([self.logit(relation, head, tail)]))[0])

    def score_row(self, relation, head):
        logits = (self.entity_vecs[head] * self.relation_vecs[relation]) @ self.entity_vecs.T
        return _sigmoid(logits)

    def score_col(self, relation, tail):
        # The diagonal form is symmetric in head/tail up to the same product.
        logits = (self.entity_vecs[tail] * self.relation_vecs[relation]) @ self.entity_vecs.T
        return _sigmoid(logits)

    def score_block(self, relation, heads):
        logits = (self.entity_vecs[heads] * self.relation_vecs[relation]) @ self.entity_vecs.T
        return _sigmoid(logits)

    def save(self, path) -> None:
        """JSON header line, then raw little-endian float32 matrices."""
        header = {
            "format": _MAGIC,
            "n_entities": self.n_entities,
            "n_relations": self.n_relations,
            "dim": self.dim,
            "meta": self.meta or {},
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
            fh.write(b"\n")
            fh.write(self.entity_vecs.astype("<f4").tobytes(order="C"))
            fh.write(self.relation_vecs.astype("<f4").tobytes(order="C"))

    @staticmethod
    def load(path) -> "BilinearModel":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            header = json.loads(header_line.decode("utf-8"))
            if header.get("format") != _MAGIC:
                raise ValueError(f"{path}: not a bilinear model file")
            ne, nr, k = header["n_entities"], header["n_relations"], header["dim"]
            body = fh.read()
        expected = (ne + nr) * k * 4
        if len(body) != expected:
            raise ValueError(f"{path}: expected {expected} payload bytes, found {len(body)}")
        ents = np.frombuffer(body[: ne * k * 4], dtype="<f4").reshape(ne, k)
        rels = np.frombuffer(body[ne * k * 4 :], dtype="<f4").reshape(nr, k)
        return BilinearModel(
            entity_vecs=ents.astype(np.float64),
            relation_vecs=rels.astype(np.float64),
            meta=header.get("meta") or {},
        )
