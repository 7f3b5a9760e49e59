"""Training for the bilinear link predictor.

Full-batch binary cross-entropy over observed edges (label 1) and
uniformly corrupted negatives (label 0), one parameter update per epoch.
Single-threaded and driven by one seeded generator, so a fixed seed
reproduces the run bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .kg import KnowledgeGraph
from .predictors import BilinearModel, _sigmoid


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 32
    epochs: int = 50
    lr: float = 0.05
    negatives: int = 4
    seed: int = 0
    optimizer: str = "adam"  # or "sgd"
    resample_negatives: bool = True
    batch_size: int | None = None  # None: one full-batch update per epoch

    def __post_init__(self):
        if self.dim <= 0 or self.epochs < 0 or self.lr <= 0 or self.negatives <= 0:
            raise ValueError("dim, lr and negatives must be positive; epochs non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size is not None and self.batch_size <= 0:
            raise ValueError("batch_size must be positive when given")


@dataclass
class TrainResult:
    model: BilinearModel
    losses: list[float] = field(default_factory=list)


def _init_model(g: KnowledgeGraph, cfg: TrainConfig, rng: np.random.Generator) -> BilinearModel:
    scale = 1.0 / np.sqrt(cfg.dim)
    ents = rng.normal(0.0, scale, size=(g.n_entities, cfg.dim))
    rels = rng.normal(0.0, scale, size=(g.n_relations, cfg.dim))
    return BilinearModel(entity_vecs=ents, relation_vecs=rels, meta={"seed": cfg.seed})


def _example_loss_and_grads(model: BilinearModel, heads, rels, tails, labels):
    """Mean BCE over the batch plus gradients for both embedding tables."""
    eh = model.entity_vecs[heads]
    wr = model.relation_vecs[rels]
    et = model.entity_vecs[tails]
    logits = np.einsum("ij,ij,ij->i", eh, wr, et)
    probs = _sigmoid(logits)
    eps = 1e-12
    loss = -np.mean(labels * np.log(probs + eps) + (1 - labels) * np.log(1 - probs + eps))

    # d loss / d logit, already averaged over the batch
    g = (probs - labels) / len(labels)
    d_ent = np.zeros_like(model.entity_vecs)
    d_rel = np.zeros_like(model.relation_vecs)
    np.add.at(d_ent, heads, g[:, None] * wr * et)
    np.add.at(d_ent, tails, g[:, None] * wr * eh)
    np.add.at(d_rel, rels, g[:, None] * eh * et)
    return float(loss), d_ent, d_rel


def _sample_negatives(positives, n_entities, negatives, rng):
    """Corrupt head or tail with equal probability. The replacement always
    differs from the slot's current entity, but no filtering against other
    observed triples happens (cheap and standard at this scale)."""
    h, r, t = positives
    reps = np.repeat(np.arange(len(h)), negatives)
    nh = h[reps].copy()
    nr = r[reps]
    nt = t[reps].copy()
    corrupt_tail = rng.random(len(reps)) < 0.5
    if n_entities < 2:
        return nh, nr, nt
    replacements = rng.integers(0, n_entities - 1, size=len(reps))
    current = np.where(corrupt_tail, nt, nh)
    replacements = replacements + (replacements >= current)
    nt[corrupt_tail] = replacements[corrupt_tail]
    nh[~corrupt_tail] = replacements[~corrupt_tail]
    return nh, nr, nt


def train(g: KnowledgeGraph, cfg: TrainConfig) -> TrainResult:
    """Train a bilinear model; returns the model and a per-epoch loss trace."""
    if not g.edges:
        raise ValueError("graph has no edges to train on")
    rng = np.random.default_rng(cfg.seed)
    model = _init_model(g, cfg, rng)

    triples = np.array(sorted(g.edges), dtype=np.int64)
    ph, pr, pt = triples[:, 0], triples[:, 1], triples[:, 2]

    m_ent = np.zeros_like(model.entity_vecs)
    v_ent = np.zeros_like(model.entity_vecs)
    m_rel = np.zeros_like(model.relation_vecs)
    v_rel = np.zeros_like(model.relation_vecs)
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8

    fixed_negatives = None
    if not cfg.resample_negatives:
        fixed_negatives = _sample_negatives((ph, pr, pt), g.n_entities, cfg.negatives, rng)

    losses: list[float] = []
    adam_step = 0
    for epoch in range(cfg.epochs):
        if fixed_negatives is None:
            nh, nr, nt = _sample_negatives((ph, pr, pt), g.n_entities, cfg.negatives, rng)
        else:
            nh, nr, nt = fixed_negatives
        heads = np.concatenate([ph, nh])
        rels = np.concatenate([pr, nr])
        tails = np.concatenate([pt, nt])
        labels = np.concatenate([np.ones(len(ph)), np.zeros(len(nh))])

        if cfg.batch_size is None:
            slices = [slice(None)]
        else:
            order = rng.permutation(len(heads))
            heads, rels, tails, labels = heads[order], rels[order], tails[order], labels[order]
            slices = [
                slice(start, start + cfg.batch_size)
                for start in range(0, len(heads), cfg.batch_size)
            ]

        epoch_loss = 0.0
        for batch in slices:
            loss, d_ent, d_rel = _example_loss_and_grads(
                model, heads[batch], rels[batch], tails[batch], labels[batch]
            )
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            epoch_loss += loss * len(labels[batch])

            if cfg.optimizer == "sgd":
                model.entity_vecs -= cfg.lr * d_ent
                model.relation_vecs -= cfg.lr * d_rel
            else:
                adam_step += 1
                for params, grad, m, v in (
                    (model.entity_vecs, d_ent, m_ent, v_ent),
                    (model.relation_vecs, d_rel, m_rel, v_rel),
                ):
                    m *= beta1
                    m += (1 - beta1) * grad
                    v *= beta2
                    v += (1 - beta2) * grad * grad
                    m_hat = m / (1 - beta1**adam_step)
                    v_hat = v / (1 - beta2**adam_step)
                    params -= cfg.lr * m_hat / (np.sqrt(v_hat) + adam_eps)

        losses.append(epoch_loss / len(labels))
        if not (
            np.isfinite(model.entity_vecs).all() and np.isfinite(model.relation_vecs).all()
        ):
            raise DivergenceError(epoch)

    return TrainResult(model=model, losses=losses)


def _single_loss(model: BilinearModel, triple, label: float) -> float:
    h, r, t = triple
    logit = model.logit(r, h, t)
    prob = float(_sigmoid(np.array([logit]))[0])
    eps = 1e-12
    return -(label * np.log(prob + eps) + (1 - label) * np.log(1 - prob + eps))


def gradient_check(model: BilinearModel, triple, epsilon: float = 1e-5, label: float = 1.0) -> float:
    """Max relative error between analytic and central-difference gradients
    of the per-example loss, over every parameter the triple touches."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    h, r, t = triple
    heads = np.array([h])
    rels = np.array([r])
    tails = np.array([t])
    labels = np.array([label], dtype=float)
    _, d_ent, d_rel = _example_loss_and_grads(model, heads, rels, tails, labels)

    worst = 0.0

    def fd(table: np.ndarray, row: int, col: int) -> float:
        original = table[row, col]
        table[row, col] = original + epsilon
        up = _single_loss(model, triple, label)
        table[row, col] = original - epsilon
        down = _single_loss(model, triple, label)
        table[row, col] = original
        return (up - down) / (2 * epsilon)

    touched_rows = {h, t}
    for row in sorted(touched_rows):
        for col in range(model.dim):
            numeric = fd(model.entity_vecs, row, col)
            analytic = d_ent[row, col]
            denom = max(abs(analytic) + abs(numeric), 1e-6)
            worst = max(worst, abs(analytic - numeric) / denom)
    for col in range(model.dim):
        numeric = fd(model.relation_vecs, r, col)
        analytic = d_rel[r, col]
        denom = max(abs(analytic) + abs(numeric), 1e-6)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
