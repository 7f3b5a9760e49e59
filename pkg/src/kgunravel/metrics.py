"""Ranking and cardinality metrics: filtered MRR, Hits@K, Spearman rank
correlation of predicted vs. true answer counts, and MAPE.

Ranks use the filtered protocol: when ranking one correct answer, all
other correct answers are removed from the competitor pool so they never
push it down. Ties always resolve to the average rank of the tied block,
here and in the Spearman ranking, so results do not depend on sort order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import UndefinedCorrelationError

HITS_KS = (1, 3, 10)


@dataclass
class QueryEvalRecord:
    query_id: str
    type: str
    scores: np.ndarray
    easy_answers: frozenset[int]
    hard_answers: frozenset[int]
    predicted_count: int
    true_count: int = field(default=-1)

    def __post_init__(self):
        if self.true_count < 0:
            self.true_count = len(self.easy_answers | self.hard_answers)

    @property
    def all_answers(self) -> frozenset[int]:
        return self.easy_answers | self.hard_answers


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks of ``values`` ascending, ties averaged."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def filtered_rank(scores: np.ndarray, answer: int, all_answers: Iterable[int]) -> float:
    """Rank of ``answer`` among itself plus all non-answers, by descending
    score; tied blocks take their average rank."""
    answers = frozenset(all_answers)
    if answer not in answers:
        raise ValueError(f"entity {answer} is not among the correct answers")
    competitors = np.ones(len(scores), dtype=bool)
    competitors[list(answers)] = False
    competitors[answer] = True
    s = scores[answer]
    pool = scores[competitors]
    higher = int(np.count_nonzero(pool > s))
    tied_others = int(np.count_nonzero(pool == s)) - 1
    return higher + 1 + tied_others / 2


def _per_query_values(record: QueryEvalRecord, scope: str, k: int | None):
    if scope == "hard_only":
        targets = record.hard_answers
    elif scope == "all":
        targets = record.all_answers
    else:
        raise ValueError(f"unknown scope {scope!r}")
    values = []
    for answer in sorted(targets):
        rank = filtered_rank(record.scores, answer, record.all_answers)
        values.append(1.0 / rank if k is None else float(rank <= k))
    return values


def mrr(records: Sequence[QueryEvalRecord], scope: str = "hard_only", pooling: str = "per_query") -> float:
    """Mean reciprocal rank of the in-scope answers.

    ``per_query`` averages reciprocal ranks within each query first (the
    common protocol); ``pooled`` averages over all answers directly.
    """
    if not records:
        raise ValueError("no records to aggregate")
    return _aggregate(records, scope, None, pooling)


def hits_at_k(records: Sequence[QueryEvalRecord], k: int, scope: str = "hard_only", pooling: str = "per_query") -> float:
    if not records:
        raise ValueError("no records to aggregate")
    return _aggregate(records, scope, k, pooling)


def _aggregate(records, scope, k, pooling) -> float:
    per_query = []
    pooled = []
    for record in records:
        values = _per_query_values(record, scope, k)
        if not values:
            raise ValueError(
                f"query {record.query_id!r} has no answers in scope {scope!r}"
            )
        per_query.append(float(np.mean(values)))
        pooled.extend(values)
    if pooling == "per_query":
        return float(np.mean(per_query))
    if pooling == "pooled":
        return float(np.mean(pooled))
    raise ValueError(f"unknown pooling {pooling!r}")


def spearman(pred_counts: Sequence[float], true_counts: Sequence[float]) -> float:
    """Pearson correlation of the average-tie ranks of the two lists."""
    pred = np.asarray(pred_counts, dtype=float)
    true = np.asarray(true_counts, dtype=float)
    if len(pred) != len(true):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(true)}")
    if len(pred) < 2:
        raise ValueError("need at least two pairs")
    if np.all(pred == pred[0]) or np.all(true == true[0]):
        raise UndefinedCorrelationError("rank correlation undefined for constant input")
    rp = average_ranks(pred)
    rt = average_ranks(true)
    rp = rp - rp.mean()
    rt = rt - rt.mean()
    return float((rp * rt).sum() / np.sqrt((rp * rp).sum() * (rt * rt).sum()))


def mape(pred_counts: Sequence[float], true_counts: Sequence[float]) -> float:
    """Mean of |pred - true| / true; every true count must be >= 1."""
    pred = np.asarray(pred_counts, dtype=float)
    true = np.asarray(true_counts, dtype=float)
    if len(pred) != len(true):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(true)}")
    if len(pred) == 0:
        raise ValueError("no counts to aggregate")
    if np.any(true < 1):
        raise ValueError("true counts must all be >= 1")
    return float(np.mean(np.abs(pred - true) / true))


def _metric_block(records: list[QueryEvalRecord], scope: str, pooling: str) -> dict:
    preds = [r.predicted_count for r in records]
    trues = [r.true_count for r in records]
    try:
        sp = spearman(preds, trues)
    except (UndefinedCorrelationError, ValueError):
        sp = None
    block = {
        "n": len(records),
        "mrr": mrr(records, scope, pooling),
        "spearmanr": sp,
        "mape": mape(preds, trues),
    }
    for k in HITS_KS:
        block[f"hits{k}"] = hits_at_k(records, k, scope, pooling)
    return block


def build_report(
    records: Sequence[QueryEvalRecord],
    dataset: str,
    predictor: str,
    config: dict,
    scope: str = "hard_only",
    pooling: str = "per_query",
) -> dict:
    """Per-type and aggregate metrics, deterministically ordered."""
    if not records:
        raise ValueError("no records to report on")
    ordered = sorted(records, key=lambda r: r.query_id)
    by_type: dict[str, list[QueryEvalRecord]] = {}
    for record in ordered:
        by_type.setdefault(record.type, []).append(record)
    per_type = {
        qtype: _metric_block(group, scope, pooling)
        for qtype, group in sorted(by_type.items())
    }
    return {
        "dataset": dataset,
        "predictor": predictor,
        "config": dict(config),
        "per_type": per_type,
        "aggregate": _metric_block(list(ordered), scope, pooling),
    }


def render_table(report: dict) -> str:
    """Aligned text table, one row per query type plus the aggregate."""
    columns = ["type", "n", "mrr", "hits1", "hits3", "hits10", "spearmanr", "mape"]
    rows = []
    for qtype, block in report["per_type"].items():
        rows.append([qtype] + [_fmt(block[c]) for c in columns[1:]])
    rows.append(["all"] + [_fmt(report["aggregate"][c]) for c in columns[1:]])
    widths = [max(len(r[i]) for r in rows + [columns]) for i in range(len(columns))]
    lines = [
        "  ".join(c.ljust(w) for c, w in zip(columns, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, int):
        return str(value)
    return f"{value:.4f}"
