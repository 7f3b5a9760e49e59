"""Command-line interface for the whole pipeline.

Subcommands: load-check, unravel, contains, answer, gen, train, eval,
sweep. Every run is deterministic given its inputs, flags and seed,
independent of the worker count. Exit codes: 0 success, 1 usage,
2 data/format error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import figures
from .containment import find_homomorphism
from .errors import DataError, InternalError, KgunravelError
from .fuzzy import FuzzyConfig, compile_plan, execute, predicted_cardinality
from .kg import load_aligned, load_graph
from .metrics import QueryEvalRecord, build_report, render_table
from .predictors import BilinearModel, CrispPredictor
from .queries import classify, parse_query, serialize_query
from .symbolic import evaluate_workload_query
from .training import TrainConfig, train
from .unravel import unravel
from .workloads import (
    LabeledQuery,
    generate,
    read_workload,
    unravel_workload,
    write_answers_jsonl,
    write_queries_jsonl,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_query_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_query(json.load(fh))


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo_config(outdir: Path, args: argparse.Namespace) -> None:
    payload = {k: v for k, v in vars(args).items() if k != "func"}
    _write_json(outdir / "config.json", payload)


def cmd_load_check(args) -> int:
    g = load_graph(args.graph)
    print(f"entities:  {g.n_entities}")
    print(f"relations: {g.n_relations}")
    print(f"edges:     {len(g.edges)}")
    if args.dicts_out:
        with open(args.dicts_out, "w", encoding="utf-8") as fh:
            fh.write(g.dictionaries_json() + "\n")
    return 0


def cmd_unravel(args) -> int:
    q = _read_query_file(args.query)
    result = unravel(q, args.depth)
    _write_json(args.out, serialize_query(result.query))
    if args.provenance:
        _write_json(args.provenance, result.provenance.as_json())
    report = classify(result.query)
    print(
        f"unraveled to depth {args.depth}: "
        f"{len(result.query.atoms)} atoms, {len(result.provenance.variables)} variables, "
        f"depth {report.depth}"
    )
    return 0


def cmd_contains(args) -> int:
    candidate = _read_query_file(args.candidate)
    container = _read_query_file(args.container)
    witness = find_homomorphism(container, candidate)
    payload = {
        "contained": witness is not None,
        "witness": witness.as_json() if witness else None,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.witness_out and witness is not None:
        _write_json(args.witness_out, witness.as_json())
    return 0


def cmd_answer(args) -> int:
    g = load_graph(args.graph)
    q = _read_query_file(args.query)
    answers = evaluate_workload_query(q, g)
    names = sorted(g.entity_names[e] for e in answers)
    print(json.dumps(names))
    return 0


def _parse_depths(text: str) -> list[int]:
    if not text.strip():
        raise UsageError("empty depth list")
    try:
        depths = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad depth list {text!r}") from exc
    if not depths:
        raise UsageError("empty depth list")
    return depths


def cmd_gen(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    g_train, g_full = load_aligned([args.train, args.full])
    batch = generate(
        args.type,
        g_train,
        g_full,
        count=args.count,
        seed=args.seed,
        unanchored=args.unanchored,
        anchor_mode=args.anchor_mode,
        require_hard=not args.allow_easy_only,
    )
    write_queries_jsonl(outdir / "queries.jsonl", batch)
    write_answers_jsonl(outdir / "answers.jsonl", batch, g_full)
    if args.unravel_depths:
        per_depth = unravel_workload(batch, _parse_depths(args.unravel_depths))
        for d, row in sorted(per_depth.items()):
            write_queries_jsonl(outdir / f"queries_depth_{d}.jsonl", row)
            write_answers_jsonl(outdir / f"answers_depth_{d}.jsonl", row, g_full)
    _echo_config(outdir, args)
    print(f"wrote {len(batch)} {args.type} queries to {outdir}")
    return 0


def cmd_train(args) -> int:
    g = load_graph(args.graph)
    cfg = TrainConfig(
        dim=args.dim,
        epochs=args.epochs,
        lr=args.lr,
        negatives=args.negatives,
        seed=args.seed,
        optimizer=args.optimizer,
    )
    result = train(g, cfg)
    result.model.save(args.out)
    _write_json(str(args.out) + ".losses.json", result.losses)
    final = result.losses[-1] if result.losses else float("nan")
    print(f"trained {args.epochs} epochs on {len(g.edges)} edges; final loss {final:.6f}")
    return 0


def _load_predictor(spec: str, g_train, g_full):
    if spec == "crisp-train":
        return CrispPredictor(g_train), "crisp-train"
    if spec == "crisp-full":
        return CrispPredictor(g_full), "crisp-full"
    model = BilinearModel.load(spec)
    if model.n_entities != g_full.n_entities or model.n_relations != g_full.n_relations:
        raise DataError(
            f"model covers {model.n_entities} entities / {model.n_relations} relations "
            f"but the graph has {g_full.n_entities} / {g_full.n_relations}"
        )
    return model, Path(spec).name


def _evaluate_one(
    labeled: LabeledQuery, depths: list[int], g_full, predictor, cfg: FuzzyConfig
) -> dict[int | None, QueryEvalRecord]:
    q = labeled.query
    cyclic = q.is_pure and classify(q).is_cyclic
    out: dict[int | None, QueryEvalRecord] = {}

    def record(scores) -> QueryEvalRecord:
        return QueryEvalRecord(
            query_id=q.id or "",
            type=labeled.type,
            scores=scores,
            easy_answers=labeled.easy_answers,
            hard_answers=labeled.hard_answers,
            predicted_count=predicted_cardinality(scores, cfg),
        )

    if cyclic:
        for d in depths:
            plan = compile_plan(unravel(q, d).query, g_full)
            out[d] = record(execute(plan, predictor, cfg))
    else:
        scores = execute(compile_plan(q, g_full), predictor, cfg)
        shared = record(scores)
        for d in depths:
            out[d] = shared
    return out


def _run_evaluation(args, depths: list[int]):
    g_train, g_full = load_aligned([args.train_graph, args.full_graph])
    for path in (args.queries, args.answers):
        if not Path(path).exists():
            raise DataError(f"missing workload file: {path}")
    workload = read_workload(args.queries, args.answers, g_full)
    predictor, predictor_name = _load_predictor(args.predictor, g_train, g_full)
    cfg = FuzzyConfig(
        projection_mode=args.projection,
        conjunction=args.conj,
        disjunction=args.disj,
        count_threshold=args.threshold,
    )

    def task(labeled):
        return _evaluate_one(labeled, depths, g_full, predictor, cfg)

    if args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(task, workload))
    else:
        results = [task(labeled) for labeled in workload]

    per_depth: dict[int, list[QueryEvalRecord]] = {d: [] for d in depths}
    for result in results:
        for d in depths:
            per_depth[d].append(result[d])

    config_block = {
        "projection": cfg.projection_mode,
        "conjunction": cfg.conjunction,
        "disjunction": cfg.disjunction,
        "threshold": cfg.count_threshold,
        "mrr_scope": args.mrr_scope,
        "depths": depths,
    }
    reports = {
        d: build_report(
            records,
            dataset=str(args.full_graph),
            predictor=predictor_name,
            config=dict(config_block, depth=d),
            scope=args.mrr_scope,
        )
        for d, records in per_depth.items()
    }
    return reports


def _emit_report(report: dict, outdir: Path, stem: str, with_figures: bool) -> None:
    _write_json(outdir / f"{stem}.json", report)
    table = render_table(report)
    with open(outdir / f"{stem}.txt", "w", encoding="utf-8") as fh:
        fh.write(table)
    if with_figures:
        figures.save_report_figure(report, outdir / f"{stem}.png")


def cmd_eval(args) -> int:
    depths = _parse_depths(args.depths)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = _run_evaluation(args, depths)
    if len(depths) == 1:
        _emit_report(reports[depths[0]], outdir, "report", not args.no_figures)
    else:
        for d in depths:
            _emit_report(reports[d], outdir, f"report_depth_{d}", not args.no_figures)
    _echo_config(outdir, args)
    for d in depths:
        agg = reports[d]["aggregate"]
        sp = agg["spearmanr"]
        sp_text = "-" if sp is None else f"{sp:.4f}"
        print(f"depth {d}: mrr {agg['mrr']:.4f} spearmanr {sp_text} mape {agg['mape']:.4f}")
    return 0


def cmd_sweep(args) -> int:
    depths = _parse_depths(args.depths)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = _run_evaluation(args, depths)

    rows = []
    for d in depths:
        for qtype, block in reports[d]["per_type"].items():
            rows.append(
                {
                    "depth": d,
                    "type": qtype,
                    "mrr": block["mrr"],
                    "spearmanr": block["spearmanr"],
                    "mape": block["mape"],
                    "hits1": block["hits1"],
                }
            )
    with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["depth", "type", "mrr", "spearmanr", "mape", "hits1"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    for d in depths:
        _emit_report(reports[d], outdir, f"report_depth_{d}", not args.no_figures)
    if not args.no_figures:
        figures.save_sweep_figure(rows, outdir / "sweep.png")
    _echo_config(outdir, args)
    print(f"swept depths {depths}; wrote {outdir / 'sweep.csv'}")
    return 0


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-graph", required=True)
    p.add_argument("--full-graph", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--answers", required=True)
    p.add_argument(
        "--predictor",
        default="crisp-train",
        help="crisp-train, crisp-full, or a bilinear model file",
    )
    p.add_argument("--projection", choices=["max_product", "noisy_or"], default="max_product")
    p.add_argument("--conj", choices=["product", "min"], default="product")
    p.add_argument("--disj", choices=["prob_sum", "max"], default="prob_sum")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--mrr-scope", choices=["hard_only", "all"], default="hard_only")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgunravel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load-check", help="load a TSV graph and print stats")
    p.add_argument("--graph", required=True)
    p.add_argument("--dicts-out")
    p.set_defaults(func=cmd_load_check)

    p = sub.add_parser("unravel", help="unravel a query to a tree-like approximation")
    p.add_argument("--query", required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provenance")
    p.set_defaults(func=cmd_unravel)

    p = sub.add_parser("contains", help="decide containment of one query in another")
    p.add_argument("--candidate", required=True, help="query expected to be contained")
    p.add_argument("--container", required=True, help="query expected to contain it")
    p.add_argument("--witness-out")
    p.set_defaults(func=cmd_contains)

    p = sub.add_parser("answer", help="exact answers of a query over a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("gen", help="sample a labeled query workload")
    p.add_argument("--type", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--full", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--unanchored", action="store_true")
    p.add_argument("--anchor-mode", choices=["all", "subset"], default="all")
    p.add_argument("--allow-easy-only", action="store_true")
    p.add_argument("--unravel-depths", help="comma-separated depths to also emit unravelings")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the bilinear link predictor")
    p.add_argument("--graph", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--negatives", type=int, default=4)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a labeled workload against a predictor")
    _add_eval_flags(p)
    p.add_argument("--depths", default="3", help="comma-separated unraveling depths")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="depth sweep over a cyclic workload")
    _add_eval_flags(p)
    p.add_argument("--depths", required=True, help="comma-separated unraveling depths")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except (DataError, FileNotFoundError, KgunravelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # invariant violations and genuine bugs
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
