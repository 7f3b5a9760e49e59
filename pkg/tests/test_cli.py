import json

import numpy as np
import pytest

from kgunravel import build_graph
from kgunravel.cli import main
from kgunravel.kg import iter_named_edges, write_tsv

from util import random_graph


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    rng = np.random.default_rng(2024)
    g_full = random_graph(rng, n_entities=40, n_relations=3, n_edges=300)
    triples = sorted(iter_named_edges(g_full))
    mask = rng.random(len(triples)) < 0.85
    train = [t for t, m in zip(triples, mask) if m]
    train_path = root / "train.tsv"
    full_path = root / "full.tsv"
    train_path.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in train), encoding="utf-8")
    write_tsv(g_full, full_path)
    return root, train_path, full_path


def test_load_check(dataset, capsys):
    root, train, full = dataset
    assert main(["load-check", "--graph", str(full), "--dicts-out", str(root / "dicts.json")]) == 0
    out = capsys.readouterr().out
    assert "entities:  40" in out
    dicts = json.loads((root / "dicts.json").read_text())
    assert len(dicts["entities"]) == 40


def test_exit_codes(dataset, tmp_path, capsys):
    root, train, full = dataset
    # usage: unknown flag
    assert main(["load-check", "--nope"]) == 1
    # usage: bad depth list
    assert (
        main(
            ["eval", "--train-graph", str(train), "--full-graph", str(full),
             "--queries", "x", "--answers", "y", "--out", str(tmp_path), "--depths", ""]
        ) == 1
    )
    # data: missing file
    assert main(["load-check", "--graph", str(root / "missing.tsv")]) == 2
    # data: malformed graph
    bad = tmp_path / "bad.tsv"
    bad.write_text("just one field\n", encoding="utf-8")
    assert main(["load-check", "--graph", str(bad)]) == 2
    capsys.readouterr()


def test_unravel_and_contains_commands(tmp_path, capsys):
    qpath = tmp_path / "triangle.json"
    qpath.write_text(
        json.dumps(
            {
                "target": "x",
                "atoms": [
                    ["Friend", "x", "y"],
                    ["Friend", "y", "z"],
                    ["Coworker", "z", "x"],
                ],
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "unraveled.json"
    prov = tmp_path / "prov.json"
    assert main(["unravel", "--query", str(qpath), "--depth", "3",
                 "--out", str(out), "--provenance", str(prov)]) == 0
    unraveled = json.loads(out.read_text())
    assert len(unraveled["atoms"]) == 6
    prov_doc = json.loads(prov.read_text())
    assert len(prov_doc["variables"]) == 7
    assert len(prov_doc["atoms"]) == 6

    capsys.readouterr()
    # the unraveling contains the original triangle
    assert main(["contains", "--candidate", str(qpath), "--container", str(out)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["contained"] is True
    assert payload["witness"]["x"] == "x"

    # and not conversely
    assert main(["contains", "--candidate", str(out), "--container", str(qpath)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["contained"] is False and payload["witness"] is None


def test_answer_command(tmp_path, capsys):
    g = build_graph([("a", "Friend", "b"), ("b", "Friend", "c"), ("c", "Coworker", "a")])
    gpath = tmp_path / "g.tsv"
    write_tsv(g, gpath)
    qpath = tmp_path / "q.json"
    qpath.write_text(
        json.dumps(
            {
                "target": "x",
                "atoms": [
                    ["Friend", "x", "y"],
                    ["Friend", "y", "z"],
                    ["Coworker", "z", "x"],
                ],
            }
        ),
        encoding="utf-8",
    )
    assert main(["answer", "--graph", str(gpath), "--query", str(qpath)]) == 0
    assert json.loads(capsys.readouterr().out) == ["a"]


def test_gen_train_eval_sweep_pipeline(dataset, tmp_path, capsys):
    root, train, full = dataset
    workdir = tmp_path

    gen_dir = workdir / "queries"
    assert main([
        "gen", "--type", "triangle", "--count", "6", "--train", str(train),
        "--full", str(full), "--seed", "13", "--out", str(gen_dir),
        "--unravel-depths", "2",
    ]) == 0
    assert (gen_dir / "queries.jsonl").exists()
    assert (gen_dir / "answers.jsonl").exists()
    assert (gen_dir / "queries_depth_2.jsonl").exists()
    assert (gen_dir / "config.json").exists()

    model_path = workdir / "model.bin"
    assert main([
        "train", "--graph", str(train), "--dim", "16", "--epochs", "15",
        "--lr", "0.05", "--negatives", "2", "--seed", "7", "--out", str(model_path),
    ]) == 0
    assert model_path.exists()
    assert (workdir / "model.bin.losses.json").exists()

    eval_dir = workdir / "eval"
    assert main([
        "eval", "--train-graph", str(train), "--full-graph", str(full),
        "--queries", str(gen_dir / "queries.jsonl"), "--answers", str(gen_dir / "answers.jsonl"),
        "--predictor", str(model_path), "--depths", "2", "--out", str(eval_dir),
    ]) == 0
    report = json.loads((eval_dir / "report.json").read_text())
    assert "triangle" in report["per_type"]
    block = report["per_type"]["triangle"]
    assert 0.0 <= block["mrr"] <= 1.0 and block["mape"] >= 0.0
    assert (eval_dir / "report.txt").exists()
    assert (eval_dir / "report.png").exists()

    sweep_dir = workdir / "sweep"
    assert main([
        "sweep", "--train-graph", str(train), "--full-graph", str(full),
        "--queries", str(gen_dir / "queries.jsonl"), "--answers", str(gen_dir / "answers.jsonl"),
        "--predictor", "crisp-train", "--depths", "1,2,3", "--out", str(sweep_dir),
    ]) == 0
    csv_text = (sweep_dir / "sweep.csv").read_text()
    header = csv_text.splitlines()[0]
    assert header == "depth,type,mrr,spearmanr,mape,hits1"
    assert len(csv_text.splitlines()) == 1 + 3  # one row per depth for one type
    assert (sweep_dir / "sweep.png").exists()
    assert (sweep_dir / "report_depth_2.json").exists()
    capsys.readouterr()


def test_eval_deterministic_across_parallelism(dataset, tmp_path, capsys):
    root, train, full = dataset
    gen_dir = tmp_path / "q"
    assert main([
        "gen", "--type", "square", "--count", "4", "--train", str(train),
        "--full", str(full), "--seed", "3", "--out", str(gen_dir),
    ]) == 0
    outputs = []
    for workers, name in ((1, "serial"), (4, "parallel")):
        out = tmp_path / name
        assert main([
            "eval", "--train-graph", str(train), "--full-graph", str(full),
            "--queries", str(gen_dir / "queries.jsonl"),
            "--answers", str(gen_dir / "answers.jsonl"),
            "--predictor", "crisp-full", "--depths", "2,4",
            "--mrr-scope", "all", "--parallel", str(workers),
            "--out", str(out), "--no-figures",
        ]) == 0
        outputs.append(
            (out / "report_depth_2.json").read_bytes()
            + (out / "report_depth_4.json").read_bytes()
        )
    assert outputs[0] == outputs[1]
    capsys.readouterr()


def test_gen_rerun_byte_identical(dataset, tmp_path, capsys):
    root, train, full = dataset
    blobs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main([
            "gen", "--type", "2p", "--count", "5", "--train", str(train),
            "--full", str(full), "--seed", "99", "--out", str(out),
        ]) == 0
        blobs.append((out / "queries.jsonl").read_bytes() + (out / "answers.jsonl").read_bytes())
    assert blobs[0] == blobs[1]
    capsys.readouterr()
