import json
import time
from pathlib import Path

import numpy as np
import pytest

from sot_align import stages
from sot_align.cli import main
from sot_align.config import load_config
from sot_align.metric_learning import load_checkpoint
from sot_align.solver import AssignmentSolution, brute_force_oracle
from sot_align.stages import ARTIFACTS, PIPELINE_ORDER, cmd_pairs, run_stage
from sot_align.textual import read_pseudo_pairs


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    data = tmp_path_factory.mktemp("data")
    assert main(["synthesize", "--out", str(data)]) == 0
    return data


@pytest.fixture(scope="module")
def pipeline_run(fixture_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    start = time.perf_counter()
    code = main(["pipeline", "--config", str(fixture_dir / "pipeline.cfg"), "--out", str(out)])
    return code, out, time.perf_counter() - start


def test_pipeline_emits_all_artifacts_quickly(pipeline_run):
    code, out, seconds = pipeline_run
    assert code == 0
    assert seconds < 60
    for name in ARTIFACTS.values():
        assert (out / name).exists(), name
    report = json.loads((out / ARTIFACTS["metrics"]).read_text())
    assert {"hits1_relaxed", "hits1_practical", "hits10", "mrr", "ded"} <= set(report)
    assert set(report["ded"]) == {"kg1", "kg2", "pooled"}
    sol = AssignmentSolution.read(out / ARTIFACTS["solution"])
    assert sol.status == "optimal"


def test_fixture_shape(fixture_dir):
    assert len((fixture_dir / "kg1_names.tsv").read_text().splitlines()) == 30
    assert len((fixture_dir / "gold_pairs.tsv").read_text().splitlines()) == 20


def test_manual_stages_are_byte_identical(fixture_dir, pipeline_run, tmp_path):
    _, piped, _ = pipeline_run
    for name in PIPELINE_ORDER:
        assert main([name, "--config", str(fixture_dir / "pipeline.cfg"), "--out", str(tmp_path)]) == 0
    produced = sorted(p.name for p in piped.iterdir())
    assert produced == sorted(p.name for p in tmp_path.iterdir())
    for name in produced:
        assert (piped / name).read_bytes() == (tmp_path / name).read_bytes(), name


def test_pipeline_is_deterministic(fixture_dir, pipeline_run, tmp_path):
    _, piped, _ = pipeline_run
    assert main(["pipeline", "--config", str(fixture_dir / "pipeline.cfg"), "--out", str(tmp_path)]) == 0
    assert (piped / "metrics.json").read_bytes() == (tmp_path / "metrics.json").read_bytes()


def test_missing_word_vectors_halts_at_embed(fixture_dir, tmp_path, capsys):
    missing = tmp_path / "nowhere" / "vectors.txt"
    code = main(["pipeline", "--config", str(fixture_dir / "pipeline.cfg"), "--set", f"word_vectors={missing}", "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert code == 2
    assert "embed" in err and str(missing) in err


def test_lower_eps_keeps_every_unchallenged_pair(fixture_dir, pipeline_run, tmp_path):
    # Lowering eps keeps each strict pair unless a rival in its row or column
    # rises above the looser threshold; only such pairs may drop out.
    _, piped, _ = pipeline_run
    cfg = load_config(fixture_dir / "pipeline.cfg", ["eps=0.5"])
    for name in ("names1", "names2"):
        (tmp_path / ARTIFACTS[name]).write_bytes((piped / ARTIFACTS[name]).read_bytes())
    cmd_pairs(cfg, tmp_path)
    kg1, kg2 = stages._kgs(cfg)
    loose = read_pseudo_pairs(tmp_path / ARTIFACTS["pseudo_pairs"], kg1, kg2, 0.5)
    strict = read_pseudo_pairs(piped / ARTIFACTS["pseudo_pairs"], kg1, kg2, 0.99)
    S = stages._similarity(piped)[2]
    assert len(strict) > 0
    for i, j in strict.pairs:
        rivals = np.concatenate([np.delete(S[i], j), np.delete(S[:, j], i)])
        challenged = bool(np.any((rivals > 0.5) & (rivals <= 0.99)))
        assert ((i, j) in loose.pairs) != challenged


def test_supervised_mode_adds_training_pairs(fixture_dir, pipeline_run, tmp_path):
    _, piped, _ = pipeline_run
    train_pairs = tmp_path / "train.tsv"
    train_pairs.write_text("".join(fixture_dir.joinpath("gold_pairs.tsv").read_text().splitlines(True)[:10]))
    out = tmp_path / "sup"
    sets = ["--set", "mode=supervised", "--set", f"train_pairs={train_pairs}"]
    assert main(["pipeline", "--config", str(fixture_dir / "pipeline.cfg"), *sets, "--out", str(out)]) == 0
    anchors = lambda d: load_checkpoint(d / ARTIFACTS["checkpoint"])[1]["anchors"]
    assert anchors(out) > anchors(piped)


def test_solve_hand_written_costs(tmp_path):
    D = np.array([[0.2, 0.9, 0.7], [0.8, 0.1, 0.95], [0.6, 0.85, 0.9]])
    with open(tmp_path / "cost.tsv", "w") as fh:
        for i in range(3):
            for j in range(3):
                fh.write(f"{i}\t{j}\t{D[i, j]}\n")
    (tmp_path / "cost.tsv.json").write_text(json.dumps({"m": 3, "n": 3, "K": 3, "alpha": None, "beta": None, "delta": 1e-9}))
    assert main(["solve", "--set", "alpha=0.4", "--set", "beta=0.3", "--out", str(tmp_path)]) == 0
    sol = AssignmentSolution.read(tmp_path / "solution.json")
    ref = brute_force_oracle(D, 0.4, 0.3)
    assert sol.objective == pytest.approx(ref.objective, abs=1e-12)
    assert sorted(sol.matched) == sorted(ref.matched)


def test_eval_with_hand_rankings(tmp_path):
    d = tmp_path
    (d / "n1.tsv").write_text("a\tA\nb\tB\nc\tC\n")
    (d / "n2.tsv").write_text("x\tX\ny\tY\nz\tZ\nw\tW\n")
    (d / "t1.tsv").write_text("")
    (d / "t2.tsv").write_text("")
    (d / "gold.tsv").write_text("a\tx\nb\ty\nc\tz\n")
    (d / "rank.tsv").write_text("0\t0 3 1 2\n1\t1 0 2 3\n2\t3 2 0 1\n")
    out = d / "out"
    out.mkdir()
    AssignmentSolution([(0, 0), (1, 1)], [2], [2, 3], 1.0).write(out / "solution.json")
    with open(out / "cost.tsv", "w") as fh:
        fh.write("0\t0\t0.1\n1\t1\t0.2\n2\t3\t0.3\n")
    (out / "cost.tsv.json").write_text(json.dumps({"m": 3, "n": 4, "K": 1, "alpha": 0.5, "beta": 0.5, "delta": 1e-9}))
    cfg = d / "eval.cfg"
    cfg.write_text("kg1_triples = t1.tsv\nkg1_names = n1.tsv\nkg2_triples = t2.tsv\nkg2_names = n2.tsv\ngold_pairs = gold.tsv\nrankings = rank.tsv\n")
    assert main(["eval", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "metrics.json").read_text())
    assert report["hits1_practical"] == pytest.approx(2 / 3)
    assert report["hits1_relaxed"] == 1.0
    assert report["mrr"] == pytest.approx(2.5 / 3)
    assert report["matched_hits1"] == pytest.approx(2 / 3)
    # gold dangling: kg1 none, kg2 {w}; predicted kg2 {z, w}
    assert report["ded"]["kg2"]["p"] == 0.5 and report["ded"]["kg2"]["r"] == 1.0
    assert report["ded"]["kg1"]["precision_defined"] is True and report["ded"]["kg1"]["p"] == 0.0


def test_stage_failure_exit_code(fixture_dir, tmp_path, monkeypatch):
    def boom(cfg, out):
        raise RuntimeError("kaboom")

    monkeypatch.setitem(stages.STAGES, "train", boom)
    code = main(["train", "--config", str(fixture_dir / "pipeline.cfg"), "--out", str(tmp_path)])
    assert code == 3


def test_node_budget_exit_code(tmp_path, monkeypatch):
    def capped(cfg, out):
        sol = AssignmentSolution([], [0], [0], 2.0, node_count=1, status="node_budget")
        sol.write(Path(out) / "solution.json")
        return sol

    monkeypatch.setitem(stages.STAGES, "solve", capped)
    assert main(["solve", "--out", str(tmp_path)]) == 4


def test_bad_override_exit_code(tmp_path):
    assert main(["embed", "--set", "bogus=1", "--out", str(tmp_path)]) == 2


def test_run_stage_names_the_stage(tmp_path):
    with pytest.raises(Exception) as info:
        run_stage("cost", load_config(None), tmp_path)
    assert info.value.stage == "cost"
