"""Pipeline stages.  Each reads its inputs from the config and the output
directory and writes its artifacts back there, so the full pipeline is just
the stages run in order."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import cost as costmod
from .config import PipelineConfig
from .costmatrix import SparseCostMatrix, VirtualCosts
from .errors import InputError, StageError
from .evaluation import (
    DedPrediction,
    matched_hits_at_1,
    metrics_report,
    rankings_from_costs,
    read_rankings,
    write_report,
    write_rankings,
)
from .kg import load_gold, load_kg, load_pairs, write_keys, write_pairs
from .metric_learning import EncoderParams, TrainingConfig, save_checkpoint, train
from .solver import AssignmentSolution, branch_and_cut, build_instance, greedy_match
from .synth import write_synthetic
from .textual import (
    PseudoPairSet,
    embed_names,
    extract_pseudo_pairs,
    load_word_vectors,
    read_pseudo_pairs,
    similarity_matrix,
    top_n_candidates,
    write_oov_report,
    write_pseudo_pairs,
)

log = logging.getLogger(__name__)

ARTIFACTS = {
    "names1": "names1.npy",
    "names2": "names2.npy",
    "oov1": "oov1.tsv",
    "oov2": "oov2.tsv",
    "pseudo_pairs": "pseudo_pairs.tsv",
    "candidates": "candidates.tsv",
    "checkpoint": "encoder.ckpt",
    "emb1": "emb1.npy",
    "emb2": "emb2.npy",
    "train_log": "train_log.tsv",
    "cost_grid": "cost_grid.tsv",
    "cost": "cost.tsv",
    "virtual": "virtual.json",
    "solution": "solution.json",
    "alignment": "alignment.tsv",
    "pred_dangling1": "pred_dangling1.txt",
    "pred_dangling2": "pred_dangling2.txt",
    "rankings_out": "rankings.tsv",
    "metrics": "metrics.json",
}

PIPELINE_ORDER = ("embed", "pairs", "train", "cost", "gridsearch", "solve", "eval")


def _art(out: Path, key: str) -> Path:
    return Path(out) / ARTIFACTS[key]


def _need(path: Path, stage_hint: str) -> Path:
    if not Path(path).exists():
        raise InputError(f"missing {path} (run stage {stage_hint!r} first)")
    return Path(path)


def _input_file(cfg: PipelineConfig, key: str) -> Path:
    p = cfg.require(key)
    if not p.exists():
        raise InputError(f"{key} file not found: {p}")
    return p


def _kgs(cfg):
    kg1 = load_kg(_input_file(cfg, "kg1_triples"), _input_file(cfg, "kg1_names"))
    kg2 = load_kg(_input_file(cfg, "kg2_triples"), _input_file(cfg, "kg2_names"))
    return kg1, kg2


def _save_npy(path, arr):
    with open(path, "wb") as fh:
        np.save(fh, np.ascontiguousarray(arr, dtype=np.float64), allow_pickle=False)


def _load_npy(path):
    return np.load(path, allow_pickle=False)


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_synthesize(cfg: PipelineConfig, out: Path) -> None:
    files = write_synthetic(out, cfg.synth)
    lines = [f"{k} = {v}" for k, v in files.items()]
    lines += [f"synth_{k} = {v}" for k, v in vars(cfg.synth).items()]
    lines.append(f"seed = {cfg.seed}")
    (Path(out) / "pipeline.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_embed(cfg: PipelineConfig, out: Path) -> None:
    kg1, kg2 = _kgs(cfg)
    table = load_word_vectors(_input_file(cfg, "word_vectors"))
    for kg, nk, ok in ((kg1, "names1", "oov1"), (kg2, "names2", "oov2")):
        names = embed_names(kg, table, split_camel=cfg.split_camel)
        _save_npy(_art(out, nk), names.matrix)
        write_oov_report(_art(out, ok), kg, names)


def _similarity(out):
    X1 = _load_npy(_need(_art(out, "names1"), "embed"))
    X2 = _load_npy(_need(_art(out, "names2"), "embed"))
    return X1, X2, similarity_matrix(X1, X2)


def cmd_pairs(cfg: PipelineConfig, out: Path) -> None:
    kg1, kg2 = _kgs(cfg)
    _, _, S = _similarity(out)
    P = extract_pseudo_pairs(S, cfg.eps)
    write_pseudo_pairs(_art(out, "pseudo_pairs"), P, kg1, kg2, S)
    write_pairs(_art(out, "candidates"), top_n_candidates(S, cfg.top_n), kg1, kg2)
    log.info("%d pseudo pairs at eps=%g", len(P), cfg.eps)


def _anchors(cfg, out, kg1, kg2) -> PseudoPairSet:
    P = read_pseudo_pairs(_need(_art(out, "pseudo_pairs"), "pairs"), kg1, kg2, cfg.eps)
    if cfg.mode == "supervised":
        P = P.union(load_pairs(_input_file(cfg, "train_pairs"), kg1, kg2))
    return P


def training_config(cfg: PipelineConfig) -> TrainingConfig:
    return TrainingConfig(
        margin=cfg.margin,
        negatives_per_pair=cfg.negatives_per_pair,
        top_n=cfg.top_n,
        w0=cfg.w0,
        decay_fraction=cfg.decay_fraction,
        learning_rate=cfg.learning_rate,
        total_steps=cfg.total_steps,
        rng_seed=cfg.seed,
        hidden_dim=cfg.hidden_dim,
        out_dim=cfg.out_dim,
        resample_every=cfg.resample_every,
    )


def cmd_train(cfg: PipelineConfig, out: Path) -> None:
    kg1, kg2 = _kgs(cfg)
    X1, X2, S = _similarity(out)
    P = _anchors(cfg, out, kg1, kg2)
    result = train(kg1, kg2, X1, X2, P, training_config(cfg), S=S)
    _save_npy(_art(out, "emb1"), result.emb1.matrix)
    _save_npy(_art(out, "emb2"), result.emb2.matrix)
    params = result.params
    if params is None:
        d = X1.shape[1]
        params = EncoderParams(np.zeros((d, 0)), np.zeros(0), np.zeros((0, 0)), np.zeros(0))
    meta = {"seed": cfg.seed, "steps": len(result.history), "skipped": result.skipped, "anchors": len(P)}
    save_checkpoint(_art(out, "checkpoint"), params, meta)
    with open(_art(out, "train_log"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step\ttotal\talignment\trefining\tweight\n")
        for t, h in enumerate(result.history):
            fh.write(f"{t}\t{h.total!r}\t{h.alignment!r}\t{h.refining!r}\t{h.weight!r}\n")


def _char_names(cfg, kg1, kg2):
    if cfg.features != "word+char":
        return None
    return kg1.names, kg2.names


def cmd_cost(cfg: PipelineConfig, out: Path) -> None:
    E1 = _load_npy(_need(_art(out, "emb1"), "train"))
    E2 = _load_npy(_need(_art(out, "emb2"), "train"))
    char_names = _char_names(cfg, *_kgs(cfg)) if cfg.features == "word+char" else None
    D = costmod.dense_costs(E1, E2, char_names, cfg.char_weight)
    costmod.sparsify(D, cfg.K_grid, cfg.delta).write(_art(out, "cost_grid"), delta=cfg.delta)
    costmod.sparsify(D, cfg.K, cfg.delta).write(_art(out, "cost"), delta=cfg.delta)


def _solver(cfg):
    def solve(instance):
        return branch_and_cut(instance, node_budget=cfg.node_budget)

    return solve


def cmd_gridsearch(cfg: PipelineConfig, out: Path) -> None:
    kg1, kg2 = _kgs(cfg)
    C_small, _ = SparseCostMatrix.read(_need(_art(out, "cost_grid"), "cost"))
    P = _anchors(cfg, out, kg1, kg2)
    result = costmod.grid_search_virtual_costs(C_small, P.pairs, cfg.grid_size, _solver(cfg))
    _write_json(_art(out, "virtual"), result.to_json())


def read_virtual(cfg: PipelineConfig, out: Path, meta: dict | None = None) -> VirtualCosts:
    """Config alpha/beta if set, else the grid-search result, else the cost sidecar."""
    if cfg.alpha > 0 and cfg.beta > 0:
        return VirtualCosts(cfg.alpha, cfg.beta)
    path = _art(out, "virtual")
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return VirtualCosts(float(data["alpha"]), float(data["beta"]))
    if meta and meta.get("alpha") and meta.get("beta"):
        return VirtualCosts(float(meta["alpha"]), float(meta["beta"]))
    raise InputError(f"no virtual costs: set alpha/beta or run stage 'gridsearch' (missing {path})")


def cmd_solve(cfg: PipelineConfig, out: Path) -> AssignmentSolution:
    C, meta = SparseCostMatrix.read(_need(_art(out, "cost"), "cost"))
    virtual = read_virtual(cfg, out, meta)
    sol = _solver(cfg)(build_instance(C, virtual))
    sol.write(_art(out, "solution"))
    if cfg.kg1_names and cfg.kg2_names:
        kg1, kg2 = _kgs(cfg)
        write_pairs(_art(out, "alignment"), sol.matched, kg1, kg2)
        write_keys(_art(out, "pred_dangling1"), sol.dangling1, kg1)
        write_keys(_art(out, "pred_dangling2"), sol.dangling2, kg2)
    return sol


def cmd_eval(cfg: PipelineConfig, out: Path) -> dict:
    kg1, kg2 = _kgs(cfg)
    gold = load_gold(
        _input_file(cfg, "gold_pairs"), kg1, kg2,
        cfg.path("gold_dangling1"), cfg.path("gold_dangling2"),
    )
    sol = AssignmentSolution.read(_need(_art(out, "solution"), "solve"))
    C, meta = SparseCostMatrix.read(_need(_art(out, "cost"), "cost"))
    if cfg.rankings:
        rankings = read_rankings(_input_file(cfg, "rankings"))
    else:
        E1 = _load_npy(_need(_art(out, "emb1"), "train"))
        E2 = _load_npy(_need(_art(out, "emb2"), "train"))
        D = costmod.dense_costs(E1, E2, _char_names(cfg, kg1, kg2), cfg.char_weight)
        rankings = rankings_from_costs(D)
        write_rankings(_art(out, "rankings_out"), rankings, top=10)
    virtual = read_virtual(cfg, out, meta)
    extra = {
        "matched_hits1": matched_hits_at_1(sol, gold),
        "greedy_hits1": matched_hits_at_1(greedy_match(C), gold),
        "alpha": virtual.alpha,
        "beta": virtual.beta,
        "solver_status": sol.status,
        "node_count": sol.node_count,
        "num_matched": len(sol.matched),
    }
    report = metrics_report(rankings, gold, DedPrediction.from_solution(sol), extra)
    write_report(_art(out, "metrics"), report)
    return report


STAGES = {
    "synthesize": cmd_synthesize,
    "embed": cmd_embed,
    "pairs": cmd_pairs,
    "train": cmd_train,
    "cost": cmd_cost,
    "gridsearch": cmd_gridsearch,
    "solve": cmd_solve,
    "eval": cmd_eval,
}


def run_stage(name: str, cfg: PipelineConfig, out) -> object:
    """Run one stage; any failure is re-raised as StageError naming it."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return STAGES[name](cfg, out)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def cmd_pipeline(cfg: PipelineConfig, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report = None
    for name in PIPELINE_ORDER:
        log.info("stage %s", name)
        report = run_stage(name, cfg, out)
    return report
