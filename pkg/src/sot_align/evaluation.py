"""Alignment and dangling-detection metrics."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .costmatrix import SparseCostMatrix
from .errors import InputError
from .kg import GoldStandard

RELAXED = "relaxed"
PRACTICAL = "practical"


@dataclass(frozen=True)
class RankingTable:
    """Source id -> candidate target ids by ascending cost."""

    rows: dict

    def __post_init__(self):
        for src, cand in self.rows.items():
            if len(set(cand)) != len(cand):
                raise InputError(f"duplicate candidates for source {src}")

    def candidates(self, src: int, allowed: set | None = None) -> list:
        cand = list(self.rows[src])
        return cand if allowed is None else [t for t in cand if t in allowed]


def rankings_from_costs(D, sources=None) -> RankingTable:
    """Rank every target for each source by ascending distance (ties: smaller id).

    ``D`` may be dense (``inf`` = no candidate) or a SparseCostMatrix, in
    which case absent entries rank after every present one.
    """
    if isinstance(D, SparseCostMatrix):
        D = D.to_dense()
    D = np.asarray(D, dtype=float)
    sources = range(D.shape[0]) if sources is None else sources
    return RankingTable({int(i): np.argsort(D[i], kind="stable").tolist() for i in sources})


def _test_pairs(gold) -> list:
    return list(gold.pairs) if isinstance(gold, GoldStandard) else [tuple(p) for p in gold]


def _gold_ranks(rankings: RankingTable, gold, setting: str) -> np.ndarray:
    if setting not in (RELAXED, PRACTICAL):
        raise InputError(f"unknown setting {setting!r}")
    pairs = _test_pairs(gold)
    missing = sorted({i for i, _ in pairs if i not in rankings.rows})
    if missing:
        raise InputError(f"gold sources missing from rankings: {missing}")
    allowed = {j for _, j in pairs} if setting == RELAXED else None
    ranks = np.empty(len(pairs))
    for k, (i, j) in enumerate(pairs):
        cand = rankings.candidates(i, allowed)
        ranks[k] = cand.index(j) + 1 if j in cand else np.inf
    return ranks


def hits_at_k(rankings: RankingTable, gold, k: int, setting: str = PRACTICAL) -> float:
    ranks = _gold_ranks(rankings, gold, setting)
    return float(np.mean(ranks <= k)) if ranks.size else 0.0


def mrr(rankings: RankingTable, gold, setting: str = PRACTICAL) -> float:
    ranks = _gold_ranks(rankings, gold, setting)
    return float(np.mean(1.0 / ranks)) if ranks.size else 0.0


def matched_hits_at_1(matching, gold) -> float:
    """Fraction of gold pairs reproduced by a discrete matching.

    Sources left unmatched (dangling) count as misses.
    """
    pairs = _test_pairs(gold)
    if not pairs:
        return 0.0
    match = dict(matching.matched)
    return sum(match.get(i) == j for i, j in pairs) / len(pairs)


@dataclass(frozen=True)
class DedPrediction:
    dangling1: frozenset
    dangling2: frozenset

    @classmethod
    def from_solution(cls, sol) -> "DedPrediction":
        return cls(frozenset(sol.dangling1), frozenset(sol.dangling2))


@dataclass(frozen=True)
class DedScore:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @property
    def precision_defined(self) -> bool:
        return self.tp + self.fp > 0

    def to_json(self) -> dict:
        return {"p": self.precision, "r": self.recall, "f1": self.f1, "precision_defined": self.precision_defined}


def confusion_scores(tp: int, fp: int, fn: int) -> DedScore:
    """Dangling is the positive class; an empty prediction gets precision 0."""
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return DedScore(p, r, f1, tp, fp, fn)


def _side(pred: set, truth: set):
    return len(pred & truth), len(pred - truth), len(truth - pred)


def ded_scores(pred: DedPrediction, gold: GoldStandard) -> dict[str, DedScore]:
    """Per-side scores plus the micro-average over both sides."""
    c1 = _side(set(pred.dangling1), set(gold.dangling1))
    c2 = _side(set(pred.dangling2), set(gold.dangling2))
    return {
        "kg1": confusion_scores(*c1),
        "kg2": confusion_scores(*c2),
        "pooled": confusion_scores(*(a + b for a, b in zip(c1, c2))),
    }


def nearest_distances(D) -> tuple[np.ndarray, np.ndarray]:
    """Each source's and each target's distance to its nearest counterpart."""
    if isinstance(D, SparseCostMatrix):
        D = D.to_dense()
    D = np.asarray(D, dtype=float)
    return D.min(axis=1), D.min(axis=0)


def fit_threshold(distances, labels) -> tuple[float, float]:
    """Threshold maximising training F1 of ``dangling = distance > t``.

    Candidates are -inf, the midpoints between consecutive distinct training
    distances, and the largest distance (nothing dangling).  Ties go to the
    smallest threshold.
    """
    d = np.asarray(distances, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if d.size == 0:
        raise InputError("threshold baseline needs labelled training entities")
    u = np.unique(d)
    candidates = np.concatenate([[-np.inf], (u[:-1] + u[1:]) / 2.0, u[-1:]])
    best_t, best_f1 = -np.inf, -1.0
    for t in candidates:
        pred = d > t
        f1 = confusion_scores(int(np.sum(pred & y)), int(np.sum(pred & ~y)), int(np.sum(~pred & y))).f1
        if f1 > best_f1:
            best_t, best_f1 = float(t), f1
    return best_t, best_f1


def distance_threshold_baseline(D, labels1: dict, labels2: dict) -> tuple[DedPrediction, float]:
    """Nearest-distance thresholding tuned on labelled training entities.

    ``labels1``/``labels2`` map training entity ids to ``True`` when dangling.
    Returns the prediction over all entities and the chosen threshold.
    """
    if not labels1 and not labels2:
        raise InputError("distance-threshold baseline requires training dangling labels")
    near1, near2 = nearest_distances(D)
    ids1, ids2 = list(labels1), list(labels2)
    dist = np.concatenate([near1[ids1], near2[ids2]])
    y = [labels1[i] for i in ids1] + [labels2[j] for j in ids2]
    t, _ = fit_threshold(dist, y)
    pred = DedPrediction(frozenset(np.nonzero(near1 > t)[0].tolist()), frozenset(np.nonzero(near2 > t)[0].tolist()))
    return pred, t


def metrics_report(rankings: RankingTable, gold: GoldStandard, pred: DedPrediction, extra: dict | None = None) -> dict:
    report = {
        "hits1_relaxed": hits_at_k(rankings, gold, 1, RELAXED),
        "hits1_practical": hits_at_k(rankings, gold, 1, PRACTICAL),
        "hits10": hits_at_k(rankings, gold, 10, PRACTICAL),
        "mrr": mrr(rankings, gold, PRACTICAL),
        "ded": {k: v.to_json() for k, v in ded_scores(pred, gold).items()},
    }
    report.update(extra or {})
    return report


def write_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_rankings(path) -> RankingTable:
    """``source<TAB>t1 t2 t3 ...`` per line."""
    rows = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            src, _, rest = line.rstrip("\n").partition("\t")
            try:
                rows[int(src)] = [int(t) for t in rest.split()]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    return RankingTable(rows)


def write_rankings(path, rankings: RankingTable, top: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for src in sorted(rankings.rows):
            cand = rankings.rows[src] if top is None else rankings.rows[src][:top]
            fh.write(f"{src}\t{' '.join(map(str, cand))}\n")
