"""Top-K sparse cost construction and virtual-cost grid search."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .costmatrix import DELTA, SparseCostMatrix, VirtualCosts
from .errors import InputError, ShapeError
from .kernels import manhattan_cdist
from .solver import branch_and_cut, build_instance

log = logging.getLogger(__name__)

DEFAULT_K = 100
DEFAULT_K_GRID = 10
DEFAULT_GRID_SIZE = 10


def _matrix(x):
    return getattr(x, "matrix", x)


def char_bigram_counts(names1, names2) -> tuple[np.ndarray, np.ndarray]:
    """Bigram count vectors over a shared vocabulary (lowercased names)."""
    grams1 = [Counter(s[k : k + 2] for k in range(len(s) - 1)) for s in (n.lower() for n in names1)]
    grams2 = [Counter(s[k : k + 2] for k in range(len(s) - 1)) for s in (n.lower() for n in names2)]
    vocab = sorted(set().union(*grams1, *grams2)) if grams1 or grams2 else []
    index = {g: k for k, g in enumerate(vocab)}
    out = []
    for grams in (grams1, grams2):
        M = np.zeros((len(grams), max(1, len(vocab))))
        for r, cnt in enumerate(grams):
            for g, v in cnt.items():
                M[r, index[g]] = v
        out.append(M)
    return out[0], out[1]


def char_distance(names1, names2) -> np.ndarray:
    """L1 distance between bigram count vectors, divided by the names' total length."""
    b1, b2 = char_bigram_counts(names1, names2)
    lengths = np.add.outer([len(s) for s in names1], [len(s) for s in names2]).astype(float)
    return manhattan_cdist(b1, b2) / np.maximum(lengths, 1.0)


def dense_costs(emb1, emb2, char_names=None, char_weight: float = 1.0) -> np.ndarray:
    e1, e2 = _matrix(emb1), _matrix(emb2)
    if e1.shape[1] != e2.shape[1]:
        raise ShapeError(f"embedding dims differ: {e1.shape[1]} vs {e2.shape[1]}")
    D = manhattan_cdist(e1, e2)
    if char_names is not None:
        D = D + char_weight * char_distance(*char_names)
    return D


def topk_union_mask(D: np.ndarray, K: int) -> np.ndarray:
    """Row-wise top-K union column-wise top-K of the smallest entries (ties: lower index)."""
    m, n = D.shape
    mask = np.zeros((m, n), dtype=bool)
    kr, kc = min(K, n), min(K, m)
    if kr > 0:
        cols = np.argsort(D, axis=1, kind="stable")[:, :kr]
        mask[np.arange(m)[:, None], cols] = True
    if kc > 0:
        rows = np.argsort(D, axis=0, kind="stable")[:kc, :]
        mask[rows, np.arange(n)[None, :]] = True
    return mask


def build_cost(emb1, emb2, K: int = DEFAULT_K, char_names=None, char_weight: float = 1.0, delta: float = DELTA) -> SparseCostMatrix:
    """Sparse L1 costs restricted to each side's K cheapest counterparts.

    ``char_names=(names1, names2)`` adds the bigram distance (word+char mode).
    Costs are floored at ``delta`` so identical embeddings still cost > 0.
    """
    if K < 1:
        raise InputError("K must be >= 1")
    D = dense_costs(emb1, emb2, char_names, char_weight)
    return sparsify(D, K, delta)


def sparsify(D: np.ndarray, K: int, delta: float = DELTA) -> SparseCostMatrix:
    m, n = D.shape
    rows, cols = np.nonzero(topk_union_mask(D, K))
    return SparseCostMatrix(m, n, rows, cols, np.maximum(D[rows, cols], delta), K=min(K, max(m, n)))


@dataclass(frozen=True)
class MinCostProfiles:
    """Row minima (``lu``) and column minima (``lv``); ``inf`` marks empty lines."""

    lu: np.ndarray
    lv: np.ndarray

    @property
    def empty_rows(self) -> list[int]:
        return np.nonzero(~np.isfinite(self.lu))[0].tolist()

    @property
    def empty_cols(self) -> list[int]:
        return np.nonzero(~np.isfinite(self.lv))[0].tolist()


def min_cost_profiles(C: SparseCostMatrix) -> MinCostProfiles:
    lu = np.full(C.m, np.inf)
    lv = np.full(C.n, np.inf)
    np.minimum.at(lu, C.rows, C.costs)
    np.minimum.at(lv, C.cols, C.costs)
    prof = MinCostProfiles(lu, lv)
    if prof.empty_rows or prof.empty_cols:
        log.warning("%d rows and %d columns have no cost entries", len(prof.empty_rows), len(prof.empty_cols))
    return prof


def quantile_levels(grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Evenly spaced mid-quantiles, e.g. 0.05, 0.15, ..., 0.95 for 10."""
    return (np.arange(grid_size) + 0.5) / grid_size


@dataclass
class GridSearchResult:
    virtual: VirtualCosts
    alphas: np.ndarray
    betas: np.ndarray
    scores: np.ndarray  # scores[a, b] = Hits@1 on the pseudo pairs
    best_index: tuple[int, int]

    def to_json(self) -> dict:
        return {
            "alpha": self.virtual.alpha,
            "beta": self.virtual.beta,
            "alpha_candidates": self.alphas.tolist(),
            "beta_candidates": self.betas.tolist(),
            "scores": self.scores.tolist(),
            "best_index": list(self.best_index),
        }


def pair_hits(solution, pairs) -> float:
    """Fraction of (i, j) anchors that the solver matched to each other."""
    if not pairs:
        return 0.0
    match = solution.match_of
    return sum(match.get(i) == j for i, j in pairs) / len(pairs)


def candidate_grid(C: SparseCostMatrix, grid_size: int = DEFAULT_GRID_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Alpha candidates from column minima, beta candidates from row minima."""
    prof = min_cost_profiles(C)
    lv = prof.lv[np.isfinite(prof.lv)]
    lu = prof.lu[np.isfinite(prof.lu)]
    if lv.size == 0 or lu.size == 0:
        raise InputError("cost matrix has no entries to take quantiles from")
    levels = quantile_levels(grid_size)
    return np.quantile(lv, levels), np.quantile(lu, levels)


def score_grid(C: SparseCostMatrix, pairs, alphas, betas, solve=branch_and_cut) -> np.ndarray:
    scores = np.zeros((len(alphas), len(betas)))
    for a, alpha in enumerate(alphas):
        for b, beta in enumerate(betas):
            sol = solve(build_instance(C, VirtualCosts(float(alpha), float(beta))))
            scores[a, b] = pair_hits(sol, pairs)
    return scores


def select_cell(scores: np.ndarray) -> tuple[int, int]:
    """Best score; among ties, the cell nearest the grid centre (the median
    quantiles), then the larger alpha, then the larger beta."""
    best = scores.max()
    centre = (scores.shape[0] - 1) / 2.0, (scores.shape[1] - 1) / 2.0
    tied = np.argwhere(scores >= best - 1e-12)
    key = [(abs(a - centre[0]) + abs(b - centre[1]), -a, -b) for a, b in tied]
    k = min(range(len(key)), key=key.__getitem__)
    return int(tied[k][0]), int(tied[k][1])


def grid_search_virtual_costs(
    C_small: SparseCostMatrix,
    pairs,
    grid_size: int = DEFAULT_GRID_SIZE,
    solve=branch_and_cut,
) -> GridSearchResult:
    """Pick (alpha, beta) from paired quantiles of the min-cost profiles by
    Hits@1 of the solver on the pseudo pairs."""
    alphas, betas = candidate_grid(C_small, grid_size)
    pairs = list(pairs)
    if not pairs:
        log.warning("no pseudo pairs: falling back to the median quantile cell")
        a, b = select_cell(np.zeros((len(alphas), len(betas))))
        return GridSearchResult(VirtualCosts(float(alphas[a]), float(betas[b])), alphas, betas, np.zeros((len(alphas), len(betas))), (a, b))
    scores = score_grid(C_small, pairs, alphas, betas, solve)
    a, b = select_cell(scores)
    return GridSearchResult(VirtualCosts(float(alphas[a]), float(betas[b])), alphas, betas, scores, (a, b))
