"""Greedy and deferred-acceptance matchers, and an exhaustive oracle."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..costmatrix import SparseCostMatrix
from .instance import AssignmentSolution, assignment_objective

ORACLE_MAX_SIDE = 8


@dataclass
class Matching:
    """A matching without virtual-entity semantics (may be non-injective for greedy)."""

    matched: list
    unmatched1: list
    unmatched2: list

    @property
    def match_of(self) -> dict:
        return dict(self.matched)


def _row_slices(C: SparseCostMatrix):
    bounds = np.searchsorted(C.rows, np.arange(C.m + 1))
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(C.m)]


def greedy_match(C: SparseCostMatrix) -> Matching:
    """Each source entity takes its cheapest present target (ties: smaller j).

    Injectivity is not enforced, and nothing is declared dangling.
    """
    matched, unmatched1 = [], []
    for i, (a, b) in enumerate(_row_slices(C)):
        if a == b:
            unmatched1.append(i)
            continue
        k = a + int(np.argmin(C.costs[a:b]))
        matched.append((i, int(C.cols[k])))
    used = {j for _, j in matched}
    return Matching(matched, unmatched1, [j for j in range(C.n) if j not in used])


def injective_completion(greedy: Matching, C: SparseCostMatrix, alpha: float, beta: float) -> AssignmentSolution:
    """Make a greedy matching feasible for the semi-constraint OT.

    Each contested target keeps its cheapest claimant; losers and unmatched
    entities go to the virtual sinks.
    """
    best: dict[int, tuple[float, int]] = {}
    for i, j in greedy.matched:
        c = float(C.lookup(i, j))
        if j not in best or (c, i) < best[j]:
            best[j] = (c, i)
    matched = sorted((i, j) for j, (_, i) in best.items())
    left = {i for i, _ in matched}
    right = {j for _, j in matched}
    d1 = [i for i in range(C.m) if i not in left]
    d2 = [j for j in range(C.n) if j not in right]
    costs = [c for c, _ in best.values()]
    return AssignmentSolution(matched, d1, d2, assignment_objective(costs, len(d1), len(d2), alpha, beta))


def daa_match(C: SparseCostMatrix) -> Matching:
    """Source-proposing Gale-Shapley; both sides prefer lower cost.

    Only present sparse entries are acceptable.  Ties in preference go to
    the smaller index.
    """
    prefs = []
    for a, b in _row_slices(C):
        order = np.lexsort((C.cols[a:b], C.costs[a:b]))
        prefs.append(C.cols[a:b][order].tolist())
    rank = [dict() for _ in range(C.n)]
    for i, j, c in zip(C.rows.tolist(), C.cols.tolist(), C.costs.tolist()):
        rank[j][i] = (c, i)

    nxt = [0] * C.m
    holder = [-1] * C.n
    free = deque(range(C.m))
    while free:
        i = free.popleft()
        if nxt[i] >= len(prefs[i]):
            continue
        j = prefs[i][nxt[i]]
        nxt[i] += 1
        cur = holder[j]
        if cur == -1:
            holder[j] = i
        elif rank[j][i] < rank[j][cur]:
            holder[j] = i
            free.append(cur)
        else:
            free.append(i)
    matched = sorted((i, j) for j, i in enumerate(holder) if i != -1)
    left = {i for i, _ in matched}
    return Matching(matched, [i for i in range(C.m) if i not in left], [j for j in range(C.n) if holder[j] == -1])


def blocking_pairs(C: SparseCostMatrix, matching: Matching) -> list[tuple[int, int]]:
    """Exhaustive stability check: pairs that both prefer each other to their partners."""
    dense = C.to_dense()
    m_of = matching.match_of
    w_of = {j: i for i, j in matching.matched}
    out = []
    for i, j in zip(C.rows.tolist(), C.cols.tolist()):
        if m_of.get(i) == j:
            continue
        c = dense[i, j]
        i_wants = i not in m_of or (c, j) < (dense[i, m_of[i]], m_of[i])
        j_wants = j not in w_of or (c, i) < (dense[w_of[j], j], w_of[j])
        if i_wants and j_wants:
            out.append((i, j))
    return out


def brute_force_oracle(dense, alpha: float, beta: float) -> AssignmentSolution:
    """Enumerate every partial injective matching (absent arcs = ``inf``).

    Refuses sides larger than 8; the enumeration is exponential.
    """
    D = np.asarray(dense, dtype=float)
    m, n = D.shape
    if m > ORACLE_MAX_SIDE or n > ORACLE_MAX_SIDE:
        raise ValueError(f"oracle is capped at {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE}, got {m}x{n}")
    best_val = m * beta + n * alpha
    best = ((), ())
    for k in range(1, min(m, n) + 1):
        perms = np.array(list(itertools.permutations(range(n), k)), dtype=np.int64)
        base = (m - k) * beta + (n - k) * alpha
        for rows in itertools.combinations(range(m), k):
            totals = D[np.array(rows)[None, :], perms].sum(axis=1) + base
            p = int(np.argmin(totals))
            if totals[p] < best_val:
                best_val = float(totals[p])
                best = (rows, tuple(perms[p].tolist()))
    rows, cols = best
    matched = sorted(zip(rows, cols))
    d1 = [i for i in range(m) if i not in rows]
    d2 = [j for j in range(n) if j not in cols]
    obj = assignment_objective([D[i, j] for i, j in matched], len(d1), len(d2), alpha, beta)
    return AssignmentSolution(matched, d1, d2, obj)
