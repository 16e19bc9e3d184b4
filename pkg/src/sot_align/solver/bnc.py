"""LP-based branch-and-cut.

The search keeps a list of active subproblems, an incumbent upper bound and
per-node lower bounds.  Each node's LP relaxation comes from a relaxation
object; fractional integer variables are split into two children.  Cutting
planes enter through an optional hook (none by default: the semi-constraint
OT relaxation is already integral).
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .instance import AssignmentSolution, SotInstance
from .lp import LpProblem, LpResult, simplex_solve
from .network import min_cost_flow

log = logging.getLogger(__name__)

DEFAULT_NODE_BUDGET = 10**6
INT_TOL = 1e-6


@dataclass
class MipNode:
    bound: float
    depth: int = 0
    parent: "MipNode | None" = field(default=None, repr=False)
    branch_var: int | None = None
    branch: tuple | None = None  # ("ub", floor) or ("lb", ceil)
    cuts: list = field(default_factory=list)

    def bounds(self, lb0: np.ndarray, ub0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lb, ub = lb0.copy(), ub0.copy()
        chain = []
        node = self
        while node is not None:
            chain.append(node)
            node = node.parent
        for node in reversed(chain):
            if node.branch_var is None:
                continue
            side, value = node.branch
            if side == "ub":
                ub[node.branch_var] = min(ub[node.branch_var], value)
            else:
                lb[node.branch_var] = max(lb[node.branch_var], value)
        return lb, ub

    def all_cuts(self) -> list:
        out = []
        node = self
        while node is not None:
            out = node.cuts + out
            node = node.parent
        return out


@dataclass
class MipResult:
    status: str  # optimal | infeasible | unbounded | node_budget
    x: np.ndarray | None
    objective: float
    node_count: int
    root: LpResult | None = None

    def root_integral(self, integer: np.ndarray, tol: float = INT_TOL) -> bool:
        if self.root is None or self.root.x is None:
            return False
        v = self.root.x[integer]
        return bool(np.all(np.abs(v - np.rint(v)) <= tol))


class DenseRelaxation:
    """Node LPs solved with the dense tableau simplex; supports cuts."""

    supports_cuts = True

    def __init__(self, lp: LpProblem, **simplex_kwargs):
        self.lp = lp
        self.kwargs = simplex_kwargs

    def solve(self, lb, ub, cuts) -> LpResult:
        lp = self.lp.with_bounds(lb, ub)
        if cuts:
            rows, rhs, senses = zip(*cuts)
            lp = lp.with_rows(np.vstack(rows), rhs, senses)
        return simplex_solve(lp, **self.kwargs)


class NetworkRelaxation:
    """Node LPs of a semi-constraint OT instance solved by network simplex.

    Variables fixed to one remove their row/column (and add their cost);
    variables fixed to zero drop their arc.  Both virtual entities share one
    hub node: unmatched rows flow into it, unmatched columns draw from it,
    and its demand m - n balances the two counts.  The hub is the tree root.
    """

    supports_cuts = False

    def __init__(self, instance: SotInstance):
        self.inst = instance

    def solve(self, lb, ub, cuts) -> LpResult:
        if cuts:
            raise ValueError("network relaxation does not accept cutting planes")
        inst = self.inst
        C = inst.cost
        nnz, m, n = C.nnz, inst.m, inst.n
        if np.any(lb > ub):
            return LpResult("infeasible")
        obj = inst.objective_vector()
        ones = np.nonzero(lb > 0.5)[0]
        row_of = np.concatenate([C.rows, np.arange(m), np.full(n, -1)])
        col_of = np.concatenate([C.cols, np.full(m, -1), np.arange(n)])
        r_fixed = row_of[ones][row_of[ones] >= 0]
        c_fixed = col_of[ones][col_of[ones] >= 0]
        if len(np.unique(r_fixed)) != len(r_fixed) or len(np.unique(c_fixed)) != len(c_fixed):
            return LpResult("infeasible")
        row_active = np.ones(m, dtype=bool)
        col_active = np.ones(n, dtype=bool)
        row_active[r_fixed] = False
        col_active[c_fixed] = False
        row_node = np.cumsum(row_active) - 1
        m_act = int(row_active.sum())
        col_node = m_act + np.cumsum(col_active) - 1
        n_act = int(col_active.sum())
        hub = m_act + n_act

        open_ = ub > 0.5
        k_real = np.nonzero(open_[:nnz] & row_active[C.rows] & col_active[C.cols])[0]
        k_row = np.nonzero(open_[nnz : nnz + m] & row_active)[0]
        k_col = np.nonzero(open_[nnz + m :] & col_active)[0]
        src = np.concatenate([row_node[C.rows[k_real]], row_node[k_row], np.full(k_col.size, hub)])
        dst = np.concatenate([col_node[C.cols[k_real]], np.full(k_row.size, hub), col_node[k_col]])
        var = np.concatenate([k_real, nnz + k_row, nnz + m + k_col])
        demand = np.concatenate([-np.ones(m_act), np.ones(n_act), [m_act - n_act]]).astype(np.int64)

        status, flow, _, pivots = min_cost_flow(hub + 1, src, dst, obj[var], demand, root=hub)
        if status != "optimal":
            return LpResult(status, iterations=pivots)
        x = np.zeros(inst.num_vars)
        x[ones] = 1.0
        x[var] = flow
        return LpResult("optimal", math.fsum((obj * x).tolist()), x, pivots)


def _integral(x, integer, tol):
    v = x[integer]
    return bool(np.all(np.abs(v - np.rint(v)) <= tol))


def _branch_variable(x, integer, tol):
    idx = np.nonzero(integer)[0]
    frac = x[idx] - np.floor(x[idx])
    cand = np.abs(frac - np.rint(frac)) > tol
    if not cand.any():
        return None
    score = np.abs(frac - 0.5)
    score[~cand] = np.inf
    return int(idx[int(np.argmin(score))])


def run_branch_and_cut(
    relaxation,
    lb0: np.ndarray,
    ub0: np.ndarray,
    integer: np.ndarray,
    *,
    cut_hook: Callable | None = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
    int_tol: float = INT_TOL,
    incumbent: tuple[float, np.ndarray] | None = None,
) -> MipResult:
    """Generic search over a relaxation object exposing ``solve(lb, ub, cuts)``.

    ``cut_hook(x, node)`` may return a list of ``(row, rhs, sense)`` cuts
    violated by the relaxed point ``x``; the node is then re-solved with them.
    Node selection is depth-first with best-bound tie-break; branching picks
    the most fractional variable (lowest index on ties).
    """
    lb0 = np.asarray(lb0, dtype=float)
    ub0 = np.asarray(ub0, dtype=float)
    integer = np.asarray(integer, dtype=bool)
    z_bar, best_x = (math.inf, None) if incumbent is None else incumbent
    seq = itertools.count()
    active = [(0, -math.inf, next(seq), MipNode(-math.inf))]
    nodes = 0
    root_result = None

    while active:
        if nodes >= node_budget:
            log.warning("branch-and-cut node budget %d exhausted", node_budget)
            return MipResult("node_budget", best_x, z_bar, nodes, root_result)
        _, _, _, node = heapq.heappop(active)
        nodes += 1
        lb, ub = node.bounds(lb0, ub0)

        while True:
            res = relaxation.solve(lb, ub, node.all_cuts())
            if res.status == "unbounded":
                return MipResult("unbounded", None, -math.inf, nodes, root_result or res)
            if res.status != "optimal":
                z = math.inf
                break
            z = res.value
            if cut_hook is None or not relaxation.supports_cuts:
                break
            new_cuts = cut_hook(res.x, node) or []
            if not new_cuts:
                break
            node.cuts.extend(new_cuts)

        if root_result is None:
            root_result = res

        slack = 1e-9 * max(1.0, abs(z_bar)) if math.isfinite(z_bar) else 0.0
        if z >= z_bar - slack:
            continue
        if _integral(res.x, integer, int_tol):
            z_bar = z
            best_x = res.x.copy()
            best_x[integer] = np.rint(best_x[integer])
            active = [item for item in active if item[1] < z_bar]
            heapq.heapify(active)
            continue
        k = _branch_variable(res.x, integer, int_tol)
        v = res.x[k]
        for branch in (("lb", math.ceil(v)), ("ub", math.floor(v))):
            child = MipNode(z, node.depth + 1, node, k, branch)
            heapq.heappush(active, (-child.depth, z, next(seq), child))

    if best_x is None:
        return MipResult("infeasible", None, math.inf, nodes, root_result)
    return MipResult("optimal", best_x, z_bar, nodes, root_result)


def solve_mip(lp: LpProblem, *, cut_hook=None, node_budget=DEFAULT_NODE_BUDGET, int_tol=INT_TOL, **simplex_kwargs) -> MipResult:
    """Branch-and-cut on a general LP with integrality flags, via the dense simplex."""
    return run_branch_and_cut(
        DenseRelaxation(lp, **simplex_kwargs), lp.lb, lp.ub, lp.integer,
        cut_hook=cut_hook, node_budget=node_budget, int_tol=int_tol,
    )


def branch_and_cut(
    instance: SotInstance,
    *,
    backend: str = "network",
    node_budget: int = DEFAULT_NODE_BUDGET,
    cut_hook=None,
    int_tol: float = INT_TOL,
) -> AssignmentSolution:
    """Globally optimal integral solution of a semi-constraint OT instance.

    ``backend="network"`` solves node relaxations with network simplex;
    ``backend="dense"`` builds the explicit LP and uses the tableau simplex
    (small instances only).
    """
    if backend == "network":
        relax = NetworkRelaxation(instance)
        lb, ub = np.zeros(instance.num_vars), np.ones(instance.num_vars)
    elif backend == "dense":
        lp = instance.to_lp()
        relax = DenseRelaxation(lp)
        lb, ub = lp.lb, lp.ub
    else:
        raise ValueError(f"unknown backend {backend!r}")
    integer = np.ones(instance.num_vars, dtype=bool)
    res = run_branch_and_cut(relax, lb, ub, integer, cut_hook=cut_hook, node_budget=node_budget, int_tol=int_tol)

    x = res.x
    status = res.status
    if x is None:
        # only reachable on budget exhaustion: every entity to its virtual sink is feasible
        x = np.zeros(instance.num_vars)
        x[instance.cost.nnz :] = 1.0
        status = "node_budget"
    matched, d1, d2 = instance.decode(x)
    return AssignmentSolution(
        matched=matched,
        dangling1=d1,
        dangling2=d2,
        objective=instance.objective(matched, d1, d2),
        node_count=res.node_count,
        status=status,
        root_integral=res.root_integral(integer, int_tol),
    )
