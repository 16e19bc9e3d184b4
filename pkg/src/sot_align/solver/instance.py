"""Semi-constraint OT instances and their integral solutions."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..costmatrix import SparseCostMatrix, VirtualCosts
from .lp import LpProblem


@dataclass(frozen=True, eq=False)
class SotInstance:
    """One binary variable per sparse entry, then psi_{i,0} (i < m), then psi_{0,j} (j < n).

    Row i reads ``psi_{i,0} + sum_j psi_ij = 1`` and column j reads
    ``psi_{0,j} + sum_i psi_ij = 1``; there is no psi_{0,0}.
    """

    cost: SparseCostMatrix
    virtual: VirtualCosts

    @property
    def m(self) -> int:
        return self.cost.m

    @property
    def n(self) -> int:
        return self.cost.n

    @property
    def num_vars(self) -> int:
        return self.cost.nnz + self.m + self.n

    def row_virtual(self, i: int) -> int:
        return self.cost.nnz + i

    def col_virtual(self, j: int) -> int:
        return self.cost.nnz + self.m + j

    def objective_vector(self) -> np.ndarray:
        return np.concatenate([
            self.cost.costs,
            np.full(self.m, self.virtual.beta),
            np.full(self.n, self.virtual.alpha),
        ])

    def to_lp(self) -> LpProblem:
        nnz, m, n = self.cost.nnz, self.m, self.n
        var = np.arange(self.num_vars)
        row_of = np.concatenate([self.cost.rows, np.arange(m), np.full(n, -1)])
        col_of = np.concatenate([self.cost.cols, np.full(m, -1), np.arange(n)])
        r1 = row_of >= 0
        r2 = col_of >= 0
        A = sp.csr_matrix(
            (np.ones(r1.sum() + r2.sum()),
             (np.concatenate([row_of[r1], m + col_of[r2]]), np.concatenate([var[r1], var[r2]]))),
            shape=(m + n, self.num_vars),
        )
        return LpProblem(
            c=self.objective_vector(),
            A=A,
            b=np.ones(m + n),
            senses=("=",) * (m + n),
            lb=np.zeros(self.num_vars),
            ub=np.ones(self.num_vars),
            integer=np.ones(self.num_vars, dtype=bool),
        )

    def decode(self, x) -> tuple[list, list, list]:
        x = np.asarray(x)
        nnz, m = self.cost.nnz, self.m
        on = np.rint(x).astype(np.int64) == 1
        ks = np.nonzero(on[:nnz])[0]
        matched = list(zip(self.cost.rows[ks].tolist(), self.cost.cols[ks].tolist()))
        d1 = np.nonzero(on[nnz : nnz + m])[0].tolist()
        d2 = np.nonzero(on[nnz + m :])[0].tolist()
        return matched, d1, d2

    def objective(self, matched, dangling1, dangling2) -> float:
        if matched:
            i, j = np.asarray(matched, dtype=np.int64).T
            costs = self.cost.lookup(i, j).tolist()
        else:
            costs = []
        return assignment_objective(costs, len(dangling1), len(dangling2), self.virtual.alpha, self.virtual.beta)


def assignment_objective(matched_costs, n_dangling1, n_dangling2, alpha, beta) -> float:
    """Exactly rounded objective, independent of summation order."""
    return math.fsum(list(matched_costs) + [beta] * n_dangling1 + [alpha] * n_dangling2)


def build_instance(cost: SparseCostMatrix, virtual: VirtualCosts) -> SotInstance:
    return SotInstance(cost, virtual)


@dataclass
class AssignmentSolution:
    matched: list
    dangling1: list
    dangling2: list
    objective: float
    node_count: int = 0
    status: str = "optimal"
    root_integral: bool | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        return {
            "matched": [[int(i), int(j)] for i, j in self.matched],
            "dangling1": [int(i) for i in self.dangling1],
            "dangling2": [int(j) for j in self.dangling2],
            "objective": float(self.objective),
            "node_count": int(self.node_count),
            "status": self.status,
        }

    @classmethod
    def from_json(cls, data: dict) -> "AssignmentSolution":
        return cls(
            [tuple(p) for p in data["matched"]],
            list(data["dangling1"]),
            list(data["dangling2"]),
            float(data["objective"]),
            int(data.get("node_count", 0)),
            data.get("status", "optimal"),
        )

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "AssignmentSolution":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    @property
    def match_of(self) -> dict:
        return dict(self.matched)


def partition_violations(sol: AssignmentSolution, m: int, n: int) -> list[str]:
    """Empty when every real entity appears exactly once among matched + dangling."""
    problems = []
    left = [i for i, _ in sol.matched] + list(sol.dangling1)
    right = [j for _, j in sol.matched] + list(sol.dangling2)
    if sorted(left) != list(range(m)):
        problems.append("KG1 side is not partitioned by matched + dangling1")
    if sorted(right) != list(range(n)):
        problems.append("KG2 side is not partitioned by matched + dangling2")
    return problems
