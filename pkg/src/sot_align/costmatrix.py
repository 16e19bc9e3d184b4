"""Sparse cross-KG cost matrix and virtual-entity costs."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError, ShapeError

DELTA = 1e-9


@dataclass(frozen=True)
class VirtualCosts:
    """``alpha`` prices v_j -> u_0 (dangling in KG2), ``beta`` prices u_i -> v_0."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InputError(f"virtual costs must be positive, got alpha={self.alpha}, beta={self.beta}")


@dataclass(frozen=True, eq=False)
class SparseCostMatrix:
    """COO entries sorted by (row, col); every stored cost is > 0."""

    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    costs: np.ndarray
    K: int | None = None

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        costs = np.ascontiguousarray(self.costs, dtype=np.float64)
        if not (rows.shape == cols.shape == costs.shape) or rows.ndim != 1:
            raise ShapeError("rows, cols and costs must be 1-D arrays of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.m or cols.min() < 0 or cols.max() >= self.n:
                raise ShapeError("entry index out of range")
            key = rows * self.n + cols
            if np.any(np.diff(key) <= 0):
                order = np.argsort(key, kind="stable")
                rows, cols, costs, key = rows[order], cols[order], costs[order], key[order]
                if np.any(np.diff(key) == 0):
                    raise InputError("duplicate (i, j) entry in cost matrix")
            if not np.all(costs > 0) or not np.all(np.isfinite(costs)):
                raise InputError("stored costs must be finite and strictly positive")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "costs", costs)

    @property
    def nnz(self) -> int:
        return self.costs.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.m, self.n

    @classmethod
    def from_dense(cls, dense, K=None) -> "SparseCostMatrix":
        """Entries where ``dense`` is finite (use ``np.inf`` for absent arcs)."""
        dense = np.asarray(dense, dtype=float)
        rows, cols = np.nonzero(np.isfinite(dense))
        return cls(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols], K)

    def to_dense(self, fill=np.inf) -> np.ndarray:
        out = np.full((self.m, self.n), fill, dtype=float)
        out[self.rows, self.cols] = self.costs
        return out

    def lookup(self, i, j) -> np.ndarray:
        """Costs of the given (i, j) entries; raises if any is absent."""
        key = np.asarray(i, dtype=np.int64) * self.n + np.asarray(j, dtype=np.int64)
        all_keys = self.rows * self.n + self.cols
        pos = np.searchsorted(all_keys, key)
        pos_c = np.minimum(pos, max(0, self.nnz - 1))
        if self.nnz == 0 or np.any(all_keys[pos_c] != key):
            raise KeyError("pair not present in the sparse cost matrix")
        return self.costs[pos_c]

    def scaled(self, s: float) -> "SparseCostMatrix":
        return SparseCostMatrix(self.m, self.n, self.rows, self.cols, self.costs * s, self.K)

    def write(self, path, alpha=None, beta=None, delta=DELTA) -> None:
        """``i<TAB>j<TAB>cost`` lines plus a ``.json`` sidecar with the shape metadata."""
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, j, c in zip(self.rows.tolist(), self.cols.tolist(), self.costs.tolist()):
                fh.write(f"{i}\t{j}\t{c!r}\n")
        meta = {"m": self.m, "n": self.n, "K": self.K, "alpha": alpha, "beta": beta, "delta": delta}
        with open(sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> tuple["SparseCostMatrix", dict]:
        path = Path(path)
        with open(sidecar_path(path), encoding="utf-8") as fh:
            meta = json.load(fh)
        rows, cols, costs = [], [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(path, lineno, "expected i<TAB>j<TAB>cost")
                try:
                    rows.append(int(parts[0]))
                    cols.append(int(parts[1]))
                    costs.append(float(parts[2]))
                except ValueError as exc:
                    raise ParseError(path, lineno, str(exc)) from None
        return cls(int(meta["m"]), int(meta["n"]), np.array(rows, dtype=np.int64),
                   np.array(cols, dtype=np.int64), np.array(costs), meta.get("K")), meta


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")
