"""Linear programs and a dense two-phase primal simplex."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ..errors import ShapeError

SENSES = ("=", "<=", ">=")


@dataclass(frozen=True)
class LpProblem:
    """``min c.x`` subject to ``A x (sense) b`` and ``lb <= x <= ub``.

    ``integer`` flags the variables that branch-and-cut must make integral.
    """

    c: np.ndarray
    A: object
    b: np.ndarray
    senses: tuple = None
    lb: np.ndarray = None
    ub: np.ndarray = None
    integer: np.ndarray = None
    names: tuple = field(default=None, compare=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = self.A if sp.issparse(self.A) else np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] == 0:
            A = np.zeros((0, c.shape[0]))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        n = c.shape[0]
        if A.shape[1] != n:
            raise ShapeError(f"A has {A.shape[1]} columns but c has {n} entries")
        if b.shape[0] != A.shape[0]:
            raise ShapeError(f"b has {b.shape[0]} entries but A has {A.shape[0]} rows")
        senses = tuple(self.senses) if self.senses is not None else ("=",) * A.shape[0]
        if len(senses) != A.shape[0] or any(s not in SENSES for s in senses):
            raise ShapeError("one sense from {'=', '<=', '>='} is required per row")
        lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).copy()
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).copy()
        integer = np.zeros(n, dtype=bool) if self.integer is None else np.asarray(self.integer, dtype=bool)
        if lb.shape != (n,) or ub.shape != (n,) or integer.shape != (n,):
            raise ShapeError("bounds and integrality flags need one entry per variable")
        for name, value in (("c", c), ("A", A), ("b", b), ("senses", senses), ("lb", lb), ("ub", ub), ("integer", integer)):
            object.__setattr__(self, name, value)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def dense_A(self) -> np.ndarray:
        return self.A.toarray() if sp.issparse(self.A) else self.A

    def with_bounds(self, lb, ub) -> "LpProblem":
        return replace(self, lb=lb, ub=ub)

    def with_rows(self, rows, rhs, senses) -> "LpProblem":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return replace(
            self,
            A=np.vstack([self.dense_A(), rows]),
            b=np.concatenate([self.b, np.asarray(rhs, dtype=float)]),
            senses=self.senses + tuple(senses),
        )


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    value: float = np.nan
    x: np.ndarray = None
    iterations: int = 0


class _Tableau:
    """Dense tableau; the last row holds reduced costs, the last column the rhs."""

    def __init__(self, T, basis, tol, bland, degenerate_limit, max_iter):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.force_bland = bland
        self.degenerate_limit = degenerate_limit
        self.max_iter = max_iter
        self.iterations = 0

    def pivot(self, r, col):
        T = self.T
        T[r] /= T[r, col]
        for k in range(T.shape[0]):
            if k != r and T[k, col] != 0.0:
                T[k] -= T[k, col] * T[r]
        self.basis[r] = col

    def run(self, allowed):
        """Iterate to optimality over the columns in ``allowed``; returns a status."""
        T, tol = self.T, self.tol
        degenerate = 0
        bland = self.force_bland
        while True:
            if self.iterations >= self.max_iter:
                return "iteration_limit"
            red = T[-1, :-1]
            cand = allowed[red[allowed] < -tol]
            if cand.size == 0:
                return "optimal"
            col = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
            column = T[:-1, col]
            rows = np.nonzero(column > tol)[0]
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol]
            r = int(ties[np.argmin(self.basis[ties])])
            self.pivot(r, col)
            self.iterations += 1
            degenerate = degenerate + 1 if best <= tol else 0
            if degenerate > self.degenerate_limit:
                bland = True


def simplex_solve(
    lp: LpProblem,
    *,
    bland: bool = False,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    degenerate_limit: int = 50,
) -> LpResult:
    """Solve the LP relaxation of ``lp`` (integrality flags are ignored).

    Dantzig pricing by default; after ``degenerate_limit`` consecutive
    degenerate pivots (or always, with ``bland=True``) it switches to
    Bland's rule, which cannot cycle.
    """
    n = lp.num_vars
    lb, ub = lp.lb, lp.ub
    if np.any(~np.isfinite(lb)):
        raise ValueError("simplex_solve requires finite lower bounds")
    if np.any(lb > ub + tol):
        return LpResult("infeasible")

    A = lp.dense_A()
    b = lp.b - A @ lb
    senses = list(lp.senses)
    span = ub - lb
    bounded = np.nonzero(np.isfinite(span))[0]
    if bounded.size:
        extra = np.zeros((bounded.size, n))
        extra[np.arange(bounded.size), bounded] = 1.0
        A = np.vstack([A, extra])
        b = np.concatenate([b, span[bounded]])
        senses += ["<="] * bounded.size

    rows = A.shape[0]
    A = A.copy()
    for r in range(rows):
        if b[r] < 0:
            A[r] *= -1
            b[r] *= -1
            senses[r] = {"=": "=", "<=": ">=", ">=": "<="}[senses[r]]

    n_slack = sum(s != "=" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    ncols = n + n_slack + n_art
    T = np.zeros((rows + 1, ncols + 1))
    T[:rows, :n] = A
    T[:rows, -1] = b
    basis = np.empty(rows, dtype=np.int64)
    s_col, a_col = n, n + n_slack
    art_cols = []
    for r, sense in enumerate(senses):
        if sense == "<=":
            T[r, s_col] = 1.0
            basis[r] = s_col
            s_col += 1
            continue
        if sense == ">=":
            T[r, s_col] = -1.0
            s_col += 1
        T[r, a_col] = 1.0
        basis[r] = a_col
        art_cols.append(a_col)
        a_col += 1

    tab = _Tableau(T, basis, tol, bland, degenerate_limit, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))

    if art_cols:
        T[-1, art_cols] = 1.0
        for r in range(rows):
            if basis[r] >= n + n_slack:
                T[-1] -= T[r]
        status = tab.run(np.arange(ncols))
        if status != "optimal":
            return LpResult(status, iterations=tab.iterations)
        if -T[-1, -1] > 1e-7 * scale:
            return LpResult("infeasible", iterations=tab.iterations)
        keep = []
        for r in range(rows):
            if basis[r] >= n + n_slack:
                nz = np.nonzero(np.abs(T[r, : n + n_slack]) > tol)[0]
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                    keep.append(r)
            else:
                keep.append(r)
        T = np.vstack([T[keep][:, list(range(n + n_slack)) + [ncols]], np.zeros((1, n + n_slack + 1))])
        tab.T = T
        tab.basis = basis[keep]
        ncols = n + n_slack

    cost = np.zeros(ncols)
    cost[:n] = lp.c
    T = tab.T
    T[-1, :] = 0.0
    T[-1, :ncols] = cost
    for r in range(T.shape[0] - 1):
        cb = cost[tab.basis[r]]
        if cb != 0.0:
            T[-1] -= cb * T[r]
    status = tab.run(np.arange(ncols))
    if status != "optimal":
        return LpResult(status, iterations=tab.iterations)

    y = np.zeros(ncols)
    y[tab.basis] = T[:-1, -1]
    x = lb + y[:n]
    return LpResult("optimal", float(lp.c @ x), x, tab.iterations)


def write_mps(lp: LpProblem, path, name: str = "SOT") -> None:
    """Free-format MPS export (ROWS/COLUMNS/RHS/BOUNDS) for external cross-checks."""
    A = sp.csc_matrix(lp.A) if not sp.isspmatrix_csc(lp.A) else lp.A
    tag = {"=": "E", "<=": "L", ">=": "G"}
    lines = [f"NAME {name}", "ROWS", " N obj"]
    lines += [f" {tag[s]} r{r}" for r, s in enumerate(lp.senses)]
    lines.append("COLUMNS")
    in_int = False
    for k in range(lp.num_vars):
        if lp.integer[k] and not in_int:
            lines.append(" MARKER 'MARKER' 'INTORG'")
            in_int = True
        elif not lp.integer[k] and in_int:
            lines.append(" MARKER 'MARKER' 'INTEND'")
            in_int = False
        lines.append(f" x{k} obj {float(lp.c[k])!r}")
        col = A.getcol(k)
        for r, v in zip(col.indices, col.data):
            lines.append(f" x{k} r{r} {float(v)!r}")
    if in_int:
        lines.append(" MARKER 'MARKER' 'INTEND'")
    lines.append("RHS")
    lines += [f" rhs r{r} {float(v)!r}" for r, v in enumerate(lp.b) if v != 0.0]
    lines.append("BOUNDS")
    for k in range(lp.num_vars):
        if lp.lb[k] != 0.0:
            lines.append(f" LO bnd x{k} {float(lp.lb[k])!r}")
        if np.isfinite(lp.ub[k]):
            lines.append(f" UP bnd x{k} {float(lp.ub[k])!r}")
    lines.append("ENDATA")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path) -> LpProblem:
    """Read back the subset of free MPS that :func:`write_mps` produces."""
    section = None
    row_index, senses = {}, []
    cols: dict[str, int] = {}
    c, entries, integer = [], [], []
    rhs, lb, ub = {}, {}, {}
    in_int = False
    inv = {"E": "=", "L": "<=", "G": ">="}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            if not raw.startswith(" "):
                section = raw.split()[0]
                continue
            tok = raw.split()
            if section == "ROWS":
                if tok[0] != "N":
                    row_index[tok[1]] = len(senses)
                    senses.append(inv[tok[0]])
            elif section == "COLUMNS":
                if tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                if tok[0] not in cols:
                    cols[tok[0]] = len(cols)
                    c.append(0.0)
                    integer.append(in_int)
                k = cols[tok[0]]
                for rname, val in zip(tok[1::2], tok[2::2]):
                    if rname == "obj":
                        c[k] = float(val)
                    else:
                        entries.append((row_index[rname], k, float(val)))
            elif section == "RHS":
                for rname, val in zip(tok[1::2], tok[2::2]):
                    rhs[row_index[rname]] = float(val)
            elif section == "BOUNDS":
                target = lb if tok[0] == "LO" else ub
                target[cols[tok[2]]] = float(tok[3])
    n, m = len(c), len(senses)
    A = np.zeros((m, n))
    for r, k, v in entries:
        A[r, k] = v
    return LpProblem(
        c=np.array(c),
        A=A,
        b=np.array([rhs.get(r, 0.0) for r in range(m)]),
        senses=tuple(senses),
        lb=np.array([lb.get(k, 0.0) for k in range(n)]),
        ub=np.array([ub.get(k, np.inf) for k in range(n)]),
        integer=np.array(integer, dtype=bool),
    )
