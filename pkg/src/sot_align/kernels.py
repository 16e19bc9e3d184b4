"""Hot numeric kernels.

Each kernel has a loop version compiled with numba and a vectorised numpy
version; the public wrappers pick one according to ``_accel.USE_NUMBA``.
Both versions are importable directly for parity tests and benchmarks.
"""
import numpy as np

from . import _accel
from ._accel import jit
from .errors import ShapeError

# Rows per numpy block are chosen so one block stays around this many floats.
_BLOCK_FLOATS = 4_000_000


@jit
def cdist_manhattan_nb(a, b):
    m, d = a.shape
    n = b.shape[0]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for k in range(d):
                s += abs(a[i, k] - b[j, k])
            out[i, j] = s
    return out


def cdist_manhattan_np(a, b):
    m, d = a.shape
    n = b.shape[0]
    out = np.empty((m, n))
    step = max(1, _BLOCK_FLOATS // max(1, n * d))
    for i0 in range(0, m, step):
        out[i0 : i0 + step] = np.abs(a[i0 : i0 + step, None, :] - b[None, :, :]).sum(axis=2)
    return out


def manhattan_cdist(a, b) -> np.ndarray:
    """All-pairs L1 distances between the rows of ``a`` and ``b``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}")
    if _accel.USE_NUMBA:
        return cdist_manhattan_nb(a, b)
    return cdist_manhattan_np(a, b)


@jit
def knn_manhattan_nb(e, k):
    n, d = e.shape
    out = np.empty((n, k), dtype=np.int64)
    row = np.empty(n)
    for i in range(n):
        for j in range(n):
            s = 0.0
            for c in range(d):
                s += abs(e[i, c] - e[j, c])
            row[j] = s
        row[i] = np.inf
        order = np.argsort(row, kind="mergesort")
        for t in range(k):
            out[i, t] = order[t]
    return out


def knn_manhattan_np(e, k):
    dist = cdist_manhattan_np(e, e)
    np.fill_diagonal(dist, np.inf)
    return np.argsort(dist, axis=1, kind="stable")[:, :k].astype(np.int64)


def knn_manhattan(e, k: int) -> np.ndarray:
    """Indices of each row's ``k`` nearest other rows (L1), ties to the smaller index."""
    e = np.ascontiguousarray(e, dtype=np.float64)
    k = min(int(k), e.shape[0] - 1)
    if k <= 0:
        return np.zeros((e.shape[0], 0), dtype=np.int64)
    if _accel.USE_NUMBA:
        return knn_manhattan_nb(e, k)
    return knn_manhattan_np(e, k)


@jit
def hinge_terms_nb(e1, e2, pos_i, pos_j, neg_i, neg_j, weight, margin, gdim):
    d = e1.shape[1]
    g1 = np.zeros((e1.shape[0], gdim))
    g2 = np.zeros((e2.shape[0], gdim))
    loss = 0.0
    for t in range(pos_i.shape[0]):
        w = weight[t]
        if w == 0.0:
            continue
        i = pos_i[t]
        j = pos_j[t]
        p = neg_i[t]
        q = neg_j[t]
        dp = 0.0
        dn = 0.0
        for c in range(d):
            dp += abs(e1[i, c] - e2[j, c])
            dn += abs(e1[p, c] - e2[q, c])
        h = dp - dn + margin
        if h > 0.0:
            loss += w * h
            for c in range(gdim):
                sp = w * np.sign(e1[i, c] - e2[j, c])
                g1[i, c] += sp
                g2[j, c] -= sp
                sn = w * np.sign(e1[p, c] - e2[q, c])
                g1[p, c] -= sn
                g2[q, c] += sn
    return loss, g1, g2


def hinge_terms_np(e1, e2, pos_i, pos_j, neg_i, neg_j, weight, margin, gdim):
    g1 = np.zeros((e1.shape[0], gdim))
    g2 = np.zeros((e2.shape[0], gdim))
    if pos_i.shape[0] == 0:
        return 0.0, g1, g2
    dp = np.abs(e1[pos_i] - e2[pos_j]).sum(axis=1)
    dn = np.abs(e1[neg_i] - e2[neg_j]).sum(axis=1)
    h = dp - dn + margin
    act = (h > 0.0) & (weight != 0.0)
    loss = float(np.sum(weight[act] * h[act]))
    w = weight[act][:, None]
    sp = w * np.sign(e1[pos_i[act], :gdim] - e2[pos_j[act], :gdim])
    sn = w * np.sign(e1[neg_i[act], :gdim] - e2[neg_j[act], :gdim])
    np.add.at(g1, pos_i[act], sp)
    np.add.at(g2, pos_j[act], -sp)
    np.add.at(g1, neg_i[act], -sn)
    np.add.at(g2, neg_j[act], sn)
    return loss, g1, g2


def hinge_terms(e1, e2, pos_i, pos_j, neg_i, neg_j, weight, margin, gdim):
    """Weighted margin hinge sum and its gradient w.r.t. the first ``gdim`` columns.

    Term t contributes ``weight[t] * max(d(pos) - d(neg) + margin, 0)`` with
    d the L1 distance between ``e1[i]`` and ``e2[j]``.
    """
    args = (
        np.ascontiguousarray(e1, dtype=np.float64),
        np.ascontiguousarray(e2, dtype=np.float64),
        np.asarray(pos_i, dtype=np.int64),
        np.asarray(pos_j, dtype=np.int64),
        np.asarray(neg_i, dtype=np.int64),
        np.asarray(neg_j, dtype=np.int64),
        np.asarray(weight, dtype=np.float64),
        float(margin),
        int(gdim),
    )
    if _accel.USE_NUMBA:
        return hinge_terms_nb(*args)
    return hinge_terms_np(*args)
