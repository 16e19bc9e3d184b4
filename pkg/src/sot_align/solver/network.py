"""Primal network simplex for uncapacitated min-cost flow.

Spanning-tree bookkeeping (parent, subtree size, depth-first thread) follows
the classic strongly-feasible-tree scheme; entering arcs are priced with
block search.  All integer supplies give integral vertex flows.
"""
import math

import numpy as np

from .._accel import jit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

STATUS_NAMES = {OPTIMAL: "optimal", INFEASIBLE: "infeasible", UNBOUNDED: "unbounded", ITERATION_LIMIT: "iteration_limit"}

_INF_CAP = np.int64(1) << np.int64(62)


@jit
def _apex(p, q, parent, size):
    sp = size[p]
    sq = size[q]
    while True:
        while sp < sq:
            p = parent[p]
            sp = size[p]
        while sp > sq:
            q = parent[q]
            sq = size[q]
        if sp == sq:
            if p != q:
                p = parent[p]
                sp = size[p]
                q = parent[q]
                sq = size[q]
            else:
                return p


@jit
def _remove_edge(s, t, parent, pedge, size, nxt, prv, last):
    size_t = size[t]
    prev_t = prv[t]
    last_t = last[t]
    next_last_t = nxt[last_t]
    parent[t] = -1
    pedge[t] = -1
    nxt[prev_t] = next_last_t
    prv[next_last_t] = prev_t
    nxt[last_t] = t
    prv[t] = last_t
    while s != -1:
        size[s] -= size_t
        if last[s] == last_t:
            last[s] = prev_t
        s = parent[s]


@jit
def _make_root(q, parent, pedge, size, nxt, prv, last, stack):
    depth = 0
    while q != -1:
        stack[depth] = q
        depth += 1
        q = parent[q]
    # stack holds q .. old root; rotate from the top down
    for k in range(depth - 1, 0, -1):
        p = stack[k]
        q = stack[k - 1]
        size_p = size[p]
        last_p = last[p]
        prev_q = prv[q]
        last_q = last[q]
        next_last_q = nxt[last_q]
        parent[p] = q
        parent[q] = -1
        pedge[p] = pedge[q]
        pedge[q] = -1
        size[p] = size_p - size[q]
        size[q] = size_p
        nxt[prev_q] = next_last_q
        prv[next_last_q] = prev_q
        nxt[last_q] = q
        prv[q] = last_q
        if last_p == last_q:
            last[p] = prev_q
            last_p = prev_q
        prv[p] = last_q
        nxt[last_q] = p
        nxt[last_p] = q
        prv[q] = last_p
        last[q] = last_p


@jit
def _add_edge(i, p, q, parent, pedge, size, nxt, prv, last):
    last_p = last[p]
    next_last_p = nxt[last_p]
    size_q = size[q]
    last_q = last[q]
    parent[q] = p
    pedge[q] = i
    nxt[last_p] = q
    prv[q] = last_p
    prv[next_last_p] = last_q
    nxt[last_q] = next_last_p
    while p != -1:
        size[p] += size_q
        if last[p] == last_p:
            last[p] = last_q
        p = parent[p]


@jit
def network_simplex_kernel(n_nodes, src, dst, cost, demand, tol, max_iter, root_at):
    """Min-cost flow with ``inflow - outflow == demand`` at every node.

    Returns ``(status, flow, potential, pivots)``; ``flow`` covers the input
    arcs only.  Every node is joined by a big-M arc to the tree root, which
    gives the initial strongly feasible tree.  The root is an extra
    artificial node when ``root_at < 0``, else the node ``root_at`` itself.
    A high-degree hub makes a good root: it is never re-hung, so pivots
    never recompute potentials below it.
    """
    E = src.shape[0]
    N = n_nodes
    tot = E + N
    S = np.empty(tot, dtype=np.int64)
    T = np.empty(tot, dtype=np.int64)
    C = np.empty(tot)
    flow = np.zeros(tot, dtype=np.int64)
    cmax = 0.0
    for e in range(E):
        S[e] = src[e]
        T[e] = dst[e]
        C[e] = cost[e]
        if abs(cost[e]) > cmax:
            cmax = abs(cost[e])
    big = 3.0 * (N + 1) * (cmax + 1.0)
    # potentials carry offsets of order big; price with a matching tolerance
    tol = max(tol, 1e-13 * big)

    pi = np.zeros(N + 1)
    parent = np.empty(N + 1, dtype=np.int64)
    pedge = np.empty(N + 1, dtype=np.int64)
    size = np.empty(N + 1, dtype=np.int64)
    nxt = np.empty(N + 1, dtype=np.int64)
    prv = np.empty(N + 1, dtype=np.int64)
    last = np.empty(N + 1, dtype=np.int64)
    root = N if root_at < 0 else root_at
    parent[root] = -1
    pedge[root] = -1
    size[root] = N + 1 if root_at < 0 else N
    pi[root] = 0.0
    # thread: root, then the other nodes in index order
    tail = root
    for p in range(N):
        e = E + p
        if p == root:
            # placeholder arc, never priced and never in the tree
            S[e] = p
            T[e] = p
            C[e] = big
            continue
        dem = demand[p]
        if dem > 0:
            S[e] = root
            T[e] = p
            pi[p] = -big
        else:
            S[e] = p
            T[e] = root
            pi[p] = big
        C[e] = big
        flow[e] = abs(dem)
        parent[p] = root
        pedge[p] = e
        size[p] = 1
        last[p] = p
        nxt[tail] = p
        prv[p] = tail
        tail = p
    nxt[tail] = root
    prv[root] = tail
    last[root] = tail

    wn = np.empty(N + 2, dtype=np.int64)
    we = np.empty(N + 2, dtype=np.int64)
    tmp_n = np.empty(N + 2, dtype=np.int64)
    tmp_e = np.empty(N + 2, dtype=np.int64)
    stack = np.empty(N + 2, dtype=np.int64)

    status = OPTIMAL
    pivots = 0
    if E > 0:
        block = max(1, int(math.ceil(math.sqrt(E))))
        n_blocks = (E + block - 1) // block
        start = 0
        idle = 0
        while idle < n_blocks:
            # price one block for the most negative reduced cost
            best = -tol
            i = -1
            for k in range(block):
                e = start + k
                if e >= E:
                    e -= E
                rc = C[e] - pi[S[e]] + pi[T[e]]
                if rc < best:
                    best = rc
                    i = e
            start += block
            if start >= E:
                start -= E
            if i < 0:
                idle += 1
                continue
            idle = 0
            if pivots >= max_iter:
                status = ITERATION_LIMIT
                break
            pivots += 1
            p = S[i]
            q = T[i]

            # cycle: apex -> p, entering arc, q -> apex
            w = _apex(p, q, parent, size)
            cnt = 0
            x = p
            while x != w:
                tmp_n[cnt] = x
                tmp_e[cnt] = pedge[x]
                cnt += 1
                x = parent[x]
            L = 0
            wn[L] = w
            for k in range(cnt - 1, -1, -1):
                we[L] = tmp_e[k]
                L += 1
                wn[L] = tmp_n[k]
            we[L] = i
            L += 1
            x = q
            while x != w:
                wn[L] = x
                we[L] = pedge[x]
                L += 1
                x = parent[x]
            # wn[k] is the node the walk leaves along we[k]; k in [0, L)

            jpos = -1
            delta = _INF_CAP
            for k in range(L - 1, -1, -1):
                e = we[k]
                r = _INF_CAP if S[e] == wn[k] else flow[e]
                if r < delta:
                    delta = r
                    jpos = k
            if jpos < 0:
                status = UNBOUNDED
                break
            j = we[jpos]
            s = wn[jpos]
            t = T[j] if S[j] == s else S[j]
            if delta > 0:
                for k in range(L):
                    e = we[k]
                    if S[e] == wn[k]:
                        flow[e] += delta
                    else:
                        flow[e] -= delta
            if i != j:
                if parent[t] != s:
                    tt = s
                    s = t
                    t = tt
                ipos = -1
                for k in range(L):
                    if we[k] == i:
                        ipos = k
                        break
                if ipos > jpos:
                    pp = p
                    p = q
                    q = pp
                _remove_edge(s, t, parent, pedge, size, nxt, prv, last)
                _make_root(q, parent, pedge, size, nxt, prv, last, stack)
                _add_edge(i, p, q, parent, pedge, size, nxt, prv, last)
                # recompute the re-hung subtree from its parents (the thread
                # visits parents first), so rounding does not accumulate
                x = q
                end = last[q]
                while True:
                    e = pedge[x]
                    if T[e] == x:
                        pi[x] = pi[S[e]] - C[e]
                    else:
                        pi[x] = pi[T[e]] + C[e]
                    if x == end:
                        break
                    x = nxt[x]

    if status == OPTIMAL:
        for e in range(E, tot):
            if flow[e] != 0:
                status = INFEASIBLE
                break
    return status, flow[:E].copy(), pi[:N].copy(), pivots


def min_cost_flow(n_nodes, src, dst, cost, demand, tol=1e-12, max_iter=100_000_000, root=None):
    """Thin wrapper normalising dtypes; see :func:`network_simplex_kernel`.

    ``root`` optionally names an existing node to serve as the tree root.
    """
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    demand = np.ascontiguousarray(demand, dtype=np.int64)
    if int(demand.sum()) != 0:
        raise ValueError("demands must sum to zero")
    root_at = -1 if root is None else int(root)
    status, flow, pi, pivots = network_simplex_kernel(
        int(n_nodes), src, dst, cost, demand, float(tol), int(max_iter), root_at
    )
    return STATUS_NAMES[int(status)], flow, pi, int(pivots)
