"""Independent reference computations used by the tests.

Each one is written the slow, obvious way and shares no code with the
package under test.
"""
import itertools
import math

import numpy as np


def enumerate_sot(dense, alpha, beta):
    """Optimum of the semi-constraint assignment by enumerating every partial
    injection of rows into columns; ``inf`` entries are forbidden arcs."""
    D = np.asarray(dense, dtype=float)
    m, n = D.shape
    best = m * beta + n * alpha
    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.permutations(range(n), k):
                total = sum(D[i, j] for i, j in zip(rows, cols)) + (m - k) * beta + (n - k) * alpha
                best = min(best, total)
    return best


def solution_value(dense, matched, d1, d2, alpha, beta):
    return math.fsum([dense[i][j] for i, j in matched]) + beta * len(d1) + alpha * len(d2)


def l1(a, b):
    total = 0.0
    for x, y in zip(a, b):
        total += abs(x - y)
    return total


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return 0.0 if na == 0 or nb == 0 else dot / (na * nb)


def encoder_reference(adjacency, X, W1, b1, W2, b2):
    """Loop-based forward pass of the mean-aggregation encoder."""
    n, d = len(X), len(X[0])
    members = [sorted(set(nb) | {i}) for i, nb in enumerate(adjacency)]

    def aggregate(M):
        cols = len(M[0])
        return [[sum(M[k][c] for k in members[i]) / len(members[i]) for c in range(cols)] for i in range(n)]

    def affine(M, W, b):
        return [[sum(M[i][k] * W[k][c] for k in range(len(W))) + b[c] for c in range(len(b))] for i in range(len(M))]

    H1 = [[max(v, 0.0) for v in row] for row in affine(aggregate(X), W1, b1)]
    H2 = affine(aggregate(H1), W2, b2)
    out = []
    for i in range(n):
        norm = math.sqrt(sum(v * v for v in H2[i]))
        out.append([v / norm for v in H2[i]] + list(X[i]))
    return np.array(out)


def hinge_reference(pairs, weights, negatives, E1, E2, margin):
    """Sum over anchors of weight * max(d(anchor) - d(negative) + margin, 0)."""
    total = 0.0
    for (i, j), w in zip(pairs, weights):
        pos = l1(E1[i], E2[j])
        for a, b in negatives[(i, j)]:
            total += w * max(pos - l1(E1[a], E2[b]) + margin, 0.0)
    return total


def threshold_sweep(distances, labels):
    """Best F1 over every way of calling the r largest distances dangling
    (never splitting equal distances); ties favour the larger r.

    Returns the set of indices predicted dangling and its F1.
    """
    order = sorted(range(len(distances)), key=lambda k: -distances[k])
    best_f1, best_set = -1.0, None
    for r in range(len(order) + 1):
        if 0 < r < len(order) and distances[order[r - 1]] == distances[order[r]]:
            continue
        chosen = set(order[:r])
        tp = sum(1 for k in chosen if labels[k])
        fp = len(chosen) - tp
        fn = sum(1 for k, lab in enumerate(labels) if lab and k not in chosen)
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        if f1 >= best_f1:
            best_f1, best_set = f1, chosen
    return best_set, best_f1
