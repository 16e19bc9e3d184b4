"""Contrastive metric learning of enhanced entity embeddings.

A shared two-layer mean-aggregation graph encoder maps name embeddings to
``[L2-normalised structural part, raw name embedding]``.  Training minimises
the margin hinge over pseudo pairs plus a similarity-weighted hinge over
each entity's top-N textual candidates, with a linearly decaying weight on
the second term.  Gradients are derived by hand.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InputError, ShapeError, TrainingError
from .kernels import hinge_terms, knn_manhattan
from .kg import KnowledgeGraph

log = logging.getLogger(__name__)

_NORM_FLOOR = 1e-12


@dataclass
class TrainingConfig:
    margin: float = 3.0
    negatives_per_pair: int = 5
    top_n: int = 3
    w0: float = 0.3
    decay_fraction: float = 0.25
    learning_rate: float = 1e-3
    total_steps: int = 1000
    rng_seed: int = 0
    hidden_dim: int = 0  # 0: same as the input dimension
    out_dim: int = 0
    resample_every: int = 1

    def __post_init__(self):
        if self.margin <= 0:
            raise InputError("margin must be positive")
        if not 0 < self.decay_fraction <= 1:
            raise InputError("decay_fraction must lie in (0, 1]")
        if self.w0 < 0:
            raise InputError("w0 must be non-negative")
        if self.negatives_per_pair < 1 or self.total_steps < 0 or self.resample_every < 1:
            raise InputError("negatives_per_pair and resample_every must be >= 1, total_steps >= 0")


def refining_weight(t: float, config: TrainingConfig) -> float:
    """w(t) = w0 * max(0, 1 - t / (decay_fraction * total_steps))."""
    horizon = config.decay_fraction * config.total_steps
    if horizon <= 0:
        return 0.0
    return config.w0 * max(0.0, 1.0 - t / horizon)


@dataclass
class EncoderParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    NAMES = ("W1", "b1", "W2", "b2")

    def __post_init__(self):
        d, h = self.W1.shape
        h2, e = self.W2.shape
        if h2 != h or self.b1.shape != (h,) or self.b2.shape != (e,):
            raise ShapeError("encoder parameter shapes are inconsistent")

    @classmethod
    def init(cls, d: int, h: int, e: int, rng: np.random.Generator) -> "EncoderParams":
        a1 = np.sqrt(6.0 / (d + h))
        a2 = np.sqrt(6.0 / (h + e))
        return cls(rng.uniform(-a1, a1, (d, h)), np.zeros(h), rng.uniform(-a2, a2, (h, e)), np.zeros(e))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "EncoderParams":
        return EncoderParams(*(a.copy() for a in self.arrays()))

    def step(self, grads: "EncoderParams", lr: float) -> None:
        for p, g in zip(self.arrays(), grads.arrays()):
            p -= lr * g


@dataclass(frozen=True)
class EnhancedEmbeddings:
    """Rows are entities; the first ``struct_dim`` columns are learned."""

    matrix: np.ndarray
    struct_dim: int = 0

    def __len__(self) -> int:
        return self.matrix.shape[0]


def mean_aggregator(kg_or_adjacency, n: int | None = None) -> sp.csr_matrix:
    """Row-stochastic operator averaging each entity with its neighbours."""
    adjacency = kg_or_adjacency.adjacency if isinstance(kg_or_adjacency, KnowledgeGraph) else kg_or_adjacency
    n = len(adjacency) if n is None else n
    rows, cols = [], []
    for i, nb in enumerate(adjacency):
        members = set(nb)
        members.add(i)
        rows.extend([i] * len(members))
        cols.extend(sorted(members))
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    counts = np.bincount(rows, minlength=n).astype(float)
    return sp.csr_matrix((1.0 / counts[rows], (rows, cols)), shape=(n, n))


@dataclass
class _Cache:
    AX: np.ndarray
    P1: np.ndarray
    AH: np.ndarray
    Z: np.ndarray
    norm: np.ndarray


def _forward(agg, X, params: EncoderParams):
    AX = agg @ X
    P1 = AX @ params.W1 + params.b1
    H1 = np.maximum(P1, 0.0)
    AH = agg @ H1
    P2 = AH @ params.W2 + params.b2
    norm = np.maximum(np.linalg.norm(P2, axis=1), _NORM_FLOOR)
    Z = P2 / norm[:, None]
    return np.hstack([Z, X]), _Cache(AX, P1, AH, Z, norm)


def _backward(agg, params: EncoderParams, cache: _Cache, gZ) -> EncoderParams:
    Z = cache.Z
    gP2 = (gZ - Z * np.sum(gZ * Z, axis=1, keepdims=True)) / cache.norm[:, None]
    gW2 = cache.AH.T @ gP2
    gb2 = gP2.sum(axis=0)
    gH1 = agg.T @ (gP2 @ params.W2.T)
    gP1 = gH1 * (cache.P1 > 0.0)
    gW1 = cache.AX.T @ gP1
    gb1 = gP1.sum(axis=0)
    return EncoderParams(gW1, gb1, gW2, gb2)


def _names_matrix(names):
    return np.asarray(getattr(names, "matrix", names), dtype=float)


def encode(kg: KnowledgeGraph, names, params: EncoderParams) -> EnhancedEmbeddings:
    X = _names_matrix(names)
    if X.shape[1] != params.dims[0]:
        raise ShapeError(f"name embeddings have dim {X.shape[1]}, encoder expects {params.dims[0]}")
    E, _ = _forward(mean_aggregator(kg, len(kg)), X, params)
    return EnhancedEmbeddings(E, params.dims[2])


def manhattan_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


@dataclass(frozen=True)
class NegativeSampleSet:
    anchor: tuple[int, int]
    left: tuple[int, ...]   # replacements i' for u_i
    right: tuple[int, ...]  # replacements j' for v_j

    def pairs(self) -> list[tuple[int, int]]:
        i, j = self.anchor
        return [(p, j) for p in self.left] + [(i, q) for q in self.right]


def _nearest(E, i, k):
    d = np.abs(E - E[i]).sum(axis=1)
    d[i] = np.inf
    order = np.argsort(d, kind="stable")
    return tuple(int(x) for x in order[: min(k, len(E) - 1)])


def sample_negatives(anchor, emb1, emb2, k: int) -> NegativeSampleSet:
    """The k nearest same-KG entities (L1) to each side of the anchor, anchor excluded."""
    if k < 1:
        raise InputError("k must be >= 1")
    i, j = anchor
    return NegativeSampleSet((i, j), _nearest(_names_matrix(emb1), i, k), _nearest(_names_matrix(emb2), j, k))


@dataclass(frozen=True)
class NegativeTables:
    """Per-entity nearest-neighbour lists for both KGs."""

    left: np.ndarray
    right: np.ndarray

    def for_anchor(self, i: int, j: int) -> NegativeSampleSet:
        return NegativeSampleSet((i, j), tuple(self.left[i].tolist()), tuple(self.right[j].tolist()))


def negative_tables(emb1, emb2, k: int) -> NegativeTables:
    return NegativeTables(knn_manhattan(_names_matrix(emb1), k), knn_manhattan(_names_matrix(emb2), k))


def _expand_terms(ai, aj, weights, negs: NegativeTables):
    """Flatten anchors x negatives into hinge-term index arrays."""
    ai = np.asarray(ai, dtype=np.int64)
    aj = np.asarray(aj, dtype=np.int64)
    weights = np.asarray(weights, dtype=float)
    k1, k2 = negs.left.shape[1], negs.right.shape[1]
    pos_i = np.concatenate([np.repeat(ai, k1), np.repeat(ai, k2)])
    pos_j = np.concatenate([np.repeat(aj, k1), np.repeat(aj, k2)])
    neg_i = np.concatenate([negs.left[ai].reshape(-1), np.repeat(ai, k2)])
    neg_j = np.concatenate([np.repeat(aj, k1), negs.right[aj].reshape(-1)])
    w = np.concatenate([np.repeat(weights, k1), np.repeat(weights, k2)])
    return pos_i, pos_j, neg_i, neg_j, w


def _pairs_arrays(pairs):
    if hasattr(pairs, "arrays"):
        return pairs.arrays()
    pairs = list(pairs)
    if not pairs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    arr = np.asarray(pairs, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def refining_weights(Q, S) -> np.ndarray:
    """Similarity weights for the refining loss, clamped at zero."""
    qi, qj = _pairs_arrays(Q)
    return np.maximum(np.asarray(S)[qi, qj], 0.0)


def _hinge(pairs, weights, negs, emb1, emb2, margin, gdim=0):
    ai, aj = _pairs_arrays(pairs)
    if ai.size == 0:
        E1, E2 = _names_matrix(emb1), _names_matrix(emb2)
        return 0.0, np.zeros((E1.shape[0], gdim)), np.zeros((E2.shape[0], gdim))
    if weights is None:
        weights = np.ones(ai.size)
    terms = _expand_terms(ai, aj, weights, negs)
    return hinge_terms(_names_matrix(emb1), _names_matrix(emb2), *terms, margin, gdim)


def alignment_loss(P, negs: NegativeTables, emb1, emb2, margin: float) -> float:
    """Sum over anchors and their negatives of max(d(i,j) - d(i',j') + margin, 0)."""
    return float(_hinge(P, None, negs, emb1, emb2, margin)[0])


def refining_loss(Q, S, negs: NegativeTables, emb1, emb2, margin: float) -> float:
    return float(_hinge(Q, refining_weights(Q, S), negs, emb1, emb2, margin)[0])


@dataclass
class LossParts:
    total: float
    alignment: float
    refining: float
    weight: float


def loss_and_grad(params, agg1, agg2, X1, X2, P, Q, q_weights, negs, margin, w, cache=None):
    """L = L_a + w * L_g and its gradient w.r.t. the shared encoder parameters.

    ``negs`` are treated as constants for the step.
    """
    if cache is None:
        E1, c1 = _forward(agg1, X1, params)
        E2, c2 = _forward(agg2, X2, params)
    else:
        (E1, c1), (E2, c2) = cache
    e = params.dims[2]
    la, g1, g2 = _hinge(P, None, negs, E1, E2, margin, e)
    lg = 0.0
    if w > 0.0:
        lg, h1, h2 = _hinge(Q, q_weights, negs, E1, E2, margin, e)
        g1 = g1 + w * h1
        g2 = g2 + w * h2
    ga = _backward(agg1, params, c1, g1)
    gb = _backward(agg2, params, c2, g2)
    grads = EncoderParams(*(a + b for a, b in zip(ga.arrays(), gb.arrays())))
    return LossParts(la + w * lg, la, lg, w), grads


@dataclass
class TrainResult:
    params: EncoderParams | None
    emb1: EnhancedEmbeddings
    emb2: EnhancedEmbeddings
    history: list = field(default_factory=list)
    skipped: bool = False


def named_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent generator per named substream of one seed."""
    tag = int.from_bytes(stream.encode("utf-8"), "little") % (2**63)
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def train(kg1, kg2, names1, names2, P, config: TrainingConfig, supervised=None, S=None, Q=None) -> TrainResult:
    """Gradient descent on L = L_a + w(t) L_g.

    ``supervised`` pairs are merged into P (semi-supervised mode).  ``S`` is
    the name-similarity matrix used for the refining loss; ``Q`` defaults to
    its row-wise top-N candidates.
    """
    from .textual import PseudoPairSet, top_n_candidates

    X1, X2 = _names_matrix(names1), _names_matrix(names2)
    if supervised:
        base = P if isinstance(P, PseudoPairSet) else PseudoPairSet(tuple(P), float("nan"))
        P = base.union(supervised)
    if len(P) < 2:
        log.warning("fewer than two anchor pairs: skipping training, passing name embeddings through")
        return TrainResult(None, EnhancedEmbeddings(X1, 0), EnhancedEmbeddings(X2, 0), skipped=True)

    if S is None:
        from .textual import similarity_matrix

        S = similarity_matrix(X1, X2)
    if Q is None:
        Q = top_n_candidates(S, config.top_n)
    q_weights = refining_weights(Q, S)

    d = X1.shape[1]
    h = config.hidden_dim or d
    e = config.out_dim or d
    params = EncoderParams.init(d, h, e, named_rng(config.rng_seed, "train"))
    agg1 = mean_aggregator(kg1, len(kg1))
    agg2 = mean_aggregator(kg2, len(kg2))

    history = []
    negs = None
    for t in range(config.total_steps):
        f1 = _forward(agg1, X1, params)
        f2 = _forward(agg2, X2, params)
        if t % config.resample_every == 0:
            negs = negative_tables(f1[0], f2[0], config.negatives_per_pair)
        w = refining_weight(t, config)
        parts, grads = loss_and_grad(params, agg1, agg2, X1, X2, P, Q, q_weights, negs, config.margin, w, cache=(f1, f2))
        if not np.isfinite(parts.total) or not all(np.all(np.isfinite(g)) for g in grads.arrays()):
            raise TrainingError(f"non-finite loss at step {t}; lower the learning rate (now {config.learning_rate})")
        history.append(parts)
        params.step(grads, config.learning_rate)

    E1, _ = _forward(agg1, X1, params)
    E2, _ = _forward(agg2, X2, params)
    return TrainResult(params, EnhancedEmbeddings(E1, e), EnhancedEmbeddings(E2, e), history)


_MAGIC = b"SOTCKPT1"


def save_checkpoint(path, params: EncoderParams, meta: dict | None = None) -> None:
    """Magic, 8-byte header length, JSON header, then raw little-endian float64 tensors."""
    header = {"tensors": [], "meta": meta or {}}
    blobs = []
    offset = 0
    for name, arr in zip(EncoderParams.NAMES, params.arrays()):
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        header["tensors"].append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[EncoderParams, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise InputError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        body = fh.read()
    arrays = {}
    for t in header["tensors"]:
        chunk = body[t["offset"] : t["offset"] + t["nbytes"]]
        arrays[t["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(t["shape"]).astype(np.float64)
    return EncoderParams(*(arrays[n] for n in EncoderParams.NAMES)), header["meta"]


def config_dict(config: TrainingConfig) -> dict:
    return asdict(config)
