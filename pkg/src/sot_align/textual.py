"""Entity-name embeddings, cross-KG cosine similarity and pseudo pairs."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError, ShapeError
from .kg import KnowledgeGraph

log = logging.getLogger(__name__)

DEFAULT_EPS = 0.99
DEFAULT_TOP_N = 3

_WORD = re.compile(r"[^\W_]+")
_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


@dataclass(frozen=True)
class WordEmbeddingTable:
    dimension: int
    vectors: dict

    def __post_init__(self):
        if self.dimension <= 0:
            raise InputError("embedding dimension must be positive")
        for tok, vec in self.vectors.items():
            if len(vec) != self.dimension:
                raise ShapeError(f"vector for {tok!r} has length {len(vec)}, expected {self.dimension}")


def load_word_vectors(path) -> WordEmbeddingTable:
    """Read GloVe text format (``token v1 ... vd`` per line)."""
    path = Path(path)
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                if not line.strip():
                    continue
                raise ParseError(path, lineno, "expected a token followed by its vector")
            tok, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ParseError(path, lineno, f"vector has {len(values)} components, expected {dim}")
            if tok in vectors:
                raise ParseError(path, lineno, f"duplicate token {tok!r}")
            try:
                vectors[tok] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    if dim is None:
        raise ParseError(path, 0, "no vectors found")
    return WordEmbeddingTable(dim, vectors)


def write_word_vectors(path, table: WordEmbeddingTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tok, vec in table.vectors.items():
            fh.write(tok + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def tokenize(name: str, split_camel: bool = False) -> list[str]:
    """Lowercased word tokens; whitespace, punctuation and underscores separate."""
    if split_camel:
        name = _CAMEL.sub(" ", name)
    return _WORD.findall(name.lower())


@dataclass(frozen=True)
class NameEmbeddings:
    matrix: np.ndarray
    oov: tuple[int, ...] = ()

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]


def embed_names(kg: KnowledgeGraph, table: WordEmbeddingTable, split_camel: bool = False) -> NameEmbeddings:
    """Mean in-vocabulary word vector per entity name.

    Entities with no known token get a zero row and are listed in ``oov``.
    """
    out = np.zeros((len(kg), table.dimension))
    oov = []
    for ent in kg.entities:
        vecs = [table.vectors[t] for t in tokenize(ent.name, split_camel) if t in table.vectors]
        if vecs:
            out[ent.id] = np.mean(vecs, axis=0)
        else:
            oov.append(ent.id)
    if oov:
        log.warning("%d entities have no in-vocabulary tokens", len(oov))
    return NameEmbeddings(out, tuple(oov))


def write_oov_report(path, kg: KnowledgeGraph, names: NameEmbeddings) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in names.oov:
            fh.write(f"{kg.entities[i].external_key}\toov\n")


def _as_matrix(x):
    return x.matrix if isinstance(x, NameEmbeddings) else np.asarray(x, dtype=float)


def similarity_matrix(a, b) -> np.ndarray:
    """Cosine similarity s_ij between rows of ``a`` and ``b``; zero rows give 0."""
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ua = np.divide(a, na[:, None], out=np.zeros_like(a), where=na[:, None] > 0)
    ub = np.divide(b, nb[:, None], out=np.zeros_like(b), where=nb[:, None] > 0)
    return np.clip(ua @ ub.T, -1.0, 1.0)


@dataclass(frozen=True)
class PseudoPairSet:
    pairs: tuple[tuple[int, int], ...]
    eps: float

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.pairs:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        arr = np.asarray(self.pairs, dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def union(self, extra) -> "PseudoPairSet":
        """Add supervised pairs, dropping any that reuse an already-paired entity."""
        pairs = list(self.pairs)
        used_i = {i for i, _ in pairs}
        used_j = {j for _, j in pairs}
        for i, j in extra:
            if (i, j) in self.pairs or i in used_i or j in used_j:
                continue
            pairs.append((int(i), int(j)))
            used_i.add(i)
            used_j.add(j)
        return PseudoPairSet(tuple(sorted(pairs)), self.eps)


def extract_pseudo_pairs(s: np.ndarray, eps: float = DEFAULT_EPS) -> PseudoPairSet:
    """Pairs whose similarity exceeds ``eps`` and is the only such entry in its row and column."""
    if not 0.0 < eps < 1.0:
        raise InputError(f"eps must lie in (0, 1), got {eps}")
    above = np.asarray(s) > eps
    ok = above & (above.sum(axis=1) == 1)[:, None] & (above.sum(axis=0) == 1)[None, :]
    rows, cols = np.nonzero(ok)
    return PseudoPairSet(tuple(zip(rows.tolist(), cols.tolist())), float(eps))


def top_n_candidates(s: np.ndarray, n: int = DEFAULT_TOP_N) -> list[tuple[int, int]]:
    """Each row's ``n`` most similar columns, ties to the smaller column index."""
    if n < 1:
        raise InputError("N must be >= 1")
    s = np.asarray(s)
    n = min(n, s.shape[1])
    order = np.argsort(-s, axis=1, kind="stable")[:, :n]
    return [(i, int(j)) for i in range(s.shape[0]) for j in order[i]]


def write_pseudo_pairs(path, pairs: PseudoPairSet, kg1, kg2, s: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j in pairs:
            fh.write(f"{kg1.entities[i].external_key}\t{kg2.entities[j].external_key}\t{float(s[i, j])!r}\n")


def read_pseudo_pairs(path, kg1, kg2, eps: float) -> PseudoPairSet:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, "expected kg1_key<TAB>kg2_key[<TAB>similarity]")
            pairs.append((kg1.id_of(parts[0]), kg2.id_of(parts[1])))
    return PseudoPairSet(tuple(pairs), eps)
