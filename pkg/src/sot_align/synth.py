"""Synthetic KG pairs with planted alignments and dangling entities.

Matchable entities come in clusters of similar names; each side sees the
shared true vector plus its own Gaussian noise, with a per-pair noise scale,
so most confusions happen inside a cluster and the least noisy pairs become
pseudo pairs.  Optionally a fraction of pairs share their exact name token.
Dangling entities get their own, more spread out, random vectors and random
edges.  Entity order is shuffled per side.
"""
from __future__ import annotations

import string
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .kg import GoldStandard, KnowledgeGraph, save_kg, write_keys, write_pairs
from .textual import WordEmbeddingTable, write_word_vectors


@dataclass(frozen=True)
class SynthParams:
    matchable: int = 100
    dangling1: int = 20
    dangling2: int = 20
    dim: int = 32
    vector_scale: float = 0.1
    dangling_scale: float = 2.5  # spread of dangling vectors relative to cluster centres
    cluster_size: int = 5
    cluster_spread: float = 0.3
    sigma: float = 0.35
    noise_spread: float = 0.9  # per-pair noise scale is sigma * U(1 - spread, 1 + spread)
    exact_fraction: float = 0.0
    avg_degree: float = 4.0
    edge_keep: float = 0.8
    dangling_degree: int = 2
    relations: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.matchable + self.dangling1 < 2 or self.matchable + self.dangling2 < 2:
            raise InputError("each synthetic KG needs at least 2 entities")
        if self.sigma < 0 or self.cluster_spread < 0:
            raise InputError("noise scales must be non-negative")
        if not 0 <= self.noise_spread <= 1:
            raise InputError("noise_spread must lie in [0, 1]")
        if not 0 <= self.exact_fraction <= 1 or not 0 <= self.edge_keep <= 1:
            raise InputError("fractions must lie in [0, 1]")


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


@dataclass
class SynthData:
    kg1: KnowledgeGraph
    kg2: KnowledgeGraph
    words: WordEmbeddingTable
    gold: GoldStandard


def _token(rng, used: set) -> str:
    while True:
        tok = "".join(rng.choice(list(string.ascii_lowercase), size=8))
        if tok not in used:
            used.add(tok)
            return tok


def _base_edges(rng, n, avg_degree):
    p = min(1.0, avg_degree / max(n - 1, 1))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def generate(params: SynthParams) -> SynthData:
    p = params
    rng_vec = substream(p.seed, "synth/vectors")
    rng_names = substream(p.seed, "synth/names")
    rng_graph = substream(p.seed, "synth/graph")
    rng_order = substream(p.seed, "synth/order")

    n_clusters = -(-p.matchable // p.cluster_size)
    centers = rng_vec.normal(size=(n_clusters, p.dim))
    truth = centers[np.arange(p.matchable) // p.cluster_size] + p.cluster_spread * rng_vec.normal(size=(p.matchable, p.dim))
    scale = p.sigma * rng_vec.uniform(1 - p.noise_spread, 1 + p.noise_spread, size=(p.matchable, 1))
    noise1 = scale * rng_vec.normal(size=truth.shape)
    noise2 = scale * rng_vec.normal(size=truth.shape)
    dvec1 = p.dangling_scale * rng_vec.normal(size=(p.dangling1, p.dim))
    dvec2 = p.dangling_scale * rng_vec.normal(size=(p.dangling2, p.dim))

    used: set = set()
    exact = rng_names.random(p.matchable) < p.exact_fraction
    vectors = {}
    names1, names2 = [], []
    for k in range(p.matchable):
        if exact[k]:
            tok = _token(rng_names, used)
            vectors[tok] = truth[k]
            names1.append(tok)
            names2.append(tok)
        else:
            t1, t2 = _token(rng_names, used), _token(rng_names, used)
            vectors[t1] = truth[k] + noise1[k]
            vectors[t2] = truth[k] + noise2[k]
            names1.append(t1)
            names2.append(t2)
    for vecs, names in ((dvec1, names1), (dvec2, names2)):
        for v in vecs:
            tok = _token(rng_names, used)
            vectors[tok] = v
            names.append(tok)

    base = _base_edges(rng_graph, p.matchable, p.avg_degree)
    rel_of = rng_graph.integers(p.relations, size=len(base))

    def side(prefix, names, n_dangling):
        n = p.matchable + n_dangling
        keep = rng_graph.random(len(base)) < p.edge_keep
        edges = [(a, b, int(r)) for (a, b), r, k in zip(base, rel_of, keep) if k]
        for d in range(p.matchable, n):
            others = rng_graph.choice(n - 1, size=min(p.dangling_degree, n - 1), replace=False)
            for o in others:
                o = int(o) + (o >= d)
                edges.append((d, o, int(rng_graph.integers(p.relations))))
        perm = rng_order.permutation(n)  # perm[new_id] = internal id
        new_of = np.empty(n, dtype=np.int64)
        new_of[perm] = np.arange(n)
        keys = [f"{prefix}:e{int(q):04d}" for q in range(n)]
        keyed_names = [(keys[q], names[int(perm[q])]) for q in range(n)]
        triples = [(keys[new_of[a]], f"r{r}", keys[new_of[b]]) for a, b, r in edges]
        return KnowledgeGraph.build(keyed_names, triples), new_of

    kg1, map1 = side("kg1", names1, p.dangling1)
    kg2, map2 = side("kg2", names2, p.dangling2)
    pairs = sorted((int(map1[k]), int(map2[k])) for k in range(p.matchable))
    gold = GoldStandard.from_pairs(pairs, len(kg1), len(kg2))
    vectors = {tok: p.vector_scale * v for tok, v in vectors.items()}
    return SynthData(kg1, kg2, WordEmbeddingTable(p.dim, vectors), gold)


SYNTH_FILES = {
    "kg1_triples": "kg1_triples.tsv",
    "kg1_names": "kg1_names.tsv",
    "kg2_triples": "kg2_triples.tsv",
    "kg2_names": "kg2_names.tsv",
    "word_vectors": "word_vectors.txt",
    "gold_pairs": "gold_pairs.tsv",
    "gold_dangling1": "dangling1.txt",
    "gold_dangling2": "dangling2.txt",
}


def write_synthetic(out_dir, params: SynthParams) -> dict:
    """Write every input file; returns the config keys pointing at them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(params)
    f = {k: out / v for k, v in SYNTH_FILES.items()}
    save_kg(data.kg1, f["kg1_triples"], f["kg1_names"])
    save_kg(data.kg2, f["kg2_triples"], f["kg2_names"])
    write_word_vectors(f["word_vectors"], data.words)
    write_pairs(f["gold_pairs"], data.gold.pairs, data.kg1, data.kg2)
    write_keys(f["gold_dangling1"], data.gold.dangling1, data.kg1)
    write_keys(f["gold_dangling2"], data.gold.dangling2, data.kg2)
    return dict(SYNTH_FILES)


def params_dict(params: SynthParams) -> dict:
    return asdict(params)
