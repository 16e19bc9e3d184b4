"""Knowledge-graph data model, gold alignments and TSV ingestion."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicationError, InputError, ParseError, ReferentialError


@dataclass(frozen=True)
class Entity:
    id: int
    external_key: str
    name: str


@dataclass(frozen=True)
class RelationTriple:
    head: int
    relation: int
    tail: int


@dataclass(frozen=True)
class KnowledgeGraph:
    entities: tuple[Entity, ...]
    relation_names: tuple[str, ...]
    triples: tuple[RelationTriple, ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False)
    _key_index: dict = field(repr=False, compare=False, hash=False, default=None)

    @classmethod
    def build(
        cls,
        keyed_names: Sequence[tuple[str, str]],
        keyed_triples: Iterable[tuple[str, str, str]] = (),
    ) -> "KnowledgeGraph":
        """Assign dense ids in order of ``keyed_names`` and resolve triples by key."""
        entities = []
        index: dict[str, int] = {}
        for key, name in keyed_names:
            if key in index:
                raise DuplicationError(key)
            index[key] = len(entities)
            entities.append(Entity(len(entities), key, name))

        relation_index: dict[str, int] = {}
        triples = []
        for head, rel, tail in keyed_triples:
            for k in (head, tail):
                if k not in index:
                    raise ReferentialError(k)
            r = relation_index.setdefault(rel, len(relation_index))
            triples.append(RelationTriple(index[head], r, index[tail]))
        return cls.from_parts(entities, list(relation_index), triples)

    @classmethod
    def from_parts(cls, entities, relation_names, triples) -> "KnowledgeGraph":
        entities = tuple(entities)
        for pos, ent in enumerate(entities):
            if ent.id != pos:
                raise InputError(f"entity ids must be contiguous from 0; got {ent.id} at {pos}")
        n = len(entities)
        neighbors: list[set[int]] = [set() for _ in range(n)]
        for t in triples:
            if not (0 <= t.head < n and 0 <= t.tail < n):
                raise ReferentialError(f"{t.head}->{t.tail}")
            if not 0 <= t.relation < len(relation_names):
                raise InputError(f"relation index {t.relation} out of range")
            neighbors[t.head].add(t.tail)
            neighbors[t.tail].add(t.head)
        adjacency = tuple(tuple(sorted(nb)) for nb in neighbors)
        key_index = {}
        for ent in entities:
            if ent.external_key in key_index:
                raise DuplicationError(ent.external_key)
            key_index[ent.external_key] = ent.id
        return cls(entities, tuple(relation_names), tuple(triples), adjacency, key_index)

    def __len__(self) -> int:
        return len(self.entities)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entities]

    @property
    def keys(self) -> list[str]:
        return [e.external_key for e in self.entities]

    def id_of(self, key: str) -> int:
        try:
            return self._key_index[key]
        except KeyError:
            raise ReferentialError(key) from None


@dataclass(frozen=True)
class GoldStandard:
    pairs: tuple[tuple[int, int], ...]
    dangling1: frozenset[int]
    dangling2: frozenset[int]

    def __post_init__(self):
        left = [i for i, _ in self.pairs]
        right = [j for _, j in self.pairs]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            raise DuplicationError("gold pairs are not one-to-one")
        if self.dangling1 & set(left) or self.dangling2 & set(right):
            raise InputError("dangling sets overlap with paired entities")

    @classmethod
    def from_pairs(cls, pairs, n1: int, n2: int, dangling1=None, dangling2=None) -> "GoldStandard":
        pairs = tuple((int(i), int(j)) for i, j in pairs)
        if dangling1 is None:
            dangling1 = set(range(n1)) - {i for i, _ in pairs}
        if dangling2 is None:
            dangling2 = set(range(n2)) - {j for _, j in pairs}
        return cls(pairs, frozenset(dangling1), frozenset(dangling2))

    @property
    def target_of(self) -> dict[int, int]:
        return dict(self.pairs)


def _read_tsv(path, ncols):
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != ncols:
                raise ParseError(path, lineno, f"expected {ncols} tab-separated columns, got {len(parts)}")
            rows.append((lineno, parts))
    return rows


def load_kg(triples_path, names_path) -> KnowledgeGraph:
    """Load a KG from a names TSV (``key<TAB>name``) and a triples TSV
    (``head<TAB>relation<TAB>tail``)."""
    entities = []
    index: dict[str, int] = {}
    for lineno, (key, name) in _read_tsv(names_path, 2):
        if key in index:
            raise DuplicationError(key, names_path, lineno)
        index[key] = len(entities)
        entities.append(Entity(len(entities), key, name))

    relation_index: dict[str, int] = {}
    triples = []
    for lineno, (head, rel, tail) in _read_tsv(triples_path, 3):
        for k in (head, tail):
            if k not in index:
                raise ReferentialError(k, triples_path, lineno)
        r = relation_index.setdefault(rel, len(relation_index))
        triples.append(RelationTriple(index[head], r, index[tail]))
    return KnowledgeGraph.from_parts(entities, list(relation_index), triples)


def save_kg(kg: KnowledgeGraph, triples_path, names_path) -> None:
    with open(names_path, "w", encoding="utf-8", newline="\n") as fh:
        for e in kg.entities:
            fh.write(f"{e.external_key}\t{e.name}\n")
    with open(triples_path, "w", encoding="utf-8", newline="\n") as fh:
        for t in kg.triples:
            fh.write(
                f"{kg.entities[t.head].external_key}\t{kg.relation_names[t.relation]}\t"
                f"{kg.entities[t.tail].external_key}\n"
            )


def _resolve(kg, key, path, lineno):
    try:
        return kg.id_of(key)
    except ReferentialError:
        raise ReferentialError(key, path, lineno) from None


def load_pairs(pairs_path, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> list[tuple[int, int]]:
    """Read ``kg1_key<TAB>kg2_key`` lines; rejects any key used twice on a side."""
    pairs = []
    seen1, seen2 = set(), set()
    for lineno, (k1, k2) in _read_tsv(pairs_path, 2):
        i = _resolve(kg1, k1, pairs_path, lineno)
        j = _resolve(kg2, k2, pairs_path, lineno)
        if i in seen1:
            raise DuplicationError(k1, pairs_path, lineno)
        if j in seen2:
            raise DuplicationError(k2, pairs_path, lineno)
        seen1.add(i)
        seen2.add(j)
        pairs.append((i, j))
    return pairs


def _load_key_list(path, kg):
    ids = set()
    for lineno, (key,) in _read_tsv(path, 1):
        ids.add(_resolve(kg, key.strip(), path, lineno))
    return ids


def load_gold(
    pairs_path,
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    dangling1_path=None,
    dangling2_path=None,
) -> GoldStandard:
    """Gold pairs plus dangling labels.

    Without explicit dangling files an entity is dangling iff it does not
    occur in the pair list.
    """
    pairs = load_pairs(pairs_path, kg1, kg2)
    d1 = _load_key_list(dangling1_path, kg1) if dangling1_path else None
    d2 = _load_key_list(dangling2_path, kg2) if dangling2_path else None
    return GoldStandard.from_pairs(pairs, len(kg1), len(kg2), d1, d2)


def write_pairs(path, pairs, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j in pairs:
            fh.write(f"{kg1.entities[i].external_key}\t{kg2.entities[j].external_key}\n")


def write_keys(path, ids, kg: KnowledgeGraph) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in sorted(ids):
            fh.write(f"{kg.entities[i].external_key}\n")
