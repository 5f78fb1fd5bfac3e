"""Core and pan genomes from a thresholded sequence-similarity graph.

Sequences are vertices; two sequences are joined when their stored similarity
is at least the threshold. Gene classes are the connected components, each
genome is projected onto the set of classes its sequences fall in, and the
core (pan) genome is the intersection (union) of the projections.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional, Sequence


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityGraph:
    vertices: frozenset
    edges: frozenset  # of (a, b) tuples with a < b
    threshold: float


@dataclass(frozen=True)
class GeneClass:
    class_id: int
    members: frozenset

    def __post_init__(self):
        if not self.members:
            raise ValueError("gene class must have at least one member")


@dataclass(frozen=True)
class ProjectedGenome:
    accession: str
    classes: frozenset


class UnionFind:
    """Disjoint sets over hashable items, path halving + union by size."""

    def __init__(self, items: Iterable = ()):
        self._parent = {}
        self._size = {}
        for it in items:
            self.add(it)

    def add(self, item):
        if item not in self._parent:
            self._parent[item] = item
            self._size[item] = 1

    def find(self, item):
        parent = self._parent
        while parent[item] != item:
            parent[item] = parent[parent[item]]
            item = parent[item]
        return item

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] += self._size[rb]
        return True

    def groups(self) -> list[set]:
        out = {}
        for it in self._parent:
            out.setdefault(self.find(it), set()).add(it)
        return list(out.values())


def _check_threshold(T: float) -> None:
    if not 0.0 <= T <= 1.0:
        raise GraphError(f"threshold {T} outside [0, 1]")


def build_graph(records, T: float, vertices: Optional[Iterable[str]] = None) -> SimilarityGraph:
    """Threshold the similarity records into a graph (edge iff similarity >= T).

    When ``vertices`` is given every pair over it must have a record; a
    missing pair is treated as cache corruption, not as a non-edge.
    """
    _check_threshold(T)
    sims = {}
    seen = set()
    for r in records:
        sims[(r.seq_id_a, r.seq_id_b)] = r.similarity
        seen.add(r.seq_id_a)
        seen.add(r.seq_id_b)
    verts = frozenset(vertices) if vertices is not None else frozenset(seen)
    missing = seen - verts
    if missing:
        raise GraphError(f"records mention unknown vertices: {sorted(missing)[:5]}")
    edges = set()
    for pair in combinations(sorted(verts), 2):
        try:
            s = sims[pair]
        except KeyError:
            raise GraphError(f"missing similarity record for pair {pair}") from None
        if s >= T:
            edges.add(pair)
    return SimilarityGraph(verts, frozenset(edges), T)


def gene_classes(graph: SimilarityGraph) -> list[GeneClass]:
    """Connected components, numbered 0.. in order of their smallest member."""
    uf = UnionFind(graph.vertices)
    for a, b in graph.edges:
        uf.union(a, b)
    comps = sorted(uf.groups(), key=min)
    return [GeneClass(i, frozenset(c)) for i, c in enumerate(comps)]


def class_index(classes: Iterable[GeneClass]) -> dict[str, int]:
    index = {}
    for gc in classes:
        for m in gc.members:
            if m in index:
                raise GraphError(f"{m} belongs to more than one class")
            index[m] = gc.class_id
    return index


def project(genomes, classes) -> list[ProjectedGenome]:
    index = classes if isinstance(classes, dict) else class_index(classes)
    out = []
    for g in genomes:
        hit = set()
        for sid in g.seq_ids:
            try:
                hit.add(index[sid])
            except KeyError:
                raise GraphError(f"{sid} is not covered by any gene class") from None
        out.append(ProjectedGenome(g.accession, frozenset(hit)))
    return out


def core_pan(projected: Sequence[ProjectedGenome]) -> tuple[frozenset, frozenset]:
    if not projected:
        raise ValueError("core_pan needs at least one projected genome")
    core = frozenset.intersection(*(p.classes for p in projected))
    pan = frozenset.union(*(p.classes for p in projected))
    return core, pan


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    core_size: int
    pan_size: int


def analyze(records, genomes, T: float):
    """Classes, projections and core/pan for one threshold."""
    vertices = [sid for g in genomes for sid in g.seq_ids]
    classes = gene_classes(build_graph(records, T, vertices))
    projected = project(genomes, classes)
    core, pan = core_pan(projected)
    return classes, projected, core, pan


def threshold_sweep(records, genomes, thresholds: Sequence[float], workers: int = 1) -> list[SweepRow]:
    thresholds = list(thresholds)
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    records = frozenset(records)
    genomes = list(genomes)

    def row(T):
        _, _, core, pan = analyze(records, genomes, T)
        return SweepRow(T, len(core), len(pan))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(row, thresholds))
    return [row(T) for T in thresholds]


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    lines = ["threshold,core_size,pan_size"]
    lines += [f"{r.threshold:g},{r.core_size},{r.pan_size}" for r in rows]
    return "\n".join(lines) + "\n"


def core_pan_json(T: float, classes, core, pan) -> str:
    by_id = {gc.class_id: gc for gc in classes}

    def describe(ids):
        return [{"class_id": c, "members": sorted(by_id[c].members)} for c in sorted(ids)]

    doc = {"threshold": T, "core": describe(core), "pan": describe(pan)}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
