"""Core genomes from gene names: Intersection Core Matrix and greedy merging.

Each genome becomes a set of normalized gene names. The Intersection Core
Matrix (ICM) holds ``|names_i & names_j|`` for every pair ``i < j``. The
greedy loop repeatedly takes the pair with the largest score, removes both
items and adds their intersection as a new core, until a single item is
left or no pair shares any name.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

from .core_tree import CoreForest, Merge, MergeHistory, build_forest
from .ingest import AnnotationSource, Genome

log = logging.getLogger(__name__)

_DROP = str.maketrans("", "", "_()")


class GeneNameError(ValueError):
    """Bad gene name or name set."""


def normalize_name(raw: str, mode: AnnotationSource = AnnotationSource.NCBI_STYLE) -> str:
    """Uppercase and strip ``_``, ``(`` and ``)``.

    DOGMA-style names starting with RPS12 (``rps12_3end``, ``rps12_5end``)
    all collapse to ``RPS12``. Nothing else is reconciled, so ``ND6`` and
    ``NAD6`` stay distinct.
    """
    if not raw or not raw.strip():
        raise GeneNameError("empty gene name")
    name = raw.strip().upper().translate(_DROP)
    if not name:
        raise GeneNameError(f"gene name {raw!r} is empty after normalization")
    if mode is AnnotationSource.DOGMA_STYLE and name.startswith("RPS12"):
        return "RPS12"
    return name


@dataclass(frozen=True)
class NameSet:
    label: str
    names: frozenset

    def __post_init__(self):
        object.__setattr__(self, "names", frozenset(self.names))
        for n in self.names:
            if n != n.upper() or any(c in n for c in "_()"):
                raise GeneNameError(f"{self.label}: name {n!r} is not normalized")


def to_name_set(g: Genome, mode: AnnotationSource = AnnotationSource.NCBI_STYLE,
                skipped: Optional[dict] = None) -> NameSet:
    """Name set of a genome. Unnamed sequences are skipped and counted in ``skipped``."""
    names = set()
    n_skipped = 0
    for cs in g.sequences:
        if cs.raw_name:
            names.add(normalize_name(cs.raw_name, mode))
        else:
            n_skipped += 1
    if skipped is not None:
        skipped[g.accession] = n_skipped
    if n_skipped:
        log.info("%s: %d unnamed sequence(s) excluded", g.accession, n_skipped)
    if not names:
        raise GeneNameError(f"{g.accession}: no named sequences")
    return NameSet(g.accession, frozenset(names))


@dataclass(frozen=True, eq=False)
class IntersectionCoreMatrix:
    items: tuple
    scores: dict = field(repr=False)
    computations: int = 0
    generation: int = 0

    @property
    def size(self) -> int:
        return len(self.items)

    def score(self, i: int, j: int) -> int:
        if i == j:
            return len(self.items[i].names)
        return self.scores[(i, j) if i < j else (j, i)]

    def merge(self, i: int, j: int, core: NameSet) -> "IntersectionCoreMatrix":
        """New matrix without items ``i`` and ``j`` and with ``core`` appended last."""
        keep = [k for k in range(self.size) if k not in (i, j)]
        remap = {old: new for new, old in enumerate(keep)}
        scores = {(remap[a], remap[b]): s for (a, b), s in self.scores.items()
                  if a in remap and b in remap}
        last = len(keep)
        for k in keep:
            scores[(remap[k], last)] = len(self.items[k].names & core.names)
        items = tuple(self.items[k] for k in keep) + (core,)
        return IntersectionCoreMatrix(items, scores, len(keep), self.generation + 1)

    def to_csv(self) -> str:
        rows = ["label_i,label_j,score"]
        for (i, j), s in sorted(self.scores.items()):
            rows.append(f"{self.items[i].label},{self.items[j].label},{s}")
        return "\n".join(rows) + "\n"


def build_icm(items: Sequence[NameSet]) -> IntersectionCoreMatrix:
    items = tuple(items)
    if len(items) < 2:
        raise ValueError("the intersection core matrix needs at least two items")
    labels = [it.label for it in items]
    if len(set(labels)) != len(labels):
        raise ValueError("name set labels must be unique")
    scores = {}
    for i, j in combinations(range(len(items)), 2):
        scores[(i, j)] = len(items[i].names & items[j].names)
    return IntersectionCoreMatrix(items, scores, len(scores))


def max_intersection(icm: IntersectionCoreMatrix, label: Optional[str] = None):
    """Pair with the largest score, ties going to the smallest ``(i, j)``.

    Returns ``((i, j), core, score)`` where ``core`` is the intersection of
    the two items, labelled ``core_<k>`` for the k-th merge.
    """
    if icm.size < 2:
        raise ValueError("need at least two items")
    best, best_pair = -1, None
    for pair in sorted(icm.scores):
        s = icm.scores[pair]
        if s > best:
            best, best_pair = s, pair
    i, j = best_pair
    core = NameSet(label or f"core_{icm.generation + 1}", icm.items[i].names & icm.items[j].names)
    return best_pair, core, best


def greedy_merge(items: Sequence[NameSet]) -> MergeHistory:
    icm = build_icm(items)
    merges = []
    while icm.size > 1:
        (i, j), core, score = max_intersection(icm)
        if score == 0:
            break
        merges.append(Merge(icm.items[i].label, icm.items[j].label, core.label, core.names, score))
        icm = icm.merge(i, j, core)
    leaves = tuple((it.label, it.names) for it in items)
    return MergeHistory(leaves, tuple(merges), tuple(it.label for it in icm.items))


def extract_cores(items: Sequence[NameSet], genomes=None) -> CoreForest:
    """Run the greedy merge and return the resulting core forest.

    ``genomes`` (accession -> Genome) supplies leaf metadata for labels.
    """
    return build_forest(greedy_merge(items), genomes)
