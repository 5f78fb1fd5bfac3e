"""Global alignment with affine gaps and the pairwise similarity cache.

The aligner is a Gotoh three-state dynamic program (match/mismatch state,
gap-in-second-sequence state, gap-in-first-sequence state) with end gaps
penalized. A gap of length L costs ``gap_open + (L - 1) * gap_extend``.

Traceback is deterministic: wherever several predecessors are optimal the
diagonal state wins, then "up" (a character of the first sequence against a
gap), then "left". Among all optimal alignments this selects the one whose
column string, read from the end, is lexicographically smallest with
diagonal < up < left. The pair is always aligned in canonical orientation
(lexicographically smaller sequence first) so the result does not depend on
argument order.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional

import numba
import numpy as np

log = logging.getLogger(__name__)

DIAG, UP, LEFT = 0, 1, 2


class AlignmentError(ValueError):
    pass


class CacheError(OSError):
    pass


@dataclass(frozen=True)
class AlignmentParams:
    """Scoring parameters. Defaults are needle's: EDNAFULL on ACGT, gap 10.0/0.5."""

    gap_open: float = 10.0
    gap_extend: float = 0.5
    match_score: float = 5.0
    mismatch_score: float = -4.0

    def __post_init__(self):
        if not self.gap_open > 0 or not self.gap_extend > 0:
            raise ValueError("gap_open and gap_extend must be positive")
        if not self.match_score > self.mismatch_score:
            raise ValueError("match_score must exceed mismatch_score")


@dataclass(frozen=True)
class AlignmentResult:
    score: float
    identities: int
    alignment_length: int
    similarity: float
    aligned_x: str = ""
    aligned_y: str = ""


@dataclass(frozen=True, order=True)
class SimilarityRecord:
    seq_id_a: str
    seq_id_b: str
    similarity: float

    def __post_init__(self):
        if not self.seq_id_a < self.seq_id_b:
            raise ValueError(f"record not in canonical orientation: {self.seq_id_a}, {self.seq_id_b}")
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError(f"similarity {self.similarity} outside [0, 1]")

    @property
    def pair(self) -> tuple[str, str]:
        return self.seq_id_a, self.seq_id_b


@numba.njit(cache=True, nogil=True)
def _gotoh(x, y, match, mismatch, gap_open, gap_extend):
    n = x.shape[0]
    m = y.shape[0]
    neg = -np.inf
    # one packed byte per cell: bits 0-1 best predecessor of the diagonal
    # state, bits 2-3 of the up state, bits 4-5 of the left state
    ptr = np.zeros((n + 1, m + 1), dtype=np.uint8)
    Mp = np.full(m + 1, neg)
    Xp = np.full(m + 1, neg)
    Yp = np.full(m + 1, neg)
    Mc = np.full(m + 1, neg)
    Xc = np.full(m + 1, neg)
    Yc = np.full(m + 1, neg)

    for i in range(n + 1):
        for j in range(m + 1):
            bits = 0
            if i == 0 and j == 0:
                Mc[0] = 0.0
                Xc[0] = neg
                Yc[0] = neg
                continue
            if i > 0 and j > 0:
                best = Mp[j - 1]
                arg = 0
                if Xp[j - 1] > best:
                    best = Xp[j - 1]
                    arg = 1
                if Yp[j - 1] > best:
                    best = Yp[j - 1]
                    arg = 2
                Mc[j] = best + (match if x[i - 1] == y[j - 1] else mismatch)
                bits |= arg
            else:
                Mc[j] = neg
            if i > 0:
                best = Mp[j] - gap_open
                arg = 0
                v = Xp[j] - gap_extend
                if v > best:
                    best = v
                    arg = 1
                v = Yp[j] - gap_open
                if v > best:
                    best = v
                    arg = 2
                Xc[j] = best
                bits |= arg << 2
            else:
                Xc[j] = neg
            if j > 0:
                best = Mc[j - 1] - gap_open
                arg = 0
                v = Xc[j - 1] - gap_open
                if v > best:
                    best = v
                    arg = 1
                v = Yc[j - 1] - gap_extend
                if v > best:
                    best = v
                    arg = 2
                Yc[j] = best
                bits |= arg << 4
            else:
                Yc[j] = neg
            ptr[i, j] = bits
        Mp, Mc = Mc, Mp
        Xp, Xc = Xc, Xp
        Yp, Yc = Yc, Yp

    score = Mp[m]
    state = 0
    if Xp[m] > score:
        score = Xp[m]
        state = 1
    if Yp[m] > score:
        score = Yp[m]
        state = 2

    ops = np.empty(n + m, dtype=np.uint8)
    k = 0
    identities = 0
    i = n
    j = m
    while i > 0 or j > 0:
        bits = ptr[i, j]
        ops[k] = state
        k += 1
        if state == 0:
            if x[i - 1] == y[j - 1]:
                identities += 1
            state = bits & 3
            i -= 1
            j -= 1
        elif state == 1:
            state = (bits >> 2) & 3
            i -= 1
        else:
            state = (bits >> 4) & 3
            j -= 1
    return score, identities, k, ops[:k][::-1].copy()


def _encode(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8)


def _check(x: str, y: str) -> None:
    if not x or not y:
        raise AlignmentError("cannot align an empty sequence")


def _run(x: str, y: str, p: AlignmentParams):
    return _gotoh(_encode(x), _encode(y), float(p.match_score), float(p.mismatch_score),
                  float(p.gap_open), float(p.gap_extend))


def align_global(x: str, y: str, p: AlignmentParams = AlignmentParams()) -> AlignmentResult:
    """Optimal end-gap-penalized global alignment of two DNA strings."""
    _check(x, y)
    swapped = y < x
    a, b = (y, x) if swapped else (x, y)
    score, identities, length, ops = _run(a, b, p)
    top, bottom = [], []
    i = j = 0
    for op in ops:
        if op == DIAG:
            top.append(a[i])
            bottom.append(b[j])
            i += 1
            j += 1
        elif op == UP:
            top.append(a[i])
            bottom.append("-")
            i += 1
        else:
            top.append("-")
            bottom.append(b[j])
            j += 1
    top, bottom = "".join(top), "".join(bottom)
    if swapped:
        top, bottom = bottom, top
    return AlignmentResult(float(score), int(identities), int(length),
                           identities / length, top, bottom)


def similarity(x: str, y: str, p: AlignmentParams = AlignmentParams()) -> float:
    """Fraction of identical columns in the optimal global alignment of ``x`` and ``y``."""
    _check(x, y)
    a, b = (y, x) if y < x else (x, y)
    _, identities, length, _ = _run(a, b, p)
    return identities / length


def stored_value(sim: float) -> float:
    """The value a similarity takes once written to the cache (6 decimals)."""
    return float(f"{sim:.6f}")


def canonical(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


CACHE_HEADER = ("seq_id_a", "seq_id_b", "similarity")


class SimilarityStore:
    """Pairwise similarity cache, optionally backed by an append-only CSV file.

    Reads are lock-free dictionary lookups; writes go through a lock and are
    appended to the file one batch per ``write`` call. A truncated final line
    left by an interrupted run is ignored on load.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._data: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CacheError(f"cannot read similarity cache {self.path}: {exc}") from exc
        if not text:
            return
        lines = text.split("\n")
        if lines[-1] != "":
            log.warning("%s: ignoring truncated final line %r", self.path, lines[-1])
        lines = lines[:-1]
        if not lines or tuple(lines[0].split(",")) != CACHE_HEADER:
            raise CacheError(f"{self.path}: bad similarity cache header")
        for lineno, row in enumerate(csv.reader(lines[1:]), 2):
            try:
                a, b, v = row
                rec = SimilarityRecord(a, b, float(v))
            except ValueError as exc:
                raise CacheError(f"{self.path}:{lineno}: bad record {row!r}: {exc}") from None
            old = self._data.get(rec.pair)
            if old is not None and old != rec.similarity:
                raise CacheError(f"{self.path}:{lineno}: conflicting value for {rec.pair}")
            self._data[rec.pair] = rec.similarity

    def __len__(self):
        return len(self._data)

    def __contains__(self, pair):
        return canonical(*pair) in self._data

    def get(self, a: str, b: str) -> Optional[float]:
        return self._data.get(canonical(a, b))

    def records(self) -> set[SimilarityRecord]:
        return {SimilarityRecord(a, b, v) for (a, b), v in self._data.items()}

    def add_batch(self, records: Iterable[SimilarityRecord]) -> None:
        records = sorted(records)
        if not records:
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for r in records:
            w.writerow((r.seq_id_a, r.seq_id_b, f"{r.similarity:.6f}"))
        chunk = buf.getvalue()
        with self._lock:
            if self.path is not None:
                try:
                    new = not self.path.exists() or self.path.stat().st_size == 0
                    self.path.parent.mkdir(parents=True, exist_ok=True)
                    with self.path.open("a", encoding="utf-8", newline="") as fh:
                        fh.write((",".join(CACHE_HEADER) + "\n" if new else "") + chunk)
                        fh.flush()
                        os.fsync(fh.fileno())
                except OSError as exc:
                    raise CacheError(f"cannot write similarity cache {self.path}: {exc}") from exc
            for r in records:
                self._data[r.pair] = r.similarity

    def save(self, path) -> None:
        """Write the whole store to ``path`` (sorted, canonical)."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with tmp.open("w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(CACHE_HEADER) + "\n")
            for (a, b), v in sorted(self._data.items()):
                fh.write(f"{a},{b},{v:.6f}\n")
        os.replace(tmp, path)


@dataclass
class PairwiseStats:
    computed: int = 0
    cached: int = 0


def all_pairs(seqs, p: AlignmentParams = AlignmentParams(),
              cache: Optional[SimilarityStore] = None, *, workers: int = 1,
              batch_size: int = 256, stats: Optional[PairwiseStats] = None
              ) -> set[SimilarityRecord]:
    """Similarity records for every unordered pair of ``seqs``.

    Pairs already in ``cache`` are not realigned. New results are committed
    to the cache batch by batch, so an interrupted run keeps what it finished.
    """
    if cache is None:
        cache = SimilarityStore()
    if workers < 1:
        raise ValueError("workers must be >= 1")
    by_id = {}
    for cs in seqs:
        if cs.seq_id in by_id:
            raise ValueError(f"duplicate seq_id {cs.seq_id}")
        by_id[cs.seq_id] = cs.dna
    ids = sorted(by_id)
    pairs = list(combinations(ids, 2))
    todo = [pr for pr in pairs if pr not in cache]
    if stats is not None:
        stats.cached += len(pairs) - len(todo)

    def one(pair):
        a, b = pair
        try:
            return SimilarityRecord(a, b, stored_value(similarity(by_id[a], by_id[b], p)))
        except Exception as exc:
            raise AlignmentError(f"alignment of {a} vs {b} failed: {exc}") from exc

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, len(todo), batch_size):
            batch = todo[start:start + batch_size]
            results = list(pool.map(one, batch)) if pool else [one(pr) for pr in batch]
            cache.add_batch(results)
            if stats is not None:
                stats.computed += len(results)
    finally:
        if pool is not None:
            pool.shutdown()

    return {SimilarityRecord(a, b, cache.get(a, b)) for a, b in pairs}
