"""Genome ingestion: FASTA files and annotation tables into the data model.

Every coding sequence gets a ``seq_id`` of the form ``<accession>:<ordinal>``,
which is the join key used by the alignment cache and all downstream steps.
"""
from __future__ import annotations

import csv
import enum
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional


class IngestError(ValueError):
    """Raised for malformed or inconsistent genome input."""


class AnnotationSource(enum.Enum):
    NCBI_STYLE = "ncbi"
    DOGMA_STYLE = "dogma"


class FeatureKind(enum.Enum):
    CDS = "CDS"
    RRNA = "rRNA"
    OTHER = "OTHER"

    @classmethod
    def parse(cls, token: str) -> "FeatureKind":
        """Map a feature token to a kind; unrecognised tokens become OTHER."""
        t = token.strip().upper()
        if not t:
            raise IngestError("empty feature_kind token")
        if t == "CDS":
            return cls.CDS
        if t == "RRNA":
            return cls.RRNA
        return cls.OTHER


ALL_KINDS = frozenset(FeatureKind)

_ACGT = frozenset("ACGT")
# IUPAC nucleotide codes other than ACGT (U is folded to T before this check)
_DEGENERATE = frozenset("RYSWKMBDHVN")
_WS = re.compile(r"\s+")


def make_seq_id(accession: str, ordinal: int) -> str:
    return f"{accession}:{ordinal}"


def split_seq_id(seq_id: str) -> tuple[str, int]:
    accession, sep, ordinal = seq_id.rpartition(":")
    if not sep or not accession or not ordinal.isdigit():
        raise IngestError(f"malformed seq_id {seq_id!r}")
    return accession, int(ordinal)


def normalize_dna(raw: str, degenerate: str = "strip", where: str = "") -> str:
    """Uppercase, drop whitespace, fold U to T and apply the degenerate-base policy.

    ``degenerate`` is ``"strip"`` (remove ambiguity codes) or ``"error"``.
    """
    if degenerate not in ("strip", "error"):
        raise ValueError(f"unknown degenerate-base policy {degenerate!r}")
    seq = _WS.sub("", raw).upper().replace("U", "T")
    out = []
    for i, ch in enumerate(seq):
        if ch in _ACGT:
            out.append(ch)
        elif ch in _DEGENERATE:
            if degenerate == "error":
                raise IngestError(f"{where}: degenerate base {ch!r} at position {i}")
        else:
            raise IngestError(f"{where}: character {ch!r} outside the IUPAC nucleotide set")
    return "".join(out)


@dataclass(frozen=True)
class CodingSequence:
    seq_id: str
    dna: str
    raw_name: Optional[str] = None
    feature_kind: FeatureKind = FeatureKind.CDS

    def __post_init__(self):
        if not self.dna or not set(self.dna) <= _ACGT:
            raise IngestError(f"{self.seq_id}: dna must be a non-empty string over ACGT")
        split_seq_id(self.seq_id)

    @property
    def accession(self) -> str:
        return split_seq_id(self.seq_id)[0]


@dataclass(frozen=True)
class Genome:
    accession: str
    scientific_name: str
    family: str
    sequences: tuple[CodingSequence, ...] = field(default_factory=tuple)
    annotation_source: AnnotationSource = AnnotationSource.NCBI_STYLE

    def __post_init__(self):
        if not self.accession:
            raise IngestError("genome accession must be non-empty")
        if not self.sequences:
            raise IngestError(f"{self.accession}: genome has no sequences")
        object.__setattr__(self, "sequences", tuple(self.sequences))
        for cs in self.sequences:
            if cs.accession != self.accession:
                raise IngestError(f"{cs.seq_id} does not belong to genome {self.accession}")

    @property
    def seq_ids(self) -> list[str]:
        return [cs.seq_id for cs in self.sequences]


def validate_dataset(genomes: Iterable[Genome]) -> list[Genome]:
    """Check accession uniqueness across a dataset and return it as a list."""
    genomes = list(genomes)
    seen = set()
    for g in genomes:
        if g.accession in seen:
            raise IngestError(f"duplicate accession {g.accession}")
        seen.add(g.accession)
    return genomes


def _parse_header(header: str) -> tuple[str, dict[str, str]]:
    parts = header.split()
    if not parts:
        return "", {}
    attrs = {}
    for tok in parts[1:]:
        key, sep, value = tok.partition("=")
        if sep:
            attrs[key.lower()] = value
    return parts[0], attrs


def read_fasta(path) -> list[tuple[str, str]]:
    """Return ``(header, sequence)`` pairs in file order."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    records = []
    header = None
    chunks: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith(">"):
            if header is not None:
                records.append((header, "".join(chunks)))
            header, chunks = line[1:].strip(), []
        elif header is None:
            raise IngestError(f"{path}:{lineno}: sequence data before first header")
        else:
            chunks.append(line)
    if header is not None:
        records.append((header, "".join(chunks)))
    if not records:
        raise IngestError(f"{path}: no records")
    return records


def load_fasta(path, accession: str, metadata: tuple[str, str], *,
               degenerate: str = "strip",
               annotation_source: AnnotationSource = AnnotationSource.NCBI_STYLE) -> Genome:
    """Load one genome from a FASTA file of coding sequences.

    ``metadata`` is the ``(scientific_name, family)`` pair. Headers may carry
    ``gene=<name>`` and ``kind=<CDS|rRNA|...>`` tokens after the record id;
    records without ``kind`` are taken as CDS.
    """
    scientific_name, family = metadata
    seqs = []
    for ordinal, (header, raw) in enumerate(read_fasta(path)):
        rec_id, attrs = _parse_header(header)
        where = f"{path}: record {rec_id or ordinal}"
        if not _WS.sub("", raw):
            raise IngestError(f"{where}: empty sequence")
        dna = normalize_dna(raw, degenerate, where)
        if not dna:
            raise IngestError(f"{where}: empty sequence after normalization")
        kind = FeatureKind.parse(attrs["kind"]) if "kind" in attrs else FeatureKind.CDS
        seqs.append(CodingSequence(make_seq_id(accession, ordinal), dna,
                                   attrs.get("gene") or None, kind))
    return Genome(accession, scientific_name, family, tuple(seqs), annotation_source)


TABLE_COLUMNS = ("accession", "scientific_name", "family", "gene_name", "feature_kind", "sequence")


def load_annotation_table(path, *, degenerate: str = "strip",
                          annotation_source: AnnotationSource = AnnotationSource.NCBI_STYLE
                          ) -> list[Genome]:
    """Load genomes from a tab-separated annotation table.

    Required columns are those in :data:`TABLE_COLUMNS`; an optional
    ``ordinal`` column pins seq_id ordinals (otherwise rows are numbered in
    order within each accession). Rows must be grouped by accession.
    """
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh, delimiter="\t")
        header = reader.fieldnames or []
        missing = [c for c in TABLE_COLUMNS if c not in header]
        if missing:
            raise IngestError(f"{path}: missing column(s) {', '.join(missing)}")
        has_ordinal = "ordinal" in header

        groups: dict[str, dict] = {}
        order: list[str] = []
        for lineno, row in enumerate(reader, 2):
            acc = (row["accession"] or "").strip()
            where = f"{path}:{lineno}"
            if not acc:
                raise IngestError(f"{where}: empty accession")
            meta = ((row["scientific_name"] or "").strip(), (row["family"] or "").strip())
            if acc not in groups:
                groups[acc] = {"meta": meta, "seqs": [], "ordinals": set()}
                order.append(acc)
            elif order[-1] != acc:
                raise IngestError(f"{where}: rows for {acc} are not contiguous")
            grp = groups[acc]
            if grp["meta"] != meta:
                raise IngestError(f"{where}: inconsistent metadata for {acc}")
            if has_ordinal:
                try:
                    ordinal = int(row["ordinal"])
                except (TypeError, ValueError):
                    raise IngestError(f"{where}: bad ordinal {row['ordinal']!r}") from None
            else:
                ordinal = len(grp["seqs"])
            if ordinal in grp["ordinals"]:
                raise IngestError(f"{where}: duplicate (accession, ordinal) ({acc}, {ordinal})")
            grp["ordinals"].add(ordinal)
            raw = row["sequence"] or ""
            if not raw.strip():
                raise IngestError(f"{where}: empty sequence")
            dna = normalize_dna(raw, degenerate, where)
            if not dna:
                raise IngestError(f"{where}: empty sequence after normalization")
            name = (row["gene_name"] or "").strip() or None
            kind = FeatureKind.parse(row["feature_kind"] or "")
            grp["seqs"].append(CodingSequence(make_seq_id(acc, ordinal), dna, name, kind))

    if not order:
        raise IngestError(f"{path}: no records")
    return [Genome(acc, *groups[acc]["meta"], tuple(groups[acc]["seqs"]), annotation_source)
            for acc in order]


def write_annotation_table(genomes: Iterable[Genome], path) -> None:
    """Serialize genomes in the format read by :func:`load_annotation_table`."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(TABLE_COLUMNS + ("ordinal",))
        for g in genomes:
            for cs in g.sequences:
                w.writerow([g.accession, g.scientific_name, g.family, cs.raw_name or "",
                            cs.feature_kind.value, cs.dna, split_seq_id(cs.seq_id)[1]])


def filter_features(g: Genome, kinds) -> Genome:
    """Keep only sequences whose feature kind is in ``kinds``; seq_ids are kept as-is."""
    kinds = frozenset(kinds)
    if not kinds:
        raise ValueError("kinds must be non-empty")
    kept = tuple(cs for cs in g.sequences if cs.feature_kind in kinds)
    if not kept:
        raise IngestError(f"{g.accession}: empty after filter")
    return replace(g, sequences=kept)
