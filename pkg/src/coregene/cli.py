"""End-to-end runs: ingest, similarity or name method, reports and trees.

Every run writes ``manifest.json`` with the configuration, input digests,
the tool version and a digest over all emitted files, so identical inputs
and configuration reproduce byte-identical outputs.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .align import AlignmentError, AlignmentParams, CacheError, PairwiseStats, SimilarityStore, all_pairs
from .core_tree import CoreForest, MergeHistory, TreeError, build_forest, emit_dot, emit_newick, forest_json
from .ingest import (AnnotationSource, FeatureKind, IngestError, filter_features, load_annotation_table,
                     load_fasta, validate_dataset)
from .name_core import GeneNameError, NameSet, build_icm, greedy_merge, to_name_set
from .similarity_core import GraphError, analyze, core_pan_json, sweep_csv, threshold_sweep

log = logging.getLogger(__name__)

CACHE_ENV = "COREGENE_CACHE"
EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3, 4


class Method(enum.Enum):
    SIMILARITY = "similarity"
    NAMES = "names"


class RunError(Exception):
    def __init__(self, stage: str, exit_code: int, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code


class ConfigError(RunError):
    def __init__(self, message: str):
        super().__init__("config", EXIT_CONFIG, message)


@dataclass(frozen=True)
class RunConfig:
    input_path: Path
    output_dir: Path
    method: Method = Method.NAMES
    annotation_mode: AnnotationSource = AnnotationSource.NCBI_STYLE
    thresholds: tuple = ()
    feature_kinds: Optional[frozenset] = None
    align: AlignmentParams = AlignmentParams()
    cache_path: Optional[Path] = None
    workers: int = 1
    batch_size: int = 256

    def validate(self) -> "RunConfig":
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.method is Method.SIMILARITY:
            if not self.thresholds:
                raise ConfigError("the similarity method needs at least one --threshold")
            for t in self.thresholds:
                if not 0.0 <= t <= 1.0:
                    raise ConfigError(f"threshold {t} outside [0, 1]")
        if self.feature_kinds is not None and not self.feature_kinds:
            raise ConfigError("feature kinds must be non-empty")
        return self

    @property
    def kinds(self) -> frozenset:
        if self.feature_kinds is not None:
            return self.feature_kinds
        # NCBI gene features carry no rRNA; DOGMA predicts it
        if self.annotation_mode is AnnotationSource.DOGMA_STYLE:
            return frozenset({FeatureKind.CDS, FeatureKind.RRNA})
        return frozenset({FeatureKind.CDS})

    @property
    def sweep(self) -> list:
        return sorted(set(self.thresholds))

    def resolved_cache(self) -> Path:
        if self.cache_path is not None:
            return Path(self.cache_path)
        env = os.environ.get(CACHE_ENV)
        if env:
            return Path(env)
        return self.output_dir / "similarity_cache.csv"

    def echo(self) -> dict:
        doc = {
            "input": str(self.input_path),
            "method": self.method.value,
            "annotation_mode": self.annotation_mode.value,
            "feature_kinds": sorted(k.value for k in self.kinds),
        }
        if self.method is Method.SIMILARITY:
            doc.update(thresholds=self.sweep,
                       gap_open=self.align.gap_open, gap_extend=self.align.gap_extend,
                       match_score=self.align.match_score, mismatch_score=self.align.mismatch_score,
                       cache=str(self.resolved_cache()))
        return doc


@dataclass
class ReportBundle:
    output_dir: Path
    files: list = field(default_factory=list)
    alignments_computed: int = 0
    alignments_cached: int = 0
    manifest: Optional[Path] = None


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_inputs(path: Path, mode: AnnotationSource) -> tuple[list, list]:
    """Load genomes from an annotation table or a FASTA manifest.

    A FASTA manifest is a TSV with columns accession, scientific_name,
    family, path (relative paths resolve against the manifest's directory).
    Returns the genomes and every file read.
    """
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh, delimiter="\t"), [])
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if "path" in header and "sequence" not in header:
        genomes, files = [], [path]
        with path.open(encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.DictReader(fh, delimiter="\t"), 2):
                try:
                    fasta = path.parent / row["path"]
                    meta = (row["scientific_name"], row["family"])
                    acc = row["accession"]
                except KeyError as exc:
                    raise IngestError(f"{path}: missing column {exc.args[0]}") from None
                if not acc or not row["path"]:
                    raise IngestError(f"{path}:{lineno}: empty accession or path")
                genomes.append(load_fasta(fasta, acc, meta, annotation_source=mode))
                files.append(fasta)
        return validate_dataset(genomes), files
    return validate_dataset(load_annotation_table(path, annotation_source=mode)), [path]


def _single_leaf_history(items) -> MergeHistory:
    return MergeHistory(tuple((it.label, it.names) for it in items), (), tuple(it.label for it in items))


def _forest(items, genomes) -> CoreForest:
    history = greedy_merge(items) if len(items) > 1 else _single_leaf_history(items)
    return build_forest(history, {g.accession: g for g in genomes})


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, Path] = {}

    def text(self, name: str, content: str) -> None:
        p = self.out_dir / name
        p.write_text(content, encoding="utf-8", newline="\n")
        self.files[name] = p


def _tree_outputs(w: _Writer, forest: CoreForest, suffix: str = "") -> None:
    w.text(f"forest{suffix}.json", forest_json(forest))
    w.text(f"coretree{suffix}.dot", emit_dot(forest))
    w.text(f"coretree{suffix}.nwk", emit_newick(forest))


def _run_similarity(cfg: RunConfig, genomes, w: _Writer, bundle: ReportBundle) -> None:
    seqs = [cs for g in genomes for cs in g.sequences]
    cache_path = cfg.resolved_cache()
    try:
        store = SimilarityStore(cache_path)
    except CacheError as exc:
        raise RunError("align", EXIT_COMPUTE, str(exc)) from exc
    stats = PairwiseStats()
    try:
        records = all_pairs(seqs, cfg.align, store, workers=cfg.workers,
                            batch_size=cfg.batch_size, stats=stats)
    except (AlignmentError, CacheError) as exc:
        raise RunError("align", EXIT_COMPUTE, f"{exc} (completed pairs kept in {cache_path})") from exc
    finally:
        bundle.alignments_computed = stats.computed
        bundle.alignments_cached = stats.cached
    try:
        rows = threshold_sweep(records, genomes, cfg.sweep, workers=cfg.workers)
        w.text("sweep.csv", sweep_csv(rows))
        for T in cfg.sweep:
            classes, projected, core, pan = analyze(records, genomes, T)
            tag = f"_t{T:g}"
            w.text(f"core_pan{tag}.json", core_pan_json(T, classes, core, pan))
            items = [NameSet(p.accession, frozenset(f"CLASS{c}" for c in p.classes)) for p in projected]
            _tree_outputs(w, _forest(items, genomes), tag)
    except (GraphError, TreeError) as exc:
        raise RunError("cluster", EXIT_COMPUTE, str(exc)) from exc


def _run_names(cfg: RunConfig, genomes, w: _Writer) -> None:
    skipped: dict = {}
    try:
        items = [to_name_set(g, cfg.annotation_mode, skipped) for g in genomes]
    except GeneNameError as exc:
        raise RunError("names", EXIT_INPUT, str(exc)) from exc
    try:
        if len(items) > 1:
            w.text("icm.csv", build_icm(items).to_csv())
        forest = _forest(items, genomes)
    except (ValueError, TreeError) as exc:
        raise RunError("names", EXIT_COMPUTE, str(exc)) from exc
    core = frozenset.intersection(*(it.names for it in items))
    pan = frozenset.union(*(it.names for it in items))
    w.text("core_pan.json", json.dumps({"threshold": None, "core": sorted(core), "pan": sorted(pan)},
                                       indent=2) + "\n")
    w.text("names_report.json", json.dumps({"unnamed_sequences": dict(sorted(skipped.items()))},
                                           indent=2) + "\n")
    _tree_outputs(w, forest)


def run(cfg: RunConfig) -> ReportBundle:
    """Execute one configured run and write its report files."""
    cfg.validate()
    try:
        genomes, input_files = load_inputs(cfg.input_path, cfg.annotation_mode)
        genomes = [filter_features(g, cfg.kinds) for g in genomes]
    except IngestError as exc:
        raise RunError("ingest", EXIT_INPUT, str(exc)) from exc

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)
    w = _Writer(out)
    if cfg.method is Method.SIMILARITY:
        _run_similarity(cfg, genomes, w, bundle)
    else:
        _run_names(cfg, genomes, w)

    outputs = {name: sha256_file(p) for name, p in sorted(w.files.items())}
    content = hashlib.sha256("".join(f"{n}\t{d}\n" for n, d in outputs.items()).encode()).hexdigest()
    manifest = {
        "tool": "coregene",
        "version": __version__,
        "config": cfg.echo(),
        "inputs": {str(p): sha256_file(p) for p in input_files},
        "genomes": [g.accession for g in genomes],
        "outputs": outputs,
        "content_hash": content,
    }
    w.text("manifest.json", json.dumps(manifest, indent=2) + "\n")
    bundle.files = [w.files[n] for n in sorted(w.files)]
    bundle.manifest = w.files["manifest.json"]
    return bundle


def _parse_features(value: Optional[str]) -> Optional[frozenset]:
    if value is None:
        return None
    kinds = set()
    for tok in value.split(","):
        tok = tok.strip()
        if not tok:
            continue
        kind = FeatureKind.parse(tok)
        if kind is FeatureKind.OTHER and tok.upper() != "OTHER":
            raise click.BadParameter(f"unknown feature kind {tok!r}", param_hint="--features")
        kinds.add(kind)
    if not kinds:
        raise click.BadParameter("no feature kinds given", param_hint="--features")
    return frozenset(kinds)


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--input", "input_path", required=True, type=click.Path(path_type=Path),
              help="Annotation table (TSV) or FASTA manifest (TSV with a path column).")
@click.option("--out", "output_dir", required=True, type=click.Path(path_type=Path),
              help="Output directory.")
@click.option("--method", type=click.Choice(["similarity", "names"]), default="names", show_default=True)
@click.option("--annotation-mode", type=click.Choice(["ncbi", "dogma"]), default="ncbi", show_default=True)
@click.option("--threshold", "thresholds", type=float, multiple=True,
              help="Similarity threshold in [0,1]; repeat for a sweep.")
@click.option("--features", default=None, help="Comma-separated feature kinds (cds,rrna,other). "
              "Default: cds for ncbi, cds,rrna for dogma.")
@click.option("--gap-open", type=float, default=10.0, show_default=True)
@click.option("--gap-extend", type=float, default=0.5, show_default=True)
@click.option("--cache", "cache_path", type=click.Path(path_type=Path), default=None,
              help=f"Similarity cache CSV (default: ${CACHE_ENV} or <out>/similarity_cache.csv).")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("-v", "--verbose", is_flag=True)
def main(input_path, output_dir, method, annotation_mode, thresholds, features,
         gap_open, gap_extend, cache_path, workers, verbose):
    """Compute core and pan genomes of a genome collection."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        params = AlignmentParams(gap_open=gap_open, gap_extend=gap_extend)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    cfg = RunConfig(input_path=input_path, output_dir=output_dir, method=Method(method),
                    annotation_mode=AnnotationSource(annotation_mode), thresholds=tuple(thresholds),
                    feature_kinds=_parse_features(features), align=params,
                    cache_path=cache_path, workers=workers)
    try:
        bundle = run(cfg)
    except RunError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    if cfg.method is Method.SIMILARITY:
        click.echo(f"alignments: {bundle.alignments_computed} computed, "
                   f"{bundle.alignments_cached} from cache", err=True)
    click.echo(f"wrote {len(bundle.files)} files to {bundle.output_dir}", err=True)


if __name__ == "__main__":
    main()
