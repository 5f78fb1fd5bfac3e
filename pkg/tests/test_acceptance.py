"""Acceptance criteria C1-C10. A PASS/FAIL line per criterion is printed in the summary."""
import csv
import json
import random
import time
from collections import Counter
from itertools import combinations

import pytest

from coregene.align import PairwiseStats, SimilarityRecord, SimilarityStore, align_global, all_pairs, similarity
from coregene.cli import Method, RunConfig, run
from coregene.core_tree import NodeKind, build_forest, emit_dot, emit_newick
from coregene.ingest import AnnotationSource, CodingSequence, load_annotation_table, write_annotation_table
from coregene.name_core import NameSet, extract_cores, greedy_merge, normalize_name
from coregene.similarity_core import analyze, build_graph, gene_classes
from coregene.synthetic import planted_dataset
from oracles import all_pair_count, brute_intersection, enumerate_best, random_dna, reference_align, warshall_partition

SWEEP = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))  # 0.50 .. 0.95


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    """Cold single-threaded similarity run over the planted-core dataset."""
    root = tmp_path_factory.mktemp("planted")
    data = planted_dataset(seed=0, n_genomes=10, n_core=25, private_range=(5, 15))
    table = root / "planted.tsv"
    write_annotation_table(data.genomes, table)
    cfg = RunConfig(table, root / "out", Method.SIMILARITY, thresholds=SWEEP, workers=1)
    start = time.perf_counter()
    bundle = run(cfg)
    elapsed = time.perf_counter() - start
    return data, cfg, bundle, elapsed


def test_c1_alignment_oracle(criterion):
    criterion("C1", "DP score/similarity == quadratic reference (200 pairs, len 5-60) and enumeration (len <= 8); < 30 s")
    rng = random.Random(1001)
    start = time.perf_counter()
    pairs = [(random_dna(rng, 5, 60), random_dna(rng, 5, 60)) for _ in range(200)]
    for x, y in pairs:
        r = align_global(x, y)
        ref_score, ref_ident, ref_len = reference_align(x, y)
        assert r.score == ref_score
        assert r.similarity == ref_ident / ref_len
    short = [(x, y) for x, y in pairs if len(x) <= 8 and len(y) <= 8]
    short += [(random_dna(rng, 5, 8), random_dna(rng, 5, 8)) for _ in range(15)]
    for x, y in short:
        r = align_global(x, y)
        e_score, e_ident, e_len = enumerate_best(x, y)
        assert r.score == e_score
        assert r.similarity == e_ident / e_len
    assert time.perf_counter() - start < 30


def test_c2_similarity_axioms(criterion):
    criterion("C2", "similarity(x,x) == 1.0 and similarity(x,y) == similarity(y,x) over 500 random pairs")
    rng = random.Random(1002)
    for _ in range(500):
        x, y = random_dna(rng, 1, 60), random_dna(rng, 1, 60)
        assert similarity(x, x) == 1.0
        assert similarity(x, y) == similarity(y, x)


def test_c3_clustering_oracle(criterion):
    criterion("C3", "gene_classes partition == Warshall closure partition on 50 random graphs (n <= 50)")
    rng = random.Random(1003)
    for _ in range(50):
        n = rng.randint(1, 50)
        names = [f"s{k:02d}" for k in range(n)]
        p_edge = rng.choice([0.01, 0.03, 0.06, 0.1, 0.3])
        recs = {SimilarityRecord(a, b, 0.95 if rng.random() < p_edge else 0.2)
                for a, b in combinations(names, 2)}
        g = build_graph(recs, 0.9, vertices=names)
        assert {c.members for c in gene_classes(g)} == warshall_partition(names, g.edges)


def test_c4_planted_core(planted, criterion):
    criterion("C4", "planted dataset at T=0.9: core_size == 25, pan_size == 25 + private; < 60 s single-threaded")
    data, cfg, bundle, elapsed = planted
    assert len(data.genomes) == 10
    assert all(5 <= sum(1 for cs in g.sequences if cs.raw_name.startswith("priv")) <= 15 for g in data.genomes)
    assert elapsed < 60, elapsed

    store = SimilarityStore(cfg.resolved_cache())
    fam = {sid: f for f, ids in data.core_families.items() for sid in ids}
    for r in store.records():
        fa, fb = fam.get(r.seq_id_a), fam.get(r.seq_id_b)
        if fa is not None and fa == fb:
            assert r.similarity >= 0.92
        else:
            assert r.similarity <= 0.60

    rows = {float(r["threshold"]): r for r in csv.DictReader((cfg.output_dir / "sweep.csv").open())}
    assert int(rows[0.9]["core_size"]) == 25
    assert int(rows[0.9]["pan_size"]) == 25 + data.n_private
    doc = json.loads((cfg.output_dir / "core_pan_t0.9.json").read_text())
    assert len(doc["core"]) == 25 and len(doc["pan"]) == 25 + data.n_private
    assert sorted(sorted(c["members"]) for c in doc["core"]) == sorted(sorted(v) for v in data.core_families.values())


def test_c5_pan_monotone(planted, criterion):
    criterion("C5", "planted sweep T in {0.50,...,0.95}: pan_size non-decreasing")
    _, cfg, _, _ = planted
    rows = list(csv.DictReader((cfg.output_dir / "sweep.csv").open()))
    assert tuple(float(r["threshold"]) for r in rows) == SWEEP
    pans = [int(r["pan_size"]) for r in rows]
    assert all(a <= b for a, b in zip(pans, pans[1:])), pans


def test_c6_greedy_soundness(criterion):
    criterion("C6", "100 random name-set instances: single root equal to brute-force n-way intersection")
    rng = random.Random(1006)
    alphabet = [f"N{k}" for k in range(40)]
    for _ in range(100):
        n = rng.randint(2, 12)
        shared = set(rng.sample(alphabet, rng.randint(1, 6)))
        items = [NameSet(f"g{i}", shared | set(rng.sample(alphabet, rng.randint(0, 30)))) for i in range(n)]
        forest = extract_cores(items)
        assert len(forest.roots) == 1
        assert forest.roots[0].names == brute_intersection([it.names for it in items])


def test_c7_alignment_accounting(criterion):
    criterion("C7", "all_pairs: empty cache -> n(n-1)/2 alignments, full cache -> 0")
    rng = random.Random(1007)
    for n in (2, 5, 17, 40):
        seqs = [CodingSequence(f"A:{i}", random_dna(rng, 10, 40)) for i in range(n)]
        store = SimilarityStore()
        cold, warm = PairwiseStats(), PairwiseStats()
        first = all_pairs(seqs, cache=store, stats=cold)
        assert cold.computed == all_pair_count(n) == len(first)
        second = all_pairs(seqs, cache=store, stats=warm)
        assert warm.computed == 0 and second == first


def test_c8_name_normalization(criterion):
    criterion("C8", "rps12_3end/rps12_5end -> RPS12 (DOGMA), ycf(2) -> YCF2, case folding, ND6 != NAD6")
    dogma, ncbi = AnnotationSource.DOGMA_STYLE, AnnotationSource.NCBI_STYLE
    assert normalize_name("rps12_3end", dogma) == "RPS12"
    assert normalize_name("rps12_5end", dogma) == "RPS12"
    for mode in (ncbi, dogma):
        assert normalize_name("ycf(2)", mode) == "YCF2"
        assert normalize_name("ND6", mode) != normalize_name("NAD6", mode)
        for raw in ("psbA", "PSBA", "PsBa", "rbcL", "ndhF", "matK", "ycf(2)", "rps12_3end"):
            out = normalize_name(raw, mode)
            assert out == out.upper() and not set(out) & set("_()")
            assert normalize_name(raw.lower(), mode) == normalize_name(raw.upper(), mode) == out


def _forests(planted_data):
    rng = random.Random(1009)
    alphabet = [f"N{k}" for k in range(25)]
    for _ in range(40):
        items = [NameSet(f"g{i}", set(rng.sample(alphabet, rng.randint(1, 18)))) for i in range(rng.randint(2, 12))]
        yield [it.label for it in items], lambda items=items: extract_cores(items)
    data, cfg, _, _ = planted_data
    genomes = load_annotation_table(cfg.input_path)
    by_acc = {g.accession: g for g in genomes}
    recs = SimilarityStore(cfg.resolved_cache()).records()
    for T in (0.5, 0.9, 0.95):
        _, projected, _, _ = analyze(recs, genomes, T)
        items = [NameSet(p.accession, frozenset(f"CLASS{c}" for c in p.classes)) for p in projected]
        yield [g.accession for g in genomes], lambda items=items: build_forest(greedy_merge(items), by_acc)


def test_c9_tree_invariants(planted, criterion):
    criterion("C9", "forests: internal sets within both children, losses >= 0, leaves == inputs, "
                    "DOT/Newick byte-deterministic")
    for accessions, make in _forests(planted):
        forest = make()
        for node in forest.nodes():
            assert all(loss >= 0 for loss in node.edge_losses)
            if node.kind is NodeKind.CORE_INTERNAL:
                assert all(node.names <= c.names for c in node.children)
        assert Counter(leaf.label for leaf in forest.leaves()) == Counter(accessions)
        again = make()
        assert emit_dot(forest).encode() == emit_dot(again).encode()
        assert emit_newick(forest).encode() == emit_newick(again).encode()


def test_c10_warm_rerun(planted, criterion):
    criterion("C10", "warm-cache rerun of C4: zero alignments, byte-identical output files")
    _, cfg, cold, _ = planted
    before = {p.name: p.read_bytes() for p in cold.files}
    warm = run(cfg)
    assert warm.alignments_computed == 0
    assert warm.alignments_cached == cold.alignments_computed
    after = {p.name: p.read_bytes() for p in warm.files}
    assert after == before
