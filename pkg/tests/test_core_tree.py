import random

import pytest

from coregene.core_tree import (CoreForest, CoreNode, Merge, MergeHistory, NodeKind, TreeError, build_forest,
                                emit_dot, emit_newick, forest_from_json, forest_json)
from coregene.ingest import CodingSequence, Genome
from coregene.name_core import NameSet, extract_cores
from oracles import parse_newick


def history_ab(a=frozenset("ABC"), b=frozenset("BCD")):
    return MergeHistory((("A", a), ("B", b)), (Merge("A", "B", "core_1", a & b, len(a & b)),), ("core_1",))


def test_merge_losses():
    root = build_forest(history_ab()).roots[0]
    assert root.gene_count == 2
    assert root.edge_losses == (1, 1)


def test_identical_children_no_loss():
    s = frozenset("XYZ")
    assert build_forest(history_ab(s, s)).roots[0].edge_losses == (0, 0)


def test_leaf_label_format():
    g = Genome("NC_007898.3", "Solanum lyopersicum", "Angiosperms", (CodingSequence("NC_007898.3:0", "A", "x"),))
    h = MergeHistory((("NC_007898.3", frozenset({"PSBA", "RBCL"})),), (), ("NC_007898.3",))
    leaf = build_forest(h, {g.accession: g}).roots[0]
    assert leaf.display_label == "2:Angiosperms_Solanum lyopersicum_NC_007898.3"
    assert leaf.label == "NC_007898.3"


def test_unknown_label():
    bad = MergeHistory((("A", frozenset("A")),), (Merge("A", "Q", "core_1", frozenset(), 0),), ("core_1",))
    with pytest.raises(TreeError, match="unknown label Q"):
        build_forest(bad)


def test_bad_intersection():
    bad = MergeHistory((("A", frozenset("AB")), ("B", frozenset("AB"))),
                       (Merge("A", "B", "core_1", frozenset("A"), 1),), ("core_1",))
    with pytest.raises(TreeError, match="intersection"):
        build_forest(bad)


def test_node_invariants():
    leaf = CoreNode("A", NodeKind.GENOME_LEAF, 2)
    with pytest.raises(TreeError):
        CoreNode("c", NodeKind.CORE_INTERNAL, 1, children=(leaf,))
    with pytest.raises(TreeError):
        CoreNode("c", NodeKind.CORE_INTERNAL, 3, children=(leaf, leaf))
    with pytest.raises(TreeError):
        CoreNode("A", NodeKind.GENOME_LEAF, 1, children=(leaf, leaf))
    with pytest.raises(TreeError):
        CoreForest(())


def single_leaf():
    return build_forest(MergeHistory((("A", frozenset("X")),), (), ("A",)))


def test_dot_single_leaf():
    dot = emit_dot(single_leaf())
    assert dot.startswith("digraph coretree {")
    assert dot.count("[label=") == 1 and "->" not in dot


def test_dot_one_merge():
    dot = emit_dot(build_forest(history_ab()))
    assert dot.count("shape=") == 3
    assert dot.count("->") == 2
    assert 'n0 -> n1 [label="1"];' in dot and 'n0 -> n2 [label="1"];' in dot


def test_dot_quotes():
    g = Genome("Q1", 'Odd "name"', "Fam", (CodingSequence("Q1:0", "A", "x"),))
    forest = build_forest(MergeHistory((("Q1", frozenset("X")),), (), ("Q1",)), {"Q1": g})
    assert r'\"name\"' in emit_dot(forest)


def test_newick_shapes():
    assert emit_newick(single_leaf()) == "'1:A';\n"
    assert emit_newick(build_forest(history_ab())) == "('3:A':1,'3:B':1)'2:core_1';\n"


def test_newick_escapes_quotes():
    g = Genome("Q1", "O'Brien", "Fam", (CodingSequence("Q1:0", "A", "x"),))
    forest = build_forest(MergeHistory((("Q1", frozenset("X")),), (), ("Q1",)), {"Q1": g})
    text = emit_newick(forest)
    assert "O''Brien" in text
    assert parse_newick(text.strip())["label"] == "1:Fam_O'Brien_Q1"


def _flatten(tree, out):
    out.append((tree["label"], tree.get("length"), len(tree["children"])))
    for c in tree["children"]:
        _flatten(c, out)
    return out


def random_forest(rng):
    names = [f"G{k}" for k in range(30)]
    items = [NameSet(f"g{i}", set(rng.sample(names, rng.randint(1, 15)))) for i in range(rng.randint(2, 10))]
    return extract_cores(items)


def test_newick_roundtrip():
    rng = random.Random(31)
    for _ in range(25):
        forest = random_forest(rng)
        lines = emit_newick(forest).splitlines()
        assert len(lines) == len(forest.roots)
        for line, root in zip(lines, forest.roots):
            parsed = _flatten(parse_newick(line), [])
            expect = []

            def walk(node, length):
                expect.append((node.display_label, length, len(node.children)))
                for c, loss in zip(node.children, node.edge_losses):
                    walk(c, float(loss))

            walk(root, None)
            assert parsed == expect


def test_forest_json_roundtrip():
    rng = random.Random(32)
    for _ in range(10):
        forest = random_forest(rng)
        assert forest_from_json(forest_json(forest)) == forest


def test_forest_json_bad():
    with pytest.raises(TreeError):
        forest_from_json('{"nope": []}')


def test_forest_renders_as_subgraphs():
    items = [NameSet("a1", {"A"}), NameSet("b1", {"B"})]
    forest = extract_cores(items)
    dot = emit_dot(forest)
    assert dot.count("subgraph") == 2
    assert len(emit_newick(forest).splitlines()) == 2


def test_structural_invariants_random():
    rng = random.Random(33)
    for _ in range(30):
        forest = random_forest(rng)
        for node in forest.nodes():
            assert all(loss >= 0 for loss in node.edge_losses)
            for c in node.children:
                assert node.names <= c.names
        # losses summed down a path equal the leaf-minus-root count difference
        for root in forest.roots:
            def check(node, acc):
                if node.is_leaf:
                    assert acc == node.gene_count - root.gene_count
                for c, loss in zip(node.children, node.edge_losses):
                    check(c, acc + loss)
            check(root, 0)
        assert emit_dot(forest) == emit_dot(forest) and emit_newick(forest) == emit_newick(forest)
