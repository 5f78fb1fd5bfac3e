"""Core trees: the greedy merge history as a binary forest, with DOT/Newick output.

Leaves are genomes, internal nodes are predicted cores, and each edge carries
the number of genes lost going from the child to its parent core.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Mapping, Optional


class TreeError(ValueError):
    pass


class NodeKind(enum.Enum):
    GENOME_LEAF = "genome"
    CORE_INTERNAL = "core"


@dataclass(frozen=True)
class CoreNode:
    label: str
    kind: NodeKind
    gene_count: int
    family: Optional[str] = None
    accession: Optional[str] = None
    scientific_name: Optional[str] = None
    children: tuple = ()
    names: Optional[frozenset] = None

    def __post_init__(self):
        if self.kind is NodeKind.GENOME_LEAF and self.children:
            raise TreeError(f"leaf {self.label} cannot have children")
        if self.kind is NodeKind.CORE_INTERNAL:
            if len(self.children) != 2:
                raise TreeError(f"core node {self.label} needs exactly two children")
            if self.gene_count > min(c.gene_count for c in self.children):
                raise TreeError(f"core node {self.label} is larger than a child")

    @property
    def is_leaf(self) -> bool:
        return self.kind is NodeKind.GENOME_LEAF

    @property
    def edge_losses(self) -> tuple[int, ...]:
        return tuple(c.gene_count - self.gene_count for c in self.children)

    @property
    def display_label(self) -> str:
        if self.is_leaf and self.family is not None:
            return f"{self.gene_count}:{self.family}_{self.scientific_name}_{self.accession}"
        return f"{self.gene_count}:{self.label}"

    def iter_preorder(self):
        yield self
        for c in self.children:
            yield from c.iter_preorder()

    def leaves(self):
        return [n for n in self.iter_preorder() if n.is_leaf]


@dataclass(frozen=True)
class CoreForest:
    roots: tuple

    def __post_init__(self):
        if not self.roots:
            raise TreeError("a core forest needs at least one root")

    def leaves(self) -> list[CoreNode]:
        return [leaf for r in self.roots for leaf in r.leaves()]

    def nodes(self) -> list[CoreNode]:
        return [n for r in self.roots for n in r.iter_preorder()]


@dataclass(frozen=True)
class Merge:
    left: str
    right: str
    label: str
    names: frozenset
    score: int


@dataclass(frozen=True)
class MergeHistory:
    """Leaves as (label, names) pairs, merges in order, and the surviving labels."""

    leaves: tuple
    merges: tuple
    roots: tuple


def build_forest(history: MergeHistory, genomes: Optional[Mapping] = None) -> CoreForest:
    """Turn a merge history into a forest.

    ``genomes`` maps accession to an object with ``scientific_name`` and
    ``family`` attributes (a :class:`~coregene.ingest.Genome` works) and is
    used for leaf labels.
    """
    genomes = genomes or {}
    live: dict[str, CoreNode] = {}
    for label, names in history.leaves:
        if label in live:
            raise TreeError(f"duplicate leaf label {label}")
        meta = genomes.get(label)
        live[label] = CoreNode(label, NodeKind.GENOME_LEAF, len(names),
                               family=getattr(meta, "family", None),
                               accession=label,
                               scientific_name=getattr(meta, "scientific_name", None),
                               names=frozenset(names))
    for m in history.merges:
        try:
            left, right = live.pop(m.left), live.pop(m.right)
        except KeyError as exc:
            raise TreeError(f"merge {m.label} references unknown label {exc.args[0]}") from None
        if m.label in live:
            raise TreeError(f"duplicate node label {m.label}")
        if left.names is not None and right.names is not None and m.names != left.names & right.names:
            raise TreeError(f"merge {m.label} is not the intersection of its children")
        live[m.label] = CoreNode(m.label, NodeKind.CORE_INTERNAL, len(m.names),
                                 children=(left, right), names=frozenset(m.names))
    if set(history.roots) != set(live) or len(history.roots) != len(live):
        raise TreeError("merge history roots do not match the unmerged nodes")
    return CoreForest(tuple(live[r] for r in history.roots))


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(forest: CoreForest) -> str:
    """Graphviz DOT text; each root is its own subgraph, nodes in preorder."""
    lines = ["digraph coretree {"]
    counter = 0
    for r_idx, root in enumerate(forest.roots):
        lines.append(f"  subgraph tree_{r_idx} {{")
        ids = {}
        edges = []
        for node in root.iter_preorder():
            ids[id(node)] = f"n{counter}"
            counter += 1
            shape = "box" if node.is_leaf else "ellipse"
            lines.append(f"    {ids[id(node)]} [label={_dot_quote(node.display_label)}, shape={shape}];")
        for node in root.iter_preorder():
            for child, loss in zip(node.children, node.edge_losses):
                edges.append(f"    {ids[id(node)]} -> {ids[id(child)]} [label=\"{loss}\"];")
        lines.extend(edges)
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _nwk_quote(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def _newick(node: CoreNode) -> str:
    if node.is_leaf:
        return _nwk_quote(node.display_label)
    parts = [f"{_newick(c)}:{loss}" for c, loss in zip(node.children, node.edge_losses)]
    return "(" + ",".join(parts) + ")" + _nwk_quote(node.display_label)


def emit_newick(forest: CoreForest) -> str:
    """One Newick line per root; branch lengths are gene-loss counts."""
    return "".join(_newick(r) + ";\n" for r in forest.roots)


def _node_doc(node: CoreNode) -> dict:
    doc = {
        "label": node.label,
        "kind": node.kind.value,
        "gene_count": node.gene_count,
        "display_label": node.display_label,
    }
    if node.is_leaf:
        doc.update(accession=node.accession, family=node.family,
                   scientific_name=node.scientific_name)
    if node.names is not None:
        doc["names"] = sorted(node.names)
    if node.children:
        doc["edge_losses"] = list(node.edge_losses)
        doc["children"] = [_node_doc(c) for c in node.children]
    return doc


def forest_json(forest: CoreForest) -> str:
    return json.dumps({"roots": [_node_doc(r) for r in forest.roots]}, indent=2) + "\n"


def _node_from_doc(doc: dict) -> CoreNode:
    names = frozenset(doc["names"]) if "names" in doc else None
    kind = NodeKind(doc["kind"])
    if kind is NodeKind.GENOME_LEAF:
        return CoreNode(doc["label"], kind, doc["gene_count"], family=doc.get("family"),
                        accession=doc.get("accession"), scientific_name=doc.get("scientific_name"),
                        names=names)
    children = tuple(_node_from_doc(c) for c in doc.get("children", ()))
    return CoreNode(doc["label"], kind, doc["gene_count"], children=children, names=names)


def forest_from_json(text: str) -> CoreForest:
    """Inverse of :func:`forest_json`."""
    try:
        return CoreForest(tuple(_node_from_doc(r) for r in json.loads(text)["roots"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TreeError(f"bad core forest document: {exc}") from exc
