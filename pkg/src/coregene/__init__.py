"""Core and pan genome extraction for annotated organellar genomes.

Two methods are provided: sequence-similarity clustering over global
alignments (:mod:`coregene.similarity_core`) and greedy gene-name
intersection (:mod:`coregene.name_core`). Results are rendered as core
trees by :mod:`coregene.core_tree`.
"""

__version__ = "0.1.0"
