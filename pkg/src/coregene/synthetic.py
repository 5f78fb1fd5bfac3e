"""Synthetic genome collections with a known (planted) core genome.

Each core gene family has a random ancestor; every genome carries one copy
with a few substitutions, few enough that any two copies of a family stay at
or above ``min_family_identity`` over a gap-free alignment. Private genes are
independent random sequences. Lengths vary so that unrelated genes also
differ in length.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .ingest import CodingSequence, FeatureKind, Genome, make_seq_id

BASES = "ACGT"


@dataclass(frozen=True)
class PlantedDataset:
    genomes: list
    core_families: dict  # family name -> list of seq_ids
    private_ids: list

    @property
    def n_private(self) -> int:
        return len(self.private_ids)


def random_dna(rng: random.Random, length: int) -> str:
    return "".join(rng.choice(BASES) for _ in range(length))


def mutate(rng: random.Random, seq: str, n_subs: int) -> str:
    out = list(seq)
    for pos in rng.sample(range(len(seq)), n_subs):
        out[pos] = rng.choice([b for b in BASES if b != out[pos]])
    return "".join(out)


def planted_dataset(seed: int = 0, n_genomes: int = 10, n_core: int = 25,
                    private_range: tuple = (5, 15), length_range: tuple = (60, 90),
                    min_family_identity: float = 0.92) -> PlantedDataset:
    rng = random.Random(seed)
    ancestors = {f"CORE{k + 1:02d}": random_dna(rng, rng.randint(*length_range))
                 for k in range(n_core)}
    families = {name: [] for name in ancestors}
    private_ids = []
    genomes = []
    for g in range(n_genomes):
        acc = f"SYN{g + 1:03d}"
        entries = []
        for name, anc in ancestors.items():
            # two copies differ in at most twice this many sites
            max_subs = math.floor(len(anc) * (1 - min_family_identity) / 2)
            entries.append((name, mutate(rng, anc, rng.randint(0, max_subs)), True))
        for p in range(rng.randint(*private_range)):
            entries.append((f"PRIV{g + 1:03d}X{p + 1:02d}", random_dna(rng, rng.randint(*length_range)), False))
        rng.shuffle(entries)
        seqs = []
        for ordinal, (name, dna, is_core) in enumerate(entries):
            sid = make_seq_id(acc, ordinal)
            if is_core:
                families[name].append(sid)
            else:
                private_ids.append(sid)
            seqs.append(CodingSequence(sid, dna, name.lower(), FeatureKind.CDS))
        genomes.append(Genome(acc, f"Synthetica {g + 1}", "Synthetic", tuple(seqs)))
    return PlantedDataset(genomes, families, private_ids)


def main(argv=None):
    import argparse

    from .ingest import write_annotation_table

    ap = argparse.ArgumentParser(description="Write a planted-core genome collection as an annotation table.")
    ap.add_argument("output", help="destination TSV")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--genomes", type=int, default=10)
    ap.add_argument("--core", type=int, default=25)
    args = ap.parse_args(argv)
    data = planted_dataset(args.seed, args.genomes, args.core)
    write_annotation_table(data.genomes, args.output)
    print(f"{len(data.genomes)} genomes, {args.core} core genes, {data.n_private} private genes")


if __name__ == "__main__":
    main()
