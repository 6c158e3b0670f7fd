#!/usr/bin/env python3
"""Synthesize a Boolean-question benchmark from a raw corpus, offline.

Pipeline: embed passages, compress with randomized truncated SVD, cluster
agglomeratively so sampled candidates share a topic, generate simple and
disjunctive questions per cluster, compose AND/OR/NOT questions with
positive/negative labels, and keep only questions that pass cyclic
consistency filtering. Template mode needs no model or network and is
byte-reproducible under a fixed seed.
"""

from boolsearch import (
    Corpus,
    EmbedderSpec,
    GeneratorSpec,
    Passage,
    QuestionType,
    apply_cyclic_filter,
    assemble_dataset,
    cluster_corpus,
    generate_questions,
)
from boolsearch.data import render_stats

# three planted topics; each passage = topic words + its own detail words
corpus = Corpus([
    Passage("vol1", "volcano magma volcano magma ash plume ash plume"),
    Passage("vol2", "volcano magma volcano magma lava flow lava flow"),
    Passage("vol3", "volcano magma volcano magma crater rim crater rim"),
    Passage("reef1", "coral reef coral reef parrot fish parrot fish"),
    Passage("reef2", "coral reef coral reef sea anemone sea anemone"),
    Passage("reef3", "coral reef coral reef tidal lagoon tidal lagoon"),
    Passage("glac1", "glacier ice glacier ice moraine ridge moraine ridge"),
    Passage("glac2", "glacier ice glacier ice crevasse field crevasse field"),
    Passage("glac3", "glacier ice glacier ice melt water melt water"),
])

embedder = EmbedderSpec(dim=128, normalize=True, seed=5)
clusters = cluster_corpus(corpus, embedder, svd_rank=8, seed=0, target_count=3)
print("clusters:")
for cluster in clusters:
    print(f"  #{cluster.cluster_id}: {', '.join(cluster.passage_ids)}")

spec = GeneratorSpec(mode="template", seed=41, n_per_type=3)
questions = generate_questions(corpus, clusters, spec)
flagged = apply_cyclic_filter(questions, corpus, spec)

print("\ngenerated questions (* = survived cyclic consistency):")
for q in flagged:
    if q.qtype in (QuestionType.AND, QuestionType.OR, QuestionType.NOT):
        mark = "*" if q.filtered else " "
        print(f" {mark} [{q.qtype.value:3s}] {q.text}")
        print(f"      positives={sorted(q.positives)} negatives={sorted(q.negatives)}")

judgments, stats = assemble_dataset(flagged, corpus)
print(f"\nassembled {len(judgments)} judgments")
print(render_stats(stats))
