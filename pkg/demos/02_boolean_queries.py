#!/usr/bin/env python3
"""Execute Boolean queries by merging per-atom candidate lists.

Shows the query grammar, the set-algebra merges (AND adds scores over the
intersection, OR takes the max over the union, NOT subtracts or drops),
and why hard NOT changes what a query about "pain but not liver" returns
compared with feeding the whole question to the retriever.

Per-atom candidate depth is depth_factor * k. On a toy five-passage corpus
a large depth would sweep the whole corpus into the negated atom's
candidate list and hard NOT would subtract everything, so this demo keeps
depth_factor=1; real corpora dwarf the depth.
"""

from boolsearch import (
    Corpus,
    EmbedderSpec,
    MergePolicy,
    Passage,
    build_index,
    evaluate_expr,
    parse_boolean_query,
    render,
    whole_query_retrieve,
)

corpus = Corpus([
    Passage("stomach", "stomach acid reflux causes upper abdomen pain"),
    Passage("muscle", "strained muscle causes upper abdomen pain"),
    Passage("liver1", "liver swelling causes upper abdomen pain"),
    Passage("liver2", "enlarged liver presses on the upper abdomen"),
    Passage("knee", "knee cartilage injury causes joint pain"),
])
spec = EmbedderSpec(dim=256, normalize=True, seed=3)
index = build_index(corpus, spec, similarity="cosine")


def show(ranked):
    if not len(ranked):
        print("  (empty)")
    for item in ranked:
        print(f"  {item.doc_id:8s} {item.score:+.4f}")


expr = parse_boolean_query('"upper abdomen pain" NOT "liver swelling"')
print("expression:", render(expr))

policy = MergePolicy(final_k=2, candidate_depth_factor=1, not_mode="hard")
print("\ndecomposed with hard NOT (liver candidates dropped):")
show(evaluate_expr(index, expr, policy))

soft = MergePolicy(final_k=2, candidate_depth_factor=1, not_mode="soft")
print("\ndecomposed with soft NOT (liver score subtracted, not dropped):")
show(evaluate_expr(index, expr, soft))

print("\nwhole-question baseline (negated words still attract):")
show(whole_query_retrieve(index, "upper abdomen pain but not related to liver swelling", 2))

nested = parse_boolean_query('("stomach acid" OR "strained muscle") AND "abdomen pain"')
print("\nnested:", render(nested))
show(evaluate_expr(index, nested, MergePolicy(final_k=3, candidate_depth_factor=2)))
