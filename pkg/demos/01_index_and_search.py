#!/usr/bin/env python3
"""Build an index over a small corpus and run exact top-k searches.

Walks through the retrieval core: a deterministic hashed bag-of-words
embedder, brute-force scoring with dot or cosine similarity, total
tie-breaking by doc id, and binary persistence round-trips.
"""

import tempfile
from pathlib import Path

from boolsearch import (
    Corpus,
    EmbedderSpec,
    Passage,
    build_index,
    load_index,
    save_index,
    top_k,
)

corpus = Corpus([
    Passage("p1", "the solar panel converts sunlight into electricity"),
    Passage("p2", "wind turbines convert moving air into electricity"),
    Passage("p3", "a heat pump moves warmth between indoors and outdoors"),
    Passage("p4", "solar water heaters warm water with sunlight"),
    Passage("p5", "geothermal plants tap heat from deep underground"),
])

spec = EmbedderSpec(kind="hashed-bow", dim=256, normalize=True, seed=7)
index = build_index(corpus, spec, similarity="cosine")
print(f"indexed {len(corpus)} passages, dim={index.dim}, sim={index.similarity}")

for query in ["solar electricity", "heat from the ground", "sunlight"]:
    print(f"\ntop-3 for {query!r}:")
    for item in top_k(index, query, 3):
        print(f"  {item.doc_id}  {item.score:+.4f}  {corpus[item.doc_id].text}")

# persistence is bit-exact: the reloaded index ranks identically
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "energy.idx"
    save_index(index, path)
    reloaded = load_index(path)
    assert reloaded == index
    assert top_k(reloaded, "solar electricity", 3) == top_k(index, "solar electricity", 3)
    print(f"\nround-tripped through {path.name}: identical rankings")
