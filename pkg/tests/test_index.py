import numpy as np
import pytest

from boolsearch.data import Corpus, Passage
from boolsearch.embed import EmbedderSpec, hashed_bow_embed
from boolsearch.errors import BoolSearchError, IndexFormatError
from boolsearch.index import (
    RankedList,
    ScoredDoc,
    build_index,
    load_index,
    save_index,
    top_k,
)

from _planted import oracle_top_k, random_corpus, random_query

SPEC = EmbedderSpec(kind="hashed-bow", dim=64, normalize=False, seed=9)


def small_corpus():
    return Corpus([
        Passage("p1", "alpha alpha beta"),
        Passage("p2", "beta gamma"),
        Passage("p3", "delta"),
    ])


class TestRankedList:
    def test_rejects_duplicate_ids(self):
        with pytest.raises(BoolSearchError, match="duplicate"):
            RankedList([ScoredDoc("a", 1.0), ScoredDoc("a", 0.5)])

    def test_rejects_increasing_scores(self):
        with pytest.raises(BoolSearchError, match="non-increasing"):
            RankedList([ScoredDoc("a", 0.5), ScoredDoc("b", 1.0)])

    def test_rejects_misordered_ties(self):
        with pytest.raises(BoolSearchError, match="ties"):
            RankedList([ScoredDoc("b", 1.0), ScoredDoc("a", 1.0)])

    def test_from_scores_applies_tie_rule(self):
        ranked = RankedList.from_scores([("b", 1.0), ("c", 2.0), ("a", 1.0)])
        assert ranked.doc_ids() == ("c", "a", "b")

    def test_non_finite_score_rejected(self):
        with pytest.raises(BoolSearchError):
            ScoredDoc("a", float("nan"))


class TestBuildIndex:
    def test_row_per_passage(self):
        index = build_index(small_corpus(), EmbedderSpec(dim=256), "dot")
        assert index.matrix.shape == (3, 256)
        assert index.doc_ids == ("p1", "p2", "p3")

    def test_cosine_rows_unit_norm(self):
        index = build_index(small_corpus(), SPEC, "cosine")
        norms = np.linalg.norm(index.matrix.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-6)

    def test_empty_corpus_rejected(self):
        with pytest.raises(BoolSearchError, match="empty"):
            build_index(Corpus([]), SPEC, "dot")

    def test_unknown_similarity_rejected(self):
        with pytest.raises(BoolSearchError, match="similarity"):
            build_index(small_corpus(), SPEC, "euclid")


class TestTopK:
    def test_lexical_overlap_wins(self):
        corpus = Corpus([Passage("p1", "alpha"), Passage("p2", "beta")])
        index = build_index(corpus, SPEC, "cosine")
        ranked = top_k(index, "alpha", 1)
        # cross-check by hand: alpha matches p1's vector exactly
        assert ranked.doc_ids() == ("p1",)
        assert ranked.items[0].score == pytest.approx(1.0)

    def test_k_larger_than_corpus_truncates(self):
        index = build_index(small_corpus(), SPEC, "dot")
        assert len(top_k(index, "alpha", 50)) == 3

    def test_identical_texts_tie_by_id(self):
        corpus = Corpus([Passage("pb", "same text"), Passage("pa", "same text")])
        index = build_index(corpus, SPEC, "dot")
        ranked = top_k(index, "same", 2)
        assert ranked.doc_ids() == ("pa", "pb")
        assert ranked.items[0].score == ranked.items[1].score

    def test_k_below_one_rejected(self):
        index = build_index(small_corpus(), SPEC, "dot")
        with pytest.raises(BoolSearchError, match="k must be"):
            top_k(index, "alpha", 0)

    def test_monotone_prefix(self):
        rng = np.random.default_rng(4)
        corpus = random_corpus(rng, 60)
        index = build_index(corpus, SPEC, "dot")
        for k in range(1, 12):
            shorter = top_k(index, "w1 w2", k)
            longer = top_k(index, "w1 w2", k + 1)
            assert longer.items[:k] == shorter.items

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(17)
        for trial in range(10):
            corpus = random_corpus(rng, int(rng.integers(5, 120)))
            sim = "dot" if trial % 2 == 0 else "cosine"
            index = build_index(corpus, SPEC, sim)
            for _ in range(5):
                query = random_query(rng)
                k = int(rng.integers(1, 15))
                got = [(d.doc_id, d.score) for d in top_k(index, query, k)]
                assert got == oracle_top_k(index, query, k)

    def test_dot_similarity_symmetric(self):
        a = hashed_bow_embed("alpha beta", 64, seed=9)
        b = hashed_bow_embed("beta gamma", 64, seed=9)
        assert float(np.dot(a, b)) == float(np.dot(b, a))

    def test_concurrent_queries_agree(self):
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(12)
        index = build_index(random_corpus(rng, 200), SPEC, "cosine")
        queries = [random_query(rng) for _ in range(40)]
        expected = [top_k(index, q, 10) for q in queries]
        with ThreadPoolExecutor(max_workers=8) as pool:
            got = list(pool.map(lambda q: top_k(index, q, 10), queries))
        assert got == expected


class TestPersistence:
    def test_round_trip_bit_for_bit(self, tmp_path):
        index = build_index(small_corpus(), SPEC, "cosine")
        path = tmp_path / "x.idx"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded == index

    def test_round_trip_preserves_rankings(self, tmp_path):
        rng = np.random.default_rng(3)
        corpus = random_corpus(rng, 80)
        index = build_index(corpus, SPEC, "dot")
        path = tmp_path / "x.idx"
        save_index(index, path)
        loaded = load_index(path)
        for _ in range(100):
            query = random_query(rng)
            assert top_k(loaded, query, 10) == top_k(index, query, 10)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "x.idx"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(IndexFormatError, match="magic"):
            load_index(path)

    def test_truncated_file_rejected(self, tmp_path):
        index = build_index(small_corpus(), SPEC, "dot")
        path = tmp_path / "x.idx"
        save_index(index, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 8])
        with pytest.raises(IndexFormatError):
            load_index(path)

    def test_fingerprint_mismatch_warns_in_metadata(self, tmp_path):
        index = build_index(small_corpus(), SPEC, "dot")
        path = tmp_path / "x.idx"
        save_index(index, path)
        other_spec = EmbedderSpec(kind="hashed-bow", dim=64, normalize=False, seed=10)
        loaded = load_index(path, expected_spec=other_spec)
        assert loaded.load_warnings and "fingerprint" in loaded.load_warnings[0]
        matching = load_index(path, expected_spec=SPEC)
        assert matching.load_warnings == ()
