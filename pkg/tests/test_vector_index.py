import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrag.corpus import Chunk
from agentrag.errors import LoadError, ValidationError
from agentrag.gateway import EmbeddingVector, ScriptedBackend
from agentrag.vector_index import (
    IndexEntry,
    VectorIndex,
    build_index,
    index_to_dict,
    load_index,
    query,
    save_index,
)
from oracles import brute_force_top_k


def chunk(cid, text, doc="d"):
    return Chunk(cid, doc, 0, text, (0, len(text.split())))


class TableEmbedder:
    """Maps known texts to preset vectors, so retrieval can be tested on arbitrary geometry."""

    def __init__(self, table):
        self.table = table

    def embed_batch(self, texts):
        return [EmbeddingVector.normalized(self.table[t]) for t in texts]


def test_build_preserves_order():
    be = ScriptedBackend(dimension=16)
    idx = build_index([chunk("c", "gamma"), chunk("a", "alpha"), chunk("b", "beta")], be)
    assert [e.chunk_id for e in idx.entries] == ["c", "a", "b"]
    assert len(idx) == 3 and idx.dimension == 16


def test_build_rejects_duplicates_and_empty():
    be = ScriptedBackend()
    with pytest.raises(ValidationError, match="duplicate"):
        build_index([chunk("a", "x"), chunk("a", "y")], be)
    with pytest.raises(ValidationError):
        build_index([], be)


def test_self_similarity_ranks_first():
    be = ScriptedBackend(dimension=64)
    texts = ["camera obstacle detection in rain", "lane keeping regulation", "lidar point cloud"]
    idx = build_index([chunk(f"c{i}", t) for i, t in enumerate(texts)], be)
    hits = query(idx, texts[1], 3, be)
    assert hits[0].chunk_id == "c1"
    assert hits[0].score == pytest.approx(1.0, abs=1e-6)


def test_k_larger_than_index_truncates():
    be = ScriptedBackend()
    idx = build_index([chunk(f"c{i}", f"text {i}") for i in range(4)], be)
    assert len(query(idx, "text", 10, be)) == 4


def test_ties_break_by_chunk_id():
    be = ScriptedBackend(dimension=8)
    idx = build_index([chunk("z", "same words"), chunk("m", "same words"), chunk("a", "same words")], be)
    assert [h.chunk_id for h in query(idx, "same words", 3, be)] == ["a", "m", "z"]


def test_dimension_mismatch_is_error():
    idx = build_index([chunk("a", "x")], ScriptedBackend(dimension=8))
    with pytest.raises(ValidationError, match="dimension"):
        query(idx, "x", 1, ScriptedBackend(dimension=16))


def test_random_vectors_match_brute_force():
    rng = np.random.default_rng(7)
    table = {f"t{i}": rng.normal(size=24).tolist() for i in range(100)}
    table["q"] = rng.normal(size=24).tolist()
    emb = TableEmbedder(table)
    idx = build_index([chunk(f"c{i:03d}", f"t{i}") for i in range(100)], emb)
    got = [(h.chunk_id, h.score) for h in query(idx, "q", 5, emb)]
    want = brute_force_top_k(table["q"], [(f"c{i:03d}", table[f"t{i}"]) for i in range(100)], 5)
    assert [g[0] for g in got] == [w[0] for w in want]
    assert [g[1] for g in got] == pytest.approx([w[1] for w in want], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.lists(st.sampled_from("abcdefghij"), min_size=1, max_size=8), min_size=1, max_size=30),
    st.lists(st.sampled_from("abcdefghij"), min_size=1, max_size=8),
    st.integers(1, 10),
)
def test_scripted_corpus_scores_match_brute_force(docs, qtokens, k):
    from agentrag.gateway import hashed_bag_of_words

    be = ScriptedBackend(dimension=16)
    texts = [" ".join(d) for d in docs]
    idx = build_index([chunk(f"c{i:02d}", t) for i, t in enumerate(texts)], be)
    got = query(idx, " ".join(qtokens), k, be)
    want = brute_force_top_k(
        hashed_bag_of_words(" ".join(qtokens), 16),
        [(f"c{i:02d}", hashed_bag_of_words(t, 16)) for i, t in enumerate(texts)],
        k,
    )
    assert len(got) == len(want) == min(k, len(texts))
    assert [g.score for g in got] == pytest.approx([w[1] for w in want], abs=1e-12)


def test_query_is_read_only():
    be = ScriptedBackend()
    idx = build_index([chunk(f"c{i}", f"words {i} here") for i in range(10)], be)
    before = idx.fingerprint()
    for i in range(20):
        query(idx, f"words {i}", 3, be)
    assert idx.fingerprint() == before
    for e in idx.entries:
        assert abs(sum(x * x for x in e.vector.values) - 1.0) <= 1e-6


def test_save_load_roundtrip_bit_exact(tmp_path):
    rng = random.Random(3)
    table = {f"t{i}": [rng.gauss(0, 1) for _ in range(8)] for i in range(3)}
    idx = build_index([chunk(f"c{i}", f"t{i}") for i in range(3)], TableEmbedder(table))
    path = tmp_path / "i.vec.json"
    save_index(idx, path)
    loaded = load_index(path)
    assert loaded == idx
    for a, b in zip(loaded.entries, idx.entries):
        assert np.array(a.vector.values).tobytes() == np.array(b.vector.values).tobytes()


def test_load_truncated_file(tmp_path):
    idx = build_index([chunk("a", "x y")], ScriptedBackend(dimension=8))
    path = tmp_path / "i.vec.json"
    save_index(idx, path)
    path.write_text(path.read_text()[:-20])
    with pytest.raises(LoadError):
        load_index(path)


def test_load_version_mismatch(tmp_path):
    raw = index_to_dict(build_index([chunk("a", "x")], ScriptedBackend(dimension=8)))
    raw["version"] = 2
    (tmp_path / "v.json").write_text(json.dumps(raw))
    with pytest.raises(LoadError, match="version"):
        load_index(tmp_path / "v.json")


def test_load_short_vector_is_validation_error(tmp_path):
    raw = index_to_dict(build_index([chunk("a", "x"), chunk("b", "y")], ScriptedBackend(dimension=8)))
    raw["entries"][1]["vector"] = raw["entries"][1]["vector"][:7]
    (tmp_path / "bad.json").write_text(json.dumps(raw))
    with pytest.raises(ValidationError, match="dimension"):
        load_index(tmp_path / "bad.json")


def test_non_unit_vector_rejected():
    with pytest.raises(ValidationError, match="unit-norm"):
        VectorIndex([IndexEntry("a", "d", "t", EmbeddingVector((1.0, 1.0)))], 2)
