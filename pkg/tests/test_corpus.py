import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrag.corpus import (
    ChunkingConfig,
    Document,
    chunk_count,
    chunk_document,
    load_corpus,
    tokenize,
)
from agentrag.errors import LoadError, ValidationError
from oracles import sliding_window_count, sliding_window_spans


def make_doc(n_tokens: int, doc_id: str = "d") -> Document:
    return Document(doc_id, "t", "a description", " ".join(f"w{i}" for i in range(n_tokens)))


def write_manifest(tmp_path, entries, files):
    for name, text in files.items():
        (tmp_path / name).write_text(text, encoding="utf-8")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(entries), encoding="utf-8")
    return path


def entry(doc_id, path):
    return {"doc_id": doc_id, "title": doc_id.upper(), "description": f"about {doc_id}", "path": path}


def test_load_corpus_keeps_manifest_order_and_markdown(tmp_path):
    manifest = write_manifest(
        tmp_path,
        [entry("b", "b.md"), entry("a", "a.txt")],
        {"b.md": "# Heading\n\n*bold* text", "a.txt": "plain"},
    )
    docs = load_corpus(manifest)
    assert [d.doc_id for d in docs] == ["b", "a"]
    assert docs[0].body == "# Heading\n\n*bold* text"
    assert docs[0].source_path.endswith("b.md")


def test_load_corpus_rejects_duplicate_doc_id(tmp_path):
    manifest = write_manifest(
        tmp_path, [entry("iso26262", "x.md"), entry("iso26262", "x.md")], {"x.md": "text"}
    )
    with pytest.raises(ValidationError, match="iso26262"):
        load_corpus(manifest)


def test_load_corpus_rejects_whitespace_body(tmp_path):
    manifest = write_manifest(tmp_path, [entry("a", "a.md")], {"a.md": "  \n\t "})
    with pytest.raises(ValidationError, match="empty body"):
        load_corpus(manifest)


def test_load_corpus_names_missing_file(tmp_path):
    manifest = write_manifest(tmp_path, [entry("a", "nope.md")], {})
    with pytest.raises(LoadError, match="nope.md"):
        load_corpus(manifest)


def test_load_corpus_missing_manifest(tmp_path):
    with pytest.raises(LoadError):
        load_corpus(tmp_path / "missing.json")


def test_document_requires_description():
    with pytest.raises(ValidationError):
        Document("a", "t", "  ", "body")


@pytest.mark.parametrize(
    "text, tokens",
    [("a  b\tc", ["a", "b", "c"]), ("", []), ("word", ["word"]), ("x y z\n", ["x", "y", "z"])],
)
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_chunking_config_rejects_overlap_ge_size():
    with pytest.raises(ValidationError):
        ChunkingConfig(chunk_size=4, overlap=4)
    assert ChunkingConfig().chunk_size == 1024 and ChunkingConfig().overlap == 200


def test_chunk_spans_26_tokens():
    chunks = chunk_document(make_doc(26), ChunkingConfig(10, 2))
    assert [c.token_span for c in chunks] == [(0, 10), (8, 18), (16, 26)]
    assert chunks[1].text == " ".join(f"w{i}" for i in range(8, 18))
    assert [c.chunk_id for c in chunks] == ["d:0000", "d:0001", "d:0002"]


def test_short_document_single_chunk():
    chunks = chunk_document(make_doc(5), ChunkingConfig(10, 2))
    assert [c.token_span for c in chunks] == [(0, 5)]


def test_chunk_count_1000_tokens_matches_window_oracle():
    cfg = ChunkingConfig(128, 16)
    expected = sliding_window_count(1000, 128, 16)
    assert expected == 9
    assert len(chunk_document(make_doc(1000), cfg)) == expected


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_chunk_count_formula_matches_oracle(data):
    n = data.draw(st.integers(1, 500))
    size = data.draw(st.integers(2, 64))
    overlap = data.draw(st.integers(0, size - 1))
    assert chunk_count(n, ChunkingConfig(size, overlap)) == sliding_window_count(n, size, overlap)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_spans_reconstruct_tokens(data):
    n = data.draw(st.integers(1, 300))
    size = data.draw(st.integers(2, 40))
    overlap = data.draw(st.integers(0, size - 1))
    doc = make_doc(n)
    chunks = chunk_document(doc, ChunkingConfig(size, overlap))
    assert [c.token_span for c in chunks] == sliding_window_spans(n, size, overlap)

    starts = [c.token_span[0] for c in chunks]
    assert starts == sorted(set(starts))
    for prev, nxt in zip(chunks, chunks[1:]):
        assert prev.token_span[1] - nxt.token_span[0] == overlap
    # every token covered; dropping each chunk's leading overlap rebuilds the document
    rebuilt = tokenize(chunks[0].text)
    for c in chunks[1:]:
        rebuilt += tokenize(c.text)[overlap:]
    assert rebuilt == tokenize(doc.body)
    assert chunk_document(doc, ChunkingConfig(size, overlap)) == chunks
