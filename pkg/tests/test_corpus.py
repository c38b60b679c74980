import json

import pytest

from segaug.corpus import (
    AugmentedExample,
    CorpusError,
    Document,
    ManualSegment,
    ViewSpec,
    doc_transcript,
    load_corpus,
    load_view,
    save_corpus,
    save_view,
)


def write_lines(path, recs):
    path.write_text("".join(json.dumps(r) + "\n" for r in recs), encoding="utf-8")


def doc_rec(doc_id="d1", segs=((0.0, 1.0, "Hello there."), (1.5, 3.0, "General  Kenobi!"))):
    return {
        "id": doc_id,
        "duration_s": 4.0,
        "segments": [
            {"index": i, "start_s": s, "end_s": e, "src_text": t, "tgt_text": t.lower()} for i, (s, e, t) in enumerate(segs)
        ],
    }


def test_roundtrip(tmp_path):
    write_lines(tmp_path / "c.jsonl", [doc_rec(), doc_rec("d2")])
    docs = load_corpus(tmp_path / "c.jsonl")
    save_corpus(docs, tmp_path / "again.jsonl")
    assert load_corpus(tmp_path / "again.jsonl") == docs
    assert doc_transcript(docs[0]) == "Hello there. General Kenobi!"
    assert docs[0].translation() == "hello there. general  kenobi!".replace("  ", " ")


@pytest.mark.parametrize(
    "segs,needle",
    [
        (((0.0, 2.0, "a"), (1.0, 3.0, "b")), "segment 1: segments overlap"),
        (((1.0, 1.0, "a"),), "segment 0"),
        (((0.0, 5.0, "a"),), "outside"),
        (((0.0, 1.0, "  "),), "src_text is empty"),
    ],
)
def test_invalid_documents_name_line_and_segment(tmp_path, segs, needle):
    write_lines(tmp_path / "c.jsonl", [doc_rec(), doc_rec("bad", segs)])
    with pytest.raises(CorpusError) as err:
        load_corpus(tmp_path / "c.jsonl")
    assert ":2:" in str(err.value) and needle in str(err.value)


def test_overlap_repair(tmp_path):
    write_lines(tmp_path / "c.jsonl", [doc_rec("d", ((0.0, 2.0, "a"), (1.0, 3.0, "b")))])
    (doc,) = load_corpus(tmp_path / "c.jsonl", repair_overlaps=True)
    assert doc.manual_segments[0].end_s == 1.0


def test_bad_json_and_duplicates(tmp_path):
    (tmp_path / "c.jsonl").write_text("{nope\n", encoding="utf-8")
    with pytest.raises(CorpusError, match=":1:"):
        load_corpus(tmp_path / "c.jsonl")
    write_lines(tmp_path / "c.jsonl", [doc_rec(), doc_rec()])
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(tmp_path / "c.jsonl")


def test_view_spec_validation():
    with pytest.raises(ValueError):
        ViewSpec("x", 3, 3)


def test_example_duration_bounds():
    AugmentedExample("d", "s", 0.0, 0.5, "a").validate()
    with pytest.raises(CorpusError):
        AugmentedExample("d", "s", 0.0, 0.1, "a").validate()
    AugmentedExample("d", "s", 0.0, 0.1, "a", overflow=True).validate()


@pytest.mark.parametrize("fmt", ["jsonl", "tsv"])
def test_view_file_roundtrip(tmp_path, fmt):
    exs = [
        AugmentedExample("d", "m", 1.0, 4.25, "So, \"quoted\"\ttab", "tgt", "<de_m>"),
        AugmentedExample("d", "m", 5.0, 9.5, "two", None, None, overflow=True),
    ]
    path = tmp_path / f"m.{fmt}"
    save_view(exs, path, fmt=fmt)
    back = load_view(path)
    assert [(e.start_s, e.end_s, e.src_text, e.special_token) for e in back] == [
        (e.start_s, e.end_s, e.src_text, e.special_token) for e in exs
    ]


def test_view_line_format(tmp_path):
    save_view([AugmentedExample("d", "m", 1.0, 4.25, "src", "tgt", "<de_m>")], tmp_path / "m.jsonl", prepend_special=True)
    line = (tmp_path / "m.jsonl").read_text(encoding="utf-8")
    assert '"start_s": 1.000' in line and '"end_s": 4.250' in line
    assert json.loads(line)["tgt_text"] == "<de_m> tgt"


def test_doc_translation_prefers_explicit():
    doc = Document("d", 2.0, (ManualSegment(0, 0, 1, "a", "x"),), doc_translation="whole")
    assert doc.translation() == "whole"
