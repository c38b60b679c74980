import json
import sys

import pytest

from segaug.cli import main
from segaug.corpus import Document, ManualSegment, save_corpus
from segaug.metrics import corpus_bleu
from segaug.segmenter import FrameProbabilities, save_probabilities


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


@pytest.fixture
def data(tmp_path, capsys):
    code, _ = run(capsys, "synth", "--out", str(tmp_path / "d"), "--docs", "2")
    assert code == 0
    return tmp_path / "d"


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as err:
        main(["segment"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["nope"])
    assert err.value.code == 1


def test_bad_view_range_is_usage_error(data, capsys):
    code, _ = run(capsys, "segment", "--probs", str(data / "probs"), "--view", "10")
    assert code == 1


def test_missing_input_is_data_error(tmp_path, capsys):
    code, _ = run(capsys, "align", "--corpus", str(tmp_path / "none.jsonl"), "--emissions", str(tmp_path), "--out", str(tmp_path / "o"))
    assert code == 2


def test_augment_and_stats(data, tmp_path, capsys):
    code, out = run(
        capsys, "--jobs", "2", "augment", "--corpus", str(data / "corpus.jsonl"), "--probs", str(data / "probs"),
        "--emissions", str(data / "emissions"), "--out", str(tmp_path / "out"), "--cache-dir", str(tmp_path / "c"),
    )
    assert code == 0 and json.loads(out)["succeeded"] == 2
    code, out = run(capsys, "stats", "--dir", str(tmp_path / "out"))
    assert set(json.loads(out)) == {"s", "m", "l", "xl"}


def test_segment_command(data, tmp_path, capsys):
    code, out = run(capsys, "segment", "--probs", str(data / "probs"), "--view", "3,10", "--algo", "pdac")
    recs = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and len(recs) == 2
    assert recs[0]["view"] == "m" and recs[0]["algorithm"] == "pdac"
    assert all(s["end_s"] - s["start_s"] <= 10 + 1e-9 for r in recs for s in r["segments"])


def test_align_stage_failure(tmp_path, capsys):
    doc = Document("x", 1.0, (ManualSegment(0, 0.0, 1.0, "hello"),))
    save_corpus([doc], tmp_path / "c.jsonl")
    from segaug.aligner import EmissionMatrix, save_emissions
    from segaug.synthetic import VOCAB
    from segaug.timeline import Block
    import numpy as np

    lp = np.log(np.full((2, len(VOCAB)), 1 / len(VOCAB)))
    save_emissions([EmissionMatrix(0.02, list(VOCAB), lp, [Block(0, 2, 0.0)], "x")], tmp_path / "em")
    code, out = run(capsys, "align", "--corpus", str(tmp_path / "c.jsonl"), "--emissions", str(tmp_path / "em"), "--out", str(tmp_path / "w.jsonl"))
    assert code == 3 and "x" in json.loads(out)["failed"]


def test_align_command(data, tmp_path, capsys):
    code, out = run(capsys, "align", "--corpus", str(data / "corpus.jsonl"), "--emissions", str(data / "emissions"), "--out", str(tmp_path / "w.jsonl"))
    assert code == 0 and json.loads(out)["aligned"] == 2
    rec = json.loads((tmp_path / "w.jsonl").read_text().splitlines()[0])
    assert rec["words"] and rec["units"]


def test_eval_resegment_three_segments(tmp_path, capsys):
    segs = tuple(ManualSegment(i, i * 2.0, i * 2.0 + 1, f"s{i}", t) for i, t in enumerate(["a b", "c d e", "f"]))
    save_corpus([Document("d", 10.0, segs)], tmp_path / "ref.jsonl")
    (tmp_path / "h.txt").write_text("a b c\nd x f\n", encoding="utf-8")
    code, out = run(
        capsys, "eval", "resegment", "--hyp", str(tmp_path / "h.txt"), "--ref", str(tmp_path / "ref.jsonl"), "--out", str(tmp_path / "r.jsonl")
    )
    report = json.loads(out)
    assert code == 0
    assert report["docs"]["d"] == {"cuts": [0, 2, 5, 6], "cost": 1}
    assert report["bleu"]["score"] == pytest.approx(corpus_bleu(["a b", "c d x", "f"], ["a b", "c d e", "f"]).score)
    assert [json.loads(line)["text"] for line in (tmp_path / "r.jsonl").read_text().splitlines()] == ["a b", "c d x", "f"]


def test_eval_bleu_and_docbleu(data, tmp_path, capsys):
    (tmp_path / "h.txt").write_text("a b c d\n", encoding="utf-8")
    (tmp_path / "r.txt").write_text("a b c e\n", encoding="utf-8")
    code, out = run(capsys, "eval", "bleu", "--hyp", str(tmp_path / "h.txt"), "--ref", str(tmp_path / "r.txt"))
    assert code == 0 and json.loads(out)["score"] == 0.0
    code, out = run(capsys, "eval", "bleu", "--hyp", str(tmp_path / "h.txt"), "--ref", str(tmp_path / "r.txt"), "--smoothing", "add-k")
    assert json.loads(out)["score"] > 50
    # paraphrase with identity then score the fake targets against themselves via docbleu
    run(capsys, "paraphrase", "--corpus", str(data / "corpus.jsonl"), "--translator", "identity", "--out", str(tmp_path / "p.jsonl"))
    code, out = run(capsys, "eval", "docbleu", "--hyp", str(tmp_path / "p.jsonl"), "--corpus", str(data / "corpus.jsonl"))
    assert code == 0 and json.loads(out)["documents"] == 2


def test_analyze_commands(tmp_path, capsys):
    segs = (ManualSegment(0, 0.0, 5.0, "a b", "x b"), ManualSegment(1, 5.0, 10.0, "c", "b y"))
    save_corpus([Document("d", 12.0, segs)], tmp_path / "c.jsonl")
    view = [
        {"doc_id": "d", "view": "m", "start_s": s, "end_s": e, "src_text": "t", "tgt_text": "b q"}
        for s, e in [(1, 4), (0, 10), (5.1, 9.9), (3, 7), (10.5, 11.5)]
    ]
    (tmp_path / "v.jsonl").write_text("".join(json.dumps(r) + "\n" for r in view), encoding="utf-8")
    code, out = run(capsys, "analyze", "overlap", "--view", str(tmp_path / "v.jsonl"), "--corpus", str(tmp_path / "c.jsonl"))
    rep = json.loads(out)
    assert code == 0
    assert rep["all"]["counts"] == {"equal": 1, "isolated": 1, "expanded": 1, "mixed": 2}
    assert rep["all"]["gap"] == 1
    assert sum(rep["views"]["m"]["percentages"].values()) == pytest.approx(100, abs=0.01)
    code, out = run(capsys, "analyze", "positions", "--view", str(tmp_path / "v.jsonl"), "--token", "b", "--corpus", str(tmp_path / "c.jsonl"))
    rep = json.loads(out)
    assert rep["view"] == {"0": 5} and rep["original"] == {"1": 1, "0": 1}
    code, out = run(capsys, "analyze", "buckets", "--view", str(tmp_path / "v.jsonl"))
    assert json.loads(out) == {"s": 1, "m": 3, "l": 1, "xl": 0}


def test_mtpairs_and_translate(data, tmp_path, capsys):
    code, out = run(capsys, "--seed", "3", "mtpairs", "--corpus", str(data / "corpus.jsonl"), "--view", "3,10", "--out", str(tmp_path / "mt.jsonl"))
    assert code == 0 and json.loads(out)["pairs"] == len((tmp_path / "mt.jsonl").read_text().splitlines())
    (tmp_path / "in.txt").write_text("hola\nmundo\n", encoding="utf-8")
    (tmp_path / "lex.tsv").write_text("hola\thello\n", encoding="utf-8")
    code, _ = run(capsys, "translate", "--translator", f"lexicon:{tmp_path / 'lex.tsv'}", "--input", str(tmp_path / "in.txt"), "--output", str(tmp_path / "o.txt"))
    assert code == 0 and (tmp_path / "o.txt").read_text() == "hello\nmundo\n"


def test_translate_external_failure_exit_3(tmp_path, capsys):
    (tmp_path / "in.txt").write_text("a\n", encoding="utf-8")
    code, _ = run(capsys, "translate", "--translator", f"external:{sys.executable} -c 'import sys; sys.exit(2)'", "--input", str(tmp_path / "in.txt"), "--output", str(tmp_path / "o.txt"))
    assert code == 3


def test_config_flag(data, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"corpus = {data / 'corpus.jsonl'}\nprobs = {data / 'probs'}\nemissions = {data / 'emissions'}\nviews = 1\n",
        encoding="utf-8",
    )
    code, out = run(capsys, "augment", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 0 and list(json.loads(out)["views"]) == ["v1"]


def test_probs_json_input(tmp_path, capsys):
    save_probabilities([FrameProbabilities.from_values([0.9] * 300, 0.02, "z")], tmp_path / "p.jsonl")
    code, out = run(capsys, "segment", "--probs", str(tmp_path / "p.jsonl"), "--views", "0.4:3,3:10")
    assert code == 0 and len(out.splitlines()) == 2
