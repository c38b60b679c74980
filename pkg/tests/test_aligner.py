import math
import random

import numpy as np
import pytest

from oracles import viterbi_brute
from segaug import kernels
from segaug.aligner import (
    AlignmentError,
    EmissionMatrix,
    WordSpan,
    align_chars,
    assign_words_to_segments,
    chars_to_words,
    emissions_from_bytes,
    emissions_to_bytes,
    forced_align,
    load_emissions,
    path_score,
    save_emissions,
)
from segaug.synthetic import make_document
from segaug.textnorm import BLANK, CleanUnit, TextNormError, clean
from segaug.timeline import Block, Timeline

VOCAB = [BLANK, "|", "A", "B"]


def near_one_hot(symbols, vocab=VOCAB, low=-8.0):
    rows = np.full((len(symbols), len(vocab)), low)
    for t, s in enumerate(symbols):
        rows[t, vocab.index(s)] = 0.0
    rows -= np.log(np.exp(rows).sum(axis=1, keepdims=True))
    return rows


def matrix(symbols, tau=0.02, blocks=None):
    lp = near_one_hot(symbols)
    return EmissionMatrix(tau, VOCAB, lp, blocks or [Block(0, len(symbols), 0.0)])


def random_logprobs(rng, T, V):
    x = np.array([[rng.gauss(0, 2) for _ in range(V)] for _ in range(T)])
    return x - np.log(np.exp(x).sum(axis=1, keepdims=True))


def test_two_chars_with_blanks():
    spans = align_chars(matrix(["A", BLANK, "B", BLANK]), "AB")
    assert [(s.char, s.start_frame, s.end_frame) for s in spans] == [("A", 0, 0), ("B", 2, 2)]


def test_empty_text_is_blank_path():
    em = matrix(["A", BLANK, BLANK])
    res = forced_align(em, "")
    assert res.spans == []
    assert res.score == pytest.approx(em.logprobs[:, 0].sum(), abs=1e-12)


def test_infeasible_and_oov():
    with pytest.raises(AlignmentError):
        align_chars(matrix(["A"]), "AB")
    with pytest.raises(TextNormError):
        align_chars(matrix(["A", "B"]), "AZ")


def test_minus_inf_path_is_infeasible():
    lp = np.full((2, 4), -np.inf)
    lp[:, 0] = 0.0
    em = EmissionMatrix(0.02, VOCAB, lp, [Block(0, 2, 0.0)])
    with pytest.raises(AlignmentError):
        align_chars(em, "A")


def test_trellis_matches_brute_force_and_path_score():
    rng = random.Random(11)
    for _ in range(200):
        T = rng.randint(1, 8)
        L = rng.randint(0, min(4, T))
        lp = random_logprobs(rng, T, 4)
        tokens = [rng.randint(1, 3) for _ in range(L)]
        score, states = kernels.viterbi_align(lp, np.array(tokens, dtype=np.int64), 0)
        assert abs(score - viterbi_brute(lp.tolist(), tokens, 0)) <= 1e-9
        assert path_score(lp, tokens, 0, states) == score
        assert states[-1] == L and all(0 <= b - a <= 1 for a, b in zip([0, *states], states))


def test_ties_prefer_stay():
    # flat emissions: every path ties, so walking back from the end keeps
    # staying on the last symbol until it is forced to step down
    lp = np.log(np.full((4, 4), 0.25))
    _, states = kernels.viterbi_align(lp, np.array([2, 3], dtype=np.int64), 0)
    assert list(states) == [1, 2, 2, 2]


def test_chars_to_words_links_units():
    units = [CleanUnit("hi", ("HI",)), CleanUnit("a", ("A",))]
    spans = align_chars(
        EmissionMatrix(0.1, [BLANK, "|", "A", "H", "I"], near_one_hot(list("HI|A"), [BLANK, "|", "A", "H", "I"]), [Block(0, 4, 0.0)]),
        "HI|A",
    )
    words = chars_to_words(spans, units, Timeline([Block(0, 4, 0.0)], 0.1))
    assert [(w.clean_unit_ref, w.word_text) for w in words] == [(0, "HI"), (1, "A")]
    assert words[1].start_s == pytest.approx(0.3) and words[1].end_s == pytest.approx(0.4)


def test_word_across_blocks_uses_second_block_start():
    em = matrix(["A", "B"], tau=0.1, blocks=[Block(0, 1, 0.0), Block(1, 1, 2.0)])
    unit = CleanUnit("ab", ("AB",))
    (word,) = chars_to_words(align_chars(em, "AB"), [unit], em.timeline)
    assert word.start_s == 0.0 and word.end_s == pytest.approx(2.1)


def test_chars_to_words_rejects_mismatch():
    spans = align_chars(matrix(["A", "B"]), "AB")
    with pytest.raises(AlignmentError):
        chars_to_words(spans, [CleanUnit("ba", ("BA",))], Timeline([Block(0, 2, 0.0)], 0.02))


def test_synthetic_word_times_are_exact():
    for seed in range(3):
        doc = make_document("d", seed=seed)
        units = clean(" ".join(s.src_text for s in doc.document.manual_segments), vocab=doc.emissions.vocab)
        text = "|".join(w for u in units for w in u.cleaned_words)
        words = chars_to_words(align_chars(doc.emissions, text), units, doc.emissions.timeline)
        tl = doc.emissions.timeline
        expected = [(ui, w, tl.time_of(a), tl.end_time_of(b)) for ui, w, a, b in doc.word_frames]
        assert [(w.clean_unit_ref, w.word_text, w.start_s, w.end_s) for w in words] == expected


def _words(mids):
    return [WordSpan(i, "X", m - 0.1, m + 0.1, 0.0) for i, m in enumerate(mids)]


def test_assignment_by_midpoint():
    units = [CleanUnit("x", ("X",))] * 3
    res = assign_words_to_segments(_words([1.0, 2.5, 4.0]), units, [(0, 2), (2, 5)])
    assert res.groups == [[0], [1, 2]] and res.dropped == []
    res = assign_words_to_segments(_words([2.0]), units[:1], [(0, 2), (2, 5)])
    assert res.groups == [[], [0]]
    res = assign_words_to_segments(_words([6.0]), units[:1], [(0, 2), (2, 5)])
    assert res.dropped == [0]


def test_multiword_unit_stays_whole():
    units = [CleanUnit("21", ("TWENTY", "ONE"))]
    words = [WordSpan(0, "TWENTY", 1.0, 1.8, 0), WordSpan(0, "ONE", 1.9, 2.4, 0)]
    assert assign_words_to_segments(words, units, [(0, 1.5), (1.5, 3)]).groups == [[], [0]]


def test_emission_roundtrip(tmp_path):
    em = matrix(["A", BLANK, "B"], blocks=[Block(0, 2, 1.0), Block(2, 1, 4.0)])
    em.doc_id = "doc"
    back = emissions_from_bytes(emissions_to_bytes(em), "doc")
    assert back.vocab == em.vocab and back.blocks == em.blocks
    assert np.allclose(back.logprobs, em.logprobs, atol=1e-6)
    save_emissions([em], tmp_path / "em")
    save_emissions([em], tmp_path / "em.jsonl", binary=False)
    assert set(load_emissions(tmp_path / "em")) == {"doc"}
    assert np.allclose(load_emissions(tmp_path / "em.jsonl")["doc"].logprobs, em.logprobs)


def test_rows_must_be_distributions(tmp_path):
    em = EmissionMatrix(0.02, VOCAB, np.zeros((2, 4)), [Block(0, 2, 0.0)], "bad")
    with pytest.raises(AlignmentError):
        em.check_rows()
    assert math.isfinite(forced_align(em, "A").score)
