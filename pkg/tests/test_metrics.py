import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import BLEU_ADD1_HAND, edit_distance, mwer_brute
from segaug.corpus import AugmentedExample, ManualSegment
from segaug.metrics import (
    Overlap,
    OverlapReport,
    categorize_overlap,
    corpus_bleu,
    duration_buckets,
    levenshtein,
    mwer_resegment,
    overlap_report,
    position_histogram,
    tokenize_for_bleu,
    view_stats,
)
from segaug.segmenter import plan_views


@pytest.mark.parametrize(
    "text,tokens",
    [
        ("Hello, world!", ["Hello", ",", "world", "!"]),
        ("don't", ["don't"]),
        ("", []),
        ("well-known -dash 'quote'", ["well-known", "-", "dash", "'", "quote", "'"]),
        ("a  b\tc", ["a", "b", "c"]),
    ],
)
def test_tokenizer(text, tokens):
    assert tokenize_for_bleu(text) == tokens


def test_bleu_identity_and_hand_values():
    assert corpus_bleu(["the cat sat", "a b"], ["the cat sat", "a b"]).score == 100.0
    res = corpus_bleu(["a b c d"], ["a b c e"])
    assert res.score == 0.0
    assert res.precisions == pytest.approx([3 / 4, 2 / 3, 1 / 2, 0.0])
    smoothed = corpus_bleu(["a b c d"], ["a b c e"], smoothing="add-k", k=1)
    assert smoothed.score == pytest.approx(BLEU_ADD1_HAND, abs=1e-6)
    assert smoothed.brevity_penalty == 1.0


def test_bleu_brevity_penalty():
    res = corpus_bleu(["a b c d"], ["a b c d e f g h"])
    assert res.brevity_penalty == pytest.approx(math.exp(1 - 8 / 4))


def test_bleu_errors():
    with pytest.raises(ValueError):
        corpus_bleu(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        corpus_bleu([], [])


def test_bleu_empty_hypothesis_scores_zero():
    assert corpus_bleu([""], ["a b"]).score == 0.0


sentences = st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=8).map(" ".join), min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(sentences, st.randoms())
def test_bleu_permutation_invariant(refs, rnd):
    hyps = [" ".join(reversed(r.split())) for r in refs]
    pairs = list(zip(hyps, refs))
    rnd.shuffle(pairs)
    assert corpus_bleu(hyps, refs).score == pytest.approx(corpus_bleu(*map(list, zip(*pairs))).score)
    assert corpus_bleu(refs, refs).score == 100.0


@pytest.mark.parametrize("a,b,d", [("x", "x", 0), (["a", "b"], ["a", "c"], 1), ([], ["a", "b"], 2)])
def test_levenshtein_examples(a, b, d):
    assert levenshtein(list(a), list(b)) == d


def test_levenshtein_matches_recursion():
    rng = random.Random(2)
    for _ in range(200):
        a = [rng.choice("abc") for _ in range(rng.randint(0, 8))]
        b = [rng.choice("abc") for _ in range(rng.randint(0, 8))]
        assert levenshtein(a, b) == edit_distance(a, b)


def test_mwer_examples():
    refs = [["a", "b"], ["c", "d"]]
    assert tuple(mwer_resegment(list("abcd"), refs)) == ([0, 2, 4], 0)
    assert tuple(mwer_resegment(list("axcd"), refs)) == ([0, 2, 4], 1)
    assert tuple(mwer_resegment([], refs)) == ([0, 0, 0], 4)


def test_mwer_case_flag():
    refs = [["A", "b"], ["C"]]
    assert mwer_resegment(["a", "B", "c"], refs).cost == 3
    assert mwer_resegment(["a", "B", "c"], refs, case_insensitive=True).cost == 0


def test_mwer_matches_brute_force():
    rng = random.Random(9)
    for _ in range(150):
        hyp = [rng.choice("abc") for _ in range(rng.randint(0, 10))]
        refs = [[rng.choice("abc") for _ in range(rng.randint(0, 4))] for _ in range(rng.randint(1, 4))]
        cost, cuts = mwer_brute(hyp, refs)
        res = mwer_resegment(hyp, refs)
        assert (res.cost, res.cuts) == (cost, cuts)


def test_mwer_pieces():
    res = mwer_resegment(list("abcd"), [["a"], ["b", "c", "d"]])
    assert res.pieces(list("abcd")) == [["a"], ["b", "c", "d"]]


MANUAL = [(0, 5), (5, 10)]


@pytest.mark.parametrize(
    "view,cat",
    [
        ((1, 4), Overlap.ISOLATED),
        ((0, 10), Overlap.EXPANDED),
        ((5.1, 9.9), Overlap.EQUAL),
        ((3, 7), Overlap.MIXED),
        ((-0.1, 4.0), Overlap.ISOLATED),
    ],
)
def test_overlap_categories(view, cat):
    assert categorize_overlap(view, MANUAL, 0.2) == (cat, False)


def test_overlap_gap_segment():
    assert categorize_overlap((11, 12), MANUAL, 0.2) == (Overlap.MIXED, True)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 10), st.floats(0.1, 10), st.floats(-50, 50))
def test_overlap_shift_invariant(s, d, shift):
    # grid-aligned values so shifting does not perturb the epsilon comparisons
    s, d, shift = round(s, 1), round(d, 1), round(shift)
    view = (s, s + d)
    moved = [(a + shift, b + shift) for a, b in MANUAL]
    assert categorize_overlap(view, MANUAL) == categorize_overlap((view[0] + shift, view[1] + shift), moved)


def test_overlap_report_percentages():
    rng = random.Random(4)
    views = {"d": [(a, a + rng.uniform(0.5, 8)) for a in (rng.uniform(0, 12) for _ in range(37))]}
    rep = overlap_report(views, {"d": MANUAL})
    assert rep.total == 37
    assert sum(rep.percentages.values()) == pytest.approx(100.0, abs=0.01)
    assert OverlapReport().percentages == {c.value: 0.0 for c in Overlap}


def test_position_histogram():
    assert position_histogram(["a b", "b a"], "b") == {1: 1, 0: 1}
    assert position_histogram(["a b"], "z") == {}
    ex = AugmentedExample("d", "m", 0, 1, "x", "p q b")
    assert position_histogram([ex], "b") == {2: 1}


def test_position_histogram_spreads_after_regrouping():
    originals = [ManualSegment(i, i, i + 1, "", t) for i, t in enumerate(["b c", "b d", "b e"])]
    regrouped = ["b c b", "d b e"]
    orig = position_histogram(originals, "b")
    aug = position_histogram(regrouped, "b")
    assert len(aug) >= len(orig)


def _ex(d):
    return AugmentedExample("d", "x", 0.0, d, "s")


def test_duration_buckets():
    buckets = duration_buckets([_ex(2.5), _ex(35), _ex(3.0), _ex(0.1)], plan_views())
    assert [e.duration_s for e in buckets["s"]] == [2.5, 0.1]
    assert [e.duration_s for e in buckets["m"]] == [3.0]
    assert [e.duration_s for e in buckets["xl"]] == [35]
    assert all(v == [] for v in duration_buckets([], plan_views()).values())


def test_view_stats():
    exs = [AugmentedExample("d", "m", 0, 3, "a"), AugmentedExample("d", "m", 10, 15, "b")]
    assert view_stats(exs) == {"m": {"count": 2, "mean_duration_s": 4.0}}
    assert view_stats([], plan_views())["s"] == {"count": 0, "mean_duration_s": None}
