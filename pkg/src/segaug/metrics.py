"""Evaluation and analysis: BLEU, mwer-style resegmentation, overlap categories,
positional histograms, duration buckets and per-view statistics."""

from __future__ import annotations

import bisect
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from segaug import kernels
from segaug.corpus import ViewSpec

MAX_ORDER = 4
_INTRA_WORD = "'-’"


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def tokenize_for_bleu(text: str) -> list[str]:
    """Split off punctuation and symbols, keeping ``don't``/``well-known`` whole.

    Case is preserved.
    """
    out = []
    n = len(text)
    for i, ch in enumerate(text):
        if _is_punct(ch):
            intra = ch in _INTRA_WORD and 0 < i < n - 1 and text[i - 1].isalnum() and text[i + 1].isalnum()
            out.append(ch if intra else f" {ch} ")
        else:
            out.append(ch)
    return "".join(out).split()


@dataclass(frozen=True)
class BleuResult:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    counts: tuple[int, ...] = ()
    totals: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {
            "score": self.score,
            "precisions": list(self.precisions),
            "brevity_penalty": self.brevity_penalty,
            "hyp_len": self.hyp_len,
            "ref_len": self.ref_len,
        }


def _ngram_stats(hyp: Sequence[str], ref: Sequence[str], order=MAX_ORDER):
    matches, totals = [0] * order, [0] * order
    for n in range(1, order + 1):
        h = Counter(tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1))
        r = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
        matches[n - 1] = sum(min(c, r[g]) for g, c in h.items())
        totals[n - 1] = max(len(hyp) - n + 1, 0)
    return matches, totals


def corpus_bleu(
    hyps: Sequence[str],
    refs: Sequence[str],
    smoothing: str = "none",
    k: float = 1.0,
    tokenize=tokenize_for_bleu,
) -> BleuResult:
    """Corpus BLEU from clipped n-gram counts (orders 1-4) and brevity penalty.

    ``smoothing="add-k"`` replaces a zero-match precision ``0/total`` by
    ``k/(total + k)``. Orders for which the hypothesis side has no n-grams at
    all are left out of the geometric mean.
    """
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise ValueError("empty corpus")
    if smoothing not in ("none", "add-k"):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        ht, rt = tokenize(h), tokenize(r)
        hyp_len += len(ht)
        ref_len += len(rt)
        m, t = _ngram_stats(ht, rt)
        for i in range(MAX_ORDER):
            matches[i] += m[i]
            totals[i] += t[i]

    if hyp_len == 0:
        score = 100.0 if ref_len == 0 else 0.0
        return BleuResult(score, (0.0,) * MAX_ORDER, 0.0 if ref_len else 1.0, 0, ref_len, tuple(matches), tuple(totals))

    bp = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    precisions = []
    logs = []
    zero = False
    for m, t in zip(matches, totals):
        if t == 0:
            precisions.append(0.0)
            continue
        if m == 0 and smoothing == "add-k":
            p = k / (t + k)
        else:
            p = m / t
        precisions.append(p)
        if p == 0:
            zero = True
        else:
            logs.append(math.log(p))
    score = 0.0 if zero or not logs else 100.0 * bp * math.exp(sum(logs) / len(logs))
    return BleuResult(score, tuple(precisions), bp, hyp_len, ref_len, tuple(matches), tuple(totals))


def _encode(*seqs: Sequence[str], lower: bool = False):
    table: dict[str, int] = {}
    out = []
    for seq in seqs:
        out.append(np.array([table.setdefault(x.lower() if lower else x, len(table)) for x in seq], dtype=np.int64))
    return out


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    ia, ib = _encode(a, b)
    return int(kernels.edit_rows(ia, ib, np.array([len(a)], dtype=np.int64))[0, -1])


class Resegmentation(NamedTuple):
    cuts: list[int]
    cost: int

    def pieces(self, hyp_words: Sequence[str]) -> list[list[str]]:
        return [list(hyp_words[a:b]) for a, b in zip(self.cuts, self.cuts[1:])]


def mwer_resegment(
    hyp_words: Sequence[str],
    ref_segments: Sequence[Sequence[str]],
    case_insensitive: bool = False,
) -> Resegmentation:
    """Cut a hypothesis word stream into ``len(ref_segments)`` pieces minimizing
    the summed edit distance to the references.

    The optimum equals the edit distance between the hypothesis and the
    concatenated references; cuts are recovered greedily against a backward
    table, which yields the lexicographically earliest optimal cut vector.
    """
    if not ref_segments:
        raise ValueError("need at least one reference segment")
    m = len(ref_segments)
    n = len(hyp_words)
    concat = [w for seg in ref_segments for w in seg]
    encoded = _encode(hyp_words, concat, *ref_segments, lower=case_insensitive)
    hyp, ref = encoded[0], encoded[1]
    refs = encoded[2:]
    bounds = np.cumsum([0] + [len(s) for s in ref_segments])
    total_len = int(bounds[-1])

    # back[j][k] = min cost of references j.. against hyp[k:]
    back_rows = np.array([total_len - int(b) for b in bounds], dtype=np.int64)
    back_raw = kernels.edit_rows(ref[::-1].copy(), hyp[::-1].copy(), back_rows)
    back = back_raw[:, ::-1]
    total = int(back[0, 0])

    cuts = [0]
    spent = 0
    for j in range(1, m):
        k0 = cuts[-1]
        fwd = kernels.edit_rows(refs[j - 1], hyp[k0:].copy(), np.array([len(refs[j - 1])], dtype=np.int64))[0]
        for k in range(k0, n + 1):
            if spent + int(fwd[k - k0]) + int(back[j, k]) == total:
                spent += int(fwd[k - k0])
                cuts.append(k)
                break
        else:  # pragma: no cover - guaranteed by the decomposition
            raise RuntimeError("resegmentation backtrack failed")
    cuts.append(n)
    return Resegmentation(cuts, total)


_TIME_TOL = 1e-9  # absorbs float noise in boundary comparisons


class Overlap(str, Enum):
    EQUAL = "equal"
    ISOLATED = "isolated"
    EXPANDED = "expanded"
    MIXED = "mixed"


def categorize_overlap(
    view_seg: tuple[float, float],
    manual: Sequence[tuple[float, float]],
    eps_s: float = 0.2,
) -> tuple[Overlap, bool]:
    """Classify a view segment against the manual segments of its document.

    Returns ``(category, in_gap)``; ``in_gap`` marks a segment that overlaps no
    manual segment (counted as mixed).
    """
    if eps_s < 0:
        raise ValueError("eps_s must be non-negative")
    eps_s += _TIME_TOL
    s2, e2 = view_seg
    bounds = list(getattr(manual, "boundaries", manual))
    if any(abs(s - s2) <= eps_s and abs(e - e2) <= eps_s for s, e in bounds):
        return Overlap.EQUAL, False
    if any(s - eps_s <= s2 and e2 <= e + eps_s for s, e in bounds):
        return Overlap.ISOLATED, False
    if any(s2 <= s + eps_s and e - eps_s <= e2 for s, e in bounds):
        return Overlap.EXPANDED, False
    overlaps = any(s2 < e and s < e2 for s, e in bounds)
    return Overlap.MIXED, not overlaps


@dataclass
class OverlapReport:
    counts: dict[str, int] = field(default_factory=lambda: {c.value: 0 for c in Overlap})
    gap: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def percentages(self) -> dict[str, float]:
        t = self.total
        return {k: (100.0 * v / t if t else 0.0) for k, v in self.counts.items()}

    def add(self, category: Overlap, in_gap: bool = False) -> None:
        self.counts[category.value] += 1
        self.gap += int(in_gap)

    def to_json(self) -> dict:
        return {"counts": dict(self.counts), "percentages": self.percentages, "gap": self.gap, "total": self.total}


def overlap_report(view_segments_by_doc, manual_by_doc, eps_s: float = 0.2) -> OverlapReport:
    """Tally categories for ``{doc_id: [(s, e), ...]}`` against manual boundaries."""
    report = OverlapReport()
    for doc_id, segs in view_segments_by_doc.items():
        manual = manual_by_doc.get(doc_id, [])
        for seg in segs:
            report.add(*categorize_overlap(seg, manual, eps_s))
    return report


def _target_text(item) -> str:
    if isinstance(item, str):
        return item
    return getattr(item, "tgt_text", None) or ""


def position_histogram(texts: Iterable, token: str) -> dict[int, int]:
    """Count occurrences of ``token`` by absolute word position in each target text."""
    hist: Counter = Counter()
    for item in texts:
        for pos, word in enumerate(_target_text(item).split()):
            if word == token:
                hist[pos] += 1
    return dict(sorted(hist.items()))


def duration_buckets(examples: Iterable, views: Sequence[ViewSpec]) -> dict[str, list]:
    """Bucket examples into view ranges ``[min, max)``; the outer ranges are open."""
    ordered = sorted(views, key=lambda v: v.min_s)
    buckets: dict[str, list] = {v.tag: [] for v in ordered}
    if not ordered:
        return buckets
    mins = [v.min_s for v in ordered]
    for ex in examples:
        d = ex.end_s - ex.start_s
        i = max(bisect.bisect_right(mins, d) - 1, 0)
        buckets[ordered[i].tag].append(ex)
    return buckets


def view_stats(examples: Iterable, views: Optional[Sequence[ViewSpec]] = None) -> dict[str, dict]:
    """Per-view example count and mean duration (``None`` for an empty view)."""
    durations: dict[str, list[float]] = {v.tag: [] for v in views} if views else {}
    for ex in examples:
        durations.setdefault(ex.view_tag, []).append(ex.end_s - ex.start_s)
    return {
        tag: {"count": len(ds), "mean_duration_s": (sum(ds) / len(ds) if ds else None)}
        for tag, ds in durations.items()
    }
