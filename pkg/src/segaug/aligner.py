"""CTC forced alignment of cleaned transcripts to frame emissions.

The trellis recurrence (tokens ``c_1..c_L``, frame log-probs ``U``)::

    D[t][0] = D[t-1][0] + U[t-1][blank]
    D[t][j] = max(D[t-1][j] + max(U[t-1][blank], U[t-1][c_j]),   # stay
                  D[t-1][j-1] + U[t-1][c_j])                     # advance

Backtracking prefers "stay" on ties. The DP itself lives in
``segaug.kernels`` (compiled when available).
"""

from __future__ import annotations

import bisect
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from segaug import kernels
from segaug.corpus import CorpusError, atomic_write_bytes
from segaug.segmenter import _f32_period, _pack_blocks, _unpack_blocks
from segaug.textnorm import BLANK, WORD_SEP, CleanUnit, TextNormError, alignment_text
from segaug.timeline import Block, Timeline, frame_to_doc_time  # noqa: F401

log = logging.getLogger(__name__)

EMISSIONS_MAGIC = b"SEGE"
EMISSIONS_VERSION = 1
ROW_TOLERANCE = 1e-3


class AlignmentError(ValueError):
    pass


@dataclass
class EmissionMatrix:
    frame_period_s: float
    vocab: list[str]
    logprobs: np.ndarray
    blocks: list[Block]
    doc_id: str = ""
    blank: str = BLANK
    word_sep: str = WORD_SEP

    def __post_init__(self):
        self.logprobs = np.asarray(self.logprobs, dtype=np.float64)
        if self.logprobs.ndim != 2 or (self.logprobs.size and self.logprobs.shape[1] != len(self.vocab)):
            raise AlignmentError(f"{self.doc_id}: logprobs must be T x {len(self.vocab)}")
        if len(set(self.vocab)) != len(self.vocab):
            raise AlignmentError(f"{self.doc_id}: duplicate vocabulary symbols")
        for sym in (self.blank, self.word_sep):
            if sym not in self.vocab:
                raise AlignmentError(f"{self.doc_id}: vocabulary lacks {sym!r}")
        self.index = {s: i for i, s in enumerate(self.vocab)}
        self.timeline = Timeline(self.blocks, self.frame_period_s)
        if self.timeline.n_frames != self.n_frames:
            raise AlignmentError(
                f"{self.doc_id}: blocks cover {self.timeline.n_frames} frames, matrix has {self.n_frames}"
            )

    @property
    def n_frames(self) -> int:
        return int(self.logprobs.shape[0]) if self.logprobs.size else 0

    def check_rows(self, tol: float = ROW_TOLERANCE) -> None:
        if not self.n_frames:
            return
        m = self.logprobs.max(axis=1, keepdims=True)
        lse = (m + np.log(np.exp(self.logprobs - m).sum(axis=1, keepdims=True))).ravel()
        bad = np.flatnonzero(np.abs(lse) > tol)
        if bad.size:
            raise AlignmentError(f"{self.doc_id}: row {int(bad[0])} is not a log-distribution (lse={lse[bad[0]]:.4g})")

    def token_ids(self, chars: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.index[c] for c in chars], dtype=np.int64)
        except KeyError as exc:
            raise TextNormError(f"{self.doc_id}: symbol {exc.args[0]!r} is not in the emission vocabulary") from None


@dataclass(frozen=True)
class CharSpan:
    char: str
    start_frame: int
    end_frame: int
    score: float


@dataclass(frozen=True)
class WordSpan:
    clean_unit_ref: int
    word_text: str
    start_s: float
    end_s: float
    score: float

    def to_json(self) -> dict:
        return {
            "unit": self.clean_unit_ref,
            "word": self.word_text,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "score": self.score,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "WordSpan":
        return cls(int(rec["unit"]), rec["word"], float(rec["start_s"]), float(rec["end_s"]), float(rec["score"]))


class Alignment(NamedTuple):
    spans: list[CharSpan]
    score: float
    states: np.ndarray


def forced_align(emissions: EmissionMatrix, cleaned: Sequence[str]) -> Alignment:
    """Viterbi alignment of ``cleaned`` (a string or symbol list) to ``emissions``."""
    chars = list(cleaned)
    tokens = emissions.token_ids(chars)
    n_frames, n_tok = emissions.n_frames, len(chars)
    if n_frames < n_tok:
        raise AlignmentError(f"{emissions.doc_id}: {n_tok} symbols cannot fit in {n_frames} frames")
    lp = emissions.logprobs.reshape(n_frames, len(emissions.vocab))
    blank = emissions.index[emissions.blank]
    score, states = kernels.viterbi_align(lp, tokens, blank)
    if states is None:
        raise AlignmentError(f"{emissions.doc_id}: no alignment path has finite score")
    return Alignment(_spans_from_states(lp, tokens, chars, blank, states), score, states)


def align_chars(emissions: EmissionMatrix, cleaned: Sequence[str]) -> list[CharSpan]:
    return forced_align(emissions, cleaned).spans


def path_score(logprobs: np.ndarray, tokens: Sequence[int], blank: int, states: Sequence[int]) -> float:
    """Sum of emitted log-probabilities along a state path."""
    total = 0.0
    prev = 0
    for t, j in enumerate(states):
        row = logprobs[t]
        if j == prev + 1:
            total += row[tokens[j - 1]]
        elif j == 0:
            total += row[blank]
        else:
            total += max(row[blank], row[tokens[j - 1]])
        prev = j
    return float(total)


def _spans_from_states(lp, tokens, chars, blank, states) -> list[CharSpan]:
    starts = [-1] * len(chars)
    ends = [-1] * len(chars)
    sums = [0.0] * len(chars)
    counts = [0] * len(chars)
    prev = 0
    for t, j in enumerate(states.tolist()):
        if j == prev + 1:
            k = j - 1
            starts[k] = ends[k] = t
            sums[k] += lp[t, tokens[k]]
            counts[k] += 1
        elif j > 0 and lp[t, tokens[j - 1]] > lp[t, blank]:
            k = j - 1
            ends[k] = t
            sums[k] += lp[t, tokens[k]]
            counts[k] += 1
        prev = j
    return [CharSpan(c, starts[k], ends[k], sums[k] / counts[k]) for k, c in enumerate(chars)]


def chars_to_words(spans: Sequence[CharSpan], units: Sequence[CleanUnit], timeline: Timeline) -> list[WordSpan]:
    """Group character spans into words and map them to document time."""
    expected = alignment_text(units)
    got = "".join(s.char for s in spans)
    if got != expected:
        raise AlignmentError(f"character spans spell {got[:40]!r}..., expected {expected[:40]!r}...")
    owners = [(ui, w) for ui, u in enumerate(units) for w in u.cleaned_words]
    words = []
    pos = 0
    for ui, word in owners:
        chunk = spans[pos : pos + len(word)]
        pos += len(word) + 1  # skip the separator
        words.append(
            WordSpan(
                clean_unit_ref=ui,
                word_text=word,
                start_s=timeline.time_of(chunk[0].start_frame),
                end_s=timeline.end_time_of(chunk[-1].end_frame),
                score=float(np.mean([c.score for c in chunk])),
            )
        )
    return words


class SegmentAssignment(NamedTuple):
    groups: list[list[int]]
    dropped: list[int]


def unit_midpoints(words: Sequence[WordSpan], n_units: int) -> list[Optional[float]]:
    first: list[Optional[float]] = [None] * n_units
    last: list[Optional[float]] = [None] * n_units
    for w in words:
        u = w.clean_unit_ref
        if first[u] is None or w.start_s < first[u]:
            first[u] = w.start_s
        if last[u] is None or w.end_s > last[u]:
            last[u] = w.end_s
    return [None if a is None else (a + b) / 2 for a, b in zip(first, last)]


def assign_words_to_segments(words: Sequence[WordSpan], units: Sequence[CleanUnit], seg) -> SegmentAssignment:
    """Assign each unit to the segment ``[start, end)`` holding its temporal midpoint.

    ``seg`` is a ``Segmentation`` or a sorted list of ``(start_s, end_s)``.
    Units are never split; units outside every segment are dropped.
    """
    bounds = list(getattr(seg, "boundaries", seg))
    starts = [s for s, _ in bounds]
    groups: list[list[int]] = [[] for _ in bounds]
    dropped = []
    for ui, mid in enumerate(unit_midpoints(words, len(units))):
        if mid is None:
            dropped.append(ui)
            continue
        k = bisect.bisect_right(starts, mid) - 1
        if k >= 0 and mid < bounds[k][1]:
            groups[k].append(ui)
        else:
            dropped.append(ui)
    if dropped:
        log.warning("%d unit(s) fall outside every segment and were dropped", len(dropped))
    return SegmentAssignment(groups, dropped)


# -- emission files ----------------------------------------------------------


def emissions_to_bytes(em: EmissionMatrix) -> bytes:
    parts = [EMISSIONS_MAGIC, struct.pack("<If", EMISSIONS_VERSION, em.frame_period_s)]
    parts.append(struct.pack("<I", len(em.vocab)))
    for sym in em.vocab:
        raw = sym.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
    parts.append(_pack_blocks(em.blocks))
    parts.append(np.ascontiguousarray(em.logprobs, dtype="<f4").tobytes())
    return b"".join(parts)


def emissions_from_bytes(data: bytes, doc_id: str = "", blank: str = BLANK) -> EmissionMatrix:
    if data[:4] != EMISSIONS_MAGIC:
        raise CorpusError("not an emission file (bad magic)")
    version, period = struct.unpack_from("<If", data, 4)
    if version != EMISSIONS_VERSION:
        raise CorpusError(f"unsupported emission file version {version}")
    off = 12
    (n_vocab,) = struct.unpack_from("<I", data, off)
    off += 4
    vocab = []
    for _ in range(n_vocab):
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        vocab.append(data[off : off + ln].decode("utf-8"))
        off += ln
    blocks, off = _unpack_blocks(data, off)
    n_frames = sum(b.frame_count for b in blocks)
    if off + 4 * n_frames * n_vocab != len(data):
        raise CorpusError("emission file size does not match its header")
    lp = np.frombuffer(data, dtype="<f4", count=n_frames * n_vocab, offset=off)
    lp = lp.astype(np.float64).reshape(n_frames, n_vocab)
    return EmissionMatrix(_f32_period(period), vocab, lp, blocks, doc_id, blank=blank)


def emissions_to_json(em: EmissionMatrix) -> dict:
    return {
        "doc_id": em.doc_id,
        "frame_period_s": em.frame_period_s,
        "vocab": list(em.vocab),
        "blocks": [b.to_json() for b in em.blocks],
        "logprobs": em.logprobs.tolist(),
    }


def emissions_from_json(rec: dict, blank: str = BLANK) -> EmissionMatrix:
    vocab = list(rec["vocab"])
    lp = np.asarray(rec["logprobs"], dtype=np.float64).reshape(-1, len(vocab))
    return EmissionMatrix(
        float(rec["frame_period_s"]), vocab, lp, [Block.from_json(b) for b in rec["blocks"]], str(rec["doc_id"]), blank
    )


def load_emissions(path, blank: str = BLANK, check: bool = True) -> dict[str, EmissionMatrix]:
    """Load emissions from JSONL, a single ``.sege`` file, or a directory of them."""
    path = Path(path)
    out = {}
    if path.is_dir():
        for f in sorted(path.glob("*.sege")):
            out[f.stem] = emissions_from_bytes(f.read_bytes(), f.stem, blank)
    elif path.suffix == ".sege":
        out[path.stem] = emissions_from_bytes(path.read_bytes(), path.stem, blank)
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    em = emissions_from_json(json.loads(line), blank)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorpusError(f"{path}:{lineno}: bad emission record ({exc})") from exc
                out[em.doc_id] = em
    if check:
        for em in out.values():
            em.check_rows()
    return out


def save_emissions(items: Sequence[EmissionMatrix], path, binary: bool = True) -> None:
    path = Path(path)
    if binary:
        path.mkdir(parents=True, exist_ok=True)
        for em in items:
            atomic_write_bytes(path / f"{em.doc_id}.sege", emissions_to_bytes(em))
        return
    text = "".join(json.dumps(emissions_to_json(em)) + "\n" for em in items)
    atomic_write_bytes(path, text.encode("utf-8"))
