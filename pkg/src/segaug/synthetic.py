"""Synthetic documents with hand-built emissions and speech probabilities.

Each document gets a frame layout in which every character occupies known
frames, so forced alignment has a known answer. Emissions are near one-hot
on the intended symbol; probabilities are high over speech and low over
pauses and the gaps between manual segments.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from segaug.aligner import EmissionMatrix, save_emissions
from segaug.corpus import Document, ManualSegment, save_corpus
from segaug.segmenter import FrameProbabilities, save_probabilities
from segaug.textnorm import BLANK, ENGLISH_ALPHABET, WORD_SEP, CleanUnit, clean
from segaug.timeline import Block

VOCAB = [BLANK, WORD_SEP] + list(ENGLISH_ALPHABET)

WORDS = (
    "the a of and to in is it that we this was for you with on are as they be at one have "
    "from or had by but what all were when there can an your which their said if do will "
    "each about how up out them then she many some so these would other into has more her "
    "two like him see time could no make than first been its who now people my made over "
    "did down only way find use may water long little very after words called just where "
    "most know get through back much go good new write our me man too any day same right "
    "look think also around another came come work three word must because does part even "
    "place well such here take why things help put years different away again off went old "
    "number great tell men say small every found still between name should home big give "
    "air line set own under read last never us left end along while might next sound below "
    "saw something thought both few those always looked show large often together asked "
    "house don't world going want school important until form food keep children feet land "
    "side without boy once animals life enough took sometimes four head above kind began "
    "almost live page got earth need far hand high year mother light parts country father "
    "let's night following picture being study second eyes soon times story boys since white "
    "days ever water hard near sentence better best across during today others sure means "
    "it's knew try told young miles sun ways thing whole hear example heard several change "
    "answer room sea against top turned learn point city play toward five using himself "
    "usually well-known book called seen"
).split()
EVENTS = ("(Laughter)", "(Applause)", "(Music)", "[inaudible]")
SPEAKERS = ("Chris Anderson:", "CA:", "Host:")


@dataclass
class SynthDoc:
    document: Document
    probs: FrameProbabilities
    emissions: EmissionMatrix
    units: list[CleanUnit]
    # (unit index, cleaned word, first frame, last frame) in emission frames
    word_frames: list[tuple[int, str, int, int]]
    # (symbol, first frame, last frame) for every aligned symbol incl. separators
    char_frames: list[tuple[str, int, int]]

    @property
    def id(self) -> str:
        return self.document.id


def _sentence(rng: np.random.Generator, first: bool) -> str:
    n = int(rng.integers(4, 13))
    words = [str(rng.choice(WORDS)) for _ in range(n)]
    for i in range(n):
        r = rng.random()
        if r < 0.06:
            words[i] = str(int(rng.integers(0, 2500)))
        elif r < 0.12 and i < n - 1:
            words[i] += ","
    words[0] = words[0][0].upper() + words[0][1:]
    text = " ".join(words) + str(rng.choice([".", ".", ".", "?", "!"]))
    if rng.random() < 0.15:
        text = f"{rng.choice(EVENTS)} {text}"
    if first and rng.random() < 0.5:
        text = f"{rng.choice(SPEAKERS)} {text}"
    return text


def _one_hot_rows(rng, targets: list[int], n_vocab: int) -> np.ndarray:
    logits = -rng.uniform(6.0, 10.0, size=(len(targets), n_vocab))
    logits[np.arange(len(targets)), targets] = 0.0
    m = logits.max(axis=1, keepdims=True)
    return logits - (m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True)))


def make_document(
    doc_id: str,
    seed: int = 0,
    n_sentences: Optional[int] = None,
    frame_period_s: float = 0.02,
) -> SynthDoc:
    rng = np.random.default_rng([seed, sum(map(ord, doc_id)), len(doc_id)])
    if n_sentences is None:
        n_sentences = int(rng.integers(8, 16))
    sentences = [_sentence(rng, i == 0) for i in range(n_sentences)]
    transcript = " ".join(sentences)
    units = clean(transcript)

    sent_starts = []
    pos = 0
    for s in sentences:
        sent_starts.append(pos)
        pos += len(s) + 1
    units_by_sentence: list[list[int]] = [[] for _ in sentences]
    for ui, u in enumerate(units):
        units_by_sentence[bisect.bisect_right(sent_starts, u.doc_char_offset) - 1].append(ui)

    index = {s: i for i, s in enumerate(VOCAB)}
    blank = index[BLANK]
    targets: list[int] = []
    speech: list[bool] = []
    word_frames = []
    char_frames = []
    blocks = []
    segments = []
    cursor_frames = int(rng.integers(10, 40))  # leading silence, in frames of document time
    total_words = sum(len(u.cleaned_words) for u in units)
    word_no = 0

    def emit(sym: int, n: int, is_speech: bool):
        targets.extend([sym] * n)
        speech.extend([is_speech] * n)

    for si, unit_ids in enumerate(units_by_sentence):
        first_frame = len(targets)
        emit(blank, int(rng.integers(3, 9)), False)
        run_start = len(targets)
        for k, ui in enumerate(unit_ids):
            for w in units[ui].cleaned_words:
                w_first = len(targets)
                for ci, c in enumerate(w):
                    # identical neighbours: one frame each, blank between, so the path is unique
                    doubled = (ci > 0 and w[ci - 1] == c) or (ci + 1 < len(w) and w[ci + 1] == c)
                    c_first = len(targets)
                    emit(index[c], 1 if doubled else int(rng.integers(1, 4)), True)
                    w_last = len(targets) - 1
                    char_frames.append((c, c_first, w_last))
                    low = 1 if ci + 1 < len(w) and w[ci + 1] == c else 0
                    emit(blank, int(rng.integers(low, 3)), True)
                word_frames.append((ui, w, w_first, w_last))
                word_no += 1
                if word_no < total_words:
                    char_frames.append((WORD_SEP, len(targets), len(targets)))
                    emit(index[WORD_SEP], 1, True)
                    emit(blank, int(rng.integers(0, 3)), True)
            run = (len(targets) - run_start) * frame_period_s
            rest = sum(len(units[x].cleaned_words) for x in unit_ids[k + 1 :])
            if k < len(unit_ids) - 1 and run >= 0.6 and rest >= 3 and rng.random() < 0.25:
                emit(blank, int(rng.integers(15, 30)), False)
                run_start = len(targets)
        emit(blank, int(rng.integers(3, 9)), False)
        count = len(targets) - first_frame
        start_s = cursor_frames * frame_period_s
        blocks.append(Block(first_frame, count, start_s))
        segments.append((start_s, (cursor_frames + count) * frame_period_s))
        cursor_frames += count + int(rng.integers(10, 50))

    duration = cursor_frames * frame_period_s
    lp = _one_hot_rows(rng, targets, len(VOCAB))
    emissions = EmissionMatrix(frame_period_s, list(VOCAB), lp, blocks, doc_id)

    n_prob = cursor_frames
    prob_speech = np.zeros(n_prob, dtype=bool)
    for b in blocks:
        offset = round(b.doc_start_s / frame_period_s)
        prob_speech[offset : offset + b.frame_count] = speech[b.first_frame : b.first_frame + b.frame_count]
    values = np.where(prob_speech, rng.uniform(0.6, 1.0, n_prob), rng.uniform(0.0, 0.4, n_prob))
    probs = FrameProbabilities.from_values(values, frame_period_s, doc_id)

    manual = tuple(
        ManualSegment(i, round(s, 6), round(e, 6), text, _fake_translation(text))
        for i, ((s, e), text) in enumerate(zip(segments, sentences))
    )
    document = Document(doc_id, round(duration, 6), manual)

    return SynthDoc(document, probs, emissions, units, word_frames, char_frames)


def _fake_translation(text: str) -> str:
    return " ".join(w[::-1].lower() for w in text.split())


def make_corpus(n_docs: int = 5, seed: int = 0, **kwargs) -> list[SynthDoc]:
    return [make_document(f"doc{i:03d}", seed=seed, **kwargs) for i in range(n_docs)]


def write_corpus(docs: list[SynthDoc], out_dir, binary: bool = True) -> dict[str, Path]:
    """Write ``corpus.jsonl``, probabilities and emissions under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"corpus": out / "corpus.jsonl"}
    save_corpus([d.document for d in docs], paths["corpus"])
    if binary:
        paths["probs"] = out / "probs"
        paths["emissions"] = out / "emissions"
    else:
        paths["probs"] = out / "probs.jsonl"
        paths["emissions"] = out / "emissions.jsonl"
    save_probabilities([d.probs for d in docs], paths["probs"], binary=binary)
    save_emissions([d.emissions for d in docs], paths["emissions"], binary=binary)
    return paths
