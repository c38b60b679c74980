"""Reversible transcript cleaning for forced alignment, and segment post-editing.

``clean`` turns a transcript into ``CleanUnit`` records: one per voiced
token, holding the alignment form (uppercase words over the emission
alphabet) next to the verbatim text. Event tags and speaker labels are not
aligned but ride along as prefixes/suffixes so ``reverse_clean`` can restore
every character.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

log = logging.getLogger(__name__)

ENGLISH_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ'-"
BLANK = "∅"
WORD_SEP = "|"

_ONES = (
    "ZERO ONE TWO THREE FOUR FIVE SIX SEVEN EIGHT NINE TEN ELEVEN TWELVE THIRTEEN "
    "FOURTEEN FIFTEEN SIXTEEN SEVENTEEN EIGHTEEN NINETEEN"
).split()
_TENS = "_ _ TWENTY THIRTY FORTY FIFTY SIXTY SEVENTY EIGHTY NINETY".split()
_SCALES = ("", "THOUSAND", "MILLION", "BILLION", "TRILLION", "QUADRILLION", "QUINTILLION")

_INTEGER = re.compile(r"\d{1,3}(?:,\d{3})+|\d+")
_LEAD_PUNCT = "\"'“‘«([¿¡"
_TRAIL_PUNCT = ".,;:!?\"'”’»)]…"
_EVENT_OPEN = {"(": ")", "[": "]"}
_SPEAKER_PART = re.compile(r"[A-Z][\w.'-]*")
_SPEAKER_LAST = re.compile(r"[A-Z][\w.'-]*:")
_SENT_FINAL = re.compile(r"[.?!][\"'”’»)\]]*$")
_MAX_TAG_TOKENS = 8
_MAX_SPEAKER_TOKENS = 4


class TextNormError(ValueError):
    pass


@dataclass(frozen=True)
class CleanUnit:
    original_text: str
    cleaned_words: tuple[str, ...]
    unvoiced_prefix: str = ""
    unvoiced_suffix: str = ""
    doc_char_offset: int = 0

    def render(self) -> str:
        return " ".join(x for x in (self.unvoiced_prefix, self.original_text, self.unvoiced_suffix) if x)

    def to_json(self) -> dict:
        return {
            "original_text": self.original_text,
            "cleaned_words": list(self.cleaned_words),
            "unvoiced_prefix": self.unvoiced_prefix,
            "unvoiced_suffix": self.unvoiced_suffix,
            "doc_char_offset": self.doc_char_offset,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "CleanUnit":
        return cls(
            rec["original_text"],
            tuple(rec["cleaned_words"]),
            rec.get("unvoiced_prefix", ""),
            rec.get("unvoiced_suffix", ""),
            int(rec.get("doc_char_offset", 0)),
        )


def alphabet_from_vocab(vocab: Optional[Iterable[str]]) -> frozenset[str]:
    if vocab is None:
        return frozenset(ENGLISH_ALPHABET)
    return frozenset(s for s in vocab if len(s) == 1 and s not in (BLANK, WORD_SEP))


def load_lexicon(path) -> dict[str, list[str]]:
    """Read ``token<TAB>SPELLED FORM`` lines."""
    lex = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise TextNormError(f"{path}:{lineno}: expected token<TAB>spelled form")
            token, spelled = line.split("\t", 1)
            lex[token.strip()] = spelled.upper().split()
    return lex


def _below_thousand(n: int) -> list[str]:
    words = []
    if n >= 100:
        words += [_ONES[n // 100], "HUNDRED"]
        n %= 100
        if n == 0:
            return words
    if n < 20:
        words.append(_ONES[n])
    else:
        words.append(_TENS[n // 10])
        if n % 10:
            words.append(_ONES[n % 10])
    return words


def spell_number(token: str, lexicon: Optional[Mapping[str, Sequence[str]]] = None) -> list[str]:
    """English cardinal words for an integer numeral, e.g. ``"21" -> TWENTY ONE``.

    ``lexicon`` entries take precedence. Numbers past the largest named scale
    are read digit by digit.
    """
    if lexicon and token in lexicon:
        return list(lexicon[token])
    if not _INTEGER.fullmatch(token):
        raise TextNormError(f"not an integer numeral: {token!r}")
    digits = token.replace(",", "")
    n = int(digits)
    if n == 0:
        return ["ZERO"]
    if n >= 1000 ** len(_SCALES):
        return [_ONES[int(d)] for d in digits]
    words = []
    groups = []
    while n:
        groups.append(n % 1000)
        n //= 1000
    for scale in range(len(groups) - 1, -1, -1):
        g = groups[scale]
        if g:
            words += _below_thousand(g)
            if _SCALES[scale]:
                words.append(_SCALES[scale])
    return words


def _clean_token(token: str, alphabet: frozenset[str], lexicon) -> list[str]:
    core = token.lstrip(_LEAD_PUNCT).rstrip(_TRAIL_PUNCT)
    if lexicon and core in lexicon:
        return list(lexicon[core])
    if core and _INTEGER.fullmatch(core):
        return spell_number(core, lexicon)
    if any(ch.isdigit() for ch in core):
        log.warning("token %r: digits are not spelled out, dropping them from the alignment text", token)
    filtered = "".join(ch if ch in alphabet else " " for ch in token.upper())
    words = []
    for piece in filtered.split():
        piece = piece.strip("-'")
        if piece and any(ch not in "'-" for ch in piece):
            words.append(piece)
    return words


def _event_end(tokens: Sequence[str], i: int) -> int:
    """Index one past an event tag starting at ``tokens[i]``, or ``i``."""
    tok = tokens[i]
    if not tok or tok[0] not in _EVENT_OPEN:
        return i
    # "(Laughter)" but not a lowercase parenthetical "(that is)"
    if tok[0] == "(" and not (len(tok) > 1 and tok[1].isupper()):
        return i
    close = _EVENT_OPEN[tok[0]]
    for j in range(i, min(len(tokens), i + _MAX_TAG_TOKENS)):
        if tokens[j].rstrip(_TRAIL_PUNCT.replace(close, "")).endswith(close):
            return j + 1
    return i


def _speaker_end(tokens: Sequence[str], i: int) -> int:
    for j in range(i, min(len(tokens), i + _MAX_SPEAKER_TOKENS)):
        if _SPEAKER_LAST.fullmatch(tokens[j]):
            return j + 1
        if not _SPEAKER_PART.fullmatch(tokens[j]):
            return i
    return i


def unvoiced_mask(tokens: Sequence[str]) -> list[bool]:
    """Flag tokens that belong to event tags or utterance-initial speaker labels."""
    mask = [False] * len(tokens)
    utterance_start = True
    i = 0
    while i < len(tokens):
        end = _event_end(tokens, i)
        if end == i and utterance_start:
            end = _speaker_end(tokens, i)
        if end > i:
            for j in range(i, end):
                mask[j] = True
            i = end
            continue
        utterance_start = bool(_SENT_FINAL.search(tokens[i]))
        i += 1
    return mask


def clean(
    transcript: str,
    vocab: Optional[Iterable[str]] = None,
    lexicon: Optional[Mapping[str, Sequence[str]]] = None,
) -> list[CleanUnit]:
    matches = list(re.finditer(r"\S+", transcript))
    if not matches:
        raise TextNormError("transcript is empty")
    alphabet = alphabet_from_vocab(vocab)
    tokens = [m.group() for m in matches]
    mask = unvoiced_mask(tokens)

    units: list[dict] = []
    pending: list[str] = []
    pending_offset = None
    for m, tok, unvoiced in zip(matches, tokens, mask):
        words = [] if unvoiced else _clean_token(tok, alphabet, lexicon)
        if words:
            units.append(
                {
                    "original_text": tok,
                    "cleaned_words": tuple(words),
                    "prefix": pending,
                    "suffix": [],
                    "offset": m.start() if pending_offset is None else pending_offset,
                }
            )
            pending, pending_offset = [], None
            continue
        if not unvoiced:
            log.warning("token %r has no alignable characters; attaching it to a neighbour", tok)
        if units and not pending and not unvoiced:
            units[-1]["suffix"].append(tok)
        else:
            if pending_offset is None:
                pending_offset = m.start()
            pending.append(tok)
    if not units:
        raise TextNormError("transcript has no voiced tokens")
    units[-1]["suffix"].extend(pending)
    return [
        CleanUnit(
            u["original_text"],
            u["cleaned_words"],
            " ".join(u["prefix"]),
            " ".join(u["suffix"]),
            u["offset"],
        )
        for u in units
    ]


def reverse_clean(units: Iterable[CleanUnit]) -> str:
    return " ".join(u.render() for u in units)


def alignment_text(units: Iterable[CleanUnit]) -> str:
    """Characters to force-align: every cleaned word joined by ``|``."""
    return WORD_SEP.join(w for u in units for w in u.cleaned_words)


def post_edit(segment_text: str, prev_context: Optional[str] = None) -> str:
    """Capitalize the first letter when the segment opens a sentence.

    A sentence opens at document start (no context) or after context ending
    in ``.``, ``?`` or ``!`` (optionally followed by closing quotes/brackets).
    """
    if prev_context is not None and prev_context.strip() and not _SENT_FINAL.search(prev_context.rstrip()):
        return segment_text
    for i, ch in enumerate(segment_text):
        if ch.isalpha():
            if ch.islower():
                return segment_text[:i] + ch.upper() + segment_text[i + 1 :]
            return segment_text
    return segment_text
