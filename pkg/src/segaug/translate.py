"""Target-text generation: pluggable translators, MT concatenation pairs,
document-level BLEU monitoring and paraphrase views."""

from __future__ import annotations

import logging
import random
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from segaug.corpus import AugmentedExample, Document, ViewSpec
from segaug.metrics import BleuResult, corpus_bleu

log = logging.getLogger(__name__)

DEFAULT_DOC_SUBSET = 20


class TranslationError(RuntimeError):
    pass


class TranslatorKind(str, Enum):
    IDENTITY = "identity"
    LEXICON = "lexicon"
    EXTERNAL = "external"


@dataclass
class TranslatorPort:
    kind: TranslatorKind = TranslatorKind.IDENTITY
    lexicon_path: Optional[str] = None
    command: Optional[str] = None
    batch_size: int = 256
    timeout_s: Optional[float] = 600.0
    _lexicon: Optional[dict] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.kind = TranslatorKind(self.kind)
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.kind is TranslatorKind.LEXICON and not self.lexicon_path:
            raise ValueError("lexicon translator needs a lexicon file")
        if self.kind is TranslatorKind.EXTERNAL and not self.command:
            raise ValueError("external translator needs a command")

    @classmethod
    def parse(cls, spec: str, **kwargs) -> "TranslatorPort":
        """``identity``, ``lexicon:<path>`` or ``external:<command>``."""
        name, _, arg = spec.partition(":")
        kind = TranslatorKind(name.strip().lower())
        if kind is TranslatorKind.LEXICON:
            return cls(kind, lexicon_path=arg, **kwargs)
        if kind is TranslatorKind.EXTERNAL:
            return cls(kind, command=arg, **kwargs)
        return cls(kind, **kwargs)

    def describe(self) -> str:
        """Stable identity string used in cache keys."""
        if self.kind is TranslatorKind.LEXICON:
            text = Path(self.lexicon_path).read_text(encoding="utf-8")
            return f"lexicon:{text}"
        if self.kind is TranslatorKind.EXTERNAL:
            return f"external:{self.command}"
        return "identity"

    def lexicon(self) -> dict[str, str]:
        if self._lexicon is None:
            self._lexicon = load_translation_lexicon(self.lexicon_path)
        return self._lexicon


def load_translation_lexicon(path) -> dict[str, str]:
    lex = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise TranslationError(f"{path}:{lineno}: expected src<TAB>tgt")
            src, tgt = line.split("\t", 1)
            lex[src] = tgt
    return lex


def _run_external(command: str, sentences: Sequence[str], timeout_s) -> list[str]:
    with tempfile.TemporaryDirectory(prefix="segaug-mt-") as tmp:
        src = Path(tmp) / "input.txt"
        out = Path(tmp) / "output.txt"
        src.write_text("".join(s.replace("\n", " ") + "\n" for s in sentences), encoding="utf-8")
        try:
            proc = subprocess.run(
                shlex.split(command) + [str(src), str(out)],
                capture_output=True,
                timeout=timeout_s,
                check=False,
            )
        except subprocess.TimeoutExpired as exc:
            raise TranslationError(f"translator timed out after {timeout_s}s") from exc
        except OSError as exc:
            raise TranslationError(f"cannot run translator: {exc}") from exc
        if proc.returncode != 0:
            err = proc.stderr.decode("utf-8", "replace").strip()
            raise TranslationError(f"translator exited with status {proc.returncode}: {err[-500:]}")
        if not out.exists():
            raise TranslationError("translator produced no output file")
        lines = out.read_text(encoding="utf-8").splitlines()
    if len(lines) != len(sentences):
        raise TranslationError(f"translator returned {len(lines)} lines for {len(sentences)} inputs")
    return lines


def translate_batch(port: TranslatorPort, sentences: Sequence[str]) -> list[str]:
    """Translate ``sentences`` preserving order and count."""
    sentences = list(sentences)
    if port.kind is TranslatorKind.IDENTITY:
        return sentences
    if port.kind is TranslatorKind.LEXICON:
        lex = port.lexicon()
        return [" ".join(lex.get(w, w) for w in s.split()) for s in sentences]
    out: list[str] = []
    for i in range(0, len(sentences), port.batch_size):
        out.extend(_run_external(port.command, sentences[i : i + port.batch_size], port.timeout_s))
    return out


@dataclass(frozen=True)
class MtPair:
    src: str
    tgt: str
    doc_id: str
    constituent_indices: tuple[int, ...]

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "indices": list(self.constituent_indices), "src": self.src, "tgt": self.tgt}


def group_by_target(durations: Sequence[float], draw: Callable[[], float]) -> list[list[int]]:
    """Greedy grouping of consecutive items: each group draws a target length
    and keeps absorbing the next item while the total stays within it."""
    groups = []
    i = 0
    while i < len(durations):
        target = draw()
        group = [i]
        total = durations[i]
        i += 1
        while i < len(durations) and total < target and total + durations[i] <= target:
            total += durations[i]
            group.append(i)
            i += 1
        groups.append(group)
    return groups


def build_mt_pairs(doc: Document, view: ViewSpec, seed: int = 0) -> list[MtPair]:
    """Concatenate consecutive manual segments into pairs whose speech length
    follows ``Uniform(view.min_s, view.max_s)``."""
    rng = random.Random(f"{seed}:{doc.id}:{view.tag}")
    segs = doc.manual_segments
    groups = group_by_target([s.duration_s for s in segs], lambda: rng.uniform(view.min_s, view.max_s))
    pairs = []
    for g in groups:
        pairs.append(
            MtPair(
                src=" ".join(" ".join(segs[i].src_text.split()) for i in g),
                tgt=" ".join(" ".join(segs[i].tgt_text.split()) for i in g if segs[i].tgt_text.strip()),
                doc_id=doc.id,
                constituent_indices=tuple(segs[i].index for i in g),
            )
        )
    return pairs


def sent2doc(sentences: Sequence[str]) -> str:
    return " ".join(" ".join(s.split()) for s in sentences if s.strip())


def doc_level_bleu(
    hyp_sentences_by_doc: Mapping[str, Sequence[str]],
    refs: Mapping[str, str],
    subset: Optional[int] = None,
    seed: int = 0,
) -> BleuResult:
    """BLEU of re-joined document translations against document references.

    With ``subset=k`` a seeded sample of ``k`` documents is scored.
    """
    if not hyp_sentences_by_doc:
        raise ValueError("no hypothesis documents")
    missing = [d for d in hyp_sentences_by_doc if d not in refs]
    if missing:
        raise KeyError(f"no reference for document(s): {', '.join(missing[:5])}")
    doc_ids = sorted(hyp_sentences_by_doc)
    if subset is not None and subset < len(doc_ids):
        doc_ids = sorted(random.Random(seed).sample(doc_ids, subset))
    hyps = [sent2doc(hyp_sentences_by_doc[d]) for d in doc_ids]
    return corpus_bleu(hyps, [refs[d] for d in doc_ids])


def paraphrase_view(corpus: Sequence[Document], port: TranslatorPort, view_tag: str = "para") -> list[AugmentedExample]:
    """Original boundaries and sources, targets re-generated from the sources."""
    segs = [(doc, s) for doc in corpus for s in doc.manual_segments]
    outputs = translate_batch(port, [" ".join(s.src_text.split()) for _, s in segs]) if segs else []
    return [
        AugmentedExample(doc.id, view_tag, s.start_s, s.end_s, " ".join(s.src_text.split()), tgt)
        for (doc, s), tgt in zip(segs, outputs)
    ]

