"""Document-level corpus model, manifest loading and view (de)serialization."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

log = logging.getLogger(__name__)

VIEW_FIELDS = ("doc_id", "view", "start_s", "end_s", "src_text", "tgt_text", "special_token")


class CorpusError(ValueError):
    """Raised for malformed manifests or invariant violations."""


class Algorithm(str, Enum):
    PDAC = "pdac"
    PSTRM = "pstrm"


@dataclass(frozen=True)
class ManualSegment:
    index: int
    start_s: float
    end_s: float
    src_text: str
    tgt_text: str = ""

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class Document:
    id: str
    duration_s: float
    manual_segments: tuple[ManualSegment, ...] = ()
    doc_translation: Optional[str] = None

    def translation(self) -> str:
        """Document-level translation, rebuilt from the segments when absent."""
        if self.doc_translation is not None:
            return self.doc_translation
        return " ".join(" ".join(s.tgt_text.split()) for s in self.manual_segments if s.tgt_text.strip())


@dataclass(frozen=True)
class ViewSpec:
    tag: str
    min_s: float
    max_s: float
    algorithm: Algorithm = Algorithm.PDAC

    def __post_init__(self):
        if not 0 < self.min_s < self.max_s:
            raise ValueError(f"view {self.tag!r}: need 0 < min_s < max_s, got ({self.min_s}, {self.max_s})")


@dataclass
class AugmentedExample:
    doc_id: str
    view_tag: str
    start_s: float
    end_s: float
    src_text: str
    tgt_text: Optional[str] = None
    special_token: Optional[str] = None
    # set when the segmenter let the duration leave the view range
    overflow: bool = False

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def validate(self, lo_s: float = 0.4, hi_s: float = 30.0) -> None:
        if not self.start_s < self.end_s:
            raise CorpusError(f"{self.doc_id}/{self.view_tag}: start_s must precede end_s")
        if not self.overflow and not (lo_s - 1e-9 <= self.duration_s <= hi_s + 1e-9):
            raise CorpusError(
                f"{self.doc_id}/{self.view_tag}: duration {self.duration_s:.3f}s outside "
                f"[{lo_s}, {hi_s}] without overflow flag"
            )


def _check_document(doc: Document) -> None:
    if doc.duration_s < 0:
        raise CorpusError(f"document {doc.id!r}: duration_s is negative")
    prev = None
    for pos, seg in enumerate(doc.manual_segments):
        where = f"document {doc.id!r} segment {seg.index}"
        if seg.index != pos:
            raise CorpusError(f"{where}: index must be {pos} (indices are contiguous from 0)")
        if not seg.start_s < seg.end_s:
            raise CorpusError(f"{where}: end_s ({seg.end_s}) must be greater than start_s ({seg.start_s})")
        if seg.start_s < 0 or seg.end_s > doc.duration_s + 1e-9:
            raise CorpusError(f"{where}: boundaries outside [0, duration_s]")
        if not seg.src_text.strip():
            raise CorpusError(f"{where}: src_text is empty")
        if prev is not None:
            if seg.start_s < prev.start_s:
                raise CorpusError(f"{where}: segments are not sorted by start_s")
            if seg.start_s < prev.end_s:
                raise CorpusError(f"{where}: segments overlap")
        prev = seg


def document_from_json(rec: dict, repair_overlaps: bool = False) -> Document:
    try:
        doc_id = str(rec["id"])
        segs = [
            ManualSegment(
                index=int(s["index"]),
                start_s=float(s["start_s"]),
                end_s=float(s["end_s"]),
                src_text=str(s["src_text"]),
                tgt_text=str(s.get("tgt_text", "")),
            )
            for s in rec.get("segments", [])
        ]
        duration = float(rec["duration_s"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"missing or malformed field: {exc}") from exc
    if repair_overlaps:
        segs = _clamp_overlaps(doc_id, segs)
    doc = Document(doc_id, duration, tuple(segs), rec.get("doc_translation"))
    _check_document(doc)
    return doc


def _clamp_overlaps(doc_id: str, segs: list[ManualSegment]) -> list[ManualSegment]:
    out = list(segs)
    for i in range(len(out) - 1):
        nxt = out[i + 1]
        if out[i].end_s > nxt.start_s:
            log.warning("document %s: clamping segment %d end %.3f -> %.3f", doc_id, i, out[i].end_s, nxt.start_s)
            s = out[i]
            out[i] = ManualSegment(s.index, s.start_s, nxt.start_s, s.src_text, s.tgt_text)
    return out


def document_to_json(doc: Document) -> dict:
    rec = {
        "id": doc.id,
        "duration_s": doc.duration_s,
        "segments": [
            {
                "index": s.index,
                "start_s": s.start_s,
                "end_s": s.end_s,
                "src_text": s.src_text,
                "tgt_text": s.tgt_text,
            }
            for s in doc.manual_segments
        ],
    }
    if doc.doc_translation is not None:
        rec["doc_translation"] = doc.doc_translation
    return rec


def load_corpus(path, repair_overlaps: bool = False) -> list[Document]:
    """Read a JSON Lines corpus manifest, one document per line.

    Errors carry the 1-based line number. With ``repair_overlaps`` a segment
    that runs into its successor is clamped (and logged) instead of rejected.
    """
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            try:
                doc = document_from_json(rec, repair_overlaps=repair_overlaps)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if doc.id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def save_corpus(docs: Iterable[Document], path) -> None:
    lines = [json.dumps(document_to_json(d), ensure_ascii=False) + "\n" for d in docs]
    atomic_write_text(path, "".join(lines))


def doc_transcript(doc: Document) -> str:
    """Source transcript of the whole document (segments joined by one space)."""
    return " ".join(" ".join(s.src_text.split()) for s in doc.manual_segments).strip()


def fmt_time(x: float) -> str:
    return f"{x:.3f}"


def _example_record(ex: AugmentedExample, prepend_special: bool) -> list[tuple[str, object]]:
    tgt = ex.tgt_text
    if prepend_special and ex.special_token and tgt is not None:
        tgt = f"{ex.special_token} {tgt}"
    fields: list[tuple[str, object]] = [
        ("doc_id", ex.doc_id),
        ("view", ex.view_tag),
        ("start_s", ex.start_s),
        ("end_s", ex.end_s),
        ("src_text", ex.src_text),
    ]
    if tgt is not None:
        fields.append(("tgt_text", tgt))
    if ex.special_token is not None:
        fields.append(("special_token", ex.special_token))
    if ex.overflow:
        fields.append(("overflow", True))
    return fields


def example_to_line(ex: AugmentedExample, prepend_special: bool = False) -> str:
    """JSON line with times rendered at exactly three decimals."""
    parts = []
    for key, value in _example_record(ex, prepend_special):
        if key in ("start_s", "end_s"):
            if not math.isfinite(value):
                raise CorpusError(f"non-finite time in {ex.doc_id}")
            rendered = fmt_time(value)
        else:
            rendered = json.dumps(value, ensure_ascii=False)
        parts.append(f"{json.dumps(key)}: {rendered}")
    return "{" + ", ".join(parts) + "}"


def example_from_json(rec: dict) -> AugmentedExample:
    return AugmentedExample(
        doc_id=str(rec["doc_id"]),
        view_tag=str(rec["view"]),
        start_s=float(rec["start_s"]),
        end_s=float(rec["end_s"]),
        src_text=str(rec["src_text"]),
        tgt_text=rec.get("tgt_text"),
        special_token=rec.get("special_token"),
        overflow=bool(rec.get("overflow", False)),
    )


def save_view(
    examples: Iterable[AugmentedExample],
    path,
    fmt: str = "jsonl",
    prepend_special: bool = False,
) -> None:
    """Write examples as JSON Lines (default) or header-less TSV, atomically."""
    examples = list(examples)
    if fmt == "jsonl":
        text = "".join(example_to_line(ex, prepend_special) + "\n" for ex in examples)
    elif fmt == "tsv":
        buf = io.StringIO()
        writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
        for ex in examples:
            rec = dict(_example_record(ex, prepend_special))
            row = []
            for key in VIEW_FIELDS:
                value = rec.get(key)
                if key in ("start_s", "end_s"):
                    row.append(fmt_time(value))
                else:
                    row.append("" if value is None else value)
            writer.writerow(row)
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown view format {fmt!r}")
    atomic_write_text(path, text)


def _load_view_tsv(path) -> list[AugmentedExample]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), 1):
            if not row:
                continue
            if len(row) != len(VIEW_FIELDS):
                raise CorpusError(f"{path}:{lineno}: expected {len(VIEW_FIELDS)} columns, got {len(row)}")
            rec = {k: (None if v == "" and k != "src_text" else v) for k, v in zip(VIEW_FIELDS, row)}
            try:
                out.append(example_from_json(rec))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad view record ({exc})") from exc
    return out


def load_view(path) -> list[AugmentedExample]:
    """Read a view file; ``.tsv`` files use the header-less TSV layout."""
    if str(path).endswith(".tsv"):
        return _load_view_tsv(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(example_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad view record ({exc})") from exc
    return out


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
