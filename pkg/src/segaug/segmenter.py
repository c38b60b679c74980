"""Probability-driven audio segmentation (pDAC / pSTRM) and view planning.

Both algorithms work on per-frame speech probabilities. Frames whose
probability is below ``thr`` count as non-speech: they are preferred split
points and are trimmed from segment edges.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from segaug.corpus import Algorithm, CorpusError, ViewSpec, atomic_write_bytes
from segaug.timeline import Block, Timeline

DEFAULT_FRAME_PERIOD_S = 0.02
DEFAULT_FLOOR_S = 0.2
DEFAULT_BOUNDS = (0.4, 3.0, 10.0, 20.0, 30.0)
DEFAULT_TAGS = ("s", "m", "l", "xl")

PROBS_MAGIC = b"SEGP"
PROBS_VERSION = 1


class SegmentationError(ValueError):
    pass


@dataclass
class FrameProbabilities:
    frame_period_s: float
    values: np.ndarray
    blocks: list[Block]
    doc_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise SegmentationError("probability values must be one-dimensional")
        if self.values.size and (np.nanmin(self.values) < 0 or np.nanmax(self.values) > 1 or np.isnan(self.values).any()):
            raise SegmentationError(f"{self.doc_id}: probabilities must lie in [0, 1]")
        self.timeline = Timeline(self.blocks, self.frame_period_s)
        if self.timeline.n_frames != self.values.size:
            raise SegmentationError(
                f"{self.doc_id}: blocks cover {self.timeline.n_frames} frames, values has {self.values.size}"
            )

    @classmethod
    def from_values(cls, values, frame_period_s: float = DEFAULT_FRAME_PERIOD_S, doc_id: str = "") -> "FrameProbabilities":
        values = np.asarray(values, dtype=np.float64)
        return cls(frame_period_s, values, [Block(0, int(values.size), 0.0)], doc_id)

    def __len__(self):
        return int(self.values.size)


@dataclass
class Segmentation:
    """Segments in document seconds plus their frame ranges ``[first, stop)``.

    ``flags[i]`` is ``None`` for a segment inside ``[min_s, max_s]``; otherwise
    it names why the range was left: ``"threshold"`` (a sub-threshold split was
    preferred), ``"short_stream"`` (the whole trimmed stream is shorter than
    ``min_s``), ``"window"`` (no admissible split window existed) or ``"tail"``
    (the last pSTRM piece).
    """

    boundaries: list[tuple[float, float]]
    frames: list[tuple[int, int]]
    flags: list[Optional[str]]
    min_s: float
    max_s: float
    thr: float
    algorithm: Algorithm

    def __len__(self):
        return len(self.boundaries)

    def to_json(self, doc_id: str = "", view: str = "") -> dict:
        return {
            "doc_id": doc_id,
            "view": view,
            "algorithm": self.algorithm.value,
            "min_s": self.min_s,
            "max_s": self.max_s,
            "thr": self.thr,
            "segments": [
                {"start_s": round(s, 3), "end_s": round(e, 3), **({"overflow": f} if f else {})}
                for (s, e), f in zip(self.boundaries, self.flags)
            ],
        }


def _check_params(min_s, max_s, thr, frame_period_s):
    if not 0 < min_s < max_s:
        raise SegmentationError(f"need 0 < min_s < max_s, got ({min_s}, {max_s})")
    if not 0 <= thr <= 1:
        raise SegmentationError(f"thr must be in [0, 1], got {thr}")
    fmin = math.ceil(min_s / frame_period_s - 1e-9)
    fmax = math.floor(max_s / frame_period_s + 1e-9)
    if fmax < 1:
        raise SegmentationError(f"max_s={max_s} is shorter than one frame")
    return fmin, fmax


def _trim(p: np.ndarray, s: int, e: int, thr: float) -> tuple[int, int]:
    while s < e and p[s] < thr:
        s += 1
    while e > s and p[e - 1] < thr:
        e -= 1
    return s, e


def _to_segmentation(probs, spans, min_s, max_s, thr, algorithm, floor_s):
    tau = probs.frame_period_s
    fmin = math.ceil(min_s / tau - 1e-9)
    fmax = math.floor(max_s / tau + 1e-9)
    floor_frames = floor_s / tau - 1e-9
    boundaries, frames, flags = [], [], []
    for s, e, flag in sorted(spans):
        if e - s < floor_frames:
            continue
        if fmin <= e - s <= fmax:
            flag = None
        boundaries.append((probs.timeline.time_of(s), probs.timeline.end_time_of(e - 1)))
        frames.append((s, e))
        flags.append(flag)
    return Segmentation(boundaries, frames, flags, min_s, max_s, thr, algorithm)


def pdac(
    probs: FrameProbabilities,
    min_s: float,
    max_s: float,
    thr: float = 0.5,
    floor_s: float = DEFAULT_FLOOR_S,
    literal_threshold: bool = False,
) -> Segmentation:
    """Progressive divide-and-conquer segmentation with threshold priority.

    A segment longer than ``max_s`` is split at its lowest sub-threshold frame
    anywhere inside it; that frame is dropped and both halves are trimmed.
    Only when no sub-threshold frame exists does the split fall back to the
    lowest frame at least ``min_s`` away from both ends, keeping the frame.
    Ties go to the smallest frame index.

    ``literal_threshold`` inverts the candidate test to ``p > thr``.
    """
    fmin, fmax = _check_params(min_s, max_s, thr, probs.frame_period_s)
    p = probs.values
    n = p.size
    if n == 0:
        return Segmentation([], [], [], min_s, max_s, thr, Algorithm.PDAC)
    if literal_threshold:
        candidate = p > thr
    else:
        candidate = p < thr
    cand_vals = np.where(candidate, p, np.inf)

    spans = []
    s0, e0 = _trim(p, 0, n, thr)
    stack = [(s0, e0, "short_stream")] if s0 < e0 else []
    while stack:
        s, e, flag = stack.pop()
        if e - s <= fmax:
            spans.append((s, e, flag))
            continue
        inner = cand_vals[s + 1 : e]
        k = int(np.argmin(inner))
        if inner[k] != np.inf:
            kappa = s + 1 + k
            for a, b in (_trim(p, s, kappa, thr), _trim(p, kappa + 1, e, thr)):
                if a < b:
                    stack.append((a, b, "threshold"))
            continue
        lo, hi = s + fmin, e - fmin
        child_flag = "window"
        if lo > hi:
            lo, hi = s + 1, e - 1
        else:
            child_flag = flag if flag == "threshold" else None
        kappa = lo + int(np.argmin(p[lo : hi + 1]))
        stack.append((kappa, e, child_flag))
        stack.append((s, kappa, child_flag))
    return _to_segmentation(probs, spans, min_s, max_s, thr, Algorithm.PDAC, floor_s)


def pstrm(
    probs: FrameProbabilities,
    min_s: float,
    max_s: float,
    thr: float = 0.5,
    floor_s: float = DEFAULT_FLOOR_S,
    literal_threshold: bool = False,
) -> Segmentation:
    """Streaming segmentation: consume the signal left to right in windows of
    at most ``max_s``, cutting at the lowest sub-threshold frame between
    ``min_s`` and ``max_s`` from the cursor, else at exactly ``max_s``."""
    fmin, fmax = _check_params(min_s, max_s, thr, probs.frame_period_s)
    p = probs.values
    n = p.size
    if n == 0:
        return Segmentation([], [], [], min_s, max_s, thr, Algorithm.PSTRM)
    candidate = p > thr if literal_threshold else p < thr
    cand_vals = np.where(candidate, p, np.inf)

    c, end = _trim(p, 0, n, thr)
    spans = []
    while c < end:
        while c < end and p[c] < thr:
            c += 1
        if c >= end:
            break
        if end - c <= fmax:
            a, b = _trim(p, c, end, thr)
            if a < b:
                spans.append((a, b, "tail"))
            break
        lo = c + max(fmin, 1)
        hi = c + fmax
        window = cand_vals[lo:hi]
        k = int(np.argmin(window)) if window.size else 0
        if window.size and window[k] != np.inf:
            kappa = lo + k
            a, b = _trim(p, c, kappa, thr)
            if a < b:
                spans.append((a, b, "threshold"))
            c = kappa + 1
        else:
            spans.append((c, c + fmax, "window"))
            c += fmax
    return _to_segmentation(probs, spans, min_s, max_s, thr, Algorithm.PSTRM, floor_s)


def segment(probs: FrameProbabilities, view: ViewSpec, thr: float = 0.5, **kwargs) -> Segmentation:
    fn = pstrm if view.algorithm is Algorithm.PSTRM else pdac
    return fn(probs, view.min_s, view.max_s, thr, **kwargs)


def plan_views(mu: int = 4, lo_s: float = 0.4, hi_s: float = 30.0) -> list[ViewSpec]:
    """Split ``[lo_s, hi_s]`` into ``mu`` adjacent length ranges.

    Range edges are read off the default edges (0.4, 3, 10, 20, 30) at evenly
    spaced fractional positions, interpolating geometrically between
    neighbours, then mapped affinely in log space onto ``[lo_s, hi_s]``. With
    more than one range, the last one uses pSTRM when it reaches 20 s.
    """
    if int(mu) != mu or mu < 1:
        raise SegmentationError(f"mu must be a positive integer, got {mu}")
    if not 0 < lo_s < hi_s:
        raise SegmentationError("need 0 < lo_s < hi_s")
    logs = [math.log(b) for b in DEFAULT_BOUNDS]
    last = len(DEFAULT_BOUNDS) - 1
    edges = []
    for k in range(mu + 1):
        pos = k * last / mu
        i = min(int(math.floor(pos)), last - 1)
        frac = pos - i
        edges.append(logs[i] + frac * (logs[i + 1] - logs[i]))
    # rescale onto the requested range in log space
    a, b = logs[0], logs[-1]
    la, lb = math.log(lo_s), math.log(hi_s)
    edges = [la + (x - a) * (lb - la) / (b - a) for x in edges]
    values = [round(math.exp(x), 6) for x in edges]
    values[0], values[-1] = lo_s, hi_s
    tags = list(DEFAULT_TAGS) if mu == len(DEFAULT_TAGS) else [f"v{k + 1}" for k in range(mu)]
    views = []
    for k in range(mu):
        algo = Algorithm.PSTRM if (mu > 1 and k == mu - 1 and values[k + 1] >= 20.0) else Algorithm.PDAC
        views.append(ViewSpec(tags[k], values[k], values[k + 1], algo))
    return views


def parse_views(text: str) -> list[ViewSpec]:
    """Parse ``"4"`` (a plan size) or ``"min:max[:algo[:tag]],..."``."""
    text = text.strip()
    if text.isdigit():
        return plan_views(int(text))
    views = []
    for i, item in enumerate(x for x in text.split(",") if x.strip()):
        parts = item.strip().split(":")
        if len(parts) < 2:
            raise SegmentationError(f"bad view {item!r}; expected min:max[:algo[:tag]]")
        lo, hi = float(parts[0]), float(parts[1])
        algo = Algorithm(parts[2].lower()) if len(parts) > 2 and parts[2] else Algorithm.PDAC
        tag = parts[3] if len(parts) > 3 else f"v{i + 1}"
        views.append(ViewSpec(tag, lo, hi, algo))
    check_views_disjoint(views)
    return views


def check_views_disjoint(views: Sequence[ViewSpec]) -> None:
    ordered = sorted(views, key=lambda v: v.min_s)
    for a, b in zip(ordered, ordered[1:]):
        if b.min_s < a.max_s - 1e-9:
            raise SegmentationError(f"views {a.tag!r} and {b.tag!r} overlap")
    tags = [v.tag for v in views]
    if len(set(tags)) != len(tags):
        raise SegmentationError("view tags must be unique")


# -- probability files -------------------------------------------------------


def _probs_from_json(rec: dict) -> FrameProbabilities:
    return FrameProbabilities(
        frame_period_s=float(rec["frame_period_s"]),
        values=np.asarray(rec["values"], dtype=np.float64),
        blocks=[Block.from_json(b) for b in rec["blocks"]],
        doc_id=str(rec["doc_id"]),
    )


def probs_to_json(fp: FrameProbabilities) -> dict:
    return {
        "doc_id": fp.doc_id,
        "frame_period_s": fp.frame_period_s,
        "blocks": [b.to_json() for b in fp.blocks],
        "values": [float(v) for v in fp.values],
    }


def _f32_period(x: float) -> float:
    return float(f"{float(np.float32(x)):.7g}")


def probs_to_bytes(fp: FrameProbabilities) -> bytes:
    out = [PROBS_MAGIC, struct.pack("<If", PROBS_VERSION, fp.frame_period_s)]
    out.append(_pack_blocks(fp.blocks))
    out.append(np.asarray(fp.values, dtype="<f4").tobytes())
    return b"".join(out)


def probs_from_bytes(data: bytes, doc_id: str = "") -> FrameProbabilities:
    if data[:4] != PROBS_MAGIC:
        raise CorpusError("not a probability file (bad magic)")
    version, period = struct.unpack_from("<If", data, 4)
    if version != PROBS_VERSION:
        raise CorpusError(f"unsupported probability file version {version}")
    blocks, off = _unpack_blocks(data, 12)
    n = sum(b.frame_count for b in blocks)
    values = np.frombuffer(data, dtype="<f4", count=n, offset=off).astype(np.float64)
    if off + 4 * n != len(data):
        raise CorpusError("probability file has trailing or missing bytes")
    return FrameProbabilities(_f32_period(period), values, blocks, doc_id)


def _pack_blocks(blocks) -> bytes:
    parts = [struct.pack("<I", len(blocks))]
    for b in blocks:
        parts.append(struct.pack("<QQd", b.first_frame, b.frame_count, b.doc_start_s))
    return b"".join(parts)


def _unpack_blocks(data: bytes, off: int):
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    blocks = []
    for _ in range(count):
        first, n, start = struct.unpack_from("<QQd", data, off)
        blocks.append(Block(int(first), int(n), float(start)))
        off += 24
    return blocks, off


def load_probabilities(path) -> dict[str, FrameProbabilities]:
    """Load probabilities from JSONL, a single ``.segp`` file, or a directory of them."""
    path = Path(path)
    if path.is_dir():
        out = {}
        for f in sorted(path.glob("*.segp")):
            out[f.stem] = probs_from_bytes(f.read_bytes(), f.stem)
        return out
    if path.suffix == ".segp":
        return {path.stem: probs_from_bytes(path.read_bytes(), path.stem)}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                fp = _probs_from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad probability record ({exc})") from exc
            out[fp.doc_id] = fp
    return out


def save_probabilities(items: Sequence[FrameProbabilities], path, binary: bool = False) -> None:
    path = Path(path)
    if binary:
        path.mkdir(parents=True, exist_ok=True)
        for fp in items:
            atomic_write_bytes(path / f"{fp.doc_id}.segp", probs_to_bytes(fp))
        return
    text = "".join(json.dumps(probs_to_json(fp)) + "\n" for fp in items)
    atomic_write_bytes(path, text.encode("utf-8"))
