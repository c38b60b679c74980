"""Multi-view augmentation: segment, align once per document, assign words,
recover text, translate, and write one view file per length range."""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

from segaug.aligner import (
    AlignmentError,
    EmissionMatrix,
    WordSpan,
    assign_words_to_segments,
    chars_to_words,
    forced_align,
    load_emissions,
)
from segaug.cache import CacheKey, Stage, StageCache, digest, summarize_events
from segaug.corpus import (
    AugmentedExample,
    CorpusError,
    Document,
    ViewSpec,
    atomic_write_text,
    doc_transcript,
    load_corpus,
    load_view,
    save_view,
)
from segaug.metrics import view_stats
from segaug.segmenter import (
    DEFAULT_FLOOR_S,
    FrameProbabilities,
    Segmentation,
    SegmentationError,
    check_views_disjoint,
    load_probabilities,
    parse_views,
    plan_views,
    segment,
)
from segaug.textnorm import CleanUnit, TextNormError, alignment_text, clean, load_lexicon, post_edit, reverse_clean
from segaug.timeline import TimelineError
from segaug.translate import TranslationError, TranslatorPort, translate_batch

log = logging.getLogger(__name__)

STAGE_ERRORS = (AlignmentError, TextNormError, SegmentationError, TranslationError, TimelineError, CorpusError, KeyError)


@dataclass
class PipelineConfig:
    corpus: Optional[str] = None
    probs: Optional[str] = None
    emissions: Optional[str] = None
    views: list[ViewSpec] = field(default_factory=plan_views)
    thr: float = 0.5
    translator: str = "identity"
    cache_dir: Optional[str] = None
    seed: int = 0
    special_token_template: str = "<{lang}_{view}>"
    special_tokens: bool = False
    lang: str = "xx"
    out_dir: str = "out"
    jobs: int = 1
    floor_s: float = DEFAULT_FLOOR_S
    number_lexicon: Optional[str] = None
    fmt: str = "jsonl"
    prepend_special: bool = False

    def __post_init__(self):
        if isinstance(self.views, str):
            self.views = parse_views(self.views)
        if not 0 <= self.thr <= 1:
            raise ValueError(f"thr must be in [0, 1], got {self.thr}")
        check_views_disjoint(self.views)

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        """Read ``key = value`` lines (``#`` comments allowed); ``overrides`` win."""
        known = {f.name: f for f in fields(cls)}
        values: dict = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, value = (x.strip() for x in line.split("=", 1))
                key = key.replace("-", "_")
                if key not in known:
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**_coerce(values))

    def special_token(self, view_tag: str) -> Optional[str]:
        if not self.special_tokens:
            return None
        return self.special_token_template.format(lang=self.lang, view=view_tag)


def _coerce(values: dict) -> dict:
    out = dict(values)
    for key in ("thr", "floor_s"):
        if isinstance(out.get(key), str):
            out[key] = float(out[key])
    for key in ("seed", "jobs"):
        if isinstance(out.get(key), str):
            out[key] = int(out[key])
    for key in ("special_tokens", "prepend_special"):
        if isinstance(out.get(key), str):
            out[key] = out[key].lower() in ("1", "true", "yes", "on")
    return out


@dataclass
class DocResult:
    doc_id: str
    examples: dict[str, list[AugmentedExample]] = field(default_factory=dict)
    cache_events: Counter = field(default_factory=Counter)
    dropped_units: int = 0
    empty_segments: int = 0
    error: Optional[str] = None


def _segmentation_to_cache(seg: Segmentation) -> dict:
    return {"boundaries": seg.boundaries, "frames": seg.frames, "flags": seg.flags}


def _segmentation_from_cache(rec: dict, view: ViewSpec, thr: float) -> Segmentation:
    return Segmentation(
        [tuple(b) for b in rec["boundaries"]],
        [tuple(f) for f in rec["frames"]],
        list(rec["flags"]),
        view.min_s,
        view.max_s,
        thr,
        view.algorithm,
    )


def _timeline_digest(blocks, frame_period_s) -> list:
    return [frame_period_s] + [[b.first_frame, b.frame_count, b.doc_start_s] for b in blocks]


def align_document(doc: Document, emissions: EmissionMatrix, cache: StageCache, lexicon=None):
    """Clean the transcript and force-align it; cached per document."""
    units = clean(doc_transcript(doc), vocab=emissions.vocab, lexicon=lexicon)
    text = alignment_text(units)
    key = CacheKey(
        doc.id,
        Stage.ALIGN,
        digest(
            logprobs=emissions.logprobs,
            vocab=emissions.vocab,
            blank=emissions.blank,
            timeline=_timeline_digest(emissions.blocks, emissions.frame_period_s),
            text=text,
        ),
    )
    hit = cache.get(key)
    if hit is not None:
        return units, [WordSpan.from_json(w) for w in hit["words"]]
    alignment = forced_align(emissions, text)
    words = chars_to_words(alignment.spans, units, emissions.timeline)
    cache.put(key, {"score": alignment.score, "words": [w.to_json() for w in words]})
    return units, words


def segment_document(doc_id: str, probs: FrameProbabilities, view: ViewSpec, thr: float, floor_s: float, cache: StageCache):
    key = CacheKey(
        doc_id,
        Stage.SEGMENT,
        digest(
            values=probs.values,
            timeline=_timeline_digest(probs.blocks, probs.frame_period_s),
            view=[view.min_s, view.max_s, view.algorithm.value],
            thr=thr,
            floor_s=floor_s,
        ),
    )
    hit = cache.get(key)
    if hit is not None:
        return _segmentation_from_cache(hit, view, thr)
    seg = segment(probs, view, thr, floor_s=floor_s)
    cache.put(key, _segmentation_to_cache(seg))
    return seg


def segment_texts(units: Sequence[CleanUnit], groups: Sequence[Sequence[int]]) -> list[Optional[str]]:
    """Recovered, post-edited source text per segment (``None`` when empty)."""
    out = []
    for g in groups:
        if not g:
            out.append(None)
            continue
        prev = units[g[0] - 1].render() if g[0] > 0 else None
        out.append(post_edit(reverse_clean(units[i] for i in g), prev))
    return out


def process_document(
    doc: Document,
    probs: Optional[FrameProbabilities],
    emissions: Optional[EmissionMatrix],
    cfg: PipelineConfig,
) -> DocResult:
    result = DocResult(doc.id)
    cache = StageCache(cfg.cache_dir)
    try:
        if probs is None:
            raise KeyError(f"no probabilities for document {doc.id!r}")
        if emissions is None:
            raise KeyError(f"no emissions for document {doc.id!r}")
        lexicon = load_lexicon(cfg.number_lexicon) if cfg.number_lexicon else None
        port = TranslatorPort.parse(cfg.translator)
        units, words = align_document(doc, emissions, cache, lexicon)
        for view in cfg.views:
            seg = segment_document(doc.id, probs, view, cfg.thr, cfg.floor_s, cache)
            assignment = assign_words_to_segments(words, units, seg)
            result.dropped_units += len(assignment.dropped)
            texts = segment_texts(units, assignment.groups)
            kept = [(b, flag, t) for b, flag, t in zip(seg.boundaries, seg.flags, texts) if t is not None]
            result.empty_segments += len(texts) - len(kept)
            sources = [t for _, _, t in kept]
            targets = _translate_cached(doc.id, port, sources, cache) if sources else []
            result.examples[view.tag] = [
                AugmentedExample(
                    doc.id,
                    view.tag,
                    round(s, 3),
                    round(e, 3),
                    src,
                    tgt,
                    cfg.special_token(view.tag),
                    overflow=flag is not None,
                )
                for ((s, e), flag, src), tgt in zip(kept, targets)
            ]
    except STAGE_ERRORS as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        result.examples = {}
        log.error("document %s aborted: %s", doc.id, result.error)
    result.cache_events = cache.events
    return result


def _translate_cached(doc_id: str, port: TranslatorPort, sources: list[str], cache: StageCache) -> list[str]:
    key = CacheKey(doc_id, Stage.TRANSLATE, digest(translator=port.describe(), sources=sources))
    hit = cache.get(key)
    if hit is not None and len(hit) == len(sources):
        return list(hit)
    out = translate_batch(port, sources)
    cache.put(key, out)
    return out


def _process_args(args):
    return process_document(*args)


def run_augment(cfg: PipelineConfig) -> dict:
    """Run the full pipeline and write view files plus JSON reports into ``cfg.out_dir``."""
    docs = load_corpus(cfg.corpus)
    probs = load_probabilities(cfg.probs)
    emissions = load_emissions(cfg.emissions)
    tasks = [(d, probs.get(d.id), emissions.get(d.id), cfg) for d in docs]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_process_args, tasks))
    else:
        results = [_process_args(t) for t in tasks]

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_examples = []
    view_files = {}
    for view in cfg.views:
        examples = [ex for r in results for ex in r.examples.get(view.tag, [])]
        all_examples.extend(examples)
        path = out / f"{view.tag}.{cfg.fmt}"
        save_view(examples, path, fmt=cfg.fmt, prepend_special=cfg.prepend_special)
        view_files[view.tag] = str(path)

    events: Counter = Counter()
    for r in results:
        events.update(r.cache_events)
    stats = view_stats(all_examples, cfg.views)
    atomic_write_text(out / "stats.json", json.dumps(stats, indent=2) + "\n")
    atomic_write_text(out / "stats.txt", format_stats_table(stats))
    summary = {
        "documents": len(results),
        "succeeded": sum(r.error is None for r in results),
        "failed": {r.doc_id: r.error for r in results if r.error},
        "dropped_units": sum(r.dropped_units for r in results),
        "empty_segments": sum(r.empty_segments for r in results),
        "cache": summarize_events(events),
        "views": view_files,
        "stats": stats,
    }
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    return summary


def format_stats_table(stats: dict) -> str:
    lines = [f"{'view':<8} {'count':>8} {'mean_s':>8}"]
    for tag, row in stats.items():
        mean = "-" if row["mean_duration_s"] is None else f"{row['mean_duration_s']:.2f}"
        lines.append(f"{tag:<8} {row['count']:>8} {mean:>8}")
    return "\n".join(lines) + "\n"


def emit_stats(out_dir) -> dict:
    """Per-view counts and mean durations for every ``*.jsonl`` view file in ``out_dir``."""
    out = Path(out_dir)
    examples = []
    tags = []
    for path in sorted(out.glob("*.jsonl")):
        exs = load_view(path)
        examples.extend(exs)
        tags.append(path.stem)
    stats = view_stats(examples)
    for tag in tags:
        stats.setdefault(tag, {"count": 0, "mean_duration_s": None})
    return {"views": stats, "table": format_stats_table(stats)}
