"""``segaug`` command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

from segaug.aligner import AlignmentError, assign_words_to_segments, load_emissions
from segaug.cache import StageCache
from segaug.corpus import CorpusError, ViewSpec, atomic_write_text, load_corpus, load_view, save_view
from segaug.metrics import OverlapReport, categorize_overlap, corpus_bleu, duration_buckets, mwer_resegment, position_histogram
from segaug.pipeline import PipelineConfig, align_document, emit_stats, run_augment
from segaug.segmenter import DEFAULT_BOUNDS, DEFAULT_TAGS, Algorithm, SegmentationError, load_probabilities, parse_views, pdac, plan_views, pstrm
from segaug.textnorm import TextNormError, load_lexicon
from segaug.timeline import TimelineError
from segaug.translate import DEFAULT_DOC_SUBSET, TranslationError, TranslatorPort, build_mt_pairs, doc_level_bleu, paraphrase_view, translate_batch

log = logging.getLogger("segaug")

EXIT_USAGE, EXIT_DATA, EXIT_STAGE = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(report, out=None) -> None:
    text = json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _parse_range(text: str, algo: str = "pdac", tag=None) -> ViewSpec:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"expected MIN,MAX, got {text!r}") from None
    if tag is None:
        tag = "v"
        for t, a, b in zip(DEFAULT_TAGS, DEFAULT_BOUNDS, DEFAULT_BOUNDS[1:]):
            if (a, b) == (lo, hi):
                tag = t
    try:
        return ViewSpec(tag, lo, hi, Algorithm(algo))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(args, **extra) -> PipelineConfig:
    overrides = {
        "seed": getattr(args, "seed", None),
        "jobs": getattr(args, "jobs", None),
        "cache_dir": getattr(args, "cache_dir", None),
        **extra,
    }
    if getattr(args, "config", None):
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})


# -- commands ----------------------------------------------------------------


def cmd_augment(args) -> int:
    cfg = _config(
        args,
        corpus=args.corpus,
        probs=args.probs,
        emissions=args.emissions,
        views=args.views,
        thr=args.thr,
        translator=args.translator,
        out_dir=args.out,
        special_tokens=True if args.special_tokens else None,
        lang=args.lang,
        prepend_special=True if args.prepend_special else None,
        fmt=args.format,
        number_lexicon=args.number_lexicon,
    )
    for name in ("corpus", "probs", "emissions"):
        if not getattr(cfg, name):
            raise UsageError(f"augment needs --{name} (or a config entry)")
    summary = run_augment(cfg)
    _emit(summary)
    return EXIT_STAGE if summary["failed"] else 0


def cmd_segment(args) -> int:
    probs = load_probabilities(args.probs)
    if args.view:
        views = [_parse_range(args.view, args.algo, args.tag)]
    else:
        views = parse_views(args.views)
    lines = []
    for doc_id, fp in probs.items():
        for view in views:
            fn = pstrm if view.algorithm is Algorithm.PSTRM else pdac
            seg = fn(fp, view.min_s, view.max_s, args.thr, floor_s=args.floor, literal_threshold=args.literal_threshold)
            lines.append(json.dumps(seg.to_json(doc_id, view.tag)))
    text = "".join(line + "\n" for line in lines)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_align(args) -> int:
    docs = load_corpus(args.corpus)
    emissions = load_emissions(args.emissions)
    lexicon = load_lexicon(args.number_lexicon) if args.number_lexicon else None
    cache = StageCache(args.cache_dir)
    lines, failed = [], {}
    for doc in docs:
        try:
            if doc.id not in emissions:
                raise KeyError(f"no emissions for {doc.id!r}")
            units, words = align_document(doc, emissions[doc.id], cache, lexicon)
        except (AlignmentError, TextNormError, TimelineError, KeyError) as exc:
            failed[doc.id] = str(exc)
            log.error("document %s: %s", doc.id, exc)
            continue
        rec = {"doc_id": doc.id, "units": [u.to_json() for u in units], "words": [w.to_json() for w in words]}
        lines.append(json.dumps(rec, ensure_ascii=False))
    atomic_write_text(args.out, "".join(line + "\n" for line in lines))
    _emit({"aligned": len(lines), "failed": failed})
    return EXIT_STAGE if failed else 0


def cmd_translate(args) -> int:
    port = TranslatorPort.parse(args.translator, batch_size=args.batch_size, timeout_s=args.timeout)
    sentences = Path(args.input).read_text(encoding="utf-8").splitlines()
    out = translate_batch(port, sentences)
    atomic_write_text(args.output, "".join(s + "\n" for s in out))
    _emit({"sentences": len(out)})
    return 0


def _read_lines(path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _ref_segments(path, side: str) -> dict[str, list[str]]:
    """Reference segments per document from a corpus manifest or a view file."""
    first = next((line for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()), "")
    by_doc: dict[str, list[str]] = defaultdict(list)
    if first and "segments" in json.loads(first):
        for doc in load_corpus(path):
            by_doc[doc.id] = [s.tgt_text if side == "tgt" else s.src_text for s in doc.manual_segments]
    else:
        for ex in load_view(path):
            by_doc[ex.doc_id].append((ex.tgt_text or "") if side == "tgt" else ex.src_text)
    return dict(by_doc)


def _hyp_by_doc(path, side: str, ref_docs) -> dict[str, str]:
    if str(path).endswith(".jsonl"):
        out: dict[str, list[str]] = defaultdict(list)
        for ex in load_view(path):
            out[ex.doc_id].append((ex.tgt_text or "") if side == "tgt" else ex.src_text)
        return {k: " ".join(v) for k, v in out.items()}
    if len(ref_docs) != 1:
        raise UsageError("a plain-text hypothesis needs a single-document reference")
    return {next(iter(ref_docs)): " ".join(_read_lines(path))}


def cmd_eval(args) -> int:
    if args.eval_cmd == "bleu":
        res = corpus_bleu(_read_lines(args.hyp), _read_lines(args.ref), smoothing=args.smoothing, k=args.k)
        _emit(res.to_json())
    elif args.eval_cmd == "docbleu":
        docs = load_corpus(args.corpus)
        hyps: dict[str, list[str]] = defaultdict(list)
        for ex in load_view(args.hyp):
            hyps[ex.doc_id].append(ex.tgt_text or "")
        res = doc_level_bleu(hyps, {d.id: d.translation() for d in docs}, subset=args.subset, seed=args.seed or 0)
        _emit({"documents": len(hyps), **res.to_json()})
    elif args.eval_cmd == "resegment":
        refs = _ref_segments(args.ref, args.side)
        hyps = _hyp_by_doc(args.hyp, args.side, refs)
        report, all_h, all_r, lines = {}, [], [], []
        for doc_id, ref_segs in refs.items():
            hyp_words = hyps.get(doc_id, "").split()
            res = mwer_resegment(hyp_words, [r.split() for r in ref_segs], case_insensitive=args.case_insensitive)
            pieces = [" ".join(p) for p in res.pieces(hyp_words)]
            report[doc_id] = {"cuts": res.cuts, "cost": res.cost}
            all_h.extend(pieces)
            all_r.extend(ref_segs)
            lines.extend(json.dumps({"doc_id": doc_id, "index": i, "text": t}, ensure_ascii=False) for i, t in enumerate(pieces))
        if args.out:
            atomic_write_text(args.out, "".join(line + "\n" for line in lines))
        _emit({"docs": report, "bleu": corpus_bleu(all_h, all_r).to_json()})
    return 0


def cmd_analyze(args) -> int:
    examples = load_view(args.view)
    if args.analyze_cmd == "overlap":
        manual = {d.id: [(s.start_s, s.end_s) for s in d.manual_segments] for d in load_corpus(args.corpus)}
        per_view: dict[str, OverlapReport] = defaultdict(OverlapReport)
        overall = OverlapReport()
        for ex in examples:
            cat, gap = categorize_overlap((ex.start_s, ex.end_s), manual.get(ex.doc_id, []), args.eps)
            per_view[ex.view_tag].add(cat, gap)
            overall.add(cat, gap)
        _emit({"eps_s": args.eps, "views": {k: v.to_json() for k, v in per_view.items()}, "all": overall.to_json()})
    elif args.analyze_cmd == "positions":
        report = {"view": {str(k): v for k, v in position_histogram(examples, args.token).items()}}
        if args.corpus:
            segs = [s for d in load_corpus(args.corpus) for s in d.manual_segments]
            report["original"] = {str(k): v for k, v in position_histogram(segs, args.token).items()}
        _emit({"token": args.token, **report})
    elif args.analyze_cmd == "buckets":
        buckets = duration_buckets(examples, parse_views(args.views))
        _emit({tag: len(items) for tag, items in buckets.items()})
    return 0


def cmd_mtpairs(args) -> int:
    docs = load_corpus(args.corpus)
    view = _parse_range(args.view)
    pairs = [p for d in docs if d.manual_segments for p in build_mt_pairs(d, view, seed=args.seed or 0)]
    atomic_write_text(args.out, "".join(json.dumps(p.to_json(), ensure_ascii=False) + "\n" for p in pairs))
    _emit({"pairs": len(pairs), "documents": len(docs)})
    return 0


def cmd_paraphrase(args) -> int:
    docs = load_corpus(args.corpus)
    port = TranslatorPort.parse(args.translator)
    examples = paraphrase_view(docs, port, view_tag=args.tag)
    save_view(examples, args.out)
    _emit({"examples": len(examples)})
    return 0


def cmd_stats(args) -> int:
    report = emit_stats(args.dir)
    _emit(report["views"])
    if args.table:
        sys.stderr.write(report["table"])
    return 0


def cmd_synth(args) -> int:
    from segaug.synthetic import make_corpus, write_corpus

    docs = make_corpus(args.docs, seed=args.seed or 0)
    paths = write_corpus(docs, args.out, binary=not args.json)
    _emit({k: str(v) for k, v in paths.items()})
    return 0


# -- parser ------------------------------------------------------------------


def _global_flags(parser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="key=value config file")
    parser.add_argument("--jobs", type=int, default=d if suppress else 1, help="parallel document workers")
    parser.add_argument("--seed", type=int, default=d, help="random seed")
    parser.add_argument("--cache-dir", default=d, help="stage cache directory")
    parser.add_argument("--log-level", default=d if suppress else "WARNING")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="segaug", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", parents=[common], help="build all views")
    p.add_argument("--corpus")
    p.add_argument("--probs")
    p.add_argument("--emissions")
    p.add_argument("--views", help="plan size (e.g. 4) or min:max[:algo[:tag]],...")
    p.add_argument("--thr", type=float)
    p.add_argument("--translator", help="identity | lexicon:<path> | external:<command>")
    p.add_argument("--out")
    p.add_argument("--special-tokens", action="store_true")
    p.add_argument("--prepend-special", action="store_true")
    p.add_argument("--lang")
    p.add_argument("--format", choices=["jsonl", "tsv"])
    p.add_argument("--number-lexicon")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("segment", parents=[common], help="segment probability files")
    p.add_argument("--probs", required=True)
    p.add_argument("--view", help="MIN,MAX")
    p.add_argument("--views", default="4")
    p.add_argument("--tag")
    p.add_argument("--algo", choices=[a.value for a in Algorithm], default="pdac")
    p.add_argument("--thr", type=float, default=0.5)
    p.add_argument("--floor", type=float, default=0.2)
    p.add_argument("--literal-threshold", action="store_true", help="split candidates are p > thr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("align", parents=[common], help="force-align transcripts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--emissions", required=True)
    p.add_argument("--number-lexicon")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("translate", parents=[common], help="translate a text file line by line")
    p.add_argument("--translator", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--timeout", type=float, default=600.0)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("eval", parents=[common], help="BLEU and resegmentation")
    esub = p.add_subparsers(dest="eval_cmd", required=True, parser_class=_Parser)
    e = esub.add_parser("bleu", parents=[common])
    e.add_argument("--hyp", required=True)
    e.add_argument("--ref", required=True)
    e.add_argument("--smoothing", choices=["none", "add-k"], default="none")
    e.add_argument("--k", type=float, default=1.0)
    e = esub.add_parser("docbleu", parents=[common])
    e.add_argument("--hyp", required=True, help="view JSONL with tgt_text")
    e.add_argument("--corpus", required=True)
    e.add_argument("--subset", type=int, default=DEFAULT_DOC_SUBSET)
    e = esub.add_parser("resegment", parents=[common])
    e.add_argument("--hyp", required=True, help="plain text (one document) or view JSONL")
    e.add_argument("--ref", required=True, help="corpus manifest or view JSONL")
    e.add_argument("--side", choices=["src", "tgt"], default="tgt")
    e.add_argument("--case-insensitive", action="store_true")
    e.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", parents=[common], help="view analyses")
    asub = p.add_subparsers(dest="analyze_cmd", required=True, parser_class=_Parser)
    a = asub.add_parser("overlap", parents=[common])
    a.add_argument("--view", required=True)
    a.add_argument("--corpus", required=True)
    a.add_argument("--eps", type=float, default=0.2)
    a = asub.add_parser("positions", parents=[common])
    a.add_argument("--view", required=True)
    a.add_argument("--token", required=True)
    a.add_argument("--corpus")
    a = asub.add_parser("buckets", parents=[common])
    a.add_argument("--view", required=True)
    a.add_argument("--views", default="4")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("mtpairs", parents=[common], help="concatenated MT training pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--view", required=True, help="MIN,MAX")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mtpairs)

    p = sub.add_parser("paraphrase", parents=[common], help="re-translate original sources")
    p.add_argument("--corpus", required=True)
    p.add_argument("--translator", required=True)
    p.add_argument("--tag", default="para")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_paraphrase)

    p = sub.add_parser("stats", parents=[common], help="per-view counts and mean durations")
    p.add_argument("--dir", required=True)
    p.add_argument("--table", action="store_true", help="also print an aligned table to stderr")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=5)
    p.add_argument("--json", action="store_true", help="JSONL probabilities/emissions instead of binary")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"segaug: error: {exc}\n")
        return EXIT_USAGE
    except (CorpusError, SegmentationError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        if isinstance(exc, (AlignmentError, TextNormError, TimelineError)):
            sys.stderr.write(f"segaug: stage failure: {exc}\n")
            return EXIT_STAGE
        sys.stderr.write(f"segaug: data error: {exc}\n")
        return EXIT_DATA
    except (AlignmentError, TranslationError, KeyError) as exc:
        sys.stderr.write(f"segaug: stage failure: {exc}\n")
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
