"""Multi-view data augmentation for speech translation corpora."""

from segaug.aligner import EmissionMatrix, assign_words_to_segments, chars_to_words, forced_align
from segaug.corpus import AugmentedExample, Document, ManualSegment, ViewSpec, load_corpus, load_view, save_view
from segaug.kernels import BACKEND
from segaug.metrics import categorize_overlap, corpus_bleu, mwer_resegment, view_stats
from segaug.pipeline import PipelineConfig, run_augment
from segaug.segmenter import FrameProbabilities, pdac, plan_views, pstrm
from segaug.textnorm import clean, post_edit, reverse_clean
from segaug.translate import TranslatorPort, build_mt_pairs, doc_level_bleu, translate_batch

__version__ = "0.1.0"
