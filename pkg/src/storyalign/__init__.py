"""Chronology-constrained alignment of chapter summaries to story text."""

from .aligner import (
    Alignment,
    align_argmax,
    align_diagonal_n,
    align_dp,
    align_random_n,
    has_inversion,
    is_story_partition,
)
from .corpus import (
    ChapterPair,
    GoldAlignment,
    Paragraph,
    build_chapter,
    chapter_from_texts,
    load_chapter,
    load_corpus,
    load_gold,
    segment_story,
    segment_summary,
)
from .metrics import AlignEvalReport, PairCounts, aggregate, eval_alignment, eval_task_accuracy
from .scoring import (
    EmbeddingTable,
    ScoreMatrix,
    bleu_score,
    score_bleu,
    score_embed,
    score_random,
    score_tfidf,
    tokenize,
)
from .tasks import (
    ClozeQuestion,
    EntitySpan,
    SummChoiceItem,
    build_cloze,
    build_summ,
    cloze_heuristic_solve,
)

__version__ = "0.1.0"
