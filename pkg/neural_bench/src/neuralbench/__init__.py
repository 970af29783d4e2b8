"""Neural benchmark models for the aligned summary/story tasks."""

from .attention import AttentiveReader, margin_loss
from .cccp import CccpRunner, alignment_objective, perturb_partition
from .config import ModelConfig
from .data import (
    Chapter,
    ClozeExample,
    SummExample,
    Vocabulary,
    build_cloze_example,
    build_summ_example,
    cloze_vocabulary,
    read_chapter,
    read_chapters,
    summ_vocabulary,
    tokens,
)
from .reader import ClozeReader, reader_accuracy, train_reader
from .summarizer import SummaryDecoder, summarizer_accuracy, train_summarizer

__version__ = "0.1.0"
