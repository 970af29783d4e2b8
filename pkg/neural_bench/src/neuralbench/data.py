"""File-format readers/writers and example assembly.

This package talks to the alignment toolkit exclusively through its file
formats: chapter/gold JSON-lines, alignment and score-matrix text files, and
the Cloze/summary task files. The readers here are an independent
implementation of those documented formats.

Context paragraphs fed to the models are anonymized with the per-question
entity map shipped in the Cloze files, so candidate tokens can be matched in
the text without revealing entity identity across questions.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
MASK = "mask"  # the task files' "[MASK]" after tokenization


def tokens(text: str) -> list[str]:
    """Lowercase whitespace tokens with punctuation stripped off the edges
    ("[MASK]" becomes "mask", "@entity3," becomes "entity3")."""
    out = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and unicodedata.category(raw[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(raw[end - 1]).startswith("P"):
            end -= 1
        if end > start:
            out.append(raw[start:end])
    return out


def _token_key(token: str) -> str:
    stripped = tokens(token)
    return stripped[0] if stripped else ""


def anonymize(text: str, mapping: dict[str, str]) -> list[str]:
    """Tokenize text with entity surfaces replaced by their anonymized
    tokens; longer surfaces win over shorter ones."""
    raw = tokens(text)
    surfaces = sorted(
        ((tokens(surface), _token_key(replacement)) for surface, replacement in mapping.items()),
        key=lambda item: -len(item[0]),
    )
    out: list[str] = []
    pos = 0
    while pos < len(raw):
        hit = None
        for surface, replacement in surfaces:
            width = len(surface)
            if width and raw[pos : pos + width] == surface:
                hit = (width, replacement)
                break
        if hit:
            out.append(hit[1])
            pos += hit[0]
        else:
            out.append(raw[pos])
            pos += 1
    return out


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


@dataclass
class Chapter:
    key: str
    summary: list[str]
    story: list[str]
    story_ids: list[str]


def read_chapter(path: Path | str) -> Chapter:
    path = Path(path)
    summary: list[str] = []
    story: list[str] = []
    header = None
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            if header is None:
                header = record
                continue
            (summary if record["side"] == "s" else story).append(record["text"])
    if header is None:
        raise ValueError(f"{path}: empty chapter file")
    key = f"{header['work_id']}/{header['chapter_id']}"
    story_ids = [f"{key}/d/{j}" for j in range(len(story))]
    return Chapter(key, summary, story, story_ids)


def read_chapters(corpus_dir: Path | str) -> list[Chapter]:
    return [read_chapter(p) for p in sorted(Path(corpus_dir).glob("*/*.chapter"))]


def read_gold_links(path: Path | str) -> set[tuple[int, int]]:
    links: set[tuple[int, int]] = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                links.update((record["s"], j) for j in record["d"])
    return links


def read_alignment(path: Path | str) -> tuple[str, str, float, set[tuple[int, int]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    chapter_id, method, total = lines[0].split()
    links = {(int(i), int(j)) for i, j in (line.split() for line in lines[1:] if line.strip())}
    return chapter_id, method, float(total), links


def write_score_matrix(path: Path | str, chapter_id: str, values: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, m = values.shape
    lines = [f"{chapter_id} {n} {m}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in values)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_score_matrix(path: Path | str) -> tuple[str, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    chapter_id, n, m = lines[0].split()
    values = np.array([[float(v) for v in line.split()] for line in lines[1 : int(n) + 1]])
    if values.shape != (int(n), int(m)):
        raise ValueError(f"{path}: matrix shape mismatch")
    return chapter_id, values


def read_cloze_records(path: Path | str) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def read_summ_records(path: Path | str) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def write_predictions(rows: list[tuple[str, int]], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps({"item_id": item_id, "chosen_index": chosen}, sort_keys=True)
        for item_id, chosen in rows
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Examples
# ---------------------------------------------------------------------------


@dataclass
class ClozeExample:
    item_id: str
    question: list[str]
    mask_position: int
    candidates: list[str]
    answer_index: int
    context: list[list[str]]  # anonymized tokens per context paragraph
    is_entity_question: bool


@dataclass
class SummExample:
    item_id: str
    seed: list[str]
    candidates: list[list[str]]
    answer_index: int
    context: list[list[str]]


def _context_texts(chapter: Chapter, context_ids: list[str], use_all: bool,
                   fallback_all: bool = True, item_id: str = "") -> list[str]:
    if use_all:
        return list(chapter.story)
    if not context_ids:
        if not fallback_all:
            raise ValueError(f"{item_id}: empty alignment row and fallback disabled")
        logger.warning("%s: empty alignment row, attending over the whole story", item_id)
        return list(chapter.story)
    wanted = set(context_ids)
    return [text for pid, text in zip(chapter.story_ids, chapter.story) if pid in wanted]


def build_cloze_example(record: dict, chapter: Chapter, use_all_context: bool = False,
                        fallback_all: bool = True) -> ClozeExample:
    mapping = record["anonymization"]
    question = tokens(record["question"])
    if MASK not in question:
        raise ValueError(f"{record['id']}: no mask token in question")
    context = [
        anonymize(text, mapping)
        for text in _context_texts(chapter, record["context_ids"], use_all_context,
                                   fallback_all, record["id"])
    ]
    return ClozeExample(
        item_id=record["id"],
        question=question,
        mask_position=question.index(MASK),
        candidates=[_token_key(c) for c in record["candidates"]],
        answer_index=record["answer_index"],
        context=[c for c in context if c] or [[UNK]],
        is_entity_question=record["is_entity_question"],
    )


def build_summ_example(record: dict, chapter: Chapter, use_all_context: bool = False) -> SummExample:
    context = [
        tokens(text)
        for text in _context_texts(chapter, record["context_ids"], use_all_context,
                                   item_id=record["id"])
    ]
    return SummExample(
        item_id=record["id"],
        seed=tokens(" ".join(record["seed"])),
        candidates=[tokens(c) for c in record["candidates"]],
        answer_index=record["answer_index"],
        context=[c for c in context if c] or [[UNK]],
    )


@dataclass
class Vocabulary:
    index: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.index)

    def id(self, token: str) -> int:
        return self.index.get(token, self.index[UNK])

    def ids(self, toks: list[str]) -> list[int]:
        return [self.id(t) for t in toks]

    @classmethod
    def build(cls, texts: list[list[str]], always_keep: list[str] = (), min_count: int = 2):
        counts: dict[str, int] = {}
        for text in texts:
            for tok in text:
                counts[tok] = counts.get(tok, 0) + 1
        vocab = cls()
        for special in (PAD, UNK, BOS, EOS, MASK):
            vocab.index[special] = len(vocab.index)
        for tok in always_keep:
            vocab.index.setdefault(tok, len(vocab.index))
        for tok in sorted(counts):
            if counts[tok] >= min_count:
                vocab.index.setdefault(tok, len(vocab.index))
        return vocab


def cloze_vocabulary(examples: list[ClozeExample], min_count: int = 2) -> Vocabulary:
    texts = [ex.question for ex in examples]
    for ex in examples:
        texts.extend(ex.context)
    keep = [c for ex in examples for c in ex.candidates]
    return Vocabulary.build(texts, always_keep=keep, min_count=min_count)


def summ_vocabulary(examples: list[SummExample], min_count: int = 2) -> Vocabulary:
    texts = [ex.seed for ex in examples]
    for ex in examples:
        texts.extend(ex.candidates)
        texts.extend(ex.context)
    keep = [t for ex in examples for c in ex.candidates for t in c]
    return Vocabulary.build(texts, always_keep=keep, min_count=min_count)
