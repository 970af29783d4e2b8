"""Pairwise paragraph similarity scorers and the score-matrix file format.

Every scorer maps a chapter to an N x M matrix of finite reals, one row per
summary paragraph and one column per story paragraph. The matrix file is the
exchange currency with external tooling: other processes may write matrices
in the same format and feed them back through the aligner.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ChapterPair
from .seeding import derive_rng


def _is_punct(char: str) -> bool:
    return unicodedata.category(char).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation off token edges.

    Interior punctuation (don't, self-made) survives; tokens that were pure
    punctuation disappear.
    """
    out = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if end > start:
            out.append(raw[start:end])
    return out


@dataclass
class ScoreMatrix:
    chapter_id: str
    values: np.ndarray  # (n_summary, n_story) float64

    @property
    def n_summary(self) -> int:
        return self.values.shape[0]

    @property
    def n_story(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"score matrix for {self.chapter_id} is not 2-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"score matrix for {self.chapter_id} has non-finite entries")

    def validate_against(self, chapter: ChapterPair) -> None:
        self.validate()
        if self.chapter_id != chapter.key:
            raise ValueError(f"scores are for {self.chapter_id}, chapter is {chapter.key}")
        if self.values.shape != (chapter.n_summary, chapter.n_story):
            raise ValueError(
                f"score matrix shape {self.values.shape} does not match chapter "
                f"{chapter.key} ({chapter.n_summary} x {chapter.n_story})"
            )


@dataclass
class EmbeddingTable:
    vectors: dict[str, np.ndarray]
    dim: int

    def vector(self, paragraph_id: str) -> np.ndarray:
        try:
            return self.vectors[paragraph_id]
        except KeyError:
            raise ValueError(f"no embedding for paragraph id {paragraph_id}") from None


def _cosine_rows(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Row-by-row cosine similarity matrix; zero-norm rows score 0."""
    left_norm = np.linalg.norm(left, axis=1)
    right_norm = np.linalg.norm(right, axis=1)
    dots = left @ right.T
    scale = np.outer(left_norm, right_norm)
    return np.divide(dots, scale, out=np.zeros_like(dots), where=scale > 0)


def tfidf_vectors(docs: list[list[str]]) -> np.ndarray:
    """tf-idf weight matrix for a document universe.

    tf is the raw count inside the document; idf(w) = ln((1 + P) / (1 + df(w))) + 1
    with P the number of documents and df counted over them.
    """
    vocab: dict[str, int] = {}
    for doc in docs:
        for tok in doc:
            vocab.setdefault(tok, len(vocab))
    n_docs = len(docs)
    df = np.zeros(len(vocab))
    counts = np.zeros((n_docs, len(vocab)))
    for row, doc in enumerate(docs):
        for tok, count in Counter(doc).items():
            col = vocab[tok]
            counts[row, col] = count
            df[col] += 1
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    return counts * idf


def score_tfidf(chapter: ChapterPair) -> ScoreMatrix:
    """Cosine similarity of tf-idf vectors, with the idf universe being all
    paragraphs (both sides) of the chapter."""
    docs = [tokenize(p.text) for p in chapter.summary] + [tokenize(p.text) for p in chapter.story]
    weighted = tfidf_vectors(docs)
    n = chapter.n_summary
    matrix = _cosine_rows(weighted[:n], weighted[n:])
    return ScoreMatrix(chapter.key, matrix)


def tfidf_cosine(query: list[str], docs: list[list[str]]) -> np.ndarray:
    """Cosine of one tokenized query against each tokenized document, idf
    computed over the query plus the documents."""
    weighted = tfidf_vectors([query] + docs)
    return _cosine_rows(weighted[:1], weighted[1:])[0]


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[k : k + n]) for k in range(len(tokens) - n + 1))


def bleu_score(
    hypothesis: list[str],
    reference: list[str],
    max_n: int = 4,
    smoothing: bool = True,
) -> float:
    """BLEU with uniform n-gram weights and zero-numerator add-1 smoothing.

    Modified n-gram precision up to max_n; with smoothing on (the default),
    any precision with a zero numerator gets 1 added to numerator and
    denominator for n >= 2. The unigram precision is never smoothed, so zero
    unigram overlap scores 0. Brevity penalty applies when the hypothesis is
    no longer than the reference.
    """
    if not hypothesis or not reference:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        hyp_counts = _ngram_counts(hypothesis, n)
        ref_counts = _ngram_counts(reference, n)
        matched = sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items())
        total = max(len(hypothesis) - n + 1, 0)
        if matched == 0:
            if n == 1 or not smoothing:
                return 0.0
            matched, total = matched + 1, total + 1
        log_sum += math.log(matched / total) / max_n
    if len(hypothesis) <= len(reference):
        brevity = math.exp(1.0 - len(reference) / len(hypothesis))
    else:
        brevity = 1.0
    return brevity * math.exp(log_sum)


def score_bleu(
    chapter: ChapterPair,
    max_n: int = 4,
    reverse: bool = False,
    smoothing: bool = True,
) -> ScoreMatrix:
    """BLEU of each summary paragraph (hypothesis) against each story
    paragraph (reference); ``reverse`` swaps the roles."""
    if max_n not in (1, 4):
        raise ValueError(f"max_n must be 1 or 4, got {max_n}")
    summary = [tokenize(p.text) for p in chapter.summary]
    story = [tokenize(p.text) for p in chapter.story]
    matrix = np.zeros((chapter.n_summary, chapter.n_story))
    for i, summ in enumerate(summary):
        for j, stor in enumerate(story):
            hyp, ref = (stor, summ) if reverse else (summ, stor)
            matrix[i, j] = bleu_score(hyp, ref, max_n=max_n, smoothing=smoothing)
    return ScoreMatrix(chapter.key, matrix)


def score_embed(chapter: ChapterPair, table: EmbeddingTable) -> ScoreMatrix:
    """Cosine similarity between externally supplied paragraph vectors."""
    summary = np.stack([table.vector(p.id) for p in chapter.summary])
    story = np.stack([table.vector(p.id) for p in chapter.story])
    return ScoreMatrix(chapter.key, _cosine_rows(summary, story))


def score_random(chapter: ChapterPair, seed: int) -> ScoreMatrix:
    """Seeded i.i.d. uniform [0, 1) scores; the stream is derived from the
    chapter key so every chapter gets distinct values under one seed."""
    rng = derive_rng(seed, chapter.key, "score-random")
    return ScoreMatrix(chapter.key, rng.random((chapter.n_summary, chapter.n_story)))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def save_score_matrix(matrix: ScoreMatrix, path: Path | str) -> None:
    matrix.validate()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{matrix.chapter_id} {matrix.n_summary} {matrix.n_story}"]
    for row in matrix.values:
        lines.append(" ".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_score_matrix(path: Path | str) -> ScoreMatrix:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty score matrix file")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"{path}:1: header must be 'chapter_id N M'")
    chapter_id, n, m = header[0], int(header[1]), int(header[2])
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: expected {n} score rows, found {len(lines) - 1}")
    values = np.empty((n, m))
    for row, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != m:
            raise ValueError(f"{path}:{row + 2}: expected {m} values, found {len(parts)}")
        values[row] = [float(p) for p in parts]
    matrix = ScoreMatrix(chapter_id, values)
    matrix.validate()
    return matrix


def save_embeddings(table: EmbeddingTable, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for pid in sorted(table.vectors):
        vec = table.vectors[pid]
        lines.append(pid + " " + " ".join(repr(float(v)) for v in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings(path: Path | str) -> EmbeddingTable:
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'id v1 v2 ...'")
            vec = np.array([float(p) for p in parts[1:]])
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValueError(f"{path}:{lineno}: dimension {vec.shape[0]} != {dim}")
            vectors[parts[0]] = vec
    if dim is None:
        raise ValueError(f"{path}: empty embedding file")
    return EmbeddingTable(vectors, dim)
