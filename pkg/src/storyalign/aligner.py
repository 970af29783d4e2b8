"""Alignment strategies between summary and story paragraphs.

Four families: random consecutive windows, diagonal windows, per-row argmax
of a score matrix, and the order-constrained dynamic program that maximizes
the total pair score over monotone segmentations (each story paragraph
assigned to exactly one summary paragraph, assignments contiguous per row
and non-decreasing across rows, empty rows allowed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ChapterPair
from .scoring import ScoreMatrix
from .seeding import derive_rng

# Backtrace transitions, in tie-break preference order.
_START, _CONTINUE, _SKIP_ROW, _DROP_STORY = 1, 2, 3, 4


@dataclass(frozen=True)
class Alignment:
    chapter_id: str
    links: frozenset[tuple[int, int]]
    method_tag: str
    total_score: float = 0.0

    def row(self, i: int) -> list[int]:
        """Story indices linked to summary index i, ascending."""
        return sorted(j for k, j in self.links if k == i)

    def is_chronological(self) -> bool:
        return self.method_tag.startswith("dp")

    def validate_against(self, chapter: ChapterPair) -> None:
        for i, j in self.links:
            if not (0 <= i < chapter.n_summary and 0 <= j < chapter.n_story):
                raise ValueError(f"link ({i}, {j}) out of range for chapter {chapter.key}")
        if self.is_chronological() and has_inversion(self.links):
            raise ValueError(f"chronological alignment for {self.chapter_id} has an inversion")


def has_inversion(links: frozenset[tuple[int, int]] | set[tuple[int, int]]) -> bool:
    """True when some later summary row links an earlier story paragraph
    than an earlier row does (links (k, l) and (i, j) with i > k, j < l)."""
    rows: dict[int, list[int]] = {}
    for i, j in links:
        rows.setdefault(i, []).append(j)
    max_earlier = -1
    for pos, i in enumerate(sorted(rows)):
        if pos > 0 and min(rows[i]) < max_earlier:
            return True
        max_earlier = max(max_earlier, max(rows[i]))
    return False


def is_story_partition(links, n_summary: int, n_story: int) -> bool:
    """True when the links form a monotone segmentation: every story index in
    exactly one row, rows contiguous, runs in non-decreasing summary order."""
    rows: dict[int, list[int]] = {}
    for i, j in links:
        if not 0 <= i < n_summary:
            return False
        rows.setdefault(i, []).append(j)
    flattened: list[int] = []
    for i in sorted(rows):
        js = sorted(rows[i])
        if js != list(range(js[0], js[-1] + 1)):
            return False
        flattened.extend(js)
    return flattened == list(range(n_story))


def align_random_n(chapter: ChapterPair, n: int, seed: int) -> Alignment:
    """Link each summary paragraph to n consecutive story paragraphs at a
    seeded random offset (clipped when the story is shorter than n)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = derive_rng(seed, chapter.key, "align-random")
    m = chapter.n_story
    width = min(n, m)
    links = set()
    for i in range(chapter.n_summary):
        start = int(rng.integers(0, max(0, m - n) + 1))
        links.update((i, j) for j in range(start, start + width))
    return Alignment(chapter.key, frozenset(links), f"random-{n}")


def align_diagonal_n(chapter: ChapterPair, n: int) -> Alignment:
    """Link each summary paragraph to an n-wide window centred on its
    proportional position along the story."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    big_n, m = chapter.n_summary, chapter.n_story
    links = set()
    for i in range(big_n):
        center = (2 * i + 1) * m // (2 * big_n)
        lo = center - n // 2
        links.update((i, j) for j in range(max(0, lo), min(m - 1, lo + n - 1) + 1))
    return Alignment(chapter.key, frozenset(links), f"diagonal-{n}")


def align_argmax(chapter: ChapterPair, scores: ScoreMatrix) -> Alignment:
    """Link each summary paragraph to its best-scoring story paragraph
    (lowest index on ties); no ordering constraint."""
    scores.validate_against(chapter)
    links = set()
    total = 0.0
    for i, row in enumerate(scores.values):
        j = int(np.argmax(row))
        links.add((i, j))
        total += float(row[j])
    return Alignment(chapter.key, frozenset(links), "argmax", total)


def align_dp(chapter: ChapterPair, scores: ScoreMatrix, allow_skip: bool = False) -> Alignment:
    """Maximum-total-score monotone segmentation via dynamic programming.

    A[i][j] is the best score with the first i summary rows covering the
    first j story paragraphs. Transitions at (i, j): start a new run for row
    i-1 with story j-1, extend row i-1's run, or leave row i-1 empty; ties
    prefer the transitions in that order. With allow_skip, a story paragraph
    may also stay unassigned at zero gain (runs may then have gaps).
    """
    scores.validate_against(chapter)
    g = scores.values
    n, m = g.shape
    neg = -math.inf
    acc = np.full((n + 1, m + 1), neg)
    back = np.zeros((n + 1, m + 1), dtype=np.int8)
    acc[:, 0] = 0.0
    if allow_skip:
        acc[0, :] = 0.0
        back[0, 1:] = _DROP_STORY
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            gain = g[i - 1, j - 1]
            options = [
                (acc[i - 1, j - 1] + gain, _START),
                (acc[i, j - 1] + gain, _CONTINUE),
                (acc[i - 1, j], _SKIP_ROW),
            ]
            if allow_skip:
                options.append((acc[i, j - 1], _DROP_STORY))
            best, tag = options[0]
            for value, candidate in options[1:]:
                if value > best:
                    best, tag = value, candidate
            acc[i, j] = best
            back[i, j] = tag
    links = set()
    i, j = n, m
    while j > 0:
        if i == 0:
            j -= 1
            continue
        tag = back[i, j]
        if tag == _START:
            links.add((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif tag == _CONTINUE:
            links.add((i - 1, j - 1))
            j -= 1
        elif tag == _SKIP_ROW:
            i -= 1
        else:
            j -= 1
    tag = "dp-skip" if allow_skip else "dp"
    return Alignment(chapter.key, frozenset(links), tag, float(acc[n, m]))


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------


def save_alignment(alignment: Alignment, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{alignment.chapter_id} {alignment.method_tag} {alignment.total_score!r}"]
    lines.extend(f"{i} {j}" for i, j in sorted(alignment.links))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_alignment(path: Path | str) -> Alignment:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty alignment file")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"{path}:1: header must be 'chapter_id method_tag total_score'")
    links = set()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j'")
        links.add((int(parts[0]), int(parts[1])))
    return Alignment(header[0], frozenset(links), header[1], float(header[2]))
