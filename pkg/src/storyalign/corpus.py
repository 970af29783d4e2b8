"""Dataset model, paragraph segmentation, and on-disk layout.

A chapter pairs the ordered bullet paragraphs of a study-guide summary with
the ordered paragraphs of the story chapter itself. Chapter and gold files
are JSON-lines (one record per line); the directory layout is
``corpus/<work_id>/<chapter_id>.chapter`` and ``gold/<work_id>/<chapter_id>.gold``.

Pre-segmented corpora are ingested directly through ``load_chapter`` (one
paragraph per record); ``segment_summary`` / ``segment_story`` exist for raw
text that still needs splitting.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

SUMMARY_SIDE = "s"
STORY_SIDE = "d"

# Hard cap on story paragraph length, in whitespace-delimited tokens.
STORY_TOKEN_CAP = 250

# "1." stands for any "<digits>." marker.
DEFAULT_BULLET_MARKERS = ("-", "*", "•", "1.")

# A token that ends a sentence: terminal punctuation, optionally followed by
# closing quotes/brackets.
_SENTENCE_END = re.compile(r"[.!?][\"'’”)\]]*$")


def paragraph_id(work_id: str, chapter_id: str, side: str, index: int) -> str:
    return f"{work_id}/{chapter_id}/{side}/{index}"


def parse_paragraph_id(pid: str) -> tuple[str, str, str, int]:
    """Split an id back into (work, chapter, side, index)."""
    parts = pid.split("/")
    if len(parts) != 4 or parts[2] not in (SUMMARY_SIDE, STORY_SIDE):
        raise ValueError(f"malformed paragraph id: {pid!r}")
    return parts[0], parts[1], parts[2], int(parts[3])


def _check_id_component(value: str, field: str) -> str:
    if not value or "/" in value or any(c.isspace() for c in value):
        raise ValueError(f"{field} must be a non-empty slug without '/' or whitespace: {value!r}")
    return value


@dataclass(frozen=True)
class Paragraph:
    id: str
    text: str
    index: int

    def validate(self) -> None:
        if not self.text.strip():
            raise ValueError(f"paragraph {self.id} has empty text")
        if self.index < 0:
            raise ValueError(f"paragraph {self.id} has negative index")


@dataclass(frozen=True)
class ChapterPair:
    work_id: str
    chapter_id: str
    summary: tuple[Paragraph, ...]
    story: tuple[Paragraph, ...]

    @property
    def key(self) -> str:
        """Corpus-unique chapter key, used in score/alignment file headers."""
        return f"{self.work_id}/{self.chapter_id}"

    @property
    def n_summary(self) -> int:
        return len(self.summary)

    @property
    def n_story(self) -> int:
        return len(self.story)

    def validate(self) -> None:
        _check_id_component(self.work_id, "work_id")
        _check_id_component(self.chapter_id, "chapter_id")
        if not self.summary or not self.story:
            raise ValueError(f"chapter {self.key} needs at least one paragraph per side")
        for side, seq in ((SUMMARY_SIDE, self.summary), (STORY_SIDE, self.story)):
            for pos, para in enumerate(seq):
                para.validate()
                if para.index != pos:
                    raise ValueError(
                        f"chapter {self.key}: paragraph {para.id} at position {pos} "
                        f"has index {para.index}"
                    )
                expected = paragraph_id(self.work_id, self.chapter_id, side, pos)
                if para.id != expected:
                    raise ValueError(f"chapter {self.key}: expected id {expected}, got {para.id}")
        for para in self.story:
            if len(para.text.split()) > STORY_TOKEN_CAP:
                raise ValueError(f"story paragraph {para.id} exceeds {STORY_TOKEN_CAP} tokens")


@dataclass(frozen=True)
class GoldAlignment:
    chapter_id: str
    links: frozenset[tuple[int, int]]

    def validate_against(self, chapter: ChapterPair) -> None:
        if self.chapter_id != chapter.key:
            raise ValueError(f"gold is for {self.chapter_id}, chapter is {chapter.key}")
        for i, j in self.links:
            if not (0 <= i < chapter.n_summary and 0 <= j < chapter.n_story):
                raise ValueError(f"gold link ({i}, {j}) out of range for chapter {chapter.key}")


def _marker_regex(markers: tuple[str, ...]) -> re.Pattern[str]:
    alts = []
    for marker in markers:
        if marker == "1.":
            alts.append(r"\d+\.")
        else:
            alts.append(re.escape(marker))
    return re.compile(r"^(?:%s)(?:\s+|$)" % "|".join(alts))


def segment_summary(
    raw_summary: str,
    *,
    work_id: str = "work",
    chapter_id: str = "ch",
    markers: tuple[str, ...] = DEFAULT_BULLET_MARKERS,
) -> list[Paragraph]:
    """Split a bulleted summary into one paragraph per bullet.

    A bullet starts at a line whose first non-blank characters are one of the
    markers; following lines up to the next marker are wrapped continuations
    and get joined with single spaces. Text before the first marker is
    ignored; bullets that end up empty are dropped.
    """
    pattern = _marker_regex(markers)
    bullets: list[list[str]] = []
    current: list[str] | None = None
    for line in raw_summary.splitlines():
        stripped = line.strip()
        match = pattern.match(stripped)
        if match:
            current = []
            bullets.append(current)
            rest = stripped[match.end() :].strip()
            if rest:
                current.append(rest)
        elif stripped and current is not None:
            current.append(stripped)
    texts = [" ".join(parts) for parts in bullets if parts]
    if not texts:
        raise ValueError("no summary paragraphs")
    return [
        Paragraph(paragraph_id(work_id, chapter_id, SUMMARY_SIDE, k), text, k)
        for k, text in enumerate(texts)
    ]


def sentence_token_spans(tokens: list[str]) -> list[tuple[int, int]]:
    """Half-open token spans of sentences; the tail without terminal
    punctuation counts as a sentence."""
    spans = []
    start = 0
    for pos, tok in enumerate(tokens):
        if _SENTENCE_END.search(tok):
            spans.append((start, pos + 1))
            start = pos + 1
    if start < len(tokens):
        spans.append((start, len(tokens)))
    return spans


def _split_block(tokens: list[str], cap: int) -> list[list[str]]:
    """Greedy sentence-boundary split of an over-long token block.

    Sentences accumulate while the running length stays within the cap; a
    single sentence longer than the cap is hard-split into cap-sized chunks.
    The full token sequence is preserved across the output."""
    pieces: list[list[str]] = []
    current: list[str] = []
    for start, end in sentence_token_spans(tokens):
        sent = tokens[start:end]
        if len(sent) > cap:
            if current:
                pieces.append(current)
                current = []
            for k in range(0, len(sent), cap):
                pieces.append(sent[k : k + cap])
        elif len(current) + len(sent) > cap:
            if current:
                pieces.append(current)
            current = list(sent)
        else:
            current.extend(sent)
    if current:
        pieces.append(current)
    return pieces


def segment_story(
    raw_story: str,
    *,
    work_id: str = "work",
    chapter_id: str = "ch",
    token_cap: int = STORY_TOKEN_CAP,
) -> list[Paragraph]:
    """Split story text on blank lines, then re-split any block that exceeds
    the token cap so every paragraph has at most ``token_cap`` tokens."""
    if not raw_story.strip():
        raise ValueError("empty story text")
    blocks = [b.strip() for b in re.split(r"\n\s*\n", raw_story.strip()) if b.strip()]
    texts: list[str] = []
    for block in blocks:
        tokens = block.split()
        if len(tokens) <= token_cap:
            texts.append(block)
        else:
            texts.extend(" ".join(piece) for piece in _split_block(tokens, token_cap))
    return [
        Paragraph(paragraph_id(work_id, chapter_id, STORY_SIDE, k), text, k)
        for k, text in enumerate(texts)
    ]


def build_chapter(
    work_id: str,
    chapter_id: str,
    raw_summary: str,
    raw_story: str,
    *,
    markers: tuple[str, ...] = DEFAULT_BULLET_MARKERS,
) -> ChapterPair:
    """Segment both sides of a raw chapter and validate the result."""
    summary = segment_summary(raw_summary, work_id=work_id, chapter_id=chapter_id, markers=markers)
    story = segment_story(raw_story, work_id=work_id, chapter_id=chapter_id)
    chapter = ChapterPair(work_id, chapter_id, tuple(summary), tuple(story))
    chapter.validate()
    return chapter


def chapter_from_texts(
    work_id: str, chapter_id: str, summary_texts: list[str], story_texts: list[str]
) -> ChapterPair:
    """Build a chapter from already-segmented paragraph texts."""
    summary = tuple(
        Paragraph(paragraph_id(work_id, chapter_id, SUMMARY_SIDE, k), text, k)
        for k, text in enumerate(summary_texts)
    )
    story = tuple(
        Paragraph(paragraph_id(work_id, chapter_id, STORY_SIDE, k), text, k)
        for k, text in enumerate(story_texts)
    )
    chapter = ChapterPair(work_id, chapter_id, summary, story)
    chapter.validate()
    return chapter


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def _read_records(path: Path) -> list[tuple[int, dict]]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: invalid record: {err}") from None
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: record is not an object")
            records.append((lineno, record))
    if not records:
        raise ValueError(f"{path}: empty file")
    return records


def _field(path: Path, lineno: int, record: dict, name: str, kind: type):
    if name not in record:
        raise ValueError(f"{path}:{lineno}: missing field '{name}'")
    value = record[name]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ValueError(f"{path}:{lineno}: field '{name}' is not {kind.__name__}")
    return value


def save_chapter(chapter: ChapterPair, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"work_id": chapter.work_id, "chapter_id": chapter.chapter_id})]
    for side, seq in ((SUMMARY_SIDE, chapter.summary), (STORY_SIDE, chapter.story)):
        for para in seq:
            lines.append(
                json.dumps({"side": side, "index": para.index, "text": para.text}, sort_keys=True)
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_chapter(path: Path | str) -> ChapterPair:
    path = Path(path)
    records = _read_records(path)
    lineno, header = records[0]
    work_id = _field(path, lineno, header, "work_id", str)
    chapter_id = _field(path, lineno, header, "chapter_id", str)
    sides: dict[str, list[Paragraph]] = {SUMMARY_SIDE: [], STORY_SIDE: []}
    for lineno, record in records[1:]:
        side = _field(path, lineno, record, "side", str)
        if side not in sides:
            raise ValueError(f"{path}:{lineno}: field 'side' must be 's' or 'd', got {side!r}")
        index = _field(path, lineno, record, "index", int)
        text = _field(path, lineno, record, "text", str)
        if index != len(sides[side]):
            raise ValueError(
                f"{path}:{lineno}: field 'index' out of order: expected "
                f"{len(sides[side])}, got {index}"
            )
        sides[side].append(Paragraph(paragraph_id(work_id, chapter_id, side, index), text, index))
    chapter = ChapterPair(
        work_id, chapter_id, tuple(sides[SUMMARY_SIDE]), tuple(sides[STORY_SIDE])
    )
    chapter.validate()
    return chapter


def save_gold(gold: GoldAlignment, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    by_summary: dict[int, list[int]] = {}
    for i, j in sorted(gold.links):
        by_summary.setdefault(i, []).append(j)
    lines = [
        json.dumps({"chapter_id": gold.chapter_id, "s": i, "d": js}, sort_keys=True)
        for i, js in sorted(by_summary.items())
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_gold(path: Path | str) -> GoldAlignment:
    """Load gold links. Duplicate (i, j) pairs collapse with a warning; links
    are allowed to violate chronological order."""
    path = Path(path)
    links: set[tuple[int, int]] = set()
    chapter_id: str | None = None
    seen_dup = False
    for lineno, record in _read_records(path):
        cid = _field(path, lineno, record, "chapter_id", str)
        if chapter_id is None:
            chapter_id = cid
        elif cid != chapter_id:
            raise ValueError(f"{path}:{lineno}: field 'chapter_id' changed within one file")
        i = _field(path, lineno, record, "s", int)
        for j in _field(path, lineno, record, "d", list):
            if isinstance(j, bool) or not isinstance(j, int):
                raise ValueError(f"{path}:{lineno}: field 'd' must hold integers")
            if (i, j) in links:
                seen_dup = True
            links.add((i, j))
    if seen_dup:
        logger.warning("%s: duplicate gold links collapsed", path)
    assert chapter_id is not None
    return GoldAlignment(chapter_id, frozenset(links))


# ---------------------------------------------------------------------------
# Corpus layout
# ---------------------------------------------------------------------------


def chapter_paths(corpus_dir: Path | str) -> list[Path]:
    """All chapter files under a corpus root, in deterministic order."""
    return sorted(Path(corpus_dir).glob("*/*.chapter"))


def load_corpus(corpus_dir: Path | str) -> list[ChapterPair]:
    return [load_chapter(p) for p in chapter_paths(corpus_dir)]


def gold_path(gold_dir: Path | str, chapter_key: str) -> Path:
    work_id, chapter_id = chapter_key.split("/")
    return Path(gold_dir) / work_id / f"{chapter_id}.gold"
