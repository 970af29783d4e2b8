"""Benchmark task construction: Cloze questions and multi-choice summary
completion, plus a counting heuristic that solves Cloze questions without
any learned model.

Entity tags come from an external tagger's output file; task construction
only consumes them. Entity matching is a case-insensitive comparison of
punctuation-stripped token windows, so "Scrooge," in the text matches the
tagged surface "Scrooge".
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .aligner import Alignment
from .corpus import ChapterPair, Paragraph, parse_paragraph_id, sentence_token_spans
from .scoring import tfidf_cosine, tokenize
from .seeding import derive_rng

logger = logging.getLogger(__name__)

MASK_TOKEN = "[MASK]"
ENTITY_TAG_SET = ("PERSON", "ORGANIZATION", "LOCATION")
MAX_DISTRACTORS = 10
SUMM_SEED_LEN = 5
SUMM_CANDIDATES = 10


@dataclass(frozen=True)
class EntitySpan:
    surface: str
    tag: str
    start_token: int
    end_token: int  # exclusive, in whitespace tokens of the paragraph


EntityTags = dict[str, list[EntitySpan]]


@dataclass(frozen=True)
class ClozeQuestion:
    id: str
    question_text: str
    candidates: tuple[str, ...]
    answer_index: int
    context_ids: tuple[str, ...]
    is_entity_question: bool
    anonymization: dict[str, str]  # entity surface -> anonymized token

    def validate(self) -> None:
        if self.question_text.count(MASK_TOKEN) != 1:
            raise ValueError(f"question {self.id} must contain exactly one {MASK_TOKEN}")
        if not 0 <= self.answer_index < len(self.candidates):
            raise ValueError(f"question {self.id}: answer index out of range")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError(f"question {self.id}: duplicate candidates")
        if len(set(self.anonymization.values())) != len(self.anonymization):
            raise ValueError(f"question {self.id}: anonymization map is not injective")


@dataclass(frozen=True)
class SummChoiceItem:
    id: str
    seed_tokens: tuple[str, ...]
    candidates: tuple[str, ...]
    answer_index: int
    context_ids: tuple[str, ...]

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)


# ---------------------------------------------------------------------------
# Token-window matching
# ---------------------------------------------------------------------------


def _core(token: str) -> str:
    stripped = tokenize(token)
    return stripped[0] if stripped else ""


def _norm_tokens(tokens: list[str]) -> list[str]:
    return [_core(t) for t in tokens]


def _canon(surface: str) -> str:
    return " ".join(t for t in (_core(tok) for tok in surface.split()) if t)


def _find_matches(norm: list[str], canon: str) -> list[int]:
    """Start positions of non-overlapping matches, left to right."""
    want = canon.split()
    width = len(want)
    if width == 0:
        return []
    starts = []
    pos = 0
    while pos + width <= len(norm):
        if norm[pos : pos + width] == want:
            starts.append(pos)
            pos += width
        else:
            pos += 1
    return starts


def _count_matches(norm: list[str], canon: str) -> int:
    return len(_find_matches(norm, canon))


def _punct_halo(token: str) -> tuple[str, str]:
    """Leading and trailing punctuation around the token's core."""
    core = _core(token)
    if not core:
        return "", token
    low = token.lower()
    start = low.find(core)
    return token[:start], token[start + len(core) :]


def _rewrite(tokens: list[str], replacements: list[tuple[int, int, str]]) -> str:
    """Replace non-overlapping token spans, keeping edge punctuation."""
    out = []
    pos = 0
    for start, end, new_core in sorted(replacements):
        out.extend(tokens[pos:start])
        lead, _ = _punct_halo(tokens[start])
        _, trail = _punct_halo(tokens[end - 1])
        out.append(lead + new_core + trail)
        pos = end
    out.extend(tokens[pos:])
    return " ".join(out)


def _match_entity_spans(
    norm: list[str], canons: list[str], blocked: set[int]
) -> list[tuple[int, int, str]]:
    """All occurrences of the given canonical surfaces, longer surfaces
    first, never overlapping each other or the blocked positions."""
    taken = set(blocked)
    found: list[tuple[int, int, str]] = []
    for canon in sorted(canons, key=lambda c: -len(c.split())):
        width = len(canon.split())
        for start in _find_matches(norm, canon):
            span = range(start, start + width)
            if any(pos in taken for pos in span):
                continue
            taken.update(span)
            found.append((start, start + width, canon))
    return found


# ---------------------------------------------------------------------------
# Cloze construction
# ---------------------------------------------------------------------------


class _ChapterEntities:
    """Chapter-wide entity bookkeeping: which tagged surfaces occur in the
    story text, their representative surfaces, and summary-side frequencies."""

    def __init__(self, chapter: ChapterPair, tags: EntityTags):
        self.story_norm = [_norm_tokens(p.text.split()) for p in chapter.story]
        self.summary_norm = [_norm_tokens(p.text.split()) for p in chapter.summary]
        self.pool: dict[str, str] = {}
        for para in chapter.summary:
            for span in tags.get(para.id, []):
                canon = _canon(span.surface)
                if canon and canon not in self.pool and self.occurs_in_story(canon):
                    self.pool[canon] = span.surface

    def occurs_in_story(self, canon: str) -> bool:
        return any(_count_matches(norm, canon) for norm in self.story_norm)

    def summary_frequency(self, canon: str) -> int:
        return sum(_count_matches(norm, canon) for norm in self.summary_norm)


def _validate_spans(para: Paragraph, spans: list[EntitySpan]) -> None:
    n_tokens = len(para.text.split())
    for span in spans:
        if span.tag not in ENTITY_TAG_SET:
            raise ValueError(f"{para.id}: unknown entity tag {span.tag!r}")
        if not (0 <= span.start_token < span.end_token <= n_tokens):
            raise ValueError(
                f"{para.id}: span [{span.start_token}, {span.end_token}) out of bounds"
            )


def _context_ids(chapter: ChapterPair, alignment: Alignment, i: int) -> tuple[str, ...]:
    return tuple(chapter.story[j].id for j in alignment.row(i))


def _sample_distractors(pool: list[str], exclude: str | None, rng) -> list[str]:
    others = [c for c in pool if c != exclude]
    if len(others) > MAX_DISTRACTORS:
        picked = rng.choice(len(others), size=MAX_DISTRACTORS, replace=False)
        others = [others[k] for k in sorted(picked)]
    return others


def build_cloze(
    chapter: ChapterPair, alignment: Alignment, tags: EntityTags, seed: int
) -> list[ClozeQuestion]:
    """One question per summary paragraph.

    Among the paragraph's tagged entities that also occur in the story text,
    the one that is rarest across the whole summary gets masked (ties: first
    span, then tag-file order). Candidates are the masked entity plus up to
    ten other story-occurring entities of the chapter, all replaced by
    per-question random "@entityK" tokens. Paragraphs without eligible
    entities get a random non-entity token masked instead and are flagged as
    excluded from evaluation.
    """
    if alignment.chapter_id != chapter.key:
        raise ValueError(f"alignment is for {alignment.chapter_id}, chapter is {chapter.key}")
    shared = _ChapterEntities(chapter, tags)
    pool = list(shared.pool)
    questions = []
    for i, para in enumerate(chapter.summary):
        spans = tags.get(para.id, [])
        _validate_spans(para, spans)
        rng = derive_rng(seed, chapter.key, "cloze", para.id)
        tokens = para.text.split()
        norm = _norm_tokens(tokens)
        eligible = [
            (pos, span)
            for pos, span in enumerate(spans)
            if _canon(span.surface) in shared.pool
        ]
        if eligible:
            _, masked = min(
                eligible,
                key=lambda item: (
                    shared.summary_frequency(_canon(item[1].surface)),
                    item[1].start_token,
                    item[0],
                ),
            )
            masked_canon = _canon(masked.surface)
            distractors = _sample_distractors(pool, masked_canon, rng)
            entities = [masked_canon] + distractors
            perm = rng.permutation(len(entities))
            anon = {canon: f"@entity{perm[k]}" for k, canon in enumerate(entities)}
            blocked = set(range(masked.start_token, masked.end_token))
            replacements = [(masked.start_token, masked.end_token, MASK_TOKEN)]
            replacements += [
                (a, b, anon[c]) for a, b, c in _match_entity_spans(norm, entities, blocked)
            ]
            unshuffled = [anon[c] for c in entities]
            order = list(rng.permutation(len(unshuffled)))
            question = ClozeQuestion(
                id=para.id,
                question_text=_rewrite(tokens, replacements),
                candidates=tuple(unshuffled[k] for k in order),
                answer_index=order.index(0),
                context_ids=_context_ids(chapter, alignment, i),
                is_entity_question=True,
                anonymization={shared.pool[c]: anon[c] for c in entities},
            )
        else:
            covered = set()
            for span in spans:
                covered.update(range(span.start_token, span.end_token))
            allowed = [k for k in range(len(tokens)) if k not in covered and norm[k]]
            if len(tokens) < 2 or not allowed:
                logger.warning("%s: no maskable token, paragraph skipped", para.id)
                continue
            pos = allowed[int(rng.integers(0, len(allowed)))]
            distractors = _sample_distractors(pool, None, rng)
            perm = rng.permutation(len(distractors)) if distractors else []
            anon = {canon: f"@entity{perm[k]}" for k, canon in enumerate(distractors)}
            replacements = [(pos, pos + 1, MASK_TOKEN)]
            replacements += [
                (a, b, anon[c]) for a, b, c in _match_entity_spans(norm, distractors, {pos})
            ]
            unshuffled = [norm[pos]] + [anon[c] for c in distractors]
            order = list(rng.permutation(len(unshuffled)))
            question = ClozeQuestion(
                id=para.id,
                question_text=_rewrite(tokens, replacements),
                candidates=tuple(unshuffled[k] for k in order),
                answer_index=order.index(0),
                context_ids=_context_ids(chapter, alignment, i),
                is_entity_question=False,
                anonymization={shared.pool[c]: anon[c] for c in distractors},
            )
        question.validate()
        questions.append(question)
    return questions


# ---------------------------------------------------------------------------
# Multi-choice summary completion
# ---------------------------------------------------------------------------


def build_summ(chapter: ChapterPair, alignment: Alignment, seed: int) -> list[SummChoiceItem]:
    """One item per summary paragraph longer than the seed length: keep its
    first tokens as the seed, rank the true completion among completions of
    other such paragraphs from the same chapter."""
    if alignment.chapter_id != chapter.key:
        raise ValueError(f"alignment is for {alignment.chapter_id}, chapter is {chapter.key}")
    eligible = [
        (i, para.text.split())
        for i, para in enumerate(chapter.summary)
        if len(para.text.split()) > SUMM_SEED_LEN
    ]
    if len(eligible) < 2:
        logger.warning("%s: fewer than 2 eligible summary paragraphs, chapter skipped",
                       chapter.key)
        return []
    items = []
    for i, tokens in eligible:
        para = chapter.summary[i]
        rng = derive_rng(seed, chapter.key, "summ", para.id)
        others = [toks for k, toks in eligible if k != i]
        n_distractors = min(SUMM_CANDIDATES - 1, len(others))
        picked = rng.choice(len(others), size=n_distractors, replace=False)
        candidates = [" ".join(tokens[SUMM_SEED_LEN:])]
        candidates += [" ".join(others[k][SUMM_SEED_LEN:]) for k in sorted(picked)]
        order = list(rng.permutation(len(candidates)))
        items.append(
            SummChoiceItem(
                id=para.id,
                seed_tokens=tuple(tokens[:SUMM_SEED_LEN]),
                candidates=tuple(candidates[k] for k in order),
                answer_index=order.index(0),
                context_ids=_context_ids(chapter, alignment, i),
            )
        )
    return items


# ---------------------------------------------------------------------------
# Heuristic Cloze baseline
# ---------------------------------------------------------------------------


def cloze_heuristic_solve(question: ClozeQuestion, chapter: ChapterPair) -> int:
    """Pick the candidate whose entity occurs most often in the question's
    context paragraphs (whole story when the context is empty).

    Ties go to the occurrence closest to the context sentence that best
    matches the source summary paragraph under tf-idf, then to the lowest
    candidate index.
    """
    _, _, _, summary_index = parse_paragraph_id(question.id)
    context = [chapter.story[j] for j in sorted({p.index for p in chapter.story
                                                 if p.id in question.context_ids})]
    if not context:
        context = list(chapter.story)
    raw_tokens: list[str] = []
    for para in context:
        raw_tokens.extend(para.text.split())
    norm = _norm_tokens(raw_tokens)

    token_to_surface = {tok: surface for surface, tok in question.anonymization.items()}
    canons = [_canon(token_to_surface.get(c, c)) for c in question.candidates]
    occurrences = [_find_matches(norm, canon) if canon else [] for canon in canons]
    counts = [len(occ) for occ in occurrences]

    anchor = _anchor_position(chapter.summary[summary_index].text, raw_tokens)
    ranked = sorted(
        range(len(question.candidates)),
        key=lambda k: (
            -counts[k],
            min((abs(pos - anchor) for pos in occurrences[k]), default=math.inf),
            k,
        ),
    )
    return ranked[0]


def answer_in_context(question: ClozeQuestion, chapter: ChapterPair) -> bool:
    """True when the answer's surface occurs in the question's context
    paragraphs (whole story when the context is empty)."""
    inverse = {tok: surf for surf, tok in question.anonymization.items()}
    answer_token = question.candidates[question.answer_index]
    canon = _canon(inverse.get(answer_token, answer_token))
    wanted = set(question.context_ids)
    context = [p for p in chapter.story if p.id in wanted] or list(chapter.story)
    norm: list[str] = []
    for para in context:
        norm.extend(_norm_tokens(para.text.split()))
    return bool(canon) and _count_matches(norm, canon) > 0


def _anchor_position(summary_text: str, context_tokens: list[str]) -> float:
    """Midpoint of the context sentence most similar to the summary text."""
    spans = sentence_token_spans(context_tokens)
    if not spans:
        return 0.0
    sentences = [tokenize(" ".join(context_tokens[a:b])) for a, b in spans]
    sims = tfidf_cosine(tokenize(summary_text), sentences)
    best = int(sims.argmax())
    a, b = spans[best]
    return (a + b - 1) / 2


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def save_entity_tags(tags: EntityTags, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for pid in sorted(tags):
        for span in tags[pid]:
            lines.append(
                json.dumps(
                    {
                        "paragraph_id": pid,
                        "surface": span.surface,
                        "tag": span.tag,
                        "start_token": span.start_token,
                        "end_token": span.end_token,
                    },
                    sort_keys=True,
                )
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_entity_tags(path: Path | str) -> EntityTags:
    path = Path(path)
    tags: EntityTags = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: invalid record: {err}") from None
            try:
                span = EntitySpan(
                    surface=record["surface"],
                    tag=record["tag"],
                    start_token=int(record["start_token"]),
                    end_token=int(record["end_token"]),
                )
                pid = record["paragraph_id"]
            except KeyError as err:
                raise ValueError(f"{path}:{lineno}: missing field {err}") from None
            if span.tag not in ENTITY_TAG_SET:
                raise ValueError(f"{path}:{lineno}: field 'tag' must be one of {ENTITY_TAG_SET}")
            tags.setdefault(pid, []).append(span)
    return tags


def save_cloze(questions: list[ClozeQuestion], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(
            {
                "id": q.id,
                "question": q.question_text,
                "candidates": list(q.candidates),
                "answer_index": q.answer_index,
                "context_ids": list(q.context_ids),
                "is_entity_question": q.is_entity_question,
                "anonymization": q.anonymization,
            },
            sort_keys=True,
        )
        for q in questions
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_cloze(path: Path | str) -> list[ClozeQuestion]:
    questions = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            questions.append(
                ClozeQuestion(
                    id=record["id"],
                    question_text=record["question"],
                    candidates=tuple(record["candidates"]),
                    answer_index=record["answer_index"],
                    context_ids=tuple(record["context_ids"]),
                    is_entity_question=record["is_entity_question"],
                    anonymization=record["anonymization"],
                )
            )
    return questions


def save_summ(items: list[SummChoiceItem], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(
            {
                "id": item.id,
                "seed": list(item.seed_tokens),
                "candidates": list(item.candidates),
                "answer_index": item.answer_index,
                "context_ids": list(item.context_ids),
                "n_candidates": item.n_candidates,
            },
            sort_keys=True,
        )
        for item in items
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_summ(path: Path | str) -> list[SummChoiceItem]:
    items = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            items.append(
                SummChoiceItem(
                    id=record["id"],
                    seed_tokens=tuple(record["seed"]),
                    candidates=tuple(record["candidates"]),
                    answer_index=record["answer_index"],
                    context_ids=tuple(record["context_ids"]),
                )
            )
    return items


def save_predictions(predictions: list[tuple[str, int]], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps({"item_id": item_id, "chosen_index": chosen}, sort_keys=True)
        for item_id, chosen in predictions
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_predictions(path: Path | str) -> list[tuple[str, int]]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                out.append((record["item_id"], int(record["chosen_index"])))
    return out
