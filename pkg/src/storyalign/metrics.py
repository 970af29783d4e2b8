"""Alignment quality (precision/recall/F1 over gold pairs) and task accuracy.

Each gold (summary, story) pair counts as one sample. Corpus-level scores
come in two aggregations: micro pools the raw counts across chapters, macro
averages the per-chapter scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .aligner import Alignment
from .corpus import GoldAlignment


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class PairCounts:
    chapter_id: str
    true_pos: int
    pred_pairs: int
    gold_pairs: int

    @property
    def precision(self) -> float:
        return self.true_pos / self.pred_pairs if self.pred_pairs else 0.0

    @property
    def recall(self) -> float:
        return self.true_pos / self.gold_pairs if self.gold_pairs else 0.0

    @property
    def f1(self) -> float:
        return _f1(self.precision, self.recall)


@dataclass(frozen=True)
class AlignEvalReport:
    per_chapter: tuple[PairCounts, ...]
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float


def eval_alignment(pred: Alignment, gold: GoldAlignment) -> PairCounts:
    """Per-chapter pair counts of a predicted alignment against gold."""
    if pred.chapter_id != gold.chapter_id:
        raise ValueError(
            f"chapter mismatch: prediction is {pred.chapter_id}, gold is {gold.chapter_id}"
        )
    tp = len(pred.links & gold.links)
    return PairCounts(pred.chapter_id, tp, len(pred.links), len(gold.links))


def aggregate(counts: Iterable[PairCounts]) -> AlignEvalReport:
    per_chapter = tuple(sorted(counts, key=lambda c: c.chapter_id))
    if not per_chapter:
        raise ValueError("no chapters to aggregate")
    tp = sum(c.true_pos for c in per_chapter)
    pred = sum(c.pred_pairs for c in per_chapter)
    gold = sum(c.gold_pairs for c in per_chapter)
    micro_p = tp / pred if pred else 0.0
    micro_r = tp / gold if gold else 0.0
    n = len(per_chapter)
    macro_p = sum(c.precision for c in per_chapter) / n
    macro_r = sum(c.recall for c in per_chapter) / n
    macro_f = sum(c.f1 for c in per_chapter) / n
    return AlignEvalReport(
        per_chapter,
        micro_p,
        micro_r,
        _f1(micro_p, micro_r),
        macro_p,
        macro_r,
        macro_f,
    )


def eval_task_accuracy(
    predictions: Sequence[int],
    keys: Sequence[int],
    eval_mask: Sequence[bool] | None = None,
) -> float:
    """Accuracy over the positions where eval_mask is true (all positions
    when no mask is given)."""
    if eval_mask is None:
        eval_mask = [True] * len(predictions)
    if not (len(predictions) == len(keys) == len(eval_mask)):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions, {len(keys)} keys, "
            f"{len(eval_mask)} mask entries"
        )
    total = sum(1 for m in eval_mask if m)
    if total == 0:
        raise ValueError("no evaluable items")
    correct = sum(1 for p, k, m in zip(predictions, keys, eval_mask) if m and p == k)
    return correct / total


def report_table(reports: dict[str, AlignEvalReport]) -> str:
    """Plain-text table: one row per method."""
    header = f"{'method':<20} {'P':>7} {'R':>7} {'F1(micro)':>10} {'F1(macro)':>10}"
    rows = [header, "-" * len(header)]
    for method in sorted(reports):
        r = reports[method]
        rows.append(
            f"{method:<20} {r.micro_precision:>7.3f} {r.micro_recall:>7.3f} "
            f"{r.micro_f1:>10.3f} {r.macro_f1:>10.3f}"
        )
    return "\n".join(rows)


def report_records(reports: dict[str, AlignEvalReport]) -> list[dict]:
    """Machine-readable records, one per method plus one per chapter."""
    records = []
    for method in sorted(reports):
        r = reports[method]
        records.append(
            {
                "record": "corpus",
                "method": method,
                "micro_precision": r.micro_precision,
                "micro_recall": r.micro_recall,
                "micro_f1": r.micro_f1,
                "macro_precision": r.macro_precision,
                "macro_recall": r.macro_recall,
                "macro_f1": r.macro_f1,
                "chapters": len(r.per_chapter),
            }
        )
        for c in r.per_chapter:
            records.append(
                {
                    "record": "chapter",
                    "method": method,
                    "chapter_id": c.chapter_id,
                    "true_pos": c.true_pos,
                    "pred_pairs": c.pred_pairs,
                    "gold_pairs": c.gold_pairs,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                }
            )
    return records


def save_report(reports: dict[str, AlignEvalReport], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(rec, sort_keys=True) for rec in report_records(reports)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
