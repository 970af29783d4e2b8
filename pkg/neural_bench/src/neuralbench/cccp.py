"""Joint alignment learning: alternate between a dynamic-programming
alignment step and gradient steps on the reader.

The alignment step exports the model's paragraph affinities as score-matrix
files and invokes the alignment CLI (``storyalign align --method dp
--scorer external``) as a subprocess, then reads the alignment files back.
The gradient step trains the reader on its task loss under the refreshed
alignments, plus a hinge that contrasts the chosen alignments against a few
sampled boundary perturbations (the tractable stand-in for the max over all
alignments).
"""

from __future__ import annotations

import logging
import subprocess
import sys
from pathlib import Path

import numpy as np
import torch

from .data import Chapter, ClozeExample, build_cloze_example, read_alignment, write_score_matrix
from .reader import ClozeReader

logger = logging.getLogger(__name__)

CLI_MODULE = "storyalign.cli"


def partition_rows(links: set[tuple[int, int]], n_summary: int) -> list[list[int]]:
    rows: list[list[int]] = [[] for _ in range(n_summary)]
    for i, j in links:
        rows[i].append(j)
    for row in rows:
        row.sort()
    return rows


def perturb_partition(links: set[tuple[int, int]], n_summary: int, n_story: int,
                      rng: np.random.Generator) -> set[tuple[int, int]]:
    """Shift one run boundary of a monotone partition by one story index."""
    rows = partition_rows(links, n_summary)
    bounds = [0]
    for row in rows:
        bounds.append(bounds[-1] + len(row))
    if n_summary < 2:
        return set(links)
    pick = int(rng.integers(1, n_summary))
    delta = -1 if rng.random() < 0.5 else 1
    moved = bounds[pick] + delta
    if bounds[pick - 1] <= moved <= bounds[pick + 1]:
        bounds[pick] = moved
    out = set()
    for i in range(n_summary):
        out.update((i, j) for j in range(bounds[i], bounds[i + 1]))
    return out


def alignment_objective(values: np.ndarray, links: set[tuple[int, int]]) -> float:
    return float(sum(values[i, j] for i, j in links))


class CccpRunner:
    def __init__(
        self,
        model: ClozeReader,
        chapters: list[Chapter],
        records_by_chapter: dict[str, list[dict]],
        corpus_dir: Path | str,
        work_dir: Path | str,
        n_contrastive: int = 4,
        seed: int = 0,
    ):
        self.model = model
        self.chapters = {c.key: c for c in chapters}
        self.records = records_by_chapter
        self.corpus_dir = Path(corpus_dir)
        self.work_dir = Path(work_dir)
        self.n_contrastive = n_contrastive
        self.rng = np.random.default_rng(seed)
        self.alignments: dict[str, set[tuple[int, int]]] = {}
        self.objective_log: list[float] = []

    # -- alignment step ------------------------------------------------

    def paragraph_affinities(self, chapter: Chapter) -> np.ndarray:
        """Cosine similarity of mean-pooled word embeddings, summary rows
        against story columns. Embeddings move with every gradient step, so
        the exported affinities sharpen as training progresses."""
        with torch.no_grad():
            from .data import UNK, tokens

            def pool(text: str) -> torch.Tensor:
                toks = tokens(text) or [UNK]
                ids = torch.tensor(self.model.vocab.ids(toks), dtype=torch.long)
                return self.model.embedding(ids).mean(0)

            summary = torch.stack([pool(text) for text in chapter.summary])
            story = torch.stack([pool(text) for text in chapter.story])
            summary = torch.nn.functional.normalize(summary, dim=1)
            story = torch.nn.functional.normalize(story, dim=1)
            return (summary @ story.T).numpy().astype(float)

    def export_scores(self, scores_dir: Path) -> dict[str, np.ndarray]:
        matrices = {}
        for key, chapter in sorted(self.chapters.items()):
            values = self.paragraph_affinities(chapter)
            work, ch = key.split("/")
            write_score_matrix(scores_dir / work / f"{ch}.scores", key, values)
            matrices[key] = values
        return matrices

    def run_dp(self, scores_dir: Path, align_dir: Path) -> dict[str, tuple[set, float]]:
        command = [
            sys.executable, "-m", CLI_MODULE, "align",
            "--corpus", str(self.corpus_dir),
            "--method", "dp", "--scorer", "external",
            "--scores", str(scores_dir),
            "--out", str(align_dir),
        ]
        result = subprocess.run(command, capture_output=True, text=True)
        if result.returncode != 0:
            raise RuntimeError(
                f"alignment bridge failed (exit {result.returncode}): {result.stderr.strip()}"
            )
        out = {}
        for path in sorted(align_dir.glob("*/*.align")):
            chapter_id, _, total, links = read_alignment(path)
            out[chapter_id] = (links, total)
        return out

    def alignment_step(self, round_index: int) -> float:
        scores_dir = self.work_dir / f"round{round_index}" / "scores"
        align_dir = self.work_dir / f"round{round_index}" / "align"
        self.export_scores(scores_dir)
        aligned = self.run_dp(scores_dir, align_dir)
        total = 0.0
        for key, (links, objective) in aligned.items():
            self.alignments[key] = links
            total += objective
        return total

    # -- gradient step ---------------------------------------------------

    def _examples_for_links(self, key: str, links: set[tuple[int, int]]) -> list[ClozeExample]:
        chapter = self.chapters[key]
        rows = partition_rows(links, len(chapter.summary))
        examples = []
        for record in self.records.get(key, []):
            i = int(record["id"].rsplit("/", 1)[1])
            context_ids = [chapter.story_ids[j] for j in rows[i]]
            examples.append(build_cloze_example(dict(record, context_ids=context_ids), chapter))
        return examples

    def _chapter_loss(self, key: str, links: set[tuple[int, int]]) -> torch.Tensor:
        examples = self._examples_for_links(key, links)
        if not examples:
            return torch.zeros(())
        return sum(self.model.loss(ex) for ex in examples) / len(examples)

    def theta_step(self, steps: int, learning_rate: float | None = None) -> float:
        optimizer = torch.optim.Adam(
            self.model.parameters(), lr=learning_rate or self.model.config.learning_rate
        )
        last = 0.0
        for _ in range(steps):
            optimizer.zero_grad()
            total = torch.zeros(())
            for key, links in sorted(self.alignments.items()):
                chapter = self.chapters[key]
                chosen = self._chapter_loss(key, links)
                sampled = [
                    self._chapter_loss(
                        key,
                        perturb_partition(links, len(chapter.summary), len(chapter.story),
                                          self.rng),
                    )
                    for _ in range(self.n_contrastive)
                ]
                best_sample = torch.stack(sampled).min() if sampled else chosen.detach()
                total = total + chosen + torch.clamp(chosen - best_sample, min=0)
            total = total / max(len(self.alignments), 1)
            total.backward()
            optimizer.step()
            last = float(total.detach())
        return last

    # -- outer loop --------------------------------------------------------

    def run(self, rounds: int, steps_per_round: int,
            learning_rate: float | None = None) -> list[float]:
        """Returns the DP objective per completed round. A bridge failure
        aborts the round and keeps the last good alignments."""
        for round_index in range(rounds):
            try:
                objective = self.alignment_step(round_index)
            except RuntimeError as err:
                logger.error("round %d aborted: %s", round_index, err)
                break
            self.objective_log.append(objective)
            self.theta_step(steps_per_round, learning_rate)
        return self.objective_log
