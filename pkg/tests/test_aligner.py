from __future__ import annotations

import itertools

import numpy as np
import pytest

from storyalign.aligner import (
    Alignment,
    align_argmax,
    align_diagonal_n,
    align_dp,
    align_random_n,
    has_inversion,
    is_story_partition,
    load_alignment,
    save_alignment,
)
from storyalign.corpus import chapter_from_texts
from storyalign.scoring import ScoreMatrix


def blank_chapter(n: int, m: int, chapter_id: str = "c"):
    return chapter_from_texts("w", chapter_id, ["s"] * n, ["d"] * m)


def matrix(values, chapter_id: str = "w/c") -> ScoreMatrix:
    return ScoreMatrix(chapter_id, np.asarray(values, dtype=float))


def brute_force_best_partition(values: np.ndarray) -> float:
    """Exhaustive maximum over monotone segmentations: every way of cutting
    the story into N ordered, possibly empty, contiguous runs."""
    n, m = values.shape
    best = -np.inf
    for cuts in itertools.combinations(range(m + n - 1), n - 1):
        sizes = []
        prev = -1
        for cut in cuts:
            sizes.append(cut - prev - 1)
            prev = cut
        sizes.append(m + n - 2 - prev)
        total = 0.0
        j = 0
        for i, size in enumerate(sizes):
            for _ in range(size):
                total += values[i, j]
                j += 1
        best = max(best, total)
    return best


class TestInvariantHelpers:
    def test_has_inversion(self):
        assert not has_inversion({(0, 0), (1, 1)})
        assert has_inversion({(0, 1), (1, 0)})
        assert not has_inversion({(0, 0), (0, 5), (1, 5)})
        assert has_inversion({(0, 5), (2, 4)})
        assert not has_inversion(set())

    def test_is_story_partition(self):
        assert is_story_partition({(0, 0), (0, 1), (1, 2)}, 2, 3)
        assert is_story_partition({(1, 0), (1, 1)}, 2, 2)  # empty row 0
        assert not is_story_partition({(0, 0), (0, 2)}, 1, 3)  # gap in a run
        assert not is_story_partition({(0, 0)}, 1, 2)  # story index unassigned
        assert not is_story_partition({(0, 0), (1, 0)}, 2, 1)  # shared story index
        assert not is_story_partition({(0, 1), (1, 0)}, 2, 2)  # crossing runs


class TestRandomN:
    def test_single_story_paragraph(self):
        alignment = align_random_n(blank_chapter(4, 1), 3, seed=0)
        for i in range(4):
            assert alignment.row(i) == [0]

    def test_rows_consecutive_with_clipped_width(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n_sum = int(rng.integers(1, 8))
            m = int(rng.integers(1, 12))
            width = int(rng.integers(1, 9))
            alignment = align_random_n(blank_chapter(n_sum, m), width, seed=13)
            for i in range(n_sum):
                row = alignment.row(i)
                assert len(row) == min(width, m)
                assert row == list(range(row[0], row[0] + len(row)))
                assert 0 <= row[0] and row[-1] < m

    def test_frozen_seeded_starts(self):
        # Regression pin from the first oracle run of this seeded stream.
        alignment = align_random_n(blank_chapter(3, 10), 5, seed=42)
        assert [alignment.row(i)[0] for i in range(3)] == [0, 1, 4]

    def test_deterministic(self):
        chapter = blank_chapter(3, 10)
        first = align_random_n(chapter, 5, seed=7)
        second = align_random_n(chapter, 5, seed=7)
        assert first == second

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            align_random_n(blank_chapter(1, 1), 0, seed=0)


class TestDiagonalN:
    def test_identity_diagonal(self):
        alignment = align_diagonal_n(blank_chapter(4, 4), 1)
        assert alignment.links == frozenset((i, i) for i in range(4))

    def test_two_rows_split_ten_columns(self):
        alignment = align_diagonal_n(blank_chapter(2, 10), 5)
        assert alignment.row(0) == [0, 1, 2, 3, 4]
        assert alignment.row(1) == [5, 6, 7, 8, 9]

    def test_windows_monotone(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n_sum = int(rng.integers(1, 10))
            m = int(rng.integers(1, 15))
            width = int(rng.integers(1, 8))
            alignment = align_diagonal_n(blank_chapter(n_sum, m), width)
            starts = [alignment.row(i)[0] for i in range(n_sum)]
            ends = [alignment.row(i)[-1] for i in range(n_sum)]
            assert starts == sorted(starts)
            assert ends == sorted(ends)
            for i in range(n_sum):
                row = alignment.row(i)
                assert row == list(range(row[0], row[-1] + 1))

    def test_no_inversions_when_windows_fit(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n_sum = int(rng.integers(1, 7))
            width = int(rng.integers(1, 5))
            m = int(rng.integers(n_sum * width, n_sum * width + 10))
            alignment = align_diagonal_n(blank_chapter(n_sum, m), width)
            assert not has_inversion(alignment.links)


class TestArgmax:
    def test_identity_matrix(self):
        chapter = blank_chapter(3, 3)
        alignment = align_argmax(chapter, matrix(np.eye(3)))
        assert alignment.links == frozenset((i, i) for i in range(3))
        assert alignment.total_score == pytest.approx(3.0)

    def test_tie_breaks_to_lowest_index(self):
        chapter = blank_chapter(1, 3)
        alignment = align_argmax(chapter, matrix([[0.2, 0.9, 0.9]]))
        assert alignment.links == frozenset({(0, 1)})

    def test_matches_exhaustive_row_scan(self):
        rng = np.random.default_rng(5)
        chapter = blank_chapter(4, 6)
        values = rng.random((4, 6))
        alignment = align_argmax(chapter, matrix(values))
        for i in range(4):
            best = 0
            for j in range(6):
                if values[i, j] > values[i, best]:
                    best = j
            assert alignment.row(i) == [best]

    def test_row_permutation_equivariance(self):
        rng = np.random.default_rng(6)
        chapter = blank_chapter(5, 7)
        values = rng.random((5, 7))
        base = align_argmax(chapter, matrix(values))
        perm = list(rng.permutation(5))
        permuted = align_argmax(chapter, matrix(values[perm]))
        for new_i, old_i in enumerate(perm):
            assert permuted.row(new_i) == base.row(old_i)


class TestDp:
    def test_identity_matrix_gives_diagonal(self):
        chapter = blank_chapter(4, 4)
        alignment = align_dp(chapter, matrix(np.eye(4)))
        assert alignment.links == frozenset((i, i) for i in range(4))
        assert alignment.total_score == pytest.approx(4.0)

    def test_all_zero_matrix_still_valid(self):
        chapter = blank_chapter(3, 5)
        alignment = align_dp(chapter, matrix(np.zeros((3, 5))))
        assert alignment.total_score == 0.0
        assert is_story_partition(alignment.links, 3, 5)
        assert not has_inversion(alignment.links)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(1, 7))
            values = rng.normal(size=(n, m))
            alignment = align_dp(blank_chapter(n, m), matrix(values))
            assert alignment.total_score == pytest.approx(
                brute_force_best_partition(values), abs=1e-9
            )
            assert alignment.total_score == pytest.approx(
                sum(values[i, j] for i, j in alignment.links), abs=1e-9
            )

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="does not match"):
            align_dp(blank_chapter(2, 2), matrix(np.zeros((3, 3))))

    def test_beats_random_partitions(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 10))
            values = rng.normal(size=(n, m))
            best = align_dp(blank_chapter(n, m), matrix(values)).total_score
            cuts = sorted(rng.integers(0, m + 1, size=n - 1)) if n > 1 else []
            bounds = [0] + list(cuts) + [m]
            total = sum(
                values[i, j] for i in range(n) for j in range(bounds[i], bounds[i + 1])
            )
            assert best >= total - 1e-9

    def test_beats_diagonal_when_windows_fit(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            n = int(rng.integers(1, 5))
            width = int(rng.integers(1, 4))
            m = int(rng.integers(n * width, n * width + 8))
            values = rng.random((n, m))
            chapter = blank_chapter(n, m)
            score = matrix(values)
            dp_total = align_dp(chapter, score).total_score
            diagonal = align_diagonal_n(chapter, width)
            diag_total = sum(values[i, j] for i, j in diagonal.links)
            assert dp_total >= diag_total - 1e-9

    def test_allow_skip_drops_negative_columns(self):
        chapter = blank_chapter(2, 3)
        values = [[1.0, -5.0, 0.0], [0.0, -5.0, 1.0]]
        strict = align_dp(chapter, matrix(values))
        skipping = align_dp(chapter, matrix(values), allow_skip=True)
        assert strict.total_score == pytest.approx(-3.0)
        assert skipping.total_score == pytest.approx(2.0)
        assert skipping.links == frozenset({(0, 0), (1, 2)})
        assert not has_inversion(skipping.links)

    def test_method_tags(self):
        chapter = blank_chapter(1, 1)
        assert align_dp(chapter, matrix([[1.0]])).method_tag == "dp"
        assert align_dp(chapter, matrix([[1.0]]), allow_skip=True).method_tag == "dp-skip"

    def test_chronology_validation_hook(self):
        chapter = blank_chapter(2, 2)
        bad = Alignment("w/c", frozenset({(0, 1), (1, 0)}), "dp")
        with pytest.raises(ValueError, match="inversion"):
            bad.validate_against(chapter)


class TestAlignmentFile:
    def test_round_trip(self, tmp_path):
        alignment = Alignment("w/c", frozenset({(0, 0), (1, 2)}), "dp", 3.25)
        path = tmp_path / "c.align"
        save_alignment(alignment, path)
        assert load_alignment(path) == alignment

    def test_header_layout(self, tmp_path):
        alignment = Alignment("w/c", frozenset({(0, 0)}), "diagonal-5", 0.0)
        path = tmp_path / "c.align"
        save_alignment(alignment, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "w/c diagonal-5 0.0"
        assert lines[1] == "0 0"

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "c.align"
        path.write_text("only two\n")
        with pytest.raises(ValueError, match="header"):
            load_alignment(path)
