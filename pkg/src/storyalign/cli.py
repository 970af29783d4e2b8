"""Batch command-line front-end.

Subcommands wire the pipeline together: ``scores`` writes similarity
matrices, ``align`` writes alignments (optionally from externally produced
matrices), ``eval`` scores alignments against gold files, ``tasks`` builds
the Cloze/summary-completion benchmark files, and ``baseline`` runs the
counting heuristic over Cloze files.

Every command prints its resolved configuration as a JSON line, processes
chapters through a worker pool, and writes nothing if any chapter fails.
Outputs are byte-deterministic for a given configuration regardless of the
worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import aligner, corpus, metrics, scoring, tasks

CORPUS_ENV = "STORYALIGN_CORPUS"

SCORERS = ("tfidf", "bleu1", "bleu4", "embed", "random", "external")
METHODS = ("random", "diagonal", "argmax", "dp")


@dataclass
class RunConfig:
    command: str
    corpus_dir: str
    gold_dir: str | None
    output_dir: str | None
    method: str | None
    scorer: str | None
    n: int
    seed: int
    parallelism: int


def _echo_config(config: RunConfig, **extra) -> None:
    payload = {"event": "config", **asdict(config), **extra}
    print(json.dumps(payload, sort_keys=True))


def _log(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}, sort_keys=True))


def _corpus_dir(args) -> Path:
    raw = args.corpus or os.environ.get(CORPUS_ENV)
    if not raw:
        raise SystemExit(f"error: no corpus directory (use --corpus or ${CORPUS_ENV})")
    return Path(raw)


def _run_chapters(fn, corpus_dir: Path, workers: int):
    """Load every chapter under corpus_dir and apply fn; collect results and
    per-file errors separately so one bad chapter never silently drops."""
    paths = corpus.chapter_paths(corpus_dir)
    if not paths:
        raise SystemExit(f"error: no chapter files under {corpus_dir}")

    def safe(path):
        try:
            chapter = corpus.load_chapter(path)
            return chapter.key, fn(chapter), None
        except Exception as err:  # noqa: BLE001 - reported per file below
            return str(path), None, f"{type(err).__name__}: {err}"

    if workers <= 1:
        outcomes = [safe(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(safe, paths))
    results = {key: value for key, value, err in outcomes if err is None}
    errors = {key: err for key, _, err in outcomes if err is not None}
    return results, errors


def _fail_on_errors(errors: dict[str, str]) -> None:
    if errors:
        for key in sorted(errors):
            print(json.dumps({"event": "error", "chapter": key, "message": errors[key]},
                             sort_keys=True), file=sys.stderr)
        raise SystemExit(1)


def _out_path(output_dir: Path, chapter_key: str, extension: str) -> Path:
    work_id, chapter_id = chapter_key.split("/")
    return output_dir / work_id / f"{chapter_id}.{extension}"


def _scores_for(chapter, scorer: str, args) -> scoring.ScoreMatrix:
    if scorer == "tfidf":
        return scoring.score_tfidf(chapter)
    if scorer == "bleu1":
        return scoring.score_bleu(chapter, max_n=1)
    if scorer == "bleu4":
        return scoring.score_bleu(chapter, max_n=4)
    if scorer == "embed":
        if not args.embeddings:
            raise SystemExit("error: --scorer embed requires --embeddings")
        if getattr(args, "_embedding_table", None) is None:
            args._embedding_table = scoring.load_embeddings(args.embeddings)
        return scoring.score_embed(chapter, args._embedding_table)
    if scorer == "random":
        return scoring.score_random(chapter, args.seed)
    if scorer == "external":
        if not args.scores:
            raise SystemExit("error: --scorer external requires --scores")
        matrix = scoring.load_score_matrix(_out_path(Path(args.scores), chapter.key, "scores"))
        matrix.validate_against(chapter)
        return matrix
    raise SystemExit(f"error: unknown scorer {scorer!r}")


def cmd_scores(args) -> int:
    corpus_dir = _corpus_dir(args)
    output_dir = Path(args.out)
    config = RunConfig("scores", str(corpus_dir), None, str(output_dir), None,
                       args.scorer, args.n, args.seed, args.parallelism)
    _echo_config(config)
    if args.scorer == "external":
        raise SystemExit("error: 'external' is not a scorer that can be exported")
    results, errors = _run_chapters(
        lambda chapter: _scores_for(chapter, args.scorer, args), corpus_dir, args.parallelism
    )
    _fail_on_errors(errors)
    for key in sorted(results):
        scoring.save_score_matrix(results[key], _out_path(output_dir, key, "scores"))
    _log("scores_done", chapters=len(results), scorer=args.scorer)
    return 0


def cmd_align(args) -> int:
    corpus_dir = _corpus_dir(args)
    output_dir = Path(args.out)
    needs_scorer = args.method in ("argmax", "dp")
    if needs_scorer and not args.scorer:
        raise SystemExit(f"error: --method {args.method} requires --scorer")
    if not needs_scorer and args.scorer:
        print(json.dumps({"event": "warning",
                          "message": f"--scorer ignored for --method {args.method}"}),
              file=sys.stderr)
    config = RunConfig("align", str(corpus_dir), None, str(output_dir), args.method,
                       args.scorer if needs_scorer else None, args.n, args.seed,
                       args.parallelism)
    _echo_config(config, allow_skip=args.allow_skip)

    def one(chapter) -> aligner.Alignment:
        if args.method == "random":
            return aligner.align_random_n(chapter, args.n, args.seed)
        if args.method == "diagonal":
            return aligner.align_diagonal_n(chapter, args.n)
        matrix = _scores_for(chapter, args.scorer, args)
        if args.method == "argmax":
            return aligner.align_argmax(chapter, matrix)
        return aligner.align_dp(chapter, matrix, allow_skip=args.allow_skip)

    results, errors = _run_chapters(one, corpus_dir, args.parallelism)
    _fail_on_errors(errors)
    for key in sorted(results):
        aligner.save_alignment(results[key], _out_path(output_dir, key, "align"))
    mean_score = sum(a.total_score for a in results.values()) / max(len(results), 1)
    _log("align_done", chapters=len(results), method=args.method,
         mean_total_score=mean_score)
    return 0


def cmd_eval(args) -> int:
    pred_dir = Path(args.pred)
    gold_dir = Path(args.gold)
    config = RunConfig("eval", str(pred_dir), str(gold_dir),
                       args.out, None, None, 0, 0, 1)
    _echo_config(config)
    pred_paths = sorted(pred_dir.glob("*/*.align"))
    if not pred_paths:
        raise SystemExit(f"error: no alignment files under {pred_dir}")
    by_method: dict[str, list[metrics.PairCounts]] = {}
    for path in pred_paths:
        pred = aligner.load_alignment(path)
        gold = corpus.load_gold(corpus.gold_path(gold_dir, pred.chapter_id))
        counts = metrics.eval_alignment(pred, gold)
        by_method.setdefault(pred.method_tag, []).append(counts)
    reports = {method: metrics.aggregate(counts) for method, counts in by_method.items()}
    print(metrics.report_table(reports))
    if args.out:
        metrics.save_report(reports, args.out)
    return 0


def cmd_tasks(args) -> int:
    corpus_dir = _corpus_dir(args)
    output_dir = Path(args.out)
    alignments_dir = Path(args.alignments)
    config = RunConfig("tasks", str(corpus_dir), None, str(output_dir), None, None,
                       0, args.seed, args.parallelism)
    _echo_config(config, kind=args.kind, alignments=str(alignments_dir),
                 tags=args.tags)
    if args.kind == "cloze":
        if not args.tags:
            raise SystemExit("error: --kind cloze requires --tags")
        tag_table = tasks.load_entity_tags(args.tags)

    def one(chapter):
        alignment = aligner.load_alignment(
            _out_path(alignments_dir, chapter.key, "align"))
        if args.kind == "cloze":
            return tasks.build_cloze(chapter, alignment, tag_table, args.seed)
        return tasks.build_summ(chapter, alignment, args.seed)

    results, errors = _run_chapters(one, corpus_dir, args.parallelism)
    _fail_on_errors(errors)
    n_items = 0
    for key in sorted(results):
        items = results[key]
        n_items += len(items)
        if args.kind == "cloze":
            tasks.save_cloze(items, _out_path(output_dir, key, "cloze"))
        else:
            tasks.save_summ(items, _out_path(output_dir, key, "summ"))
    _log("tasks_done", chapters=len(results), kind=args.kind, items=n_items)
    return 0


def cmd_baseline(args) -> int:
    corpus_dir = _corpus_dir(args)
    cloze_dir = Path(args.cloze)
    config = RunConfig("baseline", str(corpus_dir), None, args.out, None, None,
                       0, 0, args.parallelism)
    _echo_config(config, cloze=str(cloze_dir))

    def one(chapter):
        path = _out_path(cloze_dir, chapter.key, "cloze")
        questions = tasks.load_cloze(path)
        return [
            (q.id, tasks.cloze_heuristic_solve(q, chapter), q.answer_index,
             q.is_entity_question, tasks.answer_in_context(q, chapter))
            for q in questions
        ]

    results, errors = _run_chapters(one, corpus_dir, args.parallelism)
    _fail_on_errors(errors)
    rows = [row for key in sorted(results) for row in results[key]]
    if not rows:
        raise SystemExit("error: no questions found")
    predictions = [chosen for _, chosen, _, _, _ in rows]
    keys = [answer for _, _, answer, _, _ in rows]
    mask = [flag for _, _, _, flag, _ in rows]
    accuracy = metrics.eval_task_accuracy(predictions, keys, mask)

    def stratum_accuracy(in_context: bool) -> float | None:
        stratum = [flag and has_it == in_context for _, _, _, flag, has_it in rows]
        if not any(stratum):
            return None
        return metrics.eval_task_accuracy(predictions, keys, stratum)

    _log("baseline_done", questions=len(rows), evaluable=sum(mask), accuracy=accuracy,
         accuracy_answer_in_context=stratum_accuracy(True),
         accuracy_answer_absent=stratum_accuracy(False))
    if args.out:
        tasks.save_predictions([(qid, chosen) for qid, chosen, _, _, _ in rows], args.out)
    return 0


def _add_common(parser: argparse.ArgumentParser, *, corpus_arg: bool = True) -> None:
    if corpus_arg:
        parser.add_argument("--corpus", help=f"corpus root (default: ${CORPUS_ENV})")
    parser.add_argument("--parallelism", type=int, default=1,
                        help="worker threads over chapters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storyalign",
        description="Align chapter summaries to story text and build benchmark tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scores", help="write similarity score matrices")
    _add_common(p)
    p.add_argument("--scorer", choices=[s for s in SCORERS if s != "external"],
                   required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=5, help=argparse.SUPPRESS)
    p.add_argument("--embeddings", help="embedding table file (scorer=embed)")
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("align", help="compute alignments")
    _add_common(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--scorer", choices=SCORERS)
    p.add_argument("--scores", help="score-matrix directory (scorer=external)")
    p.add_argument("--embeddings", help="embedding table file (scorer=embed)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=5, help="window width for random/diagonal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-skip", action="store_true",
                   help="let the DP leave story paragraphs unassigned")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="score alignments against gold files")
    p.add_argument("--pred", required=True, help="alignment directory")
    p.add_argument("--gold", required=True, help="gold directory")
    p.add_argument("--out", help="machine-readable report file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tasks", help="build benchmark task files")
    _add_common(p)
    p.add_argument("--kind", choices=("cloze", "summ"), required=True)
    p.add_argument("--alignments", required=True, help="alignment directory")
    p.add_argument("--tags", help="entity tag file (kind=cloze)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tasks)

    p = sub.add_parser("baseline", help="run the heuristic Cloze baseline")
    _add_common(p)
    p.add_argument("--cloze", required=True, help="cloze task directory")
    p.add_argument("--out", help="prediction file")
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
