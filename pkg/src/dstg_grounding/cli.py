"""CLI interface with argparse command routing."""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_experiment_config, load_generator_config
from .dataset import dataset_hash, load_dataset, save_dataset, split_holdout
from .display import print_grounding_summary, print_report, print_study
from .errors import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, GroundingError, UsageError
from .experiments import STUDIES, case_truths, ground_dataset, results_by_case, write_study
from .export import export_cases_csv, load_predictions, save_predictions, save_report
from .featcache import FeatureCache
from .grounding import grounding_graphs
from .featurize import featurize_dataset
from .manifest import file_hash, make_manifest
from .metrics import SPLITS, match_and_score
from .report import emit_report
from .stats import show_stats
from .stgraph import dump_graph
from .synthdata import generate_video
from .trainer import load_checkpoint, prepare_graphs, save_checkpoint, train


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="dstg",
        description="Ground referring expressions in synthetic videos with decoupled spatial/temporal graphs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--json-errors", action="store_true", help="Write errors to stderr as JSON")

    subparsers = parser.add_subparsers(dest="command", required=True, help="Available commands")

    # gen command
    gen_parser = subparsers.add_parser("gen", help="Generate a synthetic dataset")
    gen_parser.add_argument("--out", type=Path, required=True, help="Output dataset (JSON lines)")
    gen_parser.add_argument("--num-videos", type=int, required=True, help="Number of videos")
    gen_parser.add_argument("--seed", type=int, help="Master seed (drawn at random when omitted)")
    gen_parser.add_argument("--config", type=Path, help="Generator config JSON")
    gen_parser.add_argument("--workers", type=int, default=1, help="Parallel worker processes (default: 1)")

    # stats command
    stats_parser = subparsers.add_parser("stats", help="Show dataset statistics")
    stats_parser.add_argument("--data", type=Path, required=True, help="Dataset file")

    # train command
    train_parser = subparsers.add_parser("train", help="Train a model")
    train_parser.add_argument("--data", type=Path, required=True, help="Dataset file")
    train_parser.add_argument("--config", type=Path, help="Experiment config JSON")
    train_parser.add_argument("--out", type=Path, required=True, help="Output checkpoint")
    train_parser.add_argument("--log", type=Path, help="Training log (JSON lines)")
    train_parser.add_argument("--seed", type=int, help="Training seed (drawn at random when omitted)")
    train_parser.add_argument("--holdout", type=int, help="Videos held out for evaluation (default: 20%%)")
    train_parser.add_argument("--feature-cache", type=Path, help="SQLite feature cache")

    # ground command
    ground_parser = subparsers.add_parser("ground", help="Predict tubes for every referring expression")
    ground_parser.add_argument("--data", type=Path, required=True, help="Dataset file")
    ground_parser.add_argument("--ckpt", type=Path, required=True, help="Checkpoint")
    ground_parser.add_argument("--out", type=Path, required=True, help="Output predictions (JSON lines)")
    ground_parser.add_argument("--dump-graph", type=Path, help="Directory for <video>.graph.json dumps")
    ground_parser.add_argument("--feature-cache", type=Path, help="SQLite feature cache")

    # eval command
    eval_parser = subparsers.add_parser("eval", help="Score predictions against ground truth")
    eval_parser.add_argument("--pred", type=Path, required=True, help="Predictions file")
    eval_parser.add_argument("--gt", type=Path, required=True, help="Dataset file with ground truth")
    eval_parser.add_argument("--split", choices=SPLITS, default="all", help="Case split (default: all)")
    eval_parser.add_argument("--out", type=Path, required=True, help="Output report JSON")
    eval_parser.add_argument("--export-csv", type=Path, help="Export per-case rows to CSV")
    eval_parser.add_argument("--columns", nargs="+", help="Columns to export (space-separated)")

    # ablate command
    ablate_parser = subparsers.add_parser("ablate", help="Run a training study")
    ablate_parser.add_argument("--data", type=Path, required=True, help="Dataset file")
    ablate_parser.add_argument("--out", type=Path, required=True, help="Output table JSON (markdown alongside)")
    ablate_parser.add_argument("--config", type=Path, help="Base experiment config JSON")
    ablate_parser.add_argument("--study", choices=sorted(STUDIES), default="modules", help="Study (default: modules)")
    ablate_parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2], help="Training seeds")
    ablate_parser.add_argument("--holdout", type=int, help="Videos held out for evaluation (default: 20%%)")

    # report command
    report_parser = subparsers.add_parser("report", help="Render a static grounding report")
    report_parser.add_argument("--pred", type=Path, required=True, help="Predictions file")
    report_parser.add_argument("--data", type=Path, required=True, help="Dataset file")
    report_parser.add_argument("--out", type=Path, required=True, help="Output directory")
    report_parser.add_argument("--workers", type=int, default=1, help="Parallel render threads (default: 1)")

    return parser


def _draw_seed(seed: int | None) -> int:
    return seed if seed is not None else secrets.randbits(31)


def video_seed(master: int, k: int) -> int:
    """Seed of the k-th video, derived from the master seed."""
    return int(np.random.SeedSequence([master, k]).generate_state(1)[0])


def _generate_one(config, master: int, k: int):
    return generate_video(config, video_seed(master, k), video_id=f"vid-{k:05d}")


def cmd_gen(args) -> int:
    if args.num_videos < 1:
        raise UsageError("--num-videos must be at least 1")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    config = load_generator_config(args.config)
    seed = _draw_seed(args.seed)

    print(f"\n[1/2] Generating {args.num_videos} videos (seed {seed})...")
    work = partial(_generate_one, config, seed)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            samples = list(pool.map(work, range(args.num_videos)))
    else:
        samples = [work(k) for k in range(args.num_videos)]

    print(f"[2/2] Writing {args.out}...")
    manifest = make_manifest("gen", config, seed=seed)
    save_dataset(args.out, samples, manifest)
    expressions = sum(len(s.expressions) for s in samples)
    print(f"\n✓ {len(samples)} videos, {expressions} expressions written to {args.out}\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    samples, _ = load_dataset(args.data)
    show_stats(samples)
    return EXIT_OK


def _features(samples, cfg: ExperimentConfig, cache_path: Path | None):
    if cache_path is None:
        return featurize_dataset(samples, cfg.features)
    with FeatureCache(cache_path, cfg.features) as cache:
        return featurize_dataset(samples, cfg.features, cache=cache)


def cmd_train(args) -> int:
    cfg = load_experiment_config(args.config)
    seed = _draw_seed(args.seed)
    cfg = replace(cfg, train=replace(cfg.train, seed=seed))

    print(f"\n[1/3] Loading dataset {args.data}...")
    samples, _ = load_dataset(args.data)
    train_samples, held_out = split_holdout(samples, args.holdout)
    print(f"   {len(train_samples)} training videos, {len(held_out)} held out")

    print("[2/3] Building graphs...")
    features = _features(train_samples, cfg, args.feature_cache)
    graphs = prepare_graphs(train_samples, cfg, features=features)

    print(f"[3/3] Training {cfg.train.steps} steps (seed {seed})...")
    manifest = make_manifest("train", cfg, dataset_hash=dataset_hash(samples), seed=seed)
    result = train(train_samples, cfg, log_path=args.log, graphs=graphs, manifest=manifest)
    save_checkpoint(args.out, result.checkpoint)

    if result.history:
        first, last = result.history[0], result.history[-1]
        print(f"\n   L_total {first['L_total']:.4f} -> {last['L_total']:.4f}")
    print(f"\n✓ Checkpoint written to {args.out}\n")
    return EXIT_OK


def cmd_ground(args) -> int:
    print(f"\n[1/3] Loading {args.ckpt} and {args.data}...")
    ckpt = load_checkpoint(args.ckpt)
    samples, _ = load_dataset(args.data)
    cfg = ckpt.config
    model = ckpt.build_model()

    print("[2/3] Building graphs...")
    features = _features([s for s in samples if s.all_regions()], cfg, args.feature_cache)
    graphs = grounding_graphs(samples, cfg, features)
    empty = [s.video_id for s, g in zip(samples, graphs) if g is None]
    if empty:
        print(f"   [WARN] {len(empty)} video(s) without detections: {', '.join(empty[:5])}")
    if args.dump_graph:
        built = [g for g in graphs if g is not None]
        for graph in built:
            dump_graph(graph, args.dump_graph)
        print(f"   {len(built)} graph(s) dumped to {args.dump_graph}")

    print("[3/3] Grounding...")
    results = ground_dataset(model, ckpt.vocab, samples, cfg, graphs)
    manifest = make_manifest(
        "ground",
        cfg,
        dataset_hash=dataset_hash(samples),
        checkpoint_hash=file_hash(args.ckpt),
        seed=cfg.train.seed,
    )
    save_predictions(args.out, results, manifest)
    print_grounding_summary(results[:20])
    print(f"✓ {len(results)} predictions written to {args.out}\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    results, pred_manifest = load_predictions(args.pred)
    samples, _ = load_dataset(args.gt)
    report = match_and_score(results_by_case(results), case_truths(samples), args.split)
    manifest = make_manifest(
        "eval",
        dataset_hash=dataset_hash(samples),
        checkpoint_hash=pred_manifest.checkpoint_hash if pred_manifest else None,
        seed=pred_manifest.seed if pred_manifest else None,
    )
    save_report(args.out, report, manifest)
    print_report(report)
    if args.export_csv:
        export_cases_csv(report.rows, args.export_csv, args.columns)
    print(f"✓ Report written to {args.out}\n")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = load_experiment_config(args.config)
    samples, _ = load_dataset(args.data)
    train_samples, eval_samples = split_holdout(samples, args.holdout)
    if not eval_samples:
        raise UsageError("ablate needs at least one held-out video (--holdout)")

    print(f"\nStudy '{args.study}': {len(train_samples)} training / {len(eval_samples)} held-out videos, "
          f"seeds {args.seeds}")
    rows = STUDIES[args.study](train_samples, eval_samples, cfg, seeds=tuple(args.seeds))
    manifest = make_manifest("ablate", cfg, dataset_hash=dataset_hash(samples), seed=args.seeds[0])
    json_path, md_path = write_study(args.out, args.study, rows, manifest)
    print_study(args.study, rows)
    print(f"✓ Table written to {json_path} and {md_path}\n")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    results, pred_manifest = load_predictions(args.pred)
    samples, _ = load_dataset(args.data)
    manifest = make_manifest(
        "report",
        dataset_hash=dataset_hash(samples),
        checkpoint_hash=pred_manifest.checkpoint_hash if pred_manifest else None,
        seed=pred_manifest.seed if pred_manifest else None,
    )
    emit_report(results, samples, args.out, manifest, workers=args.workers)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "stats": cmd_stats,
    "train": cmd_train,
    "ground": cmd_ground,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def _report_error(error: BaseException, exit_code: int, json_errors: bool):
    if json_errors:
        payload = {"error": type(error).__name__, "message": str(error), "exit_code": exit_code}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"Error: {error}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    """
    Main CLI entry point.

    Returns 0 on success, 1 on validation failures (bad files, invalid data
    or config) and 2 on usage errors.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as e:
        _report_error(e, EXIT_USAGE, json_errors)
        return EXIT_USAGE
    except GroundingError as e:
        _report_error(e, e.exit_code, json_errors)
        return e.exit_code
    except FileNotFoundError as e:
        _report_error(e, EXIT_VALIDATION, json_errors)
        return EXIT_VALIDATION
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
