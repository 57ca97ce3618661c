"""Command-line entry points: generate, analyze, calibrate, assign-materials.

Exit codes: 0 success, 1 fatal config/IO error, 2 when any per-pair job
failed.  ROOMIR_OUTPUT_DIR and ROOMIR_JOBS override the config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import dataset_stats
from .materials import (
    load_embedding_table,
    load_material_db,
    assignment_distribution,
    sample_assignment,
)
from .pipeline import PipelineConfig, cached_calibration, read_manifest, run_pipeline
from .scene import load_mesh


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roomir", description="Hybrid geometric-wave room IR pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run the dataset generation pipeline")
    gen.add_argument("--config", required=True)
    gen.add_argument("--jobs", type=int, default=None)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--dry-run", action="store_true")

    ana = sub.add_parser("analyze", help="write statistics for a manifest")
    ana.add_argument("--manifest", required=True)
    ana.add_argument("--report", required=True)

    cal = sub.add_parser("calibrate", help="run free-field calibration only")
    cal.add_argument("--config", required=True)

    mat = sub.add_parser("assign-materials", help="sample materials for scene labels")
    mat.add_argument("--scene", required=True)
    mat.add_argument("--db", required=True)
    mat.add_argument("--embeddings", default=None)
    mat.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config)
    jobs = getattr(args, "jobs", None)
    if jobs is None and os.environ.get("ROOMIR_JOBS"):
        jobs = int(os.environ["ROOMIR_JOBS"])
    if jobs is not None:
        cfg.max_jobs = jobs
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg.rng_seed = seed
    if os.environ.get("ROOMIR_OUTPUT_DIR"):
        cfg.output_dir = os.environ["ROOMIR_OUTPUT_DIR"]
    return cfg


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    entries = run_pipeline(cfg, dry_run=args.dry_run)
    failed = sum(1 for e in entries if e.error)
    print(f"{len(entries)} pairs, {failed} failed -> {cfg.output_dir}")
    return 2 if failed else 0


def cmd_analyze(args) -> int:
    entries = [e for e in read_manifest(args.manifest) if e.error is None]
    usable = [e for e in entries if e.rt60 is not None and e.scene_volume is not None]
    if not usable:
        print("manifest has no completed entries with RT60", file=sys.stderr)
        return 1
    report_dir = Path(args.report)
    report_dir.mkdir(parents=True, exist_ok=True)
    stats = dataset_stats(
        [
            {
                "source": e.source,
                "receiver": e.receiver,
                "scene_volume": e.scene_volume,
                "rt60": e.rt60,
            }
            for e in usable
        ]
    )
    out = report_dir / "dataset_stats.csv"
    stats.write_csv(out)
    print(f"wrote {out}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    result = cached_calibration(cfg)
    print(
        json.dumps(
            {
                "eta_w": result.eta_w,
                "eta_g": result.eta_g,
                "eta_combined": result.eta_combined,
                "mean_error_db": result.mean_error_db,
                "max_error_db": result.max_error_db,
            },
            indent=2,
        )
    )
    return 0


def cmd_assign_materials(args) -> int:
    mesh = load_mesh(args.scene)
    db = load_material_db(args.db)
    table = load_embedding_table(args.embeddings) if args.embeddings else None
    assignment = {}
    for g, label in enumerate(mesh.object_labels):
        dist = assignment_distribution(label, db, table)
        idx = sample_assignment(dist, args.seed + g)
        assignment[label] = db[idx].name
    print(json.dumps(assignment, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "analyze": cmd_analyze,
        "calibrate": cmd_calibrate,
        "assign-materials": cmd_assign_materials,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
