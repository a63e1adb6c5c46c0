"""Command-line interface.

    foreseen extract --dataset DIR [--recordings 0,1,2] [--config cfg.json]
                     --out DIR [--format table,csv,json] [--jobs N]
                     [--all-vehicle-egos]
    foreseen synth   --scene scene.json --out DIR [--finite-difference]
                     [--prefix NN]
    foreseen audit   --report report.json [--dataset DIR]

Exit codes: 0 success; 1 audit mismatch; 2 no usable recordings;
3 config/scene parse failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .detection import ConfigError, DetectorConfig
from .ingest import write_levelx
from .pipeline import PipelineError, audit_report, run_extraction
from .synthetic import SceneError, generate_synthetic, load_scene

EXIT_OK = 0
EXIT_AUDIT_FAILED = 1
EXIT_NO_DATA = 2
EXIT_BAD_CONFIG = 3

ALL_VEHICLE_CLASSES = ("car", "van", "bus", "truck", "truck_bus")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foreseen",
        description=(
            "Mine driving scenarios from drone-recorded trajectories and "
            "extract per-class kinematic behavior bounds."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"foreseen {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ext = sub.add_parser("extract", help="run the extraction pipeline")
    ext.add_argument("--dataset", required=True, help="directory with CSV triples")
    ext.add_argument(
        "--recordings",
        help="comma-separated recording ids (default: every triple found)",
    )
    ext.add_argument("--config", help="DetectorConfig JSON file")
    ext.add_argument("--out", required=True, help="output directory")
    ext.add_argument(
        "--format",
        default="table,csv,json",
        help="comma-separated subset of table,csv,json",
    )
    ext.add_argument("--jobs", type=int, default=1, help="parallel workers")
    ext.add_argument(
        "--all-vehicle-egos",
        action="store_true",
        help="iterate every vehicle-group track as ego, not just cars",
    )

    syn = sub.add_parser("synth", help="generate a synthetic recording triple")
    syn.add_argument("--scene", required=True, help="scene JSON file")
    syn.add_argument("--out", required=True, help="output directory")
    syn.add_argument(
        "--finite-difference",
        action="store_true",
        help="store finite-difference velocity/acceleration instead of analytic",
    )
    syn.add_argument("--prefix", help="file prefix (default: recording id, 2 digits)")

    aud = sub.add_parser("audit", help="re-derive every bound of a report")
    aud.add_argument("--report", required=True, help="report.json produced by extract")
    aud.add_argument("--dataset", help="directory to locate recordings in")
    return parser


def _cmd_extract(args) -> int:
    try:
        config = (
            DetectorConfig.from_json(args.config) if args.config else DetectorConfig()
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if args.all_vehicle_egos:
        config = replace(config, ego_raw_classes=ALL_VEHICLE_CLASSES)

    recording_ids = None
    if args.recordings:
        try:
            recording_ids = [int(x) for x in args.recordings.split(",") if x.strip()]
        except ValueError:
            print(f"error: bad --recordings list {args.recordings!r}", file=sys.stderr)
            return EXIT_BAD_CONFIG
    formats = tuple(x.strip() for x in args.format.split(",") if x.strip())
    unknown = [f for f in formats if f not in ("table", "csv", "json")]
    if unknown:
        print(f"error: unknown formats {unknown}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    try:
        result = run_extraction(
            args.dataset,
            args.out,
            recording_ids=recording_ids,
            config=config,
            formats=formats,
            jobs=args.jobs,
        )
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    counts = result.manifest["occurrences_total"]
    print(
        "processed recordings "
        + ",".join(str(r) for r in result.manifest["recordings"])
        + "; occurrences "
        + " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    )
    for name, path in sorted(result.artifacts.items()):
        print(f"  {name}: {path}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        scene = load_scene(args.scene)
        recording = generate_synthetic(
            scene,
            derivatives="finite_difference" if args.finite_difference else None,
        )
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    prefix = write_levelx(recording, args.out, args.prefix)
    print(
        f"wrote recording {recording.recording_id} "
        f"({len(recording.tracks)} tracks) to {prefix}_*.csv"
    )
    return EXIT_OK


def _cmd_audit(args) -> int:
    ok, messages = audit_report(args.report, args.dataset)
    for line in messages:
        print(line)
    if not ok:
        print("audit FAILED")
        return EXIT_AUDIT_FAILED
    print("audit OK")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "extract":
        return _cmd_extract(args)
    if args.command == "synth":
        return _cmd_synth(args)
    return _cmd_audit(args)


if __name__ == "__main__":
    sys.exit(main())
