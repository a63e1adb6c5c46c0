"""End-to-end extraction pipeline and report audit.

run_extraction: for every requested recording, iterate the eligible car
egos, run the four scenario detectors, compute each subject's body-frame
kinematics over the occurrence, and fold everything into one
BoundAccumulator. Reports (aligned table, CSV, JSON with provenance) plus a
run manifest are written to the output directory.

Work is sharded over (recording, ego-chunk) units; shard accumulators merge
associatively and commutatively, so the report content is identical for any
worker count.

audit_report: recompute every reported bound from its provenance frame and
confirm exact equality; the paper trail either closes or the run is flagged.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .bounds import (
    APPLICABLE,
    BoundAccumulator,
    BoundsReport,
    Provenance,
    VariableId,
    accumulate_occurrence,
    finalize,
    merge_accumulators,
    render_csv,
    render_table,
    report_to_dict,
)
from .detection import (
    DetectorConfig,
    Scenario,
    ScenarioOccurrence,
    detect_all,
    eligible_egos,
)
from .ingest import dataset_prefixes, load_recording, triple_paths
from .kinematics import (
    KinematicSample,
    fold_heading_difference,
    lateral_fluctuation,
    track_arrays,
)
from .model import Recording, Track


class PipelineError(RuntimeError):
    pass


class AuditMismatch(RuntimeError):
    pass


@dataclass
class RunResult:
    report: BoundsReport
    report_dict: dict
    manifest: dict
    artifacts: Dict[str, Path]


class _SampleFactory:
    """Builds occurrence-sliced KinematicSample lists, caching the
    reference-independent per-track arrays."""

    def __init__(self, recording: Recording, config: DetectorConfig):
        self.recording = recording
        self.config = config
        self._arrays: Dict[int, dict] = {}

    def _track_arrays(self, track: Track) -> dict:
        cached = self._arrays.get(track.track_id)
        if cached is None:
            cached = track_arrays(
                track,
                self.recording.frame_rate,
                self.config.smoothing_window,
                self.config.v_eps,
                self.config.a_eps,
            )
            self._arrays[track.track_id] = cached
        return cached

    def samples(self, occ: ScenarioOccurrence) -> List[KinematicSample]:
        track = self.recording.tracks[occ.subject_id]
        arrays = self._track_arrays(track)
        h = fold_heading_difference(track.headings, occ.reference_heading)
        i0 = track.index_of(occ.frame_start)
        i1 = track.index_of(occ.frame_end)
        out = []
        for i in range(i0, i1 + 1):
            out.append(
                KinematicSample(
                    frame=int(track.frames[i]),
                    v_lon=float(arrays["v_lon"][i]),
                    v_lat=float(arrays["v_lat"][i]),
                    a_lon=float(arrays["a_lon"][i]),
                    a_lat=float(arrays["a_lat"][i]),
                    beta_lon=float(arrays["beta_lon"][i]),
                    beta_lat=float(arrays["beta_lat"][i]),
                    h=float(h[i]),
                    h_rate=float(arrays["h_rate"][i]),
                    speed=float(arrays["speed"][i]),
                )
            )
        return out

    def occurrence_lambda(self, occ: ScenarioOccurrence) -> Optional[Tuple[float, int]]:
        if VariableId.LAMBDA_MAX not in APPLICABLE[occ.scenario]:
            return None
        track = self.recording.tracks[occ.subject_id]
        i0 = track.index_of(occ.frame_start)
        i1 = track.index_of(occ.frame_end)
        positions = track.positions[i0 : i1 + 1]
        speeds = track.speeds()[i0 : i1 + 1]
        fluct = lateral_fluctuation(positions, speeds, self.config.lambda_v_min)
        if fluct is None:
            return None
        gated_frames = track.frames[i0 : i1 + 1][speeds >= self.config.lambda_v_min]
        return float(fluct.lambda_max), int(gated_frames[fluct.max_index])


def _new_accumulator(config: DetectorConfig) -> BoundAccumulator:
    return BoundAccumulator(
        percentile=config.percentile,
        beta_min_per_occurrence=config.beta_min_per_occurrence,
        v_eps=config.v_eps,
    )


def process_egos(
    recording: Recording, ego_ids: Sequence[int], config: DetectorConfig
) -> Tuple[BoundAccumulator, Dict[str, int]]:
    """Detect and accumulate all scenarios for the given egos of one recording."""
    acc = _new_accumulator(config)
    counts = {s.value: 0 for s in Scenario}
    factory = _SampleFactory(recording, config)
    for ego_id in sorted(ego_ids):
        for occ in detect_all(recording, ego_id, config):
            samples = factory.samples(occ)
            lam = factory.occurrence_lambda(occ)
            accumulate_occurrence(acc, occ, samples, lam)
            counts[occ.scenario.value] += 1
    return acc, counts


@lru_cache(maxsize=4)
def _load_recording_cached(
    tracks: str, tracks_meta: str, recording_meta: str, min_track_frames: int
) -> Recording:
    recording, _ = load_recording(
        tracks, tracks_meta, recording_meta, min_track_frames=min_track_frames
    )
    return recording


def _worker_task(args) -> Tuple[BoundAccumulator, Dict[str, int]]:
    paths, ego_ids, config_data = args
    config = DetectorConfig.from_dict(config_data)
    recording = _load_recording_cached(*paths, config.min_track_frames)
    return process_egos(recording, ego_ids, config)


def _ego_chunks(egos: List[int], jobs: int) -> List[List[int]]:
    n = min(max(1, jobs), len(egos)) if egos else 0
    return [egos[i::n] for i in range(n)] if n else []


def run_extraction(
    dataset_dir,
    out_dir,
    recording_ids: Optional[Sequence[int]] = None,
    config: Optional[DetectorConfig] = None,
    formats: Sequence[str] = ("table", "csv", "json"),
    jobs: int = 1,
) -> RunResult:
    """Mine all requested recordings and write report artifacts.

    Raises PipelineError when no recording triples match the request.
    """
    config = config or DetectorConfig()
    started = time.time()
    prefixes = dataset_prefixes(dataset_dir)
    if recording_ids is not None:
        prefixes = {rid: p for rid, p in prefixes.items() if rid in set(recording_ids)}
    if not prefixes:
        raise PipelineError(f"no recording triples found in {dataset_dir}")

    total = _new_accumulator(config)
    per_recording_counts: Dict[str, Dict[str, int]] = {}
    ingest_notes: Dict[str, dict] = {}
    sources: Dict[str, dict] = {}

    for rec_id in sorted(prefixes):
        tracks_p, meta_p, rec_p = triple_paths(prefixes[rec_id])
        recording, ingest_report = load_recording(
            tracks_p, meta_p, rec_p, min_track_frames=config.min_track_frames
        )
        sources[str(rec_id)] = {
            "tracks": str(tracks_p),
            "tracks_meta": str(meta_p),
            "recording_meta": str(rec_p),
        }
        ingest_notes[str(rec_id)] = ingest_report.as_dict()

        egos = eligible_egos(recording, config)
        chunks = _ego_chunks(egos, jobs)
        counts = {s.value: 0 for s in Scenario}
        if jobs <= 1 or len(chunks) <= 1:
            for chunk in chunks:
                acc, chunk_counts = process_egos(recording, chunk, config)
                total = merge_accumulators(total, acc)
                for k, v in chunk_counts.items():
                    counts[k] += v
        else:
            tasks = [
                ((str(tracks_p), str(meta_p), str(rec_p)), chunk, config.to_dict())
                for chunk in chunks
            ]
            with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
                for acc, chunk_counts in pool.map(_worker_task, tasks):
                    total = merge_accumulators(total, acc)
                    for k, v in chunk_counts.items():
                        counts[k] += v
        per_recording_counts[str(rec_id)] = counts

    report = finalize(total)
    report_dict = {
        "tool": "foreseen",
        "version": __version__,
        "config": config.to_dict(),
        "dataset": {
            "recordings": sorted(prefixes),
            "sources": sources,
        },
        "results": report_to_dict(report),
    }

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: Dict[str, Path] = {}
    if "table" in formats:
        artifacts["table"] = out / "report.txt"
        artifacts["table"].write_text(
            render_table(report, config.to_dict()), encoding="utf-8"
        )
    if "csv" in formats:
        artifacts["csv"] = out / "report.csv"
        artifacts["csv"].write_text(render_csv(report), encoding="utf-8")
    if "json" in formats:
        artifacts["json"] = out / "report.json"
        artifacts["json"].write_text(
            json.dumps(report_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    manifest = {
        "tool": "foreseen",
        "version": __version__,
        "dataset_dir": str(dataset_dir),
        "recordings": sorted(prefixes),
        "config": config.to_dict(),
        "occurrences_by_recording": per_recording_counts,
        "occurrences_total": {
            s.value: sum(c[s.value] for c in per_recording_counts.values())
            for s in Scenario
        },
        "accumulator_cases": total.total_cases(),
        "ingest": ingest_notes,
        "jobs": jobs,
        "wall_clock_seconds": time.time() - started,
    }
    artifacts["manifest"] = out / "manifest.json"
    artifacts["manifest"].write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return RunResult(
        report=report, report_dict=report_dict, manifest=manifest, artifacts=artifacts
    )


# --- audit -------------------------------------------------------------------

def _recompute_value(
    recording: Recording,
    var: VariableId,
    prov: Provenance,
    config: DetectorConfig,
) -> float:
    track = recording.tracks.get(prov.subject_id)
    if track is None:
        raise AuditMismatch(
            f"recording {prov.recording_id} has no track {prov.subject_id}"
        )
    arrays = track_arrays(
        track,
        recording.frame_rate,
        config.smoothing_window,
        config.v_eps,
        config.a_eps,
    )
    if var is VariableId.LAMBDA_MAX:
        i0 = track.index_of(prov.frame_start)
        i1 = track.index_of(prov.frame_end)
        fluct = lateral_fluctuation(
            track.positions[i0 : i1 + 1],
            track.speeds()[i0 : i1 + 1],
            config.lambda_v_min,
        )
        if fluct is None:
            raise AuditMismatch("no lateral fluctuation derivable at provenance")
        return float(fluct.lambda_max)
    i = track.index_of(prov.frame)
    if var is VariableId.V_LON_MAX:
        return float(arrays["v_lon"][i])
    if var is VariableId.V_LAT_MAX:
        return float(abs(arrays["v_lat"][i]))
    if var is VariableId.A_LON_MAX:
        return float(abs(arrays["a_lon"][i]))
    if var is VariableId.A_LAT_MAX:
        return float(abs(arrays["a_lat"][i]))
    if var is VariableId.B_LON_MAX or var is VariableId.B_LON_MIN:
        return float(arrays["beta_lon"][i])
    if var is VariableId.B_LAT_MIN:
        return float(arrays["beta_lat"][i])
    if var is VariableId.H_MAX:
        return float(
            fold_heading_difference(track.headings[i], prov.reference_heading)
        )
    if var is VariableId.H_RATE_MAX:
        return float(abs(arrays["h_rate"][i]))
    raise AuditMismatch(f"unknown variable {var}")


def audit_report(report_path, dataset_dir=None) -> Tuple[bool, List[str]]:
    """Re-derive every bound from its provenance; returns (ok, messages).

    Bounds must reproduce exactly (same code path, same floats). When
    `dataset_dir` is given, recordings are located there by id; otherwise the
    source paths embedded in the report are used.
    """
    path = Path(report_path)
    if not path.exists():
        return False, [f"report not found: {path}"]
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        return False, [f"report is not valid JSON: {exc}"]

    try:
        config = DetectorConfig.from_dict(doc["config"])
        sources = doc["dataset"]["sources"]
        scenarios = doc["results"]["scenarios"]
    except (KeyError, TypeError) as exc:
        return False, [f"report lacks required structure: {exc}"]

    overrides = dataset_prefixes(dataset_dir) if dataset_dir else {}
    recordings: Dict[int, Recording] = {}
    messages: List[str] = []
    checked = 0

    def get_recording(rec_id: int) -> Optional[Recording]:
        if rec_id in recordings:
            return recordings[rec_id]
        if rec_id in overrides:
            paths = triple_paths(overrides[rec_id])
        else:
            src = sources.get(str(rec_id))
            if src is None:
                messages.append(f"recording {rec_id}: no source paths in report")
                return None
            paths = (src["tracks"], src["tracks_meta"], src["recording_meta"])
        try:
            recording, _ = load_recording(
                *paths, min_track_frames=config.min_track_frames
            )
        except Exception as exc:
            messages.append(f"recording {rec_id}: cannot load ({exc})")
            return None
        recordings[rec_id] = recording
        return recording

    for scenario_name, classes in sorted(scenarios.items()):
        for class_name, entry in sorted(classes.items()):
            for var_name, bound in sorted(entry["bounds"].items()):
                if bound is None or bound.get("provenance") is None:
                    continue
                var = VariableId(var_name)
                prov = Provenance.from_dict(bound["provenance"])
                recording = get_recording(prov.recording_id)
                if recording is None:
                    continue
                try:
                    actual = _recompute_value(recording, var, prov, config)
                except (AuditMismatch, ValueError) as exc:
                    # corrupted provenance (e.g. frame out of range) is an
                    # audit failure, not a crash
                    messages.append(
                        f"{scenario_name}/{class_name}/{var_name}: {exc}"
                    )
                    continue
                checked += 1
                if actual != bound["value"]:
                    messages.append(
                        f"{scenario_name}/{class_name}/{var_name}: reported "
                        f"{bound['value']!r} but provenance frame yields {actual!r}"
                    )
    ok = not messages
    messages.append(f"audited {checked} bounds")
    return ok, messages
