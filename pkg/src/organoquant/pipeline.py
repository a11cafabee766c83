"""Batch orchestration: per-image analysis, then run-level reporting.

Per-image work is a pure function of (input file, config) and may run in
a process pool. Every output file is produced in the parent process from
results collected in input order, so the output tree does not depend on
the worker count.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .cells import average_precision, detect_cells, load_maps, normalize_intensities
from .cells.polygons import instances_from_json, instances_to_json
from .config import MANIFEST_FORMAT, PipelineConfig
from .contours import analyze_contours
from .imaging import ChannelImage
from .ingest import extract_channel, ingest_raster_fallback, parse_container
from .report import (
    GroupRow,
    Metric,
    emit_barchart,
    emit_table,
    summarize,
)

__all__ = [
    "PipelineError",
    "ImageJob",
    "load_channel",
    "process_image",
    "build_report",
    "run_pipeline",
    "RunReport",
]

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class ImageJob:
    order: int
    group: str
    image_id: str
    source: object  # Path or {marker: Path}

    @property
    def stem(self) -> str:
        if isinstance(self.source, Mapping):
            return self.image_id
        return Path(self.source).stem

    def source_json(self):
        if isinstance(self.source, Mapping):
            return {m: str(p) for m, p in self.source.items()}
        return str(self.source)


def is_graymap(path) -> bool:
    return Path(path).suffix.lower() in (".pgm", ".pnm")


def load_channel(source, marker: str, mapping: Mapping[str, int]) -> ChannelImage:
    """Read one marker plane from a container, a graymap or a marker->graymap map."""
    if isinstance(source, Mapping):
        if marker not in source:
            raise KeyError(f"no graymap for marker {marker!r}")
        return ingest_raster_fallback(Path(source[marker]).read_bytes(), marker)
    if is_graymap(source):
        return ingest_raster_fallback(Path(source).read_bytes(), marker)
    data = Path(source).read_bytes()
    return extract_channel(parse_container(data), data, marker, mapping)


def jobs_from_config(cfg: PipelineConfig) -> list[ImageJob]:
    jobs = []
    for g in cfg.groups:
        for i, src in enumerate(g.files, 1):
            jobs.append(ImageJob(len(jobs), g.name, f"{g.name}{i}", src))
    return jobs


def _json_float(v):
    if v is None:
        return None
    return "inf" if math.isinf(v) else v


def process_image(job: ImageJob, cfg: PipelineConfig) -> dict:
    """Analyse one image. Failures come back as a ``status: failed`` record."""
    base = {
        "order": job.order,
        "group": job.group,
        "image_id": job.image_id,
        "source": job.source_json(),
    }
    try:
        ncad = load_channel(job.source, cfg.contour_marker, cfg.marker_mapping)
        pax6 = load_channel(job.source, cfg.cell_marker, cfg.marker_mapping)
        cstats = analyze_contours(ncad, cfg.contour_params())

        maps = None
        if cfg.maps_source != "synthesize":
            maps = load_maps((Path(cfg.maps_source) / f"{job.stem}.orgqmap").read_bytes())
        instances, cell_stats, cell_diag = detect_cells(pax6, cfg.cell_params(), maps)

        ap = None
        if cfg.truth_dir is not None:
            truth_path = Path(cfg.truth_dir) / f"{job.stem}.truth.json"
            if truth_path.exists():
                truth, _ = instances_from_json(json.loads(truth_path.read_text()))
                r = average_precision(instances, truth, cfg.ap_tau)
                ap = {"tp": r.tp, "fn": r.fn, "fp": r.fp, "ap": r.ap, "tau": cfg.ap_tau}
    except Exception as exc:  # recorded per image; the run carries on
        log.warning("image %s failed: %s", job.image_id, exc)
        return {**base, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}

    return {
        **base,
        "status": "ok",
        "contours": {
            "total": cstats.total,
            "n1": cstats.n1,
            "n2": cstats.n2,
            "theta": cstats.theta,
            "cr": _json_float(cstats.cr),
            "diagnostics": cstats.diagnostics,
        },
        "cells": {
            "cell_count": len(instances),
            "per_cell_means": list(cell_stats.per_cell_means) if cell_stats else [],
            "i_avg": cell_stats.i_avg if cell_stats else None,
            "mode": cfg.intensity_mode,
            "diagnostics": cell_diag,
        },
        "ap": ap,
        "instances": instances_to_json(instances, pax6.pixels.shape),
    }


def _dumps(doc) -> bytes:
    return (json.dumps(doc, indent=2, allow_nan=False) + "\n").encode("utf-8")


def _normalize(results: list[dict], scope: str) -> dict[int, list[float]]:
    """Rescale per-cell means to [0, 100] over the run or within each group."""
    pools: dict[str, list[dict]] = {}
    for r in results:
        if r["status"] == "ok" and r["cells"]["per_cell_means"]:
            key = "run" if scope == "run" else r["group"]
            pools.setdefault(key, []).append(r)
    out = {}
    for members in pools.values():
        values = [v for r in members for v in r["cells"]["per_cell_means"]]
        scaled = normalize_intensities(values)
        pos = 0
        for r in members:
            n = len(r["cells"]["per_cell_means"])
            out[r["order"]] = scaled[pos:pos + n]
            pos += n
    return out


def build_report(results: list[dict], normalization_scope: str = "run", ddof: int = 1) -> dict[str, bytes]:
    """All run-level artifacts (tables, summaries, charts, per-image records).

    Returns relative path -> file bytes.
    """
    results = sorted(results, key=lambda r: r["order"])
    normalized = _normalize(results, normalization_scope)
    files: dict[str, bytes] = {}
    rows = []
    for r in results:
        if r["status"] != "ok":
            continue
        norm = normalized.get(r["order"], [])
        avg = math.fsum(norm) / len(norm) if norm else None
        record = {k: v for k, v in r.items() if k != "instances"}
        record["cells"] = {**r["cells"], "normalized": norm, "avg_intensity": avg}
        files[f"images/{r['image_id']}.json"] = _dumps(record)
        files[f"images/{r['image_id']}.instances.json"] = _dumps(r["instances"])
        cr = r["contours"]["cr"]
        rows.append(
            GroupRow(
                group=r["group"],
                image_id=r["image_id"],
                contour_no=r["contours"]["total"],
                cr=math.inf if cr == "inf" else cr,
                cell_no=r["cells"]["cell_count"],
                avg_intensity=avg,
            )
        )
    meta = {
        "std": "sample" if ddof == 1 else "population",
        "ddof": ddof,
        "normalization_scope": normalization_scope,
        "undefined_cr": "inf",
    }
    files["table.csv"] = emit_table(rows, "csv")
    files["table.json"] = emit_table(rows, "json", metadata=meta)
    summaries = summarize(rows, tuple(Metric), ddof) if rows else []
    files["summary.json"] = _dumps(
        {"metadata": meta, "summaries": [s.to_json() for s in summaries]}
    )
    for metric in Metric:
        group_summaries = [s for s in summaries if s.metric is metric][:8]
        if group_summaries:
            files[f"charts/{metric.value}.svg"] = emit_barchart(group_summaries)
    return files


@dataclass(frozen=True)
class RunReport:
    output_dir: Path
    rows: int
    failures: list
    summaries: int
    files: tuple[str, ...]


def _run_jobs(jobs: list[ImageJob], cfg: PipelineConfig, workers: int) -> list[dict]:
    if workers <= 1 or len(jobs) <= 1:
        return [process_image(j, cfg) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(process_image, jobs, [cfg] * len(jobs)))


def run_pipeline(cfg: PipelineConfig, output_dir=None, jobs: int = 1) -> RunReport:
    out = Path(output_dir or cfg.output_dir or "organoquant-out")
    image_jobs = jobs_from_config(cfg)
    log.info("processing %d images with %d worker(s)", len(image_jobs), jobs)
    results = _run_jobs(image_jobs, cfg, jobs)
    failures = [
        {"image_id": r["image_id"], "source": r["source"], "error": r["error"]}
        for r in results
        if r["status"] != "ok"
    ]
    if len(failures) == len(results):
        raise PipelineError(f"all {len(results)} images failed")

    files = build_report(results, cfg.normalization_scope, cfg.std_ddof)
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "config": cfg.to_json(),
        "images": [
            {
                "image_id": r["image_id"],
                "group": r["group"],
                "source": r["source"],
                "status": r["status"],
            }
            for r in results
        ],
        "failures": failures,
        "outputs": {
            name: hashlib.sha256(data).hexdigest() for name, data in sorted(files.items())
        },
    }
    files["manifest.json"] = _dumps(manifest)

    for name in sorted(files):
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(files[name])
    summaries = len(json.loads(files["summary.json"])["summaries"])
    return RunReport(out, len(results) - len(failures), failures, summaries, tuple(sorted(files)))
