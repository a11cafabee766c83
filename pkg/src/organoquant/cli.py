"""Command-line entry point: ``organoquant <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .cells import average_precision, detect_cells, load_maps
from .cells.polygons import instances_from_json, instances_to_json
from .config import MANIFEST_FORMAT, ConfigError, PipelineConfig, parse_config
from .contours import analyze_contours
from .ingest import CziError, PgmError, parse_container, write_pgm
from .pipeline import PipelineError, build_report, load_channel, run_pipeline

log = logging.getLogger("organoquant")


def _setup_logging():
    level = os.environ.get("ORGANOQUANT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _print_json(doc):
    print(json.dumps(doc, indent=2, allow_nan=False))


def _load_config(path) -> PipelineConfig:
    p = Path(path)
    return parse_config(p.read_bytes(), base_dir=p.parent)


def _single_config(args) -> PipelineConfig:
    """Config for single-file subcommands: from --config, else defaults."""
    if args.config:
        cfg = _load_config(args.config)
    else:
        cfg = PipelineConfig(groups=())
    if getattr(args, "mapping", None):
        mapping = {}
        for item in args.mapping.split(","):
            marker, _, idx = item.partition("=")
            mapping[marker.strip()] = int(idx)
        cfg = PipelineConfig(**{**cfg.__dict__, "marker_mapping": mapping})
    return cfg


def _write_or_print(doc, output, name):
    if output:
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")
    else:
        _print_json(doc)


def cmd_inspect(args):
    data = Path(args.file).read_bytes()
    idx = parse_container(data)
    _print_json(
        {
            "file_version": list(idx.file_version),
            "directory_position": idx.directory_position,
            "metadata_position": idx.metadata_position,
            "segments": [
                {"id": s.segment_id, "raw_id": s.raw_id.decode("ascii", "replace"),
                 "offset": s.offset, "allocated_size": s.allocated_size, "used_size": s.used_size}
                for s in idx.segments
            ],
            "subblocks": [
                {"channel": sb.channel_index, "pixel_type": sb.pixel_type,
                 "width": sb.width, "height": sb.height,
                 "dims": [[d.dimension, d.start, d.size] for d in sb.dims],
                 "data_offset": sb.data_offset, "data_size": sb.data_size}
                for sb in idx.subblocks
            ],
        }
    )
    return 0


def cmd_extract(args):
    cfg = _single_config(args)
    markers = args.marker or list(cfg.marker_mapping)
    if not markers:
        raise ConfigError("no markers: pass --marker or a mapping")
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.file).stem
    for m in markers:
        img = load_channel(Path(args.file), m, cfg.marker_mapping)
        target = out / f"{stem}_{m}.pgm"
        target.write_bytes(write_pgm(img))
        print(target)
    return 0


def cmd_contours(args):
    cfg = _single_config(args)
    img = load_channel(Path(args.file), args.marker or cfg.contour_marker, cfg.marker_mapping)
    st = analyze_contours(img, cfg.contour_params())
    doc = {
        "file": str(args.file),
        "total": st.total,
        "n1": st.n1,
        "n2": st.n2,
        "theta": st.theta,
        "cr": "inf" if not st.cr_defined else st.cr,
        "diagnostics": st.diagnostics,
    }
    _write_or_print(doc, args.output, f"{Path(args.file).stem}.contours.json")
    return 0


def cmd_cells(args):
    cfg = _single_config(args)
    img = load_channel(Path(args.file), args.marker or cfg.cell_marker, cfg.marker_mapping)
    maps = load_maps(Path(args.maps).read_bytes()) if args.maps else None
    instances, stats, diag = detect_cells(img, cfg.cell_params(), maps)
    doc = instances_to_json(instances, img.pixels.shape)
    doc["summary"] = {
        "cell_count": len(instances),
        "i_avg": stats.i_avg if stats else None,
        "diagnostics": diag,
    }
    if args.output:
        _write_or_print(doc, args.output, f"{Path(args.file).stem}.instances.json")
    else:
        _print_json(doc["summary"])
    return 0


def cmd_eval(args):
    pred, pshape = instances_from_json(json.loads(Path(args.pred).read_text()))
    truth, tshape = instances_from_json(json.loads(Path(args.truth).read_text()))
    if pshape != tshape:
        raise ConfigError(f"image sizes differ: {pshape} vs {tshape}")
    r = average_precision(pred, truth, args.tau)
    _print_json({"tp": r.tp, "fn": r.fn, "fp": r.fp, "ap": r.ap, "tau": args.tau})
    return 0


def cmd_report(args):
    src = Path(args.input)
    images = src / "images" if (src / "images").is_dir() else src
    results = []
    for p in sorted(images.glob("*.json")):
        if p.name.endswith(".instances.json"):
            continue
        rec = json.loads(p.read_text())
        inst = p.with_name(p.name[: -len(".json")] + ".instances.json")
        rec["instances"] = json.loads(inst.read_text()) if inst.exists() else {
            "format": "organoquant-instances", "version": 1, "height": 0, "width": 0, "instances": [],
        }
        rec["cells"] = {k: v for k, v in rec["cells"].items() if k not in ("normalized", "avg_intensity")}
        results.append(rec)
    if not results:
        raise PipelineError(f"no per-image results under {images}")
    scope, ddof = args.scope, args.ddof
    manifest = src / "manifest.json"
    if manifest.exists():
        cfg = json.loads(manifest.read_text())
        if cfg.get("format") == MANIFEST_FORMAT:
            scope = scope or cfg["config"]["normalization_scope"]
            ddof = cfg["config"]["std_ddof"] if ddof is None else ddof
    files = build_report(results, scope or "run", 1 if ddof is None else ddof)
    out = Path(args.output or src)
    for name in sorted(files):
        if name.startswith("images/"):
            continue
        (out / name).parent.mkdir(parents=True, exist_ok=True)
        (out / name).write_bytes(files[name])
        print(out / name)
    return 0


def cmd_run(args):
    if not args.config:
        raise ConfigError("run needs --config")
    cfg = _load_config(args.config)
    output = args.output or cfg.output_dir
    if output is None:
        raise ConfigError("no output directory: pass --output or set output_dir")
    report = run_pipeline(cfg, output, jobs=args.jobs)
    print(f"{report.rows} image(s) processed, {len(report.failures)} failed, "
          f"{report.summaries} summaries -> {report.output_dir}")
    for f in report.failures:
        print(f"  failed {f['image_id']}: {f['error']}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (or a run manifest)")
    common.add_argument("--output", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--seed", type=int, default=0, help="reserved; currently unused")

    parser = argparse.ArgumentParser(prog="organoquant", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", parents=[common], help="dump a container's segment index")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)

    for name, func, help_ in (
        ("extract", cmd_extract, "write channel planes as P5 graymaps"),
        ("contours", cmd_contours, "contour statistics for one image"),
        ("cells", cmd_cells, "detect cells in one image"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("file", help="container (.czi) or graymap (.pgm)")
        p.add_argument("--mapping", help="marker mapping, e.g. N-cad=0,PAX6=1")
        if name == "extract":
            p.add_argument("--marker", action="append", help="marker to extract (repeatable)")
        else:
            p.add_argument("--marker", help="marker to analyse")
        if name == "cells":
            p.add_argument("--maps", help="ORGQMAP1 prediction file")
        p.set_defaults(func=func)

    p = sub.add_parser("report", parents=[common], help="re-aggregate per-image results")
    p.add_argument("input", help="run output directory (or its images/ directory)")
    p.add_argument("--scope", choices=("run", "group"), default=None)
    p.add_argument("--ddof", type=int, choices=(0, 1), default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("eval", parents=[common], help="AP between prediction and truth instances")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--tau", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", parents=[common], help="full pipeline over a configured batch")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CziError, PgmError, PipelineError, OSError, ValueError, KeyError) as exc:
        print(f"organoquant {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
