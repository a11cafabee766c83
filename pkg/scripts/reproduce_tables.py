"""Aggregate the published per-image values and draw the four charts.

Writes table.csv, summary.json and charts/<metric>.svg under the output
directory, then prints mean +/- std per group and metric.

    python scripts/reproduce_tables.py out/published
"""
import argparse
import json
from pathlib import Path

from organoquant.published import published_rows
from organoquant.report import Metric, emit_barchart, emit_table, summarize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", nargs="?", default="out/published")
    ap.add_argument("--ddof", type=int, choices=(0, 1), default=1)
    args = ap.parse_args()
    out = Path(args.out_dir)
    (out / "charts").mkdir(parents=True, exist_ok=True)

    rows = published_rows()
    summaries = summarize(rows, tuple(Metric), args.ddof)
    (out / "table.csv").write_bytes(emit_table(rows, "csv"))
    (out / "summary.json").write_text(
        json.dumps([s.to_json() for s in summaries], indent=2) + "\n"
    )
    for metric in Metric:
        chart = emit_barchart([s for s in summaries if s.metric is metric])
        (out / "charts" / f"{metric.value}.svg").write_bytes(chart)

    for s in summaries:
        print(f"{s.metric.title:<24} {s.group:<4} n={s.n}  {s.mean:9.4f} +/- {s.std:.4f}")


if __name__ == "__main__":
    main()
