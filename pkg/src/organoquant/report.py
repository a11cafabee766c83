"""Per-group aggregation, table emission and SVG bar charts."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

__all__ = [
    "Metric",
    "GroupRow",
    "GroupSummary",
    "NoData",
    "MixedMetrics",
    "aggregate_group",
    "summarize",
    "emit_table",
    "parse_table_json",
    "parse_table_csv",
    "emit_barchart",
    "COLUMNS",
]

COLUMNS = ("group", "image_id", "contour_no", "cr", "cell_no", "avg_intensity")


class NoData(ValueError):
    pass


class MixedMetrics(ValueError):
    pass


class Metric(enum.Enum):
    CONTOUR_NO = "contour_no"
    CR = "cr"
    CELL_NO = "cell_no"
    AVG_INTENSITY = "avg_intensity"

    @property
    def title(self) -> str:
        return _TITLES[self]


_TITLES = {
    Metric.CONTOUR_NO: "Contour No.",
    Metric.CR: "Contour Ratio",
    Metric.CELL_NO: "Cell No.",
    Metric.AVG_INTENSITY: "Average Cell Intensity",
}


@dataclass(frozen=True)
class GroupRow:
    group: str
    image_id: str
    contour_no: int | None = None
    cr: float | None = None  # math.inf when undefined
    cell_no: int | None = None
    avg_intensity: float | None = None

    def __post_init__(self):
        if all(getattr(self, m.value) is None for m in Metric):
            raise ValueError(f"row {self.image_id!r} carries no measurement")

    def value(self, metric: Metric):
        return getattr(self, metric.value)


@dataclass(frozen=True)
class GroupSummary:
    group: str
    metric: Metric
    n: int
    mean: float
    std: float
    excluded: int = 0
    ddof: int = 1

    def to_json(self) -> dict:
        return {
            "group": self.group,
            "metric": self.metric.value,
            "n": self.n,
            "mean": self.mean,
            "std": self.std,
            "excluded": self.excluded,
            "ddof": self.ddof,
        }


def aggregate_group(rows: Sequence[GroupRow], metric: Metric, ddof: int = 1) -> GroupSummary:
    """Mean and standard deviation of one metric over one group's rows.

    Undefined contour ratios (``inf``) are left out and counted in
    ``excluded``. The std uses an ``n - ddof`` denominator and is 0 for a
    single value.
    """
    metric = Metric(metric)
    groups = {r.group for r in rows}
    if len(groups) > 1:
        raise ValueError(f"rows span several groups: {sorted(groups)}")
    present = [r.value(metric) for r in rows if r.value(metric) is not None]
    values = [float(v) for v in present if not math.isinf(v)]
    excluded = len(present) - len(values)
    if not values:
        raise NoData(f"no row carries {metric.value}")
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1 or n - ddof <= 0:
        std = 0.0
    else:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - ddof))
    return GroupSummary(rows[0].group, metric, n, mean, std, excluded, ddof)


def summarize(
    rows: Sequence[GroupRow], metrics: Iterable[Metric] = tuple(Metric), ddof: int = 1
) -> list[GroupSummary]:
    """Summaries for every (metric, group) pair that has data.

    Groups keep first-appearance order.
    """
    order: dict[str, list[GroupRow]] = {}
    for r in rows:
        order.setdefault(r.group, []).append(r)
    out = []
    for metric in metrics:
        for group_rows in order.values():
            try:
                out.append(aggregate_group(group_rows, metric, ddof))
            except NoData:
                continue
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def emit_table(rows: Sequence[GroupRow], fmt: str = "csv", metadata: dict | None = None) -> bytes:
    fmt = fmt.lower()
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        doc = {
            "columns": list(COLUMNS),
            "rows": [{c: _json_value(getattr(r, c)) for c in COLUMNS} for r in rows],
        }
        if metadata is not None:
            doc["metadata"] = metadata
        return (json.dumps(doc, indent=2, allow_nan=False) + "\n").encode("utf-8")
    raise ValueError(f"unknown table format {fmt!r}")


def _row_from_mapping(item: dict) -> GroupRow:
    kw = {}
    for f in fields(GroupRow):
        v = item.get(f.name)
        if f.name == "cr" and v == "inf":
            v = math.inf
        kw[f.name] = v
    return GroupRow(**kw)


def parse_table_json(data: bytes) -> list[GroupRow]:
    doc = json.loads(data)
    return [_row_from_mapping(item) for item in doc["rows"]]


def parse_table_csv(data: bytes) -> list[GroupRow]:
    reader = csv.DictReader(io.StringIO(data.decode("utf-8")))
    rows = []
    for rec in reader:
        item = {"group": rec["group"], "image_id": rec["image_id"]}
        for name, conv in (("contour_no", int), ("cr", float), ("cell_no", int), ("avg_intensity", float)):
            item[name] = conv(rec[name]) if rec[name] != "" else None
        rows.append(GroupRow(**item))
    return rows


_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c")
WIDTH, HEIGHT = 640, 480
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 30, 50, 60


def _n(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def emit_barchart(summaries: Sequence[GroupSummary], title: str | None = None) -> bytes:
    """Bar chart of group means with +/- std whiskers, as SVG 1.1.

    Bar heights are proportional to the means (baseline 0). A summary with
    zero std gets no whisker.
    """
    if not 1 <= len(summaries) <= 8:
        raise ValueError("need between 1 and 8 summaries")
    metrics = {s.metric for s in summaries}
    if len(metrics) != 1:
        raise MixedMetrics(f"summaries mix metrics {sorted(m.value for m in metrics)}")
    metric = summaries[0].metric
    if any(s.mean < 0 for s in summaries):
        raise ValueError("bar chart requires non-negative means")
    title = title or f"Quantification of {metric.title}"

    plot_w = WIDTH - _LEFT - _RIGHT
    plot_h = HEIGHT - _TOP - _BOTTOM
    base_y = _TOP + plot_h
    top = max(s.mean + s.std for s in summaries)
    top = top * 1.1 if top > 0 else 1.0
    scale = plot_h / top
    slot = plot_w / len(summaries)
    bar_w = slot * 0.6

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.2f}" y="28" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
        f'<line class="axis" x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{base_y}" stroke="#000000"/>',
        f'<line class="axis" x1="{_LEFT}" y1="{base_y}" x2="{WIDTH - _RIGHT}" y2="{base_y}" stroke="#000000"/>',
    ]
    for i in range(6):
        v = top * i / 5
        y = base_y - v * scale
        out.append(
            f'<line class="tick" x1="{_LEFT - 5}" y1="{_n(y)}" x2="{_LEFT}" y2="{_n(y)}" stroke="#000000"/>'
        )
        out.append(
            f'<text x="{_LEFT - 8}" y="{_n(y + 4)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{_n(v)}</text>'
        )
    out.append(
        f'<text x="20" y="{_n(_TOP + plot_h / 2)}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 20 {_n(_TOP + plot_h / 2)})">{escape(metric.title)}</text>'
    )
    for i, s in enumerate(summaries):
        cx = _LEFT + slot * (i + 0.5)
        hgt = s.mean * scale
        out.append(
            f'<rect class="bar" data-group="{escape(s.group, {chr(34): "&quot;"})}" '
            f'data-mean="{s.mean!r}" x="{_n(cx - bar_w / 2)}" y="{_n(base_y - hgt)}" '
            f'width="{_n(bar_w)}" height="{_n(hgt)}" fill="{_PALETTE[i]}"/>'
        )
        if s.std > 0:
            lo = base_y - (s.mean - s.std) * scale
            hi = base_y - (s.mean + s.std) * scale
            cap = bar_w * 0.2
            out.append(
                f'<g class="errorbar" stroke="#000000">'
                f'<line x1="{_n(cx)}" y1="{_n(lo)}" x2="{_n(cx)}" y2="{_n(hi)}"/>'
                f'<line x1="{_n(cx - cap)}" y1="{_n(hi)}" x2="{_n(cx + cap)}" y2="{_n(hi)}"/>'
                f'<line x1="{_n(cx - cap)}" y1="{_n(lo)}" x2="{_n(cx + cap)}" y2="{_n(lo)}"/>'
                f"</g>"
            )
        out.append(
            f'<text x="{_n(cx)}" y="{base_y + 20}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12">{escape(s.group)}</text>'
        )
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
