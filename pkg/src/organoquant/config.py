"""JSON run configuration.

Unknown keys are rejected so a typo never silently falls back to a
default. A run manifest (which embeds the effective config) is accepted
wherever a config is.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .cells import CellParams
from .contours import ContourParams
from .imaging import OTSU, Fixed

__all__ = [
    "ConfigError",
    "MalformedJson",
    "UnknownKey",
    "InvalidValue",
    "GroupSpec",
    "PipelineConfig",
    "parse_config",
    "MANIFEST_FORMAT",
]

MANIFEST_FORMAT = "organoquant-manifest"


class ConfigError(ValueError):
    pass


class MalformedJson(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


@dataclass(frozen=True)
class GroupSpec:
    name: str
    # each input is a container path or a {marker: graymap path} mapping
    files: tuple


@dataclass(frozen=True)
class PipelineConfig:
    groups: tuple[GroupSpec, ...]
    marker_mapping: dict = field(default_factory=dict)
    theta: int = 200
    threshold: Any = OTSU
    morph_radius: int = 1
    min_area: int = 20
    n_rays: int = 32
    prob_thresh: float = 0.5
    nms_thresh: float = 0.4
    ap_tau: float = 0.5
    normalization_scope: str = "run"
    maps_source: Any = "synthesize"  # or Path of a directory of <stem>.orgqmap
    truth_dir: Path | None = None
    output_dir: Path | None = None
    contour_marker: str = "N-cad"
    cell_marker: str = "PAX6"
    bit_mode: str = "full_scale"
    intensity_mode: str = "mean"
    std_ddof: int = 1

    def contour_params(self) -> ContourParams:
        return ContourParams(
            theta=self.theta,
            threshold=self.threshold,
            morph_radius=self.morph_radius,
            min_area=self.min_area,
            bit_mode=self.bit_mode,
        )

    def cell_params(self) -> CellParams:
        return CellParams(
            n_rays=self.n_rays,
            prob_thresh=self.prob_thresh,
            nms_thresh=self.nms_thresh,
            threshold=self.threshold,
            morph_radius=self.morph_radius,
            min_area=self.min_area,
            bit_mode=self.bit_mode,
            intensity_mode=self.intensity_mode,
        )

    def to_json(self) -> dict:
        """Effective parameters, with resolved paths; ``output_dir`` omitted."""
        def src(s):
            return {m: str(p) for m, p in s.items()} if isinstance(s, dict) else str(s)

        return {
            "groups": [{"name": g.name, "files": [src(f) for f in g.files]} for g in self.groups],
            "marker_mapping": dict(self.marker_mapping),
            "theta": self.theta,
            "threshold": "otsu" if self.threshold is OTSU else {"fixed": self.threshold.t},
            "morph_radius": self.morph_radius,
            "min_area": self.min_area,
            "n_rays": self.n_rays,
            "prob_thresh": self.prob_thresh,
            "nms_thresh": self.nms_thresh,
            "ap_tau": self.ap_tau,
            "normalization_scope": self.normalization_scope,
            "maps_source": (
                "synthesize" if self.maps_source == "synthesize"
                else {"external": str(self.maps_source)}
            ),
            "truth_dir": None if self.truth_dir is None else str(self.truth_dir),
            "contour_marker": self.contour_marker,
            "cell_marker": self.cell_marker,
            "bit_mode": self.bit_mode,
            "intensity_mode": self.intensity_mode,
            "std_ddof": self.std_ddof,
        }


_KEYS = {
    "groups", "marker_mapping", "theta", "threshold", "morph_radius", "min_area",
    "n_rays", "prob_thresh", "nms_thresh", "ap_tau", "normalization_scope",
    "maps_source", "truth_dir", "output_dir", "contour_marker", "cell_marker",
    "bit_mode", "intensity_mode", "std_ddof",
}


def _int(doc, key, default, lo):
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise InvalidValue(f"{key} must be an integer >= {lo}, got {v!r}")
    return v


def _prob(doc, key, default, open_low=False):
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidValue(f"{key} must be a number, got {v!r}")
    v = float(v)
    if not (0 < v <= 1 if open_low else 0 <= v <= 1):
        raise InvalidValue(f"{key} out of range: {v}")
    return v


def _choice(doc, key, default, options):
    v = doc.get(key, default)
    if v not in options:
        raise InvalidValue(f"{key} must be one of {sorted(options)}, got {v!r}")
    return v


def _path(p, base: Path) -> Path:
    if not isinstance(p, str) or not p:
        raise InvalidValue(f"expected a path string, got {p!r}")
    q = Path(p)
    return (q if q.is_absolute() else base / q).resolve()


def parse_config(data: bytes | str, base_dir=None) -> PipelineConfig:
    """Parse a config (or manifest) document.

    Relative paths resolve against ``base_dir`` (default: the working
    directory).
    """
    base = Path(base_dir or ".").resolve()
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJson(str(exc)) from None
    if not isinstance(doc, dict):
        raise MalformedJson("config must be a JSON object")
    if doc.get("format") == MANIFEST_FORMAT:
        doc = doc["config"]
    unknown = sorted(set(doc) - _KEYS)
    if unknown:
        raise UnknownKey(f"unknown config key(s): {', '.join(unknown)}")

    groups_doc = doc.get("groups")
    if not isinstance(groups_doc, list) or not groups_doc:
        raise InvalidValue("groups must be a non-empty list")
    groups = []
    names = set()
    any_container = False
    for g in groups_doc:
        if not isinstance(g, dict):
            raise InvalidValue("each group must be an object with name and files")
        extra = sorted(set(g) - {"name", "files"})
        if extra:
            raise UnknownKey(f"unknown group key(s): {', '.join(extra)}")
        name = g.get("name")
        if not isinstance(name, str) or not name:
            raise InvalidValue(f"group name must be a non-empty string, got {name!r}")
        if name in names:
            raise InvalidValue(f"duplicate group name {name!r}")
        names.add(name)
        files = g.get("files")
        if not isinstance(files, list) or not files:
            raise InvalidValue(f"group {name!r} needs a non-empty files list")
        resolved = []
        for f in files:
            if isinstance(f, dict):
                resolved.append({str(m): _path(p, base) for m, p in f.items()})
            else:
                any_container = True
                resolved.append(_path(f, base))
        groups.append(GroupSpec(name, tuple(resolved)))

    mapping = doc.get("marker_mapping", {})
    if not isinstance(mapping, dict) or any(
        isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in mapping.values()
    ):
        raise InvalidValue("marker_mapping must map marker names to channel indices >= 0")
    if any_container and not mapping:
        raise InvalidValue("marker_mapping is required for container inputs")

    th = doc.get("threshold", "otsu")
    if th == "otsu":
        threshold = OTSU
    elif isinstance(th, dict) and set(th) == {"fixed"} and isinstance(th["fixed"], int) \
            and not isinstance(th["fixed"], bool) and 0 <= th["fixed"] <= 255:
        threshold = Fixed(th["fixed"])
    else:
        raise InvalidValue(f'threshold must be "otsu" or {{"fixed": 0..255}}, got {th!r}')

    ms = doc.get("maps_source", "synthesize")
    if ms == "synthesize":
        maps_source = "synthesize"
    elif isinstance(ms, dict) and set(ms) == {"external"}:
        maps_source = _path(ms["external"], base)
    else:
        raise InvalidValue(f'maps_source must be "synthesize" or {{"external": dir}}, got {ms!r}')

    truth = doc.get("truth_dir")
    output = doc.get("output_dir")
    return PipelineConfig(
        groups=tuple(groups),
        marker_mapping=dict(mapping),
        theta=_int(doc, "theta", 200, 1),
        threshold=threshold,
        morph_radius=_int(doc, "morph_radius", 1, 0),
        min_area=_int(doc, "min_area", 20, 0),
        n_rays=_int(doc, "n_rays", 32, 3),
        prob_thresh=_prob(doc, "prob_thresh", 0.5),
        nms_thresh=_prob(doc, "nms_thresh", 0.4),
        ap_tau=_prob(doc, "ap_tau", 0.5, open_low=True),
        normalization_scope=_choice(doc, "normalization_scope", "run", {"run", "group"}),
        maps_source=maps_source,
        truth_dir=None if truth is None else _path(truth, base),
        output_dir=None if output is None else _path(output, base),
        contour_marker=_str(doc, "contour_marker", "N-cad"),
        cell_marker=_str(doc, "cell_marker", "PAX6"),
        bit_mode=_choice(doc, "bit_mode", "full_scale", {"full_scale", "minmax"}),
        intensity_mode=_choice(doc, "intensity_mode", "mean", {"mean", "sum"}),
        std_ddof=_choice(doc, "std_ddof", 1, {0, 1}),
    )


def _str(doc, key, default):
    v = doc.get(key, default)
    if not isinstance(v, str) or not v:
        raise InvalidValue(f"{key} must be a non-empty string")
    return v


def config_to_bytes(cfg: PipelineConfig) -> bytes:
    return (json.dumps(cfg.to_json(), indent=2) + "\n").encode()

