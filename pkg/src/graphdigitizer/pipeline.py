"""Figure-level orchestration: subfigures -> layout -> clean-up -> lines -> labels -> scales."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .cleanup import erase_layout_artifacts, erase_objects
from .detect import (GRAPH_CATEGORIES, IN_GRAPH_CATEGORIES, BoundingBox, DetectedObject,
                     ObjectCategory, annotation_path, heuristic_gutter_split, objects_in,
                     parse_annotations)
from .errors import (AmbiguousAssignment, ConfigError, CountMismatch, DigitizerError,
                     MalformedAnnotation, NonNumeric, UndecodableImage)
from .layout import GraphLayout, analyze_layout
from .lines import (calibrate_params, collect_colored_pixels, dbscan_cluster, drop_halo,
                    trace_series)
from .match import (LabelSource, SeriesLabel, assign_legends, build_legend_entries, ink_color,
                    match_texts, windowed_edit_ratio)
from .raster import Color, RasterImage, Upscaler, crop, identity_upscaler, load_image
from .scale import (AxisScale, NumericLabel, ScaleKind, parse_numeric,
                    rescale_series, resolve_axis_scale)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    whiten_threshold: int = 245
    gutter_min_white: float = 0.98
    gutter_min_band: int = 8
    dbscan_eps: Optional[float] = None
    dbscan_min_pts: Optional[int] = None
    assign_noise: bool = False
    suppress_halo: bool = True
    match_w_dist: float = 8.0
    match_w_color: float = 6.0
    match_bias: float = 4.0
    arithmetic_tolerance: float = 0.05
    jobs: int = 1

    def __post_init__(self):
        checks = [
            (0 <= self.whiten_threshold <= 255, "whiten_threshold must be in [0, 255]"),
            (0 < self.gutter_min_white <= 1, "gutter_min_white must be in (0, 1]"),
            (self.gutter_min_band >= 1, "gutter_min_band must be >= 1"),
            (self.dbscan_eps is None or self.dbscan_eps > 0, "dbscan_eps must be > 0"),
            (self.dbscan_min_pts is None or self.dbscan_min_pts >= 1, "dbscan_min_pts must be >= 1"),
            (0 < self.arithmetic_tolerance < 1, "arithmetic_tolerance must be in (0, 1)"),
            (self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @property
    def text_weights(self) -> Tuple[float, float, float]:
        return (self.match_w_dist, self.match_w_color, self.match_bias)


def _coerce(name: str, raw: str, annotation: str):
    raw = raw.strip()
    try:
        if "bool" in annotation:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "Optional" in annotation and raw.lower() in ("", "none", "auto"):
            return None
        if "int" in annotation:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str) -> PipelineConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    fields = {f.name: str(f.type) for f in dataclasses.fields(PipelineConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, fields[key])
    return PipelineConfig(**values)


def load_config(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- output model --------------------------------------------------------------------

@dataclass
class DigitizedSeries:
    label: SeriesLabel
    color: Color
    points: List[Tuple[float, float]]


@dataclass
class DigitizedGraph:
    source_figure: str
    subfigure_index: int
    x_axis: AxisScale
    y_axis: AxisScale
    series: List[DigitizedSeries] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def flag(self, *names: str) -> None:
        for name in names:
            if name not in self.flags:
                self.flags.append(name)

    @property
    def max_x(self) -> Optional[float]:
        xs = [p[0] for s in self.series for p in s.points]
        return max(xs) if xs else None

    def to_json(self) -> dict:
        def axis(s: AxisScale) -> dict:
            return {"kind": s.kind.value, "label": s.label or "", "slope": _num(s.slope),
                    "intercept": _num(s.intercept)}

        return {
            "source": self.source_figure,
            "subfigure": self.subfigure_index,
            "x_axis": axis(self.x_axis),
            "y_axis": axis(self.y_axis),
            "series": [{
                "label": s.label.label,
                "label_source": s.label.source.value,
                "confidence": _num(s.label.confidence),
                "color": list(s.color.as_tuple()),
                "points": [[_num(x), _num(y)] for x, y in s.points],
            } for s in self.series],
            "flags": list(self.flags),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DigitizedGraph":
        def axis(d: dict) -> AxisScale:
            kind = ScaleKind(d["kind"])
            slope = d["slope"]
            return AxisScale(kind, slope, d["intercept"], (0, 0), d["label"] or None)

        series = [DigitizedSeries(
            SeriesLabel(LabelSource(s["label_source"]), s["label"], s["confidence"]),
            Color.of(s["color"]), [tuple(p) for p in s["points"]]) for s in doc["series"]]
        return cls(doc["source"], doc["subfigure"], axis(doc["x_axis"]), axis(doc["y_axis"]),
                   series, list(doc["flags"]))


def _num(x: float) -> float:
    """Round to 9 significant digits for serialization."""
    v = float(f"{float(x):.9g}")
    if not math.isfinite(v):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return 0.0 if v == 0 else v


def dumps_graph(graph: DigitizedGraph) -> str:
    return json.dumps(graph.to_json(), ensure_ascii=False) + "\n"


def write_atomic(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- per-graph stages ------------------------------------------------------------

def _failed_record(img: RasterImage, source: str, index: int, *flags: str) -> DigitizedGraph:
    x = AxisScale(ScaleKind.NORMALIZED, 1.0 / max(img.width - 1, 1), 0.0, (0, img.width - 1))
    y = AxisScale(ScaleKind.NORMALIZED, -1.0 / max(img.height - 1, 1), 1.0, (0, img.height - 1))
    graph = DigitizedGraph(source, index, x, y)
    graph.flag(*flags)
    return graph


@dataclass
class _AxisTexts:
    numbers: List[NumericLabel]
    title: Optional[str]


def _axis_texts(texts: Sequence[DetectedObject], horizontal: bool) -> _AxisTexts:
    numbers, words = [], []
    for t in texts:
        cx, cy = t.box.center
        try:
            numbers.append(NumericLabel(t.text, parse_numeric(t.text), cx if horizontal else cy))
        except NonNumeric:
            words.append(t)
    title = max(words, key=lambda t: (len(t.text), t.box.area)).text if words else None
    return _AxisTexts(numbers, title)


def _split_texts(texts: Sequence[DetectedObject], layout: GraphLayout):
    in_data, x_side, y_side = [], [], []
    for t in texts:
        if not t.text:
            continue
        cx, cy = t.box.center
        if layout.data_region.contains_point(cx, cy):
            in_data.append(t)
        elif layout.x_label_region is not None and layout.x_label_region.contains_point(cx, cy):
            x_side.append(t)
        elif layout.y_label_region is not None and layout.y_label_region.contains_point(cx, cy):
            y_side.append(t)
    return in_data, x_side, y_side


def digitize_graph(img: RasterImage, objects: Sequence[DetectedObject], config: PipelineConfig,
                   source: str = "", index: int = 0,
                   upscaler: Upscaler = identity_upscaler) -> DigitizedGraph:
    """Digitize one single-graph image; ``objects`` are in-graph detections in its frame."""
    img = upscaler(img)
    threshold = config.whiten_threshold
    try:
        layout = analyze_layout(img, threshold)
    except DigitizerError as exc:
        return _failed_record(img, source, index, _flag_name(exc))

    texts = [o for o in objects if o.category is ObjectCategory.TEXT]
    in_data, x_texts, y_texts = _split_texts(texts, layout)
    legends = build_legend_entries(img, objects, threshold)
    inks = [ink_color(img, t.box, threshold) for t in in_data]

    cleaned = erase_objects(img, [o for o in objects if o.category in IN_GRAPH_CATEGORIES])
    cleaned = erase_layout_artifacts(cleaned, layout, threshold)

    x_info = _axis_texts(x_texts, horizontal=True)
    y_info = _axis_texts(y_texts, horizontal=False)
    x_scale, x_flags = resolve_axis_scale(x_info.numbers, layout.x_axis, config.arithmetic_tolerance)
    y_scale, y_flags = resolve_axis_scale(y_info.numbers, layout.y_axis, config.arithmetic_tolerance)
    graph = DigitizedGraph(source, index, x_scale.with_label(x_info.title),
                           y_scale.with_label(y_info.title))
    graph.flag(*x_flags, *y_flags)

    region = layout.data_region
    points = collect_colored_pixels(cleaned, region, threshold)
    if config.suppress_halo:
        points = drop_halo(points, cleaned, region)
    if len(points) == 0:
        graph.flag("no-data-lines")
        return graph
    params = calibrate_params(points, region, config.dbscan_eps, config.dbscan_min_pts)
    clusters = dbscan_cluster(points, params, config.assign_noise)
    if not clusters:
        graph.flag("no-data-lines")
        return graph

    labels: Dict[int, SeriesLabel] = {}
    if legends:
        try:
            for cid, (entry, sim) in assign_legends(clusters, legends).items():
                labels[cid] = SeriesLabel(LabelSource.LEGEND, entry.label, max(0.0, sim))
        except AmbiguousAssignment:
            graph.flag("ambiguous-legend")
        except CountMismatch:
            graph.flag("count-mismatch")
    if in_data:
        diagonal = math.hypot(region.width, region.height)
        best: Dict[int, Tuple[float, str]] = {}
        for text, hit in zip(in_data, match_texts(in_data, clusters, inks, diagonal,
                                                  config.text_weights)):
            if hit is not None and hit.score > best.get(hit.cluster_id, (-1.0, ""))[0]:
                best[hit.cluster_id] = (hit.score, text.text)
        for cid, (score, text) in best.items():
            if cid not in labels:
                labels[cid] = SeriesLabel(LabelSource.TEXT, text, score)

    for cluster in clusters:
        pixels = trace_series(cluster, region)
        label = labels.get(cluster.id, SeriesLabel.anonymous())
        if label.source is LabelSource.ANONYMOUS:
            graph.flag("unlabeled-series")
        graph.series.append(DigitizedSeries(label, cluster.representative_color,
                                            rescale_series(pixels, x_scale, y_scale)))
    return graph


def _flag_name(exc: Exception) -> str:
    name = type(exc).__name__
    out = [name[0].lower()]
    for ch in name[1:]:
        out.append("-" + ch.lower() if ch.isupper() else ch)
    return "".join(out)


def subfigure_boxes(img: RasterImage, annotations: Sequence[DetectedObject],
                    config: PipelineConfig) -> List[Tuple[BoundingBox, ObjectCategory]]:
    """Graph panels to digitize.

    Subfigure annotations win when present. In-graph annotations alone mean
    the whole image is one graph. With no annotations at all the white-gutter
    heuristic proposes panels.
    """
    subs = [a for a in annotations if a.category.is_subfigure]
    if subs:
        return [(a.box, a.category) for a in subs if a.category in GRAPH_CATEGORIES]
    if annotations:
        return [(BoundingBox(0, 0, img.width, img.height), ObjectCategory.GRAPH)]
    return [(b, ObjectCategory.GRAPH) for b in heuristic_gutter_split(
        img, config.gutter_min_white, config.gutter_min_band, config.whiten_threshold)]


def digitize_figure(img: RasterImage, annotations: Sequence[DetectedObject],
                    config: PipelineConfig = PipelineConfig(), source: str = "",
                    upscaler: Upscaler = identity_upscaler) -> List[DigitizedGraph]:
    """Digitize every graph panel of a figure; a failing panel yields a flagged record."""
    out = []
    for index, (box, _category) in enumerate(subfigure_boxes(img, annotations, config)):
        sub = crop(img, box)
        objects = objects_in(annotations, box)
        try:
            graph = digitize_graph(sub, objects, config, source, index, upscaler)
        except Exception as exc:  # one bad panel must not sink the figure
            log.exception("subfigure %d of %s failed", index, source)
            graph = _failed_record(sub, source, index, "internal-error", _flag_name(exc))
        out.append(graph)
    return out


# -- mining filters ---------------------------------------------------------------

def filter_by_caption(caption: str, keywords: Sequence[str]) -> bool:
    low = caption.lower()
    return any(k.lower() in low for k in keywords)


def filter_by_axis(graph: DigitizedGraph, x_label_target: Optional[str],
                   y_label_target: Optional[str], max_edit_ratio: float,
                   x_max_limit: Optional[float] = None) -> bool:
    """Axis-title fuzzy match plus an optional cap on the largest x value.

    Empty targets are not checked.
    """
    if not 0 <= max_edit_ratio <= 1:
        raise ValueError("max_edit_ratio must be in [0, 1]")
    for target, scale in ((x_label_target, graph.x_axis), (y_label_target, graph.y_axis)):
        if target and windowed_edit_ratio(scale.label or "", target) > max_edit_ratio:
            return False
    if x_max_limit is not None:
        if graph.x_axis.kind is ScaleKind.NORMALIZED:
            return False
        top = graph.max_x
        if top is None or top > x_max_limit:
            return False
    return True


# -- files -----------------------------------------------------------------------------

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def image_stem(path) -> str:
    return os.path.splitext(os.path.basename(os.fspath(path)))[0]


def _input_failure(source: str, *flags: str) -> DigitizedGraph:
    return _failed_record(RasterImage.blank(1, 1), source, 0, *flags)


def digitize_file(image_path, config: PipelineConfig = PipelineConfig(),
                  upscaler: Upscaler = identity_upscaler) -> List[DigitizedGraph]:
    """Digitize one image file with its optional ``.ann.json`` sidecar.

    An unreadable image yields a single flagged record. A malformed sidecar
    is ignored (the gutter heuristic takes over) and every record is flagged.
    """
    source = os.path.basename(os.fspath(image_path))
    try:
        img = load_image(image_path)
    except (UndecodableImage, OSError) as exc:
        log.warning("cannot decode %s: %s", image_path, exc)
        return [_input_failure(source, "undecodable-input")]
    annotations: List[DetectedObject] = []
    extra: List[str] = []
    sidecar = annotation_path(image_path)
    if os.path.exists(sidecar):
        try:
            annotations = parse_annotations(sidecar, img)
        except MalformedAnnotation as exc:
            log.warning("ignoring annotations for %s: %s", image_path, exc)
            extra = ["malformed-annotation", _flag_name(exc)]
    graphs = digitize_figure(img, annotations, config, source, upscaler)
    for g in graphs:
        g.flag(*extra)
    return graphs


def graph_filename(stem: str, index: int) -> str:
    return f"{stem}.graph{index}.json"
