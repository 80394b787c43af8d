"""Detection data model, the annotation-sidecar adapter, subfigure splitting and IoU.

Trained detectors are not part of this package. Their role is played by
``<stem>.ann.json`` sidecars; any external detector that writes the same
schema plugs straight into the pipeline.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BoxOutOfBounds, MalformedAnnotation, UnknownCategory
from .raster import DEFAULT_WHITEN_THRESHOLD, RasterImage, crop


class ObjectCategory(enum.Enum):
    GRAPH = "graph"
    SUB_GRAPH = "sub_graph"
    NON_GRAPH = "non_graph"
    TEXT = "text"
    MARKER = "marker"
    LEGEND = "legend"
    ARROW = "arrow"
    INSET_GRAPH = "inset_graph"
    INSET_IMAGE = "inset_image"

    @property
    def is_subfigure(self) -> bool:
        return self in SUBFIGURE_CATEGORIES

    @property
    def bears_text(self) -> bool:
        return self in (ObjectCategory.TEXT, ObjectCategory.LEGEND)


SUBFIGURE_CATEGORIES = frozenset(
    {ObjectCategory.GRAPH, ObjectCategory.SUB_GRAPH, ObjectCategory.NON_GRAPH}
)
GRAPH_CATEGORIES = frozenset({ObjectCategory.GRAPH, ObjectCategory.SUB_GRAPH})
IN_GRAPH_CATEGORIES = frozenset(ObjectCategory) - SUBFIGURE_CATEGORIES


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned pixel box; ``x_max``/``y_max`` are exclusive."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"negative coordinate in {self}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"empty box {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        """Center in pixel-index coordinates (a 1 px box is centered on its pixel)."""
        return ((self.x_min + self.x_max - 1) / 2.0, (self.y_min + self.y_max - 1) / 2.0)

    def as_list(self) -> List[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def contains_point(self, x: float, y: float) -> bool:
        return self.x_min <= x < self.x_max and self.y_min <= y < self.y_max

    def within(self, width: int, height: int) -> bool:
        return self.x_max <= width and self.y_max <= height

    def shifted(self, dx: int, dy: int) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def clipped(self, width: int, height: int) -> Optional["BoundingBox"]:
        x0, y0 = max(self.x_min, 0), max(self.y_min, 0)
        x1, y1 = min(self.x_max, width), min(self.y_max, height)
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0, y0, x1, y1)


def _expand(box: BoundingBox, margin: int) -> Tuple[int, int, int, int]:
    return (box.x_min - margin, box.y_min - margin, box.x_max + margin, box.y_max + margin)


@dataclass(frozen=True)
class DetectedObject:
    category: ObjectCategory
    box: BoundingBox
    confidence: float = 1.0
    text: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.text is not None and not self.category.bears_text:
            raise ValueError(f"{self.category.value} objects carry no text")

    def shifted(self, dx: int, dy: int) -> "DetectedObject":
        return DetectedObject(self.category, self.box.shifted(dx, dy), self.confidence, self.text)

    def to_json(self) -> dict:
        rec = {"category": self.category.value, "box": self.box.as_list(),
               "confidence": self.confidence}
        if self.text is not None:
            rec["text"] = self.text
        return rec


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


# -- annotation sidecars ---------------------------------------------------

def annotation_path(image_path) -> str:
    """``dir/chart.png`` -> ``dir/chart.ann.json``."""
    root, _ = os.path.splitext(os.fspath(image_path))
    return root + ".ann.json"


def _parse_record(rec, index: int, width: int, height: int) -> DetectedObject:
    if not isinstance(rec, dict):
        raise MalformedAnnotation(f"object {index} is not a JSON object")
    try:
        name = rec["category"]
        raw_box = rec["box"]
    except KeyError as exc:
        raise MalformedAnnotation(f"object {index} lacks {exc.args[0]!r}") from None
    try:
        category = ObjectCategory(name)
    except ValueError:
        raise UnknownCategory(f"object {index}: unknown category {name!r}") from None
    if (not isinstance(raw_box, list) or len(raw_box) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw_box)):
        raise MalformedAnnotation(f"object {index}: box must be four integers")
    try:
        box = BoundingBox(*raw_box)
    except ValueError as exc:
        raise MalformedAnnotation(f"object {index}: {exc}") from None
    if not box.within(width, height):
        raise BoxOutOfBounds(f"object {index}: {box} exceeds {width}x{height}")
    confidence = rec.get("confidence", 1.0)
    if not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
        raise MalformedAnnotation(f"object {index}: confidence must be a number")
    text = rec.get("text")
    if text is not None and not isinstance(text, str):
        raise MalformedAnnotation(f"object {index}: text must be a string")
    if text == "":
        text = None
    if text is not None and not category.bears_text:
        raise MalformedAnnotation(f"object {index}: {name} objects carry no text")
    try:
        return DetectedObject(category, box, float(confidence), text)
    except ValueError as exc:
        raise MalformedAnnotation(f"object {index}: {exc}") from None


def parse_annotations(path, img: RasterImage) -> List[DetectedObject]:
    """Read a ``.ann.json`` sidecar and validate every box against ``img``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedAnnotation(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("objects"), list):
        raise MalformedAnnotation(f"{path}: expected an object with an 'objects' list")
    meta = doc.get("image")
    if meta is not None:
        if not isinstance(meta, dict) or "width" not in meta or "height" not in meta:
            raise MalformedAnnotation(f"{path}: 'image' needs width and height")
        if (meta["width"], meta["height"]) != (img.width, img.height):
            raise MalformedAnnotation(
                f"{path}: declared size {meta['width']}x{meta['height']} "
                f"but image is {img.width}x{img.height}")
    return [_parse_record(rec, i, img.width, img.height) for i, rec in enumerate(doc["objects"])]


def annotations_document(objects: Iterable[DetectedObject], width: int, height: int) -> dict:
    return {"image": {"width": width, "height": height},
            "objects": [o.to_json() for o in objects]}


def write_annotations(path, objects: Iterable[DetectedObject], width: int, height: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(annotations_document(objects, width, height), fh, indent=1)
        fh.write("\n")


# -- subfigures --------------------------------------------------------------

def split_subfigures(img: RasterImage, detections: Sequence[DetectedObject]
                     ) -> List[Tuple[RasterImage, ObjectCategory]]:
    """Crop every Graph/SubGraph detection; NonGraph panels are dropped."""
    out = []
    for det in detections:
        if not det.category.is_subfigure:
            raise ValueError(f"split_subfigures got in-graph category {det.category.value}")
        if det.category in GRAPH_CATEGORIES:
            out.append((crop(img, det.box), det.category))
    return out


def _runs(flags: np.ndarray) -> List[Tuple[int, int]]:
    """Half-open ``(start, stop)`` intervals where ``flags`` is True."""
    padded = np.concatenate(([False], flags.astype(bool), [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return list(zip(edges[0::2].tolist(), edges[1::2].tolist()))


def _complement(intervals: List[Tuple[int, int]], length: int) -> List[Tuple[int, int]]:
    out, pos = [], 0
    for start, stop in intervals:
        if start > pos:
            out.append((pos, start))
        pos = stop
    if pos < length:
        out.append((pos, length))
    return out


def _run_lengths(ink: np.ndarray) -> np.ndarray:
    """Length of the vertical ink run through every pixel (0 on background)."""
    h = ink.shape[0]
    up = np.zeros(ink.shape, dtype=np.int32)
    down = np.zeros(ink.shape, dtype=np.int32)
    for y in range(h):
        up[y] = np.where(ink[y], (up[y - 1] if y else 0) + 1, 0)
    for y in range(h - 1, -1, -1):
        down[y] = np.where(ink[y], (down[y + 1] if y < h - 1 else 0) + 1, 0)
    return np.where(ink, up + down - 1, 0)


def _gutters(white: np.ndarray, min_white: float, min_band: int):
    """Row bands that are mostly background and not crossed by a long vertical stroke."""
    crossed = (_run_lengths(~white) >= min_band).any(axis=1)
    flags = (white.mean(axis=1) >= min_white) & ~crossed
    return [r for r in _runs(flags) if r[1] - r[0] >= min_band]


MIN_PANEL_FRACTION = 0.1


def _merge_slivers(gutters: List[Tuple[int, int]], length: int,
                   min_piece: float) -> List[Tuple[int, int]]:
    """Drop gutters until no piece between them is thinner than ``min_piece``.

    A sliver (a row of tick labels, a rotated axis title) rejoins the
    neighbour across the narrower of its two gutters.
    """
    gutters = list(gutters)
    while gutters:
        thin = next(((a, b) for a, b in _complement(gutters, length) if b - a < min_piece), None)
        if thin is None:
            break
        options = [k for k, g in enumerate(gutters) if g[1] == thin[0] or g[0] == thin[1]]
        drop = min(options, key=lambda k: (gutters[k][1] - gutters[k][0], k))
        del gutters[drop]
    return gutters


def heuristic_gutter_split(img: RasterImage, min_white: float = 0.98, min_band: int = 8,
                           threshold: int = DEFAULT_WHITEN_THRESHOLD,
                           min_panel: float = MIN_PANEL_FRACTION) -> List[BoundingBox]:
    """Split a multi-panel figure along white gutters.

    Rows are cut first along full-width bands that are at least ``min_white``
    background and ``min_band`` px thick; each resulting strip is then cut
    along full-height bands of the same kind. A band crossed by a stroke at
    least ``min_band`` px long (an axis, a panel border) is not a gutter, which
    keeps a lone chart whole. Pieces thinner than ``min_panel`` of the image
    dimension are merged back into a neighbour. Panels come back
    top-to-bottom, left-to-right; panels containing no ink are dropped.
    """
    white = (img.pixels >= threshold).all(axis=2)
    boxes = []
    row_gutters = _merge_slivers(_gutters(white, min_white, min_band), img.height,
                                 min_panel * img.height)
    for y0, y1 in _complement(row_gutters, img.height):
        strip = white[y0:y1]
        col_gutters = _merge_slivers(_gutters(strip.T, min_white, min_band), img.width,
                                     min_panel * img.width)
        for x0, x1 in _complement(col_gutters, img.width):
            if strip[:, x0:x1].all():
                continue
            boxes.append(BoundingBox(x0, y0, x1, y1))
    boxes.sort(key=lambda b: (b.y_min, b.x_min))
    return boxes


def objects_in(detections: Sequence[DetectedObject], box: BoundingBox,
               categories=IN_GRAPH_CATEGORIES) -> List[DetectedObject]:
    """Detections whose center falls inside ``box``, re-expressed in its frame."""
    out = []
    for det in detections:
        if det.category not in categories:
            continue
        cx, cy = det.box.center
        if not box.contains_point(cx, cy):
            continue
        local = det.box.clipped(box.x_max, box.y_max)
        if local is None:
            continue
        local = BoundingBox(max(local.x_min, box.x_min), max(local.y_min, box.y_min),
                            local.x_max, local.y_max)
        out.append(DetectedObject(det.category, local.shifted(-box.x_min, -box.y_min),
                                  det.confidence, det.text))
    return out
