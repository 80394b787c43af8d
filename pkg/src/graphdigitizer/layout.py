"""Rule-based axis, tick and grid detection and the data/label region split."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .detect import BoundingBox, _runs
from .errors import AxesNotFound, DegenerateRegion
from .raster import DEFAULT_WHITEN_THRESHOLD, RasterImage

DARK_LUMA = 128
PERIPHERY_WEIGHT = 2.0
MIN_AXIS_FRACTION = 0.5
TICK_LENGTH_WINDOW = (2, 12)
REFERENCE_SIZE = 640
PROGRESSION_TOLERANCE = 2.0
GRID_MAX_SATURATION = 20
GRID_MIN_SPAN = 0.8


class Orientation(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class AxisLine:
    """A straight axis-parallel line.

    ``position`` is the outermost row (horizontal) or column (vertical) of the
    line; a thick x-axis grows upward from it, a thick y-axis grows rightward.
    ``span`` is the half-open extent along the line.
    """

    orientation: Orientation
    position: int
    span: Tuple[int, int]
    thickness: int = 1

    def __post_init__(self):
        if not self.span[0] < self.span[1]:
            raise ValueError(f"empty span {self.span}")
        if self.position < 0 or self.thickness < 1:
            raise ValueError("invalid position or thickness")

    @property
    def length(self) -> int:
        return self.span[1] - self.span[0]


@dataclass(frozen=True)
class Tick:
    axis: str  # "x" or "y"
    coordinate: float


class Regions(NamedTuple):
    data: BoundingBox
    x_label: Optional[BoundingBox]
    y_label: Optional[BoundingBox]


@dataclass(frozen=True)
class GraphLayout:
    x_axis: AxisLine
    y_axis: AxisLine
    data_region: BoundingBox
    x_label_region: Optional[BoundingBox]
    y_label_region: Optional[BoundingBox]
    ticks: Tuple[Tick, ...] = ()
    grid_lines: Tuple[AxisLine, ...] = ()
    frame_lines: Tuple[AxisLine, ...] = ()

    def ticks_on(self, axis: str) -> List[Tick]:
        return [t for t in self.ticks if t.axis == axis]


def dark_mask(img: RasterImage) -> np.ndarray:
    return img.luma() < DARK_LUMA


def _longest_run(line: np.ndarray) -> Tuple[int, int]:
    runs = _runs(line)
    if not runs:
        return (0, 0)
    return max(runs, key=lambda r: (r[1] - r[0], -r[0]))


def _longest_runs(mask: np.ndarray) -> np.ndarray:
    """``(n, 2)`` array of the longest True run per row of ``mask``."""
    return np.array([_longest_run(row) for row in mask], dtype=np.int64).reshape(-1, 2)


def _thickness(runs: np.ndarray, position: int, step: int, span: Tuple[int, int]) -> int:
    """Count neighbouring lines (walking by ``step``) that carry the same long run."""
    need = 0.5 * (span[1] - span[0])
    t = 1
    k = position + step
    while 0 <= k < len(runs):
        s, e = runs[k]
        overlap = min(e, span[1]) - max(s, span[0])
        if overlap < need:
            break
        t += 1
        k += step
    return t


def _pick_line(runs: np.ndarray, extent: int, from_far_edge: bool, orientation: Orientation,
               min_fraction: float) -> Optional[AxisLine]:
    lengths = runs[:, 1] - runs[:, 0]
    candidates = np.flatnonzero(lengths >= min_fraction * extent)
    if candidates.size == 0:
        return None
    n = len(runs)
    distance = (n - 1 - candidates) if from_far_edge else candidates
    score = lengths[candidates] - PERIPHERY_WEIGHT * distance
    best = candidates[np.lexsort((distance, -score))[0]]
    span = (int(runs[best, 0]), int(runs[best, 1]))
    thick = _thickness(runs, int(best), -1 if from_far_edge else 1, span)
    return AxisLine(orientation, int(best), span, thick)


def detect_axes(img: RasterImage) -> Tuple[AxisLine, AxisLine]:
    """Find the x-axis and y-axis as long dark lines nearest the bottom/left edges."""
    dark = dark_mask(img)
    x_axis = _pick_line(_longest_runs(dark), img.width, True, Orientation.HORIZONTAL,
                        MIN_AXIS_FRACTION)
    y_axis = _pick_line(_longest_runs(dark.T), img.height, False, Orientation.VERTICAL,
                        MIN_AXIS_FRACTION)
    if x_axis is None or y_axis is None:
        missing = "x" if x_axis is None else "y"
        raise AxesNotFound(f"no {missing}-axis candidate in {img.width}x{img.height} image")
    return x_axis, y_axis


def detect_frame(img: RasterImage, axes: Tuple[AxisLine, AxisLine]) -> Tuple[Optional[AxisLine], Optional[AxisLine]]:
    """Top and right border lines of a boxed chart, if present.

    A border must be a dark line parallel to an axis that covers at least 90%
    of that axis' extent; the one farthest from the axis wins.
    """
    x_axis, y_axis = axes
    dark = dark_mask(img)
    top = right = None
    x_inner = x_axis.position - x_axis.thickness + 1
    y_inner = y_axis.position + y_axis.thickness
    x_span = x_axis.span
    for row in range(0, max(0, x_inner - 1)):
        if _covers(dark[row], x_span):
            s, e = _longest_run(dark[row])
            top = AxisLine(Orientation.HORIZONTAL, row, (s, e),
                           _thickness(_longest_runs(dark[row:x_inner]), 0, 1, (s, e)))
            break
    y_span = y_axis.span
    for col in range(img.width - 1, y_inner, -1):
        if _covers(dark[:, col], y_span):
            s, e = _longest_run(dark[:, col])
            lo = max(y_inner, col - 8)
            runs = _longest_runs(dark[:, lo:col + 1].T)
            right = AxisLine(Orientation.VERTICAL, col, (s, e),
                             _thickness(runs, len(runs) - 1, -1, (s, e)))
            break
    return top, right


def _covers(line: np.ndarray, span: Tuple[int, int], fraction: float = 0.9) -> bool:
    s, e = _longest_run(line)
    overlap = min(e, span[1]) - max(s, span[0])
    return overlap >= fraction * (span[1] - span[0])


def split_regions(img: RasterImage, axes: Tuple[AxisLine, AxisLine],
                  frame: Optional[Tuple[Optional[AxisLine], Optional[AxisLine]]] = None) -> Regions:
    """Data section above/right of the axes, label bands below and to the left.

    Label bands with no area come back as ``None``; a data section with no
    area raises ``DegenerateRegion``.
    """
    x_axis, y_axis = axes
    top, right = detect_frame(img, axes) if frame is None else frame
    x0 = y_axis.position + y_axis.thickness
    y1 = x_axis.position - x_axis.thickness + 1
    y0 = top.position + top.thickness if top is not None else 0
    x1 = right.position - right.thickness + 1 if right is not None else img.width
    if x0 >= x1 or y0 >= y1:
        raise DegenerateRegion(f"axes at row {x_axis.position}, column {y_axis.position} "
                               "leave no data section")
    data = BoundingBox(x0, y0, x1, y1)
    x_label = None
    if x_axis.position + 1 < img.height:
        x_label = BoundingBox(0, x_axis.position + 1, img.width, img.height)
    y_label = None
    if y_axis.position > 0:
        y_label = BoundingBox(0, 0, y_axis.position, min(x_axis.position + 1, img.height))
    return Regions(data, x_label, y_label)


# -- arithmetic progressions -------------------------------------------------

def progression_subset(coords: Sequence[float], tolerance: float = PROGRESSION_TOLERANCE,
                       min_step: float = 5.0) -> List[float]:
    """Largest subset of ``coords`` forming a gap-free arithmetic progression.

    Each member may deviate from the least-squares progression by at most
    ``tolerance``. Ties go to the smaller step, then the earlier start.
    """
    pts = sorted(set(float(c) for c in coords))
    n = len(pts)
    if n <= 1:
        return pts
    best: List[float] = []
    best_key = None
    arr = np.asarray(pts)
    for i in range(n):
        for j in range(i + 1, n):
            step = pts[j] - pts[i]
            if step < min_step:
                continue
            members = [pts[i]]
            expected = pts[i] + step
            while True:
                # two jittered neighbours can sit 2 * tolerance off the mean step
                k = int(np.argmin(np.abs(arr - expected)))
                if abs(arr[k] - expected) > 2 * tolerance or arr[k] <= members[-1]:
                    break
                members.append(float(arr[k]))
                expected = members[-1] + (members[-1] - members[0]) / (len(members) - 1)
            while len(members) > 2 and not _is_progression(members, tolerance):
                members.pop()
            key = (-len(members), step, pts[i])
            if best_key is None or key < best_key:
                best, best_key = members, key
    return best


def _is_progression(values: Sequence[float], tolerance: float) -> bool:
    idx = np.arange(len(values), dtype=float)
    slope, intercept = np.polyfit(idx, np.asarray(values, dtype=float), 1)
    return float(np.max(np.abs(slope * idx + intercept - np.asarray(values)))) <= tolerance


# -- ticks ---------------------------------------------------------------------

def tick_length_window(img: RasterImage) -> Tuple[int, int]:
    scale = max(img.width, img.height) / REFERENCE_SIZE
    lo = max(1, round(TICK_LENGTH_WINDOW[0] * scale))
    hi = max(lo, round(TICK_LENGTH_WINDOW[1] * scale))
    return lo, hi


def _run_from(strip: np.ndarray) -> np.ndarray:
    """Length of the leading True run of every column of ``strip`` (rows = steps)."""
    if strip.shape[0] == 0:
        return np.zeros(strip.shape[1], dtype=np.int64)
    false_rows = ~strip
    any_false = false_rows.any(axis=0)
    first_false = np.argmax(false_rows, axis=0)
    return np.where(any_false, first_false, strip.shape[0])


def _marks(lengths: np.ndarray, lo: int, hi: int, offset: int) -> List[float]:
    ok = (lengths >= lo) & (lengths <= hi)
    return [offset + (s + e - 1) / 2.0 for s, e in _runs(ok)]


def _tick_marks(dark: np.ndarray, axis: AxisLine, lo: int, hi: int) -> List[float]:
    """Candidate tick centres along one axis, from marks on either side of it."""
    s, e = axis.span
    p, t = axis.position, axis.thickness
    if axis.orientation is Orientation.HORIZONTAL:
        outward = dark[p + 1:p + hi + 2, s:e]
        inward = dark[max(0, p - t - hi - 1):p - t + 1, s:e][::-1]
    else:
        outward = dark[s:e, max(0, p - hi - 1):p][:, ::-1].T
        inward = dark[s:e, p + t:p + t + hi + 1].T
    out_len = _run_from(outward)
    in_len = _run_from(inward)
    # a run that fills the whole probe window is a line, not a tick
    out_len = np.where(out_len > hi, 0, out_len)
    in_len = np.where(in_len > hi, 0, in_len)
    return _marks(np.maximum(out_len, in_len), lo, hi, s)


def detect_ticks(img: RasterImage, axes: Tuple[AxisLine, AxisLine]) -> List[Tick]:
    dark = dark_mask(img)
    lo, hi = tick_length_window(img)
    ticks = []
    for name, axis in zip(("x", "y"), axes):
        coords = progression_subset(_tick_marks(dark, axis, lo, hi))
        ticks.extend(Tick(name, c) for c in coords)
    return ticks


# -- grid ------------------------------------------------------------------------

def light_line_mask(img: RasterImage, threshold: int = DEFAULT_WHITEN_THRESHOLD) -> np.ndarray:
    """Low-saturation, non-dark, non-background pixels: grid-line ink."""
    p = img.pixels
    non_white = (p < threshold).any(axis=2)
    return (img.saturation() <= GRID_MAX_SATURATION) & (img.luma() >= DARK_LUMA) & non_white


def _grid_candidates(light: np.ndarray, min_span: float) -> List[Tuple[int, int, int, int]]:
    """Rows of ``light`` whose light pixels span the row; (start, stop, first, last)."""
    n, width = light.shape
    count = light.sum(axis=1)
    has = count > 0
    first = np.argmax(light, axis=1)
    last = width - 1 - np.argmax(light[:, ::-1], axis=1)
    extent = np.where(has, last - first + 1, 0)
    ok = (extent >= min_span * width) & (count >= 0.5 * width)
    out = []
    for s, e in _runs(ok):
        out.append((s, e, int(first[s:e].min()), int(last[s:e].max())))
    return out


def detect_grid(img: RasterImage, axes: Tuple[AxisLine, AxisLine],
                threshold: int = DEFAULT_WHITEN_THRESHOLD) -> List[AxisLine]:
    regions = split_regions(img, axes)
    d = regions.data
    light = light_line_mask(img, threshold)[d.y_min:d.y_max, d.x_min:d.x_max]
    lines: List[AxisLine] = []
    for orientation, mask, origin, cross_origin in (
            (Orientation.HORIZONTAL, light, d.y_min, d.x_min),
            (Orientation.VERTICAL, light.T, d.x_min, d.y_min)):
        found = {}
        for s, e, first, last in _grid_candidates(mask, GRID_MIN_SPAN):
            centre = origin + (s + e - 1) / 2.0
            found[centre] = AxisLine(orientation, origin + s,
                                     (cross_origin + first, cross_origin + last + 1), e - s)
        keep = progression_subset(list(found))
        if len(keep) >= 2:
            lines.extend(found[c] for c in keep)
    return lines


def analyze_layout(img: RasterImage, threshold: int = DEFAULT_WHITEN_THRESHOLD) -> GraphLayout:
    """Run every layout detector on a single graph."""
    axes = detect_axes(img)
    frame = detect_frame(img, axes)
    regions = split_regions(img, axes, frame)
    return GraphLayout(
        x_axis=axes[0], y_axis=axes[1], data_region=regions.data,
        x_label_region=regions.x_label, y_label_region=regions.y_label,
        ticks=tuple(detect_ticks(img, axes)),
        grid_lines=tuple(detect_grid(img, axes, threshold)),
        frame_lines=tuple(f for f in frame if f is not None),
    )
