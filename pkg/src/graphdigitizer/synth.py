"""Deterministic synthetic line charts with exact ground truth.

With anti-aliasing off every drawn pixel takes exactly one colour from a
known source (palette, axis black, grid gray, text black), so the rest of the
pipeline can be checked against pixel-exact oracles.
"""

from __future__ import annotations

import colorsys
import itertools
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import font
from .detect import BoundingBox, DetectedObject, ObjectCategory, write_annotations
from .errors import InvalidSpec
from .layout import AxisLine, GraphLayout, Orientation, Tick
from .raster import Color, RasterImage, color_distance, dump_png
from .scale import AxisScale, ScaleKind

AXIS_BLACK = (0, 0, 0)
TEXT_BLACK = (0, 0, 0)
GRID_GRAY = (220, 220, 220)
TICK_LENGTH = 5
SUPERSAMPLE = 4
MARKER_SIZE = (18, 4)

AXIS_TITLES = [
    ("Pressure (bar)", "Uptake (mmol/g)"),
    ("Relative pressure P/P0", "Volume (cm3/g)"),
    ("Cycle number", "Capacity (mAh/g)"),
    ("Reaction coordinate", "Free energy (eV)"),
    ("Temperature (K)", "Conductivity (S/cm)"),
    ("Time (h)", "Conversion (%)"),
    ("Potential (V)", "Current density (mA/cm2)"),
    ("Wavelength (nm)", "Absorbance"),
]
SERIES_NAMES = [
    "adsorption", "desorption", "77 K", "298 K", "sample A", "sample B", "cycle 1",
    "cycle 50", "Pt/C", "MOF-5", "HKUST-1", "ZIF-8", "pristine", "doped", "fit", "exp",
]


@dataclass(frozen=True)
class ChartSpec:
    seed: int
    width: int = 640
    height: int = 480
    line_count: int = 2
    min_color_distance: float = 60.0
    palette: Optional[Tuple[Tuple[int, int, int], ...]] = None
    x_range: Optional[Tuple[float, float]] = None
    y_range: Optional[Tuple[float, float]] = None
    x_tick_count: Optional[int] = None
    y_tick_count: Optional[int] = None
    legend: bool = True
    grid: bool = False
    frame: bool = False
    noise: bool = False
    text_labels: bool = False
    line_width: int = 2
    axis_width: int = 1

    def validate(self) -> None:
        if not 1 <= self.line_count <= 5:
            raise InvalidSpec(f"line_count must be 1..5, got {self.line_count}")
        if self.width < 200 or self.height < 150:
            raise InvalidSpec("charts must be at least 200x150 px")
        if not 1 <= self.line_width <= 4 or not 1 <= self.axis_width <= 3:
            raise InvalidSpec("line_width must be 1..4 and axis_width 1..3")
        if self.min_color_distance < 0:
            raise InvalidSpec("min_color_distance must be non-negative")
        for count in (self.x_tick_count, self.y_tick_count):
            if count is not None and not 3 <= count <= 10:
                raise InvalidSpec("tick counts must be 3..10")
        for rng in (self.x_range, self.y_range):
            if rng is not None and not rng[0] < rng[1]:
                raise InvalidSpec(f"range {rng} must be increasing")
        if self.palette is not None:
            if len(self.palette) != self.line_count:
                raise InvalidSpec("palette size must equal line_count")
            for a, b in itertools.combinations(self.palette, 2):
                if color_distance(a, b) < self.min_color_distance:
                    raise InvalidSpec(f"palette colours {a} and {b} are too close")


@dataclass
class TruthSeries:
    label: str
    color: Color
    points: List[Tuple[float, float]]

    def value_at(self, x):
        xs = np.array([p[0] for p in self.points])
        ys = np.array([p[1] for p in self.points])
        return np.interp(x, xs, ys)


@dataclass
class GroundTruth:
    annotations: List[DetectedObject]
    layout: GraphLayout
    series: List[TruthSeries]
    x_scale: AxisScale
    y_scale: AxisScale
    x_label: str
    y_label: str
    line_pixel_count: int
    spec: ChartSpec

    def to_json(self) -> dict:
        lay = self.layout

        def axis(line: AxisLine) -> dict:
            return {"orientation": line.orientation.value, "position": line.position,
                    "span": list(line.span), "thickness": line.thickness}

        def scale(s: AxisScale) -> dict:
            return {"kind": s.kind.value, "slope": s.slope, "intercept": s.intercept,
                    "label": s.label}

        return {
            "spec": _spec_json(self.spec),
            "x_axis": axis(lay.x_axis),
            "y_axis": axis(lay.y_axis),
            "data_region": lay.data_region.as_list(),
            "ticks": {"x": [t.coordinate for t in lay.ticks_on("x")],
                      "y": [t.coordinate for t in lay.ticks_on("y")]},
            "grid_lines": [axis(g) for g in lay.grid_lines],
            "frame_lines": [axis(f) for f in lay.frame_lines],
            "x_scale": scale(self.x_scale),
            "y_scale": scale(self.y_scale),
            "series": [{"label": s.label, "color": list(s.color.as_tuple()),
                        "points": [list(p) for p in s.points]} for s in self.series],
            "legend_count": self.spec.line_count if self.spec.legend else 0,
            "line_pixel_count": self.line_pixel_count,
        }


def _spec_json(spec: ChartSpec) -> dict:
    d = asdict(spec)
    for key in ("palette", "x_range", "y_range"):
        if d[key] is not None:
            d[key] = [list(v) if isinstance(v, tuple) else v for v in d[key]]
    return d


# -- random choices --------------------------------------------------------------------

def random_palette(rng: np.random.Generator, count: int, min_distance: float,
                   attempts: int = 5000) -> List[Tuple[int, int, int]]:
    """Saturated, non-gray colours with pairwise RGB distance >= ``min_distance``."""
    chosen: List[Tuple[int, int, int]] = []
    for _ in range(attempts):
        if len(chosen) == count:
            return chosen
        h, s, v = rng.random(), rng.uniform(0.6, 1.0), rng.uniform(0.45, 0.95)
        rgb = tuple(int(round(c * 255)) for c in colorsys.hsv_to_rgb(h, s, v))
        if max(rgb) - min(rgb) < 60:
            continue
        if all(color_distance(rgb, c) >= min_distance for c in chosen):
            chosen.append(rgb)
    if len(chosen) == count:
        return chosen
    raise InvalidSpec(f"could not find {count} colours {min_distance} apart")


def _decimals(*values: float) -> int:
    for d in range(0, 8):
        if all(abs(round(v, d) - v) < 1e-9 * max(1.0, abs(v)) for v in values):
            return d
    return 8


def format_tick(value: float, decimals: int) -> str:
    text = f"{value:.{decimals}f}"
    return "0" if float(text) == 0 else text


def _nice_ticks(rng: np.random.Generator, count: int) -> Tuple[float, float]:
    """Random (first value, step) with a 1-2-2.5-5 step."""
    mantissa = float(rng.choice([1.0, 2.0, 2.5, 5.0]))
    step = mantissa * 10.0 ** int(rng.integers(-2, 4))
    start = step * int(rng.integers(-2, 6))
    return start, step


# -- rasterization --------------------------------------------------------------------

def segment_pixels(x0: int, y0: int, x1: int, y1: int) -> Tuple[np.ndarray, np.ndarray]:
    """Integer DDA of a segment: one pixel per step along its major axis."""
    n = max(abs(x1 - x0), abs(y1 - y0))
    if n == 0:
        return np.array([x0]), np.array([y0])
    i = np.arange(n + 1, dtype=np.int64)
    xs = x0 + (2 * i * (x1 - x0) + n) // (2 * n)
    ys = y0 + (2 * i * (y1 - y0) + n) // (2 * n)
    return xs, ys


def polyline_mask(points: Sequence[Tuple[int, int]], width: int, shape: Tuple[int, int]) -> np.ndarray:
    """Boolean mask of a polyline stamped with a ``width`` x ``width`` square brush."""
    mask = np.zeros(shape, dtype=bool)
    xs_all, ys_all = [], []
    for (xa, ya), (xb, yb) in zip(points[:-1], points[1:]):
        xs, ys = segment_pixels(xa, ya, xb, yb)
        xs_all.append(xs)
        ys_all.append(ys)
    xs = np.concatenate(xs_all)
    ys = np.concatenate(ys_all)
    lo = -((width - 1) // 2)
    for dy in range(lo, lo + width):
        for dx in range(lo, lo + width):
            px, py = xs + dx, ys + dy
            ok = (px >= 0) & (px < shape[1]) & (py >= 0) & (py < shape[0])
            mask[py[ok], px[ok]] = True
    return mask


def coverage(points_f: Sequence[Tuple[float, float]], width: int, shape: Tuple[int, int],
             factor: int = SUPERSAMPLE) -> np.ndarray:
    """Fractional pixel coverage of a polyline rendered at ``factor`` x resolution."""
    big = (shape[0] * factor, shape[1] * factor)
    pts = [(int(round(x * factor + (factor - 1) / 2)), int(round(y * factor + (factor - 1) / 2)))
           for x, y in points_f]
    mask = polyline_mask(pts, width * factor, big)
    return mask.reshape(shape[0], factor, shape[1], factor).mean(axis=(1, 3))


class _Canvas:
    def __init__(self, width: int, height: int):
        self.arr = np.full((height, width, 3), 255, dtype=np.uint8)
        self.width, self.height = width, height

    def fill(self, x0, y0, x1, y1, color) -> None:
        self.arr[max(0, y0):min(self.height, y1), max(0, x0):min(self.width, x1)] = color

    def paint(self, mask: np.ndarray, color) -> None:
        self.arr[mask] = color

    def blend(self, alpha: np.ndarray, color) -> None:
        a = alpha[..., None]
        mixed = a * np.asarray(color, dtype=np.float64) + (1.0 - a) * self.arr
        self.arr = np.rint(mixed).astype(np.uint8)

    def text(self, text: str, x: int, y: int, color, rotate: bool = False) -> BoundingBox:
        ink = font.render_text(text)
        if rotate:
            ink = np.rot90(ink)
        h, w = ink.shape
        # slide the text inside the canvas so its annotation box stays in bounds
        x = min(max(x, 0), self.width - w)
        y = min(max(y, 0), self.height - h)
        self.arr[y:y + h, x:x + w][ink] = color
        return BoundingBox(x, y, x + w, y + h)


# -- the generator -------------------------------------------------------------------

def generate_chart(spec: ChartSpec) -> Tuple[RasterImage, GroundTruth]:
    """Render a line chart and return it with its exact ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    W, H = spec.width, spec.height
    t = spec.axis_width

    palette = list(spec.palette) if spec.palette is not None else \
        random_palette(rng, spec.line_count, spec.min_color_distance)
    x_title, y_title = AXIS_TITLES[int(rng.integers(len(AXIS_TITLES)))]
    names = [SERIES_NAMES[i] for i in rng.permutation(len(SERIES_NAMES))[:spec.line_count]]

    nx = spec.x_tick_count or int(rng.integers(4, 8))
    ny = spec.y_tick_count or int(rng.integers(4, 8))
    if spec.x_range is None:
        x_start, x_step = _nice_ticks(rng, nx)
    else:
        x_start, x_step = spec.x_range[0], (spec.x_range[1] - spec.x_range[0]) / (nx - 1)
    if spec.y_range is None:
        y_start, y_step = _nice_ticks(rng, ny)
    else:
        y_start, y_step = spec.y_range[0], (spec.y_range[1] - spec.y_range[0]) / (ny - 1)
    x_dec = _decimals(x_start, x_step) if spec.x_range is None else 4
    y_dec = _decimals(y_start, y_step) if spec.y_range is None else 4
    x_values = [x_start + i * x_step for i in range(nx)]
    y_values = [y_start + i * y_step for i in range(ny)]
    x_texts = [format_tick(v, x_dec) for v in x_values]
    y_texts = [format_tick(v, y_dec) for v in y_values]

    # geometry: title | labels | ticks | y-axis ... right end
    y_label_w = max(font.text_width(s) for s in y_texts)
    title_x = int(rng.integers(2, 8))
    X0 = title_x + font.GLYPH_H + 5 + y_label_w + 3 + TICK_LENGTH + int(rng.integers(0, 12))
    R = W - 1 - int(rng.integers(10, 30))
    T = int(rng.integers(8, 25))
    bottom_stack = TICK_LENGTH + 3 + font.GLYPH_H + 4 + font.GLYPH_H
    Y0 = H - 1 - bottom_stack - int(rng.integers(3, 15))
    if R - X0 < 100 or Y0 - T < 80:
        raise InvalidSpec("chart too small for its labels")

    pad_x = int(rng.integers(0, 20))
    Sx = (R - X0 - pad_x - int(rng.integers(0, 20))) // (nx - 1)
    pad_y = int(rng.integers(0, 20))
    Sy = (Y0 - T - pad_y - int(rng.integers(0, 20))) // (ny - 1)
    x_ticks = [X0 + pad_x + i * Sx for i in range(nx)]
    y_ticks = [Y0 - pad_y - i * Sy for i in range(ny)]

    x_slope = x_step / Sx
    x_icpt = x_start - x_ticks[0] * x_slope
    y_slope = -y_step / Sy
    y_icpt = y_start - y_ticks[0] * y_slope

    def to_px(x: float, y: float) -> Tuple[float, float]:
        return (x - x_icpt) / x_slope, (y - y_icpt) / y_slope

    canvas = _Canvas(W, H)
    data_top = T + 1 if spec.frame else 0
    data_right = R if spec.frame else W
    data_region = BoundingBox(X0 + t, data_top, data_right, Y0 - t + 1)

    grid_lines: List[AxisLine] = []
    if spec.grid:
        for p in x_ticks:
            if X0 + t <= p < R:
                canvas.fill(p, T + 1, p + 1, Y0 - t + 1, GRID_GRAY)
                grid_lines.append(AxisLine(Orientation.VERTICAL, p, (T + 1, Y0 - t + 1), 1))
        for q in y_ticks:
            if T < q <= Y0 - t:
                canvas.fill(X0 + t, q, R, q + 1, GRID_GRAY)
                grid_lines.append(AxisLine(Orientation.HORIZONTAL, q, (X0 + t, R), 1))

    # data series
    series: List[TruthSeries] = []
    x_lo = x_values[0] + 0.01 * (x_values[-1] - x_values[0])
    x_hi = x_values[-1] - 0.01 * (x_values[-1] - x_values[0])
    y_lo = y_values[0] + 0.05 * (y_values[-1] - y_values[0])
    y_hi = y_values[-1] - 0.05 * (y_values[-1] - y_values[0])
    for color, name in zip(palette, names):
        k = int(rng.integers(3, 8))
        inner = np.sort(rng.uniform(x_lo, x_hi, size=k - 2))
        xs = np.concatenate(([x_lo], inner, [x_hi]))
        ys = rng.uniform(y_lo, y_hi, size=k)
        pts = [(float(a), float(b)) for a, b in zip(xs, ys)]
        series.append(TruthSeries(name, Color.of(color), pts))
        px = [to_px(a, b) for a, b in pts]
        if spec.noise:
            canvas.blend(coverage(px, spec.line_width, (H, W)), color)
        else:
            ipx = [(int(round(a)), int(round(b))) for a, b in px]
            canvas.paint(polyline_mask(ipx, spec.line_width, (H, W)), color)

    # axes, frame, ticks
    canvas.fill(X0, Y0 - t + 1, R + 1, Y0 + 1, AXIS_BLACK)
    canvas.fill(X0, T, X0 + t, Y0 + 1, AXIS_BLACK)
    x_axis = AxisLine(Orientation.HORIZONTAL, Y0, (X0, R + 1), t)
    y_axis = AxisLine(Orientation.VERTICAL, X0, (T, Y0 + 1), t)
    frame_lines: List[AxisLine] = []
    if spec.frame:
        canvas.fill(X0, T, R + 1, T + 1, AXIS_BLACK)
        canvas.fill(R, T, R + 1, Y0 + 1, AXIS_BLACK)
        frame_lines = [AxisLine(Orientation.HORIZONTAL, T, (X0, R + 1), 1),
                       AxisLine(Orientation.VERTICAL, R, (T, Y0 + 1), 1)]
    for p in x_ticks:
        canvas.fill(p, Y0 + 1, p + 1, Y0 + 1 + TICK_LENGTH, AXIS_BLACK)
    for q in y_ticks:
        canvas.fill(X0 - TICK_LENGTH, q, X0, q + 1, AXIS_BLACK)

    annotations: List[DetectedObject] = [
        DetectedObject(ObjectCategory.GRAPH, BoundingBox(0, 0, W, H))]

    def add_text(category, text, x, y, color=TEXT_BLACK, rotate=False):
        box = canvas.text(text, x, y, color, rotate)
        annotations.append(DetectedObject(category, box, 1.0, text))
        return box

    label_top = Y0 + TICK_LENGTH + 4
    for p, s in zip(x_ticks, x_texts):
        w = font.text_width(s)
        add_text(ObjectCategory.TEXT, s, p - (w - 1) // 2, label_top)
    label_right = X0 - TICK_LENGTH - 3
    for q, s in zip(y_ticks, y_texts):
        add_text(ObjectCategory.TEXT, s, label_right - font.text_width(s), q - 3)
    xt_w = font.text_width(x_title)
    add_text(ObjectCategory.TEXT, x_title, (X0 + R) // 2 - xt_w // 2,
             label_top + font.GLYPH_H + 4)
    yt_h = font.text_width(y_title)
    add_text(ObjectCategory.TEXT, y_title, title_x, max(0, (T + Y0) // 2 - yt_h // 2),
             rotate=True)

    plot_box = BoundingBox(X0 + t, T + 1, R, Y0 - t + 1)
    if spec.legend:
        _draw_legend(canvas, rng, palette, names, plot_box, annotations)
    if spec.text_labels:
        _draw_series_texts(canvas, series, to_px, plot_box, annotations)

    img = RasterImage(canvas.arr)
    # line pixels a cleaner should leave behind: inside the data region and
    # outside every in-graph annotation box grown by the 1 px erase margin
    visible = np.zeros((H, W), dtype=bool)
    visible[data_region.y_min:data_region.y_max, data_region.x_min:data_region.x_max] = True
    for obj in annotations:
        if not obj.category.is_subfigure:
            b = obj.box
            visible[max(0, b.y_min - 1):b.y_max + 1, max(0, b.x_min - 1):b.x_max + 1] = False
    line_pixels = 0
    if not spec.noise:
        for color in palette:
            line_pixels += int(((canvas.arr == np.asarray(color, dtype=np.uint8)).all(axis=2)
                                & visible).sum())

    layout = GraphLayout(
        x_axis=x_axis, y_axis=y_axis, data_region=data_region,
        x_label_region=BoundingBox(0, Y0 + 1, W, H),
        y_label_region=BoundingBox(0, 0, X0, Y0 + 1),
        ticks=tuple([Tick("x", float(p)) for p in x_ticks] + [Tick("y", float(q)) for q in y_ticks]),
        grid_lines=tuple(grid_lines), frame_lines=tuple(frame_lines))
    truth = GroundTruth(
        annotations=annotations, layout=layout, series=series,
        x_scale=AxisScale(ScaleKind.LINEAR, x_slope, x_icpt, (X0, R), x_title),
        y_scale=AxisScale(ScaleKind.LINEAR, y_slope, y_icpt, (T, Y0), y_title),
        x_label=x_title, y_label=y_title, line_pixel_count=line_pixels, spec=spec)
    return img, truth


def _draw_legend(canvas: _Canvas, rng, palette, names, region: BoundingBox,
                 annotations: List[DetectedObject]) -> None:
    mw, mh = MARKER_SIZE
    row_h = 12
    text_w = max(font.text_width(n) for n in names)
    width = 3 + mw + 5 + text_w + 3
    height = 3 + row_h * len(names) + 1
    left_side = bool(rng.integers(0, 2))
    x = region.x_min + 8 if left_side else region.x_max - 8 - width
    y = region.y_min + 8
    canvas.fill(x, y, x + width, y + height, (255, 255, 255))
    for i, (color, name) in enumerate(zip(palette, names)):
        top = y + 3 + i * row_h
        mx, my = x + 3, top + (font.GLYPH_H - mh) // 2
        canvas.fill(mx, my, mx + mw, my + mh, color)
        annotations.append(DetectedObject(ObjectCategory.MARKER,
                                          BoundingBox(mx, my, mx + mw, my + mh)))
        box = canvas.text(name, mx + mw + 5, top, TEXT_BLACK)
        annotations.append(DetectedObject(ObjectCategory.LEGEND, box, 1.0, name))


def _draw_series_texts(canvas: _Canvas, series: List[TruthSeries], to_px,
                       region: BoundingBox, annotations: List[DetectedObject]) -> None:
    """Write each series' name just above the line, in the line's colour."""
    for k, s in enumerate(series):
        frac = 0.2 + 0.6 * (k + 0.5) / len(series)
        x_val = s.points[0][0] + frac * (s.points[-1][0] - s.points[0][0])
        px, py = to_px(x_val, float(s.value_at(x_val)))
        w = font.text_width(s.label)
        x0 = int(min(max(region.x_min + 2, round(px) - w // 2), region.x_max - w - 2))
        y0 = int(round(py)) - font.GLYPH_H - 4
        if y0 < region.y_min + 2:
            y0 = int(round(py)) + 4
        box = canvas.text(s.label, x0, y0, s.color.as_tuple())
        annotations.append(DetectedObject(ObjectCategory.TEXT, box, 1.0, s.label))


def generate_non_graph(seed: int, width: int = 320, height: int = 240) -> RasterImage:
    """A photo-like smooth colour field with no axes."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    arr = np.zeros((height, width, 3))
    for ch in range(3):
        fx, fy, ph = rng.uniform(0.005, 0.05), rng.uniform(0.005, 0.05), rng.uniform(0, 6.3)
        arr[..., ch] = 127 + 100 * np.sin(fx * xx + ph) * np.cos(fy * yy)
    return RasterImage(np.clip(arr, 0, 255).astype(np.uint8))


def compose_panels(panels: Sequence[RasterImage], gutter: int, columns: int
                   ) -> Tuple[RasterImage, List[BoundingBox]]:
    """Tile panels on a white page separated by ``gutter`` px; returns panel boxes."""
    rows = math.ceil(len(panels) / columns)
    cell_w = max(p.width for p in panels)
    cell_h = max(p.height for p in panels)
    W = columns * cell_w + (columns + 1) * gutter
    H = rows * cell_h + (rows + 1) * gutter
    arr = np.full((H, W, 3), 255, dtype=np.uint8)
    boxes = []
    for i, p in enumerate(panels):
        r, c = divmod(i, columns)
        x0 = gutter + c * (cell_w + gutter)
        y0 = gutter + r * (cell_h + gutter)
        arr[y0:y0 + p.height, x0:x0 + p.width] = p.pixels
        boxes.append(BoundingBox(x0, y0, x0 + p.width, y0 + p.height))
    return RasterImage(arr), boxes


def write_chart(out_dir, stem: str, img: RasterImage, truth: GroundTruth) -> str:
    """Write the ``.png``, ``.ann.json`` and ``.truth.json`` triplet; returns the image path."""
    os.makedirs(out_dir, exist_ok=True)
    image_path = os.path.join(out_dir, stem + ".png")
    dump_png(img, image_path)
    write_annotations(os.path.join(out_dir, stem + ".ann.json"), truth.annotations,
                      img.width, img.height)
    with open(os.path.join(out_dir, stem + ".truth.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(truth.to_json(), fh, indent=1)
        fh.write("\n")
    return image_path


def corpus_specs(count: int, seed: int, min_color_distance: float = 60.0, noise: bool = False,
                 line_counts: Tuple[int, int] = (2, 5)) -> List[ChartSpec]:
    """Fixed-seed mix of chart options for benchmark corpora."""
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(count):
        specs.append(ChartSpec(
            seed=int(rng.integers(0, 2**31 - 1)),
            line_count=int(rng.integers(line_counts[0], line_counts[1] + 1)),
            min_color_distance=min_color_distance,
            grid=bool(rng.random() < 0.4),
            frame=bool(rng.random() < 0.4),
            axis_width=int(rng.choice([1, 1, 2])),
            noise=noise,
        ))
    return specs
