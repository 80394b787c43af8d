"""Strip everything but data lines from a graph image."""

from __future__ import annotations

from typing import Sequence

from .detect import DetectedObject
from .layout import (GRID_MAX_SATURATION, AxisLine, GraphLayout, Orientation, dark_mask,
                     light_line_mask, tick_length_window)
from .raster import DEFAULT_WHITEN_THRESHOLD, RasterImage, whiten_background

ERASE_MARGIN = 1


def erase_objects(img: RasterImage, detections: Sequence[DetectedObject],
                  margin: int = ERASE_MARGIN) -> RasterImage:
    """Paint every detection box (grown by ``margin`` px) white."""
    if not detections:
        return img
    arr = img.to_array()
    h, w = img.height, img.width
    for det in detections:
        b = det.box
        x0, y0 = max(0, b.x_min - margin), max(0, b.y_min - margin)
        x1, y1 = min(w, b.x_max + margin), min(h, b.y_max + margin)
        if x0 < x1 and y0 < y1:
            arr[y0:y1, x0:x1] = 255
    return RasterImage(arr)


def _line_slices(line: AxisLine, grows_up: bool):
    """Row and column slices covered by an axis-parallel line."""
    if line.orientation is Orientation.HORIZONTAL:
        lo = line.position - line.thickness + 1 if grows_up else line.position
        return slice(max(lo, 0), lo + line.thickness), slice(*line.span)
    lo = line.position - line.thickness + 1 if grows_up else line.position
    return slice(*line.span), slice(max(lo, 0), lo + line.thickness)


def erase_layout_artifacts(img: RasterImage, layout: GraphLayout,
                           threshold: int = DEFAULT_WHITEN_THRESHOLD) -> RasterImage:
    """Remove axes, frame, ticks and grid, then whiten the background.

    Axis and frame lines are painted out in full. Tick marks and grid lines
    only lose their own ink: dark neutral pixels for ticks, light low-saturation
    pixels for grid lines, so a coloured data line crossing them survives.
    """
    arr = img.to_array()
    # x-axis and right frame grow toward the data section (up / left)
    for line, grows_up in ((layout.x_axis, True), (layout.y_axis, False)):
        rows, cols = _line_slices(line, grows_up)
        arr[rows, cols] = 255
    for line in layout.frame_lines:
        rows, cols = _line_slices(line, line.orientation is Orientation.VERTICAL)
        arr[rows, cols] = 255

    # only neutral ink counts as tick; coloured data pixels stay
    tick_ink = dark_mask(img) & (img.saturation() <= GRID_MAX_SATURATION)
    _, hi = tick_length_window(img)
    xp, xt = layout.x_axis.position, layout.x_axis.thickness
    yp, yt = layout.y_axis.position, layout.y_axis.thickness
    for tick in layout.ticks:
        c = int(round(tick.coordinate))
        if tick.axis == "x":
            rows = slice(max(0, xp - xt - hi), min(img.height, xp + hi + 2))
            cols = slice(max(0, c - 1), min(img.width, c + 2))
        else:
            rows = slice(max(0, c - 1), min(img.height, c + 2))
            cols = slice(max(0, yp - hi - 1), min(img.width, yp + yt + hi + 1))
        sub = arr[rows, cols]
        sub[tick_ink[rows, cols]] = 255

    if layout.grid_lines:
        light = light_line_mask(img, threshold)
        for line in layout.grid_lines:
            rows, cols = _line_slices(line, False)
            sub = arr[rows, cols]
            sub[light[rows, cols]] = 255

    return whiten_background(RasterImage(arr), threshold)
