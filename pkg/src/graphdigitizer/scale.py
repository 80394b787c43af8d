"""Axis numbers to a pixel-to-value map, with a normalized fallback."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import Degenerate, NonNumeric, TooFewLabels, ValidationFailed
from .layout import AxisLine, Orientation

ARITHMETIC_TOLERANCE = 0.05
MIN_LABELS = 3

_NUMBER = re.compile(
    r"^[+\-−]?"
    r"(?:(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?|\.\d+)"
    r"(?:[eE][+\-−]?\d+)?$"
)


def parse_numeric(text: str) -> float:
    """Parse an axis number: sign, decimals, thousands commas and exponents."""
    s = text.strip()
    if not _NUMBER.match(s):
        raise NonNumeric(f"not a number: {text!r}")
    value = float(s.replace(",", "").replace("−", "-"))
    if not math.isfinite(value):
        raise NonNumeric(f"not a finite number: {text!r}")
    return value


@dataclass(frozen=True)
class NumericLabel:
    raw_text: str
    value: float
    anchor: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"label value must be finite, got {self.value}")


class ScaleKind(enum.Enum):
    LINEAR = "linear"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class AxisScale:
    kind: ScaleKind
    slope: float
    intercept: float
    axis_span: Tuple[int, int]
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind is ScaleKind.LINEAR and not (math.isfinite(self.slope) and self.slope != 0):
            raise ValueError("a linear scale needs a finite nonzero slope")

    def apply(self, pixel):
        pixel = np.asarray(pixel, dtype=np.float64)
        if self.kind is ScaleKind.NORMALIZED:
            # Divide explicitly so the span ends land exactly on 0 and 1.
            lo, hi = self.axis_span
            width = max(hi - lo, 1)
            frac = (pixel - lo) / width if self.slope > 0 else (hi - pixel) / width
            value = np.clip(frac, 0.0, 1.0)
        else:
            value = self.slope * pixel + self.intercept
        return float(value) if np.ndim(value) == 0 else value

    def with_label(self, label: Optional[str]) -> "AxisScale":
        return AxisScale(self.kind, self.slope, self.intercept, self.axis_span, label)


def _steps_consistent(steps: np.ndarray, tolerance: float) -> bool:
    mean = steps.mean()
    if mean == 0 or not math.isfinite(mean):
        return False
    return bool(np.all(np.abs(steps - mean) <= tolerance * abs(mean)))


def _sorted(labels: Sequence[NumericLabel]) -> List[NumericLabel]:
    return sorted(labels, key=lambda lab: lab.anchor)


def validate_arithmetic(labels: Sequence[NumericLabel], tolerance: float = ARITHMETIC_TOLERANCE) -> bool:
    """Do both the values and their pixel anchors advance in equal steps?"""
    if len(labels) < MIN_LABELS:
        raise TooFewLabels(f"need at least {MIN_LABELS} labels, got {len(labels)}")
    labs = _sorted(labels)
    values = np.array([lab.value for lab in labs])
    anchors = np.array([lab.anchor for lab in labs], dtype=np.float64)
    return (_steps_consistent(np.diff(values), tolerance)
            and _steps_consistent(np.diff(anchors), tolerance))


def looks_geometric(labels: Sequence[NumericLabel], tolerance: float = ARITHMETIC_TOLERANCE) -> bool:
    """Values in constant ratio at evenly spaced anchors: probably a log axis."""
    if len(labels) < MIN_LABELS:
        return False
    labs = _sorted(labels)
    values = np.array([lab.value for lab in labs])
    if not (np.all(values > 0) or np.all(values < 0)):
        return False
    ratios = values[1:] / values[:-1]
    if np.allclose(ratios, 1.0):
        return False
    anchors = np.array([lab.anchor for lab in labs], dtype=np.float64)
    return (_steps_consistent(np.log(ratios), tolerance)
            and _steps_consistent(np.diff(anchors), tolerance))


def _inclusive_span(axis: AxisLine) -> Tuple[int, int]:
    return (axis.span[0], axis.span[1] - 1)


def fit_axis_scale(labels: Sequence[NumericLabel], axis: AxisLine,
                   tolerance: float = ARITHMETIC_TOLERANCE) -> AxisScale:
    """Least-squares ``value = slope * pixel + intercept`` through validated labels."""
    if len(labels) < MIN_LABELS:
        raise ValidationFailed(f"need at least {MIN_LABELS} labels, got {len(labels)}")
    anchors = np.array([lab.anchor for lab in labels], dtype=np.float64)
    values = np.array([lab.value for lab in labels], dtype=np.float64)
    if np.all(anchors == anchors[0]):
        raise Degenerate("all labels share one pixel anchor")
    if not validate_arithmetic(labels, tolerance):
        raise ValidationFailed("labels do not form an arithmetic sequence")
    a_mean, v_mean = anchors.mean(), values.mean()
    da = anchors - a_mean
    slope = float(np.dot(da, values - v_mean) / np.dot(da, da))
    intercept = float(v_mean - slope * a_mean)
    return AxisScale(ScaleKind.LINEAR, slope, intercept, _inclusive_span(axis))


def make_normalized_scale(axis: AxisLine) -> AxisScale:
    """Map the axis' pixel extent onto [0, 1].

    Horizontal axes run left (0) to right (1); vertical axes run bottom (0)
    to top (1), matching the usual direction of increasing values.
    """
    lo, hi = _inclusive_span(axis)
    width = max(hi - lo, 1)
    if axis.orientation is Orientation.HORIZONTAL:
        slope, intercept = 1.0 / width, -lo / width
    else:
        slope, intercept = -1.0 / width, hi / width
    return AxisScale(ScaleKind.NORMALIZED, slope, intercept, (lo, hi))


def resolve_axis_scale(labels: Sequence[NumericLabel], axis: AxisLine,
                       tolerance: float = ARITHMETIC_TOLERANCE) -> Tuple[AxisScale, List[str]]:
    """Fit a linear scale or fall back to normalized, returning warning flags."""
    try:
        return fit_axis_scale(labels, axis, tolerance), []
    except (ValidationFailed, Degenerate):
        pass
    flags = ["normalized"]
    if looks_geometric(labels, tolerance):
        flags.append("suspected-log")
    return make_normalized_scale(axis), flags


def rescale_series(series: Sequence[Tuple[float, float]], x_scale: AxisScale,
                   y_scale: AxisScale) -> List[Tuple[float, float]]:
    if not series:
        return []
    px = np.array([p[0] for p in series], dtype=np.float64)
    py = np.array([p[1] for p in series], dtype=np.float64)
    xs = np.atleast_1d(x_scale.apply(px))
    ys = np.atleast_1d(y_scale.apply(py))
    return [(float(x), float(y)) for x, y in zip(xs, ys)]
