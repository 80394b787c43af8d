import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from graphdigitizer.errors import Degenerate, NonNumeric, TooFewLabels, ValidationFailed
from graphdigitizer.layout import AxisLine, Orientation
from graphdigitizer.scale import (AxisScale, NumericLabel, ScaleKind, fit_axis_scale, looks_geometric,
                                  make_normalized_scale, parse_numeric, rescale_series,
                                  resolve_axis_scale, validate_arithmetic)

X_AXIS = AxisLine(Orientation.HORIZONTAL, 300, (40, 291))
Y_AXIS = AxisLine(Orientation.VERTICAL, 40, (20, 301))


def labels(values, anchors):
    return [NumericLabel(str(v), float(v), float(a)) for v, a in zip(values, anchors)]


@pytest.mark.parametrize("text,value", [
    ("0.5", 0.5), ("1e-3", 0.001), ("1E3", 1000.0), ("-5", -5.0), ("+2", 2.0),
    ("1,000", 1000.0), ("12,345.5", 12345.5), (".25", 0.25), ("−3", -3.0), (" 7 ", 7.0),
])
def test_parse_numeric_accepts(text, value):
    assert parse_numeric(text) == value


@pytest.mark.parametrize("text", ["O.5", "", "abc", "1.2.3", "1,00", "5%", "e5", "inf", "nan"])
def test_parse_numeric_rejects(text):
    with pytest.raises(NonNumeric):
        parse_numeric(text)


def test_validate_examples():
    assert validate_arithmetic(labels([0, 10, 20, 30], [40, 90, 140, 190]))
    assert not validate_arithmetic(labels([1, 2, 4], [40, 90, 140]))
    assert validate_arithmetic(labels([0, 0.5, 1.01], [40, 90, 140]))
    with pytest.raises(TooFewLabels):
        validate_arithmetic(labels([0, 1], [0, 10]))


def test_validate_rejects_uneven_anchors():
    assert not validate_arithmetic(labels([0, 10, 20], [40, 90, 160]))


def test_fit_example():
    scale = fit_axis_scale(labels([0, 0.5, 1.0], [50, 150, 250]), X_AXIS)
    assert scale.kind is ScaleKind.LINEAR
    assert scale.slope == pytest.approx(0.005) and scale.intercept == pytest.approx(-0.25)
    assert scale.apply(100) == pytest.approx(0.25)


def test_fit_needs_three_labels():
    with pytest.raises(ValidationFailed):
        fit_axis_scale(labels([0, 100], [50, 150]), X_AXIS)


def test_fit_inverted_y_axis():
    scale = fit_axis_scale(labels([0, 0.5, 1.0], [250, 150, 50]), Y_AXIS)
    assert scale.slope < 0
    for v, a in zip([0, 0.5, 1.0], [250, 150, 50]):
        assert scale.apply(a) == pytest.approx(v, abs=1e-12)


def test_fit_degenerate_anchors():
    with pytest.raises(Degenerate):
        fit_axis_scale(labels([0, 1, 2], [80, 80, 80]), X_AXIS)


def test_fit_rejects_geometric():
    with pytest.raises(ValidationFailed):
        fit_axis_scale(labels([1, 10, 100], [50, 150, 250]), X_AXIS)


def test_normalized_examples():
    scale = make_normalized_scale(X_AXIS)  # pixels 40..290 inclusive
    assert scale.kind is ScaleKind.NORMALIZED
    assert scale.apply(40) == 0.0
    assert scale.apply(290) == 1.0
    assert scale.apply(165) == 0.5
    assert scale.apply(1000) == 1.0 and scale.apply(-5) == 0.0


def test_normalized_vertical_runs_bottom_up():
    scale = make_normalized_scale(Y_AXIS)  # rows 20..300
    assert scale.apply(300) == 0.0 and scale.apply(20) == 1.0


def test_resolve_flags_log_axis():
    scale, flags = resolve_axis_scale(labels([1, 10, 100], [50, 150, 250]), X_AXIS)
    assert scale.kind is ScaleKind.NORMALIZED
    assert flags == ["normalized", "suspected-log"]
    scale, flags = resolve_axis_scale(labels([0, 10, 20], [50, 150, 250]), X_AXIS)
    assert scale.kind is ScaleKind.LINEAR and flags == []
    _, flags = resolve_axis_scale([], X_AXIS)
    assert flags == ["normalized"]


def test_looks_geometric():
    assert looks_geometric(labels([0.01, 0.1, 1, 10], [0, 50, 100, 150]))
    assert not looks_geometric(labels([0, 10, 20], [0, 50, 100]))
    assert not looks_geometric(labels([1, 10], [0, 50]))


def test_rescale_examples():
    y = AxisScale(ScaleKind.LINEAR, -0.01, 2.0, (0, 200))
    x = AxisScale(ScaleKind.LINEAR, 1.0, 0.0, (0, 200))
    assert rescale_series([(c, 100.0) for c in range(5)], x, y) == [(float(c), 1.0) for c in range(5)]
    xn = make_normalized_scale(X_AXIS)
    out = rescale_series([(c, 0.0) for c in range(0, 400, 7)], xn, y)
    assert all(0.0 <= px <= 1.0 for px, _ in out)
    assert rescale_series([], x, y) == []


def test_linear_scale_needs_nonzero_slope():
    with pytest.raises(ValueError):
        AxisScale(ScaleKind.LINEAR, 0.0, 1.0, (0, 10))


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3), st.integers(3, 10), st.floats(10, 80),
       st.floats(0, 100), st.booleans())
def test_round_trip(v0, step, n, spacing, a0, down):
    values = [v0 + i * step for i in range(n)]
    anchors = [a0 + i * spacing for i in range(n)]
    if down:
        anchors = anchors[::-1]
    labs = labels(values, anchors)
    scale = fit_axis_scale(labs, X_AXIS)
    span = max(abs(v) for v in values) + step
    for lab in labs:
        assert math.isclose(scale.apply(lab.anchor), lab.value, rel_tol=1e-9, abs_tol=1e-9 * span)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=8),
       st.lists(st.floats(0, 500), min_size=3, max_size=8))
def test_validate_order_invariant(values, anchors):
    n = min(len(values), len(anchors))
    assume(len(set(anchors[:n])) == n)
    labs = labels(values[:n], anchors[:n])
    assert validate_arithmetic(labs) == validate_arithmetic(labs[::-1])


@given(st.lists(st.tuples(st.integers(0, 500), st.floats(0, 500)), max_size=30),
       st.floats(1e-3, 10), st.floats(-100, 100))
def test_rescale_preserves_length_and_order(points, slope, intercept):
    points = sorted(points)
    x = AxisScale(ScaleKind.LINEAR, slope, intercept, (0, 500))
    y = AxisScale(ScaleKind.LINEAR, -slope, intercept, (0, 500))
    out = rescale_series(points, x, y)
    assert len(out) == len(points)
    xs = [p[0] for p in out]
    assert xs == sorted(xs)
