import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphdigitizer.detect import BoundingBox, iou
from graphdigitizer.errors import AxesNotFound, DegenerateRegion
from graphdigitizer.layout import (AxisLine, Orientation, analyze_layout, detect_axes, detect_grid,
                                   detect_ticks, progression_subset, split_regions)
from graphdigitizer.raster import RasterImage
from graphdigitizer.synth import ChartSpec, generate_chart


def axes_image(width=300, height=200, row=160, col=40):
    arr = np.full((height, width, 3), 255, np.uint8)
    arr[row, col:] = 0
    arr[:row + 1, col] = 0
    return arr


def test_blank_image_has_no_axes():
    with pytest.raises(AxesNotFound):
        detect_axes(RasterImage.blank(100, 80))


def test_lines_at_bottom_and_left_edges():
    arr = np.full((50, 60, 3), 255, np.uint8)
    arr[49, :] = 0
    arr[:, 0] = 0
    x_axis, y_axis = detect_axes(RasterImage(arr))
    assert x_axis.orientation is Orientation.HORIZONTAL and x_axis.position == 49
    assert y_axis.orientation is Orientation.VERTICAL and y_axis.position == 0


def test_axes_at_row_160_column_40():
    x_axis, y_axis = detect_axes(RasterImage(axes_image()))
    assert x_axis.position == 160 and y_axis.position == 40


def test_periphery_beats_slightly_longer_inner_line():
    arr = axes_image()
    arr[100, 30:] = 0  # 10 px longer but 60 rows further from the bottom
    x_axis, _ = detect_axes(RasterImage(arr))
    assert x_axis.position == 160


def test_split_regions_example():
    img = RasterImage(axes_image())
    regions = split_regions(img, detect_axes(img))
    assert regions.data == BoundingBox(41, 0, 300, 160)
    assert regions.x_label == BoundingBox(0, 161, 300, 200)
    assert regions.y_label == BoundingBox(0, 0, 40, 161)


def test_edge_axes_leave_no_label_bands():
    arr = np.full((50, 60, 3), 255, np.uint8)
    arr[49, :] = 0
    arr[:, 0] = 0
    img = RasterImage(arr)
    regions = split_regions(img, detect_axes(img))
    assert regions.x_label is None and regions.y_label is None
    assert regions.data == BoundingBox(1, 0, 60, 49)


def test_axes_at_far_edges_are_degenerate():
    img = RasterImage.blank(20, 20)
    axes = (AxisLine(Orientation.HORIZONTAL, 0, (0, 20)), AxisLine(Orientation.VERTICAL, 19, (0, 20)))
    with pytest.raises(DegenerateRegion):
        split_regions(img, axes, frame=(None, None))


def test_framed_chart_region_excludes_frame():
    img, truth = generate_chart(ChartSpec(seed=11, line_count=2, frame=True))
    layout = analyze_layout(img)
    assert layout.data_region == truth.layout.data_region
    assert len(layout.frame_lines) == 2


def test_progression_subset_examples():
    assert progression_subset([50, 100, 237]) == [50.0, 100.0]
    assert progression_subset([50, 100, 150, 200]) == [50.0, 100.0, 150.0, 200.0]
    assert progression_subset([10, 61, 109, 160, 300]) == [10.0, 61.0, 109.0, 160.0]
    assert progression_subset([]) == []


def test_ticks_every_50px():
    arr = axes_image(width=260, height=200, row=160, col=20)
    for x in (50, 100, 150, 200):
        arr[161:166, x] = 0
    img = RasterImage(arr)
    ticks = detect_ticks(img, detect_axes(img))
    assert [t.coordinate for t in ticks if t.axis == "x"] == [50, 100, 150, 200]


def test_no_marks_no_ticks():
    img = RasterImage(axes_image())
    assert detect_ticks(img, detect_axes(img)) == []


def test_marks_not_in_progression_are_dropped():
    arr = axes_image()
    for x in (50, 100, 237):
        arr[161:166, x] = 0
    img = RasterImage(arr)
    coords = [t.coordinate for t in detect_ticks(img, detect_axes(img)) if t.axis == "x"]
    assert coords == [50, 100]


def test_grid_every_40px():
    arr = axes_image()
    for y in (40, 80, 120):
        arr[y, 41:] = (220, 220, 220)
    img = RasterImage(arr)
    grid = detect_grid(img, detect_axes(img))
    assert sorted(g.position for g in grid) == [40, 80, 120]
    assert all(g.orientation is Orientation.HORIZONTAL for g in grid)


def test_no_grid():
    img = RasterImage(axes_image())
    assert detect_grid(img, detect_axes(img)) == []


def test_isolated_gray_line_is_not_grid():
    arr = axes_image()
    arr[70, 41:] = (200, 200, 200)
    img = RasterImage(arr)
    assert detect_grid(img, detect_axes(img)) == []


def test_colored_line_is_never_grid():
    arr = axes_image()
    for y in (40, 80, 120):
        arr[y, 41:] = (240, 180, 180)
    img = RasterImage(arr)
    assert detect_grid(img, detect_axes(img)) == []


def test_synth_grid_recovered():
    img, truth = generate_chart(ChartSpec(seed=5, line_count=2, grid=True))
    layout = analyze_layout(img)
    want = sorted((g.orientation.value, g.position) for g in truth.layout.grid_lines)
    got = sorted((g.orientation.value, g.position) for g in layout.grid_lines)
    assert got == want


@pytest.mark.parametrize("seed", range(100))
def test_synth_axes_and_ticks(seed):
    spec = ChartSpec(seed=seed, line_count=1 + seed % 5, grid=seed % 3 == 0, frame=seed % 4 == 0,
                     axis_width=1 + seed % 2)
    img, truth = generate_chart(spec)
    layout = analyze_layout(img)
    assert abs(layout.x_axis.position - truth.layout.x_axis.position) <= 1
    assert abs(layout.y_axis.position - truth.layout.y_axis.position) <= 1
    for axis in ("x", "y"):
        got = [t.coordinate for t in layout.ticks_on(axis)]
        want = sorted(t.coordinate for t in truth.layout.ticks_on(axis))
        assert len(got) == len(want)
        assert max(abs(a - b) for a, b in zip(got, want)) <= 1
        steps = np.diff(got)
        # progression within 2 px of its own fit
        idx = np.arange(len(got))
        fit = np.polyval(np.polyfit(idx, got, 1), idx)
        assert np.max(np.abs(fit - got)) <= 2 and (steps > 0).all()
    regions = [r for r in (layout.data_region, layout.x_label_region, layout.y_label_region) if r]
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            assert iou(a, b) == 0.0


@given(st.lists(st.floats(0, 500, allow_nan=False), max_size=12))
def test_progression_subset_is_a_progression(coords):
    sub = progression_subset(coords)
    assert set(sub) <= {float(c) for c in coords}
    if len(sub) >= 2:
        idx = np.arange(len(sub))
        fit = np.polyval(np.polyfit(idx, sub, 1), idx)
        assert np.max(np.abs(fit - sub)) <= 2 + 1e-6
