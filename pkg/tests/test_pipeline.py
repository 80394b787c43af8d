import json
import os

import numpy as np
import pytest

from graphdigitizer.detect import BoundingBox, DetectedObject, ObjectCategory, write_annotations
from graphdigitizer.errors import ConfigError
from graphdigitizer.evaluation import graph_fidelity, truth_value_range
from graphdigitizer.match import LabelSource, SeriesLabel
from graphdigitizer.pipeline import (DigitizedGraph, DigitizedSeries, PipelineConfig, digitize_figure,
                                     digitize_file, dumps_graph, filter_by_axis, filter_by_caption,
                                     graph_filename, parse_config, write_atomic)
from graphdigitizer.raster import Color, RasterImage, dump_png
from graphdigitizer.scale import AxisScale, ScaleKind
from graphdigitizer.synth import ChartSpec, compose_panels, generate_chart, generate_non_graph


def truth_pairs(truth):
    return [(s.color, s.points) for s in truth.series]


def found_pairs(graph):
    return [(s.color, s.points) for s in graph.series]


def test_two_line_chart_end_to_end():
    img, truth = generate_chart(ChartSpec(seed=1, line_count=2))
    graphs = digitize_figure(img, truth.annotations)
    assert len(graphs) == 1
    g = graphs[0]
    assert len(g.series) == 2
    assert {s.label.label for s in g.series} == {s.label for s in truth.series}
    assert all(s.label.source is LabelSource.LEGEND for s in g.series)
    value_range = truth_value_range(truth.to_json())
    assert graph_fidelity(found_pairs(g), truth_pairs(truth), value_range) <= 0.02
    assert g.x_axis.kind is ScaleKind.LINEAR and g.y_axis.kind is ScaleKind.LINEAR
    assert g.x_axis.label == truth.x_label and g.y_axis.label == truth.y_label


def test_labels_from_in_graph_texts():
    img, truth = generate_chart(ChartSpec(seed=9, line_count=2, legend=False, text_labels=True))
    g = digitize_figure(img, truth.annotations)[0]
    by_color = {s.color.as_tuple(): s.label for s in truth.series}
    for s in g.series:
        nearest = min(by_color, key=lambda c: sum((a - b) ** 2 for a, b in zip(c, s.color.as_tuple())))
        assert s.label.source is LabelSource.TEXT and s.label.label == by_color[nearest]


def test_non_graph_figure_is_empty():
    img = generate_non_graph(3)
    ann = [DetectedObject(ObjectCategory.NON_GRAPH, BoundingBox(0, 0, img.width, img.height))]
    assert digitize_figure(img, ann) == []


def test_count_mismatch_gives_anonymous_labels():
    img, truth = generate_chart(ChartSpec(seed=21, line_count=3))
    markers = [o for o in truth.annotations if o.category is ObjectCategory.MARKER]
    dropped = markers[-1]
    kept = [o for o in truth.annotations if o is not dropped]
    # paint the dropped entry's marker white so only its line remains
    arr = img.pixels.copy()
    b = dropped.box
    arr[b.y_min:b.y_max, b.x_min:b.x_max] = 255
    g = digitize_figure(RasterImage(arr), kept)[0]
    assert len(g.series) == 3
    assert "count-mismatch" in g.flags
    assert all(s.label.source is LabelSource.ANONYMOUS and s.label.label is None for s in g.series)


def test_multi_panel_figure_via_annotations():
    a, ta = generate_chart(ChartSpec(seed=31, width=480, height=360))
    b, tb = generate_chart(ChartSpec(seed=32, width=480, height=360))
    page, boxes = compose_panels([a, b], gutter=24, columns=2)
    anns = [DetectedObject(ObjectCategory.SUB_GRAPH, bx) for bx in boxes]
    for truth, bx in zip((ta, tb), boxes):
        anns += [o.shifted(bx.x_min, bx.y_min) for o in truth.annotations if not o.category.is_subfigure]
    graphs = digitize_figure(page, anns)
    assert [g.subfigure_index for g in graphs] == [0, 1]
    assert [len(g.series) for g in graphs] == [ta.spec.line_count, tb.spec.line_count]


def test_gutter_fallback_without_annotations():
    a, _ = generate_chart(ChartSpec(seed=41, width=400, height=300, legend=False))
    b, _ = generate_chart(ChartSpec(seed=42, width=400, height=300, legend=False))
    page, _ = compose_panels([a, b], gutter=30, columns=2)
    graphs = digitize_figure(page, [])
    assert len(graphs) == 2
    for g in graphs:
        assert g.x_axis.kind is ScaleKind.NORMALIZED and "normalized" in g.flags
        for s in g.series:
            assert all(0 <= x <= 1 and 0 <= y <= 1 for x, y in s.points)


def test_failing_panel_is_flagged_not_raised():
    a, ta = generate_chart(ChartSpec(seed=5, width=400, height=300))
    blank = np.full((300, 400, 3), 255, dtype=np.uint8)
    page, boxes = compose_panels([a, RasterImage(blank)], gutter=20, columns=2)
    anns = [DetectedObject(ObjectCategory.GRAPH, bx) for bx in boxes]
    graphs = digitize_figure(page, anns)
    assert len(graphs) == 2
    assert graphs[0].series and not graphs[1].series
    assert "axes-not-found" in graphs[1].flags


@pytest.mark.parametrize("caption,expected", [
    ("N2 adsorption isotherms at 77 K", True),
    ("SEM image of crystal", False),
    ("nitrogen uptake", True),
])
def test_filter_by_caption(caption, expected):
    assert filter_by_caption(caption, ["N2", "Nitrogen"]) is expected


def make_graph(x_label, y_label, max_x, kind=ScaleKind.LINEAR):
    x = AxisScale(kind, 0.01, 0.0, (0, 100), x_label)
    y = AxisScale(ScaleKind.LINEAR, -0.01, 1.0, (0, 100), y_label)
    series = [DigitizedSeries(SeriesLabel.anonymous(), Color(255, 0, 0), [(0.0, 1.0), (max_x, 2.0)])]
    return DigitizedGraph("f.png", 0, x, y, series)


def test_filter_by_axis_examples():
    assert filter_by_axis(make_graph("Cycle number", "Capaciy (mAh/g)", 50), "cycle", "capacity", 0.3)
    assert filter_by_axis(make_graph("Pressure (bar)", "Uptake", 1.0), "pressure", None, 0.3, 1.0)
    assert not filter_by_axis(make_graph("Pressure (bar)", "Uptake", 100.0), "pressure", None, 0.3, 1.0)
    assert not filter_by_axis(make_graph("Temperature", "Uptake", 1.0), "pressure", None, 0.3)
    normalized = make_graph("", "", 0.5, kind=ScaleKind.NORMALIZED)
    assert not filter_by_axis(normalized, None, None, 0.3, 1.0)
    with pytest.raises(ValueError):
        filter_by_axis(normalized, None, None, 1.5)


def test_parse_config():
    cfg = parse_config("# tuning\nwhiten_threshold = 240\ndbscan_eps=30\ndbscan_min_pts = auto\n"
                       "assign_noise = yes\njobs=4\n")
    assert cfg == PipelineConfig(whiten_threshold=240, dbscan_eps=30.0, assign_noise=True, jobs=4)
    assert parse_config("") == PipelineConfig()
    for bad in ("colour = 3", "jobs = many", "jobs = 0", "whiten_threshold", "assign_noise = maybe"):
        with pytest.raises(ConfigError):
            parse_config(bad)


def test_output_document_key_order_and_numbers():
    img, truth = generate_chart(ChartSpec(seed=1, line_count=2))
    g = digitize_figure(img, truth.annotations, source="chart.png")[0]
    text = dumps_graph(g)
    doc = json.loads(text)
    assert list(doc) == ["source", "subfigure", "x_axis", "y_axis", "series", "flags"]
    assert list(doc["x_axis"]) == ["kind", "label", "slope", "intercept"]
    assert list(doc["series"][0]) == ["label", "label_source", "confidence", "color", "points"]
    assert text.endswith("\n") and "\r" not in text
    for s in doc["series"]:
        for x, y in s["points"]:
            assert float(f"{x:.9g}") == x and float(f"{y:.9g}") == y
    back = DigitizedGraph.from_json(doc)
    assert dumps_graph(back) == text


def test_digitize_is_deterministic():
    img, truth = generate_chart(ChartSpec(seed=12, line_count=4, grid=True))
    a = [dumps_graph(g) for g in digitize_figure(img, truth.annotations)]
    b = [dumps_graph(g) for g in digitize_figure(img, truth.annotations)]
    assert a == b


def test_digitize_file_cases(tmp_path):
    img, truth = generate_chart(ChartSpec(seed=2))
    dump_png(img, tmp_path / "good.png")
    write_annotations(tmp_path / "good.ann.json", truth.annotations, img.width, img.height)
    graphs = digitize_file(tmp_path / "good.png")
    assert len(graphs) == 1 and graphs[0].source_figure == "good.png" and graphs[0].series

    (tmp_path / "corrupt.png").write_bytes(b"\x89PNG not really")
    graphs = digitize_file(tmp_path / "corrupt.png")
    assert len(graphs) == 1 and graphs[0].flags == ["undecodable-input"] and not graphs[0].series

    dump_png(img, tmp_path / "bad.png")
    (tmp_path / "bad.ann.json").write_text("{not json")
    graphs = digitize_file(tmp_path / "bad.png")
    assert graphs and all("malformed-annotation" in g.flags for g in graphs)


def test_write_atomic_and_names(tmp_path):
    path = tmp_path / graph_filename("fig", 2)
    assert path.name == "fig.graph2.json"
    write_atomic(path, "{}\n")
    write_atomic(path, "[]\n")
    assert path.read_text() == "[]\n"
    assert os.listdir(tmp_path) == ["fig.graph2.json"]
