"""Detection and digitization metrics: AP, mAP over IoU thresholds, and task accuracies."""

from __future__ import annotations

import glob
import json
import os
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detect import BoundingBox, DetectedObject, ObjectCategory, iou, parse_annotations
from .errors import EmptyInput, MalformedAnnotation, NoGroundTruth
from .raster import Color, RasterImage, color_distance

CORRECT_IOU = 0.7
DEFAULT_COLOR_GATE = 60.0
COCO_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

ScoredBox = Tuple[BoundingBox, float]


def _ranked(predictions: Sequence[ScoredBox]) -> List[ScoredBox]:
    # stable: equal confidences keep their input order
    return sorted(predictions, key=lambda p: -p[1])


def match_predictions(predictions: Sequence[ScoredBox], truths: Sequence[BoundingBox],
                      iou_threshold: float) -> List[bool]:
    """TP/FP flag per prediction in descending-confidence order.

    Each prediction takes the unmatched truth it overlaps most, provided the
    overlap reaches ``iou_threshold``.
    """
    taken = [False] * len(truths)
    flags = []
    for box, _conf in _ranked(predictions):
        best, best_iou = -1, iou_threshold
        for j, t in enumerate(truths):
            if taken[j]:
                continue
            v = iou(box, t)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = j, v
        if best >= 0:
            taken[best] = True
        flags.append(best >= 0)
    return flags


def average_precision(predictions: Sequence[ScoredBox], truths: Sequence[BoundingBox],
                      iou_threshold: float) -> float:
    """Area under the all-point interpolated precision-recall curve."""
    if not 0 < iou_threshold <= 1:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    if not truths:
        raise NoGroundTruth("average precision needs at least one truth box")
    flags = np.array(match_predictions(predictions, truths, iou_threshold), dtype=bool)
    if not flags.any():
        return 0.0
    tp = np.cumsum(flags)
    precision = tp / np.arange(1, len(flags) + 1)
    recall = tp / len(truths)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate(([0.0], recall)))
    return float(np.sum(steps * envelope))


def mean_average_precision(ap_by_category: Mapping) -> float:
    if not ap_by_category:
        raise EmptyInput("no categories to average")
    values = list(ap_by_category.values())
    return float(sum(values) / len(values))


def map_over_thresholds(predictions: Sequence[ScoredBox], truths: Sequence[BoundingBox],
                        thresholds: Sequence[float] = COCO_THRESHOLDS) -> float:
    if not thresholds:
        raise EmptyInput("no IoU thresholds given")
    aps = [average_precision(predictions, truths, t) for t in thresholds]
    return float(sum(aps) / len(aps))


def detection_counts(predictions: Sequence[DetectedObject], truths: Sequence[DetectedObject],
                     category: ObjectCategory, min_iou: float = CORRECT_IOU) -> Tuple[int, int]:
    """(matched, total) truths of ``category`` under one-to-one greedy IoU matching."""
    preds = [p for p in predictions if p.category is category]
    gts = [t for t in truths if t.category is category]
    pairs = []
    for i, t in enumerate(gts):
        for j, p in enumerate(preds):
            v = iou(t.box, p.box)
            if v >= min_iou:
                pairs.append((-v, i, j))
    pairs.sort()
    used_t, used_p = set(), set()
    for _neg, i, j in pairs:
        if i not in used_t and j not in used_p:
            used_t.add(i)
            used_p.add(j)
    return len(used_t), len(gts)


def detection_accuracy(predictions: Sequence[DetectedObject], truths: Sequence[DetectedObject],
                       category: ObjectCategory) -> float:
    """Share of truth boxes of ``category`` found at IoU >= 0.7; 1.0 when there are none."""
    matched, total = detection_counts(predictions, truths, category)
    return 1.0 if total == 0 else matched / total


@dataclass(frozen=True)
class SeparationResult:
    """One graph's line-separation outcome against its legend."""
    cluster_count: int
    legend_count: int
    distances: Tuple[float, ...] = ()


def separation_correct(result: SeparationResult, color_gate: float = DEFAULT_COLOR_GATE) -> bool:
    return (result.cluster_count == result.legend_count
            and all(d <= color_gate for d in result.distances))


def separation_accuracy(results: Sequence[SeparationResult],
                        color_gate: float = DEFAULT_COLOR_GATE) -> float:
    if not color_gate > 0:
        raise ValueError("color_gate must be positive")
    if not results:
        raise EmptyInput("no graphs to score")
    return sum(separation_correct(r, color_gate) for r in results) / len(results)


def pair_colors(found: Sequence[Color], legend: Sequence[Color]) -> List[Tuple[int, int, float]]:
    """Minimum-total-distance pairing of detected line colours with legend colours."""
    if not found or not legend:
        return []
    cost = np.array([[color_distance(a, b) for b in legend] for a in found])
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c), float(cost[r, c])) for r, c in zip(rows, cols)]


def separation_result(found: Sequence[Color], legend: Sequence[Color]) -> SeparationResult:
    dists = tuple(d for _, _, d in pair_colors(found, legend))
    return SeparationResult(len(found), len(legend), dists)


def labels_correct(series: Sequence[Tuple[Optional[str], Color]],
                   truth: Sequence[Tuple[str, Color]]) -> bool:
    """Every detected line carries the name of the truth line nearest its colour."""
    if len(series) != len(truth) or not truth:
        return False
    for label, color in series:
        nearest = min(truth, key=lambda t: color_distance(t[1], color))
        if label != nearest[0]:
            return False
    return True


def series_rmse(points: Sequence[Tuple[float, float]], truth_points: Sequence[Tuple[float, float]]
                ) -> float:
    """Root-mean-square y error of ``points`` against the piecewise-linear truth curve."""
    if not points:
        raise EmptyInput("no extracted points")
    pts = np.asarray(points, dtype=np.float64)
    tp = np.asarray(sorted(truth_points), dtype=np.float64)
    err = pts[:, 1] - np.interp(pts[:, 0], tp[:, 0], tp[:, 1])
    return float(np.sqrt(np.mean(err * err)))


def graph_fidelity(found: Sequence[Tuple[Color, Sequence[Tuple[float, float]]]],
                   truth: Sequence[Tuple[Color, Sequence[Tuple[float, float]]]],
                   value_range: float) -> Optional[float]:
    """Worst per-line RMSE as a fraction of ``value_range``; None if counts differ.

    Lines are paired with truth lines by colour.
    """
    if len(found) != len(truth) or not found or value_range <= 0:
        return None
    worst = 0.0
    for i, j, _ in pair_colors([c for c, _ in found], [c for c, _ in truth]):
        if not found[i][1]:
            return None
        worst = max(worst, series_rmse(found[i][1], truth[j][1]) / value_range)
    return worst


# -- corpus report ---------------------------------------------------------------------

@dataclass
class EvalReport:
    ap_by_category: Dict[str, Dict[str, float]] = field(default_factory=dict)
    map_50: Optional[float] = None
    map_50_95: Optional[float] = None
    legend_marker_detection_accuracy: Optional[float] = None
    legend_text_detection_accuracy: Optional[float] = None
    data_line_separation_accuracy: Optional[float] = None
    legend_assignment_accuracy: Optional[float] = None
    value_fidelity_accuracy: Optional[float] = None
    instance_counts: Dict[str, int] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "detection": {
                "ap": self.ap_by_category,
                "mAP50": self.map_50,
                "mAP50_95": self.map_50_95,
            },
            "tasks": {
                "legend_marker_detection": self.legend_marker_detection_accuracy,
                "legend_text_detection": self.legend_text_detection_accuracy,
                "data_line_separation": self.data_line_separation_accuracy,
                "legend_assignment": self.legend_assignment_accuracy,
                "value_fidelity": self.value_fidelity_accuracy,
            },
            "instances": self.instance_counts,
            "flags": self.flags,
        }


def _threshold_key(t: float) -> str:
    return f"{round(t * 100):d}"


def detection_report(report: EvalReport, pred: Sequence[Sequence[DetectedObject]],
                     truth: Sequence[Sequence[DetectedObject]],
                     thresholds: Sequence[float] = COCO_THRESHOLDS) -> None:
    """Fill the AP table and the two legend detection accuracies from paired images."""
    categories = sorted({o.category for objs in truth for o in objs}, key=lambda c: c.value)
    ap50, ap_range = {}, {}
    for cat in categories:
        # pool every image: boxes from different images never overlap by construction
        preds, gts = [], []
        for k, (p_objs, t_objs) in enumerate(zip(pred, truth)):
            preds += [(_offset(o.box, k), o.confidence) for o in p_objs if o.category is cat]
            gts += [_offset(o.box, k) for o in t_objs if o.category is cat]
        row = {_threshold_key(t): average_precision(preds, gts, t) for t in thresholds}
        report.ap_by_category[cat.value] = row
        report.instance_counts[cat.value] = len(gts)
        ap50[cat] = row[_threshold_key(thresholds[0])]
        ap_range[cat] = sum(row.values()) / len(row)
    if categories:
        report.map_50 = mean_average_precision(ap50)
        report.map_50_95 = mean_average_precision(ap_range)

    for cat, attr in ((ObjectCategory.MARKER, "legend_marker_detection_accuracy"),
                      (ObjectCategory.LEGEND, "legend_text_detection_accuracy")):
        matched = total = 0
        for p_objs, t_objs in zip(pred, truth):
            m, n = detection_counts(p_objs, t_objs, cat)
            matched, total = matched + m, total + n
        if total == 0:
            report.flags.append(f"no-{cat.value}-truths")
        setattr(report, attr, 1.0 if total == 0 else matched / total)


_OFFSET = 1 << 20


def _offset(box: BoundingBox, k: int) -> BoundingBox:
    return box.shifted(k * _OFFSET, 0)


def _load_objects(path: str) -> List[DetectedObject]:
    """Annotation document without an image: sizes are taken from the document."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    meta = doc.get("image") if isinstance(doc, dict) else None
    if not isinstance(meta, dict):
        raise MalformedAnnotation(f"{path}: evaluation needs the 'image' size block")
    probe = RasterImage.blank(int(meta["width"]), int(meta["height"]))
    return parse_annotations(path, probe)


_GRAPH_FILE = re.compile(r"^(?P<stem>.+)\.graph(?P<k>\d+)\.json$")


def truth_value_range(truth: dict) -> float:
    """Span of the labelled y values (first to last tick) of a synth truth document."""
    ticks = truth["ticks"]["y"]
    scale = truth["y_scale"]
    if len(ticks) < 2:
        return 0.0
    return abs(scale["slope"]) * (max(ticks) - min(ticks))


def evaluate_directories(pred_dir: str, truth_dir: str,
                         color_gate: float = DEFAULT_COLOR_GATE,
                         thresholds: Sequence[float] = COCO_THRESHOLDS,
                         max_rmse: float = 0.02) -> EvalReport:
    """Score a digitize output directory (plus optional detector annotations) against synth truth."""
    report = EvalReport()
    truth_files = sorted(glob.glob(os.path.join(truth_dir, "*.truth.json")))
    if not truth_files:
        raise EmptyInput(f"no *.truth.json files in {truth_dir}")

    pred_objs, truth_objs = [], []
    separations, label_hits, faithful, graphs_seen = [], 0, 0, 0
    for tpath in truth_files:
        stem = os.path.basename(tpath)[:-len(".truth.json")]
        with open(tpath, encoding="utf-8") as fh:
            truth = json.load(fh)
        ann_t = os.path.join(truth_dir, stem + ".ann.json")
        ann_p = os.path.join(pred_dir, stem + ".ann.json")
        if os.path.exists(ann_t) and os.path.exists(ann_p):
            truth_objs.append(_load_objects(ann_t))
            pred_objs.append(_load_objects(ann_p))

        legend = [(s["label"], Color.of(s["color"])) for s in truth["series"]]
        gpath = os.path.join(pred_dir, stem + ".graph0.json")
        graphs_seen += 1
        if not os.path.exists(gpath):
            separations.append(SeparationResult(0, len(legend)))
            continue
        with open(gpath, encoding="utf-8") as fh:
            graph = json.load(fh)
        found = [(s["label"], Color.of(s["color"])) for s in graph["series"]]
        separations.append(separation_result([c for _, c in found], [c for _, c in legend]))
        label_hits += labels_correct(found, legend)
        fid = graph_fidelity([(Color.of(s["color"]), s["points"]) for s in graph["series"]],
                             [(Color.of(s["color"]), s["points"]) for s in truth["series"]],
                             truth_value_range(truth))
        faithful += fid is not None and fid <= max_rmse

    if truth_objs:
        detection_report(report, pred_objs, truth_objs, thresholds)
    else:
        report.flags.append("no-detections-evaluated")
    report.data_line_separation_accuracy = separation_accuracy(separations, color_gate)
    report.legend_assignment_accuracy = label_hits / graphs_seen
    report.value_fidelity_accuracy = faithful / graphs_seen
    report.instance_counts["graphs"] = graphs_seen
    return report
