"""Attach labels to separated lines: legend markers, in-graph text, fuzzy label comparison."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detect import BoundingBox, DetectedObject, ObjectCategory
from .errors import AmbiguousAssignment, CountMismatch, ZeroVector
from .lines import LineCluster
from .raster import DEFAULT_WHITEN_THRESHOLD, MAX_COLOR_DISTANCE, Color, RasterImage, color_distance

EXHAUSTIVE_LIMIT = 8
TIE_TOLERANCE = 1e-9
DEFAULT_TEXT_WEIGHTS = (8.0, 6.0, 4.0)


class LabelSource(enum.Enum):
    LEGEND = "legend"
    TEXT = "text"
    ANONYMOUS = "anonymous"


@dataclass(frozen=True)
class SeriesLabel:
    source: LabelSource
    label: Optional[str] = None
    confidence: float = 0.0

    def __post_init__(self):
        if self.source is not LabelSource.ANONYMOUS and self.label is None:
            raise ValueError("only anonymous labels may omit the label text")

    @classmethod
    def anonymous(cls) -> "SeriesLabel":
        return cls(LabelSource.ANONYMOUS, None, 0.0)


@dataclass(frozen=True)
class LegendEntry:
    marker_color: Color
    label: str
    marker_box: BoundingBox
    label_box: Optional[BoundingBox]

    def __post_init__(self):
        if self.marker_color.as_tuple() == (255, 255, 255):
            raise ValueError("legend marker colour cannot be background white")


def ink_color(img: RasterImage, box: BoundingBox,
              threshold: int = DEFAULT_WHITEN_THRESHOLD) -> Optional[Color]:
    """Mean colour of the non-background pixels in ``box``, or None if it is blank."""
    sub = img.pixels[box.y_min:box.y_max, box.x_min:box.x_max].reshape(-1, 3)
    ink = sub[(sub < threshold).any(axis=1)]
    if len(ink) == 0:
        return None
    return Color.of(np.rint(ink.astype(np.float64).mean(axis=0)).astype(int))


def build_legend_entries(img: RasterImage, detections: Sequence[DetectedObject],
                         threshold: int = DEFAULT_WHITEN_THRESHOLD) -> List[LegendEntry]:
    """Pair each Marker with the Legend text beside it.

    Pairs are chosen to minimise vertical misalignment plus horizontal gap,
    one text per marker. Markers with no ink are ignored; a marker without a
    text partner keeps an empty label.
    """
    markers = [d for d in detections if d.category is ObjectCategory.MARKER]
    texts = [d for d in detections if d.category is ObjectCategory.LEGEND]
    colored = []
    for m in markers:
        c = ink_color(img, m.box, threshold)
        if c is not None:
            colored.append((m, c))
    partner: Dict[int, DetectedObject] = {}
    if colored and texts:
        cost = np.empty((len(colored), len(texts)))
        for i, (m, _) in enumerate(colored):
            mx, my = m.box.center
            for j, t in enumerate(texts):
                tx, ty = t.box.center
                gap = max(t.box.x_min - m.box.x_max, m.box.x_min - t.box.x_max, 0)
                wrong_side = 50.0 if tx < mx else 0.0
                cost[i, j] = 4.0 * abs(ty - my) + gap + wrong_side
        rows, cols = linear_sum_assignment(cost)
        partner = {int(i): texts[int(j)] for i, j in zip(rows, cols)}
    entries = []
    for i, (m, c) in enumerate(colored):
        t = partner.get(i)
        entries.append(LegendEntry(c, (t.text or "") if t else "", m.box, t.box if t else None))
    return entries


def cosine_similarity(a, b) -> float:
    a = np.asarray(tuple(a), dtype=np.float64)
    b = np.asarray(tuple(b), dtype=np.float64)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _similarity(a: Color, b: Color) -> float:
    # pure black has no direction: it only matches itself
    try:
        return cosine_similarity(a, b)
    except ZeroVector:
        return 1.0 if tuple(a) == tuple(b) else 0.0


class Assignment(NamedTuple):
    entry: LegendEntry
    similarity: float


def assign_legends(clusters: Sequence[LineCluster], legends: Sequence[LegendEntry]
                   ) -> Dict[int, Assignment]:
    """Bijection between clusters and legend markers maximising summed cosine similarity."""
    n = len(clusters)
    if n != len(legends):
        raise CountMismatch(f"{n} line clusters but {len(legends)} legend markers")
    if n == 0:
        return {}
    sim = np.array([[_similarity(c.representative_color, e.marker_color) for e in legends]
                    for c in clusters])
    if n <= EXHAUSTIVE_LIMIT:
        best = second = -math.inf
        best_perm = None
        rows = np.arange(n)
        for perm in itertools.permutations(range(n)):
            total = float(sim[rows, perm].sum())
            if total > best:
                best, second, best_perm = total, best, perm
            elif total > second:
                second = total
        if best - second <= TIE_TOLERANCE:
            raise AmbiguousAssignment("two legend assignments score the same")
        perm = best_perm
    else:
        _, perm = linear_sum_assignment(-sim)
    return {clusters[i].id: Assignment(legends[j], float(sim[i, j])) for i, j in enumerate(perm)}


def levenshtein(a: str, b: str) -> int:
    """Minimum insertions, deletions and substitutions turning ``a`` into ``b``."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def windowed_edit_ratio(label: str, target: str) -> float:
    """Best normalised edit distance of ``target`` against any window of ``label``.

    Windows are the substrings of ``label`` whose length is within one
    character of the target's, so a trailing unit such as "(mAh/g)" does not
    count against a match and a single dropped or doubled letter is still
    measured as one edit. Both strings are compared lower-cased.
    """
    label, target = label.lower(), target.lower()
    if not target:
        return 0.0
    n = len(target)
    if len(label) <= n:
        return levenshtein(label, target) / max(len(label), n)
    best = 1.0
    for size in (n - 1, n, n + 1):
        if size < 1 or size > len(label):
            continue
        for start in range(len(label) - size + 1):
            window = label[start:start + size]
            best = min(best, levenshtein(window, target) / max(size, n))
    return best


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def box_point_distance(box: BoundingBox, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Euclidean distance from each pixel to the nearest pixel of ``box`` (0 inside)."""
    dx = np.maximum(np.maximum(box.x_min - xs, xs - (box.x_max - 1)), 0)
    dy = np.maximum(np.maximum(box.y_min - ys, ys - (box.y_max - 1)), 0)
    return np.hypot(dx, dy)


class TextMatch(NamedTuple):
    cluster_id: int
    score: float


def text_cluster_score(distance_feature: float, color_feature: float,
                       weights: Tuple[float, float, float] = DEFAULT_TEXT_WEIGHTS) -> float:
    w_dist, w_color, bias = weights
    return sigmoid(bias - w_dist * distance_feature - w_color * color_feature)


def match_texts(texts: Sequence[DetectedObject], clusters: Sequence[LineCluster],
                ink_colors: Sequence[Optional[Color]], diagonal: float,
                weights: Tuple[float, float, float] = DEFAULT_TEXT_WEIGHTS
                ) -> List[Optional[TextMatch]]:
    """Link in-graph text to the line it annotates.

    Features per (text, cluster) pair are the closest member distance over
    the data-region ``diagonal`` and the RGB distance between the text's ink
    and the cluster colour over the largest possible RGB distance. A logistic
    score above 0.5 for the best cluster is a match. One entry per text.
    """
    if diagonal <= 0:
        raise ValueError("diagonal must be positive")
    out: List[Optional[TextMatch]] = []
    for text, ink in zip(texts, ink_colors):
        if text.category is not ObjectCategory.TEXT:
            raise ValueError(f"match_texts expects Text objects, got {text.category.value}")
        best = None
        for cluster in clusters:
            m = cluster.members
            f1 = float(box_point_distance(text.box, m.xs, m.ys).min()) / diagonal
            f2 = 1.0 if ink is None else color_distance(ink, cluster.representative_color) / MAX_COLOR_DISTANCE
            score = text_cluster_score(f1, f2, weights)
            if best is None or score > best.score:
                best = TextMatch(cluster.id, score)
        out.append(best if best is not None and best.score > 0.5 else None)
    return out
