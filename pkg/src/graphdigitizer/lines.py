"""Separate data lines by colour (DBSCAN in RGB space) and trace them column by column."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .detect import BoundingBox
from .errors import EmptyInput
from .raster import DEFAULT_WHITEN_THRESHOLD, Color, RasterImage

DEFAULT_EPS = 25.0
MIN_PTS_FLOOR = 8
MIN_PTS_AREA_FRACTION = 0.002
MIN_PTS_POINT_CAP = 0.05
REFERENCE_COLORED_RATIO = 0.01


@dataclass(frozen=True)
class PixelPoint:
    x: int
    y: int
    color: Color


class PixelSet(Sequence[PixelPoint]):
    """Columnar store of pixel points: coordinates plus an ``(n, 3)`` colour array."""

    def __init__(self, xs, ys, colors):
        self.xs = np.asarray(xs, dtype=np.int64).reshape(-1)
        self.ys = np.asarray(ys, dtype=np.int64).reshape(-1)
        self.colors = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
        if not len(self.xs) == len(self.ys) == len(self.colors):
            raise ValueError("xs, ys and colors must have equal length")

    @classmethod
    def from_points(cls, points: Iterable[PixelPoint]) -> "PixelSet":
        if isinstance(points, PixelSet):
            return points
        pts = list(points)
        return cls([p.x for p in pts], [p.y for p in pts],
                   [tuple(p.color) for p in pts] if pts else np.zeros((0, 3)))

    def __len__(self) -> int:
        return len(self.xs)

    def __getitem__(self, i):
        if isinstance(i, slice) or isinstance(i, np.ndarray):
            return PixelSet(self.xs[i], self.ys[i], self.colors[i])
        return PixelPoint(int(self.xs[i]), int(self.ys[i]), Color.of(self.colors[i]))

    def __iter__(self) -> Iterator[PixelPoint]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, mask_or_index) -> "PixelSet":
        return PixelSet(self.xs[mask_or_index], self.ys[mask_or_index], self.colors[mask_or_index])

    def canonical_order(self) -> np.ndarray:
        """Indices sorting the points by (y, x), the fixed DBSCAN scan order."""
        return np.lexsort((self.xs, self.ys))


PointsLike = Union[PixelSet, Sequence[PixelPoint]]


@dataclass(frozen=True)
class DbscanParams:
    eps: float = DEFAULT_EPS
    min_pts: int = MIN_PTS_FLOOR

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class LineCluster:
    id: int
    representative_color: Color
    members: PixelSet

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("a line cluster needs at least one member")


def collect_colored_pixels(img: RasterImage, region: BoundingBox,
                           threshold: int = DEFAULT_WHITEN_THRESHOLD) -> PixelSet:
    """Every pixel in ``region`` with some channel below the whitening threshold."""
    if not region.within(img.width, img.height):
        raise ValueError(f"{region} outside {img.width}x{img.height} image")
    sub = img.pixels[region.y_min:region.y_max, region.x_min:region.x_max]
    ys, xs = np.nonzero((sub < threshold).any(axis=2))
    return PixelSet(xs + region.x_min, ys + region.y_min, sub[ys, xs])


def calibrate_params(points: PointsLike, region: BoundingBox, eps: Optional[float] = None,
                     min_pts: Optional[int] = None) -> DbscanParams:
    """Per-image DBSCAN parameters from the region size and the share of coloured pixels.

    ``min_pts = max(8, min(round(0.002 * area) * ratio_factor, 5% of points))``
    with ``ratio_factor = min(1, coloured_ratio / 0.01)``. Either value can be
    forced through the keyword overrides.
    """
    n = len(points)
    if n == 0:
        raise EmptyInput("no coloured pixels to calibrate on")
    if min_pts is None:
        area = region.area
        ratio_factor = min(1.0, (n / area) / REFERENCE_COLORED_RATIO)
        base = round(MIN_PTS_AREA_FRACTION * area) * ratio_factor
        cap = MIN_PTS_POINT_CAP * n
        min_pts = max(MIN_PTS_FLOOR, int(round(min(base, cap))))
    return DbscanParams(DEFAULT_EPS if eps is None else float(eps), int(min_pts))


def _neighbor_graph(colors: np.ndarray, eps: float):
    """Sparse symmetric adjacency (self included) between colours within ``eps``."""
    tree = cKDTree(colors.astype(np.float64))
    pairs = tree.query_pairs(eps * (1 + 1e-9) + 1e-9, output_type="ndarray")
    if len(pairs):
        diff = colors[pairs[:, 0]].astype(np.int64) - colors[pairs[:, 1]].astype(np.int64)
        keep = np.sqrt((diff * diff).sum(axis=1)) <= eps
        pairs = pairs[keep]
    n = len(colors)
    rows = np.concatenate((pairs[:, 0], pairs[:, 1], np.arange(n))) if len(pairs) else np.arange(n)
    cols = np.concatenate((pairs[:, 1], pairs[:, 0], np.arange(n))) if len(pairs) else np.arange(n)
    return coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n)).tocsr()


def dbscan_labels(colors: np.ndarray, eps: float, min_pts: int,
                  assign_noise: bool = False) -> np.ndarray:
    """DBSCAN labels for points already in scan order; -1 marks noise.

    Points sharing an RGB value have identical neighbourhoods, so the work is
    done once per distinct colour with multiplicities as weights. Clusters are
    numbered in the order a sequential scan would open them, and a border
    colour goes to the earliest-opened cluster it touches, which is what the
    sequential algorithm produces.
    """
    colors = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
    n = len(colors)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    uniq, first_idx, inverse, counts = np.unique(colors, axis=0, return_index=True,
                                                 return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    adj = _neighbor_graph(uniq, eps)
    density = adj @ counts
    core = density >= min_pts
    labels_u = np.full(len(uniq), -1, dtype=np.int64)
    if not core.any():
        return labels_u[inverse]

    core_idx = np.flatnonzero(core)
    core_adj = adj[core_idx][:, core_idx]
    _, comp = connected_components(core_adj, directed=False)
    # order components by the scan position of their first core point
    n_comp = comp.max() + 1
    opened = np.full(n_comp, n, dtype=np.int64)
    np.minimum.at(opened, comp, first_idx[core_idx])
    rank = np.empty(n_comp, dtype=np.int64)
    rank[np.argsort(opened, kind="stable")] = np.arange(n_comp)
    labels_u[core_idx] = rank[comp]

    border = np.flatnonzero(~core)
    if len(border):
        sub = adj[border][:, core_idx].tocsr()
        for row, u in enumerate(border):
            nbrs = sub.indices[sub.indptr[row]:sub.indptr[row + 1]]
            if len(nbrs):
                labels_u[u] = labels_u[core_idx[nbrs]].min()
        if assign_noise:
            _assign_noise(uniq, labels_u, core_idx)
    return labels_u[inverse]


def _assign_noise(uniq: np.ndarray, labels_u: np.ndarray, core_idx: np.ndarray) -> None:
    noise = np.flatnonzero(labels_u < 0)
    if not len(noise):
        return
    tree = cKDTree(uniq[core_idx].astype(np.float64))
    _, nearest = tree.query(uniq[noise].astype(np.float64))
    labels_u[noise] = labels_u[core_idx[nearest]]


def dbscan_cluster(points: PointsLike, params: DbscanParams,
                   assign_noise: bool = False) -> List[LineCluster]:
    """Cluster pixels on colour alone; largest clusters first, noise dropped."""
    pts = PixelSet.from_points(points)
    if len(pts) == 0:
        return []
    pts = pts.subset(pts.canonical_order())
    labels = dbscan_labels(pts.colors, params.eps, params.min_pts, assign_noise)
    if labels.max(initial=-1) < 0:
        return []
    sizes = np.bincount(labels[labels >= 0])
    # biggest first; ties keep the order clusters were opened in
    order = sorted(range(len(sizes)), key=lambda k: (-sizes[k], k))
    clusters = []
    for new_id, k in enumerate(order):
        members = pts.subset(labels == k)
        mean = np.rint(members.colors.astype(np.float64).mean(axis=0)).astype(int)
        clusters.append(LineCluster(new_id, Color.of(mean), members))
    return clusters


def trace_series(cluster: LineCluster, region: Optional[BoundingBox] = None
                 ) -> List[Tuple[int, float]]:
    """One ``(column, mean row)`` point per occupied column, columns ascending."""
    m = cluster.members
    xs, ys = m.xs, m.ys
    if region is not None:
        inside = ((xs >= region.x_min) & (xs < region.x_max)
                  & (ys >= region.y_min) & (ys < region.y_max))
        xs, ys = xs[inside], ys[inside]
    if len(xs) == 0:
        return []
    cols, inv = np.unique(xs, return_inverse=True)
    sums = np.bincount(inv, weights=ys.astype(np.float64))
    counts = np.bincount(inv)
    return [(int(c), float(s / k)) for c, s, k in zip(cols, sums, counts)]


HALO_MIN_TINT = 0.08
HALO_TOLERANCE = 6.0


def _on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray, lo: float, hi: float,
                tolerance: float) -> np.ndarray:
    """Is colour ``p`` on the RGB segment ``a -> b``, between fractions ``lo`` and ``hi``?"""
    d = b - a
    norm2 = (d * d).sum(axis=2)
    valid = norm2 > 1.0
    t = np.where(valid, ((p - a) * d).sum(axis=2) / np.maximum(norm2, 1.0), 0.0)
    resid = p - a - t[..., None] * d
    close = (resid * resid).sum(axis=2) <= tolerance * tolerance
    return valid & (t >= lo) & (t <= hi) & close


def halo_mask(img: RasterImage, region: BoundingBox, min_tint: float = HALO_MIN_TINT,
              tolerance: float = HALO_TOLERANCE) -> np.ndarray:
    """Anti-aliasing fringe inside ``region``.

    A pixel is fringe when its colour sits on the straight RGB segment from
    an 8-neighbour's colour toward white, at least ``min_tint`` of the way,
    within ``tolerance``. The least-tinted pixel of a neighbourhood is never
    fringe, so solid line cores survive. Pixels blended between the colours
    of two opposite neighbours (where two lines cross) count as fringe too.
    """
    sub = img.pixels[region.y_min:region.y_max, region.x_min:region.x_max].astype(np.float32)
    h, w = sub.shape[:2]
    padded = np.pad(sub, ((1, 1), (1, 1), (0, 0)), constant_values=255.0)
    white = np.full_like(sub, 255.0)
    out = np.zeros((h, w), dtype=bool)

    def shifted(dy, dx):
        return padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]

    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            q = shifted(dy, dx)
            out |= _on_segment(sub, q, white, min_tint, 1.0, tolerance)
            if (dy, dx) > (0, 0):
                out |= _on_segment(sub, q, shifted(-dy, -dx), min_tint, 1.0 - min_tint, tolerance)
    return out


def drop_halo(points: PixelSet, img: RasterImage, region: BoundingBox) -> PixelSet:
    """Remove anti-aliasing fringe pixels from ``points`` (all inside ``region``)."""
    if len(points) == 0:
        return points
    mask = halo_mask(img, region)
    keep = ~mask[points.ys - region.y_min, points.xs - region.x_min]
    return points.subset(keep)
