"""Lane markings from point clouds.

Pipeline: keep road-surface points (height plus slope/curvature of the scan
profile), cluster bright points into marking blobs, reduce each blob to the
segment joining its extreme points, then merge segments that lie on the same
line.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .config import DEFAULT_CONFIG, Config
from .errors import InsufficientInputError, ValidationError
from .fileio import atomic_write_text
from .geometry import CartesianPoint

CLOUD_HEADER = ("x_m", "y_m", "z_m", "intensity")


@dataclass(frozen=True)
class LidarPoint:
    x: float
    y: float
    z: float
    intensity: float

    def __post_init__(self):
        if not 0.0 <= self.intensity <= 1.0:
            raise ValidationError(f"intensity {self.intensity} outside [0, 1]")


@dataclass(frozen=True)
class LineSegment:
    a: CartesianPoint
    b: CartesianPoint

    def __post_init__(self):
        if self.a == self.b:
            raise ValidationError("degenerate line segment")

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    def canonical(self) -> "LineSegment":
        """Same segment with endpoints in lexicographic order."""
        if (self.a.x, self.a.y) <= (self.b.x, self.b.y):
            return self
        return LineSegment(self.b, self.a)

    def key(self) -> tuple[float, float, float, float]:
        c = self.canonical()
        return (c.a.x, c.a.y, c.b.x, c.b.y)


@dataclass(frozen=True)
class LaneModel:
    markings: tuple[LineSegment, ...]
    lane_count: int
    lane_width: float

    def __post_init__(self):
        if self.lane_count < 1 or self.lane_count != len(self.markings) - 1:
            raise ValidationError("lane model needs at least two markings")
        if not self.lane_width > 0:
            raise ValidationError("lane width must be positive")


def _cloud_array(cloud) -> np.ndarray:
    if isinstance(cloud, np.ndarray):
        return np.asarray(cloud, dtype=float).reshape(-1, 4)
    return np.array([(p.x, p.y, p.z, p.intensity) for p in cloud], dtype=float).reshape(-1, 4)


def _as_points(arr: np.ndarray) -> list[LidarPoint]:
    return [LidarPoint(float(x), float(y), float(z), float(i)) for x, y, z, i in arr]


def surface_mask(cloud: np.ndarray, cfg: Config = DEFAULT_CONFIG) -> np.ndarray:
    """Boolean road-surface mask for an (N, 4) array ordered by scan sequence."""
    pts = _cloud_array(cloud)
    n = len(pts)
    if n < 3:
        raise InsufficientInputError("road segmentation needs at least 3 points")
    horiz = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    dz = np.diff(pts[:, 2])
    # slope angle of each inter-point step; a break in the scan starts a new row
    angle = np.degrees(np.arctan2(dz, horiz))
    linked = horiz <= cfg.row_break

    curv = np.zeros(n)
    prev_ok = np.zeros(n, dtype=bool)
    next_ok = np.zeros(n, dtype=bool)
    prev_ok[1:] = linked
    next_ok[:-1] = linked
    prev_angle = np.zeros(n)
    next_angle = np.zeros(n)
    prev_angle[1:] = angle
    next_angle[:-1] = angle
    slope = np.maximum(np.where(prev_ok, np.abs(prev_angle), 0.0), np.where(next_ok, np.abs(next_angle), 0.0))
    both = prev_ok & next_ok
    curv[both] = np.abs(next_angle[both] - prev_angle[both])

    return (pts[:, 2] < cfg.max_height) & (slope < cfg.d1_max_deg) & (curv < cfg.d2_max_deg)


def segment_road_surface(cloud: Sequence[LidarPoint] | np.ndarray, cfg: Config = DEFAULT_CONFIG) -> list[LidarPoint]:
    pts = _cloud_array(cloud)
    return _as_points(pts[surface_mask(pts, cfg)])


def _farthest_pair(xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cand = xy
    if len(xy) > 64:
        try:
            cand = xy[ConvexHull(xy).vertices]
        except (QhullError, ValueError):
            # collinear blob: extremes along the principal axis are the farthest pair
            centred = xy - xy.mean(axis=0)
            axis = np.linalg.svd(centred, full_matrices=False)[2][0]
            proj = centred @ axis
            return xy[np.argmin(proj)], xy[np.argmax(proj)]
    d2 = np.sum((cand[:, None, :] - cand[None, :, :]) ** 2, axis=2)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    return cand[i], cand[j]


def cluster_markings(
    road_points: Sequence[LidarPoint] | np.ndarray,
    intensity_threshold: float = DEFAULT_CONFIG.intensity_threshold,
    cluster_radius: float = DEFAULT_CONFIG.cluster_radius,
) -> list[LineSegment]:
    """Single-linkage clusters of bright points, each reduced to its extreme-point segment."""
    pts = _cloud_array(road_points)
    bright = pts[pts[:, 3] >= intensity_threshold][:, :2] if len(pts) else np.zeros((0, 2))
    if len(bright) == 0:
        return []
    pairs = cKDTree(bright).query_pairs(cluster_radius, output_type="ndarray")
    n = len(bright)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    segments = []
    for lab in np.unique(labels):
        members = bright[labels == lab]
        if len(members) < 2:
            continue
        p, q = _farthest_pair(members)
        if np.all(p == q):
            continue
        segments.append(LineSegment(CartesianPoint(*map(float, p)), CartesianPoint(*map(float, q))).canonical())
    segments.sort(key=LineSegment.key)
    return segments


def _endpoints(seg: LineSegment) -> np.ndarray:
    return np.array([[seg.a.x, seg.a.y], [seg.b.x, seg.b.y]])


def _line_distance(seg: LineSegment, pts: np.ndarray) -> np.ndarray:
    a, b = _endpoints(seg)
    d = b - a
    rel = pts - a
    return np.abs(d[0] * rel[:, 1] - d[1] * rel[:, 0]) / np.hypot(*d)


def merge_gap(s1: LineSegment, s2: LineSegment) -> float:
    """How far one segment's endpoints stray from the other's line, using the better-fitting line.

    Each segment's line is evaluated at the other's two endpoints; the pair
    scores the smaller of the two worst cases.  A short noisy dash then cannot
    veto joining a long, well-determined marking through the lever arm of its
    own direction error.
    """
    return float(min(_line_distance(s1, _endpoints(s2)).max(), _line_distance(s2, _endpoints(s1)).max()))


def _merge_pair(s1: LineSegment, s2: LineSegment) -> LineSegment:
    # length-weighted principal axis of the four endpoints: distant collinear
    # pieces give a long baseline, so the merged direction beats either input
    allpts = np.vstack([_endpoints(s1), _endpoints(s2)])
    weights = np.repeat([s1.length, s2.length], 2)
    centre = weights @ allpts / weights.sum()
    rel = allpts - centre
    scatter = (rel * weights[:, None]).T @ rel
    direction = np.linalg.eigh(scatter)[1][:, -1]
    proj = rel @ direction
    a = centre + proj.min() * direction
    b = centre + proj.max() * direction
    return LineSegment(CartesianPoint(*map(float, a)), CartesianPoint(*map(float, b))).canonical()


def _gap_matrix(segs: Sequence[LineSegment]) -> np.ndarray:
    ends = np.array([_endpoints(s) for s in segs])  # (n, 2, 2)
    a = ends[:, 0]
    d = ends[:, 1] - ends[:, 0]
    norm = np.hypot(d[:, 0], d[:, 1])
    # dist[i, j, k]: endpoint k of segment j to the line through segment i
    rel = ends[None, :, :, :] - a[:, None, None, :]
    cross = d[:, None, None, 0] * rel[..., 1] - d[:, None, None, 1] * rel[..., 0]
    dist = np.abs(cross).max(axis=2) / norm[:, None]
    gap = np.minimum(dist, dist.T)
    np.fill_diagonal(gap, np.inf)
    return gap


def merge_lines(segments: Sequence[LineSegment], merge_distance: float = DEFAULT_CONFIG.merge_distance) -> list[LineSegment]:
    """Merge segments lying on a common line until no pair qualifies.

    The closest qualifying pair is merged first (ties by lexicographic
    endpoint order), which makes the result independent of input order.
    """
    segs = sorted((s.canonical() for s in segments), key=LineSegment.key)
    while len(segs) > 1:
        gap = _gap_matrix(segs)
        best = gap.min()
        if not best < merge_distance:
            break
        # segs is sorted by key, so the first (i, j) in row-major order breaks ties
        i, j = sorted(np.argwhere(gap == best)[0])
        merged = _merge_pair(segs[i], segs[j])
        segs = [s for k, s in enumerate(segs) if k not in (i, j)] + [merged]
        segs.sort(key=LineSegment.key)
    return segs


def marking_offsets(markings: Sequence[LineSegment]) -> tuple[np.ndarray, np.ndarray]:
    """Lateral offset of each marking midpoint along the left normal of the dominant direction.

    Returns (offsets, unit_direction).
    """
    longest = max(markings, key=lambda s: s.length)
    e = _endpoints(longest)
    direction = (e[1] - e[0]) / longest.length
    normal = np.array([-direction[1], direction[0]])
    mids = np.array([_endpoints(s).mean(axis=0) for s in markings])
    return mids @ normal, direction


def build_lane_model(markings: Sequence[LineSegment]) -> LaneModel:
    if len(markings) < 2:
        raise InsufficientInputError(f"need at least two markings, found {len(markings)}")
    offsets, _ = marking_offsets(markings)
    order = np.argsort(-offsets, kind="stable")  # left to right
    ordered = tuple(markings[i] for i in order)
    spacing = -np.diff(offsets[order])
    return LaneModel(ordered, len(ordered) - 1, float(np.mean(spacing)))


def lanes_from_cloud(cloud, cfg: Config = DEFAULT_CONFIG) -> LaneModel:
    road = _cloud_array(cloud)
    road = road[surface_mask(road, cfg)]
    segs = cluster_markings(road, cfg.intensity_threshold, cfg.cluster_radius)
    return build_lane_model(merge_lines(segs, cfg.merge_distance))


def read_cloud_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CLOUD_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        try:
            arr = np.array([[float(r[c]) for c in CLOUD_HEADER] for r in reader], dtype=float)
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    arr = arr.reshape(-1, 4)
    if np.any((arr[:, 3] < 0) | (arr[:, 3] > 1)):
        raise ValidationError(f"{path}: intensity outside [0, 1]")
    return arr


def write_cloud_csv(path: str | Path, cloud: np.ndarray) -> None:
    lines = [",".join(CLOUD_HEADER)]
    lines += [f"{x:.6f},{y:.6f},{z:.6f},{i:.6f}" for x, y, z, i in _cloud_array(cloud)]
    atomic_write_text(path, "\n".join(lines) + "\n")
