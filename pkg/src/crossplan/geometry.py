"""Environment representation: polylines, routes, Frenet projection and
conflict zones between routes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PositionOutOfCorridor, SOutOfRange

DEFAULT_CORRIDOR = 50.0
DEFAULT_LANE_HALF_WIDTH = 1.75
CONFLICT_SAMPLE_STEP = 0.5


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


class Polyline:
    """Ordered 2-D vertices with cumulative arc-length parametrization."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("polyline needs at least two 2-D points")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise ValueError("consecutive polyline points must be distinct")
        self.points = pts
        self.points.setflags(write=False)
        self.seg_vec = seg
        self.seg_len = seg_len
        self.seg_dir = seg / seg_len[:, None]
        self.arc = np.concatenate(([0.0], np.cumsum(seg_len)))
        self.seg_heading = np.arctan2(seg[:, 1], seg[:, 0])
        # left normal of each segment
        self.seg_normal = np.stack([-self.seg_dir[:, 1], self.seg_dir[:, 0]], axis=1)
        self._vertex_curv = _vertex_curvature(pts, seg, seg_len)

    @property
    def length(self) -> float:
        return float(self.arc[-1])

    def segment_index(self, s: float) -> int:
        i = int(np.searchsorted(self.arc, s, side="right")) - 1
        return min(max(i, 0), len(self.seg_len) - 1)

    def point_at(self, s: float, d: float = 0.0, extrapolate: bool = False):
        """Cartesian point at arc length s, offset d along the left normal."""
        if not extrapolate and (s < -1e-9 or s > self.length + 1e-9):
            raise SOutOfRange(f"s={s} outside [0, {self.length}]")
        i = self.segment_index(min(max(s, 0.0), self.length))
        if extrapolate and s > self.length:
            i = len(self.seg_len) - 1
        base = self.points[i] + self.seg_dir[i] * (s - self.arc[i])
        return base + d * self.seg_normal[i]

    def heading_at(self, s: float) -> float:
        return float(self.seg_heading[self.segment_index(s)])

    def curvature_at(self, s: float) -> float:
        """Discrete curvature, linearly interpolated between vertex values."""
        s = min(max(s, 0.0), self.length)
        return float(np.interp(s, self.arc, self._vertex_curv))

    def project(self, position) -> tuple[float, float, float]:
        """Return (s, d, distance) of the closest point on the polyline.

        Ties between equidistant segments resolve to the lower arc length.
        """
        p = np.asarray(position, dtype=float)
        rel = p - self.points[:-1]
        t = np.einsum("ij,ij->i", rel, self.seg_vec) / (self.seg_len**2)
        t = np.clip(t, 0.0, 1.0)
        foot = self.points[:-1] + t[:, None] * self.seg_vec
        diff = p - foot
        dist = np.hypot(diff[:, 0], diff[:, 1])
        i = int(np.argmin(dist))
        s = float(self.arc[i] + t[i] * self.seg_len[i])
        cross = self.seg_dir[i, 0] * diff[i, 1] - self.seg_dir[i, 1] * diff[i, 0]
        d = math.copysign(dist[i], cross) if dist[i] > 0.0 else 0.0
        return s, d, float(dist[i])

    def sample(self, step: float):
        """(s, xy) samples at a uniform arc-length step, endpoint included."""
        n = max(int(math.ceil(self.length / step)) + 1, 2)
        s = np.linspace(0.0, self.length, n)
        idx = np.clip(np.searchsorted(self.arc, s, side="right") - 1, 0, len(self.seg_len) - 1)
        xy = self.points[idx] + self.seg_dir[idx] * (s - self.arc[idx])[:, None]
        return s, xy


def _vertex_curvature(pts, seg, seg_len):
    """Signed Menger (circumscribed-circle) curvature per vertex.

    Endpoints copy their interior neighbour; collinear triples give 0.
    """
    n = len(pts)
    curv = np.zeros(n)
    for i in range(1, n - 1):
        a, b = seg[i - 1], seg[i]
        la, lb = seg_len[i - 1], seg_len[i]
        chord = pts[i + 1] - pts[i - 1]
        lc = math.hypot(chord[0], chord[1])
        cross = a[0] * b[1] - a[1] * b[0]
        denom = la * lb * lc
        curv[i] = 2.0 * cross / denom if denom > 1e-12 else 0.0
    if n > 2:
        curv[0] = curv[1]
        curv[-1] = curv[-2]
    return curv


@dataclass(frozen=True)
class FrenetPose:
    s: float
    d: float
    phi: float


@dataclass(frozen=True)
class Route:
    id: str
    centerline: Polyline
    speed_limit: float
    intersection_start: Optional[float] = None

    def __post_init__(self):
        if self.intersection_start is not None:
            if not 0.0 <= self.intersection_start <= self.centerline.length:
                raise ValueError("intersection_start outside route arc range")

    @property
    def length(self) -> float:
        return self.centerline.length


@dataclass(frozen=True)
class ConflictZone:
    """Arc-length region where two routes cross or merge.

    For crossing zones `start`/`end` hold per-route intervals; for merging
    zones only `start` is meaningful (the shared lane begins there).
    """

    kind: str  # "crossing" | "merging"
    start: dict  # route id -> arc length
    end: dict = field(default_factory=dict)  # route id -> arc length (crossing only)

    def interval(self, route_id: str) -> tuple[float, float]:
        if self.kind == "crossing":
            return self.start[route_id], self.end[route_id]
        return self.start[route_id], math.inf


def project_to_route(position, heading: float, route: Route,
                     corridor: float = DEFAULT_CORRIDOR) -> FrenetPose:
    """Project a Cartesian pose onto the route centerline."""
    s, d, dist = route.centerline.project(position)
    if dist > corridor:
        raise PositionOutOfCorridor(
            f"position {np.asarray(position)} is {dist:.1f} m from route {route.id}")
    phi = normalize_angle(heading - route.centerline.heading_at(s))
    return FrenetPose(s=s, d=d, phi=phi)


def arc_to_cartesian(s: float, d: float, route: Route, extrapolate: bool = False):
    """Inverse of the projection: centerline point at s offset left by d."""
    return route.centerline.point_at(s, d, extrapolate=extrapolate)


def curvature_at(s: float, route: Route) -> float:
    if s < -1e-9 or s > route.length + 1e-9:
        raise SOutOfRange(f"s={s} outside route {route.id}")
    return route.centerline.curvature_at(s)


def compute_conflict_zone(route_a: Route, route_b: Route,
                          lane_half_width: float = DEFAULT_LANE_HALF_WIDTH
                          ) -> Optional[ConflictZone]:
    """Detect the crossing or merging region between two routes.

    Merging: earliest arc length on each route after which the centerlines
    stay within one lane half-width until the route ends (a shared lane).
    Crossing: the interval where the centerlines pass within twice the
    half-width of each other and diverge afterwards.
    """
    sa, xa = route_a.centerline.sample(CONFLICT_SAMPLE_STEP)
    sb, xb = route_b.centerline.sample(CONFLICT_SAMPLE_STEP)
    da = _min_dist_to_polyline(xa, route_b.centerline)
    db = _min_dist_to_polyline(xb, route_a.centerline)

    merge_a = _merge_start(sa, da, lane_half_width)
    merge_b = _merge_start(sb, db, lane_half_width)
    if merge_a is not None and merge_b is not None:
        return ConflictZone(kind="merging",
                            start={route_a.id: merge_a, route_b.id: merge_b})

    near_a = da <= 2.0 * lane_half_width
    near_b = db <= 2.0 * lane_half_width
    if near_a.any() and near_b.any():
        ia = np.flatnonzero(near_a)
        ib = np.flatnonzero(near_b)
        return ConflictZone(
            kind="crossing",
            start={route_a.id: float(sa[ia[0]]), route_b.id: float(sb[ib[0]])},
            end={route_a.id: float(sa[ia[-1]]), route_b.id: float(sb[ib[-1]])},
        )
    return None


def _min_dist_to_polyline(points, poly: Polyline):
    a = poly.points[:-1]
    vec = poly.seg_vec
    inv = 1.0 / (poly.seg_len**2)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", rel, vec) * inv[None, :], 0.0, 1.0)
    foot = a[None, :, :] + t[:, :, None] * vec[None, :, :]
    diff = points[:, None, :] - foot
    return np.sqrt((diff**2).sum(axis=2)).min(axis=1)


def _merge_start(s, dist, half_width):
    """Earliest sample after which all remaining samples stay close."""
    within = dist < half_width
    if not within[-1]:
        return None
    # last index that violates; shared lane starts right after it
    bad = np.flatnonzero(~within)
    if len(bad) == 0:
        return float(s[0])
    if bad[-1] == len(s) - 1:
        return None
    return float(s[bad[-1] + 1])


class RouteGraph:
    """Routes plus right-of-way relations and pairwise conflict zones."""

    def __init__(self, routes, right_of_way=(),
                 lane_half_width: float = DEFAULT_LANE_HALF_WIDTH):
        self.routes = {r.id: r for r in routes}
        self.right_of_way = set()
        for over, under in right_of_way:
            if over == under:
                raise ValueError("right_of_way must be irreflexive")
            if over not in self.routes or under not in self.routes:
                raise ValueError(f"unknown route in right_of_way: {over!r}/{under!r}")
            self.right_of_way.add((over, under))
        self.conflict_zones = {}
        ids = sorted(self.routes)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                zone = compute_conflict_zone(self.routes[a], self.routes[b],
                                             lane_half_width)
                if zone is not None:
                    self.conflict_zones[frozenset((a, b))] = zone

    def zone_between(self, a: str, b: str) -> Optional[ConflictZone]:
        return self.conflict_zones.get(frozenset((a, b)))

    def has_priority_over(self, a: str, b: str) -> bool:
        return (a, b) in self.right_of_way

    def must_yield(self, route_id: str) -> bool:
        """True when some conflicting route has right of way over this one."""
        for (over, under) in self.right_of_way:
            if under == route_id and self.zone_between(over, under) is not None:
                return True
        return False
