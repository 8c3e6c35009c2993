"""2D geometry kernels: polyline decimation, oriented-box tests, segment
intersection, ray casting, and ego-frame transforms.

All kernels work in double precision. Scalar functions operate on the small
value types below; the ``*_arr`` variants take numpy arrays and are used by
the batched engine. Boundary contact counts as intersection everywhere.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _fastpath as _fp

TAU = 2.0 * math.pi


class Vec2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Pose:
    position: Vec2
    heading: float  # radians in (-pi, pi]


@dataclass(frozen=True)
class Obb:
    """Oriented bounding box: the convex footprint of a physical object."""

    center: Vec2
    half_length: float
    half_width: float
    heading: float


@dataclass(frozen=True)
class Segment:
    a: Vec2
    b: Vec2


@dataclass(frozen=True)
class Ray:
    origin: Vec2
    direction: Vec2  # unit vector
    max_range: float


class Hit(NamedTuple):
    distance: float
    target: object  # caller-supplied entity ref


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = math.remainder(theta, TAU)
    if r <= -math.pi:
        r += TAU
    return r


def wrap_angle_arr(theta: np.ndarray) -> np.ndarray:
    r = np.mod(theta + math.pi, TAU) - math.pi
    return np.where(r <= -math.pi, r + TAU, r)


# ---------------------------------------------------------------------------
# Polyline decimation (iterative smallest-effective-area removal)
# ---------------------------------------------------------------------------

def triangle_area(a, b, c) -> float:
    """Area of the triangle spanned by three points."""
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))


def decimate_polyline(points: Sequence, area_threshold: float) -> list:
    """Simplify a polyline by repeatedly removing the interior point with the
    smallest effective triangle area while that minimum is below
    ``area_threshold``.

    Neighbor areas are recomputed after each removal, so the result is the
    classic iterative simplification, not a one-shot filter. Endpoints are
    always retained and the output is a subsequence of the input. Ties on
    the minimum area remove the smaller index.
    """
    n = len(points)
    if n < 3 or area_threshold <= 0.0:
        return list(points)

    prev = list(range(-1, n - 1))
    nxt = list(range(1, n + 1))
    alive = [True] * n
    version = [0] * n

    def area_at(i: int) -> float:
        return triangle_area(points[prev[i]], points[i], points[nxt[i]])

    heap = []
    for i in range(1, n - 1):
        heapq.heappush(heap, (area_at(i), i, 0))

    while heap:
        a, i, ver = heapq.heappop(heap)
        if not alive[i] or ver != version[i]:
            continue
        if a >= area_threshold:
            break
        alive[i] = False
        p, q = prev[i], nxt[i]
        nxt[p] = q
        prev[q] = p
        if p > 0:
            version[p] += 1
            heapq.heappush(heap, (area_at(p), p, version[p]))
        if q < n - 1:
            version[q] += 1
            heapq.heappush(heap, (area_at(q), q, version[q]))

    return [points[i] for i in range(n) if alive[i]]


# ---------------------------------------------------------------------------
# Oriented box tests
# ---------------------------------------------------------------------------

def obb_corners(box: Obb) -> list[Vec2]:
    """Corners in CCW order starting front-left (box frame +x = heading)."""
    c, s = math.cos(box.heading), math.sin(box.heading)
    hl, hw = box.half_length, box.half_width
    out = []
    for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        out.append(Vec2(box.center.x + dx * c - dy * s,
                        box.center.y + dx * s + dy * c))
    return out


def _project_radius(box: Obb, ax: float, ay: float) -> float:
    c, s = math.cos(box.heading), math.sin(box.heading)
    return (box.half_length * abs(ax * c + ay * s)
            + box.half_width * abs(-ax * s + ay * c))


def obb_overlap(a: Obb, b: Obb) -> bool:
    """Separating-axis test over both boxes' axes; touching counts."""
    dx = b.center.x - a.center.x
    dy = b.center.y - a.center.y
    for heading in (a.heading, a.heading + 0.5 * math.pi,
                    b.heading, b.heading + 0.5 * math.pi):
        ax, ay = math.cos(heading), math.sin(heading)
        dist = abs(dx * ax + dy * ay)
        if dist > _project_radius(a, ax, ay) + _project_radius(b, ax, ay):
            return False
    return True


def obb_segment_intersect(box: Obb, seg: Segment) -> bool:
    """True iff the segment touches the box boundary or interior.

    The segment is clipped against the box in the box frame (slab test on
    the parametric line); a non-empty parameter interval inside [0, 1]
    means contact.
    """
    c, s = math.cos(box.heading), math.sin(box.heading)
    ax = (seg.a.x - box.center.x) * c + (seg.a.y - box.center.y) * s
    ay = -(seg.a.x - box.center.x) * s + (seg.a.y - box.center.y) * c
    bx = (seg.b.x - box.center.x) * c + (seg.b.y - box.center.y) * s
    by = -(seg.b.x - box.center.x) * s + (seg.b.y - box.center.y) * c

    t0, t1 = 0.0, 1.0
    for p0, d, h in ((ax, bx - ax, box.half_length), (ay, by - ay, box.half_width)):
        if d == 0.0:
            if p0 < -h or p0 > h:
                return False
        else:
            ta = (-h - p0) / d
            tb = (h - p0) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
    return True


# ---------------------------------------------------------------------------
# Ray casting
# ---------------------------------------------------------------------------

def ray_segment_distance(ox, oy, dx, dy, ax, ay, bx, by) -> float:
    """Distance along the ray (ox,oy)+t(dx,dy) to segment a-b, or inf.

    Parametric 2D cross-product solve; touching (t=0 or endpoint hits)
    counts. Rays parallel to the segment only hit if collinear overlap is
    an endpoint graze, which we resolve as a miss (measure-zero case).
    """
    ex, ey = bx - ax, by - ay
    denom = dx * ey - dy * ex
    if denom == 0.0:
        return math.inf
    wx, wy = ax - ox, ay - oy
    t = (wx * ey - wy * ex) / denom
    u = (wx * dy - wy * dx) / denom
    if t >= 0.0 and 0.0 <= u <= 1.0:
        return t
    return math.inf


def ray_obb_distance(ox, oy, dx, dy, box: Obb) -> float:
    """Distance along the ray to the box, or inf. Origin inside gives 0."""
    c, s = math.cos(box.heading), math.sin(box.heading)
    px = (ox - box.center.x) * c + (oy - box.center.y) * s
    py = -(ox - box.center.x) * s + (oy - box.center.y) * c
    rx = dx * c + dy * s
    ry = -dx * s + dy * c

    tmin, tmax = -math.inf, math.inf
    for p, r, h in ((px, rx, box.half_length), (py, ry, box.half_width)):
        if r == 0.0:
            if p < -h or p > h:
                return math.inf
        else:
            ta = (-h - p) / r
            tb = (h - p) / r
            if ta > tb:
                ta, tb = tb, ta
            tmin = max(tmin, ta)
            tmax = min(tmax, tb)
            if tmin > tmax:
                return math.inf
    if tmax < 0.0:
        return math.inf
    return max(tmin, 0.0)


def ray_cast(ray: Ray, boxes: Sequence[Obb], segments: Sequence[Segment],
             box_refs: Optional[Sequence] = None,
             seg_refs: Optional[Sequence] = None) -> Optional[Hit]:
    """Nearest intersection of the ray with any primitive within max_range.

    Returns a Hit with the entity ref (``("box", i)`` / ``("segment", i)``
    unless explicit refs are supplied), or None on miss.
    """
    ox, oy = ray.origin
    dx, dy = ray.direction
    best = math.inf
    best_ref = None
    for i, box in enumerate(boxes):
        t = ray_obb_distance(ox, oy, dx, dy, box)
        if t < best:
            best = t
            best_ref = box_refs[i] if box_refs is not None else ("box", i)
    for i, seg in enumerate(segments):
        t = ray_segment_distance(ox, oy, dx, dy, seg.a.x, seg.a.y, seg.b.x, seg.b.y)
        if t < best:
            best = t
            best_ref = seg_refs[i] if seg_refs is not None else ("segment", i)
    if best <= ray.max_range:
        return Hit(best, best_ref)
    return None


# ---------------------------------------------------------------------------
# Ego-frame transforms
# ---------------------------------------------------------------------------

def to_ego_frame(target: Pose, ego: Pose) -> Pose:
    """Express ``target`` in ego coordinates (ego at origin, heading 0)."""
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    dx = target.position.x - ego.position.x
    dy = target.position.y - ego.position.y
    return Pose(Vec2(dx * c + dy * s, -dx * s + dy * c),
                wrap_angle(target.heading - ego.heading))


def from_ego_frame(local: Pose, ego: Pose) -> Pose:
    """Inverse of to_ego_frame."""
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    x, y = local.position
    return Pose(Vec2(ego.position.x + x * c - y * s,
                     ego.position.y + x * s + y * c),
                wrap_angle(local.heading + ego.heading))


# ---------------------------------------------------------------------------
# Vectorized kernels (used by the batched engine)
# ---------------------------------------------------------------------------

def obb_corners_arr(cx, cy, heading, half_length, half_width,
                    trig=None) -> np.ndarray:
    """Corners of n boxes, shape (n, 4, 2), same corner order as obb_corners.

    ``trig`` is an optional precomputed (cos(heading), sin(heading)) pair so
    callers stepping many kernels per frame pay for trig once.
    """
    c, s = trig if trig is not None else (np.cos(heading), np.sin(heading))
    hl_c, hl_s = half_length * c, half_length * s
    hw_c, hw_s = half_width * c, half_width * s
    out = np.empty((len(cx), 4, 2))
    out[:, 0, 0] = cx + hl_c - hw_s
    out[:, 0, 1] = cy + hl_s + hw_c
    out[:, 1, 0] = cx - hl_c - hw_s
    out[:, 1, 1] = cy - hl_s + hw_c
    out[:, 2, 0] = cx - hl_c + hw_s
    out[:, 2, 1] = cy - hl_s - hw_c
    out[:, 3, 0] = cx + hl_c + hw_s
    out[:, 3, 1] = cy + hl_s - hw_c
    return out


def obb_overlap_pairs(cx, cy, heading, hl, hw, ii, jj, trig=None) -> np.ndarray:
    """SAT over the candidate index pairs (ii[k], jj[k]); returns bool (k,)."""
    c, s = trig if trig is not None else (np.cos(heading), np.sin(heading))
    if _fp.ENABLED:
        out = np.empty(len(ii), dtype=bool)
        _fp.sat_pairs(cx, cy, c, s, hl, hw,
                      np.asarray(ii, np.int64), np.asarray(jj, np.int64), out)
        return out
    dx = cx[jj] - cx[ii]
    dy = cy[jj] - cy[ii]
    ci, si, cj, sj = c[ii], s[ii], c[jj], s[jj]
    hli, hwi, hlj, hwj = hl[ii], hw[ii], hl[jj], hw[jj]
    hit = np.ones(len(ii), dtype=bool)
    # Axes of box i then box j; axes of a box are (c, s) and (-s, c).
    for ax, ay in ((ci, si), (-si, ci), (cj, sj), (-sj, cj)):
        dist = np.abs(dx * ax + dy * ay)
        ra = hli * np.abs(ci * ax + si * ay) + hwi * np.abs(ci * ay - si * ax)
        rb = hlj * np.abs(cj * ax + sj * ay) + hwj * np.abs(cj * ay - sj * ax)
        hit &= dist <= ra + rb
    return hit


def obb_segments_intersect_arr(cx, cy, heading, hl, hw,
                               seg_a: np.ndarray, seg_b: np.ndarray,
                               trig=None) -> np.ndarray:
    """Box i vs segment i elementwise (parallel arrays); returns bool (k,).

    Same slab clip as obb_segment_intersect, vectorized.
    """
    c, s = trig if trig is not None else (np.cos(heading), np.sin(heading))
    if _fp.ENABLED:
        out = np.empty(len(cx), dtype=bool)
        _fp.seg_box_hits(cx, cy, c, s, hl, hw, seg_a[:, 0], seg_a[:, 1],
                         seg_b[:, 0], seg_b[:, 1], out)
        return out
    rel_ax = seg_a[:, 0] - cx
    rel_ay = seg_a[:, 1] - cy
    rel_bx = seg_b[:, 0] - cx
    rel_by = seg_b[:, 1] - cy
    ax = rel_ax * c + rel_ay * s
    ay = -rel_ax * s + rel_ay * c
    bx = rel_bx * c + rel_by * s
    by = -rel_bx * s + rel_by * c

    t0 = np.zeros(len(ax))
    t1 = np.ones(len(ax))
    ok = np.ones(len(ax), dtype=bool)
    for p0, p1, h in ((ax, bx, hl), (ay, by, hw)):
        d = p1 - p0
        flat = d == 0.0
        ok &= ~flat | ((p0 >= -h) & (p0 <= h))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (-h - p0) / d
            tb = (h - p0) / d
        lo = np.minimum(ta, tb)
        hi = np.maximum(ta, tb)
        t0 = np.where(flat, t0, np.maximum(t0, lo))
        t1 = np.where(flat, t1, np.minimum(t1, hi))
    return ok & (t0 <= t1)


def raycast_segments_arr(ox, oy, dirs: np.ndarray,
                         seg_a: np.ndarray, seg_b: np.ndarray) -> np.ndarray:
    """Distances (R, M) from one origin along R rays to M segments; inf = miss."""
    if len(seg_a) == 0:
        return np.full((len(dirs), 0), np.inf)
    ex = seg_b[:, 0] - seg_a[:, 0]
    ey = seg_b[:, 1] - seg_a[:, 1]
    wx = seg_a[:, 0] - ox
    wy = seg_a[:, 1] - oy
    dx = dirs[:, 0:1]
    dy = dirs[:, 1:2]
    denom = dx * ey[None, :] - dy * ex[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wx[None, :] * ey[None, :] - wy[None, :] * ex[None, :]) / denom
        u = (wx[None, :] * dy - wy[None, :] * dx) / denom
    valid = (denom != 0.0) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    return np.where(valid, t, np.inf)


def raycast_obbs_arr(ox, oy, dirs: np.ndarray,
                     cx, cy, heading, hl, hw) -> np.ndarray:
    """Distances (R, B) from one origin along R rays to B boxes; inf = miss."""
    if len(cx) == 0:
        return np.full((len(dirs), 0), np.inf)
    c, s = np.cos(heading), np.sin(heading)
    px = (ox - cx) * c + (oy - cy) * s
    py = -(ox - cx) * s + (oy - cy) * c
    rx = dirs[:, 0:1] * c[None, :] + dirs[:, 1:2] * s[None, :]
    ry = -dirs[:, 0:1] * s[None, :] + dirs[:, 1:2] * c[None, :]

    tmin = np.full(rx.shape, -np.inf)
    tmax = np.full(rx.shape, np.inf)
    ok = np.ones(rx.shape, dtype=bool)
    for p, r, h in ((px, rx, hl), (py, ry, hw)):
        flat = r == 0.0
        ok &= ~flat | ((p >= -h) & (p <= h))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (-h - p) / r
            tb = (h - p) / r
        lo = np.minimum(ta, tb)
        hi = np.maximum(ta, tb)
        tmin = np.where(flat, tmin, np.maximum(tmin, lo))
        tmax = np.where(flat, tmax, np.minimum(tmax, hi))
    ok &= (tmin <= tmax) & (tmax >= 0.0)
    return np.where(ok, np.maximum(tmin, 0.0), np.inf)
