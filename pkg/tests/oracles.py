"""Independent reference implementations used to pin expected test values.

Each oracle deliberately takes the dumb route (full recomputation,
exhaustive enumeration, dense sampling, bisection) so it shares no shortcut
with the code it checks.
"""

from __future__ import annotations

import math

import numpy as np

from drivesim.geometry import Obb, Segment, obb_overlap_pairs, \
    obb_segments_intersect_arr


def triangle_area(a, b, c) -> float:
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1])
                     - (c[0] - a[0]) * (b[1] - a[1]))


def decimate_brute_force(points, threshold):
    """Iterative min-area removal recomputing every interior area from
    scratch each round; ties remove the smaller index."""
    pts = list(points)
    if len(pts) < 3 or threshold <= 0.0:
        return pts
    idx = list(range(len(pts)))
    while len(idx) > 2:
        best_a = None
        best_k = None
        for k in range(1, len(idx) - 1):
            a = triangle_area(pts[idx[k - 1]], pts[idx[k]], pts[idx[k + 1]])
            if best_a is None or a < best_a:
                best_a, best_k = a, k
        if best_a >= threshold:
            break
        idx.pop(best_k)
    return [pts[i] for i in idx]


def point_in_obb(box: Obb, x: float, y: float, inflate: float = 0.0) -> bool:
    c, s = math.cos(box.heading), math.sin(box.heading)
    lx = (x - box.center.x) * c + (y - box.center.y) * s
    ly = -(x - box.center.x) * s + (y - box.center.y) * c
    return (abs(lx) <= box.half_length + inflate
            and abs(ly) <= box.half_width + inflate)


def _boundary_points(box: Obb, n: int):
    c, s = math.cos(box.heading), math.sin(box.heading)
    hl, hw = box.half_length, box.half_width
    corners = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
    pts = []
    for k in range(4):
        ax, ay = corners[k]
        bx, by = corners[(k + 1) % 4]
        for t in np.linspace(0.0, 1.0, n, endpoint=False):
            lx, ly = ax + (bx - ax) * t, ay + (by - ay) * t
            pts.append((box.center.x + lx * c - ly * s,
                        box.center.y + lx * s + ly * c))
    return pts


def obb_overlap_sampling(a: Obb, b: Obb, n: int = 300,
                         inflate: float = 0.0) -> bool:
    """Dense boundary sampling containment test; convexity makes boundary
    points plus the two centers sufficient."""
    if point_in_obb(b, a.center.x, a.center.y, inflate) or \
            point_in_obb(a, b.center.x, b.center.y, inflate):
        return True
    for x, y in _boundary_points(a, n):
        if point_in_obb(b, x, y, inflate):
            return True
    for x, y in _boundary_points(b, n):
        if point_in_obb(a, x, y, inflate):
            return True
    return False


def obb_segment_sampling(box: Obb, seg: Segment, n: int = 2000,
                         inflate: float = 0.0) -> bool:
    for t in np.linspace(0.0, 1.0, n):
        x = seg.a.x + (seg.b.x - seg.a.x) * t
        y = seg.a.y + (seg.b.y - seg.a.y) * t
        if point_in_obb(box, x, y, inflate):
            return True
    return False


def ray_box_bisection(ox, oy, dx, dy, box: Obb, max_range: float,
                      n_scan: int = 4000, iters: int = 100):
    """First boundary crossing via dense scan plus bisection on the
    point-in-box containment test; None when every sample misses."""
    if point_in_obb(box, ox, oy):
        return 0.0
    ts = np.linspace(0.0, max_range, n_scan)
    inside = None
    for k, t in enumerate(ts):
        if point_in_obb(box, ox + dx * t, oy + dy * t):
            inside = k
            break
    if inside is None:
        return None
    lo, hi = ts[inside - 1], ts[inside]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if point_in_obb(box, ox + dx * mid, oy + dy * mid):
            hi = mid
        else:
            lo = mid
    return hi


def collision_events_brute(pos, heading, half_l, half_w, eligible,
                           edge_a, edge_b, offroad_eligible):
    """O(n^2) pairwise SAT over every eligible pair plus every agent x
    road-edge segment test; no broad phase anywhere. Shares only the
    narrow-phase kernels with the engine."""
    n = len(pos)
    collided = np.zeros(n, dtype=bool)
    idx = np.nonzero(eligible)[0]
    if len(idx) >= 2:
        ii, jj = np.triu_indices(len(idx), k=1)
        ii, jj = idx[ii], idx[jj]
        hits = obb_overlap_pairs(pos[:, 0], pos[:, 1], heading,
                                 half_l, half_w, ii, jj)
        collided[ii[hits]] = True
        collided[jj[hits]] = True
    offroad = np.zeros(n, dtype=bool)
    rows = np.nonzero(offroad_eligible)[0]
    if len(rows) and len(edge_a):
        ai = np.repeat(rows, len(edge_a))
        si = np.tile(np.arange(len(edge_a)), len(rows))
        hits = obb_segments_intersect_arr(
            pos[ai, 0], pos[ai, 1], heading[ai], half_l[ai], half_w[ai],
            edge_a[si], edge_b[si])
        offroad[ai[hits]] = True
    return collided, offroad


def classic_step_mp(x, y, theta, v, a, delta, dt, length, v_max=100.0):
    """High-precision evaluation of the center-of-gravity bicycle update."""
    import mpmath as mp
    with mp.workdps(50):
        x, y, theta, v = map(mp.mpf, map(repr, (x, y, theta, v)))
        a, delta, dt, length = map(mp.mpf, map(repr, (a, delta, dt, length)))
        vm = mp.mpf(repr(v_max))
        v_bar = v + mp.mpf("0.5") * a * dt
        v_bar = max(min(v_bar, vm), -vm)
        beta = mp.atan(mp.mpf("0.5") * mp.tan(delta))
        x1 = x + v_bar * mp.cos(theta + beta) * dt
        y1 = y + v_bar * mp.sin(theta + beta) * dt
        th1 = theta + v_bar * mp.cos(beta) * mp.tan(delta) / length * dt
        v1 = max(min(v + a * dt, vm), -vm)
        return float(x1), float(y1), float(th1), float(v1)
