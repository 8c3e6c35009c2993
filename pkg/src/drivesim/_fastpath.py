"""Optional numba-compiled twins of the per-world hot kernels.

Every kernel has a pure-numpy reference implementation next to it in
geometry/broadphase/observation/dynamics; selection and ordering semantics
are identical and numeric results agree to float rounding. Set
DRIVESIM_NO_NUMBA=1 to force the reference path (tests exercise both).

Kernels are cached to disk, and ``warmup()`` compiles everything in the
parent process so forked workers inherit ready machine code.
"""

from __future__ import annotations

import math
import os

import numpy as np

ENABLED = False
if not os.environ.get("DRIVESIM_NO_NUMBA"):
    try:
        from numba import njit
        ENABLED = True
    except ImportError:  # reference path only
        pass

if ENABLED:

    @njit(cache=True)
    def sat_pairs(cx, cy, c, s, hl, hw, ii, jj, out):
        for k in range(ii.shape[0]):
            i, j = ii[k], jj[k]
            dx = cx[j] - cx[i]
            dy = cy[j] - cy[i]
            ci, si, cj, sj = c[i], s[i], c[j], s[j]
            hli, hwi, hlj, hwj = hl[i], hw[i], hl[j], hw[j]
            hit = True
            for m in range(4):
                if m == 0:
                    ax, ay = ci, si
                elif m == 1:
                    ax, ay = -si, ci
                elif m == 2:
                    ax, ay = cj, sj
                else:
                    ax, ay = -sj, cj
                dist = abs(dx * ax + dy * ay)
                ra = hli * abs(ci * ax + si * ay) + hwi * abs(ci * ay - si * ax)
                rb = hlj * abs(cj * ax + sj * ay) + hwj * abs(cj * ay - sj * ax)
                if dist > ra + rb:
                    hit = False
                    break
            out[k] = hit

    @njit(cache=True)
    def seg_box_hits(cx, cy, c, s, hl, hw, sax, say, sbx, sby, out):
        for k in range(cx.shape[0]):
            ck, sk = c[k], s[k]
            rax = sax[k] - cx[k]
            ray = say[k] - cy[k]
            rbx = sbx[k] - cx[k]
            rby = sby[k] - cy[k]
            pax = rax * ck + ray * sk
            pay = -rax * sk + ray * ck
            pbx = rbx * ck + rby * sk
            pby = -rbx * sk + rby * ck
            t0, t1 = 0.0, 1.0
            ok = True
            for axis in range(2):
                if axis == 0:
                    p0, d, h = pax, pbx - pax, hl[k]
                else:
                    p0, d, h = pay, pby - pay, hw[k]
                if d == 0.0:
                    if p0 < -h or p0 > h:
                        ok = False
                        break
                else:
                    ta = (-h - p0) / d
                    tb = (h - p0) / d
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > t0:
                        t0 = ta
                    if tb < t1:
                        t1 = tb
                    if t0 > t1:
                        ok = False
                        break
            out[k] = ok

    @njit(cache=True)
    def refit_core(bounds, left, right, leaf_node, internal_desc, new_aabbs):
        for e in range(new_aabbs.shape[0]):
            node = leaf_node[e]
            bounds[node, 0] = new_aabbs[e, 0]
            bounds[node, 1] = new_aabbs[e, 1]
            bounds[node, 2] = new_aabbs[e, 2]
            bounds[node, 3] = new_aabbs[e, 3]
        for k in range(internal_desc.shape[0]):
            nd = internal_desc[k]
            l, r = left[nd], right[nd]
            bounds[nd, 0] = min(bounds[l, 0], bounds[r, 0])
            bounds[nd, 1] = min(bounds[l, 1], bounds[r, 1])
            bounds[nd, 2] = max(bounds[l, 2], bounds[r, 2])
            bounds[nd, 3] = max(bounds[l, 3], bounds[r, 3])

    @njit(cache=True)
    def query_pairs_core(bounds, left, right, leaf, n_leaves):
        cap = n_leaves * (n_leaves - 1) // 2 + 1
        out_i = np.empty(cap, np.int64)
        out_j = np.empty(cap, np.int64)
        cnt = 0
        scap = 1024
        stack_a = np.empty(scap, np.int32)
        stack_b = np.empty(scap, np.int32)
        stack_a[0] = 0
        stack_b[0] = 0
        sp = 1
        while sp:
            sp -= 1
            a, b = stack_a[sp], stack_b[sp]
            if sp + 4 >= scap:
                scap *= 2
                na = np.empty(scap, np.int32)
                nb = np.empty(scap, np.int32)
                na[:sp + 1] = stack_a[:sp + 1]
                nb[:sp + 1] = stack_b[:sp + 1]
                stack_a, stack_b = na, nb
            if a == b:
                if leaf[a] < 0:
                    l, r = left[a], right[a]
                    stack_a[sp] = l
                    stack_b[sp] = l
                    sp += 1
                    stack_a[sp] = r
                    stack_b[sp] = r
                    sp += 1
                    stack_a[sp] = l
                    stack_b[sp] = r
                    sp += 1
                continue
            if (bounds[a, 0] > bounds[b, 2] or bounds[b, 0] > bounds[a, 2]
                    or bounds[a, 1] > bounds[b, 3] or bounds[b, 1] > bounds[a, 3]):
                continue
            la, lb = leaf[a], leaf[b]
            if la >= 0 and lb >= 0:
                if la < lb:
                    out_i[cnt] = la
                    out_j[cnt] = lb
                else:
                    out_i[cnt] = lb
                    out_j[cnt] = la
                cnt += 1
            elif la < 0:
                stack_a[sp] = left[a]
                stack_b[sp] = b
                sp += 1
                stack_a[sp] = right[a]
                stack_b[sp] = b
                sp += 1
            else:
                stack_a[sp] = a
                stack_b[sp] = left[b]
                sp += 1
                stack_a[sp] = a
                stack_b[sp] = right[b]
                sp += 1
        return out_i[:cnt], out_j[:cnt]

    @njit(cache=True)
    def query_aabbs_core(bounds, left, right, leaf, qb):
        n_q = qb.shape[0]
        counts = np.zeros(n_q + 1, np.int64)
        cap = 16 * n_q + 64
        flat = np.empty(cap, np.int64)
        total = 0
        stack = np.empty(256, np.int32)
        for q in range(n_q):
            x0, y0, x1, y1 = qb[q, 0], qb[q, 1], qb[q, 2], qb[q, 3]
            stack[0] = 0
            sp = 1
            while sp:
                sp -= 1
                nd = stack[sp]
                if (bounds[nd, 0] > x1 or x0 > bounds[nd, 2]
                        or bounds[nd, 1] > y1 or y0 > bounds[nd, 3]):
                    continue
                e = leaf[nd]
                if e >= 0:
                    if total >= cap:
                        cap *= 2
                        nf = np.empty(cap, np.int64)
                        nf[:total] = flat[:total]
                        flat = nf
                    flat[total] = e
                    total += 1
                else:
                    stack[sp] = left[nd]
                    sp += 1
                    stack[sp] = right[nd]
                    sp += 1
            counts[q + 1] = total
        return counts, flat[:total]

    @njit(cache=True, inline="always")
    def _wrap(theta):
        # Same arithmetic as wrap_angle_arr: % follows np.mod semantics.
        r = (theta + math.pi) % (2.0 * math.pi) - math.pi
        if r <= -math.pi:
            r += 2.0 * math.pi
        return r

    @njit(cache=True)
    def radial_fill_core(pos, heading, speed, length, width, goal, visible,
                         collided, road_pts, road_pt_heading, road_pt_kind,
                         rows, radius, cap_a, cap_r, ego_w, partner_w,
                         road_slot_w, out):
        n = pos.shape[0]
        n_pts = road_pts.shape[0]
        road_off = ego_w + cap_a * partner_w
        best_d = np.empty(max(cap_a, cap_r, 1), np.float64)
        best_j = np.empty(max(cap_a, cap_r, 1), np.int64)
        for r in range(rows.shape[0]):
            i = rows[r]
            for w in range(out.shape[1]):
                out[r, w] = 0.0
            px, py, h = pos[i, 0], pos[i, 1], heading[i]
            ch, sh = math.cos(h), math.sin(h)
            gx = goal[i, 0] - px
            gy = goal[i, 1] - py
            out[r, 0] = speed[i]
            out[r, 1] = length[i]
            out[r, 2] = width[i]
            out[r, 3] = gx * ch + gy * sh
            out[r, 4] = gy * ch - gx * sh
            out[r, 5] = math.hypot(gx, gy)
            out[r, 6] = 1.0 if collided[i] else 0.0

            # Partner slots: nearest first, equal distances keep smaller id.
            cnt = 0
            for j in range(n):
                if j == i or not visible[j]:
                    continue
                d = math.hypot(pos[j, 0] - px, pos[j, 1] - py)
                if d > radius:
                    continue
                if cnt < cap_a:
                    m = cnt
                    cnt += 1
                elif d < best_d[cap_a - 1]:
                    m = cap_a - 1
                else:
                    continue
                while m > 0 and best_d[m - 1] > d:
                    best_d[m] = best_d[m - 1]
                    best_j[m] = best_j[m - 1]
                    m -= 1
                best_d[m] = d
                best_j[m] = j
            for m in range(cnt):
                j = best_j[m]
                base = ego_w + m * partner_w
                dx = pos[j, 0] - px
                dy = pos[j, 1] - py
                out[r, base + 0] = dx * ch + dy * sh
                out[r, base + 1] = dy * ch - dx * sh
                out[r, base + 2] = _wrap(heading[j] - h)
                out[r, base + 3] = speed[j] - speed[i]
                out[r, base + 4] = length[j]
                out[r, base + 5] = width[j]
                out[r, base + 6] = 1.0

            # Road slots.
            cnt = 0
            for j in range(n_pts):
                d = math.hypot(road_pts[j, 0] - px, road_pts[j, 1] - py)
                if d > radius:
                    continue
                if cnt < cap_r:
                    m = cnt
                    cnt += 1
                elif d < best_d[cap_r - 1]:
                    m = cap_r - 1
                else:
                    continue
                while m > 0 and best_d[m - 1] > d:
                    best_d[m] = best_d[m - 1]
                    best_j[m] = best_j[m - 1]
                    m -= 1
                best_d[m] = d
                best_j[m] = j
            for m in range(cnt):
                j = best_j[m]
                base = road_off + m * road_slot_w
                dx = road_pts[j, 0] - px
                dy = road_pts[j, 1] - py
                out[r, base + 0] = dx * ch + dy * sh
                out[r, base + 1] = dy * ch - dx * sh
                out[r, base + 2] = _wrap(road_pt_heading[j] - h)
                out[r, base + 3 + road_pt_kind[j]] = 1.0
                out[r, base + road_slot_w - 1] = 1.0

    @njit(cache=True)
    def agent_aabbs_core(pos, heading, half_l, half_w, boxed, margin, out):
        for i in range(pos.shape[0]):
            if boxed[i]:
                c = math.cos(heading[i])
                s = math.sin(heading[i])
                rx = half_l[i] * abs(c) + half_w[i] * abs(s)
                ry = half_l[i] * abs(s) + half_w[i] * abs(c)
            else:
                rx = ry = 0.0
            out[i, 0] = pos[i, 0] - rx - margin
            out[i, 1] = pos[i, 1] - ry - margin
            out[i, 2] = pos[i, 0] + rx + margin
            out[i, 3] = pos[i, 1] + ry + margin

    @njit(cache=True)
    def classic_core(px, py, heading, speed, accel, steer, dt, length,
                     v_max, a_lo, a_hi, s_lo, s_hi):
        for k in range(px.shape[0]):
            a = min(max(accel[k], a_lo), a_hi)
            delta = min(max(steer[k], s_lo), s_hi)
            v_bar = min(max(speed[k] + 0.5 * a * dt, -v_max), v_max)
            beta = math.atan(0.5 * math.tan(delta))
            ang = heading[k] + beta
            px[k] += v_bar * math.cos(ang) * dt
            py[k] += v_bar * math.sin(ang) * dt
            heading[k] = _wrap(heading[k]
                               + v_bar * math.cos(beta) * math.tan(delta)
                               / length[k] * dt)
            speed[k] = min(max(speed[k] + a * dt, -v_max), v_max)

    @njit(cache=True)
    def invertible_core(px, py, heading, speed, accel, steer, dt, v_max):
        for k in range(px.shape[0]):
            d = speed[k] * dt + 0.5 * accel[k] * dt * dt
            px[k] += d * math.cos(heading[k])
            py[k] += d * math.sin(heading[k])
            heading[k] = _wrap(heading[k] + steer[k] * d)
            speed[k] = min(max(speed[k] + accel[k] * dt, -v_max), v_max)


_warmed = False


def warmup():
    """Compile (or load from cache) every kernel; call before forking."""
    global _warmed
    if not ENABLED or _warmed:
        return
    f1 = np.ones(1)
    i1 = np.zeros(1, np.int64)
    b1 = np.ones(1, dtype=bool)
    out1 = np.empty(1, dtype=bool)
    sat_pairs(f1, f1, f1, f1, f1, f1, i1, i1, out1)
    seg_box_hits(f1, f1, f1, np.zeros(1), f1, f1, f1, f1, f1, f1, out1)
    bounds = np.array([[0.0, 0.0, 1.0, 1.0]])
    left = np.array([-1], np.int32)
    right = np.array([-1], np.int32)
    leaf = np.array([0], np.int32)
    leaf_node = np.array([0], np.int32)
    refit_core(bounds, left, right, leaf_node, np.empty(0, np.int64),
               np.array([[0.0, 0.0, 1.0, 1.0]]))
    query_pairs_core(bounds, left, right, leaf, 1)
    query_aabbs_core(bounds, left, right, leaf, np.array([[0.0, 0.0, 1.0, 1.0]]))
    out = np.zeros((1, 7 + 7 + 11))
    radial_fill_core(np.zeros((1, 2)), f1 * 0, f1, f1, f1, np.zeros((1, 2)),
                     b1, np.zeros(1, dtype=bool), np.zeros((1, 2)),
                     np.zeros(1), np.zeros(1, np.int8), i1, 50.0, 1, 1,
                     7, 7, 11, out)
    agent_aabbs_core(np.zeros((1, 2)), f1 * 0, f1, f1, b1, 0.01,
                     np.empty((1, 4)))
    classic_core(f1.copy(), f1.copy(), f1 * 0, f1.copy(), f1 * 0, f1 * 0,
                 0.1, f1 * 4, 100.0, -4.0, 4.0, -0.7, 0.7)
    invertible_core(f1.copy(), f1.copy(), f1 * 0, f1.copy(), f1 * 0, f1 * 0,
                    0.1, 100.0)
    _warmed = True
