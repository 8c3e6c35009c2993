"""Bounding volume hierarchy over 2D axis-aligned boxes.

Trees are built once per scenario by median split and refit in place each
step (topology is fixed, bounds refresh bottom-up). Queries return exact
AABB-level results: every candidate whose box overlaps is reported,
touching included, so narrow-phase sets are always supersets of the truth
and AABB-level results match brute force.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from . import _fastpath as _fp


class Aabb(NamedTuple):
    min_x: float
    min_y: float
    max_x: float
    max_y: float


class EmptyInput(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


def aabb_of_corners(corners: np.ndarray, margin: float = 0.0) -> np.ndarray:
    """(n, 4) aabbs [min_x, min_y, max_x, max_y] from (n, 4, 2) box corners."""
    out = np.empty((corners.shape[0], 4))
    out[:, 0:2] = corners.min(axis=1) - margin
    out[:, 2:4] = corners.max(axis=1) + margin
    return out


class Bvh:
    """Binary BVH with one leaf per entity, in input order.

    Nodes live in flat arrays; ``refs[i]`` is the caller's entity ref for
    leaf i. Internal node bounds are refreshed level by level so refit is
    a handful of vectorized ops regardless of entity count.
    """

    def __init__(self, entities: Sequence[tuple]):
        if len(entities) == 0:
            raise EmptyInput("cannot build a BVH over zero entities")
        self.refs = [ref for ref, _ in entities]
        n = len(entities)
        aabbs = np.array([[a[0], a[1], a[2], a[3]] for _, a in entities], dtype=float)

        n_nodes = 2 * n - 1
        self.bounds = np.empty((n_nodes, 4))
        self.left = np.full(n_nodes, -1, dtype=np.int32)
        self.right = np.full(n_nodes, -1, dtype=np.int32)
        self.leaf = np.full(n_nodes, -1, dtype=np.int32)  # entity index or -1
        self.leaf_node = np.empty(n, dtype=np.int32)      # entity -> node id

        centroids = 0.5 * (aabbs[:, 0:2] + aabbs[:, 2:4])
        self._next = 0

        def build(idx: np.ndarray) -> int:
            node = self._next
            self._next += 1
            sub = aabbs[idx]
            self.bounds[node, 0:2] = sub[:, 0:2].min(axis=0)
            self.bounds[node, 2:4] = sub[:, 2:4].max(axis=0)
            if len(idx) == 1:
                self.leaf[node] = idx[0]
                self.leaf_node[idx[0]] = node
                return node
            ext = self.bounds[node, 2:4] - self.bounds[node, 0:2]
            axis = 0 if ext[0] >= ext[1] else 1
            order = np.argsort(centroids[idx, axis], kind="stable")
            mid = len(idx) // 2
            self.left[node] = build(idx[order[:mid]])
            self.right[node] = build(idx[order[mid:]])
            return node

        import sys
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, 4 * n + 100))
        try:
            build(np.arange(n))
        finally:
            sys.setrecursionlimit(old_limit)

        # Group internal nodes by height so refit can run one level at a time.
        height = np.zeros(n_nodes, dtype=np.int32)
        internal = np.nonzero(self.leaf < 0)[0]
        for node in internal[::-1]:  # children always have larger ids
            height[node] = 1 + max(height[self.left[node]], height[self.right[node]])
        self._levels = []
        for h in range(1, height.max() + 1 if n > 1 else 1):
            nodes = internal[height[internal] == h]
            if len(nodes):
                self._levels.append((nodes, self.left[nodes], self.right[nodes]))
        # Descending node ids visit children before parents (parents are
        # allocated first), which is what the sequential refit kernel needs.
        self._internal_desc = internal[::-1].astype(np.int64).copy()
        self._py_dirty = True
        self._ensure_python_bounds()

    def _ensure_python_bounds(self):
        if self._py_dirty:
            self._b = self.bounds.tolist()
            self._py_dirty = False

    @property
    def n_leaves(self) -> int:
        return len(self.refs)

    def refit(self, new_aabbs) -> "Bvh":
        """Replace leaf bounds (same entity order) and refresh internal nodes."""
        arr = np.asarray(new_aabbs, dtype=float)
        if arr.shape != (len(self.refs), 4):
            raise LengthMismatch(
                f"expected {len(self.refs)} aabbs, got {arr.shape}")
        if _fp.ENABLED:
            _fp.refit_core(self.bounds, self.left, self.right, self.leaf_node,
                           self._internal_desc, arr)
        else:
            self.bounds[self.leaf_node] = arr
            for nodes, left, right in self._levels:
                self.bounds[nodes, 0:2] = np.minimum(self.bounds[left, 0:2],
                                                     self.bounds[right, 0:2])
                self.bounds[nodes, 2:4] = np.maximum(self.bounds[left, 2:4],
                                                     self.bounds[right, 2:4])
        self._py_dirty = True
        return self

    # -- queries ----------------------------------------------------------

    def query_pairs_idx(self) -> tuple[np.ndarray, np.ndarray]:
        """Overlapping leaf pairs as entity-index arrays (ii < jj)."""
        if _fp.ENABLED:
            return _fp.query_pairs_core(self.bounds, self.left, self.right,
                                        self.leaf, len(self.refs))
        self._ensure_python_bounds()
        b = self._b
        left = self.left
        right = self.right
        leaf = self.leaf
        out_i, out_j = [], []
        stack = [(0, 0)]
        while stack:
            i, j = stack.pop()
            if i == j:
                if leaf[i] < 0:
                    l, r = left[i], right[i]
                    stack.append((l, l))
                    stack.append((r, r))
                    stack.append((l, r))
                continue
            bi, bj = b[i], b[j]
            if bi[0] > bj[2] or bj[0] > bi[2] or bi[1] > bj[3] or bj[1] > bi[3]:
                continue
            li, lj = leaf[i], leaf[j]
            if li >= 0 and lj >= 0:
                out_i.append(min(li, lj))
                out_j.append(max(li, lj))
            elif li < 0:
                stack.append((left[i], j))
                stack.append((right[i], j))
            else:
                stack.append((i, left[j]))
                stack.append((i, right[j]))
        return (np.array(out_i, dtype=np.int64),
                np.array(out_j, dtype=np.int64))

    def query_pairs(self) -> set:
        """All unordered leaf-ref pairs whose aabbs overlap (touching counts)."""
        ii, jj = self.query_pairs_idx()
        refs = self.refs
        return {(refs[i], refs[j]) for i, j in zip(ii.tolist(), jj.tolist())}

    def query_aabb(self, box) -> list:
        """Refs of all leaves whose aabb overlaps ``box`` (touching counts)."""
        self._ensure_python_bounds()
        qx0, qy0, qx1, qy1 = box
        b = self._b
        leaf = self.leaf
        out = []
        stack = [0]
        while stack:
            node = stack.pop()
            nb = b[node]
            if nb[0] > qx1 or qx0 > nb[2] or nb[1] > qy1 or qy0 > nb[3]:
                continue
            e = leaf[node]
            if e >= 0:
                out.append(self.refs[e])
            else:
                stack.append(self.left[node])
                stack.append(self.right[node])
        return out

    def query_ray(self, ray) -> list:
        """Refs of all leaves whose aabb the ray hits within max_range."""
        self._ensure_python_bounds()
        ox, oy = ray.origin
        dx, dy = ray.direction
        inv_x = math.inf if dx == 0.0 else 1.0 / dx
        inv_y = math.inf if dy == 0.0 else 1.0 / dy
        max_t = ray.max_range
        b = self._b
        leaf = self.leaf
        out = []
        stack = [0]
        while stack:
            node = stack.pop()
            x0, y0, x1, y1 = b[node]
            if dx == 0.0:
                if ox < x0 or ox > x1:
                    continue
                tmin, tmax = 0.0, max_t
            else:
                ta = (x0 - ox) * inv_x
                tb = (x1 - ox) * inv_x
                tmin, tmax = (ta, tb) if ta <= tb else (tb, ta)
            if dy == 0.0:
                if oy < y0 or oy > y1:
                    continue
            else:
                ta = (y0 - oy) * inv_y
                tb = (y1 - oy) * inv_y
                if ta > tb:
                    ta, tb = tb, ta
                tmin = max(tmin, ta)
                tmax = min(tmax, tb)
            if tmin > tmax or tmax < 0.0 or tmin > max_t:
                continue
            e = leaf[node]
            if e >= 0:
                out.append(self.refs[e])
            else:
                stack.append(self.left[node])
                stack.append(self.right[node])
        return out

    def query_aabbs_arr(self, boxes: np.ndarray) -> list:
        """Batched query_aabb: one candidate index-array per query box
        (leaf *entity indices*, not refs; candidate order unspecified)."""
        n_q = len(boxes)
        if n_q == 0:
            return []
        if _fp.ENABLED:
            counts, flat = _fp.query_aabbs_core(
                self.bounds, self.left, self.right, self.leaf,
                np.ascontiguousarray(boxes, dtype=float))
            return [flat[counts[q]:counts[q + 1]] for q in range(n_q)]
        out = [[] for _ in range(n_q)]
        qx0, qy0, qx1, qy1 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
        stack = [(0, np.arange(n_q))]
        while stack:
            node, active = stack.pop()
            x0, y0, x1, y1 = self.bounds[node]
            hit = ((qx1[active] >= x0) & (qx0[active] <= x1)
                   & (qy1[active] >= y0) & (qy0[active] <= y1))
            active = active[hit]
            if len(active) == 0:
                continue
            e = self.leaf[node]
            if e >= 0:
                for q in active:
                    out[q].append(e)
            else:
                stack.append((self.left[node], active))
                stack.append((self.right[node], active))
        return [np.array(o, dtype=np.int64) for o in out]


def build(entities: Sequence[tuple]) -> Bvh:
    """Build a BVH from (ref, aabb) pairs; deterministic for a fixed order."""
    return Bvh(entities)
