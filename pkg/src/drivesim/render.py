"""Bird's-eye SVG snapshots: road polylines by type, agent boxes, goal
circles. Output bytes are deterministic for a fixed input."""

from __future__ import annotations

import math

from .geometry import Obb, Vec2, obb_corners
from .scenario import Scenario

ROAD_STYLE = {
    "road_edge": ("#222222", 0.5),
    "lane": ("#9aa7b0", 0.25),
    "road_line": ("#c8d0d6", 0.25),
    "crosswalk": ("#b38fd6", 0.3),
    "speed_bump": ("#d6a35c", 0.3),
    "stop_sign": ("#cc3333", 0.3),
    "driveway": ("#8fbf8f", 0.25),
}
AGENT_COLOR = {"vehicle": "#2b6cb0", "pedestrian": "#b03a2b", "cyclist": "#2b8a57"}


def _fmt(x: float) -> str:
    return f"{x:.3f}"


class SnapshotFrame:
    """One renderable frame: static roads plus agent poses at a step."""

    def __init__(self, scenario: Scenario, step: int = 0, poses=None,
                 present=None):
        self.scenario = scenario
        self.step = step
        if poses is None:
            poses, present = [], []
            for o in scenario.objects:
                t = min(step, len(o.states) - 1)
                st = o.states[t]
                poses.append((st.position.x, st.position.y, st.heading))
                present.append(st.valid)
        self.poses = poses
        self.present = present if present is not None else [True] * len(poses)


def render_svg(frame: SnapshotFrame, pad: float = 10.0) -> str:
    s = frame.scenario
    xs, ys = [], []
    for r in s.roads:
        for p in r.geometry:
            xs.append(p.x)
            ys.append(p.y)
    for (x, y, _), o in zip(frame.poses, s.objects):
        xs.extend([x, o.goal.x])
        ys.extend([y, o.goal.y])
    if not xs:
        xs, ys = [0.0], [0.0]
    min_x, max_x = min(xs) - pad, max(xs) + pad
    min_y, max_y = min(ys) - pad, max(ys) + pad
    w, h = max_x - min_x, max_y - min_y

    # Flip y so +y points up in the image.
    def sx(x):
        return _fmt(x - min_x)

    def sy(y):
        return _fmt(max_y - y)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(w)} {_fmt(h)}" '
        f'width="{_fmt(w * 8)}" height="{_fmt(h * 8)}">',
        f'<rect x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="#f5f5f0"/>',
    ]
    for r in s.roads:
        color, sw = ROAD_STYLE[r.kind]
        if len(r.geometry) == 1:
            p = r.geometry[0]
            parts.append(f'<circle cx="{sx(p.x)}" cy="{sy(p.y)}" r="0.6" '
                         f'fill="{color}"/>')
            continue
        pts = " ".join(f"{sx(p.x)},{sy(p.y)}" for p in r.geometry)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="{sw}"/>')
    for o, (x, y, heading), present in zip(s.objects, frame.poses,
                                           frame.present):
        parts.append(f'<circle cx="{sx(o.goal.x)}" cy="{sy(o.goal.y)}" r="1.2" '
                     f'fill="none" stroke="{AGENT_COLOR[o.kind]}" '
                     f'stroke-width="0.25" stroke-dasharray="0.8,0.5"/>')
        if not present:
            continue
        box = Obb(center=Vec2(x, y), half_length=0.5 * o.length,
                  half_width=0.5 * o.width, heading=heading)
        pts = " ".join(f"{sx(c.x)},{sy(c.y)}" for c in obb_corners(box))
        parts.append(f'<polygon points="{pts}" fill="{AGENT_COLOR[o.kind]}" '
                     f'fill-opacity="0.85" stroke="#111111" stroke-width="0.12"/>')
        # Heading tick from center to the nose.
        nx = x + 0.5 * o.length * math.cos(heading)
        ny = y + 0.5 * o.length * math.sin(heading)
        parts.append(f'<line x1="{sx(x)}" y1="{sy(y)}" x2="{sx(nx)}" '
                     f'y2="{sy(ny)}" stroke="#ffffff" stroke-width="0.18"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
