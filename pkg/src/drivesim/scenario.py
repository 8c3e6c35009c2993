"""Scenario data model: JSON parsing/serialization, validation, controllable
marking, and preprocessing (decimation + masks) ahead of simulation.

Scenario JSON schema (meters, radians, m/s; unknown keys ignored):

    {
      "name": str, "timestep_s": 0.1, "num_steps": 91,
      "objects": [{"id": int, "type": "vehicle"|"pedestrian"|"cyclist",
                   "length_m": float, "width_m": float, "goal": [x, y],
                   "force_replay": bool (optional, default false),
                   "states": [{"p": [x, y], "heading": float,
                               "v": [vx, vy], "valid": bool}, ...]}],
      "roads": [{"id": int,
                 "type": "road_edge"|"lane"|"road_line"|"crosswalk"|
                         "speed_bump"|"stop_sign"|"driveway",
                 "geometry": [[x, y], ...]}]
    }

A missing "goal" defaults to the object's last valid logged position.
Headings outside (-pi, pi] are normalized with a warning, not an error.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

from .geometry import Vec2, decimate_polyline, wrap_angle

OBJECT_KINDS = ("vehicle", "pedestrian", "cyclist")
ROAD_KINDS = ("road_edge", "lane", "road_line", "crosswalk",
              "speed_bump", "stop_sign", "driveway")

DEFAULT_TIMESTEP = 0.1
DEFAULT_NUM_STEPS = 91


class ScenarioError(ValueError):
    """Parse failure; ``path`` names the offending JSON location."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class MissingField(ScenarioError):
    pass


class TypeMismatch(ScenarioError):
    pass


class LengthMismatch(ScenarioError):
    pass


@dataclass
class LoggedStep:
    position: Vec2
    heading: float
    velocity: Vec2
    valid: bool


@dataclass
class ObjectLog:
    id: int
    kind: str
    length: float
    width: float
    goal: Vec2
    states: list[LoggedStep]
    force_replay: bool = False

    def first_valid(self) -> int | None:
        for i, st in enumerate(self.states):
            if st.valid:
                return i
        return None

    def last_valid(self) -> int | None:
        for i in range(len(self.states) - 1, -1, -1):
            if self.states[i].valid:
                return i
        return None


@dataclass
class RoadElement:
    id: int
    kind: str
    geometry: list[Vec2]


@dataclass
class Scenario:
    name: str
    timestep: float = DEFAULT_TIMESTEP
    num_steps: int = DEFAULT_NUM_STEPS
    objects: list[ObjectLog] = field(default_factory=list)
    roads: list[RoadElement] = field(default_factory=list)


@dataclass
class PrepStats:
    n_objects: int
    n_controllable: int
    n_road_points_before: int
    n_road_points_after: int


@dataclass
class PreparedScenario:
    base: Scenario
    decimated_roads: list[RoadElement]
    controllable: list[bool]
    stats: PrepStats


@dataclass
class ValidationEntry:
    code: str
    path: str
    message: str


@dataclass
class ValidationReport:
    entries: list[ValidationEntry] = field(default_factory=list)

    def add(self, code: str, path: str, message: str):
        self.entries.append(ValidationEntry(code, path, message))

    @property
    def ok(self) -> bool:
        return not self.entries


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise MissingField(f"{path}.{key}", "required field missing")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeMismatch(path, f"expected number, got {type(value).__name__}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeMismatch(path, f"expected integer, got {type(value).__name__}")
    return value


def _vec2(value, path: str) -> Vec2:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise TypeMismatch(path, "expected [x, y]")
    return Vec2(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _enum(value, allowed, path: str) -> str:
    if not isinstance(value, str):
        raise TypeMismatch(path, f"expected string, got {type(value).__name__}")
    if value not in allowed:
        raise TypeMismatch(path, f"expected one of {allowed}, got {value!r}")
    return value


def _heading(value, path: str) -> float:
    h = _number(value, path)
    if not math.isfinite(h):
        return h  # caught by validate_scenario, not a parse error
    if not (-math.pi < h <= math.pi):
        warnings.warn(f"{path}: heading {h} outside (-pi, pi], normalizing")
        h = wrap_angle(h)
    return h


def parse_scenario(json_text: str) -> Scenario:
    """Parse scenario JSON into a Scenario. Unknown fields are ignored.

    Raises MissingField / TypeMismatch / LengthMismatch naming the
    offending path.
    """
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as e:
        raise TypeMismatch("$", f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise TypeMismatch("$", "top level must be an object")

    name = _require(doc, "name", "$")
    if not isinstance(name, str):
        raise TypeMismatch("$.name", "expected string")
    timestep = _number(doc.get("timestep_s", DEFAULT_TIMESTEP), "$.timestep_s")
    num_steps = _integer(doc.get("num_steps", DEFAULT_NUM_STEPS), "$.num_steps")

    objects = []
    raw_objects = doc.get("objects", [])
    if not isinstance(raw_objects, list):
        raise TypeMismatch("$.objects", "expected array")
    for i, raw in enumerate(raw_objects):
        path = f"$.objects[{i}]"
        if not isinstance(raw, dict):
            raise TypeMismatch(path, "expected object")
        oid = _integer(_require(raw, "id", path), f"{path}.id")
        kind = _enum(_require(raw, "type", path), OBJECT_KINDS, f"{path}.type")
        length = _number(_require(raw, "length_m", path), f"{path}.length_m")
        width = _number(_require(raw, "width_m", path), f"{path}.width_m")
        force_replay = raw.get("force_replay", False)
        if not isinstance(force_replay, bool):
            raise TypeMismatch(f"{path}.force_replay", "expected boolean")

        raw_states = _require(raw, "states", path)
        if not isinstance(raw_states, list):
            raise TypeMismatch(f"{path}.states", "expected array")
        if len(raw_states) != num_steps:
            raise LengthMismatch(
                f"{path}.states",
                f"expected {num_steps} states (num_steps), got {len(raw_states)}")
        states = []
        for t, rs in enumerate(raw_states):
            spath = f"{path}.states[{t}]"
            if not isinstance(rs, dict):
                raise TypeMismatch(spath, "expected object")
            valid = rs.get("valid", True)
            if not isinstance(valid, bool):
                raise TypeMismatch(f"{spath}.valid", "expected boolean")
            states.append(LoggedStep(
                position=_vec2(_require(rs, "p", spath), f"{spath}.p"),
                heading=_heading(_require(rs, "heading", spath), f"{spath}.heading"),
                velocity=_vec2(_require(rs, "v", spath), f"{spath}.v"),
                valid=valid))

        if "goal" in raw:
            goal = _vec2(raw["goal"], f"{path}.goal")
        else:
            last = next((s for s in reversed(states) if s.valid), None)
            if last is None:
                raise MissingField(f"{path}.goal",
                                   "no goal and no valid state to default from")
            goal = last.position

        objects.append(ObjectLog(id=oid, kind=kind, length=length, width=width,
                                 goal=goal, states=states,
                                 force_replay=force_replay))

    roads = []
    raw_roads = doc.get("roads", [])
    if not isinstance(raw_roads, list):
        raise TypeMismatch("$.roads", "expected array")
    for i, raw in enumerate(raw_roads):
        path = f"$.roads[{i}]"
        if not isinstance(raw, dict):
            raise TypeMismatch(path, "expected object")
        rid = _integer(_require(raw, "id", path), f"{path}.id")
        kind = _enum(_require(raw, "type", path), ROAD_KINDS, f"{path}.type")
        raw_geom = _require(raw, "geometry", path)
        if not isinstance(raw_geom, list) or len(raw_geom) < 1:
            raise TypeMismatch(f"{path}.geometry", "expected non-empty array")
        if kind != "stop_sign" and len(raw_geom) < 2:
            raise LengthMismatch(f"{path}.geometry",
                                 f"{kind} needs at least 2 points")
        geometry = [_vec2(p, f"{path}.geometry[{j}]")
                    for j, p in enumerate(raw_geom)]
        roads.append(RoadElement(id=rid, kind=kind, geometry=geometry))

    return Scenario(name=name, timestep=timestep, num_steps=num_steps,
                    objects=objects, roads=roads)


def serialize_scenario(s: Scenario) -> str:
    """Inverse of parse_scenario (parse(serialize(s)) is structurally s)."""
    return json.dumps(scenario_to_dict(s))


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "timestep_s": s.timestep,
        "num_steps": s.num_steps,
        "objects": [{
            "id": o.id, "type": o.kind,
            "length_m": o.length, "width_m": o.width,
            "goal": [o.goal.x, o.goal.y],
            "force_replay": o.force_replay,
            "states": [{"p": [st.position.x, st.position.y],
                        "heading": st.heading,
                        "v": [st.velocity.x, st.velocity.y],
                        "valid": st.valid} for st in o.states],
        } for o in s.objects],
        "roads": [{
            "id": r.id, "type": r.kind,
            "geometry": [[p.x, p.y] for p in r.geometry],
        } for r in s.roads],
    }


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_scenario(s: Scenario) -> ValidationReport:
    """Collect invariant violations; never raises. Empty report = valid."""
    report = ValidationReport()
    if s.timestep <= 0:
        report.add("BadTimestep", "$.timestep_s", f"must be > 0, got {s.timestep}")
    if s.num_steps < 1:
        report.add("BadNumSteps", "$.num_steps", f"must be >= 1, got {s.num_steps}")

    seen_ids = set()
    for i, o in enumerate(s.objects):
        path = f"$.objects[{i}]"
        if o.id in seen_ids:
            report.add("DuplicateId", f"{path}.id", f"object id {o.id} reused")
        seen_ids.add(o.id)
        if o.length <= 0 or o.width <= 0:
            report.add("BadSize", path,
                       f"length/width must be > 0, got {o.length}x{o.width}")
        if o.kind == "vehicle" and o.length < o.width:
            report.add("BadSize", path,
                       f"vehicle length {o.length} < width {o.width}")
        if len(o.states) != s.num_steps:
            report.add("LengthMismatch", f"{path}.states",
                       f"{len(o.states)} states, num_steps {s.num_steps}")
        if o.first_valid() is None:
            report.add("NoValidState", f"{path}.states", "no valid step")
        if not (math.isfinite(o.goal.x) and math.isfinite(o.goal.y)):
            report.add("NonFinite", f"{path}.goal", "goal has NaN/Inf")
        for t, st in enumerate(o.states):
            if not st.valid:
                continue
            spath = f"{path}.states[{t}]"
            if not all(math.isfinite(v) for v in
                       (st.position.x, st.position.y, st.heading,
                        st.velocity.x, st.velocity.y)):
                report.add("NonFinite", spath, "NaN/Inf in valid state")
            elif not (-math.pi < st.heading <= math.pi):
                report.add("HeadingRange", f"{spath}.heading",
                           f"{st.heading} outside (-pi, pi]")

    seen_ids = set()
    for i, r in enumerate(s.roads):
        path = f"$.roads[{i}]"
        if r.id in seen_ids:
            report.add("DuplicateId", f"{path}.id", f"road id {r.id} reused")
        seen_ids.add(r.id)
        for j, p in enumerate(r.geometry):
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                report.add("NonFinite", f"{path}.geometry[{j}]", "NaN/Inf point")
        for j in range(len(r.geometry) - 1):
            if r.geometry[j] == r.geometry[j + 1]:
                report.add("ZeroLengthSegment", f"{path}.geometry[{j}]",
                           "consecutive points identical")
    return report


# ---------------------------------------------------------------------------
# Controllability and preprocessing
# ---------------------------------------------------------------------------

def mark_controllable(s: Scenario, threshold: float) -> list[bool]:
    """True per object iff it has a valid first state, is not forced to
    replay, and starts strictly more than ``threshold`` meters from its goal.
    """
    mask = []
    for o in s.objects:
        fv = o.first_valid()
        if fv is None or o.force_replay:
            mask.append(False)
            continue
        start = o.states[fv].position
        dist = math.hypot(start.x - o.goal.x, start.y - o.goal.y)
        mask.append(dist > threshold)
    return mask


def preprocess(s: Scenario, decimation_threshold: float = 0.05,
               controllable_threshold: float = 2.0) -> PreparedScenario:
    """Decimate road polylines and compute the controllable mask.

    Stop signs are point markers and are never decimated; polylines too
    short to have interior points pass through unchanged.
    """
    decimated = []
    before = after = 0
    for r in s.roads:
        before += len(r.geometry)
        if r.kind == "stop_sign" or len(r.geometry) < 3:
            geom = list(r.geometry)
        else:
            geom = decimate_polyline(r.geometry, decimation_threshold)
        after += len(geom)
        decimated.append(RoadElement(id=r.id, kind=r.kind, geometry=geom))

    controllable = mark_controllable(s, controllable_threshold)
    stats = PrepStats(n_objects=len(s.objects),
                      n_controllable=sum(controllable),
                      n_road_points_before=before,
                      n_road_points_after=after)
    return PreparedScenario(base=s, decimated_roads=decimated,
                            controllable=controllable, stats=stats)


# ---------------------------------------------------------------------------
# Prepared-scenario files (scenario JSON plus a "prepared" section)
# ---------------------------------------------------------------------------

def serialize_prepared(p: PreparedScenario) -> str:
    doc = scenario_to_dict(p.base)
    doc["prepared"] = {
        "roads": [{"id": r.id, "type": r.kind,
                   "geometry": [[pt.x, pt.y] for pt in r.geometry]}
                  for r in p.decimated_roads],
        "controllable": list(p.controllable),
        "stats": {
            "n_objects": p.stats.n_objects,
            "n_controllable": p.stats.n_controllable,
            "n_road_points_before": p.stats.n_road_points_before,
            "n_road_points_after": p.stats.n_road_points_after,
        },
    }
    return json.dumps(doc)


def load_prepared(json_text: str, decimation_threshold: float = 0.05,
                  controllable_threshold: float = 2.0) -> PreparedScenario:
    """Load a prepared-scenario file; plain scenario files are preprocessed
    on the fly with the given thresholds."""
    s = parse_scenario(json_text)
    doc = json.loads(json_text)
    prep = doc.get("prepared")
    if not isinstance(prep, dict):
        return preprocess(s, decimation_threshold, controllable_threshold)
    decimated = [RoadElement(id=r["id"], kind=r["type"],
                             geometry=[Vec2(float(x), float(y))
                                       for x, y in r["geometry"]])
                 for r in prep["roads"]]
    controllable = [bool(b) for b in prep["controllable"]]
    st = prep["stats"]
    stats = PrepStats(int(st["n_objects"]), int(st["n_controllable"]),
                      int(st["n_road_points_before"]),
                      int(st["n_road_points_after"]))
    return PreparedScenario(base=s, decimated_roads=decimated,
                            controllable=controllable, stats=stats)
