"""Batched, data-driven, multi-agent 2D driving simulator with a
deterministic data-parallel CPU core."""

from .broadphase import Aabb, Bvh, build
from .dynamics import (Action, ActionGrid, AgentState, VehicleParams,
                       invert_action, step_classic, step_invertible)
from .engine import (Metrics, SimBatch, SimConfig, StepOutput,
                     ThroughputReport, World, benchmark, compute_metrics,
                     init_batch)
from .geometry import (Obb, Pose, Ray, Segment, Vec2, decimate_polyline,
                       obb_overlap, obb_segment_intersect, ray_cast,
                       to_ego_frame)
from .observation import (EgoFeatures, ObsConfig, Observation, layout,
                          lidar_obs, obs_width, radial_obs, view_cone_obs)
from .scenario import (ObjectLog, PreparedScenario, RoadElement, Scenario,
                       ValidationReport, mark_controllable, parse_scenario,
                       preprocess, serialize_scenario, validate_scenario)
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
