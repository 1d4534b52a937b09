"""Forward-looking-sonar obstacle mapping and risk-based avoidance for AUVs."""

from .channel import ChannelModel, Ping, SensitivityLevel, bin_likelihoods, synth_ping
from .decision import (Action, ActionSet, LossSpec, Trajectory, TrajectoryDistribution,
                       Waypoint, action_collision_cost, cell_membership, collision_prob,
                       generate_trajectories, select_action, waypoint_cost,
                       weighted_collision_cost)
from .geometry import (BeamLayout, CellIndex, PolarMap, bayes_update, build_map, cell_bounds,
                       prototype_layout)
from .motion import (OverlapTable, VelocityDistribution, precompute_overlaps, propagate,
                     rotational_overlap, translational_overlap)
from .pipeline import KinematicLimits, Pipeline, PipelineSettings
from .sim import MissionScript, SimConfig, TargetScenario, lawnmower, run_mission, step
from .world import NoiseBurst, Obstacle, Scene, VehicleState

__version__ = "0.1.0"
