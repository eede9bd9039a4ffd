"""Joint rover path and copter imaging planner over a localizability map belief."""

from .copter_planner import FlightLimits, MeasurementPlan
from .localizability_map import CameraModel, CellBelief, CopterPose, GridGeometry, MapBelief
from .mission import MissionResult, Scenario, compute_reduction_rate, run_iterative
from .rover_planner import NoPathError, PathCost, RoverPath

__all__ = [
    "CameraModel",
    "CellBelief",
    "CopterPose",
    "FlightLimits",
    "GridGeometry",
    "MapBelief",
    "MeasurementPlan",
    "MissionResult",
    "NoPathError",
    "PathCost",
    "RoverPath",
    "Scenario",
    "compute_reduction_rate",
    "run_iterative",
]

__version__ = "0.1.0"
