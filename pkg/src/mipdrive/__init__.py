"""Hybrid MPC lane-change planning for selfish highway vehicles.

Each vehicle's horizon problem is compiled into a MILP (logical driving rules
become big-M rows) and the coupled problems are solved as a generalized
mixed-integer potential game with a Gauss-Southwell best-response loop.
"""

from mipdrive.model import (
    PairGeometry,
    VehicleParams,
    VehicleState,
    WorldParams,
    compute_neighborhoods,
    lane_window,
    safety_distance,
    update_distance,
    velocity_window,
)

__all__ = [
    "PairGeometry",
    "VehicleParams",
    "VehicleState",
    "WorldParams",
    "compute_neighborhoods",
    "lane_window",
    "safety_distance",
    "update_distance",
    "velocity_window",
]

__version__ = "0.1.0"
