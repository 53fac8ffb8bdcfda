"""Planar perching flight with a vortex-particle wing model.

Modules: ``kernel`` (point-vortex velocities), ``wing`` (thin-plate section
solve and loads), ``wake`` (convection and merging), ``vehicle`` (coupled
strip model), ``mppi`` (sampling planner), ``tvlqr`` (feedback gains),
``config``/``io``/``cli`` (plumbing).
"""

from .kernel import KernelConfig, SingularityError, VortexParticle
from .mppi import ControlSequence, MppiParams, TargetSpec, plan, trajectory_cost
from .tvlqr import GainSchedule, riccati_backward, linearize_fd
from .vehicle import ControlInput, FluidConfig, Vehicle, VehicleGeometry, VehicleState
from .wake import MergeConfig, Wake

__all__ = [
    "KernelConfig", "SingularityError", "VortexParticle", "ControlSequence", "MppiParams",
    "TargetSpec", "plan", "trajectory_cost", "GainSchedule", "riccati_backward",
    "linearize_fd", "ControlInput", "FluidConfig", "Vehicle", "VehicleGeometry",
    "VehicleState", "MergeConfig", "Wake",
]
__version__ = "0.1.0"
