from .state import ArmState, Contact, GripperAction, GripperState, RopeState, Status, WorldState
from .world import SimError, WorkspaceError, contact_point, spawn, step
from .render import render_visual

__all__ = [
    "ArmState",
    "SimError",
    "WorkspaceError",
    "Contact",
    "GripperAction",
    "GripperState",
    "RopeState",
    "Status",
    "WorldState",
    "contact_point",
    "render_visual",
    "spawn",
    "step",
]
