"""Simulation state containers.

WorldState is treated as a value: ``step`` never mutates its input, it returns
a fresh state with copied arrays. Rollouts are therefore trivially parallel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np


class Status(enum.Enum):
    RUNNING = "Running"
    DROPPED = "Dropped"
    COLLIDED = "Collided"
    DONE = "Done"


@dataclass(frozen=True)
class RopeState:
    particles: np.ndarray  # (n, 2) float64, meters
    rest_length: np.ndarray  # (n-1,) float64, meters
    pinned_index: int
    friction_coeff: float
    compliance: float
    dangling_pull: float

    def copy(self) -> "RopeState":
        return replace(self, particles=self.particles.copy())

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.particles, axis=0), axis=1)

    def arc_lengths(self) -> np.ndarray:
        """Cumulative arc length at each particle, from the pinned end."""
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths())])


@dataclass(frozen=True)
class GripperState:
    pose: np.ndarray  # (3,) x, y, theta
    aperture: float
    grasping: bool
    sensor_window: tuple[float, float]  # (length along finger, width)

    def copy(self) -> "GripperState":
        return replace(self, pose=self.pose.copy())

    @property
    def position(self) -> np.ndarray:
        return self.pose[:2]

    @property
    def heading(self) -> np.ndarray:
        th = self.pose[2]
        return np.array([np.cos(th), np.sin(th)])

    @property
    def normal(self) -> np.ndarray:
        """Unit lateral direction (gripper-frame +y) in world coordinates."""
        th = self.pose[2]
        return np.array([-np.sin(th), np.cos(th)])


@dataclass(frozen=True)
class ArmState:
    joint_angles: np.ndarray  # (3,) rad
    link_lengths: np.ndarray  # (3,) m

    def copy(self) -> "ArmState":
        return replace(self, joint_angles=self.joint_angles.copy())


@dataclass(frozen=True)
class WorldState:
    rope: RopeState
    gripper: GripperState
    arm: ArmState
    time: float
    status: Status

    def copy(self) -> "WorldState":
        return replace(self, rope=self.rope.copy(), gripper=self.gripper.copy(), arm=self.arm.copy())


@dataclass(frozen=True)
class GripperAction:
    target_pose: np.ndarray  # (3,) x, y, theta
    target_aperture: float


@dataclass(frozen=True)
class Contact:
    """Ground-truth rope/finger contact: the rope's crossing of the finger line."""

    s: float  # arc length from the pinned end (m)
    point: np.ndarray  # (2,) world coordinates
    lateral: float  # signed offset from the gripper origin along its +y axis (m)
    tangent: float  # local rope tangent direction (world, rad)


def world_equal(a: WorldState, b: WorldState) -> bool:
    """Bit-exact state comparison (determinism checks)."""
    return (
        a.status == b.status
        and a.time == b.time
        and np.array_equal(a.rope.particles, b.rope.particles)
        and np.array_equal(a.rope.rest_length, b.rope.rest_length)
        and np.array_equal(a.gripper.pose, b.gripper.pose)
        and a.gripper.aperture == b.gripper.aperture
        and a.gripper.grasping == b.gripper.grasping
        and np.array_equal(a.arm.joint_angles, b.arm.joint_angles)
    )
