"""Shared fixtures: hand-built straight-rope worlds and a small cached demo set."""

from __future__ import annotations

import numpy as np
import pytest

from tracebench.config import ExpertGains, ExtractionParams, FrameSpec, SimConfig
from tracebench.sim import ArmState, GripperState, RopeState, Status, WorldState
from tracebench.sim.arm import solve_ik


def make_straight_world(
    config: SimConfig,
    s_frac: float = 0.5,
    direction: float = 0.0,
    lateral_offset: float = 0.0,
) -> WorldState:
    """Taut straight rope from the pin along `direction`; gripper grasping at
    s = s_frac * L, offset laterally by `lateral_offset` meters."""
    n = config.n_particles
    pin = np.array(config.pin, dtype=float)
    u = np.array([np.cos(direction), np.sin(direction)])
    ts = np.linspace(0.0, config.L, n)
    particles = pin[None, :] + ts[:, None] * u[None, :]
    rope = RopeState(
        particles=particles,
        rest_length=np.full(n - 1, config.rest_length),
        pinned_index=0,
        friction_coeff=config.preset().friction_coeff,
        compliance=config.preset().compliance,
        dangling_pull=config.preset().dangling_pull,
    )
    normal = np.array([-np.sin(direction), np.cos(direction)])
    gp = pin + s_frac * config.L * u + lateral_offset * normal
    gripper = GripperState(
        pose=np.array([gp[0], gp[1], direction]),
        aperture=config.grasp_aperture,
        grasping=True,
        sensor_window=config.sensor_window,
    )
    links = np.array(config.link_lengths)
    q = solve_ik(gp, np.array([0.6, 0.6, 0.6]), links, np.array(config.arm_base))
    return WorldState(
        rope=rope,
        gripper=gripper,
        arm=ArmState(joint_angles=q, link_lengths=links),
        time=0.0,
        status=Status.RUNNING,
    )


@pytest.fixture(scope="session")
def sim_config() -> SimConfig:
    return SimConfig()


@pytest.fixture(scope="session")
def frame_spec() -> FrameSpec:
    return FrameSpec()


@pytest.fixture(scope="session")
def extraction() -> ExtractionParams:
    return ExtractionParams()


@pytest.fixture(scope="session")
def gains() -> ExpertGains:
    return ExpertGains()


@pytest.fixture(scope="session")
def demo_dataset(tmp_path_factory, sim_config, gains):
    """Three labeled expert episodes, shared by labeling/policy/CLI tests."""
    from tracebench.labeling import read_dataset
    from tracebench.teleop import record_demos

    out = tmp_path_factory.mktemp("demos") / "ds"
    record_demos(3, sim_config, gains, seed=11, out_path=out)
    return out, read_dataset(out)
