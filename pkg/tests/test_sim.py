"""Simulator core: spawn, step, contact ground truth, rendering, arm."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracebench.config import PRESETS, SimConfig
from tracebench.sim import (
    GripperAction,
    SimError,
    Status,
    WorkspaceError,
    contact_point,
    render_visual,
    spawn,
    step,
)
from tracebench.sim.arm import forward_kinematics, position_jacobian, solve_ik
from tracebench.sim.state import world_equal
from tracebench.sim.world import _wrap_angle, point_at_arc

from conftest import make_straight_world


def hold(world) -> GripperAction:
    return GripperAction(target_pose=world.gripper.pose.copy(), target_aperture=world.gripper.aperture)


# ----------------------------------------------------------------- spawn


def test_spawn_deterministic(sim_config):
    a = spawn(sim_config, 3)
    b = spawn(sim_config, 3)
    assert world_equal(a, b)
    assert not world_equal(a, spawn(sim_config, 4))


@pytest.mark.parametrize("seed", range(0, 100, 7))
def test_spawn_rest_length_conserved(sim_config, seed):
    w = spawn(sim_config, seed)
    assert w.rope.rest_length.sum() == pytest.approx(sim_config.L, abs=1e-9)


def test_spawn_grasps_first_five_percent(sim_config):
    for seed in range(20):
        w = spawn(sim_config, seed)
        c = contact_point(w)
        assert c is not None
        assert c.s <= 0.05 * sim_config.L + 1e-9


def test_spawn_pin_fixed(sim_config):
    w = spawn(sim_config, 0)
    assert np.array_equal(w.rope.particles[0], np.array(sim_config.pin))
    assert w.rope.pinned_index == 0


def test_spawn_infeasible_workspace_raises():
    cfg = dataclasses.replace(SimConfig(), workspace=(0.0, 0.0, 0.2, 0.2))
    with pytest.raises(WorkspaceError):
        spawn(cfg, 0)


def test_spawn_arm_reaches_gripper(sim_config):
    w = spawn(sim_config, 5)
    ee = forward_kinematics(w.arm.joint_angles, w.arm.link_lengths, np.array(sim_config.arm_base))
    assert np.linalg.norm(ee - w.gripper.position) < 1e-6


# ------------------------------------------------------------------ step


def test_step_hold_keeps_contact(sim_config):
    w = make_straight_world(sim_config, s_frac=0.5)
    c0 = contact_point(w)
    w2 = step(w, hold(w), sim_config)
    c1 = contact_point(w2)
    assert c1 is not None
    assert abs(c1.s - c0.s) < 1e-6
    assert np.linalg.norm(c1.point - c0.point) < 1e-6


def test_step_velocity_clamp(sim_config):
    w = make_straight_world(sim_config)
    target = w.gripper.pose + np.array([1.0, 1.0, 0.0])
    w2 = step(w, GripperAction(target_pose=target, target_aperture=w.gripper.aperture), sim_config)
    moved = np.linalg.norm(w2.gripper.position - w.gripper.position)
    assert moved <= sim_config.max_speed * sim_config.dt + 1e-12


def test_step_yaw_rate_clamp(sim_config):
    w = make_straight_world(sim_config)
    target = w.gripper.pose + np.array([0.0, 0.0, 3.0])
    w2 = step(w, GripperAction(target_pose=target, target_aperture=w.gripper.aperture), sim_config)
    assert abs(w2.gripper.pose[2] - w.gripper.pose[2]) <= sim_config.max_yaw_rate * sim_config.dt + 1e-12


def test_step_perpendicular_exit_drops():
    cfg = dataclasses.replace(SimConfig(), sensor_window=(0.01, 0.01), max_speed=2.0)
    w = make_straight_world(cfg, s_frac=0.5)
    # one dt straight sideways, far beyond the 5 mm half-window
    target = w.gripper.pose + np.array([0.0, 0.05, 0.0])
    w2 = step(w, GripperAction(target_pose=target, target_aperture=w.gripper.aperture), cfg)
    assert w2.status is Status.DROPPED


def test_step_open_gripper_releases(sim_config):
    w = make_straight_world(sim_config)
    action = GripperAction(target_pose=w.gripper.pose.copy(), target_aperture=sim_config.aperture_max)
    for _ in range(100):
        if not w.gripper.grasping:
            break
        w = step(w, action, sim_config)
    assert not w.gripper.grasping
    assert contact_point(w) is None


def test_step_non_running_raises(sim_config):
    w = make_straight_world(sim_config)
    w = dataclasses.replace(w, status=Status.DROPPED)
    with pytest.raises(SimError):
        step(w, hold(w), sim_config)


def test_step_pin_conserved_and_deterministic(sim_config):
    seqs = []
    for _ in range(2):
        w = spawn(sim_config, 12)
        states = [w]
        for i in range(40):
            target = w.gripper.pose + np.array([0.002, 0.001 * np.sin(i / 3.0), 0.01])
            w = step(w, GripperAction(target_pose=target, target_aperture=w.gripper.aperture), sim_config)
            states.append(w)
        seqs.append(states)
    for a, b in zip(*seqs):
        assert world_equal(a, b)
    for s in seqs[0]:
        assert np.array_equal(s.rope.particles[0], np.array(sim_config.pin))


def test_step_collision_near_pin(sim_config):
    w = make_straight_world(sim_config, s_frac=0.1)
    pin = np.array(sim_config.pin)
    # drive the gripper onto the pin
    for _ in range(60):
        if w.status is not Status.RUNNING:
            break
        target = np.array([pin[0], pin[1], w.gripper.pose[2]])
        w = step(w, GripperAction(target_pose=target, target_aperture=w.gripper.aperture), sim_config)
    assert w.status is Status.COLLIDED


def test_strain_invariant_under_expert(sim_config, gains):
    from tracebench.teleop import expert_step_budget, make_expert_controller
    from tracebench.rollout import run_rollout

    for seed in (0, 1):
        traj = run_rollout(
            sim_config, seed, make_expert_controller(gains, sim_config, jitter_seed=seed),
            expert_step_budget(sim_config, gains),
        )
        for wstate in traj.states:
            strain = np.abs(wstate.rope.segment_lengths() / wstate.rope.rest_length - 1.0)
            assert strain.max() <= 0.02


# ----------------------------------------------------------- contact query


def test_contact_taut_line(sim_config):
    w = make_straight_world(sim_config, s_frac=0.6)
    c = contact_point(w)
    assert c is not None
    assert c.s == pytest.approx(0.6 * sim_config.L, abs=1e-9)
    expected = np.array(sim_config.pin) + np.array([0.6 * sim_config.L, 0.0])
    assert np.linalg.norm(c.point - expected) < 1e-9
    assert c.lateral == pytest.approx(0.0, abs=1e-9)


def test_contact_lateral_sign(sim_config):
    w = make_straight_world(sim_config, s_frac=0.5, lateral_offset=0.004)
    c = contact_point(w)
    assert c is not None
    # the gripper sits +4 mm along its +y axis, so the rope lies at -4 mm
    assert c.lateral == pytest.approx(-0.004, abs=1e-9)


def test_contact_none_when_released(sim_config):
    w = make_straight_world(sim_config)
    w = dataclasses.replace(
        w, gripper=dataclasses.replace(w.gripper, grasping=False, aperture=sim_config.aperture_max)
    )
    assert contact_point(w) is None


def test_contact_none_when_far(sim_config):
    w = make_straight_world(sim_config, s_frac=0.5, lateral_offset=0.1)
    assert contact_point(w) is None


# ----------------------------------------------------------------- render


def test_render_deterministic(sim_config):
    w = spawn(sim_config, 2)
    assert np.array_equal(render_visual(w, 64, sim_config), render_visual(w, 64, sim_config))


def test_render_resolution_bounds(sim_config):
    w = spawn(sim_config, 2)
    with pytest.raises(ValueError):
        render_visual(w, 31, sim_config)
    with pytest.raises(ValueError):
        render_visual(w, 257, sim_config)


def test_render_rope_bright_background_constant(sim_config):
    w = make_straight_world(sim_config, direction=0.0)
    img = render_visual(w, 128, sim_config)
    res = 128
    x0, y0, x1, y1 = sim_config.workspace
    scale = (res - 1) / max(x1 - x0, y1 - y0)
    # sample interior rope points away from the gripper/pin markers
    for frac in (0.25, 0.75):
        p = w.rope.particles[0] + frac * (w.rope.particles[-1] - w.rope.particles[0])
        u, v = int(round((p[0] - x0) * scale)), int(round((p[1] - y0) * scale))
        assert img[v, u] >= 200
    assert img[0, 0] == 30  # far corner: untouched background


# --------------------------------------------------------------- geometry


def test_point_at_arc_interpolates():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    p, tangent = point_at_arc(pts, 0.5)
    assert np.allclose(p, [0.5, 0.0])
    assert tangent == pytest.approx(0.0)
    p, tangent = point_at_arc(pts, 1.5)
    assert np.allclose(p, [1.0, 0.5])
    assert tangent == pytest.approx(np.pi / 2)


@given(st.floats(min_value=-50, max_value=50, allow_nan=False))
def test_wrap_angle_range(a):
    w = _wrap_angle(a)
    assert -np.pi <= w < np.pi
    assert np.cos(w) == pytest.approx(np.cos(a), abs=1e-9)
    assert np.sin(w) == pytest.approx(np.sin(a), abs=1e-9)


@given(st.floats(min_value=-1.0, max_value=3.0, allow_nan=False))
@settings(max_examples=30)
def test_point_at_arc_clamps(s):
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    p, _ = point_at_arc(pts, s)
    assert 0.0 <= p[0] <= 2.0
    assert p[1] == 0.0


# -------------------------------------------------------------------- arm


def test_ik_reaches_reachable_targets(sim_config):
    links = np.array(sim_config.link_lengths)
    base = np.array(sim_config.arm_base)
    rng = np.random.default_rng(0)
    for _ in range(20):
        q_true = rng.uniform(-1.2, 1.2, size=3)
        target = forward_kinematics(q_true, links, base)
        q = solve_ik(target, q_true + rng.normal(0, 0.1, 3), links, base)
        assert np.linalg.norm(forward_kinematics(q, links, base) - target) < 1e-6


def test_jacobian_matches_finite_differences():
    links = np.array([0.4, 0.4, 0.25])
    rng = np.random.default_rng(1)
    base = np.zeros(2)
    for _ in range(10):
        q = rng.uniform(-np.pi, np.pi, size=3)
        J = position_jacobian(q, links)
        h = 1e-7
        for i in range(3):
            dq = np.zeros(3)
            dq[i] = h
            fd = (forward_kinematics(q + dq, links, base) - forward_kinematics(q - dq, links, base)) / (2 * h)
            assert np.allclose(J[:, i], fd, atol=1e-6)


def test_presets_all_spawn_and_step():
    for name in PRESETS:
        cfg = dataclasses.replace(SimConfig(), object_preset=name)
        w = spawn(cfg, 0)
        w2 = step(w, GripperAction(target_pose=w.gripper.pose.copy(), target_aperture=w.gripper.aperture), cfg)
        assert w2.status in (Status.RUNNING, Status.DROPPED, Status.COLLIDED)
