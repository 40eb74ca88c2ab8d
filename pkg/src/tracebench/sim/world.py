"""Planar deformable-curve simulation: spawn, step, ground-truth contact.

The rope is a particle chain integrated with position-based dynamics:
quasi-static external displacements (gripper drag, dangling pull, tension
straightening) followed by red-black Gauss-Seidel projection of the
inextensibility constraints with a hard pin at particle 0.
"""

from __future__ import annotations

import numpy as np

from ..config import SimConfig
from . import arm
from .state import ArmState, Contact, GripperAction, GripperState, RopeState, Status, WorldState

_SPAWN_GRASP_FRACTION = 0.045  # gripper starts within the first 5% of arc length
_WALK_MARGIN = 0.02
_IK_SEED = np.array([0.6, 0.6, 0.6])


class SimError(Exception):
    """Simulation misuse or infeasible configuration."""


class WorkspaceError(SimError):
    """The spawn random walk could not be fit inside the workspace bounds."""


def _wrap_angle(a: float) -> float:
    return float((a + np.pi) % (2 * np.pi) - np.pi)


def point_at_arc(particles: np.ndarray, s: float) -> tuple[np.ndarray, float]:
    """Interpolated point and tangent direction at arc length s along the polyline."""
    seg = np.diff(particles, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = float(np.clip(s, 0.0, cum[-1]))
    i = int(np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg_len) - 1))
    frac = 0.0 if seg_len[i] == 0 else (s - cum[i]) / seg_len[i]
    p = particles[i] + frac * seg[i]
    tangent = float(np.arctan2(seg[i, 1], seg[i, 0]))
    return p, tangent


def spawn(config: SimConfig, seed: int) -> WorldState:
    """Seeded crumpled initial configuration; identical seeds give identical states."""
    config.validate()
    preset = config.preset()
    rng = np.random.default_rng(seed)
    n = config.n_particles
    rest = np.full(n - 1, config.rest_length)
    x0, y0, x1, y1 = config.workspace
    pin = np.array(config.pin, dtype=float)

    points = None
    for _ in range(100):
        heading0 = rng.uniform(-0.5, 0.5)
        wander = 0.0
        pts = np.empty((n, 2))
        pts[0] = pin
        for i in range(1, n):
            wander = float(np.clip(0.85 * wander + preset.turn_sigma * rng.standard_normal(), -1.0, 1.0))
            h = heading0 + wander
            pts[i] = pts[i - 1] + config.rest_length * np.array([np.cos(h), np.sin(h)])
        if (
            pts[:, 0].min() >= x0 + _WALK_MARGIN
            and pts[:, 0].max() <= x1 - _WALK_MARGIN
            and pts[:, 1].min() >= y0 + _WALK_MARGIN
            and pts[:, 1].max() <= y1 - _WALK_MARGIN
        ):
            points = pts
            break
    if points is None:
        raise WorkspaceError(
            f"spawn random walk left workspace bounds 100 times (preset={preset.name}); "
            "workspace is too tight for the configured L"
        )

    rope = RopeState(
        particles=points,
        rest_length=rest,
        pinned_index=0,
        friction_coeff=preset.friction_coeff,
        compliance=preset.compliance,
        dangling_pull=preset.dangling_pull,
    )
    s0 = _SPAWN_GRASP_FRACTION * config.L
    gp, tangent = point_at_arc(points, s0)
    pose = np.array([gp[0], gp[1], tangent])
    gripper = GripperState(
        pose=pose,
        aperture=config.grasp_aperture,
        grasping=True,
        sensor_window=config.sensor_window,
    )
    links = np.array(config.link_lengths)
    base = np.array(config.arm_base)
    q = arm.solve_ik(gp, _IK_SEED, links, base)
    return WorldState(
        rope=rope,
        gripper=gripper,
        arm=ArmState(joint_angles=q, link_lengths=links),
        time=0.0,
        status=Status.RUNNING,
    )


def _cross2(ax, ay, bx, by):
    return ax * by - ay * bx


def _find_contact(particles: np.ndarray, gripper: GripperState) -> Contact | None:
    """Rope polyline crossing of the gripper's lateral finger segment.

    The finger segment is perpendicular to the heading, centered on the gripper
    origin, with half-length = sensor window width / 2. Among multiple crossings
    the one closest to the window center wins (ties: larger arc length).
    """
    g = gripper.position
    nvec = gripper.normal
    hw = gripper.sensor_window[1] / 2.0
    a = g - hw * nvec
    d2 = 2 * hw * nvec

    p = particles[:-1]
    seg = np.diff(particles, axis=0)
    denom = _cross2(seg[:, 0], seg[:, 1], d2[0], d2[1])
    ap = a - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross2(ap[:, 0], ap[:, 1], d2[0], d2[1]) / denom
        u = _cross2(ap[:, 0], ap[:, 1], seg[:, 0], seg[:, 1]) / denom
    valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
    if not valid.any():
        return None

    idx = np.flatnonzero(valid)
    pts = p[idx] + t[idx, None] * seg[idx]
    lat = (pts - g) @ nvec
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = cum[idx] + t[idx] * seg_len[idx]
    # closest to center; among near-ties prefer the farthest along the rope
    order = np.lexsort((-s, np.round(np.abs(lat), 6)))
    k = order[0]
    return Contact(
        s=float(s[k]),
        point=pts[k].copy(),
        lateral=float(lat[k]),
        tangent=float(np.arctan2(seg[idx[k], 1], seg[idx[k], 0])),
    )


def contact_point(world: WorldState) -> Contact | None:
    """Ground-truth contact point, or None when not grasping / no crossing."""
    if not world.gripper.grasping:
        return None
    return _find_contact(world.rope.particles, world.gripper)


def _solve_constraints(pts: np.ndarray, rest: np.ndarray, pin: np.ndarray, compliance: float, iterations: int) -> float:
    """Project distance constraints (red-black Gauss-Seidel) with a hard pin.

    Returns the max residual strain after the solve.
    """
    n = len(pts)
    invm = np.ones(n)
    invm[0] = 0.0
    stiff = 1.0 / (1.0 + compliance)
    even = np.arange(0, n - 1, 2)
    odd = np.arange(1, n - 1, 2)
    for _ in range(iterations):
        pts[0] = pin
        for idx in (even, odd):
            d = pts[idx + 1] - pts[idx]
            ln = np.linalg.norm(d, axis=1)
            ln = np.where(ln < 1e-12, 1e-12, ln)
            dirn = d / ln[:, None]
            corr = (ln - rest[idx]) * stiff
            wsum = invm[idx] + invm[idx + 1]
            pts[idx] += (invm[idx] / wsum * corr)[:, None] * dirn
            pts[idx + 1] -= (invm[idx + 1] / wsum * corr)[:, None] * dirn
    pts[0] = pin
    ln = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return float(np.max(np.abs(ln - rest) / rest))


def step(world: WorldState, action: GripperAction, config: SimConfig) -> WorldState:
    """Advance one dt. Pure function: the input state is left untouched."""
    if world.status is not Status.RUNNING:
        raise SimError(f"cannot step a world with status {world.status.value}")
    preset = config.preset()
    g = world.gripper

    # gripper motion, velocity-clamped
    dp = np.asarray(action.target_pose[:2], dtype=float) - g.pose[:2]
    dist = float(np.linalg.norm(dp))
    max_d = config.max_speed * config.dt
    if dist > max_d:
        dp *= max_d / dist
    dth = _wrap_angle(float(action.target_pose[2]) - float(g.pose[2]))
    dth = float(np.clip(dth, -config.max_yaw_rate * config.dt, config.max_yaw_rate * config.dt))
    pose = np.array([g.pose[0] + dp[0], g.pose[1] + dp[1], _wrap_angle(float(g.pose[2]) + dth)])
    d_ap = float(np.clip(action.target_aperture - g.aperture, -config.aperture_rate * config.dt, config.aperture_rate * config.dt))
    aperture = float(np.clip(g.aperture + d_ap, 0.0, config.aperture_max))
    grasping = aperture <= config.grasp_aperture + 1e-12
    gripper = GripperState(pose=pose, aperture=aperture, grasping=grasping, sensor_window=g.sensor_window)

    pts = world.rope.particles.copy()
    pin = world.rope.particles[0].copy()
    heading = gripper.heading
    nvec = gripper.normal

    if grasping:
        rel = pts - pose[:2]
        along = rel @ heading
        lat = rel @ nvec
        in_channel = (np.abs(along) <= g.sensor_window[0] / 2.0) & (np.abs(lat) <= g.sensor_window[1])
        if in_channel.any():
            fric = world.rope.friction_coeff
            # lateral re-centering toward the finger channel axis, slip-limited
            slip = fric * config.slip_limit
            d_lat = -np.clip(config.drag_gain * lat[in_channel], -slip, slip)
            pts[in_channel] += d_lat[:, None] * nvec
            # longitudinal friction drag with the gripper motion
            disp_along = float(dp @ heading)
            pts[in_channel] += (config.long_drag * fric * disp_along) * heading
            # dangling fabric pull (2-D object analogs)
            if world.rope.dangling_pull > 0:
                pts[in_channel] -= world.rope.dangling_pull * nvec

        contact_pre = _find_contact(pts, gripper)
        if contact_pre is not None and config.tension_gain > 0:
            # the traced portion is kept tensioned toward the pin-contact chord
            arcs = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
            traced = arcs < contact_pre.s
            chord = contact_pre.point - pin
            chord_len = float(np.linalg.norm(chord))
            if chord_len > 1e-9 and traced.any():
                u = chord / chord_len
                proj = np.clip((pts[traced] - pin) @ u, 0.0, chord_len)
                target = pin + proj[:, None] * u
                pull = config.tension_gain * (target - pts[traced])
                mag = np.linalg.norm(pull, axis=1)
                scale = np.where(mag > 0.002, 0.002 / np.maximum(mag, 1e-12), 1.0)
                pts[traced] += pull * scale[:, None]

    strain = _solve_constraints(pts, world.rope.rest_length, pin, world.rope.compliance, config.solver_iterations)

    rope = RopeState(
        particles=pts,
        rest_length=world.rope.rest_length,
        pinned_index=world.rope.pinned_index,
        friction_coeff=world.rope.friction_coeff,
        compliance=world.rope.compliance,
        dangling_pull=world.rope.dangling_pull,
    )

    links = world.arm.link_lengths
    q = arm.solve_ik(pose[:2], world.arm.joint_angles, links, np.array(config.arm_base))
    new_arm = ArmState(joint_angles=q, link_lengths=links)

    status = Status.RUNNING
    if float(np.linalg.norm(pose[:2] - pin)) < config.collision_radius or strain > config.pin_tension_strain:
        status = Status.COLLIDED
    elif grasping and _find_contact(pts, gripper) is None:
        status = Status.DROPPED

    return WorldState(rope=rope, gripper=gripper, arm=new_arm, time=world.time + config.dt, status=status)
