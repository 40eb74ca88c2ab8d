"""Acceptance suite: one test per release criterion, each printing a pass/fail line.

Criteria 1-8 exercise the core package only; criterion 9 covers the optional
browser teleoperation client and skips cleanly when frontend/ is not built.
"""

from __future__ import annotations

import dataclasses
import json
import time
from pathlib import Path

import numpy as np
import pytest

from tracebench.config import EvalConfig, ExpertGains, SimConfig, TrainConfig
from tracebench.evaluation import Outcome, classify_outcome, wilson_ci
from tracebench.labeling import center_weight, completion_index, read_dataset
from tracebench.policy.losses import Batch, kl_loss, total_loss
from tracebench.policy.network import init_params
from tracebench.policy.train import train
from tracebench.rollout import Trajectory
from tracebench.sim import GripperAction, Status, contact_point, spawn, step
from tracebench.sim.state import world_equal
from tracebench.tactile import ContactEstimate, Method, TactileFrame, extract_contact, render_tactile
from tracebench.teleop import make_expert_controller, manipulability, record_demos

from conftest import make_straight_world

REPO_ROOT = Path(__file__).resolve().parent.parent


def report(capsys, ok: bool, criterion: str, detail: str) -> None:
    with capsys.disabled():
        print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}", flush=True)
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------
# 1. Wilson confidence intervals reproduce the reference tables exactly.


def test_criterion_1_wilson_reference(capsys):
    pairs = {
        (27, 40): (52.0, 79.9),
        (28, 40): (54.6, 81.9),
        (32, 40): (65.2, 89.5),
        (9, 10): (59.6, 98.2),
        (8, 10): (49.0, 94.3),
        (7, 10): (39.7, 89.2),
        (6, 10): (31.3, 83.2),
        (14, 20): (48.1, 85.5),
        (12, 20): (38.7, 78.1),
    }
    mismatches = [
        f"{s}/{n}: got {wilson_ci(s, n)}, want {want}"
        for (s, n), want in pairs.items()
        if wilson_ci(s, n) != want
    ]
    report(capsys, not mismatches, "criterion 1",
           f"Wilson CIs exact on {len(pairs)} reference pairs"
           + (f" ({'; '.join(mismatches)})" if mismatches else ""))


# ---------------------------------------------------------------------------
# 2. Contact extraction: RMS <= 2 px over 100 renders, zero misses, < 5 s.


def test_criterion_2_extraction_oracle(capsys, sim_config, frame_spec, extraction):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    half_v = frame_spec.H / 2.0
    sq_errs = []
    misses = 0
    for i in range(100):
        off_px = rng.uniform(-0.8 * half_v, 0.8 * half_v)  # central 80% of the FOV
        world = make_straight_world(sim_config, s_frac=0.5, lateral_offset=-off_px / frame_spec.p2m)
        frame = render_tactile(world, frame_spec, texture_seed=i, config=sim_config)
        est = extract_contact(frame, extraction)
        if est is None:
            misses += 1
            continue
        truth = np.array([frame_spec.W / 2.0, half_v + off_px])
        sq_errs.append(np.sum((np.array(est.p_tac) - truth) ** 2))
    elapsed = time.perf_counter() - t0
    rms = float(np.sqrt(np.mean(sq_errs))) if sq_errs else float("inf")
    ok = misses == 0 and rms <= 2.0 and elapsed < 5.0
    report(capsys, ok, "criterion 2",
           f"extraction RMS {rms:.3f} px, {misses} misses, {elapsed:.2f} s over 100 renders")


# ---------------------------------------------------------------------------
# 3. Analytic gradients vs central finite differences: < 1e-4, 5 seeds, < 60 s.


def test_criterion_3_gradient_oracle(capsys):
    cfg = TrainConfig(chunk=4, latent_dim=2, hidden_dim=8, vis_dim=4, tac_dim=3,
                      kin_dim=3, enc_hidden=6)
    t0 = time.perf_counter()
    worst = 0.0
    n_params = init_params(cfg, 0).n_params()
    h = 1e-5  # balances truncation against float64 roundoff for this loss scale
    for seed in range(5):
        params = init_params(cfg, seed)
        rng = np.random.default_rng(seed)
        batch = Batch(
            vis=rng.uniform(0, 1, (3, 64, 64)),
            tac=rng.uniform(0, 1, (3, 32, 32)),
            kin=rng.normal(0, 1, (3, 4)),
            actions=rng.normal(0, 1, (3, cfg.chunk, 4)),
            weights=rng.uniform(0.4, 1.0, (3, cfg.chunk)),
            completion=rng.uniform(0, 1, (3, cfg.chunk)),
        )
        eps = rng.standard_normal((3, cfg.latent_dim))
        _, grads = total_loss(params, batch, eps)
        check_rng = np.random.default_rng(seed + 1000)
        names = list(params.tensors)
        for _ in range(60):
            name = names[check_rng.integers(len(names))]
            idx = tuple(check_rng.integers(s) for s in params.tensors[name].shape)
            orig = params.tensors[name][idx]
            params.tensors[name][idx] = orig + h
            up, _ = total_loss(params, batch, eps, with_grads=False)
            params.tensors[name][idx] = orig - h
            dn, _ = total_loss(params, batch, eps, with_grads=False)
            params.tensors[name][idx] = orig
            fd = (up.total - dn.total) / (2 * h)
            an = grads[name][idx]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-8))
    elapsed = time.perf_counter() - t0
    ok = n_params >= 500 and worst < 1e-4 and elapsed < 60.0
    report(capsys, ok, "criterion 3",
           f"max rel grad err {worst:.2e} on {n_params}-param net, 5 seeds, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 4. Closed-form KL within 1% of a 1e6-sample Monte Carlo estimate, < 30 s.


def test_criterion_4_kl_monte_carlo(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    n = 1_000_000
    worst = 0.0
    for _ in range(10):
        d = int(rng.integers(2, 9))
        mu = rng.uniform(-1.5, 1.5, d)
        logsig = rng.uniform(-0.7, 0.7, d)
        sig = np.exp(logsig)
        x = mu + sig * rng.standard_normal((n, d))
        # log q(x) - log p(x) averaged under q
        log_q = -0.5 * ((x - mu) / sig) ** 2 - logsig
        log_p = -0.5 * x**2
        mc = float(np.mean(np.sum(log_q - log_p, axis=1)))
        closed = kl_loss(mu[None], logsig[None])
        worst = max(worst, abs(closed - mc) / abs(closed))
    elapsed = time.perf_counter() - t0
    ok = worst < 0.01 and elapsed < 30.0
    report(capsys, ok, "criterion 4",
           f"KL vs 1e6-sample MC worst rel err {100 * worst:.3f}% on 10 pairs, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 5. Formula anchors: weights, completion, loss decomposition, manipulability.


def test_criterion_5_formula_anchors(capsys, sim_config):
    failures = []

    frame = TactileFrame(pixels=np.full((32, 32), 10, dtype=np.uint8), p2m=800.0)
    uc, vc = frame.center
    est_center = ContactEstimate((uc, vc), Method.ELLIPSE_FIT, 30.0, 0.0)
    if abs(center_weight(est_center, frame) - 1.0) > 1e-12:
        failures.append("w != 1 at the center")
    norm = float(np.hypot(uc, vc))
    est_unit = ContactEstimate((uc + norm, vc), Method.ELLIPSE_FIT, 30.0, 0.0)
    if abs(center_weight(est_unit, frame) - np.exp(-1.0)) > 1e-12:
        failures.append("w != e^-1 at normalized distance 1")

    p0, pT = np.array([0.0, 0.0]), np.array([0.5, 0.0])
    if completion_index(p0, p0, pT) != 0.0:
        failures.append("completion != 0 at the start point")
    if completion_index(np.array([0.9, 0.0]), p0, pT) != 1.0:
        failures.append("completion does not clamp at 1")
    for frac in np.linspace(0.0, 1.0, 21):
        got = completion_index(p0 + frac * (pT - p0), p0, pT)
        if abs(got - frac) > 0.02:
            failures.append(f"taut-line completion off by {abs(got - frac):.3f} at {frac:.2f}")
            break

    cfg = TrainConfig(chunk=3, latent_dim=2, hidden_dim=8, vis_dim=4, tac_dim=3,
                      kin_dim=3, enc_hidden=5)
    params = init_params(cfg, 0)
    rng = np.random.default_rng(1)
    batch = Batch(
        vis=rng.uniform(0, 1, (2, 64, 64)), tac=rng.uniform(0, 1, (2, 32, 32)),
        kin=rng.normal(0, 1, (2, 4)), actions=rng.normal(0, 1, (2, cfg.chunk, 4)),
        weights=rng.uniform(0.4, 1, (2, cfg.chunk)), completion=rng.uniform(0, 1, (2, cfg.chunk)),
    )
    bd, _ = total_loss(params, batch, np.zeros((2, cfg.latent_dim)), with_grads=False)
    if bd.total != bd.center + bd.lambda_reg * bd.reg + bd.lambda_task * bd.task:
        failures.append("loss decomposition not bit-exact")

    l1, l2 = 0.35, 0.2
    for q2 in (0.3, 1.2, -2.0):
        got = manipulability(np.array([0.5, q2]), np.array([l1, l2]))
        if abs(got - l1 * l2 * abs(np.sin(q2))) > 1e-9:
            failures.append(f"2-link manipulability mismatch at q2={q2}")
            break

    report(capsys, not failures, "criterion 5",
           "formula anchors (center weight, completion, loss split, manipulability)"
           + (f" failed: {'; '.join(failures)}" if failures else ""))


# ---------------------------------------------------------------------------
# 6. 100-seed simulation sweep: conservation, strain, determinism, drop logic.


def _segments_cross(a, b, p, q) -> bool:
    """Independent 2-D segment intersection test (orientation based)."""
    def orient(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    d1, d2 = orient(p, q, a), orient(p, q, b)
    d3, d4 = orient(a, b, p), orient(a, b, q)
    return ((d1 > 0) != (d2 > 0) or d1 == 0 or d2 == 0) and \
           ((d3 > 0) != (d4 > 0) or d3 == 0 or d4 == 0) and \
           not (d1 == 0 and d2 == 0 and d3 == 0 and d4 == 0 and
                max(min(a[0], b[0]), min(p[0], q[0])) > min(max(a[0], b[0]), max(p[0], q[0])))


def _finger_crosses_rope(world) -> bool:
    g = world.gripper
    if not g.grasping:
        return False
    half = g.sensor_window[1] / 2.0
    a = g.position - half * g.normal
    b = g.position + half * g.normal
    pts = world.rope.particles
    return any(_segments_cross(a, b, pts[i], pts[i + 1]) for i in range(len(pts) - 1))


def _scripted_run(config: SimConfig, seed: int, policy: str, n_steps: int = 120):
    world = spawn(config, seed)
    rng = np.random.default_rng(seed + 555)
    expert = make_expert_controller(ExpertGains(), config, jitter_seed=seed)
    states = [world]
    for i in range(n_steps):
        if world.status is not Status.RUNNING:
            break
        if policy == "expert":
            action = expert(world, i, None)
        else:  # seeded random walk, prone to dropping
            target = world.gripper.pose + np.array(
                [rng.normal(0, 0.003), rng.normal(0, 0.003), rng.normal(0, 0.05)])
            action = GripperAction(target_pose=target, target_aperture=config.grasp_aperture)
        world = step(world, action, config)
        states.append(world)
    return states


def test_criterion_6_simulation_sweep(capsys, sim_config):
    failures = []
    pin = np.array(sim_config.pin)
    for seed in range(100):
        policy = "expert" if seed % 2 == 0 else "random"
        states = _scripted_run(sim_config, seed, policy)
        for prev, cur in zip(states, states[1:]):
            if not np.array_equal(cur.rope.particles[0], pin):
                failures.append(f"seed {seed}: pin moved")
                break
            strain = np.abs(cur.rope.segment_lengths() / cur.rope.rest_length - 1.0).max()
            if cur.status is not Status.COLLIDED:
                # nominal tracing stays quasi-static; adversarial random jerks
                # may legitimately build tension up to the collision threshold
                bound = 0.02 if policy == "expert" else sim_config.pin_tension_strain
                if strain > bound:
                    failures.append(f"seed {seed} ({policy}): strain {strain:.4f} > {bound}")
                    break
            if cur.status is Status.DROPPED and _finger_crosses_rope(cur):
                failures.append(f"seed {seed}: Dropped while the window still crosses the object")
                break
            if cur.status is Status.RUNNING and cur.gripper.grasping and not _finger_crosses_rope(cur):
                failures.append(f"seed {seed}: Running+grasping without a window crossing")
                break
        if failures:
            break
    # bit-exact determinism on a 10-seed subsample
    for seed in range(0, 100, 10):
        policy = "expert" if seed % 2 == 0 else "random"
        a = _scripted_run(sim_config, seed, policy)
        b = _scripted_run(sim_config, seed, policy)
        if len(a) != len(b) or not all(world_equal(x, y) for x, y in zip(a, b)):
            failures.append(f"seed {seed}: non-deterministic replay")
            break
    report(capsys, not failures, "criterion 6",
           "100-seed sweep (pin conservation, strain <= 2%, drop logic, determinism)"
           + (f" failed: {failures[0]}" if failures else ""))


# ---------------------------------------------------------------------------
# 7. End-to-end pipeline: demos -> training -> evaluation, plus the center-
#    weight ablation trend over three training seeds.


@pytest.fixture(scope="module")
def pipeline_demos(tmp_path_factory, sim_config, gains):
    out = tmp_path_factory.mktemp("pipeline") / "demos"
    record_demos(25, sim_config, gains, seed=1, out_path=out)
    return read_dataset(out)


def _evaluate(params, sim_config, gains):
    from tracebench.evaluation import run_eval

    rep = run_eval(params, ["rope"], EvalConfig(trials=20, seed=100), sim_config, gains)
    return rep.rows["rope"]


def test_criterion_7_end_to_end(capsys, pipeline_demos, sim_config, gains):
    t0 = time.perf_counter()
    full_rows = []
    ablate_rows = []
    for seed in (1, 2, 3):
        res = train(pipeline_demos, TrainConfig(seed=seed))
        full_rows.append(_evaluate(res.params, sim_config, gains))
        res_ab = train(pipeline_demos, TrainConfig(seed=seed, ablate_center=True))
        ablate_rows.append(_evaluate(res_ab.params, sim_config, gains))
    elapsed = time.perf_counter() - t0

    successes = full_rows[0]["successes"]
    full_drop = sum(r["counts"]["ObjectDropping"] for r in full_rows)
    ablate_drop = sum(r["counts"]["ObjectDropping"] for r in ablate_rows)
    ok = successes >= 12 and ablate_drop >= full_drop  # ties pass, reversals fail
    report(capsys, ok, "criterion 7",
           f"seed-1 policy {successes}/20 successes (need >= 12); ObjectDropping over 3 seeds: "
           f"full {full_drop} vs no-center-weight {ablate_drop}; {elapsed / 60:.1f} min")


# ---------------------------------------------------------------------------
# 8. Outcome taxonomy: 1000 fuzzed trajectories, exhaustive + exclusive.


def test_criterion_8_outcome_taxonomy(capsys, sim_config):
    rng = np.random.default_rng(0)
    failures = []
    counts = {o: 0 for o in Outcome}
    for trial in range(1000):
        n = int(rng.integers(2, 6))
        fracs = np.sort(rng.uniform(0.02, 1.0, n))
        final = [Status.RUNNING, Status.DROPPED, Status.COLLIDED][int(rng.integers(3))]
        states = [make_straight_world(sim_config, s_frac=float(f)) for f in fracs]
        if final is not Status.RUNNING:
            end = dataclasses.replace(
                states[-1], status=final,
                gripper=dataclasses.replace(states[-1].gripper, grasping=False,
                                            aperture=sim_config.aperture_max))
            states.append(end)
        actions = [GripperAction(s.gripper.pose.copy(), s.gripper.aperture) for s in states[1:]]
        traj = Trajectory(states=states, actions=actions, observations=[],
                          config=sim_config, seed=trial)
        out = classify_outcome(traj, sim_config).outcome
        counts[out] += 1
        reached = float(fracs[-1]) * sim_config.L
        over = reached >= 0.95 * sim_config.L
        expected = (
            Outcome.ROBOT_COLLISION if final is Status.COLLIDED
            else (Outcome.OVER_TRACING if over else Outcome.OBJECT_DROPPING) if final is Status.DROPPED
            else Outcome.SUCCESS if over
            else Outcome.EARLY_STOPPING
        )
        if out is not expected:
            failures.append(f"trial {trial}: got {out.value}, expected {expected.value}")
            break

    # boundary pair: dropped at 0.94 L vs 0.96 L
    for frac, want in ((0.94, Outcome.OBJECT_DROPPING), (0.96, Outcome.OVER_TRACING)):
        states = [make_straight_world(sim_config, s_frac=0.3),
                  make_straight_world(sim_config, s_frac=frac)]
        end = dataclasses.replace(
            states[-1], status=Status.DROPPED,
            gripper=dataclasses.replace(states[-1].gripper, grasping=False,
                                        aperture=sim_config.aperture_max))
        states.append(end)
        actions = [GripperAction(s.gripper.pose.copy(), s.gripper.aperture) for s in states[1:]]
        got = classify_outcome(Trajectory(states=states, actions=actions, observations=[],
                                          config=sim_config, seed=0), sim_config).outcome
        if got is not want:
            failures.append(f"drop at {frac:.2f} L classified {got.value}, want {want.value}")

    seen = sum(1 for c in counts.values() if c > 0)
    report(capsys, not failures, "criterion 8",
           f"1000 fuzzed trajectories, {seen}/5 classes exercised, boundary 0.94/0.96 L correct"
           + (f"; failed: {failures[0]}" if failures else ""))


# ---------------------------------------------------------------------------
# 9. [SECONDARY] Browser teleoperation client: build artifacts + wire replay.


def test_criterion_9_frontend(capsys):
    frontend = REPO_ROOT / "frontend"
    if not (frontend / "package.json").exists():
        pytest.skip("frontend not present; secondary component not built")
    dist = frontend / "dist"
    built = dist.is_dir() and any(dist.glob("*.js"))
    if not built:
        report(capsys, False, "criterion 9", "frontend present but not built (missing dist/*.js)")

    # the client consumes the same wire protocol the server speaks: replay the
    # scripted session end to end and accept the recorded dataset
    import asyncio

    from tracebench.config import RunConfig, ServiceConfig
    from tracebench.evaluation import classify_outcome as classify
    from tracebench.rollout import run_rollout
    from tracebench.sim.world import _wrap_angle
    from tracebench.teleop import expert_step_budget, make_expert_controller

    from test_service import Stream, free_port, running_server, ws_connect

    run = RunConfig()
    seed = 1
    offline = run_rollout(run.sim, seed,
                          make_expert_controller(run.expert, run.sim, jitter_seed=seed),
                          expert_step_budget(run.sim, run.expert))
    assert classify(offline, run.sim).outcome is Outcome.SUCCESS

    import tempfile

    with tempfile.TemporaryDirectory() as td:
        out = Path(td) / "sess"

        async def scenario():
            service = ServiceConfig(port=free_port(), lockstep=True, broadcast_decimation=10_000)
            async with running_server(run, service, out) as server:
                ws = await ws_connect(service)
                s = Stream(ws)
                await s.next()
                await s.until("visual")
                await ws.send(json.dumps({"type": "reset", "seed": seed}))
                await ws.send(json.dumps({"type": "record", "action": "start"}))
                await s.until("recording")
                for state, action in zip(offline.states[:-1], offline.actions):
                    await ws.send(json.dumps({
                        "type": "move",
                        "dx": float(action.target_pose[0] - state.gripper.pose[0]),
                        "dy": float(action.target_pose[1] - state.gripper.pose[1]),
                        "dtheta": float(_wrap_angle(action.target_pose[2] - state.gripper.pose[2])),
                    }))
                await ws.send(json.dumps({"type": "record", "action": "stop"}))
                rec = await s.until("recording", timeout=60.0)
                await ws.close()
                return rec, server.world.status

        rec, status = asyncio.run(scenario())
        episodes = read_dataset(out)
        ok = (rec["payload"]["episode_id"] == 0 and len(episodes) == 1
              and len(episodes[0].episode) == len(offline.actions))
    report(capsys, ok, "criterion 9",
           "frontend built; scripted wire session recorded and dataset accepted")
