"""Session server: single simulation authority plus WebSocket fan-out.

One asyncio task runs the 30 Hz simulation loop; connection handlers only
exchange messages with it through per-client outbound queues and a single
shared command slot (latest command wins within a tick).  Recording buffers
(observation, action) pairs at the simulation rate and finalizes a labeled
episode into the session dataset on stop.
"""

from __future__ import annotations

import asyncio
import contextlib
import dataclasses
import http
import json
import signal
from pathlib import Path

import numpy as np

from .. import __version__
from ..config import RunConfig, ServiceConfig
from ..labeling import Episode, LabeledEpisode, label_episode, write_dataset
from ..rollout import Trajectory, make_observation
from ..sim import GripperAction, SimError, Status, WorldState, spawn, step
from ..sim.world import _wrap_angle
from ..tactile import extract_contact, pixel_to_gripper
from ..teleop import manipulability, max_manipulability, singularity_alert
from .protocol import (
    PROTOCOL_VERSION,
    ProtocolError,
    clamp_move,
    encode_image_payload,
    parse_command,
    state_payload,
)

DEFAULT_SESSION_SEED = 0
_QUEUE_LIMIT = 256  # slow consumers drop oldest frames instead of stalling the loop


class _Client:
    def __init__(self) -> None:
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=_QUEUE_LIMIT)
        self.seq = 0

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def push(self, *frames) -> None:
        """Queue frames, dropping the oldest when the consumer lags."""
        for frame in frames:
            while True:
                try:
                    self.queue.put_nowait(frame)
                    break
                except asyncio.QueueFull:
                    with contextlib.suppress(asyncio.QueueEmpty):
                        self.queue.get_nowait()


class SessionServer:
    """Owns the world state; serves observers and a single controller."""

    def __init__(
        self,
        run: RunConfig,
        service: ServiceConfig | None = None,
        out_dir: str | Path | None = None,
        host: str = "127.0.0.1",
    ) -> None:
        self.run = run
        self.service = service or run.service
        self.host = host
        self.out_dir = Path(out_dir) if out_dir else Path("teleop_session")
        self.sim = run.sim
        self.seed = DEFAULT_SESSION_SEED
        self.world: WorldState = spawn(self.sim, self.seed)
        self.ticks = 0
        self.step_idx = 0  # steps since last reset (observation/frame seeding)
        self._max_arc = 0.0
        self._w_max = max_manipulability(tuple(self.sim.link_lengths))

        self.clients: dict[object, _Client] = {}
        self.controller = None  # websocket holding the control token
        self._pending_move: dict | None = None  # latest move command this tick
        self._grip_target: float | None = None

        self.recording = False
        self._rec_states: list[WorldState] = []
        self._rec_obs: list = []
        self._rec_actions: list[GripperAction] = []
        self.episodes: list[LabeledEpisode] = []
        self.last_trajectory: Trajectory | None = None

        self._server = None
        self._loop_task: asyncio.Task | None = None
        self._stopping = asyncio.Event()
        self._cmd_ready = asyncio.Event()  # lockstep mode: a move is waiting

    # ------------------------------------------------------------- lifecycle

    async def start(self) -> None:
        from websockets.asyncio.server import serve

        self._server = await serve(
            self._handler, self.host, self.service.port,
            process_request=self._process_request, max_size=2**22,
        )
        self._loop_task = asyncio.create_task(self._sim_loop())

    async def stop(self) -> None:
        self._stopping.set()
        if self._loop_task:
            self._loop_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._loop_task
        if self.recording:
            self._finalize_recording(None)
        if self._server:
            self._server.close()
            await self._server.wait_closed()

    def _process_request(self, connection, request):
        if request.path == "/health":
            body = json.dumps({"version": __version__, "protocol": PROTOCOL_VERSION,
                               "ticks": self.ticks})
            return connection.respond(http.HTTPStatus.OK, body + "\n")
        return None

    # ------------------------------------------------------------- sim loop

    async def _sim_loop(self) -> None:
        period = self.sim.dt
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while not self._stopping.is_set():
            if self.service.lockstep:
                await self._cmd_ready.wait()
                self._cmd_ready.clear()
            elif self.service.realtime:
                next_tick += period
                delay = next_tick - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    next_tick = loop.time()
            else:
                await asyncio.sleep(0)
            self._tick()

    def _tick(self) -> None:
        action = self._consume_action()
        if self.world.status is Status.RUNNING:
            obs = None
            if self.recording:
                obs = make_observation(self.world, self.sim, self.run.frame, self.seed, self.step_idx)
            try:
                new_world = step(self.world, action, self.sim)
            except SimError as e:
                self._broadcast_error(f"simulation fault: {e}; session reset")
                self._reset(self.seed, self.sim.object_preset)
                return
            if self.recording:
                self._rec_obs.append(obs)
                self._rec_actions.append(action)
                self._rec_states.append(new_world)
            self.world = new_world
            self.step_idx += 1
            c = self._true_contact()
            if c is not None:
                self._max_arc = max(self._max_arc, c.s)
            if self.world.status is not Status.RUNNING and self.recording:
                self._finalize_recording(None)
        self.ticks += 1
        if self.ticks % self.service.broadcast_decimation == 0:
            self._broadcast_frame()

    def _consume_action(self) -> GripperAction:
        pose = self.world.gripper.pose.copy()
        if self._pending_move is not None:
            dx, dy, dtheta = clamp_move(
                self._pending_move["dx"], self._pending_move["dy"],
                self._pending_move["dtheta"], self.sim,
            )
            pose[0] += dx
            pose[1] += dy
            pose[2] = _wrap_angle(pose[2] + dtheta)
            self._pending_move = None
        aperture = self._grip_target if self._grip_target is not None else self.world.gripper.aperture
        return GripperAction(target_pose=pose, target_aperture=float(aperture))

    def _true_contact(self):
        from ..sim import contact_point

        return contact_point(self.world)

    # ------------------------------------------------------------ broadcast

    def _frame_messages(self, client: _Client) -> list:
        """State + image frames for one client (its own seq numbering)."""
        tac = make_observation(self.world, self.sim, self.run.frame, self.seed, self.step_idx)
        est = extract_contact(tac.tactile, self.run.extraction)
        contact = None
        if est is not None:
            gx, gy = pixel_to_gripper(tuple(est.p_tac), tac.tactile)[:2]
            contact = {"u": float(est.p_tac[0]), "v": float(est.p_tac[1]),
                       "gripper_xy": [gx, gy], "method": est.method.value}
        w = manipulability(self.world.arm.joint_angles, np.array(self.sim.link_lengths))
        alert = singularity_alert(w, self._w_max)
        completion = min(self._max_arc / self.sim.L, 1.0)
        t = self.world.time
        state = {
            "type": "state", "seq": client.next_seq(), "time": t,
            "payload": state_payload(self.world, self.sim, completion, w, alert,
                                     self.recording, contact, self.ticks),
        }
        tac_header, tac_blob = encode_image_payload("tactile", client.next_seq(), t, tac.tactile.pixels)
        vis_header, vis_blob = encode_image_payload("visual", client.next_seq(), t, tac.visual)
        frames = [json.dumps(state), json.dumps(tac_header), tac_blob,
                  json.dumps(vis_header), vis_blob]
        if alert:
            frames.append(json.dumps({
                "type": "alert", "seq": client.next_seq(), "time": t,
                "payload": {"manipulability": w, "threshold": 0.2 * self._w_max},
            }))
        return frames

    def _broadcast_frame(self) -> None:
        for client in self.clients.values():
            client.push(*self._frame_messages(client))

    def _broadcast_error(self, detail: str, client_seq=None, only: _Client | None = None) -> None:
        targets = [only] if only is not None else list(self.clients.values())
        for client in targets:
            client.push(json.dumps({
                "type": "error", "seq": client.next_seq(), "time": self.world.time,
                "payload": {"detail": detail, "client_seq": client_seq},
            }))

    def snapshot(self, client: _Client) -> list:
        """Full-state frames for a late joiner (same codec as the live stream)."""
        return self._frame_messages(client)

    # ------------------------------------------------------------ commands

    async def handle_command(self, ws, cmd: dict) -> None:
        client = self.clients[ws]
        if cmd["type"] in ("move", "grip", "record", "reset") and ws is not self.controller:
            self._broadcast_error("not the controller", cmd.get("client_seq"), only=client)
            return
        if self.service.lockstep:
            # exactly one command per tick; later commands wait for it to land
            while self._pending_move is not None:
                await asyncio.sleep(0)
        if cmd["type"] == "move":
            self._pending_move = cmd  # last writer wins within the tick
            self._cmd_ready.set()
        elif cmd["type"] == "grip":
            self._grip_target = float(np.clip(cmd["aperture"], 0.0, self.sim.aperture_max))
        elif cmd["type"] == "record":
            if cmd["action"] == "start":
                self._start_recording()
            else:
                self._finalize_recording(client)
        elif cmd["type"] == "reset":
            self._reset(cmd["seed"], cmd["preset"] or self.sim.object_preset)

    def _start_recording(self) -> None:
        self.recording = True
        self._rec_states = [self.world]
        self._rec_obs = []
        self._rec_actions = []
        self._announce_recording(True, None)

    def _finalize_recording(self, client: _Client | None) -> None:
        self.recording = False
        states, obs, actions = self._rec_states, self._rec_obs, self._rec_actions
        self._rec_states, self._rec_obs, self._rec_actions = [], [], []
        if len(obs) < 2:
            self._broadcast_error("recording discarded: fewer than 2 steps", only=client)
            self._announce_recording(False, None)
            return
        traj = Trajectory(states=states, actions=actions, observations=obs,
                          config=self.sim, seed=self.seed)
        self.last_trajectory = traj
        episode = Episode(
            steps=[(o, np.concatenate([a.target_pose, [a.target_aperture]]).astype(np.float32))
                   for o, a in zip(obs, actions)],
            p_0=states[0].rope.particles[0].copy(),
            rate_hz=round(1.0 / self.sim.dt),
            object_preset=self.sim.object_preset,
            seed=self.seed,
        )
        try:
            labeled = label_episode(episode, self.run.extraction)
        except Exception as e:  # labeling failure keeps the session alive
            self._broadcast_error(f"recording discarded: {e}", only=client)
            self._announce_recording(False, None)
            return
        self.episodes.append(labeled)
        self.out_dir.parent.mkdir(parents=True, exist_ok=True)
        write_dataset(self.episodes, self.out_dir)
        self._announce_recording(False, len(self.episodes) - 1)

    def _announce_recording(self, on: bool, episode_id: int | None) -> None:
        for client in self.clients.values():
            client.push(json.dumps({
                "type": "recording", "seq": client.next_seq(), "time": self.world.time,
                "payload": {"on": on, "episode_id": episode_id,
                            "episodes": len(self.episodes)},
            }))

    def _reset(self, seed: int, preset: str) -> None:
        self.sim = dataclasses.replace(self.sim, object_preset=preset)
        self.seed = seed
        self.world = spawn(self.sim, seed)
        self.step_idx = 0
        self._max_arc = 0.0
        self._pending_move = None
        self._grip_target = None
        if self.recording:
            self.recording = False
            self._rec_states, self._rec_obs, self._rec_actions = [], [], []
            self._announce_recording(False, None)

    # ------------------------------------------------------------ handlers

    async def _handler(self, ws) -> None:
        from websockets.exceptions import ConnectionClosed

        client = _Client()
        self.clients[ws] = client
        if self.controller is None:
            self.controller = ws
        client.push(json.dumps({
            "type": "ack", "seq": client.next_seq(), "time": self.world.time,
            "payload": {
                "protocol": PROTOCOL_VERSION,
                "controller": ws is self.controller,
                "velocity_limit": self.sim.max_speed,
                "preset": self.sim.object_preset,
            },
        }))
        client.push(*self.snapshot(client))
        sender = asyncio.create_task(self._send_loop(ws, client))
        try:
            async for raw in ws:
                if isinstance(raw, bytes):
                    self._broadcast_error("unexpected binary frame", only=client)
                    continue
                try:
                    cmd = parse_command(json.loads(raw))
                except (json.JSONDecodeError, ProtocolError) as e:
                    client_seq = None
                    if isinstance(raw, str):
                        with contextlib.suppress(Exception):
                            client_seq = json.loads(raw).get("client_seq")
                    self._broadcast_error(f"malformed command: {e}", client_seq, only=client)
                    continue
                await self.handle_command(ws, cmd)
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await sender
            del self.clients[ws]
            if self.controller is ws:
                self.controller = next(iter(self.clients), None)

    async def _send_loop(self, ws, client: _Client) -> None:
        from websockets.exceptions import ConnectionClosed

        with contextlib.suppress(ConnectionClosed):
            while True:
                frame = await client.queue.get()
                await ws.send(frame)


def serve_forever(run: RunConfig, service: ServiceConfig | None = None,
                  out_dir: str | Path | None = None) -> None:
    """Blocking entry point used by the CLI; SIGINT/SIGTERM shut down cleanly."""

    async def _main() -> None:
        server = SessionServer(run, service, out_dir)
        await server.start()
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            with contextlib.suppress(NotImplementedError):
                loop.add_signal_handler(sig, stop.set)
        print(f"serving on ws://{server.host}:{server.service.port} (health: /health)")
        await stop.wait()
        await server.stop()

    asyncio.run(_main())
