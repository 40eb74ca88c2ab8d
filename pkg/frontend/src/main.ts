/**
 * Browser entry point: wires the socket client, input mapper, and canvases.
 *
 * Single-threaded: the socket reader updates one shared session-state value
 * through the reducer, and a requestAnimationFrame loop renders whatever
 * that value holds (hold-last between 15 Hz server frames) while draining
 * the input mapper at display rate.
 */

import { TeleopClient } from "./client.js";
import { HeldKeys, InputMapper, KEY_BINDINGS, noKeys } from "./input.js";
import { drawImagePanel, drawStatusBar, drawWorld, statusLine, Viewport } from "./render.js";
import { applyMessage, initialSessionState, markDisconnected } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const worldCanvas = el<HTMLCanvasElement>("world");
  const tactileCanvas = el<HTMLCanvasElement>("tactile");
  const visualCanvas = el<HTMLCanvasElement>("visual");
  const status = el<HTMLDivElement>("status");
  const hintBox = el<HTMLDivElement>("hint");
  const banner = el<HTMLDivElement>("banner");
  const bar = el<HTMLDivElement>("manip-bar");
  const pulse = el<HTMLDivElement>("pulse");

  let session = initialSessionState();
  const keys: HeldKeys = noKeys();
  const mapper = new InputMapper();
  let audio: AudioContext | null = null;
  let lastAlert = false;

  const params = new URLSearchParams(location.search);
  const url = params.get("ws") ?? `ws://${location.hostname}:8765`;
  const client = new TeleopClient(url, {
    onMessage: (msg) => {
      session = applyMessage(session, msg);
    },
    onOpen: () => {
      banner.hidden = true;
    },
    onClose: () => {
      session = markDisconnected(session);
      banner.hidden = false;
    },
  });
  client.connect();

  window.addEventListener("keydown", (ev) => {
    const field = KEY_BINDINGS[ev.code];
    if (field) {
      keys[field] = true;
      ev.preventDefault();
      if (audio === null) audio = new AudioContext(); // needs a user gesture
    }
  });
  window.addEventListener("keyup", (ev) => {
    const field = KEY_BINDINGS[ev.code];
    if (field) keys[field] = false;
  });

  function alertBeep(): void {
    if (audio === null) return;
    const osc = audio.createOscillator();
    const gain = audio.createGain();
    osc.frequency.value = 880;
    gain.gain.value = 0.05;
    osc.connect(gain).connect(audio.destination);
    osc.start();
    osc.stop(audio.currentTime + 0.12);
  }

  let lastT = performance.now();
  function frame(now: number): void {
    const dt = Math.min(0.1, (now - lastT) / 1000);
    lastT = now;

    const limits = session.state
      ? { velocityLimit: session.state.velocity_limit, yawRateLimit: session.state.yaw_rate_limit }
      : { velocityLimit: 0, yawRateLimit: 0 };
    const out = mapper.frame(keys, limits, dt, session.controller, () =>
      Math.floor(Math.random() * 1_000_000),
    );
    for (const cmd of out.commands) client.send(cmd);
    hintBox.textContent = out.hint ?? "";

    if (session.state) {
      const vp: Viewport = {
        world: [0, 0, 0.6, 0.6],
        widthPx: worldCanvas.width,
        heightPx: worldCanvas.height,
      };
      drawWorld(worldCanvas.getContext("2d")!, session.state, vp);
    }
    drawImagePanel(tactileCanvas.getContext("2d")!, session.tactile);
    drawImagePanel(visualCanvas.getContext("2d")!, session.visual);
    status.textContent = statusLine(session);
    drawStatusBar(bar, pulse, session);
    if (session.alert && !lastAlert) alertBeep();
    lastAlert = session.alert;

    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

main();
