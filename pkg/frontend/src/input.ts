/**
 * Keyboard → command mapping.
 *
 * Called once per display frame with the currently held keys.  Move deltas
 * are pre-clamped client-side to the velocity/yaw-rate limits the server
 * advertises in its state payload, so the UI never emits a command the
 * server would have to clamp.  Record/grip/reset are edge-triggered: holding
 * the key produces exactly one command per press.
 */

import { Command, MoveCommand } from "./protocol.js";

export interface HeldKeys {
  up: boolean;
  down: boolean;
  left: boolean;
  right: boolean;
  yawLeft: boolean;
  yawRight: boolean;
  grip: boolean;
  record: boolean;
  reset: boolean;
}

export function noKeys(): HeldKeys {
  return {
    up: false,
    down: false,
    left: false,
    right: false,
    yawLeft: false,
    yawRight: false,
    grip: false,
    record: false,
    reset: false,
  };
}

/** Velocity limits advertised by the server (per second). */
export interface MoveLimits {
  velocityLimit: number;
  yawRateLimit: number;
}

/** Clamp a per-frame delta: translation norm and |dtheta| stay within limits. */
export function clampDelta(
  dx: number,
  dy: number,
  dtheta: number,
  limits: MoveLimits,
  dtSeconds: number,
): { dx: number; dy: number; dtheta: number } {
  const maxD = limits.velocityLimit * dtSeconds;
  const norm = Math.hypot(dx, dy);
  if (norm > maxD && norm > 0) {
    dx = (dx * maxD) / norm;
    dy = (dy * maxD) / norm;
  }
  const maxTheta = limits.yawRateLimit * dtSeconds;
  dtheta = Math.min(maxTheta, Math.max(-maxTheta, dtheta));
  return { dx, dy, dtheta };
}

/**
 * Map held direction keys to a clamped move delta for one display frame,
 * or null when no direction key is held (no keys → no move messages).
 */
export function mapMove(
  keys: HeldKeys,
  limits: MoveLimits,
  dtSeconds: number,
): { dx: number; dy: number; dtheta: number } | null {
  const dx = (keys.right ? 1 : 0) - (keys.left ? 1 : 0);
  const dy = (keys.up ? 1 : 0) - (keys.down ? 1 : 0);
  const dtheta = (keys.yawLeft ? 1 : 0) - (keys.yawRight ? 1 : 0);
  if (dx === 0 && dy === 0 && dtheta === 0) return null;
  return clampDelta(
    dx * limits.velocityLimit * dtSeconds,
    dy * limits.velocityLimit * dtSeconds,
    dtheta * limits.yawRateLimit * dtSeconds,
    limits,
    dtSeconds,
  );
}

/** Rising-edge detector: fires once per press, never while a key is held. */
export class EdgeTrigger {
  private wasDown = false;

  update(down: boolean): boolean {
    const fired = down && !this.wasDown;
    this.wasDown = down;
    return fired;
  }
}

export interface MapperOutput {
  commands: Command[];
  /** Set when input is ignored because this client lacks the controller token. */
  hint: string | null;
}

export class InputMapper {
  private clientSeq = 0;
  private recordTrigger = new EdgeTrigger();
  private gripTrigger = new EdgeTrigger();
  private resetTrigger = new EdgeTrigger();
  private recordingRequested = false;
  private gripClosed = true;

  constructor(
    private readonly gripClosedAperture: number = 0.006,
    private readonly gripOpenAperture: number = 0.03,
  ) {}

  private nextSeq(): number {
    return this.clientSeq++;
  }

  /**
   * Produce the commands for one display frame.  Without the controller
   * token every input is dropped and a hint is returned instead (edge
   * triggers still update so a queued press does not fire later).
   */
  frame(
    keys: HeldKeys,
    limits: MoveLimits,
    dtSeconds: number,
    hasController: boolean,
    resetSeed: () => number = () => 0,
  ): MapperOutput {
    const recordEdge = this.recordTrigger.update(keys.record);
    const gripEdge = this.gripTrigger.update(keys.grip);
    const resetEdge = this.resetTrigger.update(keys.reset);
    const anyInput =
      keys.up || keys.down || keys.left || keys.right ||
      keys.yawLeft || keys.yawRight || recordEdge || gripEdge || resetEdge;
    if (!hasController) {
      return {
        commands: [],
        hint: anyInput ? "another client holds the controls" : null,
      };
    }
    const commands: Command[] = [];
    const move = mapMove(keys, limits, dtSeconds);
    if (move !== null) {
      const cmd: MoveCommand = { type: "move", client_seq: this.nextSeq(), ...move };
      commands.push(cmd);
    }
    if (gripEdge) {
      this.gripClosed = !this.gripClosed;
      commands.push({
        type: "grip",
        client_seq: this.nextSeq(),
        aperture: this.gripClosed ? this.gripClosedAperture : this.gripOpenAperture,
      });
    }
    if (recordEdge) {
      this.recordingRequested = !this.recordingRequested;
      commands.push({
        type: "record",
        client_seq: this.nextSeq(),
        action: this.recordingRequested ? "start" : "stop",
      });
    }
    if (resetEdge) {
      commands.push({ type: "reset", client_seq: this.nextSeq(), seed: resetSeed() });
    }
    return { commands, hint: null };
  }
}

/** Default key bindings (KeyboardEvent.code → HeldKeys field). */
export const KEY_BINDINGS: Record<string, keyof HeldKeys> = {
  ArrowUp: "up",
  ArrowDown: "down",
  ArrowLeft: "left",
  ArrowRight: "right",
  KeyW: "up",
  KeyS: "down",
  KeyA: "left",
  KeyD: "right",
  KeyQ: "yawLeft",
  KeyE: "yawRight",
  KeyG: "grip",
  KeyR: "record",
  KeyN: "reset",
};
