/**
 * Session state reducer.
 *
 * One value of `UiSessionState` is shared between the socket reader and the
 * render loop.  The reducer applies decoded server messages and drops any
 * message whose `seq` is not greater than the last one seen, so the view
 * never renders stale or reordered frames.
 */

import {
  ServerMessage,
  StatePayload,
  parseStatePayload,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ImageFrame {
  shape: number[];
  pixels: Uint8Array;
}

export interface UiSessionState {
  connection: ConnectionStatus;
  /** Whether this client holds the controller token (first joiner). */
  controller: boolean;
  protocolVersion: number | null;
  lastSeq: number;
  state: StatePayload | null;
  tactile: ImageFrame | null;
  visual: ImageFrame | null;
  alert: boolean;
  recording: boolean;
  /** Number of episodes the server has persisted this session. */
  episodes: number;
  lastError: string | null;
  preset: string | null;
}

export function initialSessionState(): UiSessionState {
  return {
    connection: "connecting",
    controller: false,
    protocolVersion: null,
    lastSeq: -1,
    state: null,
    tactile: null,
    visual: null,
    alert: false,
    recording: false,
    episodes: 0,
    lastError: null,
    preset: null,
  };
}

/**
 * Apply one decoded server message.  Returns the next state; messages with a
 * stale `seq` are ignored and the input state is returned unchanged.
 */
export function applyMessage(s: UiSessionState, msg: ServerMessage): UiSessionState {
  if (msg.seq <= s.lastSeq) {
    return s;
  }
  const next: UiSessionState = { ...s, lastSeq: msg.seq };
  switch (msg.type) {
    case "ack": {
      const p = msg.payload ?? {};
      next.connection = "connected";
      next.controller = p["controller"] === true;
      next.protocolVersion = typeof p["protocol"] === "number" ? p["protocol"] : null;
      next.preset = typeof p["preset"] === "string" ? p["preset"] : null;
      break;
    }
    case "state": {
      const payload = parseStatePayload(msg.payload ?? {});
      next.state = payload;
      next.alert = payload.alert;
      next.recording = payload.recording;
      break;
    }
    case "tactile":
    case "visual": {
      if (msg.binary && msg.pixels) {
        const frame = { shape: msg.binary.shape, pixels: msg.pixels };
        if (msg.type === "tactile") next.tactile = frame;
        else next.visual = frame;
      }
      break;
    }
    case "alert":
      next.alert = true;
      break;
    case "recording": {
      const p = msg.payload ?? {};
      next.recording = p["on"] === true;
      if (typeof p["episodes"] === "number") next.episodes = p["episodes"];
      break;
    }
    case "error": {
      const p = msg.payload ?? {};
      next.lastError = typeof p["detail"] === "string" ? p["detail"] : "unknown error";
      break;
    }
  }
  return next;
}

export function markDisconnected(s: UiSessionState): UiSessionState {
  return { ...s, connection: "disconnected", controller: false };
}
