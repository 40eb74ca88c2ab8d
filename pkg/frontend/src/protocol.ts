/**
 * Wire schema shared with the session service.
 *
 * Transport: one WebSocket connection.  Every message is a JSON text frame;
 * image-bearing messages (`tactile`, `visual`) are a JSON header announcing
 * dtype/shape followed by one binary frame carrying the raw row-major u8
 * pixels.  `seq` is strictly increasing per connection; commands carry a
 * `client_seq` the server echoes back in errors.
 */

export const PROTOCOL_VERSION = 1;

export type StreamType =
  | "state"
  | "tactile"
  | "visual"
  | "alert"
  | "recording"
  | "ack"
  | "error";

export interface ContactInfo {
  px: number;
  py: number;
  orientation: number;
}

export interface StatePayload {
  tick: number;
  status: string;
  pose: [number, number, number];
  aperture: number;
  grasping: boolean;
  rope: Array<[number, number]>;
  pin: [number, number];
  contact: ContactInfo | null;
  completion: number;
  manipulability: number;
  alert: boolean;
  recording: boolean;
  velocity_limit: number;
  yaw_rate_limit: number;
}

export interface BinaryDescriptor {
  dtype: "u8";
  shape: number[];
}

/** A decoded server message; image messages carry their pixels inline. */
export interface ServerMessage {
  type: StreamType;
  seq: number;
  time?: number;
  payload?: Record<string, unknown>;
  binary?: BinaryDescriptor;
  pixels?: Uint8Array;
}

export interface MoveCommand {
  type: "move";
  client_seq: number;
  dx: number;
  dy: number;
  dtheta: number;
}

export interface GripCommand {
  type: "grip";
  client_seq: number;
  aperture: number;
}

export interface RecordCommand {
  type: "record";
  client_seq: number;
  action: "start" | "stop";
}

export interface ResetCommand {
  type: "reset";
  client_seq: number;
  seed: number;
  preset?: string;
}

export type Command = MoveCommand | GripCommand | RecordCommand | ResetCommand;

export class ProtocolError extends Error {}

function asNumber(v: unknown, what: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ProtocolError(`${what} must be a finite number`);
  }
  return v;
}

/** Parse one JSON text frame into a typed server message (no pixels yet). */
export function parseServerFrame(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("server frame is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("server frame must be a JSON object");
  }
  const msg = raw as Record<string, unknown>;
  const type = msg["type"];
  if (
    type !== "state" && type !== "tactile" && type !== "visual" &&
    type !== "alert" && type !== "recording" && type !== "ack" && type !== "error"
  ) {
    throw new ProtocolError(`unknown server message type ${String(type)}`);
  }
  const out: ServerMessage = {
    type,
    seq: asNumber(msg["seq"], "seq"),
  };
  if (msg["time"] !== undefined) out.time = asNumber(msg["time"], "time");
  if (msg["payload"] !== undefined) {
    if (typeof msg["payload"] !== "object" || msg["payload"] === null) {
      throw new ProtocolError("payload must be an object");
    }
    out.payload = msg["payload"] as Record<string, unknown>;
  }
  if (msg["binary"] !== undefined) {
    const b = msg["binary"] as Record<string, unknown>;
    if (b?.["dtype"] !== "u8" || !Array.isArray(b["shape"])) {
      throw new ProtocolError("binary descriptor must have dtype 'u8' and a shape array");
    }
    out.binary = { dtype: "u8", shape: (b["shape"] as unknown[]).map((s) => asNumber(s, "shape")) };
  }
  return out;
}

/** Attach a binary frame to a pending image header, validating its length. */
export function attachPixels(header: ServerMessage, blob: Uint8Array): ServerMessage {
  if (!header.binary) {
    throw new ProtocolError(`message type ${header.type} does not expect binary data`);
  }
  const expected = header.binary.shape.reduce((a, b) => a * b, 1);
  if (blob.length !== expected) {
    throw new ProtocolError(`binary payload length ${blob.length} != ${expected}`);
  }
  return { ...header, pixels: blob };
}

export function parseStatePayload(payload: Record<string, unknown>): StatePayload {
  const pose = payload["pose"];
  const rope = payload["rope"];
  if (!Array.isArray(pose) || pose.length !== 3 || !Array.isArray(rope)) {
    throw new ProtocolError("state payload missing pose/rope");
  }
  return payload as unknown as StatePayload;
}

export function serializeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}
