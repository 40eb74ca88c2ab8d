/**
 * WebSocket client for the session service.
 *
 * Pairs each image header text frame with the binary frame that follows it,
 * feeds decoded messages into the session reducer, and exposes a send path
 * for commands.  Reconnects with a fixed backoff after a drop.
 */

import {
  Command,
  ServerMessage,
  attachPixels,
  parseServerFrame,
  serializeCommand,
} from "./protocol.js";

export interface ClientCallbacks {
  onMessage(msg: ServerMessage): void;
  onOpen(): void;
  onClose(): void;
}

export class TeleopClient {
  private ws: WebSocket | null = null;
  private pendingHeader: ServerMessage | null = null;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly callbacks: ClientCallbacks,
    private readonly reconnectMs: number = 1000,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    const ws = new WebSocket(this.url);
    ws.binaryType = "arraybuffer";
    this.ws = ws;
    this.pendingHeader = null;
    ws.onopen = () => this.callbacks.onOpen();
    ws.onmessage = (ev) => this.handleFrame(ev.data);
    ws.onclose = () => {
      this.callbacks.onClose();
      this.ws = null;
      if (!this.closed) {
        setTimeout(() => this.open(), this.reconnectMs);
      }
    };
    ws.onerror = () => ws.close();
  }

  /** Decode one transport frame; exposed for tests. */
  handleFrame(data: string | ArrayBuffer): void {
    if (typeof data === "string") {
      const msg = parseServerFrame(data);
      if (msg.binary) {
        this.pendingHeader = msg; // pixels arrive in the next binary frame
      } else {
        this.callbacks.onMessage(msg);
      }
      return;
    }
    const blob = new Uint8Array(data);
    if (this.pendingHeader === null) {
      return; // stray binary frame (e.g. mid-stream join); drop it
    }
    const header = this.pendingHeader;
    this.pendingHeader = null;
    this.callbacks.onMessage(attachPixels(header, blob));
  }

  send(cmd: Command): void {
    if (this.ws !== null && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(serializeCommand(cmd));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
