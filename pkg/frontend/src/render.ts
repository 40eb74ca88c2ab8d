/**
 * Console rendering: a top-down world canvas (rope polyline, gripper,
 * pinned end), the tactile image panel, and a status strip (manipulability
 * bar with alert pulse, completion, recording indicator).
 *
 * Drawing runs at display refresh and always paints the latest state the
 * reducer holds (hold-last); nothing is interpolated between frames.
 */

import { StatePayload } from "./protocol.js";
import { ImageFrame, UiSessionState } from "./session.js";

export interface Viewport {
  /** World-frame rectangle (xmin, ymin, xmax, ymax) mapped onto the canvas. */
  world: [number, number, number, number];
  widthPx: number;
  heightPx: number;
}

/** Map a world point to canvas pixels (y axis flipped: world up = canvas up). */
export function worldToCanvas(x: number, y: number, vp: Viewport): [number, number] {
  const [x0, y0, x1, y1] = vp.world;
  const u = ((x - x0) / (x1 - x0)) * vp.widthPx;
  const v = (1 - (y - y0) / (y1 - y0)) * vp.heightPx;
  return [u, v];
}

/** Bar fill fraction in [0, 1]; full scale is 1.5x the alert threshold zone. */
export function manipulabilityFraction(w: number, wMax: number): number {
  if (wMax <= 0) return 0;
  return Math.min(1, Math.max(0, w / wMax));
}

export function statusLine(s: UiSessionState): string {
  if (s.connection !== "connected") return "reconnecting…";
  if (s.state === null) return "waiting for first frame";
  const rec = s.recording ? "● REC" : "";
  const pct = (100 * s.state.completion).toFixed(0);
  return `${s.state.status}  completion ${pct}%  episodes ${s.episodes} ${rec}`.trim();
}

/** Expand a grayscale u8 frame to RGBA for putImageData. */
export function frameToRgba(frame: ImageFrame): Uint8ClampedArray<ArrayBuffer> {
  const n = frame.pixels.length;
  const rgba = new Uint8ClampedArray(new ArrayBuffer(n * 4));
  for (let i = 0; i < n; i++) {
    const v = frame.pixels[i];
    rgba[i * 4] = v;
    rgba[i * 4 + 1] = v;
    rgba[i * 4 + 2] = v;
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}

export function drawWorld(
  ctx: CanvasRenderingContext2D,
  state: StatePayload,
  vp: Viewport,
): void {
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, vp.widthPx, vp.heightPx);

  // rope polyline
  if (state.rope.length > 1) {
    ctx.strokeStyle = "#d8b365";
    ctx.lineWidth = 3;
    ctx.beginPath();
    const [u0, v0] = worldToCanvas(state.rope[0][0], state.rope[0][1], vp);
    ctx.moveTo(u0, v0);
    for (const [x, y] of state.rope.slice(1)) {
      const [u, v] = worldToCanvas(x, y, vp);
      ctx.lineTo(u, v);
    }
    ctx.stroke();
  }

  // pinned end
  const [pu, pv] = worldToCanvas(state.pin[0], state.pin[1], vp);
  ctx.fillStyle = "#e05555";
  ctx.beginPath();
  ctx.arc(pu, pv, 6, 0, 2 * Math.PI);
  ctx.fill();

  // gripper: a short heading bar at the pose
  const [gx, gy, theta] = state.pose;
  const [gu, gv] = worldToCanvas(gx, gy, vp);
  const len = 14;
  ctx.strokeStyle = state.grasping ? "#6fcf6f" : "#9aa5b1";
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(gu - len * Math.cos(theta), gv + len * Math.sin(theta));
  ctx.lineTo(gu + len * Math.cos(theta), gv - len * Math.sin(theta));
  ctx.stroke();
  ctx.fillStyle = state.grasping ? "#6fcf6f" : "#9aa5b1";
  ctx.beginPath();
  ctx.arc(gu, gv, 5, 0, 2 * Math.PI);
  ctx.fill();
}

export function drawImagePanel(
  ctx: CanvasRenderingContext2D,
  frame: ImageFrame | null,
): void {
  const canvas = ctx.canvas;
  if (frame === null || frame.shape.length < 2) {
    ctx.fillStyle = "#000";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    return;
  }
  const [h, w] = frame.shape;
  const img = new ImageData(frameToRgba(frame), w, h);
  // draw at native resolution into an offscreen, then scale up crisply
  const off = new OffscreenCanvas(w, h);
  const octx = off.getContext("2d")!;
  octx.putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

export function drawStatusBar(
  bar: HTMLElement,
  pulse: HTMLElement,
  s: UiSessionState,
): void {
  const w = s.state?.manipulability ?? 0;
  // the state payload reports the raw manipulability; the bar is normalized
  // against the largest value seen this session so it stays on-scale
  const seen = Number(bar.dataset.wmax ?? "0");
  const wMax = Math.max(seen, w);
  bar.dataset.wmax = String(wMax);
  bar.style.width = `${100 * manipulabilityFraction(w, wMax)}%`;
  bar.classList.toggle("alert", s.alert);
  pulse.classList.toggle("alert", s.alert);
}
