/** View model for the console: everything the renderer needs, nothing the
 * protocol layer owns.  Pure state — no canvas, no sockets — so it can be
 * unit tested and replayed from a recorded log.
 */

import { Handshake, TelemetryFrame } from "./protocol.js";
import { Ring } from "./ring.js";
import { SessionStatus } from "./session.js";

export const FLASH_MS = 400;
export const DEFAULT_TRAIL_POINTS = 600;

export type Point = [number, number];

export class ViewState {
  status: SessionStatus = "idle";
  handshake: Handshake | null = null;
  frame: TelemetryFrame | null = null;

  /** Top-down trails in world metres (x, y). */
  readonly desiredTrail: Ring<Point>;
  readonly appliedTrail: Ring<Point>;
  readonly positionTrail: Ring<Point>;

  /** World coordinates at the canvas centre. */
  pan = { x: 0, y: 0 };
  /** Pixels per metre. */
  zoom = 80;

  /** Wall-clock time (ms) until which the violation flash stays lit. */
  flashUntil = 0;
  /** Total frames that reported a constraint violation. */
  violationFrames = 0;

  private lastTick: number | null = null;

  constructor(trailPoints: number = DEFAULT_TRAIL_POINTS) {
    this.desiredTrail = new Ring<Point>(trailPoints);
    this.appliedTrail = new Ring<Point>(trailPoints);
    this.positionTrail = new Ring<Point>(trailPoints);
  }

  setHandshake(hs: Handshake): void {
    this.handshake = hs;
  }

  setStatus(status: SessionStatus): void {
    this.status = status;
  }

  /** Fold one telemetry frame into the view.  Never mutates the frame. */
  applyFrame(frame: TelemetryFrame, nowMs: number): void {
    this.frame = frame;
    if (this.lastTick === null || frame.tick !== this.lastTick) {
      this.lastTick = frame.tick;
      this.desiredTrail.push([frame.r[0] ?? 0, frame.r[1] ?? 0]);
      this.appliedTrail.push([frame.v[0] ?? 0, frame.v[1] ?? 0]);
      this.positionTrail.push([frame.x[0] ?? 0, frame.x[1] ?? 0]);
    }
    if (frame.violation) {
      this.violationFrames += 1;
      this.flashUntil = nowMs + FLASH_MS;
    }
  }

  get governed(): boolean {
    return this.frame?.governed ?? false;
  }

  flashActive(nowMs: number): boolean {
    return nowMs < this.flashUntil;
  }

  reset(): void {
    this.frame = null;
    this.lastTick = null;
    this.desiredTrail.clear();
    this.appliedTrail.clear();
    this.positionTrail.clear();
    this.flashUntil = 0;
    this.violationFrames = 0;
  }

  // --- coordinate transforms -------------------------------------------

  screenFromWorld(
    wx: number,
    wy: number,
    width: number,
    height: number,
  ): Point {
    return [
      (wx - this.pan.x) * this.zoom + width / 2,
      -(wy - this.pan.y) * this.zoom + height / 2,
    ];
  }

  worldFromScreen(
    sx: number,
    sy: number,
    width: number,
    height: number,
  ): Point {
    return [
      (sx - width / 2) / this.zoom + this.pan.x,
      -(sy - height / 2) / this.zoom + this.pan.y,
    ];
  }

  /** Pan so the world appears to move with a drag of (dxPx, dyPx). */
  panBy(dxPx: number, dyPx: number): void {
    this.pan.x -= dxPx / this.zoom;
    this.pan.y += dyPx / this.zoom;
  }

  /** Zoom by `factor` keeping the world point under (sx, sy) fixed. */
  zoomAt(
    factor: number,
    sx: number,
    sy: number,
    width: number,
    height: number,
  ): void {
    const [wx, wy] = this.worldFromScreen(sx, sy, width, height);
    this.zoom = Math.min(2000, Math.max(5, this.zoom * factor));
    this.pan.x = wx - (sx - width / 2) / this.zoom;
    this.pan.y = wy + (sy - height / 2) / this.zoom;
  }
}
