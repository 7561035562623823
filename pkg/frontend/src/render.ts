/** Canvas renderer for the top-down console view.
 *
 * `draw` is a pure function of the view state: it reads, never writes, so a
 * replayed telemetry log produces pixel-identical frames.  It draws through
 * a minimal 2D-context interface, which lets tests substitute a recording
 * context and assert on exact drawing arguments — in particular that the
 * field-of-view wedges use the handshake angles verbatim.
 */

import { ViewState } from "./view.js";

/** Subset of CanvasRenderingContext2D the renderer needs. */
export interface Canvas2DLike {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  textAlign: string;
  textBaseline: string;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  scale(x: number, y: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(
    x: number,
    y: number,
    radius: number,
    startAngle: number,
    endAngle: number,
  ): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export const BACKGROUND_FILL = "#10141a";
export const GRID_STROKE = "#1f2733";
export const NOMINAL_WEDGE_FILL = "rgba(110, 150, 200, 0.14)";
export const REDUCED_WEDGE_FILL = "rgba(90, 220, 150, 0.20)";
export const POSITION_TRAIL_STROKE = "#9aa7b8";
export const DESIRED_TRAIL_STROKE = "#e0b54a";
export const APPLIED_TRAIL_STROKE = "#4ad0e0";
export const VEHICLE_FILL = "#f2f5f9";
export const POI_FILL = "#ff8c5a";
export const POI_PENDING_FILL = "#b07a5a";
export const DESIRED_MARK_STROKE = "#e0b54a";
export const APPLIED_MARK_FILL = "#4ad0e0";
export const VIOLATION_FLASH_FILL = "rgba(255, 60, 60, 0.28)";
export const MISMATCH_BANNER_FILL = "#8c2a2a";
export const HUD_TEXT_FILL = "#d7dee8";
export const GOVERNED_BADGE_FILL = "#e0b54a";

/** Wedge depth drawn on screen, in metres. */
export const WEDGE_RADIUS_M = 3.0;
const VEHICLE_SIZE_M = 0.22;
const MARK_RADIUS_M = 0.08;
const POI_SIZE_M = 0.12;

function drawPolyline(
  ctx: Canvas2DLike,
  points: [number, number][],
  stroke: string,
  widthPx: number,
  zoom: number,
): void {
  if (points.length < 2) return;
  ctx.strokeStyle = stroke;
  ctx.lineWidth = widthPx / zoom;
  ctx.beginPath();
  const first = points[0]!;
  ctx.moveTo(first[0], first[1]);
  for (let i = 1; i < points.length; i++) {
    const p = points[i]!;
    ctx.lineTo(p[0], p[1]);
  }
  ctx.stroke();
}

/** Camera wedge: apex at the vehicle, spanning heading ± halfAngle.  The
 * angles passed to `arc` are exactly `heading - halfAngle` and
 * `heading + halfAngle` — tests rely on reading them back unchanged. */
function drawWedge(
  ctx: Canvas2DLike,
  x: number,
  y: number,
  heading: number,
  halfAngle: number,
  radius: number,
  fill: string,
): void {
  ctx.fillStyle = fill;
  ctx.beginPath();
  ctx.moveTo(x, y);
  ctx.arc(x, y, radius, heading - halfAngle, heading + halfAngle);
  ctx.closePath();
  ctx.fill();
}

function drawGrid(
  ctx: Canvas2DLike,
  state: ViewState,
  width: number,
  height: number,
): void {
  const halfW = width / 2 / state.zoom;
  const halfH = height / 2 / state.zoom;
  const x0 = Math.floor(state.pan.x - halfW);
  const x1 = Math.ceil(state.pan.x + halfW);
  const y0 = Math.floor(state.pan.y - halfH);
  const y1 = Math.ceil(state.pan.y + halfH);
  ctx.strokeStyle = GRID_STROKE;
  ctx.lineWidth = 1 / state.zoom;
  ctx.beginPath();
  for (let gx = x0; gx <= x1; gx++) {
    ctx.moveTo(gx, y0);
    ctx.lineTo(gx, y1);
  }
  for (let gy = y0; gy <= y1; gy++) {
    ctx.moveTo(x0, gy);
    ctx.lineTo(x1, gy);
  }
  ctx.stroke();
}

function drawVehicle(
  ctx: Canvas2DLike,
  x: number,
  y: number,
  yaw: number,
): void {
  const s = VEHICLE_SIZE_M;
  const cos = Math.cos(yaw);
  const sin = Math.sin(yaw);
  // triangle nose along the heading
  const nose: [number, number] = [x + 1.6 * s * cos, y + 1.6 * s * sin];
  const left: [number, number] = [x - s * cos - 0.8 * s * sin, y - s * sin + 0.8 * s * cos];
  const right: [number, number] = [x - s * cos + 0.8 * s * sin, y - s * sin - 0.8 * s * cos];
  ctx.fillStyle = VEHICLE_FILL;
  ctx.beginPath();
  ctx.moveTo(nose[0], nose[1]);
  ctx.lineTo(left[0], left[1]);
  ctx.lineTo(right[0], right[1]);
  ctx.closePath();
  ctx.fill();
  // yaw arrow
  ctx.strokeStyle = VEHICLE_FILL;
  ctx.lineWidth = 2 / 80;
  ctx.beginPath();
  ctx.moveTo(x, y);
  ctx.lineTo(x + 3.0 * s * cos, y + 3.0 * s * sin);
  ctx.stroke();
}

function drawDiamond(
  ctx: Canvas2DLike,
  x: number,
  y: number,
  size: number,
  fill: string,
): void {
  ctx.fillStyle = fill;
  ctx.beginPath();
  ctx.moveTo(x, y + size);
  ctx.lineTo(x + size, y);
  ctx.lineTo(x, y - size);
  ctx.lineTo(x - size, y);
  ctx.closePath();
  ctx.fill();
}

/** Render one frame of the console.  Pure with respect to `state`. */
export function draw(
  ctx: Canvas2DLike,
  state: ViewState,
  width: number,
  height: number,
  nowMs: number,
): void {
  ctx.fillStyle = BACKGROUND_FILL;
  ctx.fillRect(0, 0, width, height);

  const hs = state.handshake;
  const frame = state.frame;

  if (hs !== null && frame !== null) {
    ctx.save();
    // world transform: metres -> pixels, y up, centred on the pan point
    ctx.translate(width / 2, height / 2);
    ctx.scale(state.zoom, -state.zoom);
    ctx.translate(-state.pan.x, -state.pan.y);

    drawGrid(ctx, state, width, height);

    const px = frame.x[0] ?? 0;
    const py = frame.x[1] ?? 0;
    const yaw = frame.x[3] ?? 0;

    // camera cones: nominal behind, tightened in front
    drawWedge(
      ctx,
      px,
      py,
      yaw,
      hs.camera.alpha_h,
      WEDGE_RADIUS_M,
      NOMINAL_WEDGE_FILL,
    );
    drawWedge(
      ctx,
      px,
      py,
      yaw,
      hs.fov_reduced.alpha_h,
      WEDGE_RADIUS_M,
      REDUCED_WEDGE_FILL,
    );

    drawPolyline(ctx, state.positionTrail.toArray(), POSITION_TRAIL_STROKE, 1, state.zoom);
    drawPolyline(ctx, state.desiredTrail.toArray(), DESIRED_TRAIL_STROKE, 1, state.zoom);
    drawPolyline(ctx, state.appliedTrail.toArray(), APPLIED_TRAIL_STROKE, 1, state.zoom);

    // point of interest
    drawDiamond(
      ctx,
      frame.poi[0] ?? 0,
      frame.poi[1] ?? 0,
      POI_SIZE_M,
      frame.poi_pending ? POI_PENDING_FILL : POI_FILL,
    );

    // desired reference: hollow ring
    ctx.strokeStyle = DESIRED_MARK_STROKE;
    ctx.lineWidth = 1.5 / state.zoom;
    ctx.beginPath();
    ctx.arc(frame.r[0] ?? 0, frame.r[1] ?? 0, MARK_RADIUS_M, 0, Math.PI * 2);
    ctx.stroke();

    // applied (governed) reference: solid dot
    ctx.fillStyle = APPLIED_MARK_FILL;
    ctx.beginPath();
    ctx.arc(frame.v[0] ?? 0, frame.v[1] ?? 0, MARK_RADIUS_M * 0.8, 0, Math.PI * 2);
    ctx.fill();

    drawVehicle(ctx, px, py, yaw);

    ctx.restore();
  }

  // --- HUD (screen space) ----------------------------------------------
  ctx.font = "13px system-ui, sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "top";
  ctx.fillStyle = HUD_TEXT_FILL;
  ctx.fillText(`link: ${state.status}`, 12, 10);

  if (hs !== null) {
    const degH = ((hs.fov_reduced.alpha_h * 180) / Math.PI).toFixed(1);
    const degV = ((hs.fov_reduced.alpha_v * 180) / Math.PI).toFixed(1);
    ctx.fillText(
      `fov (tightened) ±${degH}° h, ±${degV}° v   period ${(hs.ts * 1000).toFixed(0)} ms   rg ${hs.rg_enabled ? "on" : "off"}`,
      12,
      28,
    );
  }
  if (frame !== null) {
    ctx.fillText(
      `t ${frame.t.toFixed(2)} s   tick ${frame.tick}   λ ${frame.lambda.toFixed(3)}   misses ${frame.deadline_misses}`,
      12,
      46,
    );
    if (frame.paused) {
      ctx.fillText("paused", 12, 64);
    }
    if (state.governed) {
      ctx.fillStyle = GOVERNED_BADGE_FILL;
      ctx.fillText("governor intervening", 12, 82);
    }
  }

  if (state.flashActive(nowMs)) {
    ctx.fillStyle = VIOLATION_FLASH_FILL;
    ctx.fillRect(0, 0, width, height);
  }

  if (state.status === "mismatch") {
    ctx.fillStyle = MISMATCH_BANNER_FILL;
    ctx.fillRect(0, 0, width, 30);
    ctx.fillStyle = HUD_TEXT_FILL;
    ctx.fillText(
      "protocol version mismatch — update the console to match the server",
      12,
      8,
    );
  } else if (state.status === "reconnecting") {
    ctx.fillStyle = GOVERNED_BADGE_FILL;
    ctx.fillText("reconnecting…", width - 110, 10);
  }
}
