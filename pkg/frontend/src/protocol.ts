/** Wire protocol for the visibility-governor teleoperation service.
 *
 * The server speaks newline-delimited JSON over a WebSocket: one handshake
 * document on connect, then one telemetry document per control tick.  Client
 * commands are single JSON documents.  Everything here is pure data and
 * validation — no I/O.
 */

export const SUPPORTED_PROTOCOL = 1;

export interface CameraInfo {
  alpha_h: number;
  alpha_v: number;
  eps_z: number;
}

export interface FovAngles {
  alpha_h: number;
  alpha_v: number;
}

export interface Handshake {
  type: "handshake";
  protocol: number;
  dims: { n: number; m: number; p: number };
  ts: number;
  rg_enabled: boolean;
  camera: CameraInfo;
  fov_reduced: FovAngles;
  position_box: number;
  yaw_domain: number;
  k_star: number;
  moas_rows: number;
}

export interface TelemetryFrame {
  type: "telemetry";
  tick: number;
  t: number;
  /** Vehicle state: position (3), yaw, velocity (3), yaw rate. */
  x: number[];
  /** Applied (governed) reference: position (3), yaw. */
  v: number[];
  /** Desired reference from the pilot: position (3), yaw. */
  r: number[];
  lambda: number;
  margin: number;
  g1: number;
  g2: number;
  z_c: number;
  poi: number[];
  poi_pending: boolean;
  fov: FovAngles;
  governed: boolean;
  violation: boolean;
  paused: boolean;
  deadline_misses: number;
}

export interface ErrorFrame {
  type: "error";
  detail: string;
}

export type ServerMessage = Handshake | TelemetryFrame | ErrorFrame;

export type ParseResult =
  | { ok: true; msg: ServerMessage }
  | { ok: false; error: string };

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isNumberArray(v: unknown, length: number): v is number[] {
  return (
    Array.isArray(v) && v.length === length && v.every((e) => isFiniteNumber(e))
  );
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function validateHandshake(doc: Record<string, unknown>): ParseResult {
  if (!isFiniteNumber(doc.protocol)) {
    return { ok: false, error: "handshake missing protocol" };
  }
  const dims = doc.dims;
  if (
    !isRecord(dims) ||
    !isFiniteNumber(dims.n) ||
    !isFiniteNumber(dims.m) ||
    !isFiniteNumber(dims.p)
  ) {
    return { ok: false, error: "handshake missing dims" };
  }
  if (!isFiniteNumber(doc.ts) || doc.ts <= 0) {
    return { ok: false, error: "handshake missing ts" };
  }
  if (typeof doc.rg_enabled !== "boolean") {
    return { ok: false, error: "handshake missing rg_enabled" };
  }
  const camera = doc.camera;
  if (
    !isRecord(camera) ||
    !isFiniteNumber(camera.alpha_h) ||
    !isFiniteNumber(camera.alpha_v) ||
    !isFiniteNumber(camera.eps_z)
  ) {
    return { ok: false, error: "handshake missing camera" };
  }
  const fov = doc.fov_reduced;
  if (
    !isRecord(fov) ||
    !isFiniteNumber(fov.alpha_h) ||
    !isFiniteNumber(fov.alpha_v)
  ) {
    return { ok: false, error: "handshake missing fov_reduced" };
  }
  if (!isFiniteNumber(doc.position_box) || !isFiniteNumber(doc.yaw_domain)) {
    return { ok: false, error: "handshake missing domain bounds" };
  }
  if (!isFiniteNumber(doc.k_star) || !isFiniteNumber(doc.moas_rows)) {
    return { ok: false, error: "handshake missing set metadata" };
  }
  return { ok: true, msg: doc as unknown as Handshake };
}

function validateTelemetry(doc: Record<string, unknown>): ParseResult {
  if (!isFiniteNumber(doc.tick) || !isFiniteNumber(doc.t)) {
    return { ok: false, error: "telemetry missing tick/t" };
  }
  if (!isNumberArray(doc.x, 8)) {
    return { ok: false, error: "telemetry x must be 8 numbers" };
  }
  if (!isNumberArray(doc.v, 4) || !isNumberArray(doc.r, 4)) {
    return { ok: false, error: "telemetry v and r must be 4 numbers" };
  }
  for (const key of ["lambda", "margin", "g1", "g2", "z_c"]) {
    if (!isFiniteNumber(doc[key])) {
      return { ok: false, error: `telemetry missing ${key}` };
    }
  }
  if (!isNumberArray(doc.poi, 3)) {
    return { ok: false, error: "telemetry poi must be 3 numbers" };
  }
  const fov = doc.fov;
  if (
    !isRecord(fov) ||
    !isFiniteNumber(fov.alpha_h) ||
    !isFiniteNumber(fov.alpha_v)
  ) {
    return { ok: false, error: "telemetry missing fov" };
  }
  for (const key of ["poi_pending", "governed", "violation", "paused"]) {
    if (typeof doc[key] !== "boolean") {
      return { ok: false, error: `telemetry missing ${key}` };
    }
  }
  if (!isFiniteNumber(doc.deadline_misses)) {
    return { ok: false, error: "telemetry missing deadline_misses" };
  }
  return { ok: true, msg: doc as unknown as TelemetryFrame };
}

/** Parse and validate one server document (a single line of the stream). */
export function parseServerMessage(text: string): ParseResult {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return { ok: false, error: "not valid JSON" };
  }
  if (!isRecord(doc)) {
    return { ok: false, error: "expected a JSON object" };
  }
  switch (doc.type) {
    case "handshake":
      return validateHandshake(doc);
    case "telemetry":
      return validateTelemetry(doc);
    case "error":
      return typeof doc.detail === "string"
        ? { ok: true, msg: doc as unknown as ErrorFrame }
        : { ok: false, error: "error frame missing detail" };
    default:
      return { ok: false, error: `unknown message type ${String(doc.type)}` };
  }
}

export interface SetReferenceOpts {
  position?: [number, number, number];
  yaw?: number;
  applyAtTick?: number;
}

/** Serialise a pilot reference command.  At least one field must be given. */
export function buildSetReference(opts: SetReferenceOpts): string {
  const payload: Record<string, unknown> = {};
  if (opts.position !== undefined) payload.position = opts.position;
  if (opts.yaw !== undefined) payload.yaw = opts.yaw;
  if (Object.keys(payload).length === 0) {
    throw new Error("set_reference needs a position and/or a yaw");
  }
  const cmd: Record<string, unknown> = { kind: "set_reference", payload };
  if (opts.applyAtTick !== undefined) cmd.apply_at_tick = opts.applyAtTick;
  return JSON.stringify(cmd);
}

export function buildSetPoi(
  position: [number, number, number],
  applyAtTick?: number,
): string {
  const cmd: Record<string, unknown> = {
    kind: "set_poi",
    payload: { position },
  };
  if (applyAtTick !== undefined) cmd.apply_at_tick = applyAtTick;
  return JSON.stringify(cmd);
}

/** Pause command: explicit value sets the state, no value toggles it. */
export function buildPause(paused?: boolean): string {
  const payload: Record<string, unknown> = {};
  if (paused !== undefined) payload.paused = paused;
  return JSON.stringify({ kind: "pause", payload });
}

export function buildReset(): string {
  return JSON.stringify({ kind: "reset", payload: {} });
}
