/** Synthetic protocol documents for unit tests, shaped exactly like the
 * service's wire format. */

import { Handshake, TelemetryFrame } from "../src/protocol.js";

export function makeHandshake(over: Partial<Handshake> = {}): Handshake {
  return {
    type: "handshake",
    protocol: 1,
    dims: { n: 8, m: 4, p: 1819 },
    ts: 0.01,
    rg_enabled: true,
    camera: { alpha_h: 0.8726646259971648, alpha_v: 0.6108652381980153, eps_z: 0.1 },
    fov_reduced: { alpha_h: 0.7274952897661442, alpha_v: 0.48332194670612023 },
    position_box: 4.0,
    yaw_domain: 1.5707963267948966,
    k_star: 624,
    moas_rows: 5754,
    ...over,
  };
}

export function makeFrame(over: Partial<TelemetryFrame> = {}): TelemetryFrame {
  return {
    type: "telemetry",
    tick: 0,
    t: 0.0,
    x: [-2, 0, 0, 0, 0, 0, 0, 0],
    v: [-2, 0, 0, 0],
    r: [-2, 0, 0, 0],
    lambda: 1.0,
    margin: -0.5,
    g1: -0.3,
    g2: -0.2,
    z_c: 2.0,
    poi: [0, 0, 0],
    poi_pending: false,
    fov: { alpha_h: 0.7274952897661442, alpha_v: 0.48332194670612023 },
    governed: false,
    violation: false,
    paused: false,
    deadline_misses: 0,
    ...over,
  };
}

/** Recursively freeze an object so any mutation throws in strict mode. */
export function deepFreeze<T>(obj: T): T {
  if (obj !== null && typeof obj === "object") {
    for (const value of Object.values(obj as Record<string, unknown>)) {
      deepFreeze(value);
    }
    Object.freeze(obj);
  }
  return obj;
}
