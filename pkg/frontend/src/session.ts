/** WebSocket session management for the teleoperation console.
 *
 * Owns the connection lifecycle: handshake validation, protocol version
 * check, automatic reconnect with exponential backoff, and rate limiting of
 * outgoing reference commands to at most one per control period.  The
 * WebSocket constructor and timers are injected so the whole state machine
 * is testable without a network or a real clock.
 */

import {
  Handshake,
  ServerMessage,
  SetReferenceOpts,
  SUPPORTED_PROTOCOL,
  buildPause,
  buildReset,
  buildSetPoi,
  buildSetReference,
  parseServerMessage,
  TelemetryFrame,
  ErrorFrame,
} from "./protocol.js";

/** Structural subset of the browser WebSocket that `ws` also implements. */
export interface WsLike {
  send(data: string): void;
  close(code?: number, reason?: string): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export type SessionStatus =
  | "idle"
  | "connecting"
  | "live"
  | "reconnecting"
  | "mismatch"
  | "closed";

export interface SessionOptions {
  url: string;
  wsFactory?: WsFactory;
  onFrame?: (frame: TelemetryFrame) => void;
  onHandshake?: (hs: Handshake) => void;
  onStatus?: (status: SessionStatus) => void;
  onServerError?: (err: ErrorFrame) => void;
  /** Reconnect automatically on unexpected close (default true). */
  reconnect?: boolean;
  backoffBaseMs?: number;
  backoffCapMs?: number;
  now?: () => number;
  setTimeout?: (fn: () => void, ms: number) => unknown;
  clearTimeout?: (handle: unknown) => void;
}

const defaultFactory: WsFactory = (url) => {
  const ctor = (globalThis as { WebSocket?: new (url: string) => WsLike })
    .WebSocket;
  if (!ctor) {
    throw new Error("no WebSocket implementation available; inject wsFactory");
  }
  return new ctor(url);
};

export class Session {
  status: SessionStatus = "idle";
  handshake: Handshake | null = null;
  lastError: string | null = null;
  /** Number of reference commands actually written to the socket. */
  referencesSent = 0;
  framesReceived = 0;

  private ws: WsLike | null = null;
  private closedByUser = false;
  private reconnectAttempts = 0;
  private reconnectTimer: unknown = null;

  private lastRefSentAt = -Infinity;
  private pendingRef: SetReferenceOpts | null = null;
  private refTimer: unknown = null;

  constructor(private readonly opts: SessionOptions) {}

  private get factory(): WsFactory {
    return this.opts.wsFactory ?? defaultFactory;
  }

  private nowMs(): number {
    return (this.opts.now ?? Date.now)();
  }

  private armTimer(fn: () => void, ms: number): unknown {
    const set = this.opts.setTimeout ?? ((f: () => void, m: number) => setTimeout(f, m));
    return set(fn, ms);
  }

  private disarmTimer(handle: unknown): void {
    const clear =
      this.opts.clearTimeout ?? ((h: unknown) => clearTimeout(h as never));
    clear(handle);
  }

  private setStatus(status: SessionStatus): void {
    if (this.status === status) return;
    this.status = status;
    this.opts.onStatus?.(status);
  }

  connect(): void {
    if (this.status === "live" || this.status === "connecting") return;
    this.closedByUser = false;
    this.openSocket();
  }

  private openSocket(): void {
    this.setStatus(this.reconnectAttempts > 0 ? "reconnecting" : "connecting");
    this.handshake = null;
    let ws: WsLike;
    try {
      ws = this.factory(this.opts.url);
    } catch (err) {
      this.lastError = String(err);
      this.scheduleReconnect();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      // stay in connecting state until the handshake validates
    };
    ws.onmessage = (ev) => this.handleMessage(String(ev.data));
    ws.onerror = () => {
      this.lastError = "socket error";
    };
    ws.onclose = () => {
      this.ws = null;
      if (this.closedByUser) {
        this.setStatus("closed");
      } else if (this.status !== "mismatch") {
        this.scheduleReconnect();
      }
    };
  }

  private handleMessage(text: string): void {
    // The stream is newline-delimited; a network read may carry several
    // documents in one event.
    for (const line of text.split("\n")) {
      if (line.trim().length === 0) continue;
      const parsed = parseServerMessage(line);
      if (!parsed.ok) {
        this.lastError = parsed.error;
        continue;
      }
      this.dispatch(parsed.msg);
    }
  }

  private dispatch(msg: ServerMessage): void {
    if (msg.type === "handshake") {
      if (msg.protocol !== SUPPORTED_PROTOCOL) {
        this.lastError = `protocol mismatch: server ${msg.protocol}, console ${SUPPORTED_PROTOCOL}`;
        this.setStatus("mismatch");
        this.closedByUser = false;
        this.ws?.close();
        return;
      }
      this.handshake = msg;
      this.reconnectAttempts = 0;
      this.setStatus("live");
      this.opts.onHandshake?.(msg);
      return;
    }
    if (this.handshake === null) {
      // telemetry before a valid handshake — ignore but record
      this.lastError = "telemetry before handshake";
      return;
    }
    if (msg.type === "telemetry") {
      this.framesReceived += 1;
      this.opts.onFrame?.(msg);
    } else {
      this.lastError = msg.detail;
      this.opts.onServerError?.(msg);
    }
  }

  private scheduleReconnect(): void {
    if (!(this.opts.reconnect ?? true)) {
      this.setStatus("closed");
      return;
    }
    if (this.reconnectTimer !== null) return;
    const base = this.opts.backoffBaseMs ?? 500;
    const cap = this.opts.backoffCapMs ?? 8000;
    const delay = Math.min(base * 2 ** this.reconnectAttempts, cap);
    this.reconnectAttempts += 1;
    this.setStatus("reconnecting");
    this.reconnectTimer = this.armTimer(() => {
      this.reconnectTimer = null;
      if (!this.closedByUser) this.openSocket();
    }, delay);
  }

  /** Queue a pilot reference.  At most one message per control period goes
   * out; bursts collapse to the most recent value (latest wins). */
  sendReference(opts: SetReferenceOpts): boolean {
    if (this.status !== "live" || this.handshake === null || this.ws === null) {
      return false;
    }
    const periodMs = this.handshake.ts * 1000;
    const now = this.nowMs();
    const elapsed = now - this.lastRefSentAt;
    if (elapsed >= periodMs && this.refTimer === null) {
      this.writeReference(opts, now);
      return true;
    }
    this.pendingRef = opts;
    if (this.refTimer === null) {
      const wait = Math.max(0, this.lastRefSentAt + periodMs - now);
      this.refTimer = this.armTimer(() => {
        this.refTimer = null;
        if (this.pendingRef !== null && this.status === "live" && this.ws) {
          const p = this.pendingRef;
          this.pendingRef = null;
          this.writeReference(p, this.nowMs());
        }
      }, wait);
    }
    return false;
  }

  private writeReference(opts: SetReferenceOpts, now: number): void {
    this.ws?.send(buildSetReference(opts));
    this.lastRefSentAt = now;
    this.referencesSent += 1;
  }

  sendPoi(position: [number, number, number], applyAtTick?: number): boolean {
    if (this.status !== "live" || this.ws === null) return false;
    this.ws.send(buildSetPoi(position, applyAtTick));
    return true;
  }

  sendPause(value?: boolean): boolean {
    if (this.status !== "live" || this.ws === null) return false;
    this.ws.send(buildPause(value));
    return true;
  }

  sendReset(): boolean {
    if (this.status !== "live" || this.ws === null) return false;
    this.ws.send(buildReset());
    return true;
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      this.disarmTimer(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    if (this.refTimer !== null) {
      this.disarmTimer(this.refTimer);
      this.refTimer = null;
      this.pendingRef = null;
    }
    if (this.ws !== null) {
      this.ws.close();
      this.ws = null;
    }
    this.setStatus("closed");
  }
}
