/** Browser entry point: wires DOM input to the session and runs the render
 * loop.  All protocol and drawing logic lives in the imported modules; this
 * file only translates events.
 */

import { Session } from "./session.js";
import { ViewState } from "./view.js";
import { draw, Canvas2DLike } from "./render.js";

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const override = params.get("server");
  if (override) return override;
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${window.location.host}/ws`;
}

function start(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const yawSlider = document.getElementById("yaw") as HTMLInputElement;
  const yawLabel = document.getElementById("yaw-label") as HTMLElement;
  const pauseBtn = document.getElementById("pause") as HTMLButtonElement;
  const resetBtn = document.getElementById("reset") as HTMLButtonElement;
  const ctx = canvas.getContext("2d") as unknown as Canvas2DLike;

  const view = new ViewState();
  const session = new Session({
    url: serverUrl(),
    onHandshake: (hs) => {
      view.setHandshake(hs);
      yawSlider.min = String(-hs.yaw_domain);
      yawSlider.max = String(hs.yaw_domain);
      yawSlider.step = "0.01";
    },
    onFrame: (frame) => view.applyFrame(frame, performance.now()),
    onStatus: (status) => view.setStatus(status),
  });
  session.connect();

  function resize(): void {
    canvas.width = window.innerWidth;
    canvas.height = window.innerHeight;
  }
  window.addEventListener("resize", resize);
  resize();

  // --- pointer: left drag steers, shift/middle drag pans, wheel zooms ---
  let panning = false;
  let steering = false;
  let lastX = 0;
  let lastY = 0;

  function steerTo(sx: number, sy: number): void {
    const [wx, wy] = view.worldFromScreen(sx, sy, canvas.width, canvas.height);
    const z = view.frame?.r[2] ?? 0;
    session.sendReference({
      position: [wx, wy, z],
      yaw: Number(yawSlider.value),
    });
  }

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    lastX = ev.offsetX;
    lastY = ev.offsetY;
    if (ev.button === 1 || ev.button === 2 || ev.shiftKey) {
      panning = true;
    } else if (ev.button === 0) {
      steering = true;
      steerTo(ev.offsetX, ev.offsetY);
    }
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (panning) {
      view.panBy(ev.offsetX - lastX, ev.offsetY - lastY);
    } else if (steering) {
      steerTo(ev.offsetX, ev.offsetY);
    }
    lastX = ev.offsetX;
    lastY = ev.offsetY;
  });
  window.addEventListener("pointerup", () => {
    panning = false;
    steering = false;
  });
  canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
  canvas.addEventListener(
    "wheel",
    (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
      view.zoomAt(factor, ev.offsetX, ev.offsetY, canvas.width, canvas.height);
    },
    { passive: false },
  );
  canvas.addEventListener("dblclick", (ev) => {
    const [wx, wy] = view.worldFromScreen(
      ev.offsetX,
      ev.offsetY,
      canvas.width,
      canvas.height,
    );
    session.sendPoi([wx, wy, 0]);
  });

  yawSlider.addEventListener("input", () => {
    yawLabel.textContent = `yaw ${Number(yawSlider.value).toFixed(2)} rad`;
    session.sendReference({ yaw: Number(yawSlider.value) });
  });
  pauseBtn.addEventListener("click", () => session.sendPause());
  resetBtn.addEventListener("click", () => session.sendReset());

  function loop(): void {
    draw(ctx, view, canvas.width, canvas.height, performance.now());
    requestAnimationFrame(loop);
  }
  requestAnimationFrame(loop);
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", start);
  } else {
    start();
  }
}
