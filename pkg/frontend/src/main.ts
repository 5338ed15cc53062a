// Browser entry point: websocket wiring, 20 Hz tick loop, keyboard and
// pointer-joystick input, canvas rendering and the HUD.
//
// Configuration via URL query parameters:
//   ?server=ws://localhost:8765   websocket endpoint
//   &scale=20                     pixels per world unit

import { KeyStates, dragToAction, keysToAction } from "./input.js";
import { drawEpisode, drawMap } from "./render.js";
import { UiSession } from "./session.js";
import { View, makeView, viewSize } from "./transform.js";

const TICK_HZ = 20;
const JOYSTICK_RADIUS_PX = 60;

const params = new URLSearchParams(window.location.search);
const serverUrl = params.get("server") ?? "ws://localhost:8765";
const scale = Number(params.get("scale") ?? "20");

const canvas = document.getElementById("arena") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const bannerEl = document.getElementById("banner")!;
const progressEl = document.getElementById("progress")!;
const clockEl = document.getElementById("clock")!;

const keys: KeyStates = {};
window.addEventListener("keydown", (e) => {
  keys[e.code] = true;
  if (e.code === "Escape") session?.abort();
});
window.addEventListener("keyup", (e) => {
  keys[e.code] = false;
});

let drag: [number, number] | null = null;
let dragOrigin: [number, number] | null = null;
canvas.addEventListener("pointerdown", (e) => {
  dragOrigin = [e.offsetX, e.offsetY];
  drag = [0, 0];
});
canvas.addEventListener("pointermove", (e) => {
  if (dragOrigin !== null) {
    drag = [e.offsetX - dragOrigin[0], e.offsetY - dragOrigin[1]];
  }
});
for (const evt of ["pointerup", "pointerleave", "pointercancel"]) {
  canvas.addEventListener(evt, () => {
    drag = null;
    dragOrigin = null;
  });
}

let session: UiSession | null = null;
let view: View | null = null;

function connect(): void {
  const ws = new WebSocket(serverUrl);
  ws.onopen = () => {
    session = new UiSession({ send: (data) => ws.send(data) });
  };
  ws.onmessage = (event) => {
    session?.onFrame(String(event.data));
    if (session?.map && view === null) {
      view = makeView(session.map.bounds, scale);
      const [w, h] = viewSize(view);
      canvas.width = w;
      canvas.height = h;
    }
  };
  ws.onclose = () => {
    if (session !== null && session.phase !== "error") {
      session.banner = { kind: "error", text: "connection lost; retrying in 2s" };
    }
    view = null;
    setTimeout(connect, 2000);
  };
}

function currentAction(): [number, number] {
  if (drag !== null) {
    return dragToAction(drag[0], drag[1], JOYSTICK_RADIUS_PX);
  }
  return keysToAction(keys);
}

setInterval(() => {
  session?.tick(currentAction());
  redraw();
}, 1000 / TICK_HZ);

function redraw(): void {
  if (session === null) {
    bannerEl.textContent = "connecting...";
    return;
  }
  bannerEl.textContent = session.banner.text;
  bannerEl.className = `banner ${session.banner.kind}`;
  const total = session.nD === null ? "?" : String(session.nD);
  progressEl.textContent = `demos ${session.demosCompleted} / ${total}`;
  clockEl.textContent = `human time ${session.humanSeconds.toFixed(1)}s`;
  if (view !== null && session.map !== null) {
    drawMap(ctx, view, session.map);
    drawEpisode(ctx, view, session.query, session.pos, session.trail,
      session.map.goal_radius);
  }
}

connect();
