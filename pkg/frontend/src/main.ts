// Browser wiring: socket -> store -> renderer, keyboard -> manual driver,
// form -> rating client. All logic lives in the imported modules; this file
// only connects them to the DOM.

import { drawScene } from "./draw.js";
import { ManualLabelDriver } from "./manual.js";
import { RatingClient } from "./rating.js";
import { Renderer } from "./renderer.js";
import { UiState, UiStore } from "./state.js";

const params = new URLSearchParams(window.location.search);
const host = window.location.hostname || "localhost";
const wsPort = params.get("ws") ?? "8080";
const httpPort = params.get("http") ?? "8081";
const devMode = params.get("dev") === "1";
const controlBase = `http://${host}:${httpPort}`;

const canvas = document.getElementById("game") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

const store = new UiStore();
let manualBlockedUntil = 0;

const renderer = new Renderer<UiState>(
  (state) =>
    drawScene(ctx, state, canvas.width, canvas.height, {
      devMode,
      manualBlockedBadge: performance.now() < manualBlockedUntil,
    }),
  (cb) => requestAnimationFrame(cb),
);
renderer.submit(store.state);

function connect(): void {
  const socket = new WebSocket(`ws://${host}:${wsPort}`);
  socket.onmessage = (event) => {
    store.handleRaw(String(event.data), performance.now());
    renderer.submit(store.state);
  };
  socket.onclose = () => {
    store.socketClosed();
    renderer.submit(store.state);
    setTimeout(connect, 2000);
  };
}
connect();

// watchdog: a silent stream flips the status to lost and freezes the plane
setInterval(() => {
  store.tick(performance.now());
  renderer.submit(store.state);
}, 250);

// dev-mode manual labels
const driver = new ManualLabelDriver((label) => {
  void fetch(`${controlBase}/label`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ label }),
  }).catch(() => undefined);
}, devMode);
driver.start();

window.addEventListener("keydown", (e) => {
  if (e.key !== "ArrowUp" && e.key !== "ArrowDown") return;
  e.preventDefault();
  if (!devMode) {
    manualBlockedUntil = performance.now() + 2000;
    renderer.submit(store.state);
    return;
  }
  driver.setKey(e.key === "ArrowUp" ? "up" : "down", true);
});
window.addEventListener("keyup", (e) => {
  if (e.key === "ArrowUp") driver.setKey("up", false);
  if (e.key === "ArrowDown") driver.setKey("down", false);
});

// session rating form
const sessionId =
  typeof crypto !== "undefined" && "randomUUID" in crypto
    ? crypto.randomUUID()
    : `session-${Date.now()}`;
const ratings = new RatingClient(controlBase, (url, init) => fetch(url, init));
const form = document.getElementById("rating-form") as HTMLFormElement;
const pointsInput = document.getElementById("points") as HTMLInputElement;
const ratingStatus = document.getElementById("rating-status")!;

form.addEventListener("submit", (e) => {
  e.preventDefault();
  const points = Number(pointsInput.value);
  const mode = store.state.mode === "fnn" ? "fnn" : "svm";
  void ratings
    .submit({ session_id: sessionId, model: mode, points })
    .then((outcome) => {
      ratingStatus.textContent = {
        sent: `rating ${points} saved`,
        queued: "network trouble: rating kept locally, will retry",
        rejected: "points must be a whole number from 1 to 10",
      }[outcome];
      if (outcome === "queued") {
        const retry = setInterval(() => {
          void ratings.retryPending().then((sent) => {
            if (ratings.pending.length === 0) {
              clearInterval(retry);
              if (sent > 0) ratingStatus.textContent = "rating saved after retry";
            }
          });
        }, 3000);
      }
    });
});
