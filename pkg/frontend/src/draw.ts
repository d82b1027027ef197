// Canvas drawing. Altitude maps straight to the vertical axis: the only
// physics on screen is whatever the server already computed.

import { UiState } from "./state.js";

// the subset of CanvasRenderingContext2D we touch (stubbable in tests)
export interface Ctx2d {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  font: string;
  lineWidth: number;
  globalAlpha: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

const MARGIN = 30;

export function planePixelY(planeY: number, height: number): number {
  return MARGIN + (1 - planeY) * (height - 2 * MARGIN);
}

export interface DrawFlags {
  devMode: boolean;
  manualBlockedBadge: boolean;
}

export function drawScene(
  ctx: Ctx2d, state: UiState, width: number, height: number, flags: DrawFlags,
): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#0b1d33";
  ctx.fillRect(0, 0, width, height);

  // label tint: concentration washes the sky upward, relaxation downward
  if (state.label === 1) {
    ctx.globalAlpha = 0.18;
    ctx.fillStyle = "#ffb347";
    ctx.fillRect(0, 0, width, height / 3);
  } else if (state.label === -1) {
    ctx.globalAlpha = 0.18;
    ctx.fillStyle = "#4aa3ff";
    ctx.fillRect(0, (2 * height) / 3, width, height / 3);
  }
  ctx.globalAlpha = 1;

  // altitude rail
  ctx.strokeStyle = "#23405e";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(width * 0.3, MARGIN);
  ctx.lineTo(width * 0.3, height - MARGIN);
  ctx.stroke();

  const y = planePixelY(state.planeY, height);
  ctx.fillStyle = state.connection === "lost" ? "#5a6b7d" : "#f4f7fa";
  ctx.beginPath();
  ctx.moveTo(width * 0.3 + 26, y);
  ctx.lineTo(width * 0.3 - 14, y - 10);
  ctx.lineTo(width * 0.3 - 6, y);
  ctx.lineTo(width * 0.3 - 14, y + 10);
  ctx.closePath();
  ctx.fill();

  ctx.font = "13px system-ui, sans-serif";
  ctx.fillStyle = "#9fb4c8";
  const mode = state.mode ?? "-";
  ctx.fillText(`altitude ${state.planeY.toFixed(2)}`, 12, 20);
  ctx.fillText(`mode ${mode}`, 12, 38);
  ctx.fillText(`status ${state.connection}`, 12, 56);
  if (state.malformedCount > 0) {
    ctx.fillText(`malformed ${state.malformedCount}`, 12, 74);
  }
  if (state.dropCount > 0) {
    ctx.fillText(`drops ${state.dropCount}`, 12, 92);
  }
  if (state.connection === "lost") {
    ctx.fillStyle = "#ff7b72";
    ctx.font = "20px system-ui, sans-serif";
    ctx.fillText("signal lost", width / 2 - 50, height / 2);
  }
  if (flags.devMode) {
    ctx.fillStyle = "#7ee787";
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText("dev: arrows post labels", width - 170, 20);
  } else if (flags.manualBlockedBadge) {
    ctx.fillStyle = "#d29922";
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText("manual control disabled (add ?dev=1)", width - 240, 20);
  }
}
