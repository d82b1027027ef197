// UI state: a thin mirror of the latest server frame. The plane's altitude is
// never integrated locally — the service's fold is authoritative.

import { parseFrame, StateFrame } from "./protocol.js";

export type Connection = "connecting" | "live" | "lost";

export interface UiState {
  planeY: number;
  label: 1 | -1 | null;
  mode: string | null;
  connection: Connection;
  lastTMs: number | null;
  malformedCount: number;
  dropCount: number;
}

export const SILENCE_LOST_MS = 1000;

export function initialState(): UiState {
  return {
    planeY: 0.5,
    label: null,
    mode: null,
    connection: "connecting",
    lastTMs: null,
    malformedCount: 0,
    dropCount: 0,
  };
}

export class UiStore {
  state: UiState = initialState();
  private lastFrameAt: number | null = null;

  /** Feed one raw websocket message; malformed input only bumps a counter. */
  handleRaw(raw: string, nowMs: number): StateFrame | null {
    const frame = parseFrame(raw);
    if (frame === null) {
      this.state = { ...this.state, malformedCount: this.state.malformedCount + 1 };
      return null;
    }
    this.lastFrameAt = nowMs;
    this.state = {
      ...this.state,
      planeY: frame.plane_y,
      label: frame.label,
      mode: frame.mode,
      connection: "live",
      lastTMs: frame.t_ms,
      dropCount: frame.drop_count,
    };
    return frame;
  }

  /** Clock tick: a live stream that goes silent for over a second is lost. */
  tick(nowMs: number): void {
    if (
      this.state.connection === "live" &&
      this.lastFrameAt !== null &&
      nowMs - this.lastFrameAt > SILENCE_LOST_MS
    ) {
      this.state = { ...this.state, connection: "lost" };
    }
  }

  socketClosed(): void {
    this.state = { ...this.state, connection: "lost" };
  }
}
