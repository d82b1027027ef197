// Broadcast frame schema: one JSON text frame per pipeline tick.

export interface StateFrame {
  t_ms: number;
  label: 1 | -1;
  score: number;
  plane_y: number;
  mode: string;
  drop_count: number;
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/** Strictly parse one frame; anything malformed yields null (never throws). */
export function parseFrame(raw: string): StateFrame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (!isFiniteNumber(d.t_ms)) return null;
  if (d.label !== 1 && d.label !== -1) return null;
  if (!isFiniteNumber(d.score)) return null;
  if (!isFiniteNumber(d.plane_y) || d.plane_y < 0 || d.plane_y > 1) return null;
  if (typeof d.mode !== "string") return null;
  if (!isFiniteNumber(d.drop_count)) return null;
  return {
    t_ms: d.t_ms,
    label: d.label,
    score: d.score,
    plane_y: d.plane_y,
    mode: d.mode,
    drop_count: d.drop_count,
  };
}
