// Dev-mode manual label source: held arrow keys post +/-1 labels at the tick
// rate so a human can drive the loop with no headband and no model.

export type PostLabel = (label: 1 | -1) => void;

export class ManualLabelDriver {
  private up = false;
  private down = false;
  private flip: 1 | -1 = 1; // both keys held: alternate, starting upward
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly post: PostLabel,
    private readonly enabled: boolean,
  ) {}

  setKey(key: "up" | "down", pressed: boolean): void {
    if (key === "up") this.up = pressed;
    else this.down = pressed;
  }

  /** Label for one 100 ms tick, or null when idle or disabled. */
  tick(): 1 | -1 | null {
    if (!this.enabled) return null;
    if (this.up && this.down) {
      const label = this.flip;
      this.flip = this.flip === 1 ? -1 : 1;
      return label;
    }
    if (this.up) return 1;
    if (this.down) return -1;
    return null;
  }

  start(intervalMs = 100): void {
    if (!this.enabled || this.timer !== null) return;
    this.timer = setInterval(() => {
      const label = this.tick();
      if (label !== null) this.post(label);
    }, intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
