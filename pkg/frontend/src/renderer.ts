// Frame-coalescing renderer: state submissions are applied on the next
// animation frame, so the screen always shows the latest server state and
// never more than one draw per display frame.

export type FrameScheduler = (callback: () => void) => void;

export class Renderer<S> {
  private pending: S | null = null;
  private scheduled = false;

  constructor(
    private readonly draw: (state: S) => void,
    private readonly schedule: FrameScheduler,
  ) {}

  submit(state: S): void {
    this.pending = state;
    if (!this.scheduled) {
      this.scheduled = true;
      this.schedule(() => this.flush());
    }
  }

  private flush(): void {
    this.scheduled = false;
    if (this.pending !== null) {
      const state = this.pending;
      this.pending = null;
      this.draw(state);
    }
  }
}
