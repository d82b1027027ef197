"""The serving composition: one producer, one tick loop, N broadcast consumers.

Samples flow producer -> bounded queue -> tick loop; every classified tick
becomes one JSON frame pushed to the WebSocket fan-out (and optionally
stdout). Dev mode accepts manual +/-1 labels over HTTP so the loop can be
driven by hand with no headband and no model.
"""

from __future__ import annotations

import sys
import threading

from .broadcast import ControlHttpServer, RatingsStore, StateBroadcaster
from .models import ModelBundle
from .pipeline import PipelineConfig, PlaneState, StateMessage, TickEngine, plane_update
from .signal_core import TICK_MS, NonMonotonicTimestampError, WindowBuffer


class PipelineService:
    def __init__(self, cfg: PipelineConfig, bundle: ModelBundle | None,
                 ratings_path: str = "ratings.csv", stdout: bool = False,
                 manual: bool = False, host: str = "0.0.0.0"):
        if bundle is None and not manual:
            raise ValueError("a model bundle is required unless manual mode is enabled")
        self.cfg = cfg
        self.stdout = stdout
        self.engine = TickEngine(cfg, bundle) if bundle is not None else None
        self.broadcaster = StateBroadcaster(cfg.broadcast_port, host=host)
        self.ratings = RatingsStore(ratings_path)
        self.http = ControlHttpServer(
            cfg.http_port, self.ratings,
            manual_label_handler=self._on_manual_label if manual else None,
            host=host,
        )
        self.rejected_samples = 0
        self._manual_plane = PlaneState(step=cfg.plane_step)
        self._manual_ticks = 0
        self._lock = threading.Lock()

    def start(self) -> None:
        self.broadcaster.start()
        self.http.start()

    def stop(self) -> None:
        self.broadcaster.stop()
        self.http.stop()

    def _emit(self, message: StateMessage) -> None:
        frame = message.to_json()
        self.broadcaster.publish(frame)
        if self.stdout:
            sys.stdout.write(frame + "\n")
            sys.stdout.flush()

    def _on_manual_label(self, label: int) -> None:
        with self._lock:
            self._manual_plane = plane_update(self._manual_plane, label)
            message = StateMessage(
                t_ms=self._manual_ticks * TICK_MS,
                label=label,
                score=float(label),
                plane_y=self._manual_plane.y,
                mode="manual",
                drop_count=0,
            )
            self._manual_ticks += 1
        self._emit(message)

    def process(self, samples, drop_count_fn=None) -> int:
        """Drive the tick loop over a sample stream; returns ticks emitted.

        Non-monotonic samples are dropped and counted; the stream continues.
        """
        if self.engine is None:
            raise RuntimeError("no model loaded; this service is manual-only")
        buffer = WindowBuffer(len(self.cfg.channels), self.cfg.window_len)
        ticks = 0
        for sample in samples:
            try:
                window = buffer.push(sample)
            except NonMonotonicTimestampError:
                self.rejected_samples += 1
                continue
            if window is None:
                continue
            if drop_count_fn is not None:
                self.engine.drop_count = drop_count_fn()
            self._emit(self.engine.classify_tick(window))
            ticks += 1
        return ticks
