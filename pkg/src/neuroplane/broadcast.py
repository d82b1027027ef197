"""State broadcast and control surface: a WebSocket fan-out for per-tick
messages plus a small HTTP server for session ratings and dev-mode manual
labels.

A stalled consumer must never block the tick loop, so every connection gets
its own bounded outbox (drop-oldest). The HTTP side is deliberately tiny:
POST /rating, POST /label (dev mode), GET /healthz.
"""

from __future__ import annotations

import csv
import json
import os
import threading
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from websockets.sync.server import serve as ws_serve

OUTBOX_CAPACITY = 16


class Outbox:
    """Per-consumer bounded message buffer; overflow drops the oldest frame."""

    def __init__(self, capacity: int = OUTBOX_CAPACITY):
        self.capacity = capacity
        self.dropped = 0
        self._items: deque[str] = deque()
        self._ready = threading.Condition()
        self._closed = False

    def push(self, text: str) -> None:
        with self._ready:
            if self._closed:
                return
            if len(self._items) >= self.capacity:
                self._items.popleft()
                self.dropped += 1
            self._items.append(text)
            self._ready.notify()

    def pop(self, timeout: float) -> str | None:
        with self._ready:
            if not self._items and not self._closed:
                self._ready.wait(timeout)
            if self._items:
                return self._items.popleft()
            return None

    def close(self) -> None:
        with self._ready:
            self._closed = True
            self._ready.notify_all()

    @property
    def closed(self) -> bool:
        with self._ready:
            return self._closed


class StateBroadcaster:
    """WebSocket server pushing every published frame to all connected clients."""

    def __init__(self, port: int, host: str = "0.0.0.0"):
        self.port = port
        self.host = host
        self._outboxes: set[Outbox] = set()
        self._lock = threading.Lock()
        self._server = None
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._server = ws_serve(self._handler, self.host, self.port)
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="ws-broadcast", daemon=True
        )
        self._thread.start()

    def _handler(self, connection) -> None:
        outbox = Outbox()
        with self._lock:
            self._outboxes.add(outbox)
        try:
            while True:
                frame = outbox.pop(timeout=0.5)
                if frame is None:
                    if outbox.closed:
                        return
                    continue
                connection.send(frame)
        except Exception:
            pass  # client went away; nothing to do
        finally:
            with self._lock:
                self._outboxes.discard(outbox)

    def publish(self, text: str) -> None:
        with self._lock:
            boxes = list(self._outboxes)
        for box in boxes:
            box.push(text)

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._outboxes)

    def stop(self) -> None:
        with self._lock:
            for box in self._outboxes:
                box.close()
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


@dataclass(frozen=True)
class Rating:
    session_id: str
    model: str
    points: int
    utc: str


class RatingsStore:
    """CSV-backed session ratings; a resubmission replaces the prior row."""

    HEADER = ["session_id", "model", "points", "utc"]

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()

    def record(self, session_id: str, model: str, points: int) -> Rating:
        if not session_id or not isinstance(session_id, str):
            raise ValueError("session_id must be a non-empty string")
        if model not in ("svm", "fnn"):
            raise ValueError(f"model must be 'svm' or 'fnn', got {model!r}")
        if not isinstance(points, int) or isinstance(points, bool) or not 1 <= points <= 10:
            raise ValueError(f"points must be an integer in 1..10, got {points!r}")
        rating = Rating(session_id, model, points,
                        datetime.now(timezone.utc).isoformat(timespec="seconds"))
        with self._lock:
            rows = [r for r in self._read() if (r.session_id, r.model) != (session_id, model)]
            rows.append(rating)
            tmp = self.path + ".tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(self.HEADER)
                for r in rows:
                    writer.writerow([r.session_id, r.model, r.points, r.utc])
            os.replace(tmp, self.path)
        return rating

    def _read(self) -> list[Rating]:
        if not os.path.exists(self.path):
            return []
        with open(self.path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            return [
                Rating(row["session_id"], row["model"], int(row["points"]), row["utc"])
                for row in reader
            ]

    def all(self) -> list[Rating]:
        with self._lock:
            return self._read()


class ControlHttpServer:
    """Ratings + dev-mode manual-label endpoint, CORS-open for the browser UI."""

    def __init__(self, port: int, ratings: RatingsStore,
                 manual_label_handler=None, host: str = "0.0.0.0"):
        self.port = port
        self.ratings = ratings
        self.manual_label_handler = manual_label_handler
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def _reply(self, status: int, payload: dict) -> None:
                body = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(body)

            def do_OPTIONS(self):
                self.send_response(204)
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
                self.end_headers()

            def do_GET(self):
                if self.path == "/healthz":
                    self._reply(200, {"status": "ok"})
                else:
                    self._reply(404, {"error": "not found"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                try:
                    doc = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._reply(400, {"error": "invalid JSON body"})
                    return
                if self.path == "/rating":
                    try:
                        rating = outer.ratings.record(
                            doc.get("session_id"), doc.get("model"), doc.get("points")
                        )
                    except (ValueError, TypeError) as exc:
                        self._reply(400, {"error": str(exc)})
                        return
                    self._reply(200, {"status": "ok", "stored": rating.points})
                elif self.path == "/label":
                    if outer.manual_label_handler is None:
                        self._reply(403, {"error": "manual label source is disabled"})
                        return
                    label = doc.get("label")
                    if label not in (1, -1):
                        self._reply(400, {"error": "label must be 1 or -1"})
                        return
                    outer.manual_label_handler(int(label))
                    self._reply(200, {"status": "ok"})
                else:
                    self._reply(404, {"error": "not found"})

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="control-http", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
