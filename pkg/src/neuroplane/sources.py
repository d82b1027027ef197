"""Sample sources and session recording: CSV replay, a seeded synthetic
generator, and the bounded hand-off queue used by live producers.

All sources speak the same currency (EegSample at a 100 ms grid), so the
serving pipeline cannot tell a headband from a file from the generator.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .signal_core import (
    GAMMA_PAIR,
    SAMPLE_RATE_HZ,
    TICK_MS,
    ChannelId,
    EegSample,
    ensure_label,
    validate_channels,
)

QUEUE_CAPACITY = 64


class RecordingFormatError(ValueError):
    """CSV recording violates the expected format; names the line."""


class SampleQueue:
    """Bounded producer/consumer queue; overflow drops the oldest sample.

    Freshness beats completeness in a live feedback loop, so a stalled
    consumer loses history, not recency. ``dropped`` counts the losses.
    """

    def __init__(self, capacity: int = QUEUE_CAPACITY):
        self.capacity = capacity
        self.dropped = 0
        self._items: deque[EegSample] = deque()
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self._closed = False

    def push(self, sample: EegSample) -> None:
        with self._ready:
            if self._closed:
                return
            if len(self._items) >= self.capacity:
                self._items.popleft()
                self.dropped += 1
            self._items.append(sample)
            self._ready.notify()

    def pop(self, timeout: float | None = None) -> EegSample | None:
        """Next sample, or None once closed-and-drained or on timeout."""
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
        with self._lock:
            return self._closed and not self._items

    def __iter__(self) -> Iterator[EegSample]:
        while True:
            sample = self.pop(timeout=0.5)
            if sample is None:
                if self.closed:
                    return
                continue
            yield sample


def channel_column(ch: ChannelId) -> str:
    return f"{ch.electrode.lower()}_{ch.band}"


def _column_channel(name: str) -> ChannelId:
    electrode, _, band = name.partition("_")
    return ChannelId(electrode.upper(), band)


@dataclass
class SessionRecording:
    """An in-memory recorded session: samples plus optional per-sample labels."""

    channels: tuple[ChannelId, ...]
    samples: list[EegSample]
    labels: list[int | None] | None = None

    def __post_init__(self) -> None:
        self.channels = validate_channels(self.channels)
        if self.labels is not None and len(self.labels) != len(self.samples):
            raise ValueError("labels must align one-to-one with samples")
        last = None
        for s in self.samples:
            if last is not None and s.timestamp_ms <= last:
                raise ValueError("recording samples are not time-ordered")
            last = s.timestamp_ms

    def __len__(self) -> int:
        return len(self.samples)


def _parse_header(fields: list[str], path) -> tuple[tuple[ChannelId, ...], bool]:
    if not fields or fields[0] != "t_ms":
        raise RecordingFormatError(f"{path}:1: header must start with 't_ms'")
    has_label = fields[-1] == "label"
    channel_names = fields[1:-1] if has_label else fields[1:]
    if not channel_names:
        raise RecordingFormatError(f"{path}:1: no channel columns in header")
    try:
        channels = validate_channels(_column_channel(c) for c in channel_names)
    except ValueError as exc:
        raise RecordingFormatError(f"{path}:1: bad channel column: {exc}") from exc
    return channels, has_label


def load_recording(path) -> SessionRecording:
    """Read a whole recording file; labels column included when present."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0]:
        raise RecordingFormatError(f"{path}:1: empty recording")
    channels, has_label = _parse_header(lines[0].split(","), path)
    width = 1 + len(channels) + (1 if has_label else 0)
    samples: list[EegSample] = []
    labels: list[int | None] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise RecordingFormatError(
                f"{path}:{lineno}: expected {width} columns, found {len(cells)}"
            )
        try:
            t_ms = int(cells[0])
            values = tuple(float(c) for c in cells[1:1 + len(channels)])
        except ValueError as exc:
            raise RecordingFormatError(f"{path}:{lineno}: non-numeric cell: {exc}") from exc
        if has_label:
            raw = cells[-1]
            if raw == "":
                labels.append(None)
            else:
                try:
                    labels.append(ensure_label(int(raw)))
                except ValueError as exc:
                    raise RecordingFormatError(f"{path}:{lineno}: bad label: {exc}") from exc
        samples.append(EegSample(timestamp_ms=t_ms, values=values))
    if not samples:
        raise RecordingFormatError(f"{path}:1: recording has a header but no rows")
    return SessionRecording(
        channels=channels, samples=samples, labels=labels if has_label else None
    )


def replay_csv(path, speed: float = 0.0) -> Iterator[EegSample]:
    """Stream a recording's values; timestamps are regenerated on the 100 ms grid.

    ``speed`` scales pacing: 1.0 replays in real time, 0 yields unpaced.
    """
    if speed < 0:
        raise ValueError("speed must be >= 0")
    recording = load_recording(path)
    interval = 0.0 if speed == 0 else (TICK_MS / 1000.0) / speed
    for i, sample in enumerate(recording.samples):
        if interval and i:
            time.sleep(interval)
        yield EegSample(timestamp_ms=i * TICK_MS, values=sample.values)


def record_session(stream, path, channels) -> SessionRecording:
    """Write samples (optionally (sample, label) pairs) to CSV, flushing per row.

    The file reproduces every value exactly on replay; floats are written
    with round-trip precision.
    """
    channels = validate_channels(channels)
    samples: list[EegSample] = []
    labels: list[int | None] = []
    saw_label = False
    header = ["t_ms", *(channel_column(ch) for ch in channels)]
    it = iter(stream)
    try:
        first = next(it)
    except StopIteration:
        first = None
    if isinstance(first, tuple):
        saw_label = True
        header.append("label")

    def rows():
        if first is not None:
            yield first
        yield from it

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        fh.flush()
        for item in rows():
            if saw_label:
                sample, label = item
            else:
                sample, label = item, None
            if len(sample.values) != len(channels):
                raise ValueError(
                    f"sample has {len(sample.values)} values for {len(channels)} channels"
                )
            cells = [str(sample.timestamp_ms), *(repr(v) for v in sample.values)]
            if saw_label:
                cells.append("" if label is None else str(ensure_label(label)))
            fh.write(",".join(cells) + "\n")
            fh.flush()
            samples.append(sample)
            labels.append(label)
    return SessionRecording(
        channels=channels, samples=samples, labels=labels if saw_label else None
    )


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings for a two-state band-power stream.

    Every channel shares one slowly wandering source (decayed random walk)
    scaled by ``common_source_gain``; the per-class means carry the actual
    state information. CSP has to reject the shared source to see it.
    """

    seed: int = 42
    channels: tuple[ChannelId, ...] = GAMMA_PAIR
    conc_mean: tuple[float, ...] = (2.0, 1.1)
    relax_mean: tuple[float, ...] = (1.1, 0.8)
    noise_std: float = 0.2
    common_source_gain: float = 0.25
    common_source_decay: float = 0.9

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", validate_channels(self.channels))
        object.__setattr__(self, "conc_mean", tuple(float(v) for v in self.conc_mean))
        object.__setattr__(self, "relax_mean", tuple(float(v) for v in self.relax_mean))
        n = len(self.channels)
        if len(self.conc_mean) != n or len(self.relax_mean) != n:
            raise ValueError("mean vectors must have one entry per channel")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        if not 0.0 <= self.common_source_decay <= 1.0:
            raise ValueError("common_source_decay must be in [0, 1]")
        for ch, c, r in zip(self.channels, self.conc_mean, self.relax_mean):
            if ch.band == "gamma" and not c > r:
                raise ValueError(
                    f"concentration mean must exceed relaxation mean on {ch} ({c} <= {r})"
                )

    @classmethod
    def from_json(cls, text: str) -> "SyntheticConfig":
        doc = json.loads(text)
        kwargs = {}
        if "channels" in doc:
            kwargs["channels"] = tuple(ChannelId.parse(s) for s in doc.pop("channels"))
        kwargs.update(doc)
        return cls(**kwargs)

    def separation_sigma(self) -> float:
        """Mean per-channel class separation in noise-std units."""
        diffs = [c - r for c, r in zip(self.conc_mean, self.relax_mean)]
        return float(np.mean(diffs) / self.noise_std)


def synth_stream(cfg: SyntheticConfig,
                 schedule: Iterable[tuple[int | None, float]]
                 ) -> Iterator[tuple[EegSample, int | None]]:
    """Labeled synthetic samples; a pure function of (cfg.seed, schedule).

    ``schedule`` is (label, duration_s) segments; label None means a rest
    segment (midpoint mean, emitted unlabeled). The schedule may be an
    endless generator; segments are validated as they are consumed.
    """
    rng = np.random.default_rng(cfg.seed)
    conc = np.asarray(cfg.conc_mean)
    relax = np.asarray(cfg.relax_mean)
    mid = 0.5 * (conc + relax)
    shared = 0.0
    t = 0
    for label, dur in schedule:
        if dur <= 0:
            raise ValueError(f"schedule segment duration must be positive, got {dur}")
        if label is not None:
            ensure_label(label)
        mean = conc if label == 1 else relax if label == -1 else mid
        for _ in range(int(round(dur * SAMPLE_RATE_HZ))):
            shared = cfg.common_source_decay * shared + rng.normal()
            values = mean + cfg.common_source_gain * shared \
                + rng.normal(0.0, cfg.noise_std, len(cfg.channels))
            yield EegSample(timestamp_ms=t * TICK_MS, values=tuple(values)), label
            t += 1


def strip_labels(stream) -> Iterator[EegSample]:
    for sample, _label in stream:
        yield sample


def paced(stream, speed: float = 1.0):
    """Pace an unpaced stream at 10 Hz / speed (speed 0 passes through)."""
    if speed < 0:
        raise ValueError("speed must be >= 0")
    if speed == 0:
        yield from stream
        return
    interval = (TICK_MS / 1000.0) / speed
    for i, item in enumerate(stream):
        if i:
            time.sleep(interval)
        yield item
