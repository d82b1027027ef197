"""Core domain types and the sliding-window machinery shared by the whole pipeline.

Band-power samples arrive at 10 Hz per channel; the classifier consumes
overlapping 5-sample windows (one new window per sample, i.e. every 0.1 s).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

SAMPLE_RATE_HZ = 10
TICK_MS = 100
WINDOW_LEN = 5
GAP_RESET_MS = 300

ELECTRODES = ("F7", "F8")
BANDS = ("gamma", "beta", "alpha")

CONCENTRATION = 1
RELAXATION = -1


class StreamError(ValueError):
    """Base class for sample-stream violations."""


class NonMonotonicTimestampError(StreamError):
    """A sample's timestamp did not advance past the last accepted one."""


class ChannelCountError(StreamError):
    """A sample's value count does not match the active channel set."""


class SegmentBoundsError(ValueError):
    """Requested segment lies outside the trial."""


def ensure_label(value: int) -> int:
    """Validate a brain-state label: +1 concentration, -1 relaxation."""
    if value not in (CONCENTRATION, RELAXATION):
        raise ValueError(f"state label must be +1 or -1, got {value!r}")
    return int(value)


@dataclass(frozen=True, order=True)
class ChannelId:
    """One band-power channel: an electrode site plus a frequency band."""

    electrode: str
    band: str

    def __post_init__(self) -> None:
        if self.electrode not in ELECTRODES:
            raise ValueError(f"unknown electrode {self.electrode!r}, expected one of {ELECTRODES}")
        if self.band not in BANDS:
            raise ValueError(f"unknown band {self.band!r}, expected one of {BANDS}")

    def __str__(self) -> str:
        return f"{self.electrode}.{self.band}"

    @classmethod
    def parse(cls, text: str) -> "ChannelId":
        """Parse 'F7.gamma'-style channel names."""
        electrode, _, band = text.partition(".")
        if not band:
            raise ValueError(f"channel name {text!r} is not of the form ELECTRODE.band")
        return cls(electrode, band)


GAMMA_PAIR = (ChannelId("F7", "gamma"), ChannelId("F8", "gamma"))
ALL_CHANNELS = tuple(ChannelId(e, b) for b in BANDS for e in ELECTRODES)


def validate_channels(channels) -> tuple[ChannelId, ...]:
    """Check a channel set: non-empty, ordered, no duplicates."""
    channels = tuple(channels)
    if not channels:
        raise ValueError("channel set must be non-empty")
    if len(set(channels)) != len(channels):
        raise ValueError(f"channel set contains duplicates: {channels}")
    return channels


@dataclass(frozen=True)
class EegSample:
    """One 10 Hz reading: per-channel band power at an integer-ms timestamp."""

    timestamp_ms: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"sample at t={self.timestamp_ms} has non-finite values")


@dataclass(frozen=True)
class Window:
    """A C x T matrix of the most recent T samples (columns in time order)."""

    data: np.ndarray
    start_ts: int

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"window data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("window contains non-finite entries")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class Trial:
    """One labeled protocol trial: ~10 Hz samples over a nominal duration."""

    label: int
    samples: list[EegSample]
    nominal_duration_s: int

    def __post_init__(self) -> None:
        self.label = ensure_label(self.label)
        if self.nominal_duration_s not in (10, 15):
            raise ValueError(f"trial duration must be 10 or 15 s, got {self.nominal_duration_s}")
        expected = self.nominal_duration_s * SAMPLE_RATE_HZ
        if abs(len(self.samples) - expected) > 2:
            raise ValueError(
                f"trial has {len(self.samples)} samples, expected {expected} +/- 2"
            )


class WindowBuffer:
    """Sliding buffer assembling overlapping fixed-length windows, stride 1.

    Single-writer. Timestamps must strictly increase; a gap larger than
    ``gap_reset_ms`` discards the buffered samples so a window never mixes
    pre- and post-gap data.
    """

    def __init__(self, n_channels: int, window_len: int = WINDOW_LEN,
                 gap_reset_ms: int = GAP_RESET_MS):
        if n_channels < 1 or window_len < 1:
            raise ValueError("n_channels and window_len must be positive")
        self.n_channels = n_channels
        self.window_len = window_len
        self.gap_reset_ms = gap_reset_ms
        self._samples: deque[EegSample] = deque(maxlen=window_len)
        self._last_ts: int | None = None

    def __len__(self) -> int:
        return len(self._samples)

    def reset(self) -> None:
        self._samples.clear()

    def push(self, sample: EegSample) -> Window | None:
        """Append one sample; return a Window once ``window_len`` are buffered."""
        if len(sample.values) != self.n_channels:
            raise ChannelCountError(
                f"sample has {len(sample.values)} values, buffer expects {self.n_channels}"
            )
        if self._last_ts is not None:
            if sample.timestamp_ms <= self._last_ts:
                raise NonMonotonicTimestampError(
                    f"timestamp {sample.timestamp_ms} <= last accepted {self._last_ts}"
                )
            if sample.timestamp_ms - self._last_ts > self.gap_reset_ms:
                self._samples.clear()
        self._samples.append(sample)
        self._last_ts = sample.timestamp_ms
        if len(self._samples) < self.window_len:
            return None
        data = np.array([s.values for s in self._samples], dtype=float).T
        return Window(data=data, start_ts=self._samples[0].timestamp_ms)


def extract_segment(trial: Trial, start_s: float, end_s: float) -> list[EegSample]:
    """Samples of ``trial`` with offsets in [start_s, end_s) at the 10 Hz grid."""
    if not (0 <= start_s < end_s <= trial.nominal_duration_s):
        raise SegmentBoundsError(
            f"segment [{start_s}, {end_s}) outside trial of {trial.nominal_duration_s} s"
        )
    i0 = math.floor(start_s * SAMPLE_RATE_HZ)
    i1 = math.floor(end_s * SAMPLE_RATE_HZ)
    if i1 > len(trial.samples):
        raise SegmentBoundsError(
            f"segment needs samples up to index {i1}, trial has {len(trial.samples)}"
        )
    return trial.samples[i0:i1]


def flatten_window(w: Window) -> np.ndarray:
    """Flatten sample-major: [ch1(t1), ch2(t1), ch1(t2), ...], length C*T."""
    return w.data.flatten(order="F")


def unflatten_window(v, n_channels: int, n_samples: int) -> np.ndarray:
    """Inverse of :func:`flatten_window` for a fixed (C, T)."""
    v = np.asarray(v, dtype=float)
    if v.size != n_channels * n_samples:
        raise ValueError(f"vector of length {v.size} does not fit ({n_channels},{n_samples})")
    return v.reshape((n_channels, n_samples), order="F")


def windows_of(samples: list[EegSample], window_len: int = WINDOW_LEN) -> list[Window]:
    """All stride-1 windows of a contiguous sample run (no gap handling)."""
    out = []
    for i in range(len(samples) - window_len + 1):
        chunk = samples[i:i + window_len]
        data = np.array([s.values for s in chunk], dtype=float).T
        out.append(Window(data=data, start_ts=chunk[0].timestamp_ms))
    return out
