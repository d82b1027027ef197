"""OSC 1.0 over UDP: the wire protocol Muse-style band-power bridges speak.

Only float32 arguments are supported; that covers the band-power element
messages. Datagrams with other type tags are malformed for our purposes and
rejected with the byte offset of the offending tag.
"""

from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass

from .signal_core import TICK_MS, EegSample, validate_channels

DEFAULT_OSC_PORT = 7000

# Muse element messages carry four floats; indices 0 and 3 are the ear
# references, 1 and 2 the forehead electrodes we use.
MUSE_BAND_ADDRESSES = {
    "/muse/elements/gamma_absolute": "gamma",
    "/muse/elements/beta_absolute": "beta",
    "/muse/elements/alpha_absolute": "alpha",
}
F7_ARG_INDEX = 1
F8_ARG_INDEX = 2


class OscParseError(ValueError):
    """Malformed OSC datagram; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class OscMessage:
    address: str
    type_tags: str
    args: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.address.startswith("/"):
            raise ValueError(f"OSC address must start with '/', got {self.address!r}")
        if len(self.args) != len(self.type_tags) - 1:
            raise ValueError("argument count does not match type tag count")


def _pad4(n: int) -> int:
    return (n + 4) & ~3  # string length + at least one NUL, rounded to 4


def _read_padded_string(data: bytes, offset: int) -> tuple[str, int]:
    end = data.find(b"\x00", offset)
    if end < 0:
        raise OscParseError("unterminated string", offset)
    raw = data[offset:end]
    new_offset = offset + _pad4(len(raw))
    if new_offset > len(data):
        raise OscParseError("string padding runs past the datagram", end)
    return raw.decode("ascii", errors="strict"), new_offset


def parse_osc(datagram: bytes) -> OscMessage:
    """Decode a single OSC message (for bundles, the first contained message)."""
    if len(datagram) < 4:
        raise OscParseError("datagram too short", 0)
    if datagram.startswith(b"#bundle\x00"):
        # 8 bytes tag + 8 bytes timetag, then size-prefixed elements
        if len(datagram) < 20:
            raise OscParseError("bundle too short for any element", len(datagram))
        (size,) = struct.unpack(">i", datagram[16:20])
        if size <= 0 or 20 + size > len(datagram):
            raise OscParseError(f"bundle element size {size} out of range", 16)
        return parse_osc(datagram[20:20 + size])
    address, offset = _read_padded_string(datagram, 0)
    if not address.startswith("/"):
        raise OscParseError(f"address {address!r} does not start with '/'", 0)
    tags, args_offset = _read_padded_string(datagram, offset)
    if not tags.startswith(","):
        raise OscParseError("type tag string does not start with ','", offset)
    args: list[float] = []
    pos = args_offset
    for i, tag in enumerate(tags[1:]):
        if tag != "f":
            raise OscParseError(f"unsupported type tag {tag!r}", offset + 1 + i)
        if pos + 4 > len(datagram):
            raise OscParseError("float argument truncated", pos)
        args.append(struct.unpack(">f", datagram[pos:pos + 4])[0])
        pos += 4
    return OscMessage(address=address, type_tags=tags, args=tuple(args))


def serialize_osc(msg: OscMessage) -> bytes:
    """Encode a float-only OSC message (inverse of :func:`parse_osc`)."""
    def padded(raw: bytes) -> bytes:
        return raw + b"\x00" * (_pad4(len(raw)) - len(raw))

    out = padded(msg.address.encode("ascii")) + padded(msg.type_tags.encode("ascii"))
    for tag, arg in zip(msg.type_tags[1:], msg.args):
        if tag != "f":
            raise ValueError(f"cannot serialize type tag {tag!r}")
        out += struct.pack(">f", arg)
    return out


def band_powers_from(msg: OscMessage) -> tuple[str, float, float] | None:
    """(band, F7 value, F8 value) for a Muse element message, else None."""
    band = MUSE_BAND_ADDRESSES.get(msg.address)
    if band is None:
        return None
    if len(msg.args) != 4:
        raise OscParseError(
            f"{msg.address} expects 4 float args, got {len(msg.args)}", 0
        )
    return band, msg.args[F7_ARG_INDEX], msg.args[F8_ARG_INDEX]


class OscSampleAssembler:
    """Collects per-band messages into channel-set samples on the 100 ms grid.

    A sample is emitted once every band required by the channel set has a
    fresh value; a repeated band before completion overwrites the stale one.
    Emitted timestamps count up the uniform grid from stream start.
    """

    def __init__(self, channels):
        self.channels = validate_channels(channels)
        self._required = tuple(dict.fromkeys(ch.band for ch in self.channels))
        self._pending: dict[str, tuple[float, float]] = {}
        self._emitted = 0

    def push(self, band: str, f7: float, f8: float) -> EegSample | None:
        if band not in self._required:
            return None
        self._pending[band] = (f7, f8)
        if len(self._pending) < len(self._required):
            return None
        values = tuple(
            self._pending[ch.band][0 if ch.electrode == "F7" else 1]
            for ch in self.channels
        )
        self._pending.clear()
        sample = EegSample(timestamp_ms=self._emitted * TICK_MS, values=values)
        self._emitted += 1
        return sample


class OscUdpListener:
    """Background UDP listener feeding parsed samples into a queue.

    Unknown addresses are ignored; malformed datagrams increment an error
    counter but never stop the stream.
    """

    def __init__(self, queue, channels, port: int = DEFAULT_OSC_PORT, host: str = "0.0.0.0"):
        self.queue = queue
        self.assembler = OscSampleAssembler(channels)
        self.port = port
        self.host = host
        self.parse_errors = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._sock: socket.socket | None = None

    def start(self) -> None:
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((self.host, self.port))
        self.port = self._sock.getsockname()[1]  # resolves port 0
        self._sock.settimeout(0.2)
        self._thread = threading.Thread(target=self._run, name="osc-listener", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                datagram, _ = self._sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                msg = parse_osc(datagram)
                mapped = band_powers_from(msg)
            except OscParseError:
                self.parse_errors += 1
                continue
            if mapped is None:
                continue
            sample = self.assembler.push(*mapped)
            if sample is not None:
                self.queue.push(sample)

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        if self._sock is not None:
            self._sock.close()
        self.queue.close()
