"""Length-prefixed frames over a reliable byte stream, with traffic meters.

A frame is ``length:u32le | type:u8 | payload`` where ``length`` is the
payload size. Meters count every byte written, header included, keyed by
(phase, direction, frame type).
"""

from __future__ import annotations

import hashlib
import socket
import struct
import threading
from collections import defaultdict
from enum import IntEnum

from .errors import ProtocolAbort

FRAME_HEADER = struct.Struct("<IB")
MAX_PAYLOAD = 1 << 30


class FrameType(IntEnum):
    HELLO = 1
    PARAMS = 2
    HE_CIPHERTEXT = 3
    GC_TABLES = 4
    OT_MSG = 5
    LABEL_BATCH = 6
    CORRECTION_BITS = 7
    SHARE_VECTOR = 8
    DECODE_INFO = 9
    RESULT = 10
    METER_REPORT = 11


class SocketStream:
    """Byte stream over a connected socket; counts raw bytes written."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.bytes_written = 0
        self.bytes_read = 0

    def sendall(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise ProtocolAbort(f"peer connection lost while sending: {exc}") from exc
        self.bytes_written += len(data)

    def recv_exact(self, size: int) -> bytes:
        buf = bytearray(size)
        view = memoryview(buf)
        got = 0
        while got < size:
            try:
                n = self.sock.recv_into(view[got:], size - got)
            except OSError as exc:
                raise ProtocolAbort(f"peer connection lost while receiving: {exc}") from exc
            if n == 0:
                raise ProtocolAbort("peer closed the connection")
            got += n
        self.bytes_read += size
        return bytes(buf)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def loopback_pair() -> tuple[SocketStream, SocketStream]:
    a, b = socket.socketpair()
    return SocketStream(a), SocketStream(b)


class TcpListener:
    """Bound listening socket, so the port is known before accepting."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.sock = socket.create_server((host, port))
        self.host = host
        self.port = self.sock.getsockname()[1]

    def accept(self, timeout: float | None = 60.0) -> SocketStream:
        self.sock.settimeout(timeout)
        try:
            conn, _ = self.sock.accept()
        except socket.timeout as exc:
            raise ProtocolAbort(f"no client connected to {self.host}:{self.port}") from exc
        finally:
            self.sock.close()
        conn.settimeout(None)
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return SocketStream(conn)


def tcp_connect(host: str, port: int, timeout: float = 60.0) -> SocketStream:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return SocketStream(sock)


class Meters:
    """Deterministic traffic and storage counters; timings kept apart."""

    def __init__(self):
        self.bytes = defaultdict(int)  # (phase, direction, frame name) -> bytes
        self.frames = defaultdict(int)
        self.storage: dict[str, int] = {}
        self.timings: dict[str, float] = {}
        self._lock = threading.Lock()

    def record(self, phase: str, direction: str, ftype: FrameType, size: int) -> None:
        key = (phase, direction, ftype.name)
        with self._lock:
            self.bytes[key] += size
            self.frames[key] += 1

    def total(self, direction: str | None = None, phase: str | None = None,
              ftype: FrameType | str | None = None) -> int:
        if isinstance(ftype, FrameType):
            ftype = ftype.name
        return sum(v for (ph, d, t), v in self.bytes.items()
                   if (direction is None or d == direction)
                   and (phase is None or ph == phase)
                   and (ftype is None or t == ftype))

    @property
    def bytes_up(self) -> int:
        return self.total("up")

    @property
    def bytes_down(self) -> int:
        return self.total("down")

    def merge(self, other: Meters) -> None:
        for k, v in other.bytes.items():
            self.bytes[k] += v
        for k, v in other.frames.items():
            self.frames[k] += v

    def counters(self) -> dict:
        return {
            "bytes": {"/".join(k): v for k, v in sorted(self.bytes.items())},
            "frames": {"/".join(k): v for k, v in sorted(self.frames.items())},
            "bytes_up": self.bytes_up,
            "bytes_down": self.bytes_down,
            "storage": dict(sorted(self.storage.items())),
        }


class Channel:
    """Typed frames for one party. ``role`` decides which direction is 'up'."""

    def __init__(self, stream: SocketStream, role: str, meters: Meters | None = None):
        if role not in ("client", "server"):
            raise ValueError(f"unknown role {role!r}")
        self.stream = stream
        self.role = role
        self.meters = meters if meters is not None else Meters()
        self.phase = "setup"
        self.transcript = hashlib.sha256()

    @property
    def _out(self) -> str:
        return "up" if self.role == "client" else "down"

    @property
    def _in(self) -> str:
        return "down" if self.role == "client" else "up"

    def send(self, ftype: FrameType, payload: bytes) -> None:
        if len(payload) > MAX_PAYLOAD:
            raise ProtocolAbort(f"{ftype.name} payload of {len(payload)} bytes exceeds limit")
        frame = FRAME_HEADER.pack(len(payload), int(ftype)) + payload
        self.stream.sendall(frame)
        self.transcript.update(b">" + frame)
        self.meters.record(self.phase, self._out, ftype, len(frame))

    def recv(self, expected: FrameType) -> bytes:
        length, code = FRAME_HEADER.unpack(self.stream.recv_exact(FRAME_HEADER.size))
        try:
            ftype = FrameType(code)
        except ValueError as exc:
            raise ProtocolAbort(f"unregistered frame type {code}") from exc
        if length > MAX_PAYLOAD:
            raise ProtocolAbort(f"frame length {length} exceeds limit")
        payload = self.stream.recv_exact(length) if length else b""
        self.transcript.update(b"<" + FRAME_HEADER.pack(length, code) + payload)
        self.meters.record(self.phase, self._in, ftype, FRAME_HEADER.size + length)
        if ftype != expected:
            raise ProtocolAbort(f"expected {expected.name} frame, got {ftype.name}")
        return payload

    def close(self) -> None:
        self.stream.close()


def loopback_channels(client_meters: Meters | None = None,
                      server_meters: Meters | None = None) -> tuple[Channel, Channel]:
    a, b = loopback_pair()
    return Channel(a, "client", client_meters), Channel(b, "server", server_meters)
