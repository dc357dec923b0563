import struct

import numpy as np
import pytest

from hybridpi.errors import ProtocolAbort
from hybridpi.rng import Rng, parse_seed
from hybridpi.wire import Channel, FrameType, Meters, loopback_channels


def test_frame_roundtrip_and_meters():
    c, s = loopback_channels()
    c.phase = s.phase = "offline"
    c.send(FrameType.HE_CIPHERTEXT, b"x" * 100)
    assert s.recv(FrameType.HE_CIPHERTEXT) == b"x" * 100
    s.send(FrameType.RESULT, b"")
    assert c.recv(FrameType.RESULT) == b""
    assert c.meters.bytes == s.meters.bytes
    assert c.meters.total("up", "offline", FrameType.HE_CIPHERTEXT) == 105
    assert c.meters.bytes_down == 5
    assert c.stream.bytes_written == 105 and s.stream.bytes_written == 5


def test_wrong_frame_type():
    c, s = loopback_channels()
    c.send(FrameType.OT_MSG, b"a")
    with pytest.raises(ProtocolAbort, match="expected HELLO"):
        s.recv(FrameType.HELLO)


def test_unknown_frame_and_oversize():
    c, s = loopback_channels()
    c.stream.sendall(struct.pack("<IB", 0, 99))
    with pytest.raises(ProtocolAbort, match="unregistered"):
        s.recv(FrameType.HELLO)
    c.stream.sendall(struct.pack("<IB", 1 << 31, 1))
    with pytest.raises(ProtocolAbort, match="exceeds"):
        s.recv(FrameType.HELLO)


def test_peer_closed():
    c, s = loopback_channels()
    c.close()
    with pytest.raises(ProtocolAbort):
        s.recv(FrameType.HELLO)


def test_role_check():
    c, _ = loopback_channels()
    with pytest.raises(ValueError):
        Channel(c.stream, "dealer")


def test_meters_merge():
    a, b = Meters(), Meters()
    a.record("online", "up", FrameType.OT_MSG, 10)
    b.record("online", "up", FrameType.OT_MSG, 5)
    a.merge(b)
    assert a.total() == 15 and a.frames[("online", "up", "OT_MSG")] == 2


def test_rng():
    assert parse_seed("ff") == bytes(31) + b"\xff"
    assert parse_seed(1) == parse_seed("0x01")
    with pytest.raises(ValueError):
        parse_seed("zz")
    a, b = Rng(5), Rng(5)
    assert a.bytes(32) == b.bytes(32)
    assert a.derive("x").bytes(8) != a.derive("y").bytes(8)
    v = Rng(6).below(7, 10_000)
    assert v.max() == 6 and v.min() == 0 and abs(v.mean() - 3) < 0.1
    bits = Rng(7).bits(10_000)
    assert set(np.unique(bits)) == {0, 1}
    assert 0 <= Rng(8).randbelow(2 ** 300) < 2 ** 300
