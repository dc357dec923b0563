import threading

import numpy as np
import pytest

from hybridpi.errors import OTError, ProtocolAbort
from hybridpi.ot import (
    BaseOT,
    DealerOT,
    decode_ints,
    derandomize_transfer,
    encode_int,
    make_backend,
    ot_transfer,
    pack_bits,
    random_ot_transfer,
    unpack_bits,
)
from hybridpi.params import OtGroup, safe_prime
from hybridpi.rng import Rng
from hybridpi.wire import Channel, FrameType, SocketStream, loopback_pair


def messages(count, seed):
    rng = Rng(seed)
    return rng.uint64((count, 2)), rng.uint64((count, 2)), rng.bits(count)


def direct(m0, m1, c):
    return np.where(c[:, None].astype(bool), m1, m0)


def test_helpers_roundtrip():
    bits = np.array([1, 0, 1, 1, 0, 0, 0, 1, 1], dtype=np.uint8)
    assert np.array_equal(unpack_bits(pack_bits(bits)), bits)
    assert decode_ints(encode_int(5) + encode_int(2 ** 300)) == [5, 2 ** 300]


@pytest.mark.parametrize("name", ["dealer", "base"])
def test_single_choice(name):
    m0 = np.array([[1, 2]], dtype=np.uint64)
    m1 = np.array([[3, 4]], dtype=np.uint64)
    backend = make_backend(name, rng=Rng(1))
    assert np.array_equal(ot_transfer(backend, m0, m1, [0]), m0)
    assert np.array_equal(ot_transfer(backend, m0, m1, [1]), m1)


@pytest.mark.parametrize("name", ["dealer", "base"])
def test_random_instances(name):
    m0, m1, c = messages(256, 2)
    assert np.array_equal(ot_transfer(make_backend(name, rng=Rng(2)), m0, m1, c), direct(m0, m1, c))


def test_unknown_backend():
    with pytest.raises(OTError):
        make_backend("iknp")


def test_base_ot_deterministic_transcript():
    m0, m1, c = messages(16, 3)

    def transcript():
        rx, tx = [Channel(s, r) for s, r in zip(loopback_pair(), ("client", "server"))]
        t = threading.Thread(target=lambda: BaseOT(rng=Rng(4)).send(tx, m0, m1))
        t.start()
        BaseOT(rng=Rng(5)).receive(rx, c)
        t.join()
        return rx.transcript.digest(), tx.transcript.digest()

    assert transcript() == transcript()


def test_tampered_receiver_element_aborts():
    group = OtGroup(safe_prime())
    m0, m1, _ = messages(4, 6)
    rx, tx = [Channel(s, r) for s, r in zip(loopback_pair(), ("client", "server"))]
    errors = []

    def sender():
        try:
            BaseOT(group, Rng(7)).send(tx, m0, m1)
        except OTError as exc:
            errors.append(exc)

    t = threading.Thread(target=sender)
    t.start()
    rx.recv(FrameType.OT_MSG)
    # P - 1 is a non-residue for a safe prime with P = 3 mod 4
    rx.send(FrameType.OT_MSG, b"".join(encode_int(v) for v in [group.prime - 1, 4, 16, 64]))
    t.join()
    assert errors and "not in the group" in str(errors[0])


def test_tampered_sender_element_aborts():
    rx, tx = [Channel(s, r) for s, r in zip(loopback_pair(), ("client", "server"))]
    tx.send(FrameType.OT_MSG, encode_int(0))
    with pytest.raises(OTError):
        BaseOT(rng=Rng(8)).receive(rx, [0, 1])


def test_count_mismatch():
    m0, m1, c = messages(8, 9)
    with pytest.raises(OTError):
        ot_transfer(DealerOT(), m0, m1, c[:4])


class Recorder(SocketStream):
    def __init__(self, inner):
        super().__init__(inner.sock)
        self.received = bytearray()

    def recv_exact(self, size):
        data = super().recv_exact(size)
        self.received += data
        return data


def test_dealer_never_sends_unchosen_message():
    m0, m1, c = messages(64, 10)
    a, b = loopback_pair()
    rec = Recorder(a)
    rx, tx = Channel(rec, "client"), Channel(b, "server")
    t = threading.Thread(target=lambda: DealerOT().send(tx, m0, m1))
    t.start()
    got = DealerOT().receive(rx, c)
    t.join()
    assert np.array_equal(got, direct(m0, m1, c))
    stream = bytes(rec.received)
    unchosen = direct(m1, m0, c)
    for block in unchosen:
        assert block.astype("<u8").tobytes() not in stream


@pytest.mark.parametrize("name", ["dealer", "base"])
def test_derandomize(name):
    backend = make_backend(name, rng=Rng(11))
    s_mat, r_mat = random_ot_transfer(backend, 512, Rng(12))
    m0, m1, b = messages(512, 13)
    got = derandomize_transfer(s_mat, r_mat, m0, m1, b)
    assert np.array_equal(got, direct(m0, m1, b))
    assert s_mat.consumed and r_mat.consumed


def test_derandomize_both_branches():
    s_mat, r_mat = random_ot_transfer(DealerOT(), 2, Rng(14))
    m0 = np.array([[1, 1], [2, 2]], dtype=np.uint64)
    m1 = np.array([[3, 3], [4, 4]], dtype=np.uint64)
    # one choice equal to the random bit, one different
    b = np.array([r_mat.c[0], 1 - r_mat.c[1]], dtype=np.uint8)
    assert np.array_equal(derandomize_transfer(s_mat, r_mat, m0, m1, b), direct(m0, m1, b))


def test_material_single_use():
    s_mat, r_mat = random_ot_transfer(DealerOT(), 8, Rng(15))
    m0, m1, b = messages(8, 16)
    derandomize_transfer(s_mat, r_mat, m0, m1, b)
    with pytest.raises(OTError, match="already been used"):
        derandomize_transfer(s_mat, r_mat, m0, m1, b)


def test_closed_peer_aborts():
    a, b = loopback_pair()
    b.close()
    with pytest.raises(ProtocolAbort):
        DealerOT().receive(Channel(a, "client"), [0, 1])
