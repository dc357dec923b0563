"""1-out-of-2 OT of 128-bit messages.

Messages are arrays of shape (count, 2) uint64 (one 16-byte block per row).
Every backend exposes ``send(channel, m0, m1)`` for the sender and
``receive(channel, choices)`` for the receiver; all traffic rides OtMsg
frames.
"""

from __future__ import annotations

import hashlib
import struct

import gmpy2
import numpy as np

from ..errors import OTError, ProtocolAbort
from ..params import OtGroup, safe_prime
from ..rng import Rng
from ..wire import Channel, FrameType

BLOCK = 16


def blocks_to_bytes(blocks: np.ndarray) -> bytes:
    return np.ascontiguousarray(blocks, dtype="<u8").tobytes()


def bytes_to_blocks(data: bytes, count: int) -> np.ndarray:
    if len(data) != BLOCK * count:
        raise OTError(f"expected {count} blocks, got {len(data)} bytes")
    return np.frombuffer(data, dtype="<u8").reshape(count, 2).astype(np.uint64)


def pack_bits(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    return struct.pack("<I", len(bits)) + np.packbits(bits, bitorder="little").tobytes()


def unpack_bits(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise OTError("truncated bit vector")
    (count,) = struct.unpack_from("<I", data)
    if len(data) != 4 + (count + 7) // 8:
        raise OTError("bit vector length mismatch")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=4), bitorder="little")[:count]


def encode_int(value: int) -> bytes:
    """Big-endian with a 2-byte length prefix."""
    body = int(value).to_bytes(max(1, (int(value).bit_length() + 7) // 8), "big")
    if len(body) > 0xFFFF:
        raise OTError("integer too large to encode")
    return len(body).to_bytes(2, "big") + body


def decode_ints(data: bytes) -> list[int]:
    out, off = [], 0
    while off < len(data):
        if off + 2 > len(data):
            raise OTError("truncated integer list")
        size = int.from_bytes(data[off:off + 2], "big")
        if off + 2 + size > len(data):
            raise OTError("truncated integer")
        out.append(int.from_bytes(data[off + 2:off + 2 + size], "big"))
        off += 2 + size
    return out


def _check_pairs(m0, m1) -> tuple[np.ndarray, np.ndarray]:
    m0 = np.asarray(m0, dtype=np.uint64)
    m1 = np.asarray(m1, dtype=np.uint64)
    if m0.shape != m1.shape or m0.ndim != 2 or m0.shape[1] != 2:
        raise OTError("sender messages must be two (count, 2) uint64 arrays")
    return m0, m1


class DealerOT:
    """Trusted-dealer stand-in for benchmarking: choices travel in the clear.

    The sender answers with the chosen blocks only, so the non-chosen message
    never appears on the receiver-bound direction. Offers no privacy for the
    receiver's choices; selected only explicitly.
    """

    name = "dealer"

    def send(self, channel: Channel, m0, m1) -> None:
        m0, m1 = _check_pairs(m0, m1)
        choices = unpack_bits(channel.recv(FrameType.OT_MSG))
        if len(choices) != len(m0):
            raise OTError(f"count mismatch: sender has {len(m0)}, receiver asked for {len(choices)}")
        chosen = np.where(choices[:, None].astype(bool), m1, m0)
        channel.send(FrameType.OT_MSG, blocks_to_bytes(chosen))

    def receive(self, channel: Channel, choices) -> np.ndarray:
        choices = np.asarray(choices, dtype=np.uint8)
        channel.send(FrameType.OT_MSG, pack_bits(choices))
        return bytes_to_blocks(channel.recv(FrameType.OT_MSG), len(choices))


class BaseOT:
    """Chou-Orlandi style base OT in the quadratic residues mod a safe prime.

    Sender: A = g^a. Receiver: B_i = g^b_i (choice 0) or A * g^b_i (choice 1),
    key H(A^b_i). Sender keys H(B_i^a) and H((B_i / A)^a). Toy-size group;
    not production secure.
    """

    name = "base"

    def __init__(self, group: OtGroup | None = None, rng: Rng | None = None):
        self.group = group or OtGroup(safe_prime())
        self.rng = rng or Rng()

    def _key(self, index: int, A, B, point) -> np.ndarray:
        size = self.group.element_bytes
        h = hashlib.sha256(b"hybridpi/ot-key" + index.to_bytes(8, "little"))
        for v in (A, B, point):
            h.update(int(v).to_bytes(size, "big"))
        return np.frombuffer(h.digest()[:BLOCK], dtype="<u8")

    def _exponent(self) -> gmpy2.mpz:
        return gmpy2.mpz(1 + self.rng.randbelow(self.group.order - 1))

    def send(self, channel: Channel, m0, m1) -> None:
        m0, m1 = _check_pairs(m0, m1)
        P = gmpy2.mpz(self.group.prime)
        a = self._exponent()
        A = gmpy2.powmod(self.group.generator, a, P)
        channel.send(FrameType.OT_MSG, encode_int(A))
        Bs = decode_ints(channel.recv(FrameType.OT_MSG))
        if len(Bs) != len(m0):
            raise OTError(f"count mismatch: sender has {len(m0)}, receiver sent {len(Bs)}")
        Aa_inv = gmpy2.invert(gmpy2.powmod(A, a, P), P)
        out = np.empty((len(Bs), 2, 2), dtype=np.uint64)
        for i, B in enumerate(Bs):
            if not self.group.contains(B):
                raise OTError(f"receiver element {i} is not in the group")
            Ba = gmpy2.powmod(B, a, P)
            out[i, 0] = m0[i] ^ self._key(i, A, B, Ba)
            out[i, 1] = m1[i] ^ self._key(i, A, B, Ba * Aa_inv % P)
        channel.send(FrameType.OT_MSG, blocks_to_bytes(out))

    def receive(self, channel: Channel, choices) -> np.ndarray:
        choices = np.asarray(choices, dtype=np.uint8)
        P = gmpy2.mpz(self.group.prime)
        (A,) = decode_ints(channel.recv(FrameType.OT_MSG)) or [0]
        if not self.group.contains(A):
            raise OTError("sender element is not in the group")
        A = gmpy2.mpz(A)
        exps, Bs = [], []
        for c in choices:
            b = self._exponent()
            B = gmpy2.powmod(self.group.generator, b, P)
            if c:
                B = B * A % P
            exps.append(b)
            Bs.append(B)
        channel.send(FrameType.OT_MSG, b"".join(encode_int(B) for B in Bs))
        data = channel.recv(FrameType.OT_MSG)
        if len(data) != 2 * BLOCK * len(choices):
            raise OTError("sender ciphertext count mismatch")
        enc = np.frombuffer(data, dtype="<u8").reshape(len(choices), 2, 2)
        out = np.empty((len(choices), 2), dtype=np.uint64)
        for i, (c, b, B) in enumerate(zip(choices, exps, Bs)):
            out[i] = enc[i, c] ^ self._key(i, A, B, gmpy2.powmod(A, b, P))
        return out


def make_backend(name: str, group: OtGroup | None = None, rng: Rng | None = None):
    if name == "dealer":
        return DealerOT()
    if name == "base":
        return BaseOT(group, rng)
    raise OTError(f"unknown OT backend {name!r}")


# ---------------------------------------------------------------------------
# random OT precompute + derandomization


class RandomOtSender:
    """Sender side of precomputed random OTs: pairs (r0, r1)."""

    def __init__(self, r0: np.ndarray, r1: np.ndarray):
        self.r0, self.r1 = r0, r1
        self.consumed = False

    @property
    def count(self) -> int:
        return len(self.r0)

    def nbytes(self) -> int:
        return self.r0.nbytes + self.r1.nbytes


class RandomOtReceiver:
    """Receiver side: random choice bits c and r_c."""

    def __init__(self, c: np.ndarray, rc: np.ndarray):
        self.c, self.rc = c, rc
        self.consumed = False

    @property
    def count(self) -> int:
        return len(self.c)

    def nbytes(self) -> int:
        return self.rc.nbytes + (len(self.c) + 7) // 8


def _consume(material) -> None:
    if material.consumed:
        raise OTError("random OT material has already been used")
    material.consumed = True


def ot_precompute_send(backend, channel: Channel, count: int, rng: Rng) -> RandomOtSender:
    r0, r1 = rng.uint64((count, 2)), rng.uint64((count, 2))
    backend.send(channel, r0, r1)
    return RandomOtSender(r0, r1)


def ot_precompute_receive(backend, channel: Channel, count: int, rng: Rng) -> RandomOtReceiver:
    c = rng.bits(count)
    return RandomOtReceiver(c, backend.receive(channel, c))


def derandomize_receive(channel: Channel, material: RandomOtReceiver, choices,
                        ftype: FrameType = FrameType.CORRECTION_BITS) -> np.ndarray:
    """Send d = b ^ c, then unmask m_b = e_b ^ r_c."""
    choices = np.asarray(choices, dtype=np.uint8)
    if len(choices) != material.count:
        raise OTError(f"count mismatch: {len(choices)} choices for {material.count} random OTs")
    _consume(material)
    channel.send(ftype, pack_bits(choices ^ material.c))
    data = channel.recv(FrameType.OT_MSG)
    if len(data) != 2 * BLOCK * material.count:
        raise OTError("derandomization reply has the wrong length")
    enc = np.frombuffer(data, dtype="<u8").reshape(material.count, 2, 2)
    return enc[np.arange(material.count), choices] ^ material.rc


def derandomize_send(channel: Channel, material: RandomOtSender, m0, m1,
                     ftype: FrameType = FrameType.CORRECTION_BITS) -> None:
    """Reply (m0 ^ r_d, m1 ^ r_{1^d})."""
    m0, m1 = _check_pairs(m0, m1)
    if len(m0) != material.count:
        raise OTError(f"count mismatch: {len(m0)} pairs for {material.count} random OTs")
    _consume(material)
    d = unpack_bits(channel.recv(ftype))
    if len(d) != material.count:
        raise OTError("correction bit count mismatch")
    sel = d[:, None].astype(bool)
    out = np.empty((material.count, 2, 2), dtype=np.uint64)
    out[:, 0] = m0 ^ np.where(sel, material.r1, material.r0)
    out[:, 1] = m1 ^ np.where(sel, material.r0, material.r1)
    channel.send(FrameType.OT_MSG, blocks_to_bytes(out))


# ---------------------------------------------------------------------------
# in-process convenience


def _run_pair(sender_fn, receiver_fn):
    """Run the two sides on a loopback pair, sender in a helper thread."""
    import threading

    from ..wire import loopback_channels

    rx_chan, tx_chan = loopback_channels()
    failure: list[BaseException] = []

    def sender():
        try:
            sender_fn(tx_chan)
        except BaseException as exc:  # surfaced in the caller
            failure.append(exc)
            tx_chan.close()

    t = threading.Thread(target=sender, daemon=True)
    t.start()
    try:
        result = receiver_fn(rx_chan)
    except BaseException:
        rx_chan.close()
        t.join()
        if failure and not isinstance(failure[0], ProtocolAbort):
            raise failure[0] from None
        raise
    t.join()
    rx_chan.close()
    tx_chan.close()
    if failure:
        raise failure[0]
    return result


def ot_transfer(backend, m0, m1, choices) -> np.ndarray:
    """Run one OT batch end to end in-process; returns the receiver's outputs."""
    m0, m1 = _check_pairs(m0, m1)
    if len(np.asarray(choices)) != len(m0):
        raise OTError("count mismatch between pairs and choices")
    return _run_pair(lambda ch: backend.send(ch, m0, m1), lambda ch: backend.receive(ch, choices))


def random_ot_transfer(backend, count: int, rng: Rng) -> tuple[RandomOtSender, RandomOtReceiver]:
    holder = {}

    def sender(ch):
        holder["s"] = ot_precompute_send(backend, ch, count, rng.derive("sender"))

    recv = _run_pair(sender, lambda ch: ot_precompute_receive(backend, ch, count, rng.derive("receiver")))
    return holder["s"], recv


def derandomize_transfer(sender_mat: RandomOtSender, receiver_mat: RandomOtReceiver,
                         m0, m1, choices) -> np.ndarray:
    return _run_pair(lambda ch: derandomize_send(ch, sender_mat, m0, m1),
                     lambda ch: derandomize_receive(ch, receiver_mat, choices))
