"""Free-XOR + half-gates garbling.

Labels are 128-bit blocks held as pairs of little-endian uint64 words
``[..., 0] = low, [..., 1] = high``; the point-and-permute bit is the lowest
bit of the low word. Garbling and evaluation run level by level over the
circuit's dependence graph and vectorize across both the gates of a level and
a batch of independent instances of the same circuit (one ReLU per instance).

The gate hash is H(W, j) = pi(2W ^ j) ^ 2W ^ j, where pi is AES-128 under a
session key, 2W is doubling in GF(2^128), and the tweak j is
(low = 2 * gate_index + half, high = tweak_base + instance).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..errors import CircuitError
from ..rng import Rng
from .circuit import BooleanCircuit, GateKind

LABEL_BYTES = 16
TABLE_ROW_BYTES = 2 * LABEL_BYTES
DEFAULT_KEY = hashlib.sha256(b"hybridpi/gc-hash-key").digest()[:16]
_GC_MAGIC = b"HPGC"
_GC_VERSION = 1
_GC_HEADER = struct.Struct("<4sHIIQ16s")

_ONE = np.uint64(1)
_SHIFT = np.uint64(63)
_POLY = np.uint64(0x87)


def _double(x: np.ndarray) -> np.ndarray:
    lo, hi = x[..., 0], x[..., 1]
    out = np.empty_like(x)
    out[..., 1] = (hi << _ONE) | (lo >> _SHIFT)
    out[..., 0] = (lo << _ONE) ^ ((hi >> _SHIFT) * _POLY)
    return out


def lsb(x: np.ndarray) -> np.ndarray:
    return (x[..., 0] & _ONE).astype(np.uint8)


def _select(bits: np.ndarray, block: np.ndarray) -> np.ndarray:
    """bits[...] * block, with bits broadcast over the two words."""
    mask = np.uint64(0) - bits.astype(np.uint64)
    return block & mask[..., None]


class TweakHash:
    def __init__(self, key: bytes = DEFAULT_KEY):
        if len(key) != 16:
            raise ValueError("hash key must be 16 bytes")
        self.key = key
        self._aes = Cipher(algorithms.AES(key), modes.ECB()).encryptor()

    def __call__(self, w: np.ndarray, tweak_lo: np.ndarray, tweak_hi: np.ndarray) -> np.ndarray:
        x = _double(w)
        x[..., 0] ^= tweak_lo
        x[..., 1] ^= tweak_hi
        flat = np.ascontiguousarray(x, dtype="<u8")
        enc = np.frombuffer(self._aes.update(flat.tobytes()), dtype="<u8").reshape(x.shape)
        return enc ^ x


@dataclass
class GarbledBatch:
    """Garbled material for ``count`` instances of one circuit."""

    tables: np.ndarray  # (count, and_count, 2, 2) uint64  rows: (T_G, T_E)
    zero_labels: np.ndarray  # (count, n_inputs, 2) in circuit.inputs order
    output_zero: np.ndarray  # (count, n_outputs, 2)
    delta: np.ndarray  # (2,)
    key: bytes
    tweak_base: int

    @property
    def count(self) -> int:
        return self.tables.shape[0]

    @property
    def decode_bits(self) -> np.ndarray:
        return lsb(self.output_zero)

    def table_bytes(self) -> bytes:
        return np.ascontiguousarray(self.tables, dtype="<u8").tobytes()


def _tweaks(gates: np.ndarray, half: int, count: int, base: int):
    lo = (gates * np.uint64(2) + np.uint64(half))[:, None]
    hi = (np.uint64(base) + np.arange(count, dtype=np.uint64))[None, :]
    return np.broadcast_to(lo, (len(gates), count)), np.broadcast_to(hi, (len(gates), count))


def random_delta(rng: Rng) -> np.ndarray:
    d = rng.uint64(2)
    d[0] |= _ONE
    return d


def garble_batch(circuit: BooleanCircuit, count: int, rng: Rng, delta: np.ndarray | None = None,
                 key: bytes = DEFAULT_KEY, tweak_base: int = 0) -> GarbledBatch:
    schedule = circuit.schedule  # validates
    if count < 1:
        raise CircuitError("batch must contain at least one instance")
    if delta is None:
        delta = random_delta(rng)
    delta = np.asarray(delta, dtype=np.uint64)
    if not delta[0] & _ONE:
        raise CircuitError("free-XOR delta must have its lowest bit set")
    H = TweakHash(key)
    inputs = np.array(circuit.inputs, dtype=np.int64)
    L = np.zeros((circuit.wire_count, count, 2), dtype=np.uint64)
    zero = rng.uint64((count, len(inputs), 2))
    L[inputs] = zero.transpose(1, 0, 2)
    tables = np.zeros((count, circuit.and_count, 2, 2), dtype=np.uint64)

    for step in schedule:
        g = step.get(GateKind.XOR)
        if g is not None:
            L[g["out"]] = L[g["in1"]] ^ L[g["in2"]]
        g = step.get(GateKind.INV)
        if g is not None:
            L[g["out"]] = L[g["in1"]] ^ delta
        g = step.get(GateKind.CONST)
        if g is not None:
            # active label is the all-zero block whatever the constant is
            bits = g["in1"].astype(np.uint64)
            L[g["out"]] = _select(bits, np.broadcast_to(delta, (len(bits), 2)))[:, None, :]
        g = step.get(GateKind.AND)
        if g is not None:
            a0, b0 = L[g["in1"]], L[g["in2"]]
            pa, pb = lsb(a0), lsb(b0)
            j0 = _tweaks(g["gate"], 0, count, tweak_base)
            j1 = _tweaks(g["gate"], 1, count, tweak_base)
            blocks = np.stack([a0, a0 ^ delta, b0, b0 ^ delta])
            lo = np.stack([j0[0], j0[0], j1[0], j1[0]])
            hi = np.stack([j0[1], j0[1], j1[1], j1[1]])
            ha0, ha1, hb0, hb1 = H(blocks, lo, hi)
            tg = ha0 ^ ha1 ^ _select(pb, np.broadcast_to(delta, a0.shape))
            wg = ha0 ^ _select(pa, tg)
            te = hb0 ^ hb1 ^ a0
            we = hb0 ^ _select(pb, te ^ a0)
            L[g["out"]] = wg ^ we
            tables[:, g["and"], 0] = tg.transpose(1, 0, 2)
            tables[:, g["and"], 1] = te.transpose(1, 0, 2)

    outputs = np.array(circuit.outputs, dtype=np.int64)
    return GarbledBatch(tables, zero, L[outputs].transpose(1, 0, 2).copy(), delta, key, tweak_base)


def evaluate_batch(circuit: BooleanCircuit, tables: np.ndarray, active_inputs: np.ndarray,
                   key: bytes = DEFAULT_KEY, tweak_base: int = 0) -> np.ndarray:
    """Active output labels, shape (count, n_outputs, 2)."""
    schedule = circuit.schedule
    tables = np.asarray(tables, dtype=np.uint64)
    active_inputs = np.asarray(active_inputs, dtype=np.uint64)
    count = active_inputs.shape[0]
    if active_inputs.shape != (count, len(circuit.inputs), 2):
        raise CircuitError(
            f"expected active labels of shape ({count}, {len(circuit.inputs)}, 2), "
            f"got {active_inputs.shape}"
        )
    if tables.shape != (count, circuit.and_count, 2, 2):
        raise CircuitError(
            f"table length mismatch: circuit has {circuit.and_count} AND gates, "
            f"tables shaped {tables.shape}"
        )
    H = TweakHash(key)
    L = np.zeros((circuit.wire_count, count, 2), dtype=np.uint64)
    L[np.array(circuit.inputs, dtype=np.int64)] = active_inputs.transpose(1, 0, 2)
    for step in schedule:
        g = step.get(GateKind.XOR)
        if g is not None:
            L[g["out"]] = L[g["in1"]] ^ L[g["in2"]]
        g = step.get(GateKind.INV)
        if g is not None:
            L[g["out"]] = L[g["in1"]]
        g = step.get(GateKind.CONST)
        if g is not None:
            L[g["out"]] = 0
        g = step.get(GateKind.AND)
        if g is not None:
            a, b = L[g["in1"]], L[g["in2"]]
            sa, sb = lsb(a), lsb(b)
            j0 = _tweaks(g["gate"], 0, count, tweak_base)
            j1 = _tweaks(g["gate"], 1, count, tweak_base)
            ha, hb = H(np.stack([a, b]), np.stack([j0[0], j1[0]]), np.stack([j0[1], j1[1]]))
            rows = tables[:, g["and"]].transpose(1, 0, 2, 3)  # (G, count, 2, 2)
            tg, te = rows[:, :, 0], rows[:, :, 1]
            L[g["out"]] = ha ^ _select(sa, tg) ^ hb ^ _select(sb, te ^ a)
    return L[np.array(circuit.outputs, dtype=np.int64)].transpose(1, 0, 2).copy()


def decode(active_output_labels: np.ndarray, decode_bits: np.ndarray) -> np.ndarray:
    """bit_i = lsb(label_i) ^ decode_bit_i."""
    labels = np.asarray(active_output_labels, dtype=np.uint64)
    bits = np.asarray(decode_bits, dtype=np.uint8)
    if labels.shape[:-1] != bits.shape:
        raise CircuitError(f"decode length mismatch: {labels.shape[:-1]} labels vs {bits.shape} bits")
    return lsb(labels) ^ bits


# ---------------------------------------------------------------------------
# single-circuit interface


@dataclass
class GarbledCircuit:
    tables: np.ndarray  # (and_count, 2, 2)
    decode_bits: np.ndarray  # (n_outputs,)
    key: bytes = DEFAULT_KEY
    tweak_base: int = 0

    @property
    def gate_count_and(self) -> int:
        return self.tables.shape[0]

    @property
    def nbytes(self) -> int:
        return TABLE_ROW_BYTES * self.gate_count_and + (len(self.decode_bits) + 7) // 8

    def to_bytes(self) -> bytes:
        header = _GC_HEADER.pack(_GC_MAGIC, _GC_VERSION, self.gate_count_and,
                                 len(self.decode_bits), self.tweak_base, self.key)
        return (header + np.ascontiguousarray(self.tables, dtype="<u8").tobytes()
                + np.packbits(self.decode_bits, bitorder="little").tobytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> GarbledCircuit:
        try:
            magic, version, n_and, n_out, tweak, key = _GC_HEADER.unpack_from(data, 0)
        except struct.error as exc:
            raise CircuitError("truncated garbled circuit") from exc
        if magic != _GC_MAGIC or version != _GC_VERSION:
            raise CircuitError("bad garbled circuit header")
        off = _GC_HEADER.size
        need = off + TABLE_ROW_BYTES * n_and + (n_out + 7) // 8
        if len(data) != need:
            raise CircuitError(f"garbled circuit should be {need} bytes, got {len(data)}")
        tables = np.frombuffer(data, dtype="<u8", count=4 * n_and, offset=off).reshape(n_and, 2, 2)
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=off + TABLE_ROW_BYTES * n_and),
                             bitorder="little")[:n_out]
        return cls(tables.astype(np.uint64), bits, key, tweak)


@dataclass
class InputEncoding:
    """Garbler-secret input encoding: label_1 = label_0 ^ delta."""

    wires: list[int]
    zero_labels: np.ndarray  # (n_inputs, 2)
    delta: np.ndarray

    def pair(self, wire: int) -> tuple[np.ndarray, np.ndarray]:
        z = self.zero_labels[self.wires.index(wire)]
        return z, z ^ self.delta

    def encode(self, bits) -> np.ndarray:
        """Active labels for a full assignment of input bits, in ``wires`` order."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (len(self.wires),):
            raise CircuitError(f"expected {len(self.wires)} input bits")
        return self.zero_labels ^ _select(bits, np.broadcast_to(self.delta, self.zero_labels.shape))


def garble(circuit: BooleanCircuit, rng: Rng, key: bytes = DEFAULT_KEY,
           tweak_base: int = 0) -> tuple[GarbledCircuit, InputEncoding]:
    batch = garble_batch(circuit, 1, rng, key=key, tweak_base=tweak_base)
    gc = GarbledCircuit(batch.tables[0], batch.decode_bits[0], key, tweak_base)
    return gc, InputEncoding(list(circuit.inputs), batch.zero_labels[0], batch.delta)


def evaluate(circuit: BooleanCircuit, gc: GarbledCircuit, active_input_labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(active_input_labels, dtype=np.uint64)
    if gc.tables.shape != (circuit.and_count, 2, 2):
        raise CircuitError(
            f"table length mismatch: circuit has {circuit.and_count} AND gates, "
            f"got {gc.tables.shape[0]}"
        )
    return evaluate_batch(circuit, gc.tables[None], labels[None], gc.key, gc.tweak_base)[0]


def gc_size_report(circuit: BooleanCircuit) -> dict[str, int]:
    """Per-instance storage by role.

    The evaluator keeps the tables plus one active label per input wire; the
    garbler keeps decode bits, delta, and the zero labels of its own inputs
    (needed to send active labels online).
    """
    tables = TABLE_ROW_BYTES * circuit.and_count
    decode_bytes = (len(circuit.outputs) + 7) // 8
    return {
        "and_gates": circuit.and_count,
        "table_bytes": tables,
        "decode_bytes": decode_bytes,
        "evaluator_bytes": tables + LABEL_BYTES * len(circuit.inputs),
        "garbler_bytes": decode_bytes + LABEL_BYTES * (len(circuit.garbler_inputs) + 1),
    }
