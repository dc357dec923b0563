"""Two-party offline/online protocol for both garbler placements.

Linear layer i: the client sends E(r_i) offline; the server returns
E(W_i r_i - s_i) and the client decrypts its share. Online the server
computes W_i (x_i - r_i) + s_i + b_i. Between linear layers a garbled ReLU
block turns the two shares of y_i into x_{i+1} - r_{i+1}, which the server
decodes. In the server-garbler variant the client evaluates; in the
client-garbler variant the client garbles and the server evaluates, with
the server's online-only input delivered by precomputed random OT.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import CircuitError, ConfigError, ProtocolAbort
from ..gc import BooleanCircuit, build_relu_block, evaluate_batch, garble_batch, lsb, relu_width
from ..he import (
    Ciphertext,
    MatvecPlan,
    SecretKey,
    decrypt_blocks,
    encrypt_blocks,
    keygen,
)
from ..nn import Model
from ..ot import (
    BaseOT,
    DealerOT,
    RandomOtReceiver,
    RandomOtSender,
    derandomize_receive,
    derandomize_send,
    ot_precompute_receive,
    ot_precompute_send,
)
from ..params import HeParams, OtGroup, safe_prime
from ..rng import Rng, parse_seed
from ..sharing import sample_mask, server_online_linear
from ..wire import Channel, FrameType, Meters
from .lphe import HeJob, lphe_schedule

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
VARIANTS = ("server_garbler", "client_garbler")
OT_BACKENDS = ("base", "dealer")
_HELLO = struct.Struct("<HB32s16s")
_LAYER_BLOCK = struct.Struct("<HHH")
_GC_HEAD = struct.Struct("<HII")
_LABEL_HEAD = struct.Struct("<HIH")
_VEC_HEAD = struct.Struct("<HI")
_METER_REPORT = struct.Struct("<QQQQQ")


def normalize_variant(name: str) -> str:
    v = name.replace("-", "_")
    if v not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}; choose server-garbler or client-garbler")
    return v


@dataclass(frozen=True)
class SessionConfig:
    he: HeParams
    variant: str = "server_garbler"
    ot_backend: str = "base"
    ot_group: OtGroup | None = None
    workers: int = 1
    seed: bytes = bytes(32)

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        object.__setattr__(self, "seed", parse_seed(self.seed))
        if self.ot_backend not in OT_BACKENDS:
            raise ConfigError(f"unknown OT backend {self.ot_backend!r}")
        if self.workers < 1:
            raise ConfigError("worker count must be at least 1")
        if self.ot_group is None:
            object.__setattr__(self, "ot_group", OtGroup(safe_prime()))

    @property
    def client_garbler(self) -> bool:
        return self.variant == "client_garbler"

    def config_hash(self, topology: Topology) -> bytes:
        """Binds model topology, HE params, OT setup and protocol version."""
        h = hashlib.sha256(b"hybridpi/session-config\x00")
        h.update(topology.digest)
        h.update(self.he.digest)
        h.update(self.ot_backend.encode() + b"\x00")
        h.update(self.ot_group.prime.to_bytes(self.ot_group.element_bytes, "big"))
        h.update(self.ot_group.generator.to_bytes(4, "big"))
        return h.digest()


@dataclass(frozen=True)
class Topology:
    """What the client needs to know about the model: shapes only."""

    p: int
    dims: tuple[tuple[int, int], ...]  # (rows, cols) per linear layer
    relu_shifts: tuple[int, ...]
    digest: bytes

    @classmethod
    def of(cls, model: Model) -> Topology:
        return cls(model.p, tuple((lay.rows, lay.cols) for lay in model.linear),
                   tuple(model.relu_shifts), model.topology_hash())

    @property
    def n_linear(self) -> int:
        return len(self.dims)


def _nbytes(obj) -> int:
    if obj is None:
        return 0
    if isinstance(obj, np.ndarray):
        return int(obj.nbytes)
    if isinstance(obj, (RandomOtSender, RandomOtReceiver)):
        return obj.nbytes()
    if isinstance(obj, dict):
        return sum(_nbytes(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return sum(_nbytes(v) for v in obj)
    raise TypeError(f"cannot size {type(obj).__name__}")


@dataclass
class OfflineBundle:
    """Everything one party keeps between the offline and online phases."""

    role: str
    variant: str
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    relu: list[dict] = field(default_factory=list)
    consumed: bool = False

    def nbytes(self) -> int:
        return _nbytes(self.vectors) + _nbytes(self.relu)

    def breakdown(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for k, v in self.vectors.items():
            out[k] = out.get(k, 0) + _nbytes(v)
        for layer in self.relu:
            for k, v in layer.items():
                out[k] = out.get(k, 0) + _nbytes(v)
        return out

    def take(self) -> None:
        if self.consumed:
            raise ProtocolAbort("offline bundle already consumed by an earlier online run")
        self.consumed = True


# ---------------------------------------------------------------------------
# helpers


@lru_cache(maxsize=64)
def relu_circuit(p: int, f: int, client_garbler: bool) -> BooleanCircuit:
    return build_relu_block(p, f, client_garbler)


def to_bits(values: np.ndarray, k: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    return ((v[:, None] >> np.arange(k)) & 1).astype(np.uint8)


def from_bits(bits: np.ndarray) -> np.ndarray:
    return (bits.astype(np.int64) << np.arange(bits.shape[-1])).sum(axis=-1)


def _select(bits: np.ndarray, delta: np.ndarray) -> np.ndarray:
    mask = np.uint64(0) - bits.astype(np.uint64)
    return mask[..., None] & delta


def _labels_to_bytes(layer: int, labels: np.ndarray) -> bytes:
    count, width, _ = labels.shape
    return _LABEL_HEAD.pack(layer, count, width) + np.ascontiguousarray(labels, dtype="<u8").tobytes()


def _labels_from_bytes(data: bytes, layer: int, count: int, width: int) -> np.ndarray:
    got = _LABEL_HEAD.unpack_from(data)
    if got != (layer, count, width) or len(data) != _LABEL_HEAD.size + 16 * count * width:
        raise ProtocolAbort(f"label batch for layer {layer} has unexpected shape {got}")
    return np.frombuffer(data, dtype="<u8", offset=_LABEL_HEAD.size).reshape(count, width, 2).astype(np.uint64)


def _vec_to_bytes(layer: int, values: np.ndarray) -> bytes:
    v = np.asarray(values, dtype="<u4")
    return _VEC_HEAD.pack(layer, len(v)) + v.tobytes()


def _vec_from_bytes(data: bytes, layer: int, length: int, p: int) -> np.ndarray:
    got = _VEC_HEAD.unpack_from(data)
    if got != (layer, length) or len(data) != _VEC_HEAD.size + 4 * length:
        raise ProtocolAbort(f"share vector for layer {layer} has unexpected header {got}")
    v = np.frombuffer(data, dtype="<u4", offset=_VEC_HEAD.size).astype(np.int64)
    if v.size and v.max() >= p:
        raise ProtocolAbort(f"share vector for layer {layer} has entries outside Z_p")
    return v


def _tweak_base(layer: int) -> int:
    return layer << 32


def _ot_backend(config: SessionConfig, rng: Rng):
    if config.ot_backend == "dealer":
        return DealerOT()
    return BaseOT(config.ot_group, rng)


class _Party:
    role = ""

    def __init__(self, config: SessionConfig, topology: Topology, channel: Channel):
        if channel.role != self.role:
            raise ConfigError(f"{self.role} session needs a {self.role} channel")
        if topology.p != config.he.p:
            raise ConfigError(f"model modulus {topology.p} differs from HE plaintext modulus {config.he.p}")
        self.config = config
        self.topology = topology
        self.channel = channel
        self.rng = Rng(config.seed).derive(self.role)
        self.nonce = self.rng.derive("hello-nonce").bytes(16)
        self.peer_nonce: bytes | None = None
        self.k = relu_width(topology.p)

    @property
    def meters(self) -> Meters:
        return self.channel.meters

    def handshake(self) -> None:
        ch = self.channel
        ch.phase = "setup"
        mine = self.config.config_hash(self.topology)
        ch.send(FrameType.HELLO, _HELLO.pack(PROTOCOL_VERSION, VARIANTS.index(self.config.variant),
                                             mine, self.nonce))
        data = ch.recv(FrameType.HELLO)
        try:
            version, variant, theirs, nonce = _HELLO.unpack(data)
        except struct.error as exc:
            raise ProtocolAbort("malformed Hello") from exc
        if version != PROTOCOL_VERSION:
            raise ProtocolAbort(f"peer speaks protocol version {version}, expected {PROTOCOL_VERSION}")
        if variant != VARIANTS.index(self.config.variant):
            peer = VARIANTS[variant] if variant < len(VARIANTS) else str(variant)
            raise ProtocolAbort(f"variant mismatch: local {self.config.variant}, peer {peer}")
        if theirs != mine:
            raise ProtocolAbort("topology/parameter hash mismatch between peers")
        self.peer_nonce = nonce

    @property
    def gc_key(self) -> bytes:
        if self.peer_nonce is None:
            raise ProtocolAbort("handshake has not run")
        client, server = ((self.nonce, self.peer_nonce) if self.role == "client"
                          else (self.peer_nonce, self.nonce))
        return hashlib.sha256(b"hybridpi/gc-key\x00" + client + server).digest()[:16]

    def relu_circuit(self, layer: int) -> BooleanCircuit:
        return relu_circuit(self.topology.p, self.topology.relu_shifts[layer], self.config.client_garbler)

    @contextmanager
    def _timed(self, name: str):
        key = f"{self.role}/{name}"
        start = time.perf_counter()
        try:
            yield
        finally:
            t = self.meters.timings
            t[key] = t.get(key, 0.0) + time.perf_counter() - start


# ---------------------------------------------------------------------------
# client


class ClientSession(_Party):
    role = "client"

    def offline(self) -> OfflineBundle:
        cfg, top, ch = self.config, self.topology, self.channel
        p, he, k = top.p, cfg.he, self.k
        bundle = OfflineBundle("client", cfg.variant)
        with self._timed("offline"):
            ch.phase = "offline"
            ch.send(FrameType.PARAMS, he.to_bytes())
            sk: SecretKey = keygen(he, self.rng.derive("he-key"))
            plans = [MatvecPlan.for_shape(rows, cols, he.n) for rows, cols in top.dims]
            r = [sample_mask(cols, p, self.rng.derive("r", i)) for i, (_, cols) in enumerate(top.dims)]
            for i, plan in enumerate(plans):
                cts = encrypt_blocks(r[i], plan, sk, self.rng.derive("he-enc", i))
                for j, ct in enumerate(cts):
                    ch.send(FrameType.HE_CIPHERTEXT, _LAYER_BLOCK.pack(i, j, len(cts)) + ct.to_bytes())
            yc = []
            for i, plan in enumerate(plans):
                cts = []
                for j in range(plan.n_row_chunks):
                    data = ch.recv(FrameType.HE_CIPHERTEXT)
                    if _LAYER_BLOCK.unpack_from(data) != (i, j, plan.n_row_chunks):
                        raise ProtocolAbort(f"unexpected HE result header for layer {i}")
                    cts.append(Ciphertext.from_bytes(data[_LAYER_BLOCK.size:], he))
                yc.append(decrypt_blocks(cts, plan, sk, strict=False))

            backend = _ot_backend(cfg, self.rng.derive("ot"))
            for i in range(top.n_linear - 1):
                count = top.dims[i][0]
                circuit = self.relu_circuit(i)
                a_bits, m_bits = to_bits(yc[i], k), to_bits(r[i + 1], k)
                if cfg.client_garbler:
                    batch = garble_batch(circuit, count, self.rng.derive("garble", i),
                                         key=self.gc_key, tweak_base=_tweak_base(i))
                    ch.send(FrameType.GC_TABLES, _GC_HEAD.pack(i, count, circuit.and_count)
                            + batch.table_bytes())
                    # wire order a | m | b
                    am_bits = np.concatenate([a_bits, m_bits], axis=1)
                    am = batch.zero_labels[:, :2 * k] ^ _select(am_bits, batch.delta)
                    ch.send(FrameType.LABEL_BATCH, _labels_to_bytes(i, am))
                    rot = ot_precompute_send(backend, ch, count * k, self.rng.derive("rot", i))
                    bundle.relu.append({
                        "b_zero_labels": batch.zero_labels[:, 2 * k:].copy(),
                        "delta": batch.delta.copy(),
                        "decode_bits": np.packbits(batch.decode_bits, bitorder="little"),
                        "random_ot": rot,
                    })
                else:
                    data = ch.recv(FrameType.GC_TABLES)
                    if _GC_HEAD.unpack_from(data) != (i, count, circuit.and_count):
                        raise ProtocolAbort(f"unexpected garbled table header for layer {i}")
                    body = data[_GC_HEAD.size:]
                    if len(body) != 32 * count * circuit.and_count:
                        raise ProtocolAbort(f"garbled tables for layer {i} have the wrong length")
                    tables = np.frombuffer(body, dtype="<u8").reshape(
                        count, circuit.and_count, 2, 2).astype(np.uint64)
                    choices = np.concatenate([a_bits, m_bits], axis=1).ravel()
                    labels = backend.receive(ch, choices).reshape(count, 2 * k, 2)
                    bundle.relu.append({"tables": tables, "am_labels": labels})
            bundle.vectors["r0"] = r[0].astype(np.uint32)
            bundle.vectors["y_last_client"] = yc[-1].astype(np.uint32)
        self.meters.storage["client"] = bundle.nbytes()
        return bundle

    def online(self, bundle: OfflineBundle, x) -> np.ndarray:
        cfg, top, ch = self.config, self.topology, self.channel
        p, k = top.p, self.k
        if bundle.role != "client" or bundle.variant != cfg.variant:
            raise ProtocolAbort("bundle does not belong to this client configuration")
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (top.dims[0][1],):
            raise ConfigError(f"input has shape {x.shape}, model expects ({top.dims[0][1]},)")
        if x.size and (x.min() < 0 or x.max() >= p):
            raise ConfigError("input entries must lie in [0, p)")
        bundle.take()
        with self._timed("online"):
            ch.phase = "online"
            r0 = bundle.vectors["r0"].astype(np.int64)
            ch.send(FrameType.SHARE_VECTOR, _vec_to_bytes(0, (x - r0) % p))
            for i, mat in enumerate(bundle.relu):
                count = top.dims[i][0]
                circuit = self.relu_circuit(i)
                if cfg.client_garbler:
                    zero = mat["b_zero_labels"].reshape(count * k, 2)
                    derandomize_send(ch, mat["random_ot"], zero, zero ^ mat["delta"])
                    ch.send(FrameType.DECODE_INFO, _VEC_HEAD.pack(i, count * k) + mat["decode_bits"].tobytes())
                else:
                    b_labels = _labels_from_bytes(ch.recv(FrameType.LABEL_BATCH), i, count, k)
                    active = np.concatenate([b_labels, mat["am_labels"]], axis=1)
                    out = evaluate_batch(circuit, mat["tables"], active, key=self.gc_key,
                                         tweak_base=_tweak_base(i))
                    ch.send(FrameType.LABEL_BATCH, _labels_to_bytes(i, out))
            last = top.n_linear - 1
            ys = _vec_from_bytes(ch.recv(FrameType.RESULT), last, top.dims[last][0], p)
            result = (bundle.vectors["y_last_client"].astype(np.int64) + ys) % p
            ch.phase = "report"
            data = ch.recv(FrameType.METER_REPORT)
        server_storage, off_up, off_down, on_up, on_down = _METER_REPORT.unpack(data)
        mine = (self.meters.total("up", "offline"), self.meters.total("down", "offline"),
                self.meters.total("up", "online"), self.meters.total("down", "online"))
        if mine != (off_up, off_down, on_up, on_down):
            raise ProtocolAbort(f"byte counters disagree with the server: {mine} vs "
                                f"{(off_up, off_down, on_up, on_down)}")
        self.meters.storage["server"] = server_storage
        return result


# ---------------------------------------------------------------------------
# server


class ServerSession(_Party):
    role = "server"

    def __init__(self, config: SessionConfig, model: Model, channel: Channel):
        super().__init__(config, Topology.of(model), channel)
        self.model = model

    def offline(self) -> OfflineBundle:
        cfg, top, ch, model = self.config, self.topology, self.channel, self.model
        p, he, k = top.p, cfg.he, self.k
        bundle = OfflineBundle("server", cfg.variant)
        with self._timed("offline"):
            ch.phase = "offline"
            if ch.recv(FrameType.PARAMS) != he.to_bytes():
                raise ProtocolAbort("client HE parameters differ from the server's")
            plans = [MatvecPlan.for_shape(rows, cols, he.n) for rows, cols in top.dims]
            inputs = []
            for i, plan in enumerate(plans):
                blocks = []
                for j in range(plan.n_col_blocks):
                    data = ch.recv(FrameType.HE_CIPHERTEXT)
                    if _LAYER_BLOCK.unpack_from(data) != (i, j, plan.n_col_blocks):
                        raise ProtocolAbort(f"unexpected HE ciphertext header for layer {i}")
                    blocks.append(data[_LAYER_BLOCK.size:])
                inputs.append(tuple(blocks))
            s = [sample_mask(rows, p, self.rng.derive("s", i)) for i, (rows, _) in enumerate(top.dims)]
            jobs = [HeJob(i, he, lay.weight, inputs[i], s[i], self.rng.derive("he-mask", i).seed)
                    for i, lay in enumerate(model.linear)]
            with self._timed("lphe"):
                results = lphe_schedule(jobs, cfg.workers)
            for i, res in enumerate(results):
                for j, ct in enumerate(res.outputs):
                    ch.send(FrameType.HE_CIPHERTEXT, _LAYER_BLOCK.pack(i, j, len(res.outputs)) + ct)

            backend = _ot_backend(cfg, self.rng.derive("ot"))
            for i in range(top.n_linear - 1):
                count = top.dims[i][0]
                circuit = self.relu_circuit(i)
                if cfg.client_garbler:
                    data = ch.recv(FrameType.GC_TABLES)
                    if _GC_HEAD.unpack_from(data) != (i, count, circuit.and_count):
                        raise ProtocolAbort(f"unexpected garbled table header for layer {i}")
                    body = data[_GC_HEAD.size:]
                    if len(body) != 32 * count * circuit.and_count:
                        raise ProtocolAbort(f"garbled tables for layer {i} have the wrong length")
                    tables = np.frombuffer(body, dtype="<u8").reshape(
                        count, circuit.and_count, 2, 2).astype(np.uint64)
                    am = _labels_from_bytes(ch.recv(FrameType.LABEL_BATCH), i, count, 2 * k)
                    rot = ot_precompute_receive(backend, ch, count * k, self.rng.derive("rot", i))
                    bundle.relu.append({"tables": tables, "am_labels": am, "random_ot": rot})
                else:
                    batch = garble_batch(circuit, count, self.rng.derive("garble", i),
                                         key=self.gc_key, tweak_base=_tweak_base(i))
                    ch.send(FrameType.GC_TABLES, _GC_HEAD.pack(i, count, circuit.and_count)
                            + batch.table_bytes())
                    # wire order b | a | m
                    zero = batch.zero_labels[:, k:].reshape(count * 2 * k, 2)
                    backend.send(ch, zero, zero ^ batch.delta)
                    bundle.relu.append({
                        "b_zero_labels": batch.zero_labels[:, :k].copy(),
                        "delta": batch.delta.copy(),
                        "out_zero_labels": batch.output_zero,
                    })
            for i, si in enumerate(s):
                bundle.vectors[f"s{i}"] = si.astype(np.uint32)
        self.meters.storage["server"] = bundle.nbytes()
        return bundle

    def online(self, bundle: OfflineBundle) -> None:
        cfg, top, ch, model = self.config, self.topology, self.channel, self.model
        p, k = top.p, self.k
        if bundle.role != "server" or bundle.variant != cfg.variant:
            raise ProtocolAbort("bundle does not belong to this server configuration")
        bundle.take()
        with self._timed("online"):
            ch.phase = "online"
            xr = _vec_from_bytes(ch.recv(FrameType.SHARE_VECTOR), 0, top.dims[0][1], p)
            lay = model.linear[0]
            y = server_online_linear(lay.weight, lay.bias, xr, bundle.vectors["s0"], p, 0).values
            for i, mat in enumerate(bundle.relu):
                count = top.dims[i][0]
                circuit = self.relu_circuit(i)
                b_bits = to_bits(y, k)
                if cfg.client_garbler:
                    b_labels = derandomize_receive(ch, mat["random_ot"], b_bits.ravel()).reshape(count, k, 2)
                    data = ch.recv(FrameType.DECODE_INFO)
                    if _VEC_HEAD.unpack_from(data) != (i, count * k):
                        raise ProtocolAbort(f"unexpected decode info header for layer {i}")
                    dbits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=_VEC_HEAD.size),
                                          bitorder="little")[:count * k]
                    if len(dbits) != count * k:
                        raise ProtocolAbort(f"decode info for layer {i} is truncated")
                    active = np.concatenate([mat["am_labels"], b_labels], axis=1)
                    try:
                        out = evaluate_batch(circuit, mat["tables"], active, key=self.gc_key,
                                             tweak_base=_tweak_base(i))
                    except CircuitError as exc:
                        raise ProtocolAbort(f"layer {i}: garbled evaluation failed: {exc}") from exc
                    bits = lsb(out) ^ dbits.reshape(count, k)
                else:
                    labels = mat["b_zero_labels"] ^ _select(b_bits, mat["delta"])
                    ch.send(FrameType.LABEL_BATCH, _labels_to_bytes(i, labels))
                    out = _labels_from_bytes(ch.recv(FrameType.LABEL_BATCH), i, count, k)
                    zero = mat["out_zero_labels"]
                    bits = lsb(out) ^ lsb(zero)
                    if not np.array_equal(out, zero ^ _select(bits, mat["delta"])):
                        raise ProtocolAbort(f"layer {i}: returned output label is not a valid label")
                xr = from_bits(bits)
                if xr.size and xr.max() >= p:
                    raise ProtocolAbort(f"layer {i}: decoded value outside Z_p")
                lay = model.linear[i + 1]
                y = server_online_linear(lay.weight, lay.bias, xr, bundle.vectors[f"s{i + 1}"],
                                         p, i + 1).values
            ch.send(FrameType.RESULT, _vec_to_bytes(top.n_linear - 1, y))
        ch.phase = "report"
        m = self.meters
        ch.send(FrameType.METER_REPORT, _METER_REPORT.pack(
            m.storage.get("server", 0),
            m.total("up", "offline"), m.total("down", "offline"),
            m.total("up", "online"), m.total("down", "online")))
