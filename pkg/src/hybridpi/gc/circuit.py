"""Boolean circuits: representation, validation, plaintext evaluation, leveling
and the versioned binary circuit file."""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import NamedTuple

import numpy as np

from ..errors import CircuitError

CIRCUIT_MAGIC = b"HPCK"
CIRCUIT_VERSION = 1
_HEADER = struct.Struct("<4sHII")
_GATE = struct.Struct("<BIII")


class GateKind(IntEnum):
    XOR = 0
    AND = 1
    INV = 2
    CONST = 3  # in1 holds the constant bit


class Gate(NamedTuple):
    kind: GateKind
    in1: int
    in2: int
    out: int


@dataclass(frozen=True)
class LevelGraph:
    levels: np.ndarray  # level of each gate, by gate index
    max_level: int
    histogram: dict[int, int]


@dataclass(eq=False)
class BooleanCircuit:
    wire_count: int
    gates: list[Gate]
    garbler_inputs: list[int]
    evaluator_inputs: list[int]
    outputs: list[int]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        self.gates = [Gate(GateKind(g.kind), int(g.in1), int(g.in2), int(g.out)) for g in self.gates]

    @property
    def inputs(self) -> list[int]:
        return self.garbler_inputs + self.evaluator_inputs

    @cached_property
    def and_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == GateKind.AND)

    def counts(self) -> Counter:
        return Counter(g.kind.name for g in self.gates)

    def validate(self) -> None:
        """Check topological order and dense single-assignment wire ids."""
        defined = np.zeros(self.wire_count, dtype=bool)
        for w in self.inputs:
            if not 0 <= w < self.wire_count:
                raise CircuitError(f"input wire {w} out of range")
            if defined[w]:
                raise CircuitError(f"input wire {w} listed twice")
            defined[w] = True
        for i, g in enumerate(self.gates):
            if g.kind in (GateKind.XOR, GateKind.AND):
                used = (g.in1, g.in2)
            elif g.kind == GateKind.INV:
                used = (g.in1,)
            else:
                if g.in1 not in (0, 1):
                    raise CircuitError(f"gate {i}: constant must be 0 or 1", i)
                used = ()
            for w in used:
                if not 0 <= w < self.wire_count or not defined[w]:
                    raise CircuitError(f"gate {i} reads wire {w} before it is defined", i)
            if not 0 <= g.out < self.wire_count:
                raise CircuitError(f"gate {i} writes wire {g.out} out of range", i)
            if defined[g.out]:
                raise CircuitError(f"gate {i} redefines wire {g.out}", i)
            defined[g.out] = True
        if not defined.all():
            missing = int(np.flatnonzero(~defined)[0])
            raise CircuitError(f"wire {missing} is never defined")
        for w in self.outputs:
            if not 0 <= w < self.wire_count:
                raise CircuitError(f"output wire {w} out of range")

    @cached_property
    def schedule(self) -> list[dict]:
        """Gates grouped by level and kind, as index arrays, for batched passes."""
        self.validate()
        graph = level_circuit(self)
        and_index = np.cumsum([g.kind == GateKind.AND for g in self.gates]) - 1
        groups: dict[int, dict[GateKind, list[int]]] = {}
        for i, lvl in enumerate(graph.levels):
            groups.setdefault(int(lvl), {}).setdefault(self.gates[i].kind, []).append(i)
        out = []
        for lvl in sorted(groups):
            step = {}
            for kind, idx in groups[lvl].items():
                gs = [self.gates[i] for i in idx]
                step[kind] = {
                    "gate": np.array(idx, dtype=np.uint64),
                    "in1": np.array([g.in1 for g in gs], dtype=np.int64),
                    "in2": np.array([g.in2 for g in gs], dtype=np.int64),
                    "out": np.array([g.out for g in gs], dtype=np.int64),
                    "and": and_index[idx].astype(np.int64),
                }
            out.append(step)
        return out

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(CIRCUIT_MAGIC, CIRCUIT_VERSION, self.wire_count, len(self.gates))]
        parts += [_GATE.pack(int(g.kind), g.in1, g.in2, g.out) for g in self.gates]
        for ids in (self.garbler_inputs, self.evaluator_inputs, self.outputs):
            parts.append(struct.pack(f"<I{len(ids)}I", len(ids), *ids))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> BooleanCircuit:
        try:
            magic, version, wire_count, gate_count = _HEADER.unpack_from(data, 0)
        except struct.error as exc:
            raise CircuitError("truncated circuit header") from exc
        if magic != CIRCUIT_MAGIC:
            raise CircuitError("bad circuit magic")
        if version != CIRCUIT_VERSION:
            raise CircuitError(f"unsupported circuit version {version}")
        off = _HEADER.size
        try:
            gates = []
            for _ in range(gate_count):
                gates.append(Gate(*_GATE.unpack_from(data, off)))
                off += _GATE.size
            lists = []
            for _ in range(3):
                (count,) = struct.unpack_from("<I", data, off)
                lists.append(list(struct.unpack_from(f"<{count}I", data, off + 4)))
                off += 4 + 4 * count
        except (struct.error, ValueError) as exc:
            raise CircuitError("truncated or malformed circuit body") from exc
        if off != len(data):
            raise CircuitError("trailing bytes after circuit")
        circuit = cls(wire_count, gates, *lists)
        circuit.validate()
        return circuit


def plain_eval(circuit: BooleanCircuit, garbler_bits, evaluator_bits) -> list[int]:
    """Reference evaluator: one gate at a time on plain bits."""
    if len(garbler_bits) != len(circuit.garbler_inputs):
        raise CircuitError("wrong number of garbler input bits")
    if len(evaluator_bits) != len(circuit.evaluator_inputs):
        raise CircuitError("wrong number of evaluator input bits")
    value: list[int | None] = [None] * circuit.wire_count
    for w, b in zip(circuit.inputs, list(garbler_bits) + list(evaluator_bits)):
        value[w] = int(b) & 1
    for i, g in enumerate(circuit.gates):
        if g.kind == GateKind.CONST:
            value[g.out] = g.in1
            continue
        a = value[g.in1]
        if a is None:
            raise CircuitError(f"gate {i} reads undefined wire {g.in1}", i)
        if g.kind == GateKind.INV:
            value[g.out] = a ^ 1
            continue
        b = value[g.in2]
        if b is None:
            raise CircuitError(f"gate {i} reads undefined wire {g.in2}", i)
        value[g.out] = a ^ b if g.kind == GateKind.XOR else a & b
    return [value[w] for w in circuit.outputs]


def plain_eval_batch(circuit: BooleanCircuit, input_bits) -> np.ndarray:
    """Bit-sliced reference evaluator for many assignments at once.

    ``input_bits`` has shape (count, n_inputs) in ``circuit.inputs`` order;
    returns (count, n_outputs) uint8.
    """
    bits = np.asarray(input_bits, dtype=np.uint8)
    if bits.ndim != 2 or bits.shape[1] != len(circuit.inputs):
        raise CircuitError(f"expected (count, {len(circuit.inputs)}) input bits, got {bits.shape}")
    circuit.validate()
    value: list[np.ndarray | None] = [None] * circuit.wire_count
    for j, w in enumerate(circuit.inputs):
        value[w] = bits[:, j] & 1
    ones = np.ones(bits.shape[0], dtype=np.uint8)
    for g in circuit.gates:
        if g.kind == GateKind.CONST:
            value[g.out] = ones * g.in1
        elif g.kind == GateKind.INV:
            value[g.out] = value[g.in1] ^ 1
        elif g.kind == GateKind.XOR:
            value[g.out] = value[g.in1] ^ value[g.in2]
        else:
            value[g.out] = value[g.in1] & value[g.in2]
    return np.stack([value[w] for w in circuit.outputs], axis=1)


def level_circuit(circuit: BooleanCircuit) -> LevelGraph:
    """level(g) = 1 + max level of its producers; circuit inputs sit at level 0.

    Works on any gate order (Kahn's algorithm); raises on a cycle.
    """
    producer: dict[int, int] = {}
    for i, g in enumerate(circuit.gates):
        if g.out in producer:
            raise CircuitError(f"wire {g.out} driven by two gates", i)
        producer[g.out] = i
    n = len(circuit.gates)
    deps: list[list[int]] = [[] for _ in range(n)]
    pending = np.zeros(n, dtype=np.int64)
    consumers: list[list[int]] = [[] for _ in range(n)]
    inputs = set(circuit.inputs)
    for i, g in enumerate(circuit.gates):
        if g.kind == GateKind.CONST:
            srcs = ()
        elif g.kind == GateKind.INV:
            srcs = (g.in1,)
        else:
            srcs = (g.in1, g.in2)
        for w in srcs:
            if w in producer:
                deps[i].append(producer[w])
            elif w not in inputs:
                raise CircuitError(f"gate {i} reads wire {w} that nothing drives", i)
        for d in set(deps[i]):
            consumers[d].append(i)
        pending[i] = len(set(deps[i]))
    levels = np.zeros(n, dtype=np.int64)
    ready = [i for i in range(n) if pending[i] == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        levels[i] = 1 + max((levels[d] for d in deps[i]), default=0)
        for c in consumers[i]:
            pending[c] -= 1
            if pending[c] == 0:
                ready.append(c)
    if seen != n:
        stuck = int(np.flatnonzero(pending > 0)[0])
        raise CircuitError(f"cycle detected through gate {stuck}", stuck)
    hist = Counter(levels.tolist())
    return LevelGraph(levels, int(levels.max(initial=0)), dict(sorted(hist.items())))
