"""Shared oracles and generators for the test suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from hybridpi.gc import (
    BooleanCircuit,
    Gate,
    GateKind,
    decode,
    evaluate_batch,
    garble_batch,
    plain_eval_batch,
    relu_width,
)
from hybridpi.params import SystemParams
from hybridpi.rng import Rng

DATA = Path(__file__).resolve().parents[1] / "src" / "hybridpi" / "data"
MODELS = DATA / "models"
BUNDLED = ("mlp3", "conv", "conv2")


def bundled_params() -> SystemParams:
    return SystemParams.load(DATA / "params.json")


# ---------------------------------------------------------------------------
# ReLU block


def relu_formula(a, b, m, p: int, f: int) -> np.ndarray:
    a, b, m = (np.asarray(v, dtype=np.int64) for v in (a, b, m))
    s = (a + b) % p
    t = np.where(s < (p + 1) // 2, s >> f, 0)
    return (t - m) % p


def all_triples(p: int, stride: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx = np.arange(0, p ** 3, stride, dtype=np.int64)
    return idx // (p * p), (idx // p) % p, idx % p


def relu_input_bits(circuit: BooleanCircuit, p: int, a, b, m) -> np.ndarray:
    """Per-instance input bits in ``circuit.inputs`` order (wires a | b | m)."""
    k = relu_width(p)
    shifts = np.arange(k, dtype=np.int64)
    by_wire = np.concatenate([(np.asarray(v, dtype=np.int64)[:, None] >> shifts) & 1 for v in (a, b, m)], axis=1)
    return by_wire[:, np.array(circuit.inputs)].astype(np.uint8)


def bits_to_ints(bits: np.ndarray) -> np.ndarray:
    return (bits.astype(np.int64) << np.arange(bits.shape[1], dtype=np.int64)).sum(axis=1)


def gc_run(circuit: BooleanCircuit, bits: np.ndarray, rng: Rng) -> np.ndarray:
    """decode(evaluate(garble)) on a batch of input assignments."""
    batch = garble_batch(circuit, bits.shape[0], rng)
    active = batch.zero_labels ^ (bits.astype(np.uint64)[..., None] * batch.delta)
    out = evaluate_batch(circuit, batch.tables, active, batch.key, batch.tweak_base)
    return decode(out, batch.decode_bits)


def relu_mismatches(circuit: BooleanCircuit, p: int, f: int, a, b, m, rng: Rng | None = None,
                    chunk: int = 1 << 16) -> int:
    """Count disagreements with the closed formula; garbled when ``rng`` is set."""
    bad = 0
    for lo in range(0, len(a), chunk):
        sl = slice(lo, lo + chunk)
        bits = relu_input_bits(circuit, p, a[sl], b[sl], m[sl])
        out = gc_run(circuit, bits, rng) if rng is not None else plain_eval_batch(circuit, bits)
        bad += int(np.count_nonzero(bits_to_ints(out) != relu_formula(a[sl], b[sl], m[sl], p, f)))
    return bad


# ---------------------------------------------------------------------------
# random circuits


def random_circuit(gen: np.random.Generator, n_garbler: int, n_evaluator: int, n_gates: int,
                   n_outputs: int | None = None) -> BooleanCircuit:
    n_in = n_garbler + n_evaluator
    gates = []
    wire = n_in
    kinds = [GateKind.XOR, GateKind.AND, GateKind.INV, GateKind.CONST]
    for _ in range(n_gates):
        kind = kinds[gen.choice(4, p=[0.4, 0.4, 0.15, 0.05])]
        if kind == GateKind.CONST:
            gates.append(Gate(kind, int(gen.integers(2)), 0, wire))
        else:
            i1, i2 = (int(x) for x in gen.integers(0, wire, size=2))
            gates.append(Gate(kind, i1, i2 if kind != GateKind.INV else 0, wire))
        wire += 1
    n_out = n_outputs or int(gen.integers(1, min(8, wire) + 1))
    outputs = [int(x) for x in gen.choice(wire, size=n_out, replace=False)]
    return BooleanCircuit(wire, gates, list(range(n_garbler)), list(range(n_garbler, n_in)), outputs)
