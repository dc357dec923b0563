import itertools

import numpy as np
import pytest

from hybridpi.errors import CircuitError
from hybridpi.gc import (
    BooleanCircuit,
    CircuitBuilder,
    Gate,
    GateKind,
    GarbledCircuit,
    build_relu_block,
    decode,
    evaluate,
    evaluate_batch,
    garble,
    garble_batch,
    gc_size_report,
    level_circuit,
    plain_eval,
    relu_plain,
    relu_width,
)
from hybridpi.rng import Rng

from helpers import all_triples, gc_run, random_circuit, relu_mismatches


def single(kind):
    return BooleanCircuit(3, [Gate(kind, 0, 1, 2)], [0], [1], [2])


def run_one(circuit, bits, seed=0):
    gc, enc = garble(circuit, Rng(seed))
    return list(decode(evaluate(circuit, gc, enc.encode(bits)), gc.decode_bits))


def test_single_and_truth_table():
    c = single(GateKind.AND)
    for a, b in itertools.product((0, 1), repeat=2):
        assert run_one(c, [a, b]) == [a & b]


def test_xor_only_is_free():
    c = single(GateKind.XOR)
    gc, _ = garble(c, Rng(1))
    assert gc.tables.shape[0] == 0 and gc.nbytes == 1
    assert gc_size_report(c)["table_bytes"] == 0
    for a, b in itertools.product((0, 1), repeat=2):
        assert run_one(c, [a, b]) == [a ^ b]


def test_one_and_costs_32_bytes():
    assert gc_size_report(single(GateKind.AND))["table_bytes"] == 32


def test_passthrough_returns_input_label():
    c = BooleanCircuit(2, [], [0], [1], [1])
    gc, enc = garble(c, Rng(2))
    active = enc.encode([0, 1])
    out = evaluate(c, gc, active)
    assert np.array_equal(out[0], active[1])
    assert list(decode(out, gc.decode_bits)) == [1]


def test_random_circuits_match_plain():
    gen = np.random.default_rng(5)
    rng = Rng(5)
    for i in range(300):
        ng, ne = int(gen.integers(0, 5)), int(gen.integers(1, 5))
        c = random_circuit(gen, ng, ne, int(gen.integers(1, 65)))
        bits = gen.integers(0, 2, size=(16, ng + ne)).astype(np.uint8)
        got = gc_run(c, bits, rng.derive(i))
        want = np.array([plain_eval(c, b[:ng], b[ng:]) for b in bits])
        assert np.array_equal(got, want), i
        assert gc_size_report(c)["table_bytes"] == 32 * c.counts()["AND"]


def test_exhaustive_small_inputs():
    gen = np.random.default_rng(6)
    for i in range(20):
        n_in = int(gen.integers(1, 9))
        ng = int(gen.integers(0, n_in + 1))
        c = random_circuit(gen, ng, n_in - ng, 40)
        bits = np.array(list(itertools.product((0, 1), repeat=n_in)), dtype=np.uint8)
        got = gc_run(c, bits, Rng(i))
        want = np.array([plain_eval(c, b[:ng], b[ng:]) for b in bits])
        assert np.array_equal(got, want)


def test_delta_invariant():
    c = build_relu_block(97, 2)
    batch = garble_batch(c, 3, Rng(7))
    assert batch.delta[0] & 1 == 1
    one_labels = batch.zero_labels ^ batch.delta
    assert np.all((one_labels ^ batch.zero_labels) == batch.delta)


def test_bad_table_length():
    c = build_relu_block(7, 0)
    gc, enc = garble(c, Rng(8))
    short = GarbledCircuit(gc.tables[:-1], gc.decode_bits)
    with pytest.raises(CircuitError):
        evaluate(c, short, enc.encode([0] * len(c.inputs)))
    with pytest.raises(CircuitError):
        decode(np.zeros((3, 2), dtype=np.uint64), np.zeros(2, dtype=np.uint8))
    batch = garble_batch(c, 2, Rng(9))
    with pytest.raises(CircuitError):
        evaluate_batch(c, batch.tables[:1], batch.zero_labels)


def test_serialization_roundtrips():
    c = build_relu_block(97, 1)
    assert BooleanCircuit.from_bytes(c.to_bytes()).gates == c.gates
    gc, _ = garble(c, Rng(10))
    back = GarbledCircuit.from_bytes(gc.to_bytes())
    assert np.array_equal(back.tables, gc.tables) and np.array_equal(back.decode_bits, gc.decode_bits)
    with pytest.raises(CircuitError):
        GarbledCircuit.from_bytes(gc.to_bytes()[:-1])
    with pytest.raises(CircuitError):
        BooleanCircuit.from_bytes(b"nope")


def test_validation():
    with pytest.raises(CircuitError):
        BooleanCircuit(3, [Gate(GateKind.AND, 0, 2, 2)], [0], [1], [2]).validate()
    bad = BooleanCircuit(3, [Gate(GateKind.AND, 0, 1, 2)], [0], [1], [2])
    with pytest.raises(CircuitError):
        plain_eval(bad, [0, 1], [1])


def test_levels():
    bld = CircuitBuilder()
    x = bld.inputs("x", 2)
    w = x[0]
    for _ in range(5):
        w = bld.and_(w, x[1])
    chain = bld.build([w], ["x"], [])
    assert level_circuit(chain).max_level == 5
    bld = CircuitBuilder()
    x = bld.inputs("x", 8)
    par = bld.build([bld.and_(x[2 * i], x[2 * i + 1]) for i in range(4)], ["x"], [])
    assert level_circuit(par).max_level == 1

    def adder_depth(k):
        bld = CircuitBuilder()
        a, b = bld.inputs("a", k), bld.inputs("b", k)
        s, c = bld.add(a, b)
        return level_circuit(bld.build(s + [c], ["a"], ["b"])).max_level

    depths = [adder_depth(k) for k in (4, 8, 16)]
    assert depths[1] - depths[0] > 0 and (depths[2] - depths[1]) == 2 * (depths[1] - depths[0])


def test_relu_plain_examples():
    assert relu_plain(5, 4, 0, 7, 0) == 2
    assert relu_plain(5, 0, 3, 7, 0) == (0 - 3) % 7


@pytest.mark.parametrize("p", [7, 97, 127])
@pytest.mark.parametrize("f", [0, 1, 2])
@pytest.mark.parametrize("cg", [False, True])
def test_relu_block_exhaustive_plain(p, f, cg):
    c = build_relu_block(p, f, cg)
    assert relu_mismatches(c, p, f, *all_triples(p)) == 0


def test_relu_block_garbled_p7_exhaustive():
    for f in (0, 1, 2):
        for cg in (False, True):
            c = build_relu_block(7, f, cg)
            assert relu_mismatches(c, 7, f, *all_triples(7), rng=Rng(f)) == 0


def test_relu_block_garbled_sampled():
    c = build_relu_block(97, 2)
    assert relu_mismatches(c, 97, 2, *all_triples(97, stride=31), rng=Rng(11)) == 0


def test_relu_gc_asymmetry():
    c = build_relu_block(2097143, 6)
    rep = gc_size_report(c)
    assert relu_width(2097143) == 21
    assert rep["evaluator_bytes"] > rep["garbler_bytes"]
    assert rep["table_bytes"] == 32 * c.and_count


def test_relu_bad_params():
    with pytest.raises(CircuitError):
        build_relu_block(8, 0)
    with pytest.raises(CircuitError):
        build_relu_block(7, 3)
