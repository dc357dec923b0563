"""Boolean circuits, ReLU block construction and half-gates garbling."""

from .builder import (
    ONE,
    ZERO,
    CircuitBuilder,
    build_relu_block,
    const_bits,
    relu_input_groups,
    relu_plain,
    relu_width,
)
from .circuit import BooleanCircuit, Gate, GateKind, LevelGraph, level_circuit, plain_eval, plain_eval_batch
from .garble import (
    LABEL_BYTES,
    GarbledBatch,
    GarbledCircuit,
    InputEncoding,
    TweakHash,
    decode,
    evaluate,
    evaluate_batch,
    garble,
    garble_batch,
    gc_size_report,
    lsb,
    random_delta,
)

__all__ = [
    "ONE", "ZERO", "CircuitBuilder", "build_relu_block", "const_bits", "relu_input_groups",
    "relu_plain", "relu_width", "BooleanCircuit", "Gate", "GateKind", "LevelGraph",
    "level_circuit", "plain_eval", "plain_eval_batch", "LABEL_BYTES", "GarbledBatch", "GarbledCircuit",
    "InputEncoding", "TweakHash", "decode", "evaluate", "evaluate_batch", "garble",
    "garble_batch", "gc_size_report", "lsb", "random_delta",
]
