"""Circuit construction with constant folding, and the ReLU block over Z_p.

Bits are little-endian lists. A bit is either a wire id (>= 0) or one of the
constants ZERO / ONE; the builder folds constants so that operations with a
public operand cost no gates, and only materializes a constant wire when a
circuit output needs one.
"""

from __future__ import annotations

from ..errors import CircuitError
from ..ring import is_prime
from .circuit import BooleanCircuit, Gate, GateKind

ZERO = -1
ONE = -2


def is_const(bit: int) -> bool:
    return bit < 0


class CircuitBuilder:
    def __init__(self):
        self.gates: list[Gate] = []
        self.wire_count = 0
        self.groups: dict[str, list[int]] = {}

    def _wire(self) -> int:
        w = self.wire_count
        self.wire_count += 1
        return w

    def inputs(self, name: str, width: int) -> list[int]:
        if self.gates:
            raise CircuitError("declare all inputs before adding gates")
        wires = [self._wire() for _ in range(width)]
        self.groups[name] = wires
        return wires

    def _emit(self, kind: GateKind, a: int, b: int = 0) -> int:
        out = self._wire()
        self.gates.append(Gate(kind, a, b, out))
        return out

    def xor(self, a: int, b: int) -> int:
        if a == ZERO:
            return b
        if b == ZERO:
            return a
        if a == ONE:
            return self.inv(b)
        if b == ONE:
            return self.inv(a)
        if a == b:
            return ZERO
        return self._emit(GateKind.XOR, a, b)

    def and_(self, a: int, b: int) -> int:
        if a == ZERO or b == ZERO:
            return ZERO
        if a == ONE:
            return b
        if b == ONE or a == b:
            return a
        return self._emit(GateKind.AND, a, b)

    def inv(self, a: int) -> int:
        if a == ZERO:
            return ONE
        if a == ONE:
            return ZERO
        return self._emit(GateKind.INV, a)

    def or_(self, a: int, b: int) -> int:
        return self.inv(self.and_(self.inv(a), self.inv(b)))

    def mux(self, sel: int, if_one: int, if_zero: int) -> int:
        return self.xor(if_zero, self.and_(sel, self.xor(if_one, if_zero)))

    def full_add(self, a: int, b: int, c: int) -> tuple[int, int]:
        """One-AND full adder: carry = c ^ ((a ^ c) & (b ^ c))."""
        s = self.xor(self.xor(a, b), c)
        carry = self.xor(c, self.and_(self.xor(a, c), self.xor(b, c)))
        return s, carry

    def add(self, xs: list[int], ys: list[int], carry: int = ZERO) -> tuple[list[int], int]:
        """Ripple-carry sum of equal-width operands; returns (sum bits, carry out)."""
        if len(xs) != len(ys):
            raise CircuitError("adder operands differ in width")
        out = []
        for a, b in zip(xs, ys):
            s, carry = self.full_add(a, b, carry)
            out.append(s)
        return out, carry

    def carry_out(self, xs: list[int], ys: list[int], carry: int = ZERO) -> int:
        """Carry chain only (no sum bits)."""
        for a, b in zip(xs, ys):
            carry = self.xor(carry, self.and_(self.xor(a, carry), self.xor(b, carry)))
        return carry

    def ge_const(self, xs: list[int], h: int) -> int:
        """[x >= h] for a public constant h, as the carry of x + (2^w - h)."""
        w = len(xs)
        if h <= 0:
            return ONE
        if h >= 1 << w:
            return ZERO
        return self.carry_out(xs, const_bits((1 << w) - h, w))

    def build(self, outputs: list[int], garbler: list[str], evaluator: list[str],
              name: str = "") -> BooleanCircuit:
        materialized = []
        for bit in outputs:
            if is_const(bit):
                bit = self._emit(GateKind.CONST, 1 if bit == ONE else 0)
            materialized.append(bit)
        circuit = BooleanCircuit(
            wire_count=self.wire_count,
            gates=list(self.gates),
            garbler_inputs=[w for g in garbler for w in self.groups[g]],
            evaluator_inputs=[w for g in evaluator for w in self.groups[g]],
            outputs=materialized,
            name=name,
        )
        circuit.validate()
        return circuit


def const_bits(value: int, width: int) -> list[int]:
    return [ONE if (value >> i) & 1 else ZERO for i in range(width)]


def relu_width(p: int) -> int:
    return (p - 1).bit_length()


def relu_plain(a: int, b: int, m: int, p: int, f: int) -> int:
    """((a+b mod p) < ceil(p/2) ? (a+b mod p) >> f : 0) - m  mod p."""
    s = (a + b) % p
    t = s >> f if s < (p + 1) // 2 else 0
    return (t - m) % p


def build_relu_block(p: int, f: int, client_garbler: bool = False) -> BooleanCircuit:
    """Circuit for ReLU(<y>_c + <y>_s) >> f  -  r_next over Z_p.

    Inputs are three k-bit little-endian groups in wire order a (client share),
    b (server share), m (client's next-layer mask). The server holds b; in
    the baseline the server garbles, so b is the garbler's input. With
    ``client_garbler`` the roles swap and a, m become garbler inputs.
    """
    if p < 3 or p % 2 == 0 or not is_prime(p):
        raise CircuitError(f"p={p} must be an odd prime")
    k = relu_width(p)
    if not 0 <= f < k:
        raise CircuitError(f"rescale shift f={f} must be in [0, {k})")
    bld = CircuitBuilder()
    a = bld.inputs("a", k)
    b = bld.inputs("b", k)
    m = bld.inputs("m", k)

    # s = (a + b) mod p, one conditional subtraction of p
    total, carry = bld.add(a, b)
    wide = total + [carry]
    ge = bld.ge_const(wide, p)
    minus_p = const_bits((1 << (k + 1)) - p, k)
    s, _ = bld.add(total, [bld.and_(ge, c) for c in minus_p])

    # negative values are the upper half [ceil(p/2), p)
    neg = bld.ge_const(s, (p + 1) // 2)
    keep = bld.inv(neg)
    t = [bld.and_(keep, bit) for bit in s[f:]] + [ZERO] * f

    # out = (t - m) mod p: two's-complement subtract, then add p back on borrow
    diff, no_borrow = bld.add(t, [bld.inv(bit) for bit in m], carry=ONE)
    borrow = bld.inv(no_borrow)
    out, _ = bld.add(diff, [bld.and_(borrow, c) for c in const_bits(p, k)])

    groups = (["a", "m"], ["b"]) if client_garbler else (["b"], ["a", "m"])
    return bld.build(out, garbler=groups[0], evaluator=groups[1],
                     name=f"relu(p={p},f={f},{'client' if client_garbler else 'server'}-garbler)")


def relu_input_groups(p: int) -> dict[str, range]:
    """Wire ranges of the a / b / m groups in a ReLU block."""
    k = relu_width(p)
    return {"a": range(0, k), "b": range(k, 2 * k), "m": range(2 * k, 3 * k)}
