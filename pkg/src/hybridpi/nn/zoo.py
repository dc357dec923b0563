"""Seeded model generators; the bundled models are produced by these."""

from __future__ import annotations

import numpy as np

from .model import MODEL_FORMAT, MODEL_VERSION, build_model, quantize, quantize_model

DEFAULT_F = 6


def _float_fc(gen: np.random.Generator, n_in: int, n_out: int, scale: float = 1.0) -> dict:
    w = gen.normal(0.0, scale / np.sqrt(n_in), size=(n_out, n_in))
    b = gen.normal(0.0, 0.1, size=n_out)
    return {"type": "fc", "in": n_in, "out": n_out, "weight": w.tolist(), "bias": b.tolist()}


def _float_conv(gen: np.random.Generator, cin: int, cout: int, k: int, stride: int, pad: int) -> dict:
    w = gen.normal(0.0, 1.0 / np.sqrt(cin * k * k), size=(cout, cin, k, k))
    b = gen.normal(0.0, 0.1, size=cout)
    return {"type": "conv", "in_channels": cin, "out_channels": cout, "kernel": k,
            "stride": stride, "pad": pad, "weight": w.tolist(), "bias": b.tolist()}


def float_mlp(widths: list[int], seed: int = 0, name: str = "mlp") -> dict:
    gen = np.random.default_rng(seed)
    layers = []
    for i, (a, b) in enumerate(zip(widths, widths[1:])):
        if i:
            layers.append({"type": "relu"})
        layers.append(_float_fc(gen, a, b))
    return {"name": name, "input_shape": [widths[0]], "layers": layers}


def float_convnet(seed: int = 0, name: str = "conv") -> dict:
    """1x6x6 input, 3x3 conv to 2 channels (stride 2, pad 1), ReLU, FC to 4."""
    gen = np.random.default_rng(seed)
    return {
        "name": name,
        "input_shape": [1, 6, 6],
        "layers": [_float_conv(gen, 1, 2, 3, 2, 1), {"type": "relu"}, _float_fc(gen, 18, 4)],
    }


def float_conv2(seed: int = 0, name: str = "conv2") -> dict:
    """Two conv stages: 2x4x4 -> 3x4x4 (3x3, pad 1) -> 2x2x2 (2x2, stride 2) -> FC 3."""
    gen = np.random.default_rng(seed)
    return {
        "name": name,
        "input_shape": [2, 4, 4],
        "layers": [
            _float_conv(gen, 2, 3, 3, 1, 1), {"type": "relu"},
            _float_conv(gen, 3, 2, 2, 2, 0), {"type": "relu"},
            _float_fc(gen, 8, 3),
        ],
    }


def bundled_specs(p: int, f: int = DEFAULT_F) -> dict[str, dict]:
    return {
        "mlp3": quantize_model(float_mlp([16, 12, 8, 4], seed=11, name="mlp3"), p, f),
        "conv": quantize_model(float_convnet(seed=12, name="conv"), p, f),
        "conv2": quantize_model(float_conv2(seed=13, name="conv2"), p, f),
    }


def random_input(model, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    """Quantized input drawn from N(0, scale^2) at the model's scale 2^f."""
    gen = np.random.default_rng(seed)
    lim = (model.p / 2 - 1) / (1 << model.f)
    v = np.clip(gen.normal(0.0, scale, size=model.input_dim), -lim, lim)
    return quantize(v, model.f, model.p)


def synthetic_model(rows: list[int], p: int, seed: int = 0, f: int = 0, name: str = "synthetic"):
    """Integer MLP with uniform weights mod p; widths rows[0] -> rows[1] -> ..."""
    gen = np.random.default_rng(seed)
    layers = []
    for i, (a, b) in enumerate(zip(rows, rows[1:])):
        if i:
            layers.append({"type": "relu", "f": f})
        layers.append({"type": "fc", "in": a, "out": b,
                       "weight": gen.integers(0, p, size=(b, a)).tolist(), "bias": None})
    spec = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "name": name,
            "quant": {"p": p, "f": f}, "input_shape": [rows[0]], "layers": layers}
    return build_model(spec)
