"""Quantized models over Z_p: file format, im2col lowering, reference inference.

Model file (JSON, integers in decimal)::

    {"format": "hybridpi-model", "version": 1, "name": "mlp3",
     "quant": {"p": 2097143, "f": 6},
     "input_shape": [16],
     "layers": [
        {"type": "fc", "in": 16, "out": 12, "weight": [[...], ...], "bias": [...]},
        {"type": "relu", "f": 6},
        {"type": "conv", "in_channels": 1, "out_channels": 2, "kernel": 3,
         "stride": 1, "pad": 1, "weight": [[[[...]]]], "bias": [...]},
        ...]}

A float model has the same layout without "quant" and with real-valued
weights; :func:`quantize_model` turns it into the integer form. Inputs and
weights sit at scale 2^f, biases at 2^{2f}; each ReLU shifts by its own f.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..sharing import matvec_mod

MODEL_FORMAT = "hybridpi-model"
MODEL_VERSION = 1
VECTOR_FORMAT = "hybridpi-vector"


# ---------------------------------------------------------------------------
# quantization


def quantize(values, f: int, p: int, what: str = "value") -> np.ndarray:
    """round(v * 2^f) mapped into Z_p; raises if |v * 2^f| >= p/2."""
    v = np.asarray(values, dtype=np.float64)
    scaled = v * float(1 << f)
    bad = np.flatnonzero(~(np.abs(scaled) < p / 2))
    if bad.size:
        i = int(bad[0])
        idx = np.unravel_index(i, v.shape) if v.ndim else ()
        raise ConfigError(
            f"{what} {v.flat[i]!r} at index {tuple(int(j) for j in idx)} overflows: "
            f"|v * 2^{f}| must stay below p/2 = {p / 2}"
        )
    return np.rint(scaled).astype(np.int64) % p


def centered(values, p: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64) % p
    return np.where(v > p // 2, v - p, v)


def dequantize(values, f: int, p: int) -> np.ndarray:
    return centered(values, p).astype(np.float64) / float(1 << f)


def relu_mod(s, p: int, f: int) -> np.ndarray:
    """(s < ceil(p/2) ? s >> f : 0) on representatives in [0, p)."""
    s = np.asarray(s, dtype=np.int64)
    return np.where(s < (p + 1) // 2, s >> f, 0)


# ---------------------------------------------------------------------------
# convolution lowering


def conv_output_shape(in_shape, out_channels: int, kernel: int, stride: int, pad: int):
    c, h, w = in_shape
    ho = (h + 2 * pad - kernel) // stride + 1
    wo = (w + 2 * pad - kernel) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ConfigError(f"kernel {kernel} does not fit input {h}x{w} with pad {pad}")
    return (out_channels, ho, wo)


def im2col_indices(in_shape, kernel: int, stride: int, pad: int) -> np.ndarray:
    """Flat input index for each (patch row, output position); -1 marks padding.

    Rows run over (channel, ky, kx), columns over output positions (oy, ox).
    """
    c, h, w = in_shape
    _, ho, wo = conv_output_shape(in_shape, 1, kernel, stride, pad)
    ci, ky, kx = np.meshgrid(np.arange(c), np.arange(kernel), np.arange(kernel), indexing="ij")
    oy, ox = np.meshgrid(np.arange(ho), np.arange(wo), indexing="ij")
    iy = oy.ravel()[None, :] * stride + ky.ravel()[:, None] - pad
    ix = ox.ravel()[None, :] * stride + kx.ravel()[:, None] - pad
    inside = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
    flat = ci.ravel()[:, None] * h * w + iy * w + ix
    return np.where(inside, flat, -1)


def im2col(x, in_shape, kernel: int, stride: int, pad: int) -> np.ndarray:
    """Patch matrix of shape (C*k*k, Ho*Wo) with zero padding."""
    idx = im2col_indices(in_shape, kernel, stride, pad)
    x = np.asarray(x).ravel()
    return np.where(idx >= 0, x[np.maximum(idx, 0)], 0)


def conv_matrix(weight: np.ndarray, in_shape, stride: int, pad: int) -> np.ndarray:
    """Dense matrix M with M @ x == conv(x), outputs in (channel, oy, ox) order."""
    weight = np.asarray(weight, dtype=np.int64)
    cout, cin, k, _ = weight.shape
    if cin != in_shape[0]:
        raise ConfigError(f"conv expects {cin} input channels, input has {in_shape[0]}")
    idx = im2col_indices(in_shape, k, stride, pad)  # (cin*k*k, npos)
    npos = idx.shape[1]
    M = np.zeros((cout, npos, int(np.prod(in_shape))), dtype=np.int64)
    wflat = weight.reshape(cout, -1)
    pos = np.broadcast_to(np.arange(npos), idx.shape)
    valid = idx >= 0
    for co in range(cout):
        vals = np.broadcast_to(wflat[co][:, None], idx.shape)
        np.add.at(M[co], (pos[valid], idx[valid]), vals[valid])
    return M.reshape(cout * npos, -1)


def direct_conv(x, in_shape, weight, bias, stride: int, pad: int, p: int) -> np.ndarray:
    """Loop-based convolution mod p (independent of the im2col path)."""
    c, h, w = in_shape
    weight = np.asarray(weight, dtype=np.int64)
    cout, _, k, _ = weight.shape
    xs = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=np.int64)
    xs[:, pad:pad + h, pad:pad + w] = np.asarray(x, dtype=np.int64).reshape(c, h, w)
    _, ho, wo = conv_output_shape(in_shape, cout, k, stride, pad)
    out = np.zeros((cout, ho, wo), dtype=np.int64)
    for co in range(cout):
        for oy in range(ho):
            for ox in range(wo):
                patch = xs[:, oy * stride:oy * stride + k, ox * stride:ox * stride + k]
                acc = int((patch * weight[co]).sum() % p)
                if bias is not None:
                    acc += int(bias[co])
                out[co, oy, ox] = acc % p
    return out.ravel()


# ---------------------------------------------------------------------------
# model representation


@dataclass
class LinearLayer:
    kind: str  # "fc" or "conv"
    weight: np.ndarray  # dense lowered matrix over Z_p
    bias: np.ndarray | None
    in_shape: tuple
    out_shape: tuple
    spec: dict = field(default_factory=dict, repr=False)

    @property
    def rows(self) -> int:
        return self.weight.shape[0]

    @property
    def cols(self) -> int:
        return self.weight.shape[1]


@dataclass
class Model:
    name: str
    p: int
    f: int
    input_shape: tuple
    linear: list[LinearLayer]
    relu_shifts: list[int]  # relu_shifts[i] follows linear[i]
    spec: dict = field(default_factory=dict, repr=False)

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def output_dim(self) -> int:
        return self.linear[-1].rows

    @property
    def relu_count(self) -> int:
        return sum(layer.rows for layer in self.linear[:-1])

    @property
    def relu_layers(self) -> list[int]:
        return [layer.rows for layer in self.linear[:-1]]

    def topology(self) -> dict:
        return {
            "p": self.p,
            "input_shape": list(self.input_shape),
            "layers": [[lay.kind, lay.rows, lay.cols] for lay in self.linear],
            "relu_shifts": list(self.relu_shifts),
        }

    def topology_hash(self) -> bytes:
        text = json.dumps(self.topology(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(b"hybridpi/topology\x00" + text.encode()).digest()


def _as_int_array(data, p: int, what: str) -> np.ndarray:
    arr = np.asarray(data, dtype=object)
    try:
        ints = np.array(arr.tolist(), dtype=np.int64)
    except (TypeError, ValueError, OverflowError) as exc:
        raise ConfigError(f"{what}: entries must be integers") from exc
    if ints.size and (ints.min() < 0 or ints.max() >= p):
        raise ConfigError(f"{what}: entries must lie in [0, p)")
    return ints


def build_model(spec: dict) -> Model:
    """Validate an integer model spec and lower every layer to a matrix."""
    if spec.get("format") != MODEL_FORMAT:
        raise ConfigError("not a hybridpi model file")
    if spec.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported model version {spec.get('version')}")
    try:
        p, f = int(spec["quant"]["p"]), int(spec["quant"]["f"])
        shape = tuple(int(d) for d in spec["input_shape"])
        layers = spec["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed model file: {exc}") from exc
    if not layers:
        raise ConfigError("model has no layers")

    linear: list[LinearLayer] = []
    shifts: list[int] = []
    expect_linear = True
    for i, layer in enumerate(layers):
        kind = layer.get("type")
        if kind == "relu":
            if expect_linear:
                raise ConfigError(f"layer {i}: ReLU must follow a linear layer")
            lf = int(layer.get("f", f))
            if not 0 <= lf < (p - 1).bit_length():
                raise ConfigError(f"layer {i}: ReLU shift {lf} out of range")
            shifts.append(lf)
            expect_linear = True
            continue
        if kind not in ("fc", "conv"):
            raise ConfigError(f"layer {i}: unknown layer type {kind!r}")
        if not expect_linear:
            raise ConfigError(f"layer {i}: two linear layers in a row are not supported; insert a ReLU")
        flat = int(np.prod(shape))
        if kind == "fc":
            n_in, n_out = int(layer["in"]), int(layer["out"])
            if n_in != flat:
                raise ConfigError(f"layer {i}: fc expects {n_in} inputs, previous layer gives {flat}")
            W = _as_int_array(layer["weight"], p, f"layer {i} weight")
            if W.shape != (n_out, n_in):
                raise ConfigError(f"layer {i}: weight shape {W.shape}, expected {(n_out, n_in)}")
            out_shape = (n_out,)
        else:
            if len(shape) != 3:
                raise ConfigError(f"layer {i}: conv needs a (C, H, W) input")
            k, stride, pad = int(layer["kernel"]), int(layer.get("stride", 1)), int(layer.get("pad", 0))
            cin, cout = int(layer["in_channels"]), int(layer["out_channels"])
            if cin != shape[0]:
                raise ConfigError(f"layer {i}: conv expects {cin} channels, input has {shape[0]}")
            if stride < 1 or pad < 0 or k < 1:
                raise ConfigError(f"layer {i}: invalid conv geometry")
            wt = _as_int_array(layer["weight"], p, f"layer {i} weight")
            if wt.shape != (cout, cin, k, k):
                raise ConfigError(f"layer {i}: conv weight shape {wt.shape}, expected {(cout, cin, k, k)}")
            out_shape = conv_output_shape(shape, cout, k, stride, pad)
            W = conv_matrix(wt, shape, stride, pad) % p
        bias = None
        if layer.get("bias") is not None:
            bias = _as_int_array(layer["bias"], p, f"layer {i} bias")
            if bias.shape != (out_shape[0],):
                raise ConfigError(f"layer {i}: bias has shape {bias.shape}, expected {(out_shape[0],)}")
            if kind == "conv":
                bias = np.repeat(bias, int(np.prod(out_shape[1:])))
        linear.append(LinearLayer(kind, W, bias, shape, out_shape, layer))
        shape = out_shape
        expect_linear = False
    if expect_linear:
        raise ConfigError("model must end with a linear layer")
    return Model(str(spec.get("name", "")), p, f, tuple(int(d) for d in spec["input_shape"]),
                 linear, shifts, spec)


def load_model(path: str | Path) -> Model:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from exc
    return build_model(spec)


def save_model_spec(spec: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec, separators=(",", ":")) + "\n")


def quantize_model(float_spec: dict, p: int, f: int) -> dict:
    """Float model spec -> integer spec (weights at 2^f, biases at 2^{2f})."""
    out = {k: v for k, v in float_spec.items() if k != "layers"}
    out.update(format=MODEL_FORMAT, version=MODEL_VERSION, quant={"p": int(p), "f": int(f)})
    layers = []
    for i, layer in enumerate(float_spec.get("layers", [])):
        layer = dict(layer)
        if layer.get("type") in ("fc", "conv"):
            layer["weight"] = quantize(layer["weight"], f, p, f"layer {i} weight").tolist()
            if layer.get("bias") is not None:
                layer["bias"] = quantize(layer["bias"], 2 * f, p, f"layer {i} bias").tolist()
        elif layer.get("type") == "relu":
            layer.setdefault("f", f)
        layers.append(layer)
    out["layers"] = layers
    return out


# ---------------------------------------------------------------------------
# plaintext reference


def linear_forward(layer: LinearLayer, x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if len(x) != layer.cols:
        raise ConfigError(f"input has {len(x)} entries, layer expects {layer.cols}")
    y = matvec_mod(layer.weight, x, p)
    if layer.bias is not None:
        y = (y + layer.bias) % p
    return y


def reference_infer(model: Model, x) -> np.ndarray:
    """Exactly the protocol's arithmetic, all in Z_p."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (model.input_dim,):
        raise ConfigError(f"input has shape {x.shape}, model expects ({model.input_dim},)")
    if x.size and (x.min() < 0 or x.max() >= model.p):
        raise ConfigError("input entries must lie in [0, p)")
    for i, layer in enumerate(model.linear):
        x = linear_forward(layer, x, model.p)
        if i < len(model.relu_shifts):
            x = relu_mod(x, model.p, model.relu_shifts[i])
    return x


def save_vector(values, path: str | Path, p: int, extra: dict | None = None) -> None:
    data = {"format": VECTOR_FORMAT, "version": 1, "p": int(p),
            "values": [int(v) for v in np.asarray(values).ravel()]}
    data.update(extra or {})
    Path(path).write_text(json.dumps(data) + "\n")


def load_vector(path: str | Path) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read vector file {path}: {exc}") from exc
    if data.get("format") != VECTOR_FORMAT:
        raise ConfigError(f"{path} is not a hybridpi vector file")
    return np.array(data["values"], dtype=np.int64)
