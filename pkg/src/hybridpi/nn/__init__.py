"""Quantized neural network models and plaintext reference inference."""

from .model import (
    LinearLayer,
    Model,
    build_model,
    centered,
    conv_matrix,
    conv_output_shape,
    dequantize,
    direct_conv,
    im2col,
    im2col_indices,
    linear_forward,
    load_model,
    load_vector,
    quantize,
    quantize_model,
    reference_infer,
    relu_mod,
    save_model_spec,
    save_vector,
)
from .zoo import bundled_specs, float_conv2, float_convnet, float_mlp, random_input, synthetic_model

__all__ = [
    "LinearLayer", "Model", "build_model", "centered", "conv_matrix", "conv_output_shape",
    "dequantize", "direct_conv", "im2col", "im2col_indices", "linear_forward", "load_model",
    "load_vector", "quantize", "quantize_model", "reference_infer", "relu_mod",
    "save_model_spec", "save_vector", "bundled_specs", "float_conv2", "float_convnet",
    "float_mlp", "random_input", "synthetic_model",
]
