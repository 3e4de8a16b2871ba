"""Declarative network architectures with checkable shape arithmetic.

Four roles are built: the frame generator, the critic (Wasserstein
discriminator), the latent encoder, and the convolutional autoencoder
baseline. Each is described as a list of LayerSpec entries whose input and
output shapes are computed up front, so architecture errors surface before
any tensors exist. `build_module` realizes a spec as a torch module.

Shapes are per-sample (no batch dimension): (C, H, W) for conv stages and
(F,) for flat stages. Frame width W must be a multiple of 32 for the
generator and critic and a multiple of 64 for the encoder and autoencoder;
the strided layers then compose exactly to the documented flatten widths
(e.g. critic flatten 64*W, so 8192 at W=128).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

LATENT_DIM = 100
LEAKY_SLOPE = 0.2

ROLES = ("generator", "critic", "encoder", "cae")


@dataclass(frozen=True)
class LayerSpec:
    """One layer: kind plus the parameters that determine its shape map."""

    kind: str  # conv2d | tconv2d | batchnorm | leaky-relu | reshape | linear | tanh
    filters: int = 0
    kernel: tuple = (0, 0)
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    alpha: float = 0.0
    target: tuple = ()       # reshape only
    in_features: int = 0     # linear only
    out_features: int = 0    # linear only
    in_shape: tuple = ()
    out_shape: tuple = ()

    def describe(self) -> str:
        if self.kind == "conv2d":
            return (f"conv2d {self.filters} filters, kernel {self.kernel}, "
                    f"stride {self.stride}, padding {self.padding}")
        if self.kind == "tconv2d":
            return (f"tconv2d {self.filters} filters, kernel {self.kernel}, "
                    f"stride {self.stride}, padding {self.padding}")
        if self.kind == "batchnorm":
            return "batchnorm"
        if self.kind == "leaky-relu":
            return f"leaky-relu alpha={self.alpha}"
        if self.kind == "reshape":
            return f"reshape {self.in_shape} -> {self.out_shape}"
        if self.kind == "linear":
            return f"linear {self.in_features} -> {self.out_features}"
        if self.kind == "tanh":
            return "tanh"
        raise ValueError(f"unknown layer kind: {self.kind!r}")


def _conv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    num = size + 2 * padding - kernel
    if num < 0:
        raise ValueError(f"kernel {kernel} larger than padded input {size + 2 * padding}")
    return num // stride + 1

def _tconv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size - 1) * stride - 2 * padding + kernel
    if out <= 0:
        raise ValueError(f"transposed conv collapses dimension {size} to {out}")
    return out


def _layer_out_shape(layer: LayerSpec, in_shape: tuple) -> tuple:
    """Output shape of one layer for a given per-sample input shape."""
    kind = layer.kind
    if kind in ("batchnorm", "leaky-relu", "tanh"):
        return tuple(in_shape)
    if kind == "reshape":
        n_in = 1
        for d in in_shape:
            n_in *= d
        n_out = 1
        for d in layer.target:
            n_out *= d
        if n_in != n_out:
            raise ValueError(f"reshape cannot map {in_shape} ({n_in} elements) "
                             f"to {layer.target} ({n_out} elements)")
        return tuple(layer.target)
    if kind == "linear":
        if len(in_shape) != 1 or in_shape[0] != layer.in_features:
            raise ValueError(f"linear expects ({layer.in_features},), got {in_shape}")
        return (layer.out_features,)
    if kind in ("conv2d", "tconv2d"):
        if len(in_shape) != 3:
            raise ValueError(f"{kind} expects (C, H, W), got {in_shape}")
        _, h, w = in_shape
        f = _conv_out if kind == "conv2d" else _tconv_out
        return (layer.filters,
                f(h, layer.kernel[0], layer.stride[0], layer.padding[0]),
                f(w, layer.kernel[1], layer.stride[1], layer.padding[1]))
    raise ValueError(f"unknown layer kind: {kind!r}")


@dataclass
class NetworkSpec:
    """An ordered layer list with composed shapes for one network role."""

    role: str
    layers: list
    input_shape: tuple
    output_shape: tuple = ()
    latent_dim: int = LATENT_DIM
    feature_layer: int = -1  # index of the layer whose output is the critic feature map

    def describe(self) -> str:
        """Human-readable listing, one line per layer."""
        return "\n".join(layer.describe() for layer in self.layers)

    @property
    def feature_width(self) -> int:
        if self.feature_layer < 0:
            raise ValueError(f"{self.role} spec has no feature layer")
        return self.layers[self.feature_layer].out_shape[0]


class _SpecBuilder:
    """Accumulates layers while composing shapes."""

    def __init__(self, input_shape: tuple):
        self.input_shape = tuple(input_shape)
        self.shape = tuple(input_shape)
        self.layers: list = []

    def add(self, kind: str, **kw) -> LayerSpec:
        probe = LayerSpec(kind=kind, in_shape=self.shape, **kw)
        layer = replace(probe, out_shape=_layer_out_shape(probe, self.shape))
        self.layers.append(layer)
        self.shape = layer.out_shape
        return layer


def _encoder_conv_stack(b: _SpecBuilder) -> None:
    """Six strided conv blocks shared by the encoder and the CAE front end."""
    b.add("conv2d", filters=64, kernel=(2, 4), stride=(2, 2), padding=(1, 1))
    b.add("leaky-relu", alpha=LEAKY_SLOPE)
    for filters in (64, 128, 256, 512):
        b.add("conv2d", filters=filters, kernel=(2, 4), stride=(2, 2), padding=(1, 1))
        b.add("batchnorm")
        b.add("leaky-relu", alpha=LEAKY_SLOPE)
    b.add("conv2d", filters=1024, kernel=(2, 4), stride=(2, 2), padding=(1, 1))


def build_network(role: str, frame_width: int = 128) -> NetworkSpec:
    """Build the layer spec for one role at the given frame width."""
    w = int(frame_width)
    if role == "generator":
        if w % 32 != 0 or w < 32:
            raise ValueError(f"generator frame width must be a multiple of 32, got {w}")
        b = _SpecBuilder((LATENT_DIM,))
        b.add("reshape", target=(LATENT_DIM, 1, 1))
        b.add("tconv2d", filters=1024, kernel=(2, w // 32), stride=(1, 1), padding=(0, 0))
        b.add("batchnorm")
        b.add("leaky-relu", alpha=LEAKY_SLOPE)
        for filters in (512, 256, 128, 64):
            b.add("tconv2d", filters=filters, kernel=(2, 4), stride=(2, 2), padding=(1, 1))
            b.add("batchnorm")
            b.add("leaky-relu", alpha=LEAKY_SLOPE)
        b.add("tconv2d", filters=1, kernel=(2, 4), stride=(2, 2), padding=(1, 1))
        return NetworkSpec("generator", b.layers, b.input_shape, b.shape)

    if role == "critic":
        if w % 32 != 0 or w < 32:
            raise ValueError(f"critic frame width must be a multiple of 32, got {w}")
        b = _SpecBuilder((1, 2, w))
        b.add("conv2d", filters=64, kernel=(2, 4), stride=(2, 2), padding=(1, 1))
        b.add("leaky-relu", alpha=LEAKY_SLOPE)
        for filters in (128, 256, 512):
            b.add("conv2d", filters=filters, kernel=(2, 4), stride=(2, 2), padding=(1, 1))
            b.add("batchnorm")
            b.add("leaky-relu", alpha=LEAKY_SLOPE)
        b.add("conv2d", filters=1024, kernel=(2, 4), stride=(2, 2), padding=(1, 1))
        c, h, ww = b.shape
        flat = b.add("reshape", target=(c * h * ww,))
        b.add("linear", in_features=flat.out_shape[0], out_features=1)
        return NetworkSpec("critic", b.layers, b.input_shape, b.shape,
                           feature_layer=len(b.layers) - 2)

    if role == "encoder":
        if w % 64 != 0 or w < 64:
            raise ValueError(f"encoder frame width must be a multiple of 64, got {w}")
        b = _SpecBuilder((1, 2, w))
        _encoder_conv_stack(b)
        c, h, ww = b.shape
        b.add("reshape", target=(c * h * ww,))
        b.add("linear", in_features=c * h * ww, out_features=LATENT_DIM)
        b.add("tanh")
        return NetworkSpec("encoder", b.layers, b.input_shape, b.shape)

    if role == "cae":
        if w % 64 != 0 or w < 64:
            raise ValueError(f"cae frame width must be a multiple of 64, got {w}")
        b = _SpecBuilder((1, 2, w))
        _encoder_conv_stack(b)
        c, h, ww = b.shape
        flat = c * h * ww
        b.add("reshape", target=(flat,))
        b.add("linear", in_features=flat, out_features=LATENT_DIM)
        b.add("linear", in_features=LATENT_DIM, out_features=flat)
        b.add("reshape", target=(c, h, ww))
        for filters in (512, 256, 128, 64):
            b.add("tconv2d", filters=filters, kernel=(1, 2), stride=(1, 2), padding=(0, 0))
            b.add("leaky-relu", alpha=LEAKY_SLOPE)
            b.add("batchnorm")
        b.add("tconv2d", filters=64, kernel=(1, 2), stride=(1, 2), padding=(0, 0))
        b.add("leaky-relu", alpha=LEAKY_SLOPE)
        b.add("tconv2d", filters=1, kernel=(1, 2), stride=(1, 2), padding=(0, 0))
        return NetworkSpec("cae", b.layers, b.input_shape, b.shape)

    raise ValueError(f"unsupported role: {role!r}")


def infer_shapes(spec: NetworkSpec, input_shape: tuple) -> list:
    """Per-layer output shapes for a batched input shape.

    `input_shape` includes the batch dimension; each layer's per-sample
    input is validated against the spec before its output is computed.
    Raises ValueError naming the offending layer index on any mismatch.
    """
    if len(input_shape) < 2:
        raise ValueError(f"input shape needs a batch dimension: {input_shape}")
    batch = input_shape[0]
    shape = tuple(input_shape[1:])
    out = []
    for i, layer in enumerate(spec.layers):
        if shape != tuple(layer.in_shape):
            raise ValueError(f"layer {i} ({layer.kind}): expects input "
                             f"{tuple(layer.in_shape)}, got {shape}")
        try:
            shape = _layer_out_shape(layer, shape)
        except ValueError as exc:
            raise ValueError(f"layer {i} ({layer.kind}): {exc}") from exc
        out.append((batch,) + shape)
    return out


# ---------------------------------------------------------------------------
# Torch realization
# ---------------------------------------------------------------------------

class _Reshape(nn.Module):
    def __init__(self, target: tuple):
        super().__init__()
        self.target = tuple(target)

    def forward(self, x):
        return x.reshape(x.shape[0], *self.target)


def _to_torch_layer(layer: LayerSpec) -> nn.Module:
    if layer.kind == "conv2d":
        return nn.Conv2d(layer.in_shape[0], layer.filters, layer.kernel,
                         layer.stride, layer.padding)
    if layer.kind == "tconv2d":
        return nn.ConvTranspose2d(layer.in_shape[0], layer.filters, layer.kernel,
                                  layer.stride, layer.padding)
    if layer.kind == "batchnorm":
        return nn.BatchNorm2d(layer.in_shape[0])
    if layer.kind == "leaky-relu":
        return nn.LeakyReLU(layer.alpha)
    if layer.kind == "reshape":
        return _Reshape(layer.out_shape)
    if layer.kind == "linear":
        return nn.Linear(layer.in_features, layer.out_features)
    if layer.kind == "tanh":
        return nn.Tanh()
    raise ValueError(f"unknown layer kind: {layer.kind!r}")


class SpecModule(nn.Module):
    """A NetworkSpec realized as a sequential torch module.

    For the critic role, `features(x)` returns the flattened activation
    feeding the final linear layer.
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        self.role = spec.role
        self.layers = nn.ModuleList(_to_torch_layer(l) for l in spec.layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def features(self, x):
        if self.spec.feature_layer < 0:
            raise ValueError(f"{self.role} has no feature layer")
        for layer in self.layers[: self.spec.feature_layer + 1]:
            x = layer(x)
        return x

    @property
    def feature_width(self) -> int:
        return self.spec.feature_width


def build_module(role: str, frame_width: int = 128) -> SpecModule:
    return SpecModule(build_network(role, frame_width))


def sample_latent(n: int, generator: torch.Generator | None = None,
                  dim: int = LATENT_DIM) -> torch.Tensor:
    """Draw latent vectors from the uniform prior on [-1, 1]^dim."""
    u = torch.rand(n, dim, generator=generator)
    return u * 2.0 - 1.0


def validate_latent(z) -> torch.Tensor:
    z = torch.as_tensor(z, dtype=torch.float32)
    if z.shape[-1] != LATENT_DIM:
        raise ValueError(f"latent width must be {LATENT_DIM}, got {z.shape[-1]}")
    if z.abs().max() > 1.0:
        raise ValueError("latent entries must lie in [-1, 1]")
    return z
