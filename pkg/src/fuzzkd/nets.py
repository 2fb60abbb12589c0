"""From-scratch dense and micro-CNN students with exact reverse-mode grads.

Two architectures: a ReLU MLP, and a small CNN whose core is one
depthwise-separable block (3x3 depthwise filter followed by a 1x1
pointwise mix, the MobileNet motif) behind an entry 3x3 convolution,
finished by global average pooling and a dense classifier.

Parameters live in a single dtype (float32 by default so checkpoints
round-trip bit-exactly; float64 for gradient audits). All ops are plain
numpy and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NetworkError(ValueError):
    """Raised on invalid specs or input dimension mismatches."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description decoupled from parameter values."""

    kind: str  # "mlp" | "micro_cnn"
    input_shape: tuple[int, ...]  # (d,) for mlp, (h, w) for micro_cnn
    n_classes: int
    hidden: tuple[int, ...] = (16,)  # mlp hidden widths
    conv_channels: int = 4  # micro_cnn entry conv
    ds_channels: int = 8  # micro_cnn depthwise-separable block output

    def __post_init__(self):
        if self.n_classes < 2:
            raise NetworkError(f"need >= 2 classes, got {self.n_classes}")
        if self.kind == "mlp":
            if len(self.input_shape) != 1 or self.input_shape[0] < 1:
                raise NetworkError(f"mlp wants input_shape (d,), got {self.input_shape}")
            if len(self.hidden) < 1 or any(w < 1 for w in self.hidden):
                raise NetworkError(f"mlp needs >= 1 positive hidden width, got {self.hidden}")
        elif self.kind == "micro_cnn":
            if len(self.input_shape) != 2 or min(self.input_shape) < 3:
                raise NetworkError(
                    f"micro_cnn wants input_shape (h, w) with h, w >= 3, got {self.input_shape}"
                )
            if self.conv_channels < 1 or self.ds_channels < 1:
                raise NetworkError("micro_cnn channel counts must be positive")
        else:
            raise NetworkError(f"unknown network kind {self.kind!r}")


class _Dense:
    def __init__(self, name, rng, d_in, d_out, dtype):
        scale = np.sqrt(2.0 / d_in)
        self.w = (rng.standard_normal((d_in, d_out)) * scale).astype(dtype)
        self.b = np.zeros(d_out, dtype=dtype)
        self.name = name
        self._x = None
        self.dw = None
        self.db = None

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, g):
        self.dw = self._x.T @ g
        self.db = g.sum(axis=0)
        return g @ self.w.T

    def tensors(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}

    def grad_tensors(self):
        return {f"{self.name}.w": self.dw, f"{self.name}.b": self.db}


class _Relu:
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, g):
        return g * self._mask

    def tensors(self):
        return {}

    def grad_tensors(self):
        return {}


def _pad1(x):
    return np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))


class _Conv3x3:
    """Standard 3x3 convolution, stride 1, same padding, NHWC layout."""

    def __init__(self, name, rng, c_in, c_out, dtype):
        scale = np.sqrt(2.0 / (9 * c_in))
        self.k = (rng.standard_normal((3, 3, c_in, c_out)) * scale).astype(dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.name = name
        self._xp = None
        self.dk = None
        self.db = None

    def forward(self, x):
        xp = _pad1(x)
        self._xp = xp
        n, h, w, _ = x.shape
        out = np.tile(self.b, (n, h, w, 1)).astype(x.dtype)
        for dy in range(3):
            for dx in range(3):
                out += xp[:, dy:dy + h, dx:dx + w, :] @ self.k[dy, dx]
        return out

    def backward(self, g):
        xp = self._xp
        n, h, w, _ = g.shape
        self.dk = np.zeros_like(self.k)
        self.db = g.sum(axis=(0, 1, 2))
        dxp = np.zeros_like(xp)
        for dy in range(3):
            for dx in range(3):
                patch = xp[:, dy:dy + h, dx:dx + w, :]
                self.dk[dy, dx] = np.einsum("nhwc,nhwo->co", patch, g)
                dxp[:, dy:dy + h, dx:dx + w, :] += g @ self.k[dy, dx].T
        return dxp[:, 1:-1, 1:-1, :]

    def tensors(self):
        return {f"{self.name}.k": self.k, f"{self.name}.b": self.b}

    def grad_tensors(self):
        return {f"{self.name}.k": self.dk, f"{self.name}.b": self.db}


class _DepthwiseConv3x3:
    """Per-channel 3x3 filtering, stride 1, same padding."""

    def __init__(self, name, rng, channels, dtype):
        scale = np.sqrt(2.0 / 9)
        self.k = (rng.standard_normal((3, 3, channels)) * scale).astype(dtype)
        self.b = np.zeros(channels, dtype=dtype)
        self.name = name
        self._xp = None
        self.dk = None
        self.db = None

    def forward(self, x):
        xp = _pad1(x)
        self._xp = xp
        n, h, w, c = x.shape
        out = np.tile(self.b, (n, h, w, 1)).astype(x.dtype)
        for dy in range(3):
            for dx in range(3):
                out += xp[:, dy:dy + h, dx:dx + w, :] * self.k[dy, dx]
        return out

    def backward(self, g):
        xp = self._xp
        n, h, w, c = g.shape
        self.dk = np.zeros_like(self.k)
        self.db = g.sum(axis=(0, 1, 2))
        dxp = np.zeros_like(xp)
        for dy in range(3):
            for dx in range(3):
                patch = xp[:, dy:dy + h, dx:dx + w, :]
                self.dk[dy, dx] = np.einsum("nhwc,nhwc->c", patch, g)
                dxp[:, dy:dy + h, dx:dx + w, :] += g * self.k[dy, dx]
        return dxp[:, 1:-1, 1:-1, :]

    def tensors(self):
        return {f"{self.name}.k": self.k, f"{self.name}.b": self.b}

    def grad_tensors(self):
        return {f"{self.name}.k": self.dk, f"{self.name}.b": self.db}


class _Pointwise:
    """1x1 convolution: a dense mix across channels at every pixel."""

    def __init__(self, name, rng, c_in, c_out, dtype):
        scale = np.sqrt(2.0 / c_in)
        self.w = (rng.standard_normal((c_in, c_out)) * scale).astype(dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.name = name
        self._x = None
        self.dw = None
        self.db = None

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, g):
        self.dw = np.einsum("nhwc,nhwo->co", self._x, g)
        self.db = g.sum(axis=(0, 1, 2))
        return g @ self.w.T

    def tensors(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}

    def grad_tensors(self):
        return {f"{self.name}.w": self.dw, f"{self.name}.b": self.db}


class _GlobalAvgPool:
    def __init__(self):
        self._hw = None

    def forward(self, x):
        self._hw = x.shape[1] * x.shape[2]
        self._shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, g):
        n, h, w, c = self._shape
        return np.broadcast_to(g[:, None, None, :] / self._hw, self._shape).astype(g.dtype)

    def tensors(self):
        return {}

    def grad_tensors(self):
        return {}


class Network:
    """A layer stack with forward, backward and named-tensor access."""

    def __init__(self, spec: NetworkSpec, seed: int = 0, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        layers = []
        if spec.kind == "mlp":
            dims = (spec.input_shape[0],) + spec.hidden + (spec.n_classes,)
            for i in range(len(dims) - 1):
                layers.append(_Dense(f"dense{i}", rng, dims[i], dims[i + 1], self.dtype))
                if i < len(dims) - 2:
                    layers.append(_Relu())
        else:
            layers.append(_Conv3x3("conv0", rng, 1, spec.conv_channels, self.dtype))
            layers.append(_Relu())
            layers.append(_DepthwiseConv3x3("ds_depth", rng, spec.conv_channels, self.dtype))
            layers.append(_Pointwise("ds_point", rng, spec.conv_channels, spec.ds_channels, self.dtype))
            layers.append(_Relu())
            layers.append(_GlobalAvgPool())
            layers.append(_Dense("head", rng, spec.ds_channels, spec.n_classes, self.dtype))
        self.layers = layers

    def _prepare(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if self.spec.kind == "mlp":
            if x.ndim == 1:
                x = x[None, :]
            if x.ndim != 2 or x.shape[1] != self.spec.input_shape[0]:
                raise NetworkError(
                    f"expected (n, {self.spec.input_shape[0]}) inputs, got {x.shape}"
                )
            return x
        if x.ndim == 2:
            x = x[None, :, :]
        if x.ndim != 3 or x.shape[1:] != self.spec.input_shape:
            raise NetworkError(
                f"expected (n, {self.spec.input_shape[0]}, {self.spec.input_shape[1]}) "
                f"inputs, got {x.shape}"
            )
        return x[:, :, :, None]

    def forward(self, x) -> np.ndarray:
        """Logits for a batch; accepts a single sample without the batch axis."""
        h = self._prepare(x)
        for layer in self.layers:
            h = layer.forward(h)
        if not np.all(np.isfinite(h)):
            raise NetworkError("non-finite activations in forward pass")
        return h.astype(np.float64)

    def backward(self, grad_logits) -> None:
        """Populate parameter gradients from d(loss)/d(logits)."""
        g = np.asarray(grad_logits, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None, :]
        for layer in reversed(self.layers):
            g = layer.backward(g)

    def tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.tensors())
        return out

    def grad_tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.grad_tensors())
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        """Copy named tensors into the network, checking names and shapes."""
        own = self.tensors()
        for name, arr in own.items():
            if name not in tensors:
                raise NetworkError(f"missing tensor {name!r} in checkpoint")
            src = np.asarray(tensors[name])
            if src.shape != arr.shape:
                raise NetworkError(
                    f"tensor {name!r} shape {src.shape} != expected {arr.shape}"
                )
            arr[...] = src.astype(self.dtype)

    def n_params(self) -> int:
        return sum(t.size for t in self.tensors().values())

    def predict(self, x) -> np.ndarray:
        return self.forward(x).argmax(axis=1)
