"""Network layers with hand-derived gradients, double precision throughout.

Conventions: dense inputs are (batch, features); image inputs are
(batch, channels, height, width). Convolutions are 3x3 cross-correlations
with stride 1 and zero padding 1; max-pooling is 2x2 stride 2 with floor
semantics on odd sides (the trailing row/column is dropped). Batch norm
normalizes per channel with batch statistics in train mode and running
averages (momentum 0.1) in eval mode.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ContractError


class Param:
    """A trainable array plus its gradient slot."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)


class Layer:
    def params(self) -> list[Param]:
        return []

    def buffers(self) -> list[np.ndarray]:
        """Non-trainable state that belongs in a weight snapshot."""
        return []

    def forward(self, x: np.ndarray, mode: str) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        # He initialization; biases start at zero
        scale = np.sqrt(2.0 / n_in)
        self.w = Param("w", rng.normal(0.0, scale, size=(n_in, n_out)))
        self.b = Param("b", np.zeros(n_out))
        self._x = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, mode):
        if x.ndim != 2 or x.shape[1] != self.w.value.shape[0]:
            raise ContractError(
                f"dense expects (batch, {self.w.value.shape[0]}), got {x.shape}"
            )
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dout):
        self.w.grad = self._x.T @ dout
        self.b.grad = dout.sum(axis=0)
        return dout @ self.w.value.T


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, mode):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask


class Conv2d(Layer):
    """3x3 cross-correlation, stride 1, zero padding 1 (shape-preserving)."""

    KERNEL = 3

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator):
        fan_in = c_in * self.KERNEL * self.KERNEL
        scale = np.sqrt(2.0 / fan_in)
        self.w = Param("w", rng.normal(0.0, scale, size=(c_out, c_in, self.KERNEL, self.KERNEL)))
        self.b = Param("b", np.zeros(c_out))
        self._patches = None
        self._x_shape = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, mode):
        if x.ndim != 4 or x.shape[1] != self.w.value.shape[1]:
            raise ContractError(
                f"conv expects (batch, {self.w.value.shape[1]}, h, w), got {x.shape}"
            )
        batch, _, height, width = x.shape
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        # (B, C, H, W, 3, 3) views, flattened to one (B*H*W, C*9) matmul
        patches = sliding_window_view(padded, (self.KERNEL, self.KERNEL), axis=(2, 3))
        patches = np.ascontiguousarray(patches.transpose(0, 2, 3, 1, 4, 5))
        self._patches = patches.reshape(batch * height * width, -1)
        self._x_shape = x.shape
        c_out = self.w.value.shape[0]
        w_mat = self.w.value.reshape(c_out, -1)
        out = self._patches @ w_mat.T + self.b.value
        return out.reshape(batch, height, width, c_out).transpose(0, 3, 1, 2)

    def backward(self, dout):
        batch, c_out, height, width = dout.shape
        dout_mat = dout.transpose(0, 2, 3, 1).reshape(-1, c_out)
        self.w.grad = (dout_mat.T @ self._patches).reshape(self.w.value.shape)
        self.b.grad = dout_mat.sum(axis=0)
        dpadded = np.zeros(
            (batch, self._x_shape[1], height + 2, width + 2)
        )
        for di in range(self.KERNEL):
            for dj in range(self.KERNEL):
                # dL/dx_pad[i+di, j+dj] += sum_o dout[o,i,j] * w[o,c,di,dj]
                contribution = np.tensordot(dout, self.w.value[:, :, di, dj], axes=([1], [0]))
                dpadded[:, :, di : di + height, dj : dj + width] += contribution.transpose(0, 3, 1, 2)
        return dpadded[:, :, 1 : 1 + self._x_shape[2], 1 : 1 + self._x_shape[3]]


class MaxPool2d(Layer):
    """2x2 stride-2 pooling; records the argmax for gradient routing."""

    def __init__(self):
        self._argmax = None
        self._x_shape = None

    def forward(self, x, mode):
        batch, channels, height, width = x.shape
        h2, w2 = height // 2, width // 2
        if h2 < 1 or w2 < 1:
            raise ContractError(f"cannot pool a {height}x{width} map")
        cropped = x[:, :, : h2 * 2, : w2 * 2]
        windows = (
            cropped.reshape(batch, channels, h2, 2, w2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(batch, channels, h2, w2, 4)
        )
        self._argmax = windows.argmax(axis=-1)  # ties -> first, deterministic
        self._x_shape = x.shape
        return np.take_along_axis(windows, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        batch, channels, h2, w2 = dout.shape
        slots = np.zeros((batch, channels, h2, w2, 4))
        np.put_along_axis(slots, self._argmax[..., None], dout[..., None], axis=-1)
        dx = np.zeros(self._x_shape)
        dx[:, :, : h2 * 2, : w2 * 2] = (
            slots.reshape(batch, channels, h2, w2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(batch, channels, h2 * 2, w2 * 2)
        )
        return dx


class BatchNorm(Layer):
    """Per-channel batch normalization for dense (B, D) or conv (B, C, H, W)."""

    def __init__(self, n_channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Param("gamma", np.ones(n_channels))
        self.beta = Param("beta", np.zeros(n_channels))
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(n_channels)
        self.running_var = np.ones(n_channels)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [self.running_mean, self.running_var]

    def _axes_and_shape(self, x):
        if x.ndim == 2:
            return (0,), (1, -1)
        if x.ndim == 4:
            return (0, 2, 3), (1, -1, 1, 1)
        raise ContractError(f"batchnorm expects 2-D or 4-D input, got {x.ndim}-D")

    def forward(self, x, mode):
        axes, shape = self._axes_and_shape(x)
        gamma = self.gamma.value.reshape(shape)
        beta = self.beta.value.reshape(shape)
        if mode == "train":
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
            m = x.size // x.shape[1] if x.ndim == 4 else x.shape[0]
            self._cache = (xhat, inv_std, axes, shape, m)
            return gamma * xhat + beta
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        xhat = (x - self.running_mean.reshape(shape)) * inv_std.reshape(shape)
        self._cache = (xhat, inv_std, axes, shape, None)  # eval: no batch-stat terms
        return gamma * xhat + beta

    def backward(self, dout):
        xhat, inv_std, axes, shape, m = self._cache
        self.gamma.grad = (dout * xhat).sum(axis=axes)
        self.beta.grad = dout.sum(axis=axes)
        gamma = self.gamma.value.reshape(shape)
        dxhat = dout * gamma
        if m is None:  # eval mode: running stats are constants
            return dxhat * inv_std.reshape(shape)
        sum_dxhat = dxhat.sum(axis=axes, keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=axes, keepdims=True)
        return (inv_std.reshape(shape) / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)


class Flatten(Layer):
    def __init__(self):
        self._x_shape = None

    def forward(self, x, mode):
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._x_shape)
